#include "emeforge/audit.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include <json.hpp>

#include "emeforge/license_server.hpp"

namespace emeforge::audit {

using protocol::MessageKind;
using ua::Direction;

std::string_view to_string(Rule r) {
  switch (r) {
    case Rule::kRq1ClearClientIdInLicenseRequest: return "RQ1_CLEAR_CLIENT_ID_IN_LICENSE_REQUEST";
    case Rule::kRq2ClearClientIdInRenewal: return "RQ2_CLEAR_CLIENT_ID_IN_RENEWAL";
    case Rule::kRq3SessionDespiteCookieBlock: return "RQ3_SESSION_DESPITE_COOKIE_BLOCK";
    case Rule::kRq3SessionSurvivesWipe: return "RQ3_SESSION_SURVIVES_WIPE";
    case Rule::kRq3CrossOriginLeak: return "RQ3_CROSS_ORIGIN_LEAK";
    case Rule::kRq3SessionsHiddenFromStorageUi: return "RQ3_SESSIONS_HIDDEN_FROM_STORAGE_UI";
    case Rule::kFpUniqueCertSerial: return "FP_UNIQUE_CERT_SERIAL";
    case Rule::kUaConflict: return "UA_CONFLICT";
    case Rule::kNesnDistinctiveSuffix: return "NESN_DISTINCTIVE_SUFFIX";
    case Rule::kPermSilentEmeAccess: return "PERM_SILENT_EME_ACCESS";
  }
  return "?";
}

std::string_view to_string(Severity s) {
  switch (s) {
    case Severity::kInfo: return "INFO";
    case Severity::kWarn: return "WARN";
    case Severity::kViolation: return "VIOLATION";
  }
  return "?";
}

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::kCompliant: return "COMPLIANT";
    case Verdict::kNoncompliant: return "NONCOMPLIANT";
    case Verdict::kNotApplicable: return "NOT_APPLICABLE";
  }
  return "?";
}

std::string_view to_string(Question q) {
  switch (q) {
    case Question::kRq1: return "RQ1";
    case Question::kRq2: return "RQ2";
    case Question::kRq3: return "RQ3";
  }
  return "?";
}

std::string_view to_string(FingerprintClass c) {
  return c == FingerprintClass::kUniqueDevice ? "UNIQUE_DEVICE" : "SHARED_PER_CDM_VERSION";
}

std::optional<Question> question_of(Rule r) {
  switch (r) {
    case Rule::kRq1ClearClientIdInLicenseRequest: return Question::kRq1;
    case Rule::kRq2ClearClientIdInRenewal: return Question::kRq2;
    case Rule::kRq3SessionDespiteCookieBlock:
    case Rule::kRq3SessionSurvivesWipe:
    case Rule::kRq3CrossOriginLeak:
    case Rule::kRq3SessionsHiddenFromStorageUi: return Question::kRq3;
    default: return std::nullopt;
  }
}

// ---- report ----

bool AuditReport::any_noncompliant() const {
  return std::any_of(verdicts.begin(), verdicts.end(),
                     [](const auto& kv) { return kv.second == Verdict::kNoncompliant; });
}

std::size_t AuditReport::count(Rule r) const {
  return static_cast<std::size_t>(
      std::count_if(findings.begin(), findings.end(), [&](const Finding& f) { return f.rule == r; }));
}

std::size_t AuditReport::add_log(std::string line) {
  log.push_back(std::move(line));
  return log.size() - 1;
}

void AuditReport::merge(const AuditReport& other) {
  std::size_t base = log.size();
  log.insert(log.end(), other.log.begin(), other.log.end());
  for (Finding f : other.findings) {
    for (auto& e : f.evidence) {
      if (e.source == "log") e.index += base;
    }
    findings.push_back(std::move(f));
  }
  for (const auto& [q, v] : other.verdicts) verdicts[q] = v;
  if (!fingerprint) fingerprint = other.fingerprint;
  if (!augmented_ua) augmented_ua = other.augmented_ua;
}

// ---- trace audit ----

namespace {

std::optional<std::size_t> find_bytes(ByteView haystack, ByteView needle) {
  if (needle.empty()) return std::nullopt;
  auto it = std::search(haystack.begin(), haystack.end(), needle.begin(), needle.end());
  if (it == haystack.end()) return std::nullopt;
  return static_cast<std::size_t>(it - haystack.begin());
}

Evidence span_evidence(std::size_t index, ByteView record, ByteView part) {
  Evidence e{"trace", index, std::nullopt, std::nullopt};
  if (auto off = find_bytes(record, part)) {
    e.offset = off;
    e.length = part.size();
  }
  return e;
}

Verdict verdict_for(std::size_t observed, bool violated) {
  if (observed == 0) return Verdict::kNotApplicable;
  return violated ? Verdict::kNoncompliant : Verdict::kCompliant;
}

}  // namespace

AuditReport audit_trace(const ua::FlowTrace& trace, std::string subject, TraceAuditOptions options) {
  AuditReport report;
  report.subject = std::move(subject);

  std::size_t license_requests = 0, renewal_requests = 0;
  std::optional<std::size_t> ua_index;
  std::string claimed_ua;
  std::optional<std::size_t> clear_index;
  identity::ClientId clear_cid;

  for (std::size_t i = 0; i < trace.records.size(); ++i) {
    const auto& r = trace.records[i];
    if (r.dir == Direction::kEvent) {
      if (r.kind == ua::kEventUserAgent) {
        ua_index = i;
        claimed_ua = to_text(r.body);
      } else if (r.kind == ua::kEventAccessGranted && to_text(r.body) == "silent") {
        report.findings.push_back({Rule::kPermSilentEmeAccess, Severity::kWarn,
                                   {Evidence{"trace", i, std::nullopt, std::nullopt}},
                                   "DRM access granted without asking the user"});
      }
      continue;
    }

    auto reject = [&](const std::string& why) {
      if (!options.lenient) {
        fail(ErrorCode::kTraceCorrupt, "trace record " + std::to_string(i) + ": " + why);
      }
      report.add_log("record " + std::to_string(i) + " (" + r.kind + ", " +
                     std::to_string(r.body.size()) + " bytes) skipped: " + why);
    };

    MessageKind kind;
    try {
      kind = protocol::parse_message_kind(r.kind);
    } catch (const Error& e) {
      reject(e.what());
      continue;
    }

    // Message records hold a SignedMessage; lenient mode also accepts a bare
    // message body.
    Bytes body;
    try {
      auto sm = protocol::SignedMessage::decode(r.body);
      if (sm.kind != kind) fail(ErrorCode::kKindMismatch, "record kind disagrees with message kind");
      body = std::move(sm.body);
    } catch (const Error& e) {
      if (!options.lenient) {
        reject(e.what());
        continue;
      }
      body = r.body;
    }

    try {
      switch (kind) {
        case MessageKind::kLicenseRequest: {
          auto lr = protocol::decode_license_request(body);
          ++license_requests;
          if (const auto* cid = std::get_if<identity::ClientId>(&lr.client_id)) {
            report.findings.push_back(
                {Rule::kRq1ClearClientIdInLicenseRequest, Severity::kViolation,
                 {span_evidence(i, r.body, cid->encode())},
                 "license request carries a clear Client ID (device serial " +
                     to_hex(cid->chain.device_cert.serial) + ")"});
            if (!clear_index) clear_index = i, clear_cid = *cid;
          }
          break;
        }
        case MessageKind::kRenewalRequest: {
          auto rr = protocol::decode_renewal_request(body);
          ++renewal_requests;
          if (rr.client_id()) {
            if (const auto* cid = std::get_if<identity::ClientId>(&*rr.client_id())) {
              report.findings.push_back(
                  {Rule::kRq2ClearClientIdInRenewal, Severity::kViolation,
                   {span_evidence(i, r.body, cid->encode())},
                   "renewal request carries a clear Client ID (device serial " +
                       to_hex(cid->chain.device_cert.serial) + ")"});
              if (!clear_index) clear_index = i, clear_cid = *cid;
            }
          }
          break;
        }
        case MessageKind::kLicenseResponse:
        case MessageKind::kRenewalResponse: {
          std::optional<Bytes> ott = kind == MessageKind::kLicenseResponse
                                         ? protocol::decode_license_response(body).ott_field
                                         : protocol::decode_renewal_response(body).ott_field;
          if (!ott) break;
          try {
            auto nesn = parse_nesn(to_text(*ott));
            if (nesn.finding) {
              nesn.finding->evidence.push_back(span_evidence(i, r.body, *ott));
              report.findings.push_back(std::move(*nesn.finding));
            }
          } catch (const Error&) {
            // Provider-defined field that is not an NESN.
          }
          break;
        }
        case MessageKind::kServiceCertificate: break;
      }
    } catch (const Error& e) {
      reject(e.what());
    }
  }

  report.verdicts[Question::kRq1] = verdict_for(license_requests, report.count(Rule::kRq1ClearClientIdInLicenseRequest) > 0);
  report.verdicts[Question::kRq2] = verdict_for(renewal_requests, report.count(Rule::kRq2ClearClientIdInRenewal) > 0);
  report.verdicts[Question::kRq3] = Verdict::kNotApplicable;

  if (clear_index) {
    report.fingerprint = extract_fingerprint(clear_cid);
    report.augmented_ua = build_augmented_ua(clear_cid.info);
    Evidence at{"trace", *clear_index, std::nullopt, std::nullopt};
    if (report.fingerprint->cls == FingerprintClass::kUniqueDevice) {
      report.findings.push_back({Rule::kFpUniqueCertSerial, Severity::kWarn, {at},
                                 "device-unique certificate serial " +
                                     report.fingerprint->serial_hex + " exposed"});
    }
    if (!ua_index && options.claimed_ua) claimed_ua = *options.claimed_ua;
    if (ua_index || options.claimed_ua) {
      if (auto conflict = detect_ua_conflict(claimed_ua, clear_cid.info)) {
        if (ua_index) conflict->evidence.push_back({"trace", *ua_index, std::nullopt, std::nullopt});
        conflict->evidence.push_back(at);
        report.findings.push_back(std::move(*conflict));
      }
    }
  }
  return report;
}

// ---- persistence battery ----

namespace {

constexpr const char* kOriginA = "https://site-a.example";
constexpr const char* kOriginB = "https://site-b.example";
constexpr const char* kProfileP = "default";
constexpr const char* kProfileQ = "second-profile";

bool reopens(ua::UserAgent& agent, const std::string& origin, const std::string& profile,
             const std::string& id, VirtualTime now) {
  try {
    agent.load_stored_session(origin, profile, id, now);
  } catch (const Error&) {
    return false;
  }
  agent.release_session(id);
  return true;
}

}  // namespace

AuditReport audit_persistence(ua::UserAgent& agent, ua::LicenseEndpoint& endpoint,
                              const std::vector<Bytes>& key_ids) {
  AuditReport report;
  const auto& profile = agent.profile();
  report.subject = profile.name;
  report.verdicts[Question::kRq3] = Verdict::kNotApplicable;
  if (!profile.eme_supported) {
    report.add_log("EME unsupported; persistence not testable");
    return report;
  }
  if (!profile.persistent_sessions_supported) {
    report.add_log("persistent-license sessions unsupported; persistence not testable");
    return report;
  }

  auto log_ev = [&](std::string line) {
    return Evidence{"log", report.add_log(std::move(line)), std::nullopt, std::nullopt};
  };
  auto flow = [&](VirtualTime now) {
    auto trace = agent.run_license_flow(kOriginA, kProfileP, endpoint, key_ids,
                                        cdm::SessionType::kPersistent, now);
    if (trace.failed()) log_ev("flow failed: " + to_text(trace.records.back().body));
    return trace.stored_session_hex();
  };

  // 1. Creation while first-party cookies are blocked.
  agent.wipe_all_app_data();
  agent.set_cookies_blocked(true);
  if (auto id = flow(0)) {
    auto ev = log_ev("cookies blocked: persistent session " + *id + " stored for " + kOriginA);
    report.findings.push_back({Rule::kRq3SessionDespiteCookieBlock, Severity::kViolation, {ev},
                               "persistent session stored while cookies are blocked"});
  } else {
    log_ev("cookies blocked: no persistent session stored");
  }

  // 2. Reopen from another origin and from another browsing profile.
  agent.wipe_all_app_data();
  auto id = flow(10);
  if (!id) {
    log_ev("cookies allowed: no persistent session stored; reopen scenarios skipped");
  } else {
    log_ev("cookies allowed: persistent session " + *id + " stored for " + kOriginA + " / " +
           kProfileP);
    if (agent.storage_ui_listing(kOriginA, kProfileP).empty()) {
      auto ev = log_ev("storage settings list no entry for the stored session");
      report.findings.push_back({Rule::kRq3SessionsHiddenFromStorageUi, Severity::kInfo, {ev},
                                 "stored sessions are not shown in the storage settings"});
    }
    const std::pair<const char*, const char*> probes[] = {{kOriginB, kProfileP},
                                                          {kOriginA, kProfileQ}};
    for (const auto& [origin, prof] : probes) {
      if (reopens(agent, origin, prof, *id, 20)) {
        auto ev = log_ev(std::string("reopened from ") + origin + " / " + prof);
        report.findings.push_back({Rule::kRq3CrossOriginLeak, Severity::kViolation, {ev},
                                   "session reopened outside its origin/profile partition"});
      } else {
        log_ev(std::string("reopen from ") + origin + " / " + prof + " refused");
      }
    }
    log_ev(std::string("reopen from owner: ") +
           (reopens(agent, kOriginA, kProfileP, *id, 20) ? "ok" : "refused"));

    // 3. Clear site data, then reopen.
    agent.clear_site_data(kOriginA, kProfileP);
    if (reopens(agent, kOriginA, kProfileP, *id, 30)) {
      auto ev = log_ev("site data cleared: session " + *id + " still reopens");
      report.findings.push_back({Rule::kRq3SessionSurvivesWipe, Severity::kViolation, {ev},
                                 "persistent session survives clearing site data"});
    } else {
      log_ev("site data cleared: session gone");
    }
    agent.wipe_all_app_data();
    log_ev(std::string("app data wiped: session ") +
           (reopens(agent, kOriginA, kProfileP, *id, 40) ? "still reopens" : "gone"));
  }

  bool violated = std::any_of(report.findings.begin(), report.findings.end(), [](const Finding& f) {
    return f.severity == Severity::kViolation && question_of(f.rule) == Question::kRq3;
  });
  report.verdicts[Question::kRq3] = violated ? Verdict::kNoncompliant : Verdict::kCompliant;
  agent.wipe_all_app_data();
  return report;
}

protocol::LicensePolicy audit_policy() {
  return server::parse_policy_params(
      "can_play=true&can_persist=true&can_renew=true&license_duration_s=86400"
      "&renewal_delay_s=2&always_include_client_id=true");
}

ua::FlowTrace simulate(const ua::BrowserProfile& profile, testbed::World& world,
                       const protocol::LicensePolicy& policy, cdm::SessionType type,
                       std::uint64_t seed) {
  ua::UserAgent agent(profile, seed);
  ua::InProcessEndpoint endpoint(world.server(), policy);
  return agent.run_license_flow(kOriginA, kProfileP, endpoint, {world.catalog().key_ids[0]}, type,
                                0);
}

AuditReport audit_profile(const ua::BrowserProfile& profile, std::uint64_t seed) {
  AuditReport report;
  report.subject = profile.name;
  if (!profile.eme_supported) {
    for (auto q : {Question::kRq1, Question::kRq2, Question::kRq3}) {
      report.verdicts[q] = Verdict::kNotApplicable;
    }
    report.add_log("EME unsupported by " + profile.name);
    return report;
  }
  testbed::World world(seed);
  ua::UserAgent agent(profile, seed);
  ua::InProcessEndpoint endpoint(world.server(), audit_policy());
  auto trace = agent.run_license_flow(kOriginA, kProfileP, endpoint, {world.catalog().key_ids[0]},
                                      cdm::SessionType::kPersistent, 0);
  report = audit_trace(trace, profile.name);
  if (trace.failed()) report.add_log("flow failed: " + to_text(trace.records.back().body));
  report.merge(audit_persistence(agent, endpoint, {world.catalog().key_ids[0]}));
  return report;
}

// ---- fingerprints and user agents ----

Fingerprint extract_fingerprint(const identity::ClientId& cid, cdm::Platform platform) {
  return {to_hex(cid.chain.device_cert.serial), platform == cdm::Platform::kMobile
                                                    ? FingerprintClass::kUniqueDevice
                                                    : FingerprintClass::kSharedPerCdmVersion};
}

Fingerprint extract_fingerprint(const identity::ClientId& cid) {
  return extract_fingerprint(cid, identity::is_desktop_profile(cid.info)
                                      ? cdm::Platform::kDesktopNonVmp
                                      : cdm::Platform::kMobile);
}

std::string build_augmented_ua(const identity::ClientInfo& info) {
  std::vector<std::string> inner;
  const std::string head = info.platform_name.value_or(info.build_info.value_or(""));
  for (const std::string* s : {&head, &info.architecture, &info.model_name}) {
    if (!s->empty()) inner.push_back(*s);
  }
  std::vector<std::string> parts;
  if (!inner.empty()) {
    std::string p = "(";
    for (std::size_t i = 0; i < inner.size(); ++i) p += (i ? "; " : "") + inner[i];
    parts.push_back(p + ")");
  }
  if (!info.cdm_version.empty()) parts.push_back("CDM/" + info.cdm_version);
  if (info.application_name && !info.application_name->empty()) {
    parts.push_back("App/" + *info.application_name);
  }
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) out += (i ? " " : "") + parts[i];
  return out;
}

namespace {

enum class Os { kWindows, kLinux, kMacOs, kAndroid, kIos, kChromeOs };
enum class Arch { kX64, kX86, kArm64, kArm };

std::string_view os_name(Os os) {
  switch (os) {
    case Os::kWindows: return "Windows";
    case Os::kLinux: return "Linux";
    case Os::kMacOs: return "macOS";
    case Os::kAndroid: return "Android";
    case Os::kIos: return "iOS";
    case Os::kChromeOs: return "ChromeOS";
  }
  return "?";
}

std::string_view arch_name(Arch a) {
  switch (a) {
    case Arch::kX64: return "x64";
    case Arch::kX86: return "x86";
    case Arch::kArm64: return "arm64";
    case Arch::kArm: return "arm";
  }
  return "?";
}

bool has(std::string_view text, std::string_view token) {
  return text.find(token) != std::string_view::npos;
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

// Token dictionary shared by the claimed-UA side and the Client Info side.
std::optional<Os> classify_os(std::string_view text) {
  std::string t = lower(text);
  if (has(t, "android")) return Os::kAndroid;
  if (has(t, "iphone") || has(t, "ipad") || has(t, "ipod")) return Os::kIos;
  if (has(t, "windows")) return Os::kWindows;
  if (has(t, "cros") || has(t, "chrome os") || has(t, "chromeos")) return Os::kChromeOs;
  if (has(t, "macintosh") || has(t, "mac os") || has(t, "macos") || has(t, "darwin")) return Os::kMacOs;
  if (has(t, "linux") || has(t, "x11")) return Os::kLinux;
  return std::nullopt;
}

std::optional<Arch> classify_arch(std::string_view text) {
  std::string t = lower(text);
  if (has(t, "arm64") || has(t, "aarch64")) return Arch::kArm64;
  if (has(t, "armv7") || has(t, "armv8l") || has(t, "armeabi") || t == "arm") return Arch::kArm;
  if (has(t, "x86_64") || has(t, "win64") || has(t, "x64") || has(t, "wow64") || has(t, "amd64")) {
    return Arch::kX64;
  }
  if (has(t, "i686") || has(t, "i386") || t == "x86") return Arch::kX86;
  return std::nullopt;
}

std::optional<Os> info_os(const identity::ClientInfo& info) {
  if (identity::is_mobile_profile(info)) return Os::kAndroid;
  if (info.platform_name) return classify_os(*info.platform_name);
  return std::nullopt;
}

std::string android_version(const identity::ClientInfo& info) {
  // Build fingerprints look like "brand/product/device:VERSION/...".
  if (!info.build_info) return "";
  const std::string& b = *info.build_info;
  auto colon = b.find(':');
  if (colon == std::string::npos) return "";
  auto slash = b.find('/', colon);
  return b.substr(colon + 1, slash == std::string::npos ? std::string::npos : slash - colon - 1);
}

}  // namespace

std::string render_user_agent(const identity::ClientInfo& info) {
  static const std::string kWebKit = "AppleWebKit/537.36 (KHTML, like Gecko) Chrome/109.0.0.0 ";
  auto os = info_os(info);
  auto arch = classify_arch(info.architecture);
  if (os == Os::kAndroid) {
    std::string version = android_version(info);
    std::string device = "Linux; Android" + (version.empty() ? "" : " " + version);
    if (!info.model_name.empty()) device += "; " + info.model_name;
    return "Mozilla/5.0 (" + device + ") " + kWebKit + "Mobile Safari/537.36";
  }
  std::string system;
  if (os == Os::kWindows) {
    system = "Windows NT 10.0";
    if (arch == Arch::kX64) system += "; Win64; x64";
    if (arch == Arch::kArm64) system += "; ARM64";
  } else if (os == Os::kLinux) {
    system = "X11; Linux";
    if (arch == Arch::kX64) system += " x86_64";
    if (arch == Arch::kX86) system += " i686";
    if (arch == Arch::kArm64) system += " aarch64";
    if (arch == Arch::kArm) system += " armv7l";
  } else if (os == Os::kMacOs) {
    system = "Macintosh; Intel Mac OS X 10_15_7";
  } else if (os == Os::kChromeOs) {
    system = "X11; CrOS";
    if (arch == Arch::kX64) system += " x86_64";
    if (arch == Arch::kArm64) system += " aarch64";
  } else if (info.platform_name && !info.platform_name->empty()) {
    system = *info.platform_name;
  }
  return "Mozilla/5.0 " + (system.empty() ? "" : "(" + system + ") ") + kWebKit + "Safari/537.36";
}

std::optional<Finding> detect_ua_conflict(std::string_view claimed_ua,
                                          const identity::ClientInfo& info) {
  std::vector<std::string> conflicts;
  auto claimed_os = classify_os(claimed_ua);
  auto actual_os = info_os(info);
  if (claimed_os && actual_os && *claimed_os != *actual_os) {
    conflicts.push_back("OS " + std::string(os_name(*claimed_os)) + " vs " +
                        std::string(os_name(*actual_os)));
  }
  // macOS user agents report Intel on every architecture.
  if (claimed_os != Os::kMacOs) {
    auto claimed_arch = classify_arch(claimed_ua);
    auto actual_arch = classify_arch(info.architecture);
    if (claimed_arch && actual_arch && *claimed_arch != *actual_arch) {
      conflicts.push_back("architecture " + std::string(arch_name(*claimed_arch)) + " vs " +
                          std::string(arch_name(*actual_arch)));
    }
  }
  bool claimed_mobile = has(claimed_ua, "Mobile");
  if (claimed_mobile && identity::is_desktop_profile(info)) {
    conflicts.push_back("mobile UA vs desktop CDM");
  }
  if (conflicts.empty()) return std::nullopt;

  std::string desc = "claimed User-Agent contradicts Client Info: ";
  for (std::size_t i = 0; i < conflicts.size(); ++i) desc += (i ? ", " : "") + conflicts[i];
  return Finding{Rule::kUaConflict, Severity::kWarn, {}, desc};
}

NesnParse parse_nesn(std::string_view nesn) {
  std::vector<std::string> seg;
  std::size_t start = 0;
  while (true) {
    auto dash = nesn.find('-', start);
    seg.emplace_back(nesn.substr(start, dash == std::string_view::npos ? dash : dash - start));
    if (dash == std::string_view::npos) break;
    start = dash + 1;
  }
  auto alnum = [](const std::string& s) {
    return !s.empty() && std::all_of(s.begin(), s.end(), [](unsigned char c) {
      return std::isalnum(c) != 0;
    });
  };
  if (seg.size() != 5 || !std::all_of(seg.begin(), seg.end(), alnum)) {
    fail(ErrorCode::kNesnMalformed,
         "expected CATEGORY-OEMCRYPTOVER-MANUFACTURER-MODEL-SUFFIX, got '" + std::string(nesn) + "'");
  }
  NesnParse out{{seg[0], seg[1], seg[2], seg[3], seg[4]}, std::nullopt};
  std::size_t n = seg[4].size();
  if (n >= kNesnMobileSuffix) {
    out.finding = Finding{Rule::kNesnDistinctiveSuffix, Severity::kViolation, {},
                          "NESN carries a " + std::to_string(n) +
                              "-character per-device suffix (mobile class)"};
  } else if (n >= kNesnDesktopSuffix) {
    out.finding = Finding{Rule::kNesnDistinctiveSuffix, Severity::kWarn, {},
                          "NESN carries a " + std::to_string(n) +
                              "-character per-device suffix (desktop class)"};
  }
  return out;
}

std::vector<std::string> track_sessions(const std::vector<std::string>& known_ids,
                                        ua::UserAgent& agent, const std::string& origin,
                                        const std::string& profile_id, VirtualTime now) {
  std::vector<std::string> matched;
  for (const auto& id : known_ids) {
    if (reopens(agent, origin, profile_id, id, now)) matched.push_back(id);
  }
  return matched;
}

// ---- rendering ----

std::string render_json(const AuditReport& report) {
  using nlohmann::json;
  json j;
  j["subject"] = report.subject;
  j["verdicts"] = json::object();
  for (const auto& [q, v] : report.verdicts) j["verdicts"][std::string(to_string(q))] = to_string(v);
  j["findings"] = json::array();
  for (const auto& f : report.findings) {
    json ev = json::array();
    for (const auto& e : f.evidence) {
      json je = {{"source", e.source}, {"index", e.index}};
      if (e.offset) je["offset"] = *e.offset;
      if (e.length) je["length"] = *e.length;
      ev.push_back(je);
    }
    j["findings"].push_back({{"rule", to_string(f.rule)},
                             {"severity", to_string(f.severity)},
                             {"description", f.description},
                             {"evidence", ev}});
  }
  j["fingerprint"] = report.fingerprint
                         ? json{{"serial_hex", report.fingerprint->serial_hex},
                                {"class", to_string(report.fingerprint->cls)}}
                         : json(nullptr);
  j["augmented_ua"] = report.augmented_ua ? json(*report.augmented_ua) : json(nullptr);
  j["log"] = report.log;
  return j.dump(2);
}

std::string render_text(const AuditReport& report) {
  std::ostringstream out;
  out << "Audit report: " << report.subject << "\n";
  out << "Verdicts:\n";
  for (const auto& [q, v] : report.verdicts) out << "  " << to_string(q) << "  " << to_string(v) << "\n";
  out << "Findings (" << report.findings.size() << "):\n";
  for (const auto& f : report.findings) {
    out << "  [" << to_string(f.severity) << "] " << to_string(f.rule) << ": " << f.description;
    for (const auto& e : f.evidence) {
      out << " <" << e.source << " #" << e.index;
      if (e.offset) out << " @" << *e.offset << "+" << e.length.value_or(0);
      out << ">";
    }
    out << "\n";
  }
  if (report.fingerprint) {
    out << "Fingerprint: " << report.fingerprint->serial_hex << " ("
        << to_string(report.fingerprint->cls) << ")\n";
  }
  if (report.augmented_ua) out << "Augmented UA: " << *report.augmented_ua << "\n";
  if (!report.log.empty()) {
    out << "Log:\n";
    for (std::size_t i = 0; i < report.log.size(); ++i) out << "  " << i << ": " << report.log[i] << "\n";
  }
  return out.str();
}

}  // namespace emeforge::audit
