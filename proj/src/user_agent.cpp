#include "emeforge/user_agent.hpp"

#include <json.hpp>

#include "emeforge/privacy.hpp"
#include "emeforge/testbed.hpp"

namespace emeforge::ua {

using nlohmann::json;

std::string_view to_string(PermissionModel m) {
  switch (m) {
    case PermissionModel::kDefaultAllow: return "DEFAULT_ALLOW";
    case PermissionModel::kPerOriginPrompt: return "PER_ORIGIN_PROMPT";
    case PermissionModel::kGlobalGrant: return "GLOBAL_GRANT";
  }
  return "?";
}

std::string_view to_string(Family f) {
  return f == Family::kChromium ? "chromium" : "firefox";
}

std::string_view to_string(AccessResolution r) {
  switch (r) {
    case AccessResolution::kSilent: return "silent";
    case AccessResolution::kPrompted: return "prompted";
    case AccessResolution::kRemembered: return "remembered";
  }
  return "?";
}

std::string_view to_string(Direction d) {
  switch (d) {
    case Direction::kClientToServer: return "c2s";
    case Direction::kServerToClient: return "s2c";
    case Direction::kEvent: return "event";
  }
  return "?";
}

// ---- presets ----

namespace {

constexpr std::string_view kWindowsCdm = "4.10.2557.0";
constexpr std::string_view kLinuxCdm = "4.10.2662.3";
constexpr std::string_view kAndroidCdm = "17.0.0";

struct Row {
  const char* name;
  const char* browser;
  Family family;
  bool eme;
  cdm::Platform platform;
  bool privacy_set;
  bool persistent;
  bool quirk_cookie;
  bool quirk_wipe;
  PermissionModel permission;
  const char* app_id;
  const char* user_agent;
};

constexpr auto C = Family::kChromium;
constexpr auto F = Family::kFirefox;
constexpr auto VMP = cdm::Platform::kDesktopVmp;
constexpr auto NON_VMP = cdm::Platform::kDesktopNonVmp;
constexpr auto MOB = cdm::Platform::kMobile;
constexpr auto ALLOW = PermissionModel::kDefaultAllow;
constexpr auto PER_ORIGIN = PermissionModel::kPerOriginPrompt;
constexpr auto GLOBAL = PermissionModel::kGlobalGrant;

#define WIN_NT "Mozilla/5.0 (Windows NT 10.0; Win64; x64) "
#define X11 "Mozilla/5.0 (X11; Linux x86_64) "
#define WEBKIT "AppleWebKit/537.36 (KHTML, like Gecko) "
#define ANDROID "Mozilla/5.0 (Linux; Android 13; Pixel 7) " WEBKIT

// clang-format off
const Row kRows[] = {
  // name                      browser          fam eme    platform privacy persist qcookie qwipe  permission  app id  user agent
  {"chrome_desktop_windows",  "Chrome",        C, true,  VMP,     true,  true,  false, false, ALLOW,  "", WIN_NT WEBKIT "Chrome/109.0.0.0 Safari/537.36"},
  {"chrome_desktop_linux",    "Chrome",        C, true,  NON_VMP, true,  true,  false, false, ALLOW,  "", X11 WEBKIT "Chrome/109.0.0.0 Safari/537.36"},
  {"edge_desktop_windows",    "Edge",          C, true,  VMP,     true,  true,  false, false, ALLOW,  "", WIN_NT WEBKIT "Chrome/109.0.0.0 Safari/537.36 Edg/109.0.1518.70"},
  {"edge_desktop_linux",      "Edge",          C, true,  NON_VMP, true,  true,  false, false, ALLOW,  "", X11 WEBKIT "Chrome/109.0.0.0 Safari/537.36 Edg/109.0.1518.70"},
  {"opera_desktop_windows",   "Opera",         C, true,  VMP,     true,  true,  false, false, ALLOW,  "", WIN_NT WEBKIT "Chrome/108.0.0.0 Safari/537.36 OPR/94.0.4606.76"},
  {"opera_desktop_linux",     "Opera",         C, true,  NON_VMP, true,  true,  false, false, ALLOW,  "", X11 WEBKIT "Chrome/108.0.0.0 Safari/537.36 OPR/94.0.4606.76"},
  {"brave_desktop_windows",   "Brave",         C, true,  VMP,     true,  false, false, false, ALLOW,  "", WIN_NT WEBKIT "Chrome/109.0.0.0 Safari/537.36"},
  {"brave_desktop_linux",     "Brave",         C, true,  NON_VMP, true,  false, false, false, ALLOW,  "", X11 WEBKIT "Chrome/109.0.0.0 Safari/537.36"},
  {"firefox_desktop_windows", "Firefox",       F, true,  VMP,     false, false, false, false, GLOBAL, "", "Mozilla/5.0 (Windows NT 10.0; Win64; x64; rv:108.0) Gecko/20100101 Firefox/108.0"},
  {"firefox_desktop_linux",   "Firefox",       F, true,  NON_VMP, false, false, false, false, GLOBAL, "", "Mozilla/5.0 (X11; Linux x86_64; rv:108.0) Gecko/20100101 Firefox/108.0"},
  {"tor_desktop",             "Tor",           F, false, VMP,     false, false, false, false, GLOBAL, "", "Mozilla/5.0 (Windows NT 10.0; rv:102.0) Gecko/20100101 Firefox/102.0"},
  {"chrome_android",          "Chrome",        C, true,  MOB,     true,  true,  false, false, ALLOW,  "com.android.chrome", ANDROID "Chrome/109.0.5414.85 Mobile Safari/537.36"},
  {"samsung_android",         "Samsung Internet", C, true, MOB,   true,  true,  true,  true,  ALLOW,  "com.sec.android.app.sbrowser", ANDROID "SamsungBrowser/19.0 Chrome/102.0.5005.125 Mobile Safari/537.36"},
  {"edge_android",            "Edge",          C, true,  MOB,     true,  true,  false, false, ALLOW,  "com.microsoft.emmx", ANDROID "Chrome/109.0.5414.86 Mobile Safari/537.36 EdgA/109.0.1518.70"},
  {"opera_android",           "Opera",         C, true,  MOB,     true,  true,  true,  true,  ALLOW,  "com.opera.browser", ANDROID "Chrome/108.0.5359.128 Mobile Safari/537.36 OPR/73.1.3844.69816"},
  {"brave_android",           "Brave",         C, false, MOB,     true,  false, false, false, ALLOW,  "com.brave.browser", ANDROID "Chrome/109.0.5414.87 Mobile Safari/537.36"},
  {"firefox_android",         "Firefox",       F, true,  MOB,     false, false, false, false, PER_ORIGIN, "org.mozilla.firefox", "Mozilla/5.0 (Android 13; Mobile; rv:109.0) Gecko/109.0 Firefox/109.0"},
  {"firefox_focus_android",   "Firefox Focus", F, true,  MOB,     false, false, false, false, PER_ORIGIN, "org.mozilla.focus", "Mozilla/5.0 (Android 13; Mobile; rv:108.0) Gecko/108.0 Firefox/108.0"},
  {"ghostery_android",        "Ghostery",      F, true,  MOB,     false, false, false, false, PER_ORIGIN, "com.ghostery.android.ghostery", "Mozilla/5.0 (Android 13; Mobile; rv:108.0) Gecko/108.0 Firefox/108.0"},
  {"tor_android",             "Tor",           F, false, MOB,     false, false, false, false, PER_ORIGIN, "org.torproject.torbrowser", "Mozilla/5.0 (Android 10; Mobile; rv:102.0) Gecko/102.0 Firefox/102.0"},
};
// clang-format on

#undef WIN_NT
#undef X11
#undef WEBKIT
#undef ANDROID

BrowserProfile from_row(const Row& r) {
  BrowserProfile p;
  p.name = r.name;
  p.browser = r.browser;
  p.family = r.family;
  p.eme_supported = r.eme;
  p.platform = r.platform;
  p.mobile_privacy_mode_set = r.privacy_set;
  p.persistent_sessions_supported = r.persistent;
  p.quirk_sessions_ignore_cookie_block = r.quirk_cookie;
  p.quirk_sessions_survive_site_data_wipe = r.quirk_wipe;
  p.permission_model = r.permission;
  p.app_id = r.app_id;
  p.user_agent = r.user_agent;
  if (r.platform == cdm::Platform::kMobile) {
    p.os = "Android";
    p.architecture = "arm64-v8a";
    p.cdm_version = kAndroidCdm;
  } else {
    bool windows = r.platform == cdm::Platform::kDesktopVmp;
    p.os = windows ? "Windows" : "Linux";
    p.architecture = "x64";
    p.cdm_version = windows ? kWindowsCdm : kLinuxCdm;
  }
  return p;
}

}  // namespace

const std::vector<BrowserProfile>& presets() {
  static const std::vector<BrowserProfile> all = [] {
    std::vector<BrowserProfile> out;
    for (const auto& r : kRows) out.push_back(from_row(r));
    return out;
  }();
  return all;
}

const std::vector<std::string>& matrix_preset_names() {
  static const std::vector<std::string> names = {
      "chrome_desktop",  "edge_desktop",   "opera_desktop",  "brave_desktop",
      "firefox_desktop", "tor_desktop",    "chrome_android", "samsung_android",
      "edge_android",    "opera_android",  "brave_android",  "tor_android",
      "firefox_android", "firefox_focus_android", "ghostery_android",
  };
  return names;
}

const BrowserProfile& find_preset(std::string_view name) {
  auto lookup = [](std::string_view n) -> const BrowserProfile* {
    for (const auto& p : presets()) {
      if (p.name == n) return &p;
    }
    return nullptr;
  };
  if (const auto* p = lookup(name)) return *p;

  auto ends_with = [&](std::string_view suffix) {
    return name.size() > suffix.size() && name.substr(name.size() - suffix.size()) == suffix;
  };
  auto stem = [&](std::string_view suffix) {
    return std::string(name.substr(0, name.size() - suffix.size()));
  };
  std::string alias;
  if (ends_with("_desktop")) {
    alias = std::string(name) + "_windows";
  } else if (ends_with("_windows")) {
    alias = stem("_windows") + "_desktop_windows";
  } else if (ends_with("_linux")) {
    alias = stem("_linux") + "_desktop_linux";
  }
  if (!alias.empty()) {
    if (const auto* p = lookup(alias)) return *p;
  }
  fail(ErrorCode::kUnknownProfile, "unknown browser profile '" + std::string(name) + "'");
}

identity::ProvisionedIdentity provision_for(const BrowserProfile& profile, std::uint64_t seed) {
  if (profile.is_mobile()) {
    auto keybox_rng = crypto::DeterministicRandom::from_seed(seed, "device-keybox");
    auto keybox = identity::DeviceKeybox::generate(keybox_rng);
    auto info = identity::pixel7_client_info();
    info.application_name = profile.app_id;
    info.cdm_version = profile.cdm_version;
    return identity::provision_mobile(keybox, profile.app_id, info);
  }
  identity::ClientInfo info;
  info.architecture = profile.architecture;
  info.company_name = "Google";
  info.platform_name = profile.os;
  info.cdm_version = profile.cdm_version;
  return identity::provision_desktop(profile.cdm_version, info);
}

// ---- traces ----

void FlowTrace::add(VirtualTime t, Direction dir, std::string_view kind, Bytes body) {
  records.push_back({t, dir, std::string(kind), std::move(body)});
}

bool FlowTrace::failed() const {
  return !records.empty() && records.back().dir == Direction::kEvent &&
         records.back().kind == kEventError;
}

std::optional<std::string> FlowTrace::session_id_hex() const {
  for (const auto& r : records) {
    if (r.dir == Direction::kEvent && r.kind == kEventSessionCreated) {
      std::string text = to_text(r.body);
      return text.substr(0, text.find(' '));
    }
  }
  return std::nullopt;
}

std::optional<std::string> FlowTrace::stored_session_hex() const {
  for (const auto& r : records) {
    if (r.dir == Direction::kEvent && r.kind == kEventSessionStored) return to_text(r.body);
  }
  return std::nullopt;
}

std::string FlowTrace::to_jsonl() const {
  std::string out;
  for (const auto& r : records) {
    json line = {{"t", r.t},
                 {"dir", to_string(r.dir)},
                 {"kind", r.kind},
                 {"body_b64", base64_encode(r.body)}};
    out += line.dump();
    out.push_back('\n');
  }
  return out;
}

FlowTrace FlowTrace::from_jsonl(std::string_view text) {
  FlowTrace trace;
  std::size_t line_no = 0;
  while (!text.empty()) {
    auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;

    auto corrupt = [&](const std::string& why) {
      fail(ErrorCode::kTraceCorrupt, "trace line " + std::to_string(line_no) + ": " + why);
    };
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) corrupt("not a JSON object");
    if (!j.contains("t") || !j["t"].is_number_unsigned()) corrupt("'t' must be a non-negative integer");
    for (const char* key : {"dir", "kind", "body_b64"}) {
      if (!j.contains(key) || !j[key].is_string()) corrupt(std::string("'") + key + "' must be a string");
    }

    TraceRecord r;
    r.t = j["t"].get<VirtualTime>();
    std::string dir = j["dir"].get<std::string>();
    if (dir == "c2s") {
      r.dir = Direction::kClientToServer;
    } else if (dir == "s2c") {
      r.dir = Direction::kServerToClient;
    } else if (dir == "event") {
      r.dir = Direction::kEvent;
    } else {
      corrupt("unknown direction '" + dir + "'");
    }
    r.kind = j["kind"].get<std::string>();
    if (r.kind.empty()) corrupt("empty kind");
    if (r.dir != Direction::kEvent) {
      try {
        protocol::parse_message_kind(r.kind);
      } catch (const Error&) {
        corrupt("unknown message kind '" + r.kind + "'");
      }
    }
    try {
      r.body = base64_decode(j["body_b64"].get<std::string>());
    } catch (const Error&) {
      corrupt("body_b64 is not valid base-64");
    }
    trace.records.push_back(std::move(r));
  }
  return trace;
}

// ---- the browser ----

UserAgent::UserAgent(BrowserProfile profile, std::uint64_t seed)
    : UserAgent(profile, profile.eme_supported ? provision_for(profile, seed)
                                               : identity::ProvisionedIdentity{},
                seed) {}

UserAgent::UserAgent(BrowserProfile profile, identity::ProvisionedIdentity device,
                     std::uint64_t seed)
    : profile_(std::move(profile)),
      device_(std::move(device)),
      rng_(std::make_unique<crypto::DeterministicRandom>(
          crypto::DeterministicRandom::from_seed(seed, "user-agent:" + profile_.name))),
      responder_([](std::string_view) { return true; }) {
  if (!profile_.eme_supported) return;
  cdm::CdmConfig config;
  config.platform = profile_.platform;
  config.privacy_mode_enabled = profile_.is_mobile() && profile_.mobile_privacy_mode_set;
  config.vmp_renewal_privacy_gap = profile_.vmp_renewal_privacy_gap;
  config.server_certificate = privacy::default_server_certificate();
  config.client_id = device_.client_id;
  config.device_private_key = device_.private_key;
  config.license_server_key = testbed::server_signing_key().public_key();
  cdm_ = std::make_unique<cdm::Cdm>(std::move(config), *rng_);
}

cdm::Cdm& UserAgent::cdm() {
  if (!cdm_) fail(ErrorCode::kEmeUnsupported, profile_.name + ": EME unsupported");
  return *cdm_;
}

void UserAgent::set_prompt_responder(std::function<bool(std::string_view)> responder) {
  responder_ = std::move(responder);
}

AccessHandle UserAgent::request_key_system_access(const std::string& origin,
                                                  const std::string& profile_id,
                                                  AccessConfig config) {
  if (!profile_.eme_supported) {
    fail(ErrorCode::kEmeUnsupported, profile_.name + ": EME unsupported");
  }
  AccessHandle handle{origin, profile_id,
                      config.persistent && profile_.persistent_sessions_supported,
                      AccessResolution::kSilent};
  if (profile_.permission_model == PermissionModel::kDefaultAllow) return handle;

  std::string grant = profile_.permission_model == PermissionModel::kGlobalGrant ? "*" : origin;
  if (store_.permission_grants.count(grant)) {
    handle.resolution = AccessResolution::kRemembered;
    return handle;
  }
  ++prompts_shown_;
  if (!responder_(origin)) {
    fail(ErrorCode::kPermissionDenied, "DRM access refused for " + origin);
  }
  store_.permission_grants.insert(grant);
  handle.resolution = AccessResolution::kPrompted;
  return handle;
}

FlowTrace UserAgent::run_license_flow(const std::string& origin, const std::string& profile_id,
                                      LicenseEndpoint& endpoint, const std::vector<Bytes>& key_ids,
                                      cdm::SessionType type, VirtualTime now,
                                      FlowOptions options) {
  FlowTrace trace;
  trace.add(now, Direction::kEvent, kEventUserAgent, to_bytes(profile_.user_agent));
  AccessHandle access = request_key_system_access(
      origin, profile_id, AccessConfig{type == cdm::SessionType::kPersistent});
  trace.add(now, Direction::kEvent, kEventAccessGranted, to_bytes(to_string(access.resolution)));

  auto effective = access.persistent ? cdm::SessionType::kPersistent : cdm::SessionType::kTemporary;
  VirtualTime at = now;
  std::optional<Bytes> sid;
  try {
    sid = cdm_->create_session(effective, now).session_id;
    trace.add(now, Direction::kEvent, kEventSessionCreated,
              to_bytes(to_hex(*sid) + " " + std::string(cdm::to_string(effective))));

    auto request = cdm_->generate_request(*sid, key_ids);
    trace.add(now, Direction::kClientToServer, protocol::to_string(request.kind), request.encode());
    auto response = endpoint.license(request, now);
    trace.add(now, Direction::kServerToClient, protocol::to_string(response.kind),
              response.encode());
    cdm_->update(*sid, response, now);

    std::size_t renewals = 0;
    for (at = now + 1; at <= now + options.renewal_horizon_s && renewals < options.max_renewals;
         ++at) {
      if (!cdm_->session(*sid).renewal_due) break;
      for (const auto& out : cdm_->tick(at)) {
        if (out.session_id != *sid) continue;
        trace.add(at, Direction::kClientToServer, protocol::to_string(out.message.kind),
                  out.message.encode());
        auto renewal = endpoint.renew(out.message, at);
        trace.add(at, Direction::kServerToClient, protocol::to_string(renewal.kind),
                  renewal.encode());
        cdm_->update(*sid, renewal, at);
        ++renewals;
      }
    }
    at = cdm_->clock();

    if (options.close_session) {
      auto blob = cdm_->close_session(*sid);
      std::string hex = to_hex(*sid);
      trace.add(at, Direction::kEvent, kEventSessionClosed, to_bytes(hex));
      if (blob) {
        bool allowed = profile_.persistent_sessions_supported &&
                       (!store_.cookies_blocked || profile_.quirk_sessions_ignore_cookie_block);
        if (allowed) {
          store_.sessions[{origin, profile_id}][hex] = cdm_->seal_blob(*blob);
          trace.add(at, Direction::kEvent, kEventSessionStored, to_bytes(hex));
        } else {
          trace.add(at, Direction::kEvent, kEventSessionDiscarded, to_bytes(hex));
        }
      }
    }
  } catch (const Error& e) {
    trace.add(at, Direction::kEvent, kEventError,
              to_bytes(std::string(to_string(e.code())) + ": " + e.what()));
    if (sid) {
      try {
        if (cdm_->session(*sid).state != cdm::SessionState::kClosed) cdm_->close_session(*sid);
      } catch (const Error&) {
      }
    }
  }
  return trace;
}

void UserAgent::clear_site_data(const std::string& origin, const std::string& profile_id) {
  if (profile_.quirk_sessions_survive_site_data_wipe) return;
  store_.sessions.erase({origin, profile_id});
}

void UserAgent::wipe_all_app_data() { store_ = SiteDataStore{}; }

const cdm::Session& UserAgent::load_stored_session(const std::string& origin,
                                                   const std::string& profile_id,
                                                   const std::string& session_id_hex,
                                                   VirtualTime now) {
  const Bytes* sealed = nullptr;
  if (cdm_) {
    auto bucket = store_.sessions.find({origin, profile_id});
    if (bucket != store_.sessions.end()) {
      auto it = bucket->second.find(session_id_hex);
      if (it != bucket->second.end()) sealed = &it->second;
    }
  }
  if (sealed) {
    try {
      return cdm_->load_session(*sealed, now);
    } catch (const Error&) {
    }
  }
  fail(ErrorCode::kNotFound, "no such session");
}

void UserAgent::release_session(const std::string& session_id_hex) {
  if (cdm_) cdm_->close_session(from_hex(session_id_hex));
}

std::vector<std::string> UserAgent::storage_ui_listing(const std::string&,
                                                       const std::string&) const {
  return {};
}

}  // namespace emeforge::ua
