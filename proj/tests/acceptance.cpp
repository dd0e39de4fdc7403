// Acceptance suite. One PASS/FAIL line per criterion; exit status is the
// number of failures (capped at 1). Pass criterion numbers to run a subset.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <json.hpp>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "emeforge/audit.hpp"
#include "emeforge/privacy.hpp"
#include "emeforge/protocol.hpp"
#include "emeforge/testbed.hpp"

namespace {

using namespace emeforge;
using nlohmann::json;

struct Outcome {
  bool pass = true;
  std::vector<std::string> notes;

  void expect(bool cond, const std::string& what) {
    if (!cond) {
      pass = false;
      if (notes.size() < 8) notes.push_back(what);
    }
  }
};

using Clock = std::chrono::steady_clock;

// ---- 1: policy key prefixes ----

// Reads one base-128 varint byte by byte; returns the bytes it spans.
std::pair<std::uint64_t, std::size_t> read_varint(const Bytes& b, std::size_t pos) {
  std::uint64_t value = 0;
  for (std::size_t i = 0; pos + i < b.size() && i < 10; ++i) {
    value |= static_cast<std::uint64_t>(b[pos + i] & 0x7f) << (7 * i);
    if (!(b[pos + i] & 0x80)) return {value, i + 1};
  }
  throw std::runtime_error("bad varint");
}

void criterion_policy_codes(Outcome& o) {
  protocol::LicensePolicy p;
  p.can_play = p.can_persist = p.can_renew = true;
  p.rental_duration_s = 604800;
  p.playback_duration_s = 172800;
  p.license_duration_s = 86400;
  p.renewal_recovery_duration_s = 600;
  p.renewal_server_url = "https://renew.example/license";
  p.renewal_delay_s = 10;
  p.renewal_retry_interval_s = 30;
  p.renew_with_usage = true;
  p.always_include_client_id = true;
  p.soft_enforce_playback_duration = true;
  p.soft_enforce_rental_duration = true;
  p.watermarking_control = 2;

  const Bytes wire = protocol::encode_policy(p);
  std::vector<Bytes> keys;
  for (std::size_t pos = 0; pos < wire.size();) {
    auto [key, klen] = read_varint(wire, pos);
    keys.emplace_back(wire.begin() + static_cast<std::ptrdiff_t>(pos),
                      wire.begin() + static_cast<std::ptrdiff_t>(pos + klen));
    pos += klen;
    auto [value, vlen] = read_varint(wire, pos);
    pos += vlen;
    if ((key & 7) == 2) pos += value;
  }
  const std::vector<Bytes> expected = {{0x08}, {0x10}, {0x18}, {0x20}, {0x28}, {0x30}, {0x38}, {0x42},
                                       {0x48}, {0x50}, {0x58}, {0x60}, {0x70}, {0x78}, {0x80, 0x01}};
  auto sorted = keys;
  std::sort(sorted.begin(), sorted.end());
  o.expect(sorted == expected, "key prefixes differ from the fifteen policy codes");
  o.expect(keys.size() == 15, "expected 15 fields, got " + std::to_string(keys.size()));
  o.expect(protocol::decode_policy(wire) == p, "policy does not round-trip");
}

// ---- 2: results matrix through the CLI ----

void criterion_matrix(Outcome& o) {
  using Row = std::array<const char*, 3>;
  const std::map<std::string, Row> expected = {
      {"chrome_desktop", {"COMPLIANT", "NONCOMPLIANT", "COMPLIANT"}},
      {"edge_desktop", {"COMPLIANT", "NONCOMPLIANT", "COMPLIANT"}},
      {"opera_desktop", {"COMPLIANT", "NONCOMPLIANT", "COMPLIANT"}},
      {"brave_desktop", {"COMPLIANT", "NONCOMPLIANT", "NOT_APPLICABLE"}},
      {"firefox_desktop", {"COMPLIANT", "NONCOMPLIANT", "NOT_APPLICABLE"}},
      {"tor_desktop", {"NOT_APPLICABLE", "NOT_APPLICABLE", "NOT_APPLICABLE"}},
      {"chrome_android", {"COMPLIANT", "COMPLIANT", "COMPLIANT"}},
      {"edge_android", {"COMPLIANT", "COMPLIANT", "COMPLIANT"}},
      {"samsung_android", {"COMPLIANT", "COMPLIANT", "NONCOMPLIANT"}},
      {"opera_android", {"COMPLIANT", "COMPLIANT", "NONCOMPLIANT"}},
      {"brave_android", {"NOT_APPLICABLE", "NOT_APPLICABLE", "NOT_APPLICABLE"}},
      {"tor_android", {"NOT_APPLICABLE", "NOT_APPLICABLE", "NOT_APPLICABLE"}},
      {"firefox_android", {"NONCOMPLIANT", "NONCOMPLIANT", "NOT_APPLICABLE"}},
      {"firefox_focus_android", {"NONCOMPLIANT", "NONCOMPLIANT", "NOT_APPLICABLE"}},
      {"ghostery_android", {"NONCOMPLIANT", "NONCOMPLIANT", "NOT_APPLICABLE"}},
  };
  const auto names = ua::matrix_preset_names();
  o.expect(names.size() == 15, "expected 15 presets");
  for (const auto& name : names) {
    auto row = expected.find(name);
    if (row == expected.end()) {
      o.expect(false, "unexpected preset " + name);
      continue;
    }
    std::istringstream in;
    std::ostringstream out, err;
    int code = cli::run({"emeforge", "audit", "--profile", name, "--format", "json"}, in, out, err);
    auto verdicts = json::parse(out.str())["verdicts"];
    bool noncompliant = false;
    const char* questions[] = {"RQ1", "RQ2", "RQ3"};
    for (int q = 0; q < 3; ++q) {
      std::string got = verdicts[questions[q]];
      o.expect(got == row->second[q], name + " " + questions[q] + ": " + got + " != " + row->second[q]);
      noncompliant |= got == "NONCOMPLIANT";
    }
    o.expect(code == (noncompliant ? cli::kNoncompliant : cli::kOk),
             name + ": exit " + std::to_string(code));
  }
}

// ---- 3: privacy envelopes ----

std::string random_text(crypto::RandomSource& rng, std::size_t min_len, std::size_t max_len) {
  static constexpr char kAlphabet[] = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789-._ ";
  std::string s(min_len + rng.uniform(max_len - min_len + 1), ' ');
  for (auto& c : s) c = kAlphabet[rng.uniform(sizeof kAlphabet - 1)];
  return s;
}

void criterion_privacy(Outcome& o) {
  auto rng = crypto::DeterministicRandom::from_seed(3, "acceptance:privacy");
  std::vector<identity::ProvisionedIdentity> devices;
  for (int i = 0; i < 4; ++i) {
    auto info = identity::pixel7_client_info();
    devices.push_back(identity::provision_mobile(identity::DeviceKeybox::generate(rng), "app", info));
  }

  const auto& provider = privacy::default_provider();
  std::set<Bytes> wrapped, ivs, ciphertexts;
  for (int i = 0; i < 100; ++i) {
    identity::ClientId cid = devices[i % devices.size()].client_id;
    cid.info.model_name = random_text(rng, 1, 40);
    cid.info.architecture = random_text(rng, 1, 12);
    cid.info.build_info = random_text(rng, 0, 120);
    cid.info.security_patch_level = rng.uniform(1'000'000);
    auto env = privacy::encrypt_client_id(cid, provider.certificate, rng);
    o.expect(privacy::decrypt_client_id(env, provider.private_key) == cid,
             "round trip failed at #" + std::to_string(i));
    wrapped.insert(env.wrapped_key);
    ivs.insert(env.iv);
    ciphertexts.insert(env.ciphertext);
  }
  o.expect(wrapped.size() == 100 && ivs.size() == 100 && ciphertexts.size() == 100,
           "envelopes not pairwise distinct");

  // Unverified certificates: tampered signature, swapped key, renamed provider.
  for (int i = 0; i < 100; ++i) {
    privacy::ServerCertificate cert = provider.certificate;
    switch (i % 3) {
      case 0:
        cert.root_signature[rng.uniform(cert.root_signature.size())] ^=
            static_cast<std::uint8_t>(1u << rng.uniform(8));
        break;
      case 1:
        cert.public_key = devices[rng.uniform(devices.size())].private_key.public_key();
        break;
      default:
        cert.provider_id = random_text(rng, 1, 30) + ".example";
        break;
    }
    bool refused = false;
    try {
      privacy::encrypt_client_id(devices[0].client_id, cert, rng);
    } catch (const Error& e) {
      refused = e.code() == ErrorCode::kCertificateUnverified;
    }
    o.expect(refused, "encryption to unverified certificate #" + std::to_string(i) + " not refused");
  }
}

// ---- 4: fingerprint uniqueness and stability ----

void criterion_fingerprints(Outcome& o) {
  auto rng = crypto::DeterministicRandom::from_seed(4, "acceptance:devices");
  const auto info = identity::pixel7_client_info();
  std::vector<identity::DeviceKeybox> keyboxes;
  std::set<Bytes> serials;
  std::vector<Bytes> first_encoding;
  for (int i = 0; i < 1000; ++i) {
    keyboxes.push_back(identity::DeviceKeybox::generate(rng));
    auto id = identity::provision_mobile(keyboxes.back(), "org.mozilla.firefox", info);
    serials.insert(id.client_id.chain.device_cert.serial);
    if (i % 250 == 0) first_encoding.push_back(id.client_id.encode());
  }
  o.expect(serials.size() == 1000, std::to_string(1000 - serials.size()) + " serial collisions");

  for (std::size_t k = 0; k < first_encoding.size(); ++k) {
    for (int r = 0; r < 10; ++r) {
      auto again = identity::provision_mobile(keyboxes[k * 250], "org.mozilla.firefox", info);
      o.expect(again.client_id.encode() == first_encoding[k],
               "device " + std::to_string(k * 250) + " changed on re-provisioning");
    }
  }

  for (const std::string version : {"4.10.2557.0", "4.10.2662.3"}) {
    std::vector<identity::CertificateChain> chains;
    for (auto [os, arch] : {std::pair{"Windows", "x64"}, {"Linux", "x64"}, {"Mac OS X", "arm64"},
                            {"Windows", "x86"}, {"ChromeOS", "x86-64"}}) {
      identity::ClientInfo d;
      d.architecture = arch;
      d.company_name = "Google";
      d.platform_name = os;
      d.cdm_version = version;
      chains.push_back(identity::provision_desktop(version, d).client_id.chain);
    }
    for (const auto& c : chains) o.expect(c == chains.front(), "desktop chains differ for " + version);
  }
}

// ---- 5: renewal timing ----

void renewal_timing(Outcome& o, bool gap) {
  const std::string label = gap ? "gap on" : "gap off";
  auto profile = ua::find_preset("chrome_desktop");
  profile.vmp_renewal_privacy_gap = gap;
  ua::UserAgent agent(profile, 5);
  auto& cdm = agent.cdm();
  o.expect(cdm.platform() == cdm::Platform::kDesktopVmp, "chrome_desktop is not VMP");

  testbed::World world(5);
  auto policy = server::parse_policy_params(
      "can_play=true&can_renew=true&renewal_delay_s=2&renewal_retry_interval_s=3&always_include_client_id=true");
  const Bytes sid = cdm.create_session(cdm::SessionType::kTemporary, 0).session_id;
  auto lr = cdm.generate_request(sid, {world.catalog().key_ids[0]});
  cdm.update(sid, world.server().handle_license_request(lr, 0, policy), 0);

  std::vector<VirtualTime> emitted;
  std::optional<protocol::SignedMessage> last;
  auto run_until = [&](VirtualTime from, VirtualTime to) {
    for (VirtualTime t = from; t <= to; ++t) {
      for (auto& m : cdm.tick(t)) {
        emitted.push_back(t);
        auto rr = protocol::decode_renewal_request(m.message.body);
        o.expect(rr.client_id().has_value(), label + ": renewal at t=" + std::to_string(t) + " lacks Client ID");
        if (rr.client_id()) {
          o.expect(protocol::is_clear(*rr.client_id()) == gap,
                   label + ": renewal at t=" + std::to_string(t) + " has the wrong Client ID variant");
        }
        last = m.message;
      }
    }
  };
  run_until(0, 9);
  o.expect(emitted == std::vector<VirtualTime>{2, 5, 8}, label + ": renewals not at t=2,5,8");

  // A response to the t=8 request lands at t=9; retries stop and the next
  // renewal is a full delay later.
  cdm.update(sid, world.server().handle_renewal_request(*last, 9), 9);
  emitted.clear();
  run_until(10, 14);
  o.expect(emitted == std::vector<VirtualTime>{11, 14}, label + ": schedule after response is wrong");
}

void criterion_renewal(Outcome& o) {
  renewal_timing(o, true);
  renewal_timing(o, false);
}

// ---- 6: persistent-session tracking ----

void criterion_tracking(Outcome& o) {
  const std::set<std::string> compliant = {"chrome_desktop_windows", "edge_desktop_windows",
                                           "opera_desktop_windows",  "chrome_desktop_linux",
                                           "edge_desktop_linux",     "opera_desktop_linux",
                                           "chrome_android",         "edge_android"};
  const std::set<std::string> leaky = {"opera_android", "samsung_android"};
  const std::string a = "https://tracker-a.example", b = "https://tracker-b.example";
  auto rng = crypto::DeterministicRandom::from_seed(6, "acceptance:ids");

  std::size_t checked = 0;
  for (const auto& profile : ua::presets()) {
    if (!profile.eme_supported || !profile.persistent_sessions_supported) continue;
    ++checked;
    testbed::World world(6);
    ua::UserAgent agent(profile, 6);
    ua::InProcessEndpoint endpoint(world.server(), audit::audit_policy());
    auto trace = agent.run_license_flow(a, "P", endpoint, {world.catalog().key_ids[0]},
                                        cdm::SessionType::kPersistent, 0);
    auto stored = trace.stored_session_hex();
    o.expect(stored.has_value(), profile.name + ": no session stored");
    if (!stored) continue;

    std::vector<std::string> known = {*stored};
    for (int i = 0; i < 99; ++i) known.push_back(to_hex(rng.bytes(16)));
    std::shuffle(known.begin(), known.end(), std::mt19937_64(rng.next_u64()));

    auto same = audit::track_sessions(known, agent, a, "P", 100);
    o.expect(same == std::vector<std::string>{*stored}, profile.name + ": A/P does not match exactly the stored id");
    o.expect(audit::track_sessions(known, agent, b, "P", 100).empty(), profile.name + ": origin B matched");
    o.expect(audit::track_sessions(known, agent, a, "Q", 100).empty(), profile.name + ": profile Q matched");

    agent.clear_site_data(a, "P");
    auto after_clear = audit::track_sessions(known, agent, a, "P", 200);
    if (compliant.count(profile.name)) {
      o.expect(after_clear.empty(), profile.name + ": session survives clearing site data");
    }
    if (leaky.count(profile.name)) {
      o.expect(after_clear == std::vector<std::string>{*stored}, profile.name + ": expected session to survive");
    }
    agent.wipe_all_app_data();
    o.expect(audit::track_sessions(known, agent, a, "P", 300).empty(), profile.name + ": survives app wipe");
  }
  for (const auto& name : compliant) o.expect(ua::find_preset(name).persistent_sessions_supported, name);
  for (const auto& name : leaky) o.expect(ua::find_preset(name).persistent_sessions_supported, name);
  o.expect(checked >= compliant.size() + leaky.size(), "too few presets exercised");
}

// ---- 7: UA conflicts and NESN ----

void criterion_ua_and_nesn(Outcome& o) {
  const auto pixel7 = identity::pixel7_client_info();
  const std::string windows =
      "Mozilla/5.0 (Windows NT 10.0; Win64; x64) AppleWebKit/537.36 (KHTML, like Gecko) "
      "Chrome/120.0.0.0 Safari/537.36";
  auto conflict = audit::detect_ua_conflict(windows, pixel7);
  o.expect(conflict && conflict->rule == audit::Rule::kUaConflict, "Windows UA vs Pixel 7 not flagged");

  o.expect(!audit::detect_ua_conflict(audit::render_user_agent(pixel7), pixel7), "Pixel 7 rendered UA flagged");
  for (const auto& profile : ua::presets()) {
    if (!profile.eme_supported) continue;
    auto info = ua::provision_for(profile, 7).client_id.info;
    o.expect(!audit::detect_ua_conflict(audit::render_user_agent(info), info),
             profile.name + ": rendered UA flagged");
  }

  auto rng = crypto::DeterministicRandom::from_seed(7, "acceptance:nesn");
  auto suffix = [&](std::size_t n) {
    static constexpr char kAlnum[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789";
    std::string s(n, 'A');
    for (auto& c : s) c = kAlnum[rng.uniform(sizeof kAlnum - 1)];
    return s;
  };
  auto mobile = audit::parse_nesn("NFANDROID2-16-GOOGLE-PIXEL7-" + suffix(64));
  o.expect(mobile.finding && mobile.finding->severity == audit::Severity::kViolation &&
               mobile.finding->rule == audit::Rule::kNesnDistinctiveSuffix,
           "64-char mobile suffix not a VIOLATION");
  auto desktop = audit::parse_nesn("ChromeCDM-16-Google-Chrome-" + suffix(30));
  o.expect(desktop.finding.has_value() && desktop.finding->rule == audit::Rule::kNesnDistinctiveSuffix,
           "30-char desktop suffix not flagged");
  o.expect(desktop.info.category == "ChromeCDM", "category not parsed");
  bool malformed = false;
  try {
    audit::parse_nesn("not a nesn");
  } catch (const Error& e) {
    malformed = e.code() == ErrorCode::kNesnMalformed;
  }
  o.expect(malformed, "malformed NESN accepted");
}

// ---- 8: content keys never on the wire ----

void criterion_key_confidentiality(Outcome& o) {
  auto rng = crypto::DeterministicRandom::from_seed(8, "acceptance:flows");
  std::vector<ua::BrowserProfile> profiles;
  for (const auto& p : ua::presets()) {
    if (p.eme_supported) profiles.push_back(p);
  }

  std::size_t flows = 0, responses = 0;
  for (int w = 0; w < 4; ++w) {
    testbed::World world(800 + w, 8);
    std::vector<std::string> raw_keys;
    for (const auto& [id, key] : world.catalog().keys) raw_keys.push_back(to_text(key));

    for (int agent_no = 0; agent_no < 5; ++agent_no) {
      ua::UserAgent agent(profiles[rng.uniform(profiles.size())], rng.next_u64());
      for (int f = 0; f < 10; ++f, ++flows) {
        protocol::LicensePolicy policy;
        policy.can_play = true;
        policy.can_persist = rng.uniform(2);
        policy.can_renew = rng.uniform(2);
        policy.renewal_delay_s = 1 + rng.uniform(5);
        policy.renewal_retry_interval_s = rng.uniform(4);
        policy.always_include_client_id = rng.uniform(2);
        policy.license_duration_s = rng.uniform(3) * 3600;
        ua::InProcessEndpoint endpoint(world.server(), policy);

        std::vector<Bytes> ids;
        for (const auto& id : world.catalog().key_ids) {
          if (rng.uniform(2)) ids.push_back(id);
        }
        if (ids.empty()) ids.push_back(world.catalog().key_ids[rng.uniform(world.catalog().key_ids.size())]);

        ua::FlowOptions options;
        options.max_renewals = rng.uniform(3);
        auto type = policy.can_persist && rng.uniform(2) ? cdm::SessionType::kPersistent
                                                         : cdm::SessionType::kTemporary;
        auto trace = agent.run_license_flow("https://o" + std::to_string(f) + ".example", "default",
                                            endpoint, ids, type, 0, options);
        o.expect(!trace.failed(), "flow " + std::to_string(flows) + " failed");
        for (const auto& r : trace.records) {
          if (r.kind != "LICENSE_RESPONSE" && r.kind != "RENEWAL_RESPONSE") continue;
          ++responses;
          const std::string wire = to_text(r.body);
          for (const auto& k : raw_keys) {
            o.expect(wire.find(k) == std::string::npos, "raw content key in flow " + std::to_string(flows));
          }
        }
      }
    }
  }
  o.expect(flows == 200, "ran " + std::to_string(flows) + " flows");
  o.expect(responses >= 200, "only " + std::to_string(responses) + " responses");
}

struct Criterion {
  int id;
  const char* name;
  double limit_s;  // 0: no runtime bound
  std::function<void(Outcome&)> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria = {
      {1, "policy field codes", 1, criterion_policy_codes},
      {2, "browser verdict matrix", 30, criterion_matrix},
      {3, "privacy envelope round trip", 10, criterion_privacy},
      {4, "fingerprint uniqueness and stability", 60, criterion_fingerprints},
      {5, "renewal timing", 0, criterion_renewal},
      {6, "persistent-session tracking", 0, criterion_tracking},
      {7, "UA conflict and NESN", 0, criterion_ua_and_nesn},
      {8, "content key confidentiality", 0, criterion_key_confidentiality},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failures = 0;
  for (const auto& c : criteria) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    Outcome o;
    auto start = Clock::now();
    try {
      c.run(o);
    } catch (const std::exception& e) {
      o.expect(false, std::string("exception: ") + e.what());
    }
    double secs = std::chrono::duration<double>(Clock::now() - start).count();
    if (c.limit_s > 0) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "runtime %.2f s exceeds %.0f s", secs, c.limit_s);
      o.expect(secs < c.limit_s, buf);
    }
    std::printf("%s %d %s (%.2f s)\n", o.pass ? "PASS" : "FAIL", c.id, c.name, secs);
    for (const auto& n : o.notes) std::printf("    %s\n", n.c_str());
    std::fflush(stdout);
    failures += !o.pass;
  }
  return failures ? 1 : 0;
}
