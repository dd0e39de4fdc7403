#pragma once

// Simulated browser embedding a CDM. Owns per-origin/per-profile session
// storage, permission state and the cookie switch, and records every message
// exchanged with the license server into a FlowTrace.

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "emeforge/cdm.hpp"
#include "emeforge/identity.hpp"
#include "emeforge/license_server.hpp"

namespace emeforge::ua {

enum class PermissionModel { kDefaultAllow, kPerOriginPrompt, kGlobalGrant };
enum class Family { kChromium, kFirefox };

std::string_view to_string(PermissionModel m);
std::string_view to_string(Family f);

struct BrowserProfile {
  std::string name;
  std::string browser;
  Family family = Family::kChromium;
  bool eme_supported = true;
  cdm::Platform platform = cdm::Platform::kMobile;
  bool mobile_privacy_mode_set = false;
  bool persistent_sessions_supported = false;
  bool quirk_sessions_ignore_cookie_block = false;
  bool quirk_sessions_survive_site_data_wipe = false;
  PermissionModel permission_model = PermissionModel::kDefaultAllow;
  // Models the CDM build; false gives a CDM that also encrypts renewals.
  bool vmp_renewal_privacy_gap = true;
  std::string os;            // "Windows", "Linux" or "Android"
  std::string architecture;  // as reported in Client Info
  std::string app_id;        // Android package name, empty on desktop
  std::string cdm_version;
  std::string user_agent;    // header the browser claims

  bool is_mobile() const { return platform == cdm::Platform::kMobile; }
};

// Built-in presets, in table order.
const std::vector<BrowserProfile>& presets();
// One name per browser row of the results matrix: desktop aliases resolve to
// the Windows (VMP) build.
const std::vector<std::string>& matrix_preset_names();
// Accepts preset names and aliases ("chrome_desktop", "firefox_linux", ...).
// Throws kUnknownProfile.
const BrowserProfile& find_preset(std::string_view name);

struct OriginProfileKey {
  std::string origin;
  std::string profile_id;

  friend auto operator<=>(const OriginProfileKey&, const OriginProfileKey&) = default;
};

struct SiteDataStore {
  bool cookies_blocked = false;
  // Sealed session blobs keyed by session id hex.
  std::map<OriginProfileKey, std::map<std::string, Bytes>> sessions;
  // Origins granted EME access; "*" for a global grant.
  std::set<std::string> permission_grants;
};

struct AccessConfig {
  bool persistent = false;
};

enum class AccessResolution { kSilent, kPrompted, kRemembered };
std::string_view to_string(AccessResolution r);

struct AccessHandle {
  std::string origin;
  std::string profile_id;
  bool persistent = false;
  AccessResolution resolution = AccessResolution::kSilent;
};

// ---- flow traces ----

enum class Direction { kClientToServer, kServerToClient, kEvent };
std::string_view to_string(Direction d);

// Event kinds recorded alongside messages.
inline constexpr std::string_view kEventUserAgent = "USER_AGENT";
inline constexpr std::string_view kEventAccessGranted = "ACCESS_GRANTED";
inline constexpr std::string_view kEventSessionCreated = "SESSION_CREATED";
inline constexpr std::string_view kEventSessionClosed = "SESSION_CLOSED";
inline constexpr std::string_view kEventSessionStored = "SESSION_STORED";
inline constexpr std::string_view kEventSessionDiscarded = "SESSION_DISCARDED";
inline constexpr std::string_view kEventError = "ERROR";

struct TraceRecord {
  VirtualTime t = 0;
  Direction dir = Direction::kEvent;
  std::string kind;
  Bytes body;

  friend bool operator==(const TraceRecord&, const TraceRecord&) = default;
};

// One JSON object per line: {"t", "dir", "kind", "body_b64"}. Message
// records carry the encoded SignedMessage.
struct FlowTrace {
  std::vector<TraceRecord> records;

  void add(VirtualTime t, Direction dir, std::string_view kind, Bytes body);
  bool failed() const;
  std::optional<std::string> session_id_hex() const;
  // Session id of a SESSION_STORED event, if the flow stored one.
  std::optional<std::string> stored_session_hex() const;

  std::string to_jsonl() const;
  // Throws kTraceCorrupt.
  static FlowTrace from_jsonl(std::string_view text);

  friend bool operator==(const FlowTrace&, const FlowTrace&) = default;
};

// ---- server side of a flow ----

class LicenseEndpoint {
 public:
  virtual ~LicenseEndpoint() = default;
  virtual protocol::SignedMessage license(const protocol::SignedMessage& request, VirtualTime now) = 0;
  virtual protocol::SignedMessage renew(const protocol::SignedMessage& request, VirtualTime now) = 0;
};

class InProcessEndpoint final : public LicenseEndpoint {
 public:
  InProcessEndpoint(server::LicenseServer& server, std::optional<protocol::LicensePolicy> policy)
      : server_(server), policy_(std::move(policy)) {}

  protocol::SignedMessage license(const protocol::SignedMessage& request, VirtualTime now) override {
    return server_.handle_license_request(request, now, policy_);
  }
  protocol::SignedMessage renew(const protocol::SignedMessage& request, VirtualTime now) override {
    return server_.handle_renewal_request(request, now);
  }

 private:
  server::LicenseServer& server_;
  std::optional<protocol::LicensePolicy> policy_;
};

struct FlowOptions {
  // Virtual seconds the flow keeps ticking after the license lands.
  VirtualTime renewal_horizon_s = 60;
  std::size_t max_renewals = 1;
  bool close_session = true;
};

// ---- the browser ----

class UserAgent {
 public:
  // The device is derived from `seed`; two agents built from the same seed
  // and profile have the same Client ID.
  UserAgent(BrowserProfile profile, std::uint64_t seed);
  UserAgent(BrowserProfile profile, identity::ProvisionedIdentity device, std::uint64_t seed);

  const BrowserProfile& profile() const { return profile_; }
  const identity::ClientId& client_id() const { return device_.client_id; }
  // Throws kEmeUnsupported when the browser has no CDM.
  cdm::Cdm& cdm();
  const SiteDataStore& store() const { return store_; }

  void set_cookies_blocked(bool blocked) { store_.cookies_blocked = blocked; }
  // Decides permission prompts. Defaults to accepting.
  void set_prompt_responder(std::function<bool(std::string_view origin)> responder);
  std::size_t prompts_shown() const { return prompts_shown_; }

  // Throws kEmeUnsupported or kPermissionDenied.
  AccessHandle request_key_system_access(const std::string& origin, const std::string& profile_id,
                                         AccessConfig config);

  // Access, session creation, license exchange, renewals and close. CDM and
  // server failures end the trace with an ERROR record instead of throwing.
  FlowTrace run_license_flow(const std::string& origin, const std::string& profile_id,
                             LicenseEndpoint& endpoint, const std::vector<Bytes>& key_ids,
                             cdm::SessionType type, VirtualTime now, FlowOptions options = {});

  void clear_site_data(const std::string& origin, const std::string& profile_id);
  void wipe_all_app_data();

  // Throws kNotFound for every failure cause.
  const cdm::Session& load_stored_session(const std::string& origin, const std::string& profile_id,
                                          const std::string& session_id_hex, VirtualTime now);
  // Closes a loaded session without touching the stored copy.
  void release_session(const std::string& session_id_hex);

  // What the browser's storage settings page shows. Always empty.
  std::vector<std::string> storage_ui_listing(const std::string& origin,
                                              const std::string& profile_id) const;

 private:
  BrowserProfile profile_;
  identity::ProvisionedIdentity device_;
  std::unique_ptr<crypto::DeterministicRandom> rng_;
  std::unique_ptr<cdm::Cdm> cdm_;
  SiteDataStore store_;
  std::function<bool(std::string_view)> responder_;
  std::size_t prompts_shown_ = 0;
};

// Identity a preset's CDM reports on a device derived from `seed`.
identity::ProvisionedIdentity provision_for(const BrowserProfile& profile, std::uint64_t seed);

}  // namespace emeforge::ua
