#pragma once

// Conformance auditor. Works from wire bytes (FlowTrace) for Client ID
// exposure and from scripted user-agent behavior for persistent-session
// handling, and offers the fingerprinting helpers a tracking origin would use.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "emeforge/identity.hpp"
#include "emeforge/testbed.hpp"
#include "emeforge/user_agent.hpp"

namespace emeforge::audit {

enum class Rule {
  kRq1ClearClientIdInLicenseRequest,
  kRq2ClearClientIdInRenewal,
  kRq3SessionDespiteCookieBlock,
  kRq3SessionSurvivesWipe,
  kRq3CrossOriginLeak,
  kRq3SessionsHiddenFromStorageUi,
  kFpUniqueCertSerial,
  kUaConflict,
  kNesnDistinctiveSuffix,
  kPermSilentEmeAccess,
};

enum class Severity { kInfo, kWarn, kViolation };
enum class Verdict { kCompliant, kNoncompliant, kNotApplicable };
enum class Question { kRq1, kRq2, kRq3 };
enum class FingerprintClass { kUniqueDevice, kSharedPerCdmVersion };

std::string_view to_string(Rule r);
std::string_view to_string(Severity s);
std::string_view to_string(Verdict v);
std::string_view to_string(Question q);
std::string_view to_string(FingerprintClass c);

// The research question a rule decides, if any.
std::optional<Question> question_of(Rule r);

struct Evidence {
  std::string source;  // "trace" (record index) or "log" (report log line)
  std::size_t index = 0;
  // Byte range inside the record body, when the finding is a sub-span.
  std::optional<std::size_t> offset;
  std::optional<std::size_t> length;
};

struct Finding {
  Rule rule;
  Severity severity;
  std::vector<Evidence> evidence;
  std::string description;
};

struct Fingerprint {
  std::string serial_hex;
  FingerprintClass cls;
};

struct AuditReport {
  std::string subject;
  std::vector<Finding> findings;
  std::map<Question, Verdict> verdicts;
  std::optional<Fingerprint> fingerprint;
  std::optional<std::string> augmented_ua;
  // Scenario steps and notes, addressable by "log" evidence.
  std::vector<std::string> log;

  bool any_noncompliant() const;
  std::size_t count(Rule r) const;
  std::size_t add_log(std::string line);
  // Appends `other`, rebasing its log evidence. Verdicts in `other` win.
  void merge(const AuditReport& other);
};

struct TraceAuditOptions {
  // Skip records whose bytes do not decode instead of failing. Used for
  // captures from real browsers.
  bool lenient = false;
  // User-Agent header to check against a clear Client ID when the trace has
  // no USER_AGENT event.
  std::optional<std::string> claimed_ua;
};

// Throws kTraceCorrupt on undecodable message records unless lenient.
AuditReport audit_trace(const ua::FlowTrace& trace, std::string subject = "trace",
                        TraceAuditOptions options = {});

// RQ3 battery: cookie-blocked creation, cross-origin/profile reopen, and
// reopen after clearing site data. Resets the agent's store before each.
AuditReport audit_persistence(ua::UserAgent& agent, ua::LicenseEndpoint& endpoint,
                              const std::vector<Bytes>& key_ids);

// Policy used for profile audits: persistable, renewable, Client ID on renewal.
protocol::LicensePolicy audit_policy();

// One license flow of `profile` against the world's server.
ua::FlowTrace simulate(const ua::BrowserProfile& profile, testbed::World& world,
                       const protocol::LicensePolicy& policy, cdm::SessionType type,
                       std::uint64_t seed);

// Simulation, trace audit and persistence battery for one preset.
AuditReport audit_profile(const ua::BrowserProfile& profile, std::uint64_t seed);

Fingerprint extract_fingerprint(const identity::ClientId& cid, cdm::Platform platform);
// Class inferred from the Client Info shape.
Fingerprint extract_fingerprint(const identity::ClientId& cid);

// "(<platform-or-build>; <architecture>; <model>) CDM/<version> App/<app>",
// empty segments omitted.
std::string build_augmented_ua(const identity::ClientInfo& info);

// A browser User-Agent header consistent with the Client Info.
std::string render_user_agent(const identity::ClientInfo& info);

std::optional<Finding> detect_ua_conflict(std::string_view claimed_ua,
                                          const identity::ClientInfo& info);

struct NesnInfo {
  std::string category;
  std::string oemcrypto_version;
  std::string manufacturer;
  std::string model;
  std::string random_suffix;
};

struct NesnParse {
  NesnInfo info;
  std::optional<Finding> finding;
};

inline constexpr std::size_t kNesnDesktopSuffix = 30;
inline constexpr std::size_t kNesnMobileSuffix = 64;

// Grammar: CATEGORY-OEMCRYPTOVER-MANUFACTURER-MODEL-SUFFIX, five non-empty
// alphanumeric segments. Throws kNesnMalformed.
NesnParse parse_nesn(std::string_view nesn);

// Ids from `known_ids` that reopen under (origin, profile_id). Reopened
// sessions are released again.
std::vector<std::string> track_sessions(const std::vector<std::string>& known_ids,
                                        ua::UserAgent& agent, const std::string& origin,
                                        const std::string& profile_id, VirtualTime now);

std::string render_json(const AuditReport& report);
std::string render_text(const AuditReport& report);

}  // namespace emeforge::audit
