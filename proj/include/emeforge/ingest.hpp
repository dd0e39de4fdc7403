#pragma once

// Capture records posted by in-browser probes, and the per-source store the
// HTTP service audits them from.

#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "emeforge/audit.hpp"

namespace emeforge::ingest {

// Record kinds besides the five message kinds.
inline constexpr std::string_view kPermissionDenied = "PERMISSION_DENIED";
inline constexpr std::string_view kEmeUnsupported = "EME_UNSUPPORTED";

struct IngestRecord {
  std::string received_at;  // wall clock, set by the receiver when absent
  std::string source;
  std::string kind;
  std::string body_b64;
  std::optional<std::string> claimed_ua;
  std::optional<std::string> session_id_hex;
  std::optional<std::string> session_type;

  // Throws kBadValue on malformed JSON, missing fields, an unknown kind or
  // a body that is not base-64.
  static IngestRecord from_json(std::string_view text, std::string_view received_at);
  std::string to_json() const;
};

// One trace record per ingest record, in arrival order, so trace evidence
// indices address ingest records directly.
ua::FlowTrace to_trace(const std::vector<IngestRecord>& records);

struct IngestResult {
  bool duplicate = false;
  std::string summary_json;
};

// Thread-safe. Re-posting the same (source, body) is a no-op.
class IngestStore {
 public:
  IngestResult ingest(IngestRecord record);
  std::optional<audit::AuditReport> report(const std::string& source) const;
  std::vector<std::string> sources() const;

 private:
  struct Source {
    std::vector<IngestRecord> records;
    std::set<std::string> bodies;
  };

  audit::AuditReport report_locked(const std::string& source, const Source& s) const;

  mutable std::mutex mu_;
  std::map<std::string, Source> sources_;
};

}  // namespace emeforge::ingest
