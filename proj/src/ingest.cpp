#include "emeforge/ingest.hpp"

#include <json.hpp>

namespace emeforge::ingest {

using nlohmann::json;
using protocol::MessageKind;

namespace {

bool is_event_kind(std::string_view kind) {
  return kind == kPermissionDenied || kind == kEmeUnsupported;
}

std::optional<MessageKind> message_kind(std::string_view kind) {
  try {
    return protocol::parse_message_kind(kind);
  } catch (const Error&) {
    return std::nullopt;
  }
}

ua::Direction direction_of(MessageKind k) {
  return k == MessageKind::kLicenseRequest || k == MessageKind::kRenewalRequest
             ? ua::Direction::kClientToServer
             : ua::Direction::kServerToClient;
}

// CLEAR / ENCRYPTED / ABSENT for request kinds, UNDECODABLE when the bytes
// are not in a known format, N/A for other kinds.
std::string client_id_status(std::string_view kind, const Bytes& bytes) {
  auto k = message_kind(kind);
  if (!k || (*k != MessageKind::kLicenseRequest && *k != MessageKind::kRenewalRequest)) return "N/A";
  Bytes body = bytes;
  try {
    auto sm = protocol::SignedMessage::decode(bytes);
    if (sm.kind == *k) body = std::move(sm.body);
  } catch (const Error&) {
  }
  try {
    std::optional<protocol::ClientIdPayload> cid;
    if (*k == MessageKind::kLicenseRequest) {
      cid = protocol::decode_license_request(body).client_id;
    } else {
      cid = protocol::decode_renewal_request(body).client_id();
    }
    if (!cid) return "ABSENT";
    return protocol::is_clear(*cid) ? "CLEAR" : "ENCRYPTED";
  } catch (const Error&) {
    return "UNDECODABLE";
  }
}

json verdicts_json(const audit::AuditReport& r) {
  json v = json::object();
  for (const auto& [q, verdict] : r.verdicts) v[std::string(audit::to_string(q))] = audit::to_string(verdict);
  return v;
}

}  // namespace

IngestRecord IngestRecord::from_json(std::string_view text, std::string_view received_at) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) fail(ErrorCode::kBadValue, "ingest body is not a JSON object");

  auto text_field = [&](const char* key, bool required) -> std::optional<std::string> {
    if (!j.contains(key) || j[key].is_null()) {
      if (required) fail(ErrorCode::kBadValue, std::string("missing field '") + key + "'");
      return std::nullopt;
    }
    if (!j[key].is_string()) fail(ErrorCode::kBadValue, std::string("field '") + key + "' must be a string");
    return j[key].get<std::string>();
  };

  IngestRecord r;
  r.source = *text_field("source", true);
  r.kind = *text_field("kind", true);
  r.body_b64 = text_field("body_b64", false).value_or("");
  r.claimed_ua = text_field("claimed_ua", false);
  r.session_id_hex = text_field("session_id_hex", false);
  r.session_type = text_field("session_type", false);
  if (j.contains("received_at") && j["received_at"].is_number()) {
    r.received_at = j["received_at"].dump();
  } else {
    r.received_at = text_field("received_at", false).value_or(std::string(received_at));
  }

  if (r.source.empty()) fail(ErrorCode::kBadValue, "empty source");
  if (!message_kind(r.kind) && !is_event_kind(r.kind)) {
    fail(ErrorCode::kBadValue, "unknown record kind '" + r.kind + "'");
  }
  try {
    base64_decode(r.body_b64);
  } catch (const Error&) {
    fail(ErrorCode::kBadValue, "body_b64 is not valid base-64");
  }
  return r;
}

std::string IngestRecord::to_json() const {
  json j = {{"received_at", received_at}, {"source", source}, {"kind", kind}, {"body_b64", body_b64}};
  if (claimed_ua) j["claimed_ua"] = *claimed_ua;
  if (session_id_hex) j["session_id_hex"] = *session_id_hex;
  if (session_type) j["session_type"] = *session_type;
  return j.dump();
}

ua::FlowTrace to_trace(const std::vector<IngestRecord>& records) {
  ua::FlowTrace trace;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    auto k = message_kind(r.kind);
    trace.add(i, k ? direction_of(*k) : ua::Direction::kEvent, r.kind, base64_decode(r.body_b64));
  }
  return trace;
}

IngestResult IngestStore::ingest(IngestRecord record) {
  std::lock_guard lock(mu_);
  Source& s = sources_[record.source];
  IngestResult result;
  result.duplicate = !s.bodies.insert(record.body_b64).second;
  if (!result.duplicate) s.records.push_back(record);

  auto report = report_locked(record.source, s);
  json violations = json::array();
  for (const auto& f : report.findings) {
    if (f.severity == audit::Severity::kViolation) violations.push_back(audit::to_string(f.rule));
  }
  json summary = {
      {"source", record.source},
      {"duplicate", result.duplicate},
      {"records", s.records.size()},
      {"record",
       {{"kind", record.kind}, {"client_id", client_id_status(record.kind, base64_decode(record.body_b64))}}},
      {"verdicts", verdicts_json(report)},
      {"violations", violations},
      {"findings", report.findings.size()},
  };
  result.summary_json = summary.dump();
  return result;
}

std::optional<audit::AuditReport> IngestStore::report(const std::string& source) const {
  std::lock_guard lock(mu_);
  auto it = sources_.find(source);
  if (it == sources_.end()) return std::nullopt;
  return report_locked(source, it->second);
}

std::vector<std::string> IngestStore::sources() const {
  std::lock_guard lock(mu_);
  std::vector<std::string> out;
  for (const auto& [name, _] : sources_) out.push_back(name);
  return out;
}

audit::AuditReport IngestStore::report_locked(const std::string& source, const Source& s) const {
  audit::TraceAuditOptions options;
  options.lenient = true;
  for (const auto& r : s.records) {
    if (r.claimed_ua) {
      options.claimed_ua = r.claimed_ua;
      break;
    }
  }
  auto report = audit::audit_trace(to_trace(s.records), source, options);
  for (std::size_t i = 0; i < s.records.size(); ++i) {
    if (is_event_kind(s.records[i].kind)) {
      report.add_log("record " + std::to_string(i) + ": probe reported " + s.records[i].kind);
    }
  }
  return report;
}

}  // namespace emeforge::ingest
