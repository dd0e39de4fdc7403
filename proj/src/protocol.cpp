#include "emeforge/protocol.hpp"

#include <array>
#include <set>

#include "emeforge/codec.hpp"

namespace emeforge::protocol {

using codec::FieldReader;
using codec::FieldWriter;

namespace {

enum Field : std::uint64_t {
  kRequestId = 1,
  kContentKeyIds = 2,
  kClearClientId = 3,
  kEncryptedClientId = 4,
  kKeys = 5,
  kPolicy = 6,
  kUpdatedTtls = 7,
  kOttField = 9,
};

void write_client_id(FieldWriter& w, const ClientIdPayload& payload) {
  if (const auto* cid = std::get_if<identity::ClientId>(&payload)) {
    w.bytes(kClearClientId, cid->encode());
  } else {
    w.bytes(kEncryptedClientId, std::get<PrivacyEnvelope>(payload).encode());
  }
}

std::optional<ClientIdPayload> read_client_id(const FieldReader& r) {
  bool clear = r.has(kClearClientId);
  bool encrypted = r.has(kEncryptedClientId);
  if (clear && encrypted) {
    fail(ErrorCode::kInvariantViolation, "both clear and encrypted client id present");
  }
  if (clear) return identity::ClientId::decode(*r.bytes(kClearClientId));
  if (encrypted) return PrivacyEnvelope::decode(*r.bytes(kEncryptedClientId));
  return std::nullopt;
}

void write_ott(FieldWriter& w, const std::optional<Bytes>& ott) {
  if (ott) w.bytes(kOttField, *ott);
}

void check_unique_key_ids(const std::vector<Bytes>& ids) {
  std::set<Bytes> seen;
  for (const auto& id : ids) {
    if (!seen.insert(id).second) {
      fail(ErrorCode::kInvariantViolation, "duplicate key id " + to_hex(id));
    }
  }
}

Bytes encode_key_entry(const WrappedKey& k) {
  FieldWriter w;
  w.bytes(1, k.key_id).bytes(2, k.wrapped).varint_if(3, k.ttl_s);
  return std::move(w).take();
}

WrappedKey decode_key_entry(ByteView bytes) {
  FieldReader r(bytes);
  return {r.required_bytes(1, "key_id"), r.required_bytes(2, "wrapped_key"),
          r.varint(3).value_or(0)};
}

}  // namespace

Bytes encode_policy(const LicensePolicy& p) {
  FieldWriter w;
  w.boolean_if(1, p.can_play)
      .boolean_if(2, p.can_persist)
      .boolean_if(3, p.can_renew)
      .varint_if(4, p.rental_duration_s)
      .varint_if(5, p.playback_duration_s)
      .varint_if(6, p.license_duration_s)
      .varint_if(7, p.renewal_recovery_duration_s);
  if (!p.renewal_server_url.empty()) w.text(8, p.renewal_server_url);
  w.varint_if(9, p.renewal_delay_s)
      .varint_if(10, p.renewal_retry_interval_s)
      .boolean_if(11, p.renew_with_usage)
      .boolean_if(12, p.always_include_client_id)
      .boolean_if(14, p.soft_enforce_playback_duration)
      .boolean_if(15, p.soft_enforce_rental_duration)
      .varint_if(16, p.watermarking_control);
  return std::move(w).take();
}

LicensePolicy decode_policy(ByteView bytes) {
  FieldReader r(bytes);
  LicensePolicy p;
  p.can_play = r.boolean(1);
  p.can_persist = r.boolean(2);
  p.can_renew = r.boolean(3);
  p.rental_duration_s = r.varint(4).value_or(0);
  p.playback_duration_s = r.varint(5).value_or(0);
  p.license_duration_s = r.varint(6).value_or(0);
  p.renewal_recovery_duration_s = r.varint(7).value_or(0);
  p.renewal_server_url = r.text(8).value_or("");
  p.renewal_delay_s = r.varint(9).value_or(0);
  p.renewal_retry_interval_s = r.varint(10).value_or(0);
  p.renew_with_usage = r.boolean(11);
  p.always_include_client_id = r.boolean(12);
  p.soft_enforce_playback_duration = r.boolean(14);
  p.soft_enforce_rental_duration = r.boolean(15);
  p.watermarking_control = r.varint(16).value_or(0);
  return p;
}

Bytes PrivacyEnvelope::encode() const {
  FieldWriter w;
  w.bytes(1, wrapped_key).bytes(2, iv).bytes(3, ciphertext);
  return std::move(w).take();
}

PrivacyEnvelope PrivacyEnvelope::decode(ByteView bytes) {
  FieldReader r(bytes);
  return {r.required_bytes(1, "wrapped_key"), r.required_bytes(2, "iv"),
          r.required_bytes(3, "ciphertext")};
}

// ---- LicenseRequest ----

Bytes encode_message(const LicenseRequest& m) {
  if (m.content_key_ids.empty()) {
    fail(ErrorCode::kInvariantViolation, "license request needs at least one key id");
  }
  check_unique_key_ids(m.content_key_ids);
  FieldWriter w;
  w.bytes(kRequestId, m.request_id);
  for (const auto& id : m.content_key_ids) w.bytes(kContentKeyIds, id);
  write_client_id(w, m.client_id);
  return std::move(w).take();
}

LicenseRequest decode_license_request(ByteView bytes) {
  FieldReader r(bytes);
  LicenseRequest m;
  m.request_id = r.required_bytes(kRequestId, "request_id");
  m.content_key_ids = r.repeated_bytes(kContentKeyIds);
  if (m.content_key_ids.empty()) {
    fail(ErrorCode::kMissingRequiredField, "missing required field content_key_ids");
  }
  auto cid = read_client_id(r);
  if (!cid) fail(ErrorCode::kMissingRequiredField, "missing required field client_id");
  m.client_id = std::move(*cid);
  return m;
}

// ---- LicenseResponse ----

Bytes encode_message(const LicenseResponse& m) {
  FieldWriter w;
  w.bytes(kRequestId, m.request_id);
  for (const auto& k : m.keys) w.bytes(kKeys, encode_key_entry(k));
  w.bytes(kPolicy, encode_policy(m.policy));
  write_ott(w, m.ott_field);
  return std::move(w).take();
}

LicenseResponse decode_license_response(ByteView bytes) {
  FieldReader r(bytes);
  LicenseResponse m;
  m.request_id = r.required_bytes(kRequestId, "request_id");
  for (const auto& k : r.repeated_bytes(kKeys)) m.keys.push_back(decode_key_entry(k));
  m.policy = decode_policy(r.bytes(kPolicy).value_or(Bytes{}));
  m.ott_field = r.bytes(kOttField);
  return m;
}

// ---- RenewalRequest ----

RenewalRequest::RenewalRequest(Bytes request_id, LicensePolicy policy,
                               std::optional<ClientIdPayload> client_id)
    : request_id_(std::move(request_id)), policy_(std::move(policy)), client_id_(std::move(client_id)) {
  if (client_id_.has_value() != policy_.always_include_client_id) {
    fail(ErrorCode::kInvariantViolation,
         client_id_ ? "renewal carries a client id the policy does not ask for"
                    : "policy requires a client id in renewal requests");
  }
}

Bytes encode_message(const RenewalRequest& m) {
  FieldWriter w;
  w.bytes(kRequestId, m.request_id());
  w.bytes(kPolicy, encode_policy(m.policy()));
  if (m.client_id()) write_client_id(w, *m.client_id());
  return std::move(w).take();
}

RenewalRequest decode_renewal_request(ByteView bytes) {
  FieldReader r(bytes);
  Bytes request_id = r.required_bytes(kRequestId, "request_id");
  LicensePolicy policy = decode_policy(r.bytes(kPolicy).value_or(Bytes{}));
  return RenewalRequest(std::move(request_id), std::move(policy), read_client_id(r));
}

// ---- RenewalResponse ----

Bytes encode_message(const RenewalResponse& m) {
  FieldWriter w;
  w.bytes(kRequestId, m.request_id);
  for (const auto& t : m.updated_ttls) {
    FieldWriter entry;
    entry.bytes(1, t.key_id).varint_if(2, t.ttl_s);
    w.bytes(kUpdatedTtls, entry.data());
  }
  w.bytes(kPolicy, encode_policy(m.policy));
  write_ott(w, m.ott_field);
  return std::move(w).take();
}

RenewalResponse decode_renewal_response(ByteView bytes) {
  FieldReader r(bytes);
  RenewalResponse m;
  m.request_id = r.required_bytes(kRequestId, "request_id");
  for (const auto& raw : r.repeated_bytes(kUpdatedTtls)) {
    FieldReader e(raw);
    m.updated_ttls.push_back({e.required_bytes(1, "key_id"), e.varint(2).value_or(0)});
  }
  m.policy = decode_policy(r.bytes(kPolicy).value_or(Bytes{}));
  m.ott_field = r.bytes(kOttField);
  return m;
}

// ---- SignedMessage ----

namespace {
constexpr std::array<std::pair<MessageKind, std::string_view>, 5> kKindNames{{
    {MessageKind::kLicenseRequest, "LICENSE_REQUEST"},
    {MessageKind::kLicenseResponse, "LICENSE_RESPONSE"},
    {MessageKind::kRenewalRequest, "RENEWAL_REQUEST"},
    {MessageKind::kRenewalResponse, "RENEWAL_RESPONSE"},
    {MessageKind::kServiceCertificate, "SERVICE_CERTIFICATE"},
}};
}  // namespace

std::string_view to_string(MessageKind kind) {
  for (const auto& [k, name] : kKindNames) {
    if (k == kind) return name;
  }
  return "UNKNOWN";
}

MessageKind parse_message_kind(std::string_view name) {
  for (const auto& [k, n] : kKindNames) {
    if (n == name) return k;
  }
  fail(ErrorCode::kUnknownKind, "unknown message kind '" + std::string(name) + "'");
}

MessageKind message_kind_from_code(std::uint64_t code) {
  if (code < 1 || code > 5) {
    fail(ErrorCode::kUnknownKind, "unknown message kind code " + std::to_string(code));
  }
  return static_cast<MessageKind>(code);
}

Bytes SignedMessage::encode() const {
  FieldWriter w;
  w.varint(1, static_cast<std::uint64_t>(kind)).bytes(2, body).bytes(3, signature);
  return std::move(w).take();
}

SignedMessage SignedMessage::decode(ByteView bytes) {
  FieldReader r(bytes);
  auto code = r.varint(1);
  if (!code) fail(ErrorCode::kMissingRequiredField, "missing required field kind");
  return {message_kind_from_code(*code), r.required_bytes(2, "body"),
          r.bytes(3).value_or(Bytes{})};
}

SignedMessage sign_message(MessageKind kind, Bytes body, const crypto::RsaPrivateKey& key) {
  message_kind_from_code(static_cast<std::uint64_t>(kind));
  Bytes sig = key.sign(body);
  return {kind, std::move(body), std::move(sig)};
}

bool verify_message(const SignedMessage& message, const crypto::RsaPublicKey& key) {
  return key.verify(message.body, message.signature);
}

}  // namespace emeforge::protocol
