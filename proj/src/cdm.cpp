#include "emeforge/cdm.hpp"

#include <algorithm>

#include "emeforge/codec.hpp"

namespace emeforge::cdm {

using codec::FieldReader;
using codec::FieldWriter;
using protocol::MessageKind;

namespace {

constexpr std::uint64_t kBlobMacField = 15;

std::optional<VirtualTime> earliest(std::optional<VirtualTime> a, std::optional<VirtualTime> b) {
  if (!a) return b;
  if (!b) return a;
  return std::min(*a, *b);
}

bool expired(const WalletEntry& e, VirtualTime now) { return e.expiry && now >= *e.expiry; }

}  // namespace

std::string_view to_string(Platform p) {
  switch (p) {
    case Platform::kDesktopVmp: return "DESKTOP_VMP";
    case Platform::kDesktopNonVmp: return "DESKTOP_NON_VMP";
    case Platform::kMobile: return "MOBILE";
  }
  return "?";
}

std::string_view to_string(SessionType t) {
  return t == SessionType::kPersistent ? "PERSISTENT" : "TEMPORARY";
}

std::string_view to_string(SessionState s) {
  switch (s) {
    case SessionState::kCreated: return "CREATED";
    case SessionState::kPending: return "PENDING";
    case SessionState::kActive: return "ACTIVE";
    case SessionState::kClosed: return "CLOSED";
  }
  return "?";
}

Cdm::Cdm(CdmConfig config, crypto::RandomSource& rng) : config_(std::move(config)), rng_(rng) {
  switch (config_.platform) {
    case Platform::kDesktopVmp: config_.privacy_mode_enabled = true; break;
    case Platform::kDesktopNonVmp: config_.privacy_mode_enabled = false; break;
    case Platform::kMobile: break;
  }
  if (config_.server_certificate) set_server_certificate(*config_.server_certificate);
  Bytes label = to_bytes("session-blob");
  const Bytes& serial = config_.client_id.chain.device_cert.serial;
  label.insert(label.end(), serial.begin(), serial.end());
  blob_mac_key_ = crypto::sha256(label);
}

bool Cdm::license_privacy() const { return config_.privacy_mode_enabled; }

bool Cdm::renewal_privacy() const {
  return license_privacy() &&
         !(config_.platform == Platform::kDesktopVmp && config_.vmp_renewal_privacy_gap);
}

void Cdm::set_server_certificate(const privacy::ServerCertificate& cert) {
  if (!privacy::verify_server_certificate(cert, privacy::root_privacy_public_key())) {
    fail(ErrorCode::kCertificateUnverified, "server certificate rejected");
  }
  config_.server_certificate = cert;
}

void Cdm::set_privacy_mode(bool enabled) {
  if (config_.platform != Platform::kMobile) {
    fail(ErrorCode::kPlatformForbids, "privacy mode on desktop follows VMP and cannot be set");
  }
  config_.privacy_mode_enabled = enabled;
}

void Cdm::observe(VirtualTime now) { clock_ = std::max(clock_, now); }

Session& Cdm::mutable_session(ByteView session_id) {
  auto it = sessions_.find(Bytes(session_id.begin(), session_id.end()));
  if (it == sessions_.end()) {
    fail(ErrorCode::kSessionNotFound, "no session " + to_hex(session_id));
  }
  return it->second;
}

const Session& Cdm::session(ByteView session_id) const {
  return const_cast<Cdm*>(this)->mutable_session(session_id);
}

std::vector<Bytes> Cdm::session_ids() const {
  std::vector<Bytes> ids;
  for (const auto& [id, _] : sessions_) ids.push_back(id);
  return ids;
}

const Session& Cdm::create_session(SessionType type, VirtualTime now) {
  observe(now);
  Bytes id;
  do {
    id = rng_.bytes(16);
  } while (sessions_.count(id));
  Session s;
  s.session_id = id;
  s.type = type;
  s.created_at = clock_;
  return sessions_.emplace(id, std::move(s)).first->second;
}

protocol::ClientIdPayload Cdm::client_id_payload(bool encrypted) {
  if (!encrypted) return config_.client_id;
  if (!config_.server_certificate) {
    fail(ErrorCode::kNoServerCertificate, "privacy mode needs a server certificate");
  }
  return privacy::encrypt_client_id(config_.client_id, *config_.server_certificate, rng_);
}

protocol::SignedMessage Cdm::generate_request(ByteView session_id,
                                              const std::vector<Bytes>& key_ids) {
  Session& s = mutable_session(session_id);
  if (s.state != SessionState::kCreated) {
    fail(ErrorCode::kBadState, "generate_request needs a CREATED session, got " +
                                   std::string(to_string(s.state)));
  }
  if (license_privacy() && !config_.server_certificate) {
    fail(ErrorCode::kNoServerCertificate, "privacy mode needs a server certificate");
  }
  protocol::LicenseRequest req{rng_.bytes(protocol::kIdSize), key_ids,
                               client_id_payload(license_privacy())};
  auto signed_msg = protocol::sign_message(MessageKind::kLicenseRequest,
                                           protocol::encode_message(req), config_.device_private_key);
  s.request_id = req.request_id;
  s.state = SessionState::kPending;
  return signed_msg;
}

std::optional<VirtualTime> Cdm::key_expiry(const Session& s,
                                           std::optional<VirtualTime> ttl_expiry) const {
  const auto& p = *s.policy;
  std::optional<VirtualTime> cap = ttl_expiry;
  if (s.license_received_at) {
    if (p.soft_enforce_rental_duration && p.license_duration_s > 0) {
      cap = earliest(cap, *s.license_received_at + p.license_duration_s);
    } else if (p.rental_duration_s > 0) {
      cap = earliest(cap, *s.license_received_at + p.rental_duration_s);
    }
  }
  if (s.first_play_at) {
    if (p.soft_enforce_playback_duration && p.license_duration_s > 0) {
      cap = earliest(cap, *s.first_play_at + p.license_duration_s);
    } else if (p.playback_duration_s > 0) {
      cap = earliest(cap, *s.first_play_at + p.playback_duration_s);
    }
  }
  return cap;
}

void Cdm::apply_caps(Session& s) {
  for (auto& [_, entry] : s.key_wallet) entry.expiry = key_expiry(s, entry.expiry);
}

void Cdm::schedule_renewal(Session& s, VirtualTime now) {
  const auto& p = *s.policy;
  s.renewal_pending_since.reset();
  if (!p.can_renew || (p.renew_with_usage && !s.first_play_at)) {
    s.renewal_due.reset();  // usage-triggered renewals are armed by decrypt_sample
    return;
  }
  s.renewal_due = now + p.renewal_delay_s;
}

void Cdm::handle_license_response(Session& s, const protocol::SignedMessage& m, VirtualTime now) {
  if (m.kind != MessageKind::kLicenseResponse) {
    fail(ErrorCode::kBadState, "pending session expects a LICENSE_RESPONSE");
  }
  if (!protocol::verify_message(m, config_.license_server_key)) {
    fail(ErrorCode::kSignatureInvalid, "license response signature does not verify");
  }
  auto resp = protocol::decode_license_response(m.body);
  if (resp.request_id != *s.request_id) {
    fail(ErrorCode::kRequestIdMismatch, "response is for request " + to_hex(resp.request_id));
  }
  auto keys = privacy::unwrap_content_keys(resp.keys, config_.device_private_key);
  s.policy = resp.policy;
  s.license_received_at = now;
  s.key_wallet.clear();
  for (const auto& k : keys) {
    std::optional<VirtualTime> ttl_expiry;
    if (k.ttl_s > 0) ttl_expiry = now + k.ttl_s;
    s.key_wallet[k.key_id] = WalletEntry{k.key, key_expiry(s, ttl_expiry)};
  }
  s.state = SessionState::kActive;
  s.recovery_lapsed = false;
  schedule_renewal(s, now);
}

void Cdm::handle_renewal_response(Session& s, const protocol::SignedMessage& m, VirtualTime now) {
  if (m.kind != MessageKind::kRenewalResponse) {
    fail(ErrorCode::kBadState, "active session expects a RENEWAL_RESPONSE");
  }
  if (!protocol::verify_message(m, config_.license_server_key)) {
    fail(ErrorCode::kSignatureInvalid, "renewal response signature does not verify");
  }
  auto resp = protocol::decode_renewal_response(m.body);
  if (resp.request_id != *s.request_id) {
    fail(ErrorCode::kRequestIdMismatch, "renewal response is for request " + to_hex(resp.request_id));
  }
  if (!s.policy->can_renew) {
    fail(ErrorCode::kPolicyForbids, "active policy does not allow renewal");
  }
  s.policy = resp.policy;
  for (const auto& t : resp.updated_ttls) {
    auto it = s.key_wallet.find(t.key_id);
    if (it == s.key_wallet.end()) continue;
    std::optional<VirtualTime> ttl_expiry;
    if (t.ttl_s > 0) ttl_expiry = now + t.ttl_s;
    it->second.expiry = key_expiry(s, ttl_expiry);
  }
  s.recovery_lapsed = false;
  schedule_renewal(s, now);
}

void Cdm::update(ByteView session_id, const protocol::SignedMessage& response, VirtualTime now) {
  observe(now);
  Session& s = mutable_session(session_id);
  switch (s.state) {
    case SessionState::kPending: handle_license_response(s, response, now); break;
    case SessionState::kActive: handle_renewal_response(s, response, now); break;
    default:
      fail(ErrorCode::kBadState,
           "update on a " + std::string(to_string(s.state)) + " session");
  }
}

std::vector<OutgoingMessage> Cdm::tick(VirtualTime now) {
  observe(now);
  std::vector<OutgoingMessage> out;
  for (auto& [id, s] : sessions_) {
    if (s.state != SessionState::kActive || !s.renewal_due || *s.renewal_due > now) continue;
    const auto& p = *s.policy;
    if (p.renewal_recovery_duration_s > 0 && s.renewal_pending_since &&
        now >= *s.renewal_pending_since + p.renewal_recovery_duration_s) {
      s.recovery_lapsed = true;
      s.renewal_due.reset();
      continue;
    }
    std::optional<protocol::ClientIdPayload> cid;
    if (p.always_include_client_id) cid = client_id_payload(renewal_privacy());
    protocol::RenewalRequest rr(*s.request_id, p, std::move(cid));
    out.push_back({id, protocol::sign_message(MessageKind::kRenewalRequest,
                                              protocol::encode_message(rr),
                                              config_.device_private_key)});
    if (!s.renewal_pending_since) s.renewal_pending_since = now;
    if (p.renewal_retry_interval_s > 0) {
      s.renewal_due = now + p.renewal_retry_interval_s;
    } else {
      s.renewal_due.reset();
    }
  }
  return out;
}

std::optional<SessionBlob> Cdm::close_session(ByteView session_id) {
  Session& s = mutable_session(session_id);
  std::optional<SessionBlob> blob;
  if (s.type == SessionType::kPersistent && s.state == SessionState::kActive &&
      s.policy->can_persist) {
    blob = SessionBlob{s.session_id, s.type, *s.policy, s.key_wallet, s.created_at,
                       s.request_id.value_or(Bytes{})};
  }
  s.key_wallet.clear();
  s.renewal_due.reset();
  s.state = SessionState::kClosed;
  return blob;
}

Bytes Cdm::seal_blob(const SessionBlob& blob) const {
  FieldWriter w;
  w.bytes(1, blob.session_id)
      .varint(2, blob.type == SessionType::kPersistent ? 2 : 1)
      .bytes(3, protocol::encode_policy(blob.policy));
  for (const auto& [key_id, entry] : blob.wallet) {
    FieldWriter e;
    e.bytes(1, key_id).bytes(2, entry.key);
    if (entry.expiry) e.varint(3, *entry.expiry);
    w.bytes(4, e.data());
  }
  w.varint(5, blob.created_at).bytes(6, blob.request_id);
  Bytes out = std::move(w).take();
  codec::append_field(out, {kBlobMacField, codec::WireKind::kLengthDelimited},
                      crypto::hmac_sha256(blob_mac_key_, out));
  return out;
}

SessionBlob Cdm::unseal_blob(ByteView sealed) const {
  try {
    auto fields = codec::decode_fields(sealed);
    if (fields.empty() || fields.back().key.field_number != kBlobMacField) {
      fail(ErrorCode::kBlobCorrupt, "session blob has no integrity tag");
    }
    Bytes tag = std::get<Bytes>(fields.back().value);
    fields.pop_back();
    Bytes body = codec::encode_fields(fields);
    if (body.size() > sealed.size() || !std::equal(body.begin(), body.end(), sealed.begin()) ||
        crypto::hmac_sha256(blob_mac_key_, body) != tag) {
      fail(ErrorCode::kBlobCorrupt, "session blob integrity check failed");
    }
    FieldReader r(body);
    SessionBlob blob;
    blob.session_id = r.required_bytes(1, "session_id");
    blob.type = r.varint(2).value_or(2) == 2 ? SessionType::kPersistent : SessionType::kTemporary;
    blob.policy = protocol::decode_policy(r.bytes(3).value_or(Bytes{}));
    for (const auto& raw : r.repeated_bytes(4)) {
      FieldReader e(raw);
      blob.wallet[e.required_bytes(1, "key_id")] =
          WalletEntry{e.required_bytes(2, "key"), e.varint(3)};
    }
    blob.created_at = r.varint(5).value_or(0);
    blob.request_id = r.bytes(6).value_or(Bytes{});
    return blob;
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kBlobCorrupt) throw;
    fail(ErrorCode::kBlobCorrupt, std::string("session blob unreadable: ") + e.what());
  } catch (const std::bad_variant_access&) {
    fail(ErrorCode::kBlobCorrupt, "session blob integrity tag has the wrong kind");
  }
}

const Session& Cdm::load_session(ByteView sealed, VirtualTime now) {
  return load_session(unseal_blob(sealed), now);
}

const Session& Cdm::load_session(const SessionBlob& blob, VirtualTime now) {
  observe(now);
  auto existing = sessions_.find(blob.session_id);
  if (existing != sessions_.end() && existing->second.state != SessionState::kClosed) {
    fail(ErrorCode::kBadState, "session " + to_hex(blob.session_id) + " is already open");
  }
  Session s;
  s.session_id = blob.session_id;
  s.type = blob.type;
  s.policy = blob.policy;
  s.request_id = blob.request_id;
  s.created_at = blob.created_at;
  s.license_received_at = blob.created_at;
  for (const auto& [key_id, entry] : blob.wallet) {
    if (!expired(entry, now)) s.key_wallet[key_id] = entry;
  }
  if (s.key_wallet.empty()) {
    fail(ErrorCode::kAllKeysExpired, "every key in the stored session has expired");
  }
  s.state = SessionState::kActive;
  schedule_renewal(s, now);
  Session& stored = sessions_[blob.session_id];
  stored = std::move(s);
  return stored;
}

Bytes Cdm::decrypt_sample(ByteView session_id, ByteView key_id, ByteView iv, ByteView ciphertext) {
  Session& s = mutable_session(session_id);
  if (s.state != SessionState::kActive) {
    fail(ErrorCode::kBadState, "decrypt needs an ACTIVE session");
  }
  auto it = s.key_wallet.find(Bytes(key_id.begin(), key_id.end()));
  if (it == s.key_wallet.end()) fail(ErrorCode::kKeyNotFound, "no key " + to_hex(key_id));
  if (!s.policy->can_play) fail(ErrorCode::kPolicyForbids, "policy does not allow playback");
  if (s.recovery_lapsed || expired(it->second, clock_)) {
    fail(ErrorCode::kKeyExpired, "key " + to_hex(key_id) + " has expired");
  }
  if (!s.first_play_at) {
    s.first_play_at = clock_;
    apply_caps(s);
    if (s.policy->can_renew && s.policy->renew_with_usage) s.renewal_due = clock_;
    if (expired(it->second, clock_)) {
      fail(ErrorCode::kKeyExpired, "key " + to_hex(key_id) + " has expired");
    }
  }
  return crypto::aes_cbc_decrypt(it->second.key, iv, ciphertext, crypto::Padding::kNone);
}

}  // namespace emeforge::cdm
