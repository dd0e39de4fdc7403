#pragma once

// License acquisition and renewal messages, the license policy record, and
// the signed envelope that carries them.
//
// Field numbers (all nested messages length-delimited):
//   request_id 1, content_key_ids 2 (repeated), clear client id 3,
//   encrypted client id 4, keys 5, policy 6, updated_ttls 7, ott_field 9.
// Signed envelope: kind 1, body 2, signature 3.

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "emeforge/common.hpp"
#include "emeforge/crypto.hpp"
#include "emeforge/identity.hpp"

namespace emeforge::protocol {

inline constexpr std::size_t kIdSize = 16;
inline constexpr std::size_t kContentKeySize = 16;

// Zero durations and false flags mean "unset" and are omitted on the wire.
struct LicensePolicy {
  bool can_play = false;                             // 1
  bool can_persist = false;                          // 2
  bool can_renew = false;                            // 3
  std::uint64_t rental_duration_s = 0;               // 4
  std::uint64_t playback_duration_s = 0;             // 5
  std::uint64_t license_duration_s = 0;              // 6
  std::uint64_t renewal_recovery_duration_s = 0;     // 7
  std::string renewal_server_url;                    // 8
  std::uint64_t renewal_delay_s = 0;                 // 9
  std::uint64_t renewal_retry_interval_s = 0;        // 10
  bool renew_with_usage = false;                     // 11
  bool always_include_client_id = false;             // 12
  bool soft_enforce_playback_duration = false;       // 14
  bool soft_enforce_rental_duration = false;         // 15
  std::uint64_t watermarking_control = 0;            // 16

  friend bool operator==(const LicensePolicy&, const LicensePolicy&) = default;
};

Bytes encode_policy(const LicensePolicy& policy);
LicensePolicy decode_policy(ByteView bytes);

struct ContentKeyEntry {
  Bytes key_id;
  Bytes key;
  std::uint64_t ttl_s = 0;

  friend bool operator==(const ContentKeyEntry&, const ContentKeyEntry&) = default;
};

// A content key encrypted to the requesting device's public key.
struct WrappedKey {
  Bytes key_id;
  Bytes wrapped;
  std::uint64_t ttl_s = 0;

  friend bool operator==(const WrappedKey&, const WrappedKey&) = default;
};

// Client ID encrypted under a per-request AES key, itself wrapped to the
// service certificate.
struct PrivacyEnvelope {
  Bytes wrapped_key;
  Bytes iv;
  Bytes ciphertext;

  Bytes encode() const;
  static PrivacyEnvelope decode(ByteView bytes);

  friend bool operator==(const PrivacyEnvelope&, const PrivacyEnvelope&) = default;
};

using ClientIdPayload = std::variant<identity::ClientId, PrivacyEnvelope>;

inline bool is_clear(const ClientIdPayload& p) {
  return std::holds_alternative<identity::ClientId>(p);
}

struct LicenseRequest {
  Bytes request_id;
  std::vector<Bytes> content_key_ids;
  ClientIdPayload client_id;

  friend bool operator==(const LicenseRequest&, const LicenseRequest&) = default;
};

struct LicenseResponse {
  Bytes request_id;
  std::vector<WrappedKey> keys;
  LicensePolicy policy;
  std::optional<Bytes> ott_field;

  friend bool operator==(const LicenseResponse&, const LicenseResponse&) = default;
};

class RenewalRequest {
 public:
  RenewalRequest() = default;
  // Throws kInvariantViolation unless a client id is present exactly when
  // policy.always_include_client_id is set.
  RenewalRequest(Bytes request_id, LicensePolicy policy, std::optional<ClientIdPayload> client_id);

  const Bytes& request_id() const { return request_id_; }
  const LicensePolicy& policy() const { return policy_; }
  const std::optional<ClientIdPayload>& client_id() const { return client_id_; }

  friend bool operator==(const RenewalRequest&, const RenewalRequest&) = default;

 private:
  Bytes request_id_;
  LicensePolicy policy_;
  std::optional<ClientIdPayload> client_id_;
};

struct KeyTtl {
  Bytes key_id;
  std::uint64_t ttl_s = 0;

  friend bool operator==(const KeyTtl&, const KeyTtl&) = default;
};

struct RenewalResponse {
  Bytes request_id;
  std::vector<KeyTtl> updated_ttls;
  LicensePolicy policy;
  std::optional<Bytes> ott_field;

  friend bool operator==(const RenewalResponse&, const RenewalResponse&) = default;
};

Bytes encode_message(const LicenseRequest& m);
Bytes encode_message(const LicenseResponse& m);
Bytes encode_message(const RenewalRequest& m);
Bytes encode_message(const RenewalResponse& m);

LicenseRequest decode_license_request(ByteView bytes);
LicenseResponse decode_license_response(ByteView bytes);
RenewalRequest decode_renewal_request(ByteView bytes);
RenewalResponse decode_renewal_response(ByteView bytes);

enum class MessageKind : std::uint8_t {
  kLicenseRequest = 1,
  kLicenseResponse = 2,
  kRenewalRequest = 3,
  kRenewalResponse = 4,
  kServiceCertificate = 5,
};

std::string_view to_string(MessageKind kind);
// Accepts the canonical upper-case names; throws kUnknownKind.
MessageKind parse_message_kind(std::string_view name);
MessageKind message_kind_from_code(std::uint64_t code);

struct SignedMessage {
  MessageKind kind = MessageKind::kLicenseRequest;
  Bytes body;
  Bytes signature;

  Bytes encode() const;
  static SignedMessage decode(ByteView bytes);

  friend bool operator==(const SignedMessage&, const SignedMessage&) = default;
};

SignedMessage sign_message(MessageKind kind, Bytes body, const crypto::RsaPrivateKey& key);
bool verify_message(const SignedMessage& message, const crypto::RsaPublicKey& key);

}  // namespace emeforge::protocol
