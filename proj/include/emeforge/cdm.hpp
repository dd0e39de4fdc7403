#pragma once

// Content Decryption Module: sessions, license/renewal message generation,
// response processing, and persistent-session blobs. Time is virtual and
// always supplied by the caller; the CDM remembers the latest value it saw.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "emeforge/crypto.hpp"
#include "emeforge/identity.hpp"
#include "emeforge/privacy.hpp"
#include "emeforge/protocol.hpp"

namespace emeforge::cdm {

enum class Platform { kDesktopVmp, kDesktopNonVmp, kMobile };
enum class SessionType { kTemporary, kPersistent };
enum class SessionState { kCreated, kPending, kActive, kClosed };

std::string_view to_string(Platform p);
std::string_view to_string(SessionType t);
std::string_view to_string(SessionState s);

struct CdmConfig {
  Platform platform = Platform::kMobile;
  // Mobile only. Desktop platforms derive it from VMP.
  bool privacy_mode_enabled = false;
  // On VMP desktops, renewal-request Client IDs go out in the clear.
  bool vmp_renewal_privacy_gap = true;
  std::optional<privacy::ServerCertificate> server_certificate;
  identity::ClientId client_id;
  crypto::RsaPrivateKey device_private_key;
  // Verifies license and renewal responses.
  crypto::RsaPublicKey license_server_key;
};

struct WalletEntry {
  Bytes key;
  std::optional<VirtualTime> expiry;  // nullopt: no expiry

  friend bool operator==(const WalletEntry&, const WalletEntry&) = default;
};

struct Session {
  Bytes session_id;
  SessionType type = SessionType::kTemporary;
  SessionState state = SessionState::kCreated;
  std::map<Bytes, WalletEntry> key_wallet;
  std::optional<protocol::LicensePolicy> policy;
  std::optional<Bytes> request_id;
  std::optional<VirtualTime> renewal_due;

  VirtualTime created_at = 0;
  std::optional<VirtualTime> license_received_at;
  std::optional<VirtualTime> first_play_at;
  // Set when the first unanswered renewal request went out.
  std::optional<VirtualTime> renewal_pending_since;
  bool recovery_lapsed = false;

  std::string id_hex() const { return to_hex(session_id); }
};

struct SessionBlob {
  Bytes session_id;
  SessionType type = SessionType::kPersistent;
  protocol::LicensePolicy policy;
  std::map<Bytes, WalletEntry> wallet;
  VirtualTime created_at = 0;
  Bytes request_id;

  friend bool operator==(const SessionBlob&, const SessionBlob&) = default;
};

struct OutgoingMessage {
  Bytes session_id;
  protocol::SignedMessage message;
};

class Cdm {
 public:
  // `rng` must outlive the CDM. Throws kCertificateUnverified when the
  // configured server certificate does not verify.
  Cdm(CdmConfig config, crypto::RandomSource& rng);

  Platform platform() const { return config_.platform; }
  const CdmConfig& config() const { return config_; }
  bool license_privacy() const;
  bool renewal_privacy() const;
  VirtualTime clock() const { return clock_; }

  void set_server_certificate(const privacy::ServerCertificate& cert);
  void set_privacy_mode(bool enabled);

  const Session& create_session(SessionType type, VirtualTime now = 0);
  const Session& session(ByteView session_id) const;
  std::vector<Bytes> session_ids() const;

  protocol::SignedMessage generate_request(ByteView session_id, const std::vector<Bytes>& key_ids);
  void update(ByteView session_id, const protocol::SignedMessage& response, VirtualTime now);
  std::vector<OutgoingMessage> tick(VirtualTime now);
  std::optional<SessionBlob> close_session(ByteView session_id);

  // Serialized blob with an integrity tag bound to this device.
  Bytes seal_blob(const SessionBlob& blob) const;
  SessionBlob unseal_blob(ByteView sealed) const;
  const Session& load_session(const SessionBlob& blob, VirtualTime now);
  const Session& load_session(ByteView sealed, VirtualTime now);

  // AES-CBC without padding, using the wallet key. Uses the CDM clock.
  Bytes decrypt_sample(ByteView session_id, ByteView key_id, ByteView iv, ByteView ciphertext);

 private:
  Session& mutable_session(ByteView session_id);
  void observe(VirtualTime now);
  void schedule_renewal(Session& s, VirtualTime now);
  std::optional<VirtualTime> key_expiry(const Session& s, std::optional<VirtualTime> ttl_expiry) const;
  void apply_caps(Session& s);
  protocol::ClientIdPayload client_id_payload(bool encrypted);
  void handle_license_response(Session& s, const protocol::SignedMessage& m, VirtualTime now);
  void handle_renewal_response(Session& s, const protocol::SignedMessage& m, VirtualTime now);

  CdmConfig config_;
  crypto::RandomSource& rng_;
  Bytes blob_mac_key_;
  VirtualTime clock_ = 0;
  std::map<Bytes, Session> sessions_;
};

}  // namespace emeforge::cdm
