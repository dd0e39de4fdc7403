#pragma once

// Service certificates, Client ID envelopes, and content-key wrapping.

#include <string>
#include <vector>

#include "emeforge/crypto.hpp"
#include "emeforge/identity.hpp"
#include "emeforge/protocol.hpp"

namespace emeforge::privacy {

struct ServerCertificate {
  std::string provider_id;
  crypto::RsaPublicKey public_key;
  Bytes root_signature;

  Bytes signed_payload() const;
  Bytes encode() const;
  static ServerCertificate decode(ByteView bytes);

  friend bool operator==(const ServerCertificate&, const ServerCertificate&) = default;
};

// The verification key compiled into every CDM. Separate from the identity root.
const crypto::RsaPublicKey& root_privacy_public_key();

// Signs a provider key with the embedded root; stands in for the vendor's
// certificate issuance.
ServerCertificate issue_server_certificate(std::string provider_id,
                                           const crypto::RsaPublicKey& provider_key);

struct ProviderCredentials {
  ServerCertificate certificate;
  crypto::RsaPrivateKey private_key;
};

// The built-in certificate shipped with the CDM, with its private half so the
// bundled license server can decrypt envelopes addressed to it.
const ProviderCredentials& default_provider();
inline const ServerCertificate& default_server_certificate() {
  return default_provider().certificate;
}

bool verify_server_certificate(const ServerCertificate& cert,
                               const crypto::RsaPublicKey& root_public_key);

protocol::PrivacyEnvelope encrypt_client_id(const identity::ClientId& cid,
                                            const ServerCertificate& cert,
                                            crypto::RandomSource& rng);
identity::ClientId decrypt_client_id(const protocol::PrivacyEnvelope& env,
                                     const crypto::RsaPrivateKey& provider_key);

std::vector<protocol::WrappedKey> wrap_content_keys(
    const std::vector<protocol::ContentKeyEntry>& keys, const crypto::RsaPublicKey& device_key,
    crypto::RandomSource& rng);
std::vector<protocol::ContentKeyEntry> unwrap_content_keys(
    const std::vector<protocol::WrappedKey>& wrapped, const crypto::RsaPrivateKey& device_key);

}  // namespace emeforge::privacy
