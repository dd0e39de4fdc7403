#include "emeforge/privacy.hpp"

#include "emeforge/codec.hpp"

namespace emeforge::privacy {

using codec::FieldReader;
using codec::FieldWriter;

namespace {

const crypto::RsaPrivateKey& root_privacy_key() {
  static const crypto::RsaPrivateKey key = [] {
    crypto::DeterministicRandom rng(crypto::sha256(to_bytes("privacy-root-key")));
    return crypto::RsaPrivateKey::generate(rng);
  }();
  return key;
}

}  // namespace

Bytes ServerCertificate::signed_payload() const {
  FieldWriter w;
  w.text(1, provider_id).bytes(2, identity::encode_public_key(public_key));
  return std::move(w).take();
}

Bytes ServerCertificate::encode() const {
  FieldWriter w;
  w.text(1, provider_id)
      .bytes(2, identity::encode_public_key(public_key))
      .bytes(3, root_signature);
  return std::move(w).take();
}

ServerCertificate ServerCertificate::decode(ByteView bytes) {
  FieldReader r(bytes);
  return {r.required_text(1, "provider_id"),
          identity::decode_public_key(r.required_bytes(2, "public_key")),
          r.required_bytes(3, "root_signature")};
}

const crypto::RsaPublicKey& root_privacy_public_key() { return root_privacy_key().public_key(); }

ServerCertificate issue_server_certificate(std::string provider_id,
                                           const crypto::RsaPublicKey& provider_key) {
  ServerCertificate cert{std::move(provider_id), provider_key, {}};
  cert.root_signature = root_privacy_key().sign(cert.signed_payload());
  return cert;
}

const ProviderCredentials& default_provider() {
  static const ProviderCredentials creds = [] {
    crypto::DeterministicRandom rng(crypto::sha256(to_bytes("provider-key:license.widevine.com")));
    auto key = crypto::RsaPrivateKey::generate(rng);
    return ProviderCredentials{issue_server_certificate("license.widevine.com", key.public_key()),
                               key};
  }();
  return creds;
}

bool verify_server_certificate(const ServerCertificate& cert,
                               const crypto::RsaPublicKey& root_public_key) {
  return root_public_key.verify(cert.signed_payload(), cert.root_signature);
}

protocol::PrivacyEnvelope encrypt_client_id(const identity::ClientId& cid,
                                            const ServerCertificate& cert,
                                            crypto::RandomSource& rng) {
  if (!verify_server_certificate(cert, root_privacy_public_key())) {
    fail(ErrorCode::kCertificateUnverified,
         "service certificate for '" + cert.provider_id + "' is not signed by the root");
  }
  Bytes privacy_key = rng.bytes(crypto::kAesKeySize);
  Bytes iv = rng.bytes(crypto::kAesBlockSize);
  Bytes ciphertext = crypto::aes_cbc_encrypt(privacy_key, iv, cid.encode(), crypto::Padding::kPkcs7);
  return {cert.public_key.encrypt_oaep(privacy_key, rng), std::move(iv), std::move(ciphertext)};
}

identity::ClientId decrypt_client_id(const protocol::PrivacyEnvelope& env,
                                     const crypto::RsaPrivateKey& provider_key) {
  Bytes privacy_key = provider_key.decrypt_oaep(env.wrapped_key);
  if (privacy_key.size() != crypto::kAesKeySize || env.iv.size() != crypto::kAesBlockSize) {
    fail(ErrorCode::kDecryptFailed, "envelope key or iv has the wrong size");
  }
  Bytes plain = crypto::aes_cbc_decrypt(privacy_key, env.iv, env.ciphertext, crypto::Padding::kPkcs7);
  try {
    return identity::ClientId::decode(plain);
  } catch (const Error& e) {
    fail(ErrorCode::kDecodeFailed, std::string("envelope plaintext is not a Client ID: ") + e.what());
  }
}

std::vector<protocol::WrappedKey> wrap_content_keys(
    const std::vector<protocol::ContentKeyEntry>& keys, const crypto::RsaPublicKey& device_key,
    crypto::RandomSource& rng) {
  std::vector<protocol::WrappedKey> out;
  out.reserve(keys.size());
  for (const auto& k : keys) {
    out.push_back({k.key_id, device_key.encrypt_oaep(k.key, rng), k.ttl_s});
  }
  return out;
}

std::vector<protocol::ContentKeyEntry> unwrap_content_keys(
    const std::vector<protocol::WrappedKey>& wrapped, const crypto::RsaPrivateKey& device_key) {
  std::vector<protocol::ContentKeyEntry> out;
  out.reserve(wrapped.size());
  for (const auto& w : wrapped) {
    Bytes key = device_key.decrypt_oaep(w.wrapped);
    if (key.size() != protocol::kContentKeySize) {
      fail(ErrorCode::kDecryptFailed, "unwrapped content key has the wrong size");
    }
    out.push_back({w.key_id, std::move(key), w.ttl_s});
  }
  return out;
}

}  // namespace emeforge::privacy
