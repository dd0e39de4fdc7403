#include "emeforge/identity.hpp"

#include <map>
#include <mutex>

#include "emeforge/codec.hpp"

namespace emeforge::identity {

using codec::FieldReader;
using codec::FieldWriter;

namespace {

constexpr std::size_t kSerialSize = 16;

template <typename T, typename Fn>
T decode_or_fail(std::string_view what, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kMissingRequiredField) throw;
    fail(ErrorCode::kDecodeFailed, std::string(what) + ": " + e.what());
  }
}

std::string text_or_empty(const FieldReader& r, std::uint64_t field) {
  return r.text(field).value_or(std::string());
}

crypto::RsaPrivateKey derived_key(std::string_view label) {
  crypto::DeterministicRandom rng(crypto::sha256(to_bytes(label)));
  return crypto::RsaPrivateKey::generate(rng);
}

Bytes derived_serial(std::string_view label) {
  Bytes s = crypto::sha256(to_bytes(label));
  s.resize(kSerialSize);
  return s;
}

Certificate make_cert(Bytes serial, std::string subject, const crypto::RsaPublicKey& key,
                      std::string issuer_subject, const crypto::RsaPrivateKey& issuer_key) {
  Certificate c{std::move(serial), std::move(subject), key, std::move(issuer_subject), {}};
  c.signature = issuer_key.sign(c.signed_payload());
  return c;
}

}  // namespace

// ---- ClientInfo ----

Bytes ClientInfo::encode() const {
  FieldWriter w;
  w.text(1, architecture)
      .text(2, company_name)
      .text_if(3, device_name)
      .text(4, product_name)
      .text(5, model_name)
      .text_if(6, platform_name)
      .text_if(7, application_name)
      .text_if(8, package_cert_hash)
      .text_if(9, build_info)
      .text(10, cdm_version)
      .varint_if(11, security_patch_level)
      .text_if(12, oem_build_info);
  return std::move(w).take();
}

ClientInfo ClientInfo::decode(ByteView bytes) {
  return decode_or_fail<ClientInfo>("client info", [&] {
    FieldReader r(bytes);
    ClientInfo info;
    info.architecture = text_or_empty(r, 1);
    info.company_name = text_or_empty(r, 2);
    info.device_name = r.text(3);
    info.product_name = text_or_empty(r, 4);
    info.model_name = text_or_empty(r, 5);
    info.platform_name = r.text(6);
    info.application_name = r.text(7);
    info.package_cert_hash = r.text(8);
    info.build_info = r.text(9);
    info.cdm_version = text_or_empty(r, 10);
    info.security_patch_level = r.varint(11).value_or(0);
    info.oem_build_info = r.text(12);
    return info;
  });
}

bool is_desktop_profile(const ClientInfo& info) {
  return info.platform_name.has_value() && !info.device_name && !info.build_info &&
         !info.application_name && !info.package_cert_hash;
}

bool is_mobile_profile(const ClientInfo& info) {
  return !info.platform_name.has_value() && info.build_info.has_value();
}

// ---- keys and certificates ----

Bytes encode_public_key(const crypto::RsaPublicKey& key) {
  FieldWriter w;
  w.bytes(1, key.modulus()).bytes(2, key.exponent());
  return std::move(w).take();
}

crypto::RsaPublicKey decode_public_key(ByteView bytes) {
  FieldReader r(bytes);
  Bytes n = r.required_bytes(1, "modulus");
  Bytes e = r.required_bytes(2, "exponent");
  try {
    return crypto::RsaPublicKey(std::move(n), std::move(e));
  } catch (const std::exception& ex) {
    fail(ErrorCode::kDecodeFailed, std::string("unusable public key: ") + ex.what());
  }
}

Bytes Certificate::signed_payload() const {
  FieldWriter w;
  w.bytes(1, serial).text(2, subject).bytes(3, encode_public_key(public_key));
  return std::move(w).take();
}

bool Certificate::signed_by(const crypto::RsaPublicKey& issuer_key) const {
  return issuer_key.verify(signed_payload(), signature);
}

Bytes Certificate::encode() const {
  FieldWriter w;
  w.bytes(1, serial)
      .text(2, subject)
      .bytes(3, encode_public_key(public_key))
      .text(4, issuer_subject)
      .bytes(5, signature);
  return std::move(w).take();
}

Certificate Certificate::decode(ByteView bytes) {
  return decode_or_fail<Certificate>("certificate", [&] {
    FieldReader r(bytes);
    Certificate c;
    c.serial = r.required_bytes(1, "serial");
    c.subject = r.required_text(2, "subject");
    c.public_key = decode_public_key(r.required_bytes(3, "public_key"));
    c.issuer_subject = r.required_text(4, "issuer_subject");
    c.signature = r.required_bytes(5, "signature");
    return c;
  });
}

Bytes CertificateChain::encode() const {
  FieldWriter w;
  w.bytes(1, device_cert.encode()).bytes(2, intermediate_cert.encode()).bytes(3, root_cert.encode());
  return std::move(w).take();
}

CertificateChain CertificateChain::decode(ByteView bytes) {
  FieldReader r(bytes);
  return CertificateChain{Certificate::decode(r.required_bytes(1, "device_cert")),
                          Certificate::decode(r.required_bytes(2, "intermediate_cert")),
                          Certificate::decode(r.required_bytes(3, "root_cert"))};
}

Bytes ClientId::encode() const {
  FieldWriter w;
  w.bytes(1, info.encode()).bytes(2, chain.encode());
  return std::move(w).take();
}

ClientId ClientId::decode(ByteView bytes) {
  return decode_or_fail<ClientId>("client id", [&] {
    FieldReader r(bytes);
    return ClientId{ClientInfo::decode(r.required_bytes(1, "client_info")),
                    CertificateChain::decode(r.required_bytes(2, "certificate_chain"))};
  });
}

DeviceKeybox DeviceKeybox::generate(crypto::RandomSource& rng) {
  DeviceKeybox kb;
  rng.fill(kb.device_id);
  rng.fill(kb.seed);
  return kb;
}

// ---- provisioning authority ----

ProvisioningAuthority::ProvisioningAuthority(std::string_view root_label,
                                             std::string_view intermediate_label)
    : root_key_(derived_key(std::string("pki-root:") + std::string(root_label))),
      intermediate_key_(derived_key(std::string("pki-intermediate:") +
                                    std::string(intermediate_label))) {
  std::string root_subject = std::string(root_label);
  std::string intermediate_subject = std::string(intermediate_label);
  root_ = make_cert(derived_serial(std::string("root-serial:") + root_subject), root_subject,
                    root_key_.public_key(), root_subject, root_key_);
  intermediate_ =
      make_cert(derived_serial(std::string("intermediate-serial:") + intermediate_subject),
                intermediate_subject, intermediate_key_.public_key(), root_subject, root_key_);
}

const ProvisioningAuthority& ProvisioningAuthority::standard() {
  static const ProvisioningAuthority authority("EME Forge Root CA", "EME Forge Provisioning Server");
  return authority;
}

Certificate ProvisioningAuthority::issue_device_cert(Bytes serial, std::string subject,
                                                     const crypto::RsaPublicKey& key) const {
  return make_cert(std::move(serial), std::move(subject), key, intermediate_.subject,
                   intermediate_key_);
}

CertificateChain ProvisioningAuthority::chain_for(Certificate device_cert) const {
  return CertificateChain{std::move(device_cert), intermediate_, root_};
}

const Certificate& trusted_root() { return ProvisioningAuthority::standard().root(); }

bool verify_chain(const CertificateChain& chain, const Certificate& trusted) {
  const auto& dev = chain.device_cert;
  const auto& mid = chain.intermediate_cert;
  const auto& root = chain.root_cert;
  if (!(root == trusted)) return false;
  if (root.issuer_subject != root.subject || mid.issuer_subject != root.subject ||
      dev.issuer_subject != mid.subject) {
    return false;
  }
  return root.signed_by(root.public_key) && mid.signed_by(root.public_key) &&
         dev.signed_by(mid.public_key);
}

// ---- provisioning ----

ProvisionedIdentity provision_mobile(const DeviceKeybox& keybox, std::string_view app_id,
                                     const ClientInfo& info) {
  if (!is_mobile_profile(info)) {
    fail(ErrorCode::kProfileMismatch, "provision_mobile requires a mobile Client Info");
  }
  Bytes material(keybox.device_id.begin(), keybox.device_id.end());
  material.insert(material.end(), app_id.begin(), app_id.end());
  Bytes k = crypto::hmac_sha256(keybox.seed, material);

  Bytes serial = crypto::hmac_sha256(k, to_bytes("serial"));
  serial.resize(kSerialSize);
  crypto::DeterministicRandom key_stream(crypto::hmac_sha256(k, to_bytes("device-key")));
  auto key = crypto::RsaPrivateKey::generate(key_stream);

  const auto& authority = ProvisioningAuthority::standard();
  auto cert = authority.issue_device_cert(serial, "android-device/" + std::string(app_id),
                                          key.public_key());
  return {ClientId{info, authority.chain_for(std::move(cert))}, std::move(key)};
}

ProvisionedIdentity provision_desktop(std::string_view cdm_version, const ClientInfo& info) {
  if (!is_desktop_profile(info)) {
    fail(ErrorCode::kProfileMismatch, "provision_desktop requires a desktop Client Info");
  }
  if (info.cdm_version != cdm_version) {
    fail(ErrorCode::kProfileMismatch, "Client Info reports a different CDM version");
  }

  struct Baked {
    CertificateChain chain;
    crypto::RsaPrivateKey key;
  };
  static std::mutex mu;
  static std::map<std::string, Baked, std::less<>> baked;

  std::lock_guard lock(mu);
  auto it = baked.find(cdm_version);
  if (it == baked.end()) {
    static const Bytes build_secret = crypto::sha256(to_bytes("desktop-cdm-build-secret"));
    Bytes k = crypto::hmac_sha256(build_secret, to_bytes("desktop-cdm:" + std::string(cdm_version)));
    Bytes serial = crypto::hmac_sha256(k, to_bytes("serial"));
    serial.resize(kSerialSize);
    crypto::DeterministicRandom key_stream(crypto::hmac_sha256(k, to_bytes("device-key")));
    auto key = crypto::RsaPrivateKey::generate(key_stream);
    const auto& authority = ProvisioningAuthority::standard();
    auto cert = authority.issue_device_cert(serial, "desktop-cdm/" + std::string(cdm_version),
                                            key.public_key());
    it = baked.emplace(std::string(cdm_version), Baked{authority.chain_for(std::move(cert)), key})
             .first;
  }
  return {ClientId{info, it->second.chain}, it->second.key};
}

ClientInfo pixel7_client_info() {
  ClientInfo info;
  info.architecture = "arm64-v8a";
  info.company_name = "Google";
  info.device_name = "panther";
  info.product_name = "panther";
  info.model_name = "Pixel 7";
  info.application_name = "org.mozilla.firefox";
  info.package_cert_hash = "p4tiRsXQfpJu0Bd7bQ4Xo8+kdSg2n2wPYXv1yJ3xmwQ=";
  info.build_info = "google/panther/panther:13/TQ2A.230305.008/8940162:user/release-keys";
  info.cdm_version = "17.0.0";
  info.security_patch_level = 0;
  info.oem_build_info = "OEMCrypto Level3 Code May 20 2022 21:36:54";
  return info;
}

}  // namespace emeforge::identity
