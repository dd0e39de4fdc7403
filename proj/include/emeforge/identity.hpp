#pragma once

// Client ID model: device metadata plus a three-link certificate chain
// (device -> provisioning intermediate -> root).
//
// Mobile identities are provisioned per (keybox, app) and are a pure function
// of those inputs. Desktop identities are baked into the CDM build, so every
// desktop with the same CDM version shares one chain and one private key.

#include <array>
#include <optional>
#include <string>

#include "emeforge/common.hpp"
#include "emeforge/crypto.hpp"

namespace emeforge::identity {

struct ClientInfo {
  std::string architecture;
  std::string company_name;
  std::optional<std::string> device_name;
  std::string product_name;
  std::string model_name;
  std::optional<std::string> platform_name;
  std::optional<std::string> application_name;
  std::optional<std::string> package_cert_hash;
  std::optional<std::string> build_info;
  std::string cdm_version;
  std::uint64_t security_patch_level = 0;
  std::optional<std::string> oem_build_info;

  Bytes encode() const;
  static ClientInfo decode(ByteView bytes);

  friend bool operator==(const ClientInfo&, const ClientInfo&) = default;
};

bool is_desktop_profile(const ClientInfo& info);
bool is_mobile_profile(const ClientInfo& info);

Bytes encode_public_key(const crypto::RsaPublicKey& key);
crypto::RsaPublicKey decode_public_key(ByteView bytes);

struct Certificate {
  Bytes serial;  // 16 bytes
  std::string subject;
  crypto::RsaPublicKey public_key;
  std::string issuer_subject;
  Bytes signature;

  // The bytes the issuer signs: serial, subject and public key.
  Bytes signed_payload() const;
  bool signed_by(const crypto::RsaPublicKey& issuer_key) const;

  Bytes encode() const;
  static Certificate decode(ByteView bytes);

  friend bool operator==(const Certificate&, const Certificate&) = default;
};

struct CertificateChain {
  Certificate device_cert;
  Certificate intermediate_cert;
  Certificate root_cert;

  Bytes encode() const;
  static CertificateChain decode(ByteView bytes);

  friend bool operator==(const CertificateChain&, const CertificateChain&) = default;
};

struct ClientId {
  ClientInfo info;
  CertificateChain chain;

  Bytes encode() const;
  static ClientId decode(ByteView bytes);

  friend bool operator==(const ClientId&, const ClientId&) = default;
};

struct DeviceKeybox {
  std::array<std::uint8_t, 32> device_id{};
  std::array<std::uint8_t, 32> seed{};

  static DeviceKeybox generate(crypto::RandomSource& rng);
};

struct ProvisionedIdentity {
  ClientId client_id;
  crypto::RsaPrivateKey private_key;
};

// Root and intermediate keys of the simulated provisioning PKI. Keys are
// derived from fixed labels, so every process sees the same authority.
class ProvisioningAuthority {
 public:
  static const ProvisioningAuthority& standard();

  // Builds an authority from arbitrary labels; used to construct rogue roots.
  ProvisioningAuthority(std::string_view root_label, std::string_view intermediate_label);

  const Certificate& root() const { return root_; }
  const Certificate& intermediate() const { return intermediate_; }

  Certificate issue_device_cert(Bytes serial, std::string subject,
                                const crypto::RsaPublicKey& key) const;
  CertificateChain chain_for(Certificate device_cert) const;

 private:
  crypto::RsaPrivateKey root_key_;
  crypto::RsaPrivateKey intermediate_key_;
  Certificate root_;
  Certificate intermediate_;
};

const Certificate& trusted_root();

ProvisionedIdentity provision_mobile(const DeviceKeybox& keybox, std::string_view app_id,
                                     const ClientInfo& info);
ProvisionedIdentity provision_desktop(std::string_view cdm_version, const ClientInfo& info);

bool verify_chain(const CertificateChain& chain, const Certificate& trusted_root);

// Reference Client Info from a Pixel 7 running a Firefox-family browser.
ClientInfo pixel7_client_info();

}  // namespace emeforge::identity
