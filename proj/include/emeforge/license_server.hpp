#pragma once

// In-memory license and renewal server. Policies can be injected per request
// from a URL query string, the way integration test servers accept them.

#include <map>
#include <mutex>
#include <optional>
#include <string>

#include "emeforge/crypto.hpp"
#include "emeforge/identity.hpp"
#include "emeforge/protocol.hpp"

namespace emeforge::server {

struct ServerConfig {
  crypto::RsaPrivateKey provider_private_key;  // pairs with the service certificate
  crypto::RsaPrivateKey signing_key;           // signs responses
  protocol::LicensePolicy policy_template;
  std::map<Bytes, Bytes> content_keys;
  std::optional<Bytes> ott_field_template;
  identity::Certificate trusted_identity_root;
  // Key TTL when the policy leaves license_duration_s unset.
  std::uint64_t default_key_ttl_s = 3600;
};

class LicenseServer {
 public:
  // `rng` must outlive the server; access to it is serialized internally.
  LicenseServer(ServerConfig config, crypto::RandomSource& rng);

  const ServerConfig& config() const { return config_; }

  // `policy` overrides the template for this request only.
  protocol::SignedMessage handle_license_request(
      const protocol::SignedMessage& request, VirtualTime now,
      const std::optional<protocol::LicensePolicy>& policy = std::nullopt);
  protocol::SignedMessage handle_renewal_request(const protocol::SignedMessage& request,
                                                 VirtualTime now);

  std::size_t served_count() const;

 private:
  struct Served {
    std::vector<Bytes> key_ids;
    crypto::RsaPublicKey device_key;
    protocol::LicensePolicy policy;
  };

  identity::ClientId recover_client_id(const protocol::ClientIdPayload& payload) const;
  std::uint64_t key_ttl(const protocol::LicensePolicy& policy) const;

  ServerConfig config_;
  crypto::RandomSource& rng_;
  mutable std::mutex mu_;
  std::map<Bytes, Served> served_;
};

// "k=v&k=v" with keys named after LicensePolicy fields. Booleans accept
// true/false/1/0; durations are unsigned decimal; values may be %-encoded.
protocol::LicensePolicy parse_policy_params(std::string_view query);
std::string format_policy_params(const protocol::LicensePolicy& policy);

}  // namespace emeforge::server
