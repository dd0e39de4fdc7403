#include "emeforge/testbed.hpp"

#include "emeforge/identity.hpp"
#include "emeforge/privacy.hpp"

namespace emeforge::testbed {

const crypto::RsaPrivateKey& server_signing_key() {
  static const crypto::RsaPrivateKey key = [] {
    crypto::DeterministicRandom rng(crypto::sha256(to_bytes("license-server-signing-key")));
    return crypto::RsaPrivateKey::generate(rng);
  }();
  return key;
}

ContentCatalog ContentCatalog::generate(crypto::RandomSource& rng, std::size_t count) {
  ContentCatalog c;
  while (c.key_ids.size() < count) {
    Bytes id = rng.bytes(protocol::kIdSize);
    if (c.keys.count(id)) continue;
    c.key_ids.push_back(id);
    c.keys[id] = rng.bytes(protocol::kContentKeySize);
  }
  return c;
}

server::ServerConfig make_server_config(const protocol::LicensePolicy& policy,
                                        const ContentCatalog& catalog) {
  server::ServerConfig cfg;
  cfg.provider_private_key = privacy::default_provider().private_key;
  cfg.signing_key = server_signing_key();
  cfg.policy_template = policy;
  cfg.content_keys = catalog.keys;
  cfg.trusted_identity_root = identity::trusted_root();
  return cfg;
}

World::World(std::uint64_t seed, std::size_t key_count)
    : seed_(seed), server_rng_(crypto::DeterministicRandom::from_seed(seed, "server")) {
  auto catalog_rng = stream("catalog");
  catalog_ = ContentCatalog::generate(catalog_rng, key_count);
  server_ = std::make_unique<server::LicenseServer>(
      make_server_config(protocol::LicensePolicy{}, catalog_), server_rng_);
}

crypto::DeterministicRandom World::stream(std::string_view label) const {
  return crypto::DeterministicRandom::from_seed(seed_, label);
}

}  // namespace emeforge::testbed
