#pragma once

// Fixed simulation world: server keys, a content-key catalog, and a license
// server wired to the built-in service certificate. Shared by the CLI, the
// auditor, and the Python bindings so they all see the same keys.

#include <map>
#include <memory>
#include <vector>

#include "emeforge/crypto.hpp"
#include "emeforge/license_server.hpp"

namespace emeforge::testbed {

// Response-signing key of the bundled license server.
const crypto::RsaPrivateKey& server_signing_key();

struct ContentCatalog {
  std::vector<Bytes> key_ids;
  std::map<Bytes, Bytes> keys;

  static ContentCatalog generate(crypto::RandomSource& rng, std::size_t count);
};

server::ServerConfig make_server_config(const protocol::LicensePolicy& policy,
                                        const ContentCatalog& catalog);

// Owns its randomness so a server built from one seed is reproducible.
class World {
 public:
  explicit World(std::uint64_t seed, std::size_t key_count = 4);

  std::uint64_t seed() const { return seed_; }
  const ContentCatalog& catalog() const { return catalog_; }
  server::LicenseServer& server() { return *server_; }

  // Independent deterministic stream for a named consumer.
  crypto::DeterministicRandom stream(std::string_view label) const;

 private:
  std::uint64_t seed_;
  crypto::DeterministicRandom server_rng_;
  ContentCatalog catalog_;
  std::unique_ptr<server::LicenseServer> server_;
};

}  // namespace emeforge::testbed
