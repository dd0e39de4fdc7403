#pragma once

// HTTP front end: license/renewal endpoints over the bundled server and the
// probe ingest store.

#include <optional>
#include <string>

#include "emeforge/ingest.hpp"
#include "emeforge/testbed.hpp"

namespace httplib {
class Server;
}

namespace emeforge::cli {

class Service {
 public:
  Service(std::uint64_t seed, std::optional<protocol::LicensePolicy> default_policy);

  // Registers every route on `http`. The service must outlive it.
  void mount(httplib::Server& http);

  testbed::World& world() { return world_; }
  ingest::IngestStore& store() { return store_; }

 private:
  testbed::World world_;
  std::optional<protocol::LicensePolicy> default_policy_;
  ingest::IngestStore store_;
};

// "host:port" or ":port". Throws kBadValue.
std::pair<std::string, int> parse_listen(std::string_view addr);

}  // namespace emeforge::cli
