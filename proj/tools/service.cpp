#include "service.hpp"

#include <httplib.h>

#include <chrono>
#include <ctime>
#include <json.hpp>

#include "emeforge/audit.hpp"
#include "emeforge/license_server.hpp"
#include "emeforge/privacy.hpp"

namespace emeforge::cli {

using nlohmann::json;

namespace {

constexpr const char* kOctets = "application/octet-stream";
constexpr const char* kJson = "application/json";

std::string utc_now() {
  auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string query_of(const httplib::Request& req) {
  auto q = req.target.find('?');
  return q == std::string::npos ? std::string() : req.target.substr(q + 1);
}

VirtualTime virtual_time(const httplib::Request& req) {
  if (!req.has_header("X-Virtual-Time")) return 0;
  const std::string v = req.get_header_value("X-Virtual-Time");
  if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos) {
    fail(ErrorCode::kBadValue, "X-Virtual-Time must be unsigned seconds");
  }
  return std::stoull(v);
}

void error_response(httplib::Response& res, int status, const std::string& message) {
  res.status = status;
  res.set_content(json{{"error", message}}.dump(), kJson);
}

}  // namespace

Service::Service(std::uint64_t seed, std::optional<protocol::LicensePolicy> default_policy)
    : world_(seed), default_policy_(std::move(default_policy)) {}

void Service::mount(httplib::Server& http) {
  http.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                            {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                            {"Access-Control-Allow-Headers", "Content-Type, X-Virtual-Time"}});
  http.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

  auto message_route = [this](bool renewal) {
    return [this, renewal](const httplib::Request& req, httplib::Response& res) {
      try {
        auto request = protocol::SignedMessage::decode(to_bytes(req.body));
        const VirtualTime now = virtual_time(req);
        protocol::SignedMessage reply;
        if (renewal) {
          reply = world_.server().handle_renewal_request(request, now);
        } else {
          auto query = query_of(req);
          auto policy = query.empty() ? default_policy_ : server::parse_policy_params(query);
          reply = world_.server().handle_license_request(request, now, policy);
        }
        res.set_content(to_text(reply.encode()), kOctets);
      } catch (const Error& e) {
        error_response(res, 400, e.what());
      }
    };
  };
  http.Post("/license", message_route(false));
  http.Post("/renew", message_route(true));

  http.Post("/ingest", [this](const httplib::Request& req, httplib::Response& res) {
    try {
      auto result = store_.ingest(ingest::IngestRecord::from_json(req.body, utc_now()));
      res.set_content(result.summary_json, kJson);
    } catch (const Error& e) {
      error_response(res, 400, e.what());
    }
  });

  http.Get(R"(/report/(.+))", [this](const httplib::Request& req, httplib::Response& res) {
    auto report = store_.report(req.matches[1]);
    if (!report) return error_response(res, 404, "unknown source");
    res.set_content(audit::render_json(*report), kJson);
  });

  // What a probe needs to build a request: the service certificate and the
  // content key ids the server knows.
  http.Get("/info", [this](const httplib::Request&, httplib::Response& res) {
    json ids = json::array();
    for (const auto& id : world_.catalog().key_ids) ids.push_back(to_hex(id));
    res.set_content(
        json{{"key_ids", ids},
             {"service_certificate_b64", base64_encode(privacy::default_server_certificate().encode())}}
            .dump(),
        kJson);
  });
}

std::pair<std::string, int> parse_listen(std::string_view addr) {
  auto colon = addr.rfind(':');
  if (colon == std::string_view::npos) fail(ErrorCode::kBadValue, "listen address must be HOST:PORT");
  std::string host(addr.substr(0, colon));
  std::string port(addr.substr(colon + 1));
  if (port.empty() || port.size() > 5 || port.find_first_not_of("0123456789") != std::string::npos ||
      std::stoi(port) > 65535) {
    fail(ErrorCode::kBadValue, "bad port '" + port + "'");
  }
  return {host.empty() ? "127.0.0.1" : host, std::stoi(port)};
}

}  // namespace emeforge::cli
