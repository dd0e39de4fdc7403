#include "emeforge/license_server.hpp"

#include <cctype>
#include <charconv>
#include <functional>

#include "emeforge/privacy.hpp"

namespace emeforge::server {

using protocol::LicensePolicy;
using protocol::MessageKind;
using protocol::SignedMessage;

LicenseServer::LicenseServer(ServerConfig config, crypto::RandomSource& rng)
    : config_(std::move(config)), rng_(rng) {}

std::size_t LicenseServer::served_count() const {
  std::lock_guard lock(mu_);
  return served_.size();
}

identity::ClientId LicenseServer::recover_client_id(const protocol::ClientIdPayload& payload) const {
  if (const auto* cid = std::get_if<identity::ClientId>(&payload)) return *cid;
  return privacy::decrypt_client_id(std::get<protocol::PrivacyEnvelope>(payload),
                                    config_.provider_private_key);
}

std::uint64_t LicenseServer::key_ttl(const LicensePolicy& policy) const {
  return policy.license_duration_s > 0 ? policy.license_duration_s : config_.default_key_ttl_s;
}

SignedMessage LicenseServer::handle_license_request(const SignedMessage& request, VirtualTime,
                                                    const std::optional<LicensePolicy>& policy) {
  if (request.kind != MessageKind::kLicenseRequest) {
    fail(ErrorCode::kBadValue, "expected LICENSE_REQUEST, got " +
                                   std::string(protocol::to_string(request.kind)));
  }
  auto req = protocol::decode_license_request(request.body);
  identity::ClientId cid = recover_client_id(req.client_id);
  if (!identity::verify_chain(cid.chain, config_.trusted_identity_root)) {
    fail(ErrorCode::kChainInvalid, "client certificate chain does not verify");
  }
  const auto& device_key = cid.chain.device_cert.public_key;
  if (!protocol::verify_message(request, device_key)) {
    fail(ErrorCode::kSignatureInvalid, "license request signature does not verify");
  }

  const LicensePolicy& effective = policy ? *policy : config_.policy_template;
  std::vector<protocol::ContentKeyEntry> keys;
  for (const auto& id : req.content_key_ids) {
    auto it = config_.content_keys.find(id);
    if (it == config_.content_keys.end()) {
      fail(ErrorCode::kUnknownKeyId, "unknown content key id " + to_hex(id));
    }
    keys.push_back({id, it->second, key_ttl(effective)});
  }

  std::lock_guard lock(mu_);
  protocol::LicenseResponse resp{req.request_id, privacy::wrap_content_keys(keys, device_key, rng_),
                                 effective, config_.ott_field_template};
  served_[req.request_id] = Served{req.content_key_ids, device_key, effective};
  return protocol::sign_message(MessageKind::kLicenseResponse, protocol::encode_message(resp),
                                config_.signing_key);
}

SignedMessage LicenseServer::handle_renewal_request(const SignedMessage& request, VirtualTime) {
  if (request.kind != MessageKind::kRenewalRequest) {
    fail(ErrorCode::kBadValue, "expected RENEWAL_REQUEST, got " +
                                   std::string(protocol::to_string(request.kind)));
  }
  auto rr = protocol::decode_renewal_request(request.body);

  Served served;
  {
    std::lock_guard lock(mu_);
    auto it = served_.find(rr.request_id());
    if (it == served_.end()) {
      fail(ErrorCode::kUnknownRequestId, "request " + to_hex(rr.request_id()) + " was never served");
    }
    served = it->second;
  }
  if (!protocol::verify_message(request, served.device_key)) {
    fail(ErrorCode::kSignatureInvalid, "renewal request signature does not verify");
  }
  if (served.policy.always_include_client_id) {
    if (!rr.client_id()) {
      fail(ErrorCode::kPolicyViolated, "policy requires a client id in renewal requests");
    }
    identity::ClientId cid = recover_client_id(*rr.client_id());
    if (!(cid.chain.device_cert.public_key == served.device_key)) {
      fail(ErrorCode::kPolicyViolated, "renewal client id belongs to a different device");
    }
  }

  protocol::RenewalResponse resp{rr.request_id(), {}, served.policy, config_.ott_field_template};
  for (const auto& id : served.key_ids) resp.updated_ttls.push_back({id, key_ttl(served.policy)});
  std::lock_guard lock(mu_);
  return protocol::sign_message(MessageKind::kRenewalResponse, protocol::encode_message(resp),
                                config_.signing_key);
}

// ---- policy query strings ----

namespace {

struct PolicyParam {
  std::string_view name;
  enum Type { kBool, kUint, kText } type;
  std::function<void(LicensePolicy&, std::uint64_t, const std::string&)> set;
  std::function<std::string(const LicensePolicy&)> get;
};

#define EMEFORGE_BOOL(field)                                                          \
  PolicyParam {                                                                       \
    #field, PolicyParam::kBool,                                                       \
        [](LicensePolicy& p, std::uint64_t v, const std::string&) { p.field = v != 0; }, \
        [](const LicensePolicy& p) { return std::string(p.field ? "true" : ""); }     \
  }
#define EMEFORGE_UINT(field)                                                           \
  PolicyParam {                                                                        \
    #field, PolicyParam::kUint,                                                        \
        [](LicensePolicy& p, std::uint64_t v, const std::string&) { p.field = v; },    \
        [](const LicensePolicy& p) { return p.field ? std::to_string(p.field) : ""; }  \
  }

const std::vector<PolicyParam>& params() {
  static const std::vector<PolicyParam> table = {
      EMEFORGE_BOOL(can_play),
      EMEFORGE_BOOL(can_persist),
      EMEFORGE_BOOL(can_renew),
      EMEFORGE_UINT(rental_duration_s),
      EMEFORGE_UINT(playback_duration_s),
      EMEFORGE_UINT(license_duration_s),
      EMEFORGE_UINT(renewal_recovery_duration_s),
      PolicyParam{"renewal_server_url", PolicyParam::kText,
                  [](LicensePolicy& p, std::uint64_t, const std::string& s) {
                    p.renewal_server_url = s;
                  },
                  [](const LicensePolicy& p) { return p.renewal_server_url; }},
      EMEFORGE_UINT(renewal_delay_s),
      EMEFORGE_UINT(renewal_retry_interval_s),
      EMEFORGE_BOOL(renew_with_usage),
      EMEFORGE_BOOL(always_include_client_id),
      EMEFORGE_BOOL(soft_enforce_playback_duration),
      EMEFORGE_BOOL(soft_enforce_rental_duration),
      EMEFORGE_UINT(watermarking_control),
  };
  return table;
}

#undef EMEFORGE_BOOL
#undef EMEFORGE_UINT

std::string percent_decode(std::string_view in) {
  std::string out;
  for (std::size_t i = 0; i < in.size(); ++i) {
    if (in[i] == '+') {
      out.push_back(' ');
    } else if (in[i] == '%') {
      int v = 0;
      if (i + 2 >= in.size() ||
          std::from_chars(in.data() + i + 1, in.data() + i + 3, v, 16).ptr != in.data() + i + 3) {
        fail(ErrorCode::kBadValue, "bad percent escape in '" + std::string(in) + "'");
      }
      out.push_back(static_cast<char>(v));
      i += 2;
    } else {
      out.push_back(in[i]);
    }
  }
  return out;
}

std::string percent_encode(std::string_view in) {
  static const char* hex = "0123456789ABCDEF";
  std::string out;
  for (unsigned char c : in) {
    if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~' || c == '/' || c == ':') {
      out.push_back(static_cast<char>(c));
    } else {
      out.push_back('%');
      out.push_back(hex[c >> 4]);
      out.push_back(hex[c & 15]);
    }
  }
  return out;
}

}  // namespace

LicensePolicy parse_policy_params(std::string_view query) {
  if (!query.empty() && query.front() == '?') query.remove_prefix(1);
  LicensePolicy policy;
  while (!query.empty()) {
    auto amp = query.find('&');
    std::string_view pair = query.substr(0, amp);
    query = amp == std::string_view::npos ? std::string_view{} : query.substr(amp + 1);
    if (pair.empty()) continue;

    auto eq = pair.find('=');
    if (eq == std::string_view::npos) {
      fail(ErrorCode::kBadValue, "policy parameter '" + std::string(pair) + "' has no value");
    }
    std::string key = percent_decode(pair.substr(0, eq));
    std::string value = percent_decode(pair.substr(eq + 1));

    const PolicyParam* param = nullptr;
    for (const auto& p : params()) {
      if (p.name == key) param = &p;
    }
    if (!param) fail(ErrorCode::kUnknownPolicyKey, "unknown policy key '" + key + "'");

    std::uint64_t number = 0;
    switch (param->type) {
      case PolicyParam::kBool:
        if (value == "true" || value == "1") {
          number = 1;
        } else if (value != "false" && value != "0") {
          fail(ErrorCode::kBadValue, key + " expects true/false, got '" + value + "'");
        }
        break;
      case PolicyParam::kUint: {
        auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), number);
        if (value.empty() || ec != std::errc() || ptr != value.data() + value.size()) {
          fail(ErrorCode::kBadValue, key + " expects an unsigned integer, got '" + value + "'");
        }
        break;
      }
      case PolicyParam::kText: break;
    }
    param->set(policy, number, value);
  }
  return policy;
}

std::string format_policy_params(const LicensePolicy& policy) {
  std::string out;
  for (const auto& p : params()) {
    std::string v = p.get(policy);
    if (v.empty()) continue;
    if (!out.empty()) out.push_back('&');
    out += std::string(p.name) + "=" + percent_encode(v);
  }
  return out;
}

}  // namespace emeforge::server
