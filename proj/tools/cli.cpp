#include "cli.hpp"

#include <httplib.h>
#include <pthread.h>
#include <signal.h>

#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <iterator>
#include <json.hpp>
#include <sstream>
#include <thread>

#include "emeforge/audit.hpp"
#include "emeforge/license_server.hpp"
#include "emeforge/privacy.hpp"
#include "emeforge/testbed.hpp"
#include "service.hpp"

namespace emeforge::cli {
namespace {

using protocol::MessageKind;

struct Options {
  std::uint64_t seed = 1;

  std::string input = "-";
  std::string kind;
  bool base64 = false;

  std::string profile;
  std::string policy;
  bool persistent = false;
  std::string out_path;

  std::string trace_path;
  std::string format = "json";
  bool lenient = false;
  std::string claimed_ua;

  std::string listen = "127.0.0.1:8080";
};

std::string read_all(std::istream& s) {
  return {std::istreambuf_iterator<char>(s), std::istreambuf_iterator<char>()};
}

std::string read_input(const std::string& path, std::istream& in) {
  if (path == "-") return read_all(in);
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(ErrorCode::kNotFound, "cannot open '" + path + "'");
  return read_all(f);
}

// ---- decode ----

void line(std::ostream& out, std::string_view indent, std::string_view name,
          const std::optional<std::string>& value) {
  if (value && !value->empty()) out << indent << name << ": " << *value << '\n';
}

void dump_client_id(std::ostream& out, const protocol::ClientIdPayload& payload) {
  if (const auto* env = std::get_if<protocol::PrivacyEnvelope>(&payload)) {
    out << "client_id: ENCRYPTED (envelope wrapped_key=" << env->wrapped_key.size()
        << "B iv=" << to_hex(env->iv) << " ciphertext=" << env->ciphertext.size() << "B)\n";
    return;
  }
  const auto& cid = std::get<identity::ClientId>(payload);
  const auto& i = cid.info;
  auto fp = audit::extract_fingerprint(cid);
  out << "client_id: CLEAR\n";
  out << "  serial: " << fp.serial_hex << '\n';
  out << "  class: " << audit::to_string(fp.cls) << '\n';
  line(out, "  ", "architecture", i.architecture);
  line(out, "  ", "company_name", i.company_name);
  line(out, "  ", "device_name", i.device_name);
  line(out, "  ", "product_name", i.product_name);
  line(out, "  ", "model_name", i.model_name);
  line(out, "  ", "platform_name", i.platform_name);
  line(out, "  ", "application_name", i.application_name);
  line(out, "  ", "package_cert_hash", i.package_cert_hash);
  line(out, "  ", "build_info", i.build_info);
  line(out, "  ", "cdm_version", i.cdm_version);
  if (i.security_patch_level) out << "  security_patch_level: " << i.security_patch_level << '\n';
  line(out, "  ", "oem_build_info", i.oem_build_info);
  out << "  chain: " << cid.chain.device_cert.subject << " <- " << cid.chain.intermediate_cert.subject
      << " <- " << cid.chain.root_cert.subject << '\n';
  out << "  augmented_ua: " << audit::build_augmented_ua(i) << '\n';
}

void dump_ott(std::ostream& out, const std::optional<Bytes>& ott) {
  if (!ott) return;
  const std::string text = to_text(*ott);
  try {
    auto nesn = audit::parse_nesn(text);
    out << "ott_field: NESN " << text << '\n';
    out << "  category: " << nesn.info.category << '\n';
    out << "  suffix_length: " << nesn.info.random_suffix.size() << '\n';
    if (nesn.finding) out << "  finding: " << nesn.finding->description << '\n';
  } catch (const Error&) {
    out << "ott_field: " << to_hex(*ott) << '\n';
  }
}

void dump_policy(std::ostream& out, const protocol::LicensePolicy& p) {
  out << "policy: " << server::format_policy_params(p) << '\n';
}

void dump_body(std::ostream& out, MessageKind kind, const Bytes& body) {
  switch (kind) {
    case MessageKind::kLicenseRequest: {
      auto m = protocol::decode_license_request(body);
      out << "request_id: " << to_hex(m.request_id) << '\n';
      for (const auto& id : m.content_key_ids) out << "content_key_id: " << to_hex(id) << '\n';
      dump_client_id(out, m.client_id);
      break;
    }
    case MessageKind::kLicenseResponse: {
      auto m = protocol::decode_license_response(body);
      out << "request_id: " << to_hex(m.request_id) << '\n';
      for (const auto& k : m.keys) {
        out << "key: " << to_hex(k.key_id) << " wrapped=" << k.wrapped.size() << "B ttl=" << k.ttl_s
            << '\n';
      }
      dump_policy(out, m.policy);
      dump_ott(out, m.ott_field);
      break;
    }
    case MessageKind::kRenewalRequest: {
      auto m = protocol::decode_renewal_request(body);
      out << "request_id: " << to_hex(m.request_id()) << '\n';
      dump_policy(out, m.policy());
      if (m.client_id()) {
        dump_client_id(out, *m.client_id());
      } else {
        out << "client_id: ABSENT\n";
      }
      break;
    }
    case MessageKind::kRenewalResponse: {
      auto m = protocol::decode_renewal_response(body);
      out << "request_id: " << to_hex(m.request_id) << '\n';
      for (const auto& t : m.updated_ttls) out << "ttl: " << to_hex(t.key_id) << " " << t.ttl_s << '\n';
      dump_policy(out, m.policy);
      dump_ott(out, m.ott_field);
      break;
    }
    case MessageKind::kServiceCertificate: {
      auto c = privacy::ServerCertificate::decode(body);
      out << "provider_id: " << c.provider_id << '\n';
      out << "root_signature: "
          << (privacy::verify_server_certificate(c, privacy::root_privacy_public_key()) ? "valid"
                                                                                         : "INVALID")
          << '\n';
      break;
    }
  }
}

int cmd_decode(const Options& o, std::istream& in, std::ostream& out) {
  std::string raw = read_input(o.input, in);
  Bytes bytes = o.base64 ? base64_decode(raw) : to_bytes(raw);
  std::optional<MessageKind> expected;
  if (!o.kind.empty()) expected = protocol::parse_message_kind(o.kind);

  std::optional<protocol::SignedMessage> signed_message;
  try {
    signed_message = protocol::SignedMessage::decode(bytes);
    if (expected && signed_message->kind != *expected) signed_message.reset();
  } catch (const Error&) {
    if (!expected) throw;
  }

  if (signed_message) {
    out << "message: " << protocol::to_string(signed_message->kind) << '\n';
    out << "signature: " << signed_message->signature.size() << " bytes";
    if (signed_message->kind == MessageKind::kLicenseResponse ||
        signed_message->kind == MessageKind::kRenewalResponse) {
      bool ok = protocol::verify_message(*signed_message, testbed::server_signing_key().public_key());
      out << (ok ? " (valid, bundled server key)" : " (not from the bundled server)");
    }
    out << '\n';
    dump_body(out, signed_message->kind, signed_message->body);
  } else {
    out << "message: " << protocol::to_string(*expected) << " (unsigned body)\n";
    dump_body(out, *expected, bytes);
  }
  return kOk;
}

// ---- simulate / audit / fingerprint ----

void write_output(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) fail(ErrorCode::kNotFound, "cannot write '" + path + "'");
  f << text;
}

int cmd_simulate(const Options& o, std::ostream& out, std::ostream& err) {
  const auto& profile = ua::find_preset(o.profile);
  auto policy = o.policy.empty() ? audit::audit_policy() : server::parse_policy_params(o.policy);
  testbed::World world(o.seed);
  auto trace = audit::simulate(profile, world, policy,
                               o.persistent ? cdm::SessionType::kPersistent : cdm::SessionType::kTemporary,
                               o.seed);
  write_output(o.out_path, trace.to_jsonl(), out);
  if (trace.failed()) err << "flow ended with error: " << to_text(trace.records.back().body) << '\n';
  return kOk;
}

audit::AuditReport trace_report(const Options& o, std::istream& in) {
  auto trace = ua::FlowTrace::from_jsonl(read_input(o.trace_path, in));
  audit::TraceAuditOptions options;
  options.lenient = o.lenient;
  if (!o.claimed_ua.empty()) options.claimed_ua = o.claimed_ua;
  return audit::audit_trace(trace, o.trace_path == "-" ? "stdin" : o.trace_path, options);
}

int cmd_audit(const Options& o, std::istream& in, std::ostream& out) {
  audit::AuditReport report = o.profile.empty()
                                  ? trace_report(o, in)
                                  : audit::audit_profile(ua::find_preset(o.profile), o.seed);
  out << (o.format == "text" ? audit::render_text(report) : audit::render_json(report) + "\n");
  return report.any_noncompliant() ? kNoncompliant : kOk;
}

int cmd_fingerprint(const Options& o, std::istream& in, std::ostream& out, std::ostream& err) {
  Options lenient = o;
  lenient.lenient = true;
  auto report = trace_report(lenient, in);
  if (!report.fingerprint) {
    err << "no clear Client ID observed\n";
    return kNoClearClientId;
  }
  if (o.format == "json") {
    nlohmann::json j = {{"serial_hex", report.fingerprint->serial_hex},
                        {"class", audit::to_string(report.fingerprint->cls)},
                        {"augmented_ua", report.augmented_ua.value_or("")}};
    out << j.dump() << '\n';
  } else {
    out << "serial: " << report.fingerprint->serial_hex << '\n'
        << "class: " << audit::to_string(report.fingerprint->cls) << '\n'
        << "augmented_ua: " << report.augmented_ua.value_or("") << '\n';
  }
  return kOk;
}

int cmd_profiles(std::ostream& out) {
  for (const auto& p : ua::presets()) {
    out << p.name << '\t' << p.os << '\t' << (p.eme_supported ? cdm::to_string(p.platform) : "NO_EME")
        << '\n';
  }
  return kOk;
}

// ---- serve ----

int cmd_serve(const Options& o, std::ostream& out, std::ostream& err) {
  auto [host, port] = parse_listen(o.listen);
  std::optional<protocol::LicensePolicy> policy;
  if (!o.policy.empty()) policy = server::parse_policy_params(o.policy);

  // Signals are taken synchronously below; block them before the server
  // threads inherit the mask.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  sigset_t previous;
  pthread_sigmask(SIG_BLOCK, &signals, &previous);

  Service service(o.seed, policy);
  httplib::Server http;
  service.mount(http);
  int bound = port == 0 ? http.bind_to_any_port(host) : (http.bind_to_port(host, port) ? port : -1);
  if (bound < 0) {
    pthread_sigmask(SIG_SETMASK, &previous, nullptr);
    err << "cannot listen on " << o.listen << '\n';
    return kUsage;
  }
  out << "listening on http://" << host << ':' << bound << std::endl;

  std::thread worker([&http] { http.listen_after_bind(); });
  int received = 0;
  sigwait(&signals, &received);
  http.stop();
  worker.join();
  pthread_sigmask(SIG_SETMASK, &previous, nullptr);
  out << "stopped (signal " << received << ")" << std::endl;
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out,
        std::ostream& err) {
  Options o;
  CLI::App app{"Widevine-style EME protocol simulator and privacy auditor", "emeforge"};
  app.require_subcommand(1);
  app.add_option("--seed", o.seed, "Seed for all simulated randomness")->envname("EME_FORGE_SEED");

  auto* decode = app.add_subcommand("decode", "Dump a signed message or a bare message body");
  decode->add_option("file", o.input, "Input file, '-' for stdin");
  decode->add_option("--kind", o.kind, "Expected message kind, e.g. LICENSE_REQUEST");
  decode->add_flag("--base64", o.base64, "Input is base-64 text");

  auto* simulate = app.add_subcommand("simulate", "Run one license flow and write its trace");
  simulate->add_option("--profile", o.profile, "Browser preset")->required();
  simulate->add_option("--policy", o.policy, "License policy as a query string");
  simulate->add_flag("--persistent", o.persistent, "Request a persistent session");
  simulate->add_option("--out", o.out_path, "Trace file (JSON lines), default stdout");

  auto* audit_cmd = app.add_subcommand("audit", "Audit a trace or a browser preset");
  auto* trace_opt = audit_cmd->add_option("--trace", o.trace_path, "Trace file, '-' for stdin");
  auto* profile_opt = audit_cmd->add_option("--profile", o.profile, "Browser preset");
  trace_opt->excludes(profile_opt);
  audit_cmd->add_option("--format", o.format)->check(CLI::IsMember({"json", "text"}));
  audit_cmd->add_flag("--lenient", o.lenient, "Skip undecodable records");
  audit_cmd->add_option("--claimed-ua", o.claimed_ua, "User-Agent header to check");

  auto* fingerprint = app.add_subcommand("fingerprint", "Certificate serial and augmented UA");
  fingerprint->add_option("--trace", o.trace_path, "Trace file, '-' for stdin")->required();
  fingerprint->add_option("--format", o.format)->check(CLI::IsMember({"json", "text"}))->default_str("text");

  auto* serve = app.add_subcommand("serve", "License server and probe ingest over HTTP");
  serve->add_option("--listen", o.listen, "HOST:PORT, port 0 picks a free one");
  serve->add_option("--policy", o.policy, "Default license policy as a query string");

  auto* profiles = app.add_subcommand("profiles", "List browser presets");

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
    if (*audit_cmd && o.trace_path.empty() && o.profile.empty()) {
      throw CLI::RequiredError("--trace or --profile");
    }
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }
  if (*fingerprint && fingerprint->get_option("--format")->count() == 0) o.format = "text";

  try {
    if (*decode) return cmd_decode(o, in, out);
    if (*simulate) return cmd_simulate(o, out, err);
    if (*audit_cmd) return cmd_audit(o, in, out);
    if (*fingerprint) return cmd_fingerprint(o, in, out, err);
    if (*serve) return cmd_serve(o, out, err);
    if (*profiles) return cmd_profiles(out);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kEmeUnsupported) {
      err << e.what() << '\n';
      return kEmeUnsupported;
    }
    err << "error: " << e.what() << '\n';
    return kUsage;
  }
  return kUsage;
}

}  // namespace emeforge::cli
