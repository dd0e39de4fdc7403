#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "emeforge/audit.hpp"
#include "emeforge/ingest.hpp"
#include "emeforge/license_server.hpp"
#include "emeforge/testbed.hpp"

namespace py = pybind11;
using namespace emeforge;

namespace {

py::bytes to_py(const Bytes& b) { return py::bytes(reinterpret_cast<const char*>(b.data()), b.size()); }

Bytes from_py(const py::bytes& b) { return to_bytes(std::string(b)); }

py::dict info_dict(const identity::ClientInfo& i) {
  py::dict d;
  d["architecture"] = i.architecture;
  d["company_name"] = i.company_name;
  d["device_name"] = i.device_name;
  d["product_name"] = i.product_name;
  d["model_name"] = i.model_name;
  d["platform_name"] = i.platform_name;
  d["application_name"] = i.application_name;
  d["package_cert_hash"] = i.package_cert_hash;
  d["build_info"] = i.build_info;
  d["cdm_version"] = i.cdm_version;
  d["security_patch_level"] = i.security_patch_level;
  d["oem_build_info"] = i.oem_build_info;
  return d;
}

identity::ClientInfo info_of(const std::string& profile, std::uint64_t seed) {
  return ua::provision_for(ua::find_preset(profile), seed).client_id.info;
}

}  // namespace

PYBIND11_MODULE(_emeforge, m) {
  m.doc() = "Native core of the emeforge simulator and auditor";

  static py::handle error = py::exception<Error>(m, "EmeForgeError", PyExc_ValueError).release();
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = error(e.what());
      exc.attr("code") = std::string(to_string(e.code()));
      PyErr_SetObject(error.ptr(), exc.ptr());
    }
  });

  // Policies travel as query strings, the format the license server accepts.
  m.def("encode_policy", [](const std::string& query) {
    return to_py(protocol::encode_policy(server::parse_policy_params(query)));
  });
  m.def("decode_policy", [](const py::bytes& wire) {
    return server::format_policy_params(protocol::decode_policy(from_py(wire)));
  });
  m.def("audit_policy", [] { return server::format_policy_params(audit::audit_policy()); });

  m.def("preset_names", [] {
    std::vector<std::string> out;
    for (const auto& p : ua::presets()) out.push_back(p.name);
    return out;
  });
  m.def("matrix_preset_names", &ua::matrix_preset_names);
  m.def("preset", [](const std::string& name) {
    const auto& p = ua::find_preset(name);
    py::dict d;
    d["name"] = p.name;
    d["browser"] = p.browser;
    d["eme_supported"] = p.eme_supported;
    d["platform"] = std::string(cdm::to_string(p.platform));
    d["os"] = p.os;
    d["architecture"] = p.architecture;
    d["permission_model"] = std::string(ua::to_string(p.permission_model));
    d["persistent_sessions_supported"] = p.persistent_sessions_supported;
    d["user_agent"] = p.user_agent;
    return d;
  });

  m.def("client_info", [](const std::string& profile, std::uint64_t seed) {
    return info_dict(info_of(profile, seed));
  }, py::arg("profile"), py::arg("seed") = 1);
  m.def("augmented_ua", [](const std::string& profile, std::uint64_t seed) {
    return audit::build_augmented_ua(info_of(profile, seed));
  }, py::arg("profile"), py::arg("seed") = 1);
  m.def("render_user_agent", [](const std::string& profile, std::uint64_t seed) {
    return audit::render_user_agent(info_of(profile, seed));
  }, py::arg("profile"), py::arg("seed") = 1);
  m.def("ua_conflict", [](const std::string& claimed, const std::string& profile, std::uint64_t seed)
            -> std::optional<std::string> {
    auto f = audit::detect_ua_conflict(claimed, info_of(profile, seed));
    if (!f) return std::nullopt;
    return f->description;
  }, py::arg("claimed_ua"), py::arg("profile"), py::arg("seed") = 1);

  m.def("simulate", [](const std::string& profile, const std::optional<std::string>& policy,
                       bool persistent, std::uint64_t seed) {
    testbed::World world(seed);
    auto p = policy ? server::parse_policy_params(*policy) : audit::audit_policy();
    return audit::simulate(ua::find_preset(profile), world, p,
                           persistent ? cdm::SessionType::kPersistent : cdm::SessionType::kTemporary, seed)
        .to_jsonl();
  }, py::arg("profile"), py::arg("policy") = py::none(), py::arg("persistent") = false,
        py::arg("seed") = 1);

  m.def("audit_trace_json", [](const std::string& jsonl, bool lenient,
                               const std::optional<std::string>& claimed_ua) {
    audit::TraceAuditOptions o;
    o.lenient = lenient;
    o.claimed_ua = claimed_ua;
    return audit::render_json(audit::audit_trace(ua::FlowTrace::from_jsonl(jsonl), "trace", o));
  }, py::arg("jsonl"), py::arg("lenient") = false, py::arg("claimed_ua") = py::none());
  m.def("audit_profile_json", [](const std::string& profile, std::uint64_t seed) {
    py::gil_scoped_release release;
    return audit::render_json(audit::audit_profile(ua::find_preset(profile), seed));
  }, py::arg("profile"), py::arg("seed") = 1);

  m.def("parse_nesn", [](const std::string& nesn) {
    auto r = audit::parse_nesn(nesn);
    py::dict d;
    d["category"] = r.info.category;
    d["oemcrypto_version"] = r.info.oemcrypto_version;
    d["manufacturer"] = r.info.manufacturer;
    d["model"] = r.info.model;
    d["random_suffix"] = r.info.random_suffix;
    d["severity"] = r.finding ? py::object(py::str(std::string(audit::to_string(r.finding->severity))))
                              : py::object(py::none());
    return d;
  });

  py::class_<ingest::IngestStore>(m, "IngestStore")
      .def(py::init<>())
      .def("ingest_json", [](ingest::IngestStore& s, const std::string& record, const std::string& received_at) {
        return s.ingest(ingest::IngestRecord::from_json(record, received_at)).summary_json;
      }, py::arg("record"), py::arg("received_at") = "")
      .def("report_json", [](const ingest::IngestStore& s, const std::string& source)
               -> std::optional<std::string> {
        auto r = s.report(source);
        if (!r) return std::nullopt;
        return audit::render_json(*r);
      })
      .def("sources", &ingest::IngestStore::sources);
}
