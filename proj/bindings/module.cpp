#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "xbofsim/config.hpp"
#include "xbofsim/descriptor.hpp"
#include "xbofsim/harvest.hpp"
#include "xbofsim/metrics.hpp"
#include "xbofsim/mrc.hpp"
#include "xbofsim/simulation.hpp"
#include "xbofsim/workload.hpp"

namespace py = pybind11;
using namespace xbofsim;

namespace {

// Runs one scenario from JSON text (or a preset name) and returns the
// report.json payload as a string.
std::string run_scenario(const std::string& config_json, std::uint64_t seed,
                         const std::string& variant) {
  ScenarioConfig cfg = config_json.empty() || config_json[0] != '{'
                           ? preset(config_json)
                           : config_from_json_text(config_json);
  cfg.seed = seed;
  if (!variant.empty()) cfg.variant = variant_from_string(variant);
  Simulation sim(std::move(cfg));
  sim.run();
  return sim.report_json();
}

py::bytes encode_descriptor(bool valid, int type, int borrower_id,
                            std::uint32_t amount, std::uint64_t info) {
  IdleResourceDescriptor d;
  d.valid = valid;
  d.type = static_cast<ResourceType>(type);
  d.borrower_id = static_cast<std::uint8_t>(borrower_id);
  d.amount = amount;
  d.info = info;
  const auto bytes = d.encode();
  return py::bytes(reinterpret_cast<const char*>(bytes.data()), bytes.size());
}

py::dict decode_descriptor(const py::bytes& raw) {
  const std::string buf = raw;
  const auto d = IdleResourceDescriptor::decode(
      {reinterpret_cast<const std::uint8_t*>(buf.data()), buf.size()});
  py::dict out;
  out["valid"] = d.valid;
  out["type"] = static_cast<int>(d.type);
  out["borrower_id"] = d.borrower_id;
  out["amount"] = d.amount;
  out["info"] = d.info;
  return out;
}

}  // namespace

PYBIND11_MODULE(_xbofsim, m) {
  m.doc() = "CXL JBOF simulator with inter-SSD compute-resource sharing";

  m.def("run_scenario", &run_scenario, py::arg("config"), py::arg("seed") = 1,
        py::arg("variant") = "",
        "Run one scenario (preset name or JSON text); returns report JSON.");

  m.def("preset_names", &preset_names);
  m.def("preset_json",
        [](const std::string& name) { return config_to_json_text(preset(name)); });

  m.def("bom_cost",
        [](double capacity_tb, const std::string& variant) {
          return bom_cost(capacity_tb, variant_from_string(variant));
        },
        py::arg("capacity_tb"), py::arg("variant"));

  m.def("redirect_ratio",
        [](std::uint32_t u_borrow_bp, std::uint32_t u_lend_bp, double w_borrow,
           double sum_w_borrow, double w_shadow, double sum_w_lend) {
          const auto r = compute_redirect_ratio(u_borrow_bp, u_lend_bp, w_borrow,
                                                sum_w_borrow, w_shadow, sum_w_lend);
          return py::make_tuple(r.ratio, r.probability);
        },
        py::arg("u_borrow_bp"), py::arg("u_lend_bp"), py::arg("w_borrow_sq") = 2.0,
        py::arg("sum_w_borrow") = 2.0, py::arg("w_shadow_sq") = 1.0,
        py::arg("sum_w_lend") = 3.0);

  m.def("encode_descriptor", &encode_descriptor, py::arg("valid"),
        py::arg("type"), py::arg("borrower_id"), py::arg("amount"),
        py::arg("info"));
  m.def("decode_descriptor", &decode_descriptor, py::arg("raw"));

  py::class_<ShardsEstimator>(m, "ShardsEstimator")
      .def(py::init<double>(), py::arg("rate"))
      .def("access", &ShardsEstimator::access)
      .def("sample_count", &ShardsEstimator::sample_count)
      .def("miss_ratio_curve", [](const ShardsEstimator& est, std::size_t max_size) {
        return est.estimate(max_size).miss_ratio;
      });

  m.attr("__version__") = "0.1.0";
}
