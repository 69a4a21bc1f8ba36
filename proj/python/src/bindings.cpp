#include "oit/bench.hpp"
#include "oit/kernels.hpp"
#include "oit/nufft_type3.hpp"
#include "oit/pipeline.hpp"
#include "oit/verify.hpp"

#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <json.hpp>

namespace py = pybind11;
using namespace oit;

namespace {

// Recovered factors and plan for one kernel; immutable after construction.
class Transform {
public:
  Transform(const std::string& kernel, Index n, Index rEps, const std::string& scenario, const std::string& path,
            Index rank, Index oversampling, double tau, double tol, std::uint64_t seed, int threads)
      : kernel_(make_kernel(kernel, n)) {
    params_.recovery.rank = rank;
    params_.recovery.oversampling = oversampling;
    params_.recovery.tau = tau;
    params_.recovery.seed = seed;
    params_.rEps = rEps;
    params_.tol = tol;
    params_.threads = threads;
    params_.force = parse_path_choice(path);
    params_.colSplits = kernel_.colSplits;
    params_.kernelId = kernel;
    params_.scenario = parse_scenario(scenario);
    py::gil_scoped_release release;
    access_ = std::make_unique<KernelAccess>(make_access(kernel_, params_.scenario, params_.recovery));
    entries_ = std::make_unique<KernelAccess>(make_access(kernel_, Scenario::Entry, params_.recovery));
    rk_ = recover_kernel(*access_, params_.recovery);
    plan_ = plan_transform(rk_.amp, rk_.phase, params_);
  }

  VectorXcd apply(const VectorXcd& f) const {
    py::gil_scoped_release release;
    return apply_transform(plan_, f, params_.threads);
  }
  VectorXcd direct(const VectorXcd& f) const {
    py::gil_scoped_release release;
    return entries_->apply(f);
  }
  double relativeError(const VectorXcd& g, const VectorXcd& f, Index samples, std::uint64_t seed) const {
    return relative_error(g, *entries_, f, samples, seed);
  }
  py::dict factorErrors(Index probe, std::uint64_t seed) const {
    const FactorErrors e = factor_errors(*entries_, rk_.amp, rk_.phase, probe, seed);
    py::dict d;
    d["eps_K"] = e.kernel;
    d["eps_pha"] = e.phase;
    d["eps_amp"] = e.amplitude;
    return d;
  }
  Index size() const { return plan_.n; }
  std::string path() const { return path_name(plan_.path); }
  std::string reason() const { return plan_.reason; }
  std::string provenance() const { return plan_provenance_json(plan_); }
  MatrixXd phaseU() const { return rk_.phase.scaledU(); }
  MatrixXd phaseV() const { return rk_.phase.v; }
  MatrixXd ampU() const { return rk_.amp.scaledU(); }
  MatrixXd ampV() const { return rk_.amp.v; }

private:
  Kernel kernel_;
  PipelineParams params_;
  std::unique_ptr<KernelAccess> access_, entries_;
  RecoveredKernel rk_;
  TransformPlan plan_;
};

py::dict record_dict(const BenchRecord& r) {
  const auto j = nlohmann::ordered_json::parse(records_to_json({r}))[0];
  py::dict d;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const auto& v = it.value();
    if (v.is_null()) d[py::str(it.key())] = py::float_(NAN);
    else if (v.is_string()) d[py::str(it.key())] = v.get<std::string>();
    else if (v.is_number_integer()) d[py::str(it.key())] = v.get<long long>();
    else d[py::str(it.key())] = v.get<double>();
  }
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Oscillatory integral transforms: phase recovery, lifted NUFFT and butterfly paths";

  // Translators run newest first, so the base class goes first.
  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ParameterError>(m, "ParameterError", PyExc_ValueError);
  py::register_exception<PlanningError>(m, "PlanningError", PyExc_RuntimeError);

  py::class_<Transform>(m, "Transform")
      .def(py::init<const std::string&, Index, Index, const std::string&, const std::string&, Index, Index, double,
                    double, std::uint64_t, int>(),
           py::arg("kernel"), py::arg("n"), py::arg("r_eps") = 8, py::arg("scenario") = "entry",
           py::arg("path") = "auto", py::arg("rank") = 20, py::arg("oversampling") = 5, py::arg("tau") = kPi / 2,
           py::arg("tol") = 1e-12, py::arg("seed") = 0, py::arg("threads") = 1)
      .def("apply", &Transform::apply, py::arg("f"), "Fast matvec g = K f.")
      .def("direct", &Transform::direct, py::arg("f"), "Dense O(N^2) matvec for reference.")
      .def("relative_error", &Transform::relativeError, py::arg("g"), py::arg("f"), py::arg("samples") = 256,
           py::arg("seed") = 0, "Relative l2 error of g against K f over sampled rows.")
      .def("factor_errors", &Transform::factorErrors, py::arg("probe") = 256, py::arg("seed") = 0)
      .def_property_readonly("n", &Transform::size)
      .def_property_readonly("path", &Transform::path)
      .def_property_readonly("reason", &Transform::reason)
      .def_property_readonly("provenance", &Transform::provenance)
      .def_property_readonly("phase_u", &Transform::phaseU)
      .def_property_readonly("phase_v", &Transform::phaseV)
      .def_property_readonly("amp_u", &Transform::ampU)
      .def_property_readonly("amp_v", &Transform::ampV);

  m.def(
      "kernel_matrix", [](const std::string& id, Index n) { return make_kernel(id, n).dense(); }, py::arg("kernel"),
      py::arg("n"), "Dense kernel matrix.");
  m.def("known_kernel", &is_known_kernel, py::arg("kernel"));
  m.def("hankel1", &hankel1, py::arg("order"), py::arg("x"));
  m.def(
      "nufft3",
      [](const MatrixXd& sources, const MatrixXd& targets, const VectorXcd& c, double tol) {
        py::gil_scoped_release release;
        return NufftPlan(sources, targets, tol).execute(c);
      },
      py::arg("sources"), py::arg("targets"), py::arg("c"), py::arg("tol") = 1e-12,
      "out_k = sum_j c_j exp(2 pi i <t_k, s_j>) to relative tolerance tol.");
  m.def("nufft3_direct", &nufft_direct, py::arg("sources"), py::arg("targets"), py::arg("c"));
  m.def(
      "bench",
      [](const std::string& kernel, Index n, Index rEps, const std::string& path, std::uint64_t seed, int repeats) {
        BenchConfig cfg;
        cfg.kernel = kernel;
        cfg.force = parse_path_choice(path);
        cfg.seed = seed;
        cfg.repeats = repeats;
        BenchRecord r;
        {
          py::gil_scoped_release release;
          r = run_bench_case(cfg, n, rEps);
        }
        return record_dict(r);
      },
      py::arg("kernel"), py::arg("n"), py::arg("r_eps") = 8, py::arg("path") = "auto", py::arg("seed") = 0,
      py::arg("repeats") = 1, "One benchmark record with the CSV column names as keys.");
  m.def(
      "verify",
      [](const std::vector<std::string>& suites, std::uint64_t seed) {
        VerifyOptions opt;
        opt.suites = suites;
        opt.seed = seed;
        std::vector<VerifyCheck> checks;
        {
          py::gil_scoped_release release;
          checks = run_verify(opt);
        }
        py::list out;
        for (const VerifyCheck& c : checks) {
          py::dict d;
          d["suite"] = c.suite;
          d["name"] = c.name;
          d["passed"] = c.passed;
          d["value"] = c.value;
          d["bound"] = c.bound;
          out.append(d);
        }
        return out;
      },
      py::arg("suites") = std::vector<std::string>{}, py::arg("seed") = 0);
  m.def("version", &library_version);
}
