#include "oit/bench.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <map>
#include <random>
#include <sstream>

namespace oit {

namespace {

using Clock = std::chrono::steady_clock;

template <class F>
double median_seconds(int repeats, F&& f) {
  std::vector<double> t;
  for (int k = 0; k < std::max(repeats, 1); ++k) {
    const auto t0 = Clock::now();
    f();
    t.push_back(std::chrono::duration<double>(Clock::now() - t0).count());
  }
  std::sort(t.begin(), t.end());
  return t[t.size() / 2];
}

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& s) {
  if (s == "nan" || s.empty()) return NAN;
  return std::stod(s);
}

VectorXcd bench_input(Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d;
  VectorXcd f(n);
  for (Index i = 0; i < n; ++i) f(i) = cd(d(rng), d(rng));
  return f;
}

// Seeds of the probe and input streams, after the pipeline's own streams.
std::uint64_t input_seed(std::uint64_t seed) { return seed + 3; }
std::uint64_t error_seed(std::uint64_t seed) { return seed + 4; }
std::uint64_t probe_seed(std::uint64_t seed) { return seed + 5; }

constexpr Index kDirectMax = 16384;

}  // namespace

std::string library_version() { return "1.0.0"; }

bool operator==(const BenchRecord& a, const BenchRecord& b) {
  auto same = [](double x, double y) { return (std::isnan(x) && std::isnan(y)) || x == y; };
  return a.kernel == b.kernel && a.n == b.n && a.rEps == b.rEps && a.scenario == b.scenario &&
         a.seed == b.seed && a.path == b.path && same(a.epsB, b.epsB) && same(a.epsN, b.epsN) &&
         same(a.epsK, b.epsK) && same(a.epsPha, b.epsPha) && same(a.epsAmp, b.epsAmp) &&
         same(a.tRec, b.tRec) && same(a.tFac, b.tFac) && same(a.tApp, b.tApp) && same(a.tD, b.tD) &&
         same(a.tDec, b.tDec);
}

const std::vector<std::string>& bench_columns() {
  static const std::vector<std::string> cols{"kernel", "N",     "r_eps",   "scenario", "seed",  "path",
                                             "eps_b",  "eps_n", "eps_K",   "eps_pha",  "eps_amp",
                                             "T_rec",  "T_fac", "T_app",   "T_d",      "T_dec"};
  return cols;
}

PipelineParams pipeline_params(const BenchConfig& cfg, const Kernel& k, Index rEps) {
  PipelineParams p;
  p.recovery.rank = cfg.rank;
  p.recovery.oversampling = cfg.oversampling;
  p.recovery.tau = cfg.tau;
  p.recovery.seed = cfg.seed;
  p.rEps = rEps;
  p.eps = 1e-12;
  p.tol = cfg.tol;
  p.leaf = cfg.leaf;
  p.threads = cfg.threads;
  p.force = cfg.force;
  p.colSplits = k.colSplits;
  p.kernelId = k.id;
  p.scenario = cfg.scenario;
  return p;
}

BenchRecord run_bench_case(const BenchConfig& cfg, Index n, Index rEps) {
  SyntheticParams sp;
  sp.seed = cfg.seed;
  const Kernel kernel = make_kernel(cfg.kernel, n, sp);
  const PipelineParams params = pipeline_params(cfg, kernel, rEps);
  const KernelAccess access = make_access(kernel, cfg.scenario, params.recovery);
  const KernelAccess entries = make_access(kernel, Scenario::Entry, params.recovery);

  BenchRecord rec;
  rec.kernel = cfg.kernel;
  rec.n = n;
  rec.rEps = rEps;
  rec.scenario = scenario_name(cfg.scenario);
  rec.seed = cfg.seed;

  RecoveredKernel rk;
  rec.tRec = median_seconds(cfg.repeats, [&] { rk = recover_kernel(access, params.recovery); });
  const FactorErrors fe = factor_errors(entries, rk.amp, rk.phase, 256, probe_seed(cfg.seed));
  rec.epsK = fe.kernel;
  rec.epsPha = fe.phase;
  rec.epsAmp = fe.amplitude;

  std::shared_ptr<const NufftDecision> decision;
  rec.tDec = median_seconds(cfg.repeats, [&] { decision = select_nufft(rk.amp, rk.phase, params); });
  if (cfg.force == PathChoice::Nufft && !decision)
    throw PlanningError("NUFFT path forced but decide_nufft returned y = 0 at r = 1 and r = 2");

  TransformPlan plan;
  rec.tFac = median_seconds(cfg.repeats, [&] { plan = build_plan(rk.amp, rk.phase, params, decision); });
  rec.path = path_name(plan.path);
  rec.provenance = plan_provenance_json(plan);

  const VectorXcd f = bench_input(n, input_seed(cfg.seed));
  VectorXcd g;
  rec.tApp = median_seconds(cfg.repeats, [&] { g = apply_transform(plan, f, cfg.threads); });
  const double err = relative_error(g, entries, f, 256, error_seed(cfg.seed));
  (plan.path == PathKind::Butterfly ? rec.epsB : rec.epsN) = err;

  if (n <= kDirectMax) {
    rec.tD = median_seconds(cfg.repeats, [&] { (void)entries.apply(f); });
  } else {
    const IndexList rows = error_rows(n, 256, error_seed(cfg.seed));
    rec.tD = median_seconds(cfg.repeats, [&] { (void)entries.applyRows(rows, f); }) *
             static_cast<double>(n) / static_cast<double>(rows.size());
  }
  return rec;
}

std::optional<double> reference_tolerance(const std::string& kernel, Index n, Index rEps) {
  static const std::map<std::tuple<std::string, Index, Index>, double> table{
      {{"fio1d", 1024, 6}, 2.52e-3},  {{"fio1d", 1024, 8}, 2.60e-5},  {{"fio1d", 1024, 10}, 1.69e-7},
      {{"fio1d", 1024, 12}, 1e-9},    {{"fio1d", 4096, 6}, 3.38e-3},  {{"fio1d", 4096, 8}, 3.16e-5},
      {{"fio1d", 4096, 10}, 1.84e-7}, {{"fio1d", 4096, 12}, 7.87e-10}, {{"hankel", 1024, 6}, 1.19e-3},
      {{"hankel", 1024, 8}, 2.35e-5}};
  auto it = table.find({kernel, n, rEps});
  if (it == table.end()) return std::nullopt;
  return it->second;
}

std::vector<std::string> tolerance_breaches(const BenchRecord& r, const std::optional<double>& maxErr) {
  std::vector<std::string> out;
  const double err = r.pathError();
  auto check = [&](double bound, const std::string& what) {
    if (!(err <= bound))
      out.push_back(r.kernel + " N=" + std::to_string(r.n) + " r_eps=" + std::to_string(r.rEps) + ": " +
                    (r.path == "bf" ? "eps_b" : "eps_n") + " = " + fmt(err) + " exceeds " + what + " " +
                    fmt(bound));
  };
  if (auto ref = reference_tolerance(r.kernel, r.n, r.rEps)) check(*ref, "reference bound");
  if (maxErr) check(*maxErr, "--max-err");
  return out;
}

std::string records_to_csv(const std::vector<BenchRecord>& records) {
  std::ostringstream os;
  const auto& cols = bench_columns();
  for (std::size_t c = 0; c < cols.size(); ++c) os << (c ? "," : "") << cols[c];
  os << "\n";
  for (const BenchRecord& r : records) {
    os << r.kernel << ',' << r.n << ',' << r.rEps << ',' << r.scenario << ',' << r.seed << ',' << r.path << ','
       << fmt(r.epsB) << ',' << fmt(r.epsN) << ',' << fmt(r.epsK) << ',' << fmt(r.epsPha) << ','
       << fmt(r.epsAmp) << ',' << fmt(r.tRec) << ',' << fmt(r.tFac) << ',' << fmt(r.tApp) << ','
       << fmt(r.tD) << ',' << fmt(r.tDec) << "\n";
  }
  return os.str();
}

std::vector<BenchRecord> records_from_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  std::vector<BenchRecord> out;
  if (!std::getline(is, line)) return out;
  std::string header;
  for (std::size_t c = 0; c < bench_columns().size(); ++c) header += (c ? "," : "") + bench_columns()[c];
  if (line != header) throw InvalidInputError("bench CSV: unexpected header");
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    if (f.size() != bench_columns().size()) throw InvalidInputError("bench CSV: wrong column count");
    BenchRecord r;
    r.kernel = f[0];
    r.n = std::stoll(f[1]);
    r.rEps = std::stoll(f[2]);
    r.scenario = f[3];
    r.seed = std::stoull(f[4]);
    r.path = f[5];
    double* nums[] = {&r.epsB, &r.epsN, &r.epsK, &r.epsPha, &r.epsAmp, &r.tRec, &r.tFac, &r.tApp, &r.tD, &r.tDec};
    for (std::size_t k = 0; k < 10; ++k) *nums[k] = parse_double(f[6 + k]);
    out.push_back(std::move(r));
  }
  return out;
}

std::string records_to_json(const std::vector<BenchRecord>& records) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  auto num = [](double v) { return std::isnan(v) ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(v); };
  for (const BenchRecord& r : records) {
    nlohmann::ordered_json j;
    j["kernel"] = r.kernel;
    j["N"] = r.n;
    j["r_eps"] = r.rEps;
    j["scenario"] = r.scenario;
    j["seed"] = r.seed;
    j["path"] = r.path;
    j["eps_b"] = num(r.epsB);
    j["eps_n"] = num(r.epsN);
    j["eps_K"] = num(r.epsK);
    j["eps_pha"] = num(r.epsPha);
    j["eps_amp"] = num(r.epsAmp);
    j["T_rec"] = num(r.tRec);
    j["T_fac"] = num(r.tFac);
    j["T_app"] = num(r.tApp);
    j["T_d"] = num(r.tD);
    j["T_dec"] = num(r.tDec);
    arr.push_back(std::move(j));
  }
  return arr.dump(2) + "\n";
}

std::vector<BenchRecord> records_from_json(const std::string& text) {
  const nlohmann::json arr = nlohmann::json::parse(text);
  if (!arr.is_array()) throw InvalidInputError("bench JSON: expected an array");
  auto num = [](const nlohmann::json& v) { return v.is_null() ? NAN : v.get<double>(); };
  std::vector<BenchRecord> out;
  for (const auto& j : arr) {
    BenchRecord r;
    r.kernel = j.at("kernel").get<std::string>();
    r.n = j.at("N").get<Index>();
    r.rEps = j.at("r_eps").get<Index>();
    r.scenario = j.at("scenario").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.path = j.at("path").get<std::string>();
    r.epsB = num(j.at("eps_b"));
    r.epsN = num(j.at("eps_n"));
    r.epsK = num(j.at("eps_K"));
    r.epsPha = num(j.at("eps_pha"));
    r.epsAmp = num(j.at("eps_amp"));
    r.tRec = num(j.at("T_rec"));
    r.tFac = num(j.at("T_fac"));
    r.tApp = num(j.at("T_app"));
    r.tD = num(j.at("T_d"));
    r.tDec = num(j.at("T_dec"));
    out.push_back(std::move(r));
  }
  return out;
}

bool ScalingReport::ok() const {
  return std::all_of(growth.begin(), growth.end(), [](const GrowthFactor& g) { return g.ok(); });
}

ScalingReport run_scaling(const BenchConfig& cfg, Index rEps, Index bfMax) {
  if (cfg.sizes.size() < 2) throw ParameterError("scaling needs at least two sizes");
  std::vector<Index> sizes = cfg.sizes;
  std::sort(sizes.begin(), sizes.end());
  ScalingReport rep;
  SyntheticParams sp;
  sp.seed = cfg.seed;
  for (Index n : sizes) {
    const Kernel kernel = make_kernel(cfg.kernel, n, sp);
    PipelineParams params = pipeline_params(cfg, kernel, rEps);
    params.force = PathChoice::Butterfly;
    const KernelAccess access = make_access(kernel, cfg.scenario, params.recovery);
    const KernelAccess entries = make_access(kernel, Scenario::Entry, params.recovery);
    BenchRecord rec;
    rec.kernel = cfg.kernel;
    rec.n = n;
    rec.rEps = rEps;
    rec.scenario = scenario_name(cfg.scenario);
    rec.seed = cfg.seed;
    RecoveredKernel rk;
    rec.tRec = median_seconds(cfg.repeats, [&] { rk = recover_kernel(access, params.recovery); });
    PipelineParams decideParams = params;
    decideParams.force = PathChoice::Auto;
    rec.tDec = median_seconds(cfg.repeats, [&] { (void)select_nufft(rk.amp, rk.phase, decideParams); });
    const FactorErrors fe = factor_errors(entries, rk.amp, rk.phase, 256, probe_seed(cfg.seed));
    rec.epsK = fe.kernel;
    rec.epsPha = fe.phase;
    rec.epsAmp = fe.amplitude;
    rec.path = "decision-only";
    if (n <= bfMax) {
      TransformPlan plan;
      rec.tFac = median_seconds(cfg.repeats, [&] { plan = build_plan(rk.amp, rk.phase, params, nullptr); });
      const VectorXcd f = bench_input(n, input_seed(cfg.seed));
      VectorXcd g;
      rec.tApp = median_seconds(cfg.repeats, [&] { g = apply_transform(plan, f, cfg.threads); });
      rec.epsB = relative_error(g, entries, f, 256, error_seed(cfg.seed));
      rec.path = path_name(plan.path);
      rec.provenance = plan_provenance_json(plan);
    }
    rep.records.push_back(std::move(rec));
  }

  auto add = [&](const std::string& metric, double BenchRecord::*field, double limit) {
    for (std::size_t k = 1; k < rep.records.size(); ++k) {
      const BenchRecord& a = rep.records[k - 1];
      const BenchRecord& b = rep.records[k];
      const double ta = a.*field, tb = b.*field;
      if (std::isnan(ta) || std::isnan(tb)) continue;
      GrowthFactor g;
      g.metric = metric;
      g.from = a.n;
      g.to = b.n;
      const double steps = std::log(static_cast<double>(b.n) / static_cast<double>(a.n)) / std::log(4.0);
      g.factor = std::pow(tb / ta, 1.0 / steps);
      g.limit = limit;
      rep.growth.push_back(g);
    }
  };
  add("T_rec", &BenchRecord::tRec, 8.0);
  add("T_fac", &BenchRecord::tFac, 8.0);
  add("T_app", &BenchRecord::tApp, 8.0);
  add("T_dec", &BenchRecord::tDec, 5.0);
  return rep;
}

}  // namespace oit
