// oit: benchmark, scaling and verification front end.
#include "oit/bench.hpp"
#include "oit/verify.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace {

constexpr int kUsage = 1;
constexpr int kFailed = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CommonArgs {
  std::string kernel = "fio1d";
  std::vector<long long> sizes{1024};
  std::vector<long long> rankEps{8};
  long long rank = 20;
  long long oversampling = 5;
  double tau = oit::kPi / 2;
  double tol = 1e-12;
  std::uint64_t seed = 0;
  std::string scenario = "entry";
  std::string forcePath = "auto";
  int threads = 1;
  long long leaf = 1;
  int repeats = 3;
  std::string out;
  std::string format;
  double maxErr = -1.0;
};

void add_common(CLI::App* cmd, CommonArgs& a) {
  cmd->add_option("--kernel", a.kernel, "fio1d, fio-smooth, fio-split, hankel or synthetic:<kind>");
  cmd->add_option("--n", a.sizes, "grid sizes N")->delimiter(',');
  cmd->add_option("--rank-eps", a.rankEps, "butterfly ranks r_eps")->delimiter(',');
  cmd->add_option("--rank", a.rank, "recovery rank r");
  cmd->add_option("--oversampling", a.oversampling, "oversampling q");
  cmd->add_option("--tau", a.tau, "break-detection threshold");
  cmd->add_option("--tol", a.tol, "NUFFT tolerance");
  cmd->add_option("--seed", a.seed, "RNG seed");
  cmd->add_option("--scenario", a.scenario, "access scenario: entry (1), matvec (2) or samples (3)");
  cmd->add_option("--force-path", a.forcePath, "auto, nufft or bf");
  cmd->add_option("--threads", a.threads, "library threads");
  cmd->add_option("--leaf", a.leaf, "butterfly leaf size");
  cmd->add_option("--repeats", a.repeats, "timing repeats (median)");
  cmd->add_option("--out", a.out, "report file (.csv or .json)");
  cmd->add_option("--format", a.format, "csv or json (default from --out)");
  cmd->add_option("--max-err", a.maxErr, "fail when the path error exceeds this");
}

oit::BenchConfig to_config(const CommonArgs& a) {
  oit::BenchConfig c;
  if (!oit::is_known_kernel(a.kernel)) throw UsageError("unknown kernel '" + a.kernel + "'");
  if (a.sizes.empty()) throw UsageError("--n needs at least one size");
  for (long long n : a.sizes) {
    if (n < 2 || n % 2) throw UsageError("--n " + std::to_string(n) + ": N must be even and at least 2");
  }
  c.sizes.assign(a.sizes.begin(), a.sizes.end());
  c.rankEps.assign(a.rankEps.begin(), a.rankEps.end());
  for (long long r : a.rankEps)
    if (r < 1) throw UsageError("--rank-eps must be positive");
  if (a.rank < 1 || a.oversampling < 1) throw UsageError("--rank and --oversampling must be positive");
  if (a.threads < 1 || a.repeats < 1 || a.leaf < 1) throw UsageError("--threads, --repeats and --leaf must be positive");
  c.kernel = a.kernel;
  c.rank = a.rank;
  c.oversampling = a.oversampling;
  c.tau = a.tau;
  c.tol = a.tol;
  c.seed = a.seed;
  try {
    c.scenario = oit::parse_scenario(a.scenario);
    c.force = oit::parse_path_choice(a.forcePath);
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
  c.threads = a.threads;
  c.repeats = a.repeats;
  c.leaf = a.leaf;
  if (a.maxErr > 0) c.maxErr = a.maxErr;
  return c;
}

std::string resolve_format(const CommonArgs& a) {
  if (!a.format.empty()) {
    if (a.format != "csv" && a.format != "json") throw UsageError("--format must be csv or json");
    return a.format;
  }
  return std::filesystem::path(a.out).extension() == ".json" ? "json" : "csv";
}

void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + p.string());
  os << text;
}

nlohmann::ordered_json config_json(const oit::BenchConfig& c) {
  nlohmann::ordered_json j;
  j["kernel"] = c.kernel;
  j["sizes"] = c.sizes;
  j["rank_eps"] = c.rankEps;
  j["rank"] = c.rank;
  j["oversampling"] = c.oversampling;
  j["tau"] = c.tau;
  j["tol"] = c.tol;
  j["seed"] = c.seed;
  j["scenario"] = oit::scenario_name(c.scenario);
  j["force_path"] = c.force == oit::PathChoice::Auto ? "auto" : c.force == oit::PathChoice::Nufft ? "nufft" : "bf";
  j["threads"] = c.threads;
  j["repeats"] = c.repeats;
  j["leaf"] = c.leaf;
  return j;
}

// Writes the table in the chosen format, the other format next to it, and a
// provenance sidecar with the plan of every record.
void write_reports(const CommonArgs& a, const oit::BenchConfig& c, const std::vector<oit::BenchRecord>& recs,
                   const nlohmann::ordered_json& extra = {}) {
  if (a.out.empty()) return;
  const std::filesystem::path out(a.out);
  const std::string fmt = resolve_format(a);
  std::filesystem::path csv = out, json = out;
  if (fmt == "csv")
    json.replace_extension(".json");
  else
    csv.replace_extension(".csv");
  if (csv == json) json += ".json";
  write_file(csv, oit::records_to_csv(recs));
  write_file(json, oit::records_to_json(recs));

  nlohmann::ordered_json prov;
  prov["library_version"] = oit::library_version();
  prov["config"] = config_json(c);
  prov["plans"] = nlohmann::ordered_json::array();
  for (const auto& r : recs)
    prov["plans"].push_back(r.provenance.empty() ? nlohmann::ordered_json(nullptr)
                                                 : nlohmann::ordered_json::parse(r.provenance));
  if (!extra.is_null()) prov["scaling"] = extra;
  std::filesystem::path side = out;
  side += ".provenance.json";
  write_file(side, prov.dump(2) + "\n");
}

void print_table(const std::vector<oit::BenchRecord>& recs) {
  std::printf("%-12s %7s %5s %-6s %10s %10s %10s %10s %10s %10s %10s\n", "kernel", "N", "r_eps", "path", "err",
              "eps_K", "eps_pha", "T_rec", "T_fac", "T_app", "T_dec");
  for (const auto& r : recs)
    std::printf("%-12s %7lld %5lld %-6s %10.3e %10.3e %10.3e %10.3e %10.3e %10.3e %10.3e\n", r.kernel.c_str(),
                static_cast<long long>(r.n), static_cast<long long>(r.rEps), r.path.c_str(), r.pathError(), r.epsK,
                r.epsPha, r.tRec, r.tFac, r.tApp, r.tDec);
}

int cmd_bench(const CommonArgs& a) {
  const oit::BenchConfig c = to_config(a);
  resolve_format(a);
  std::vector<oit::BenchRecord> recs;
  std::vector<std::string> breaches;
  for (oit::Index n : c.sizes)
    for (oit::Index r : c.rankEps) {
      recs.push_back(oit::run_bench_case(c, n, r));
      for (auto& b : oit::tolerance_breaches(recs.back(), c.maxErr)) breaches.push_back(std::move(b));
    }
  print_table(recs);
  write_reports(a, c, recs);
  for (const auto& b : breaches) std::fprintf(stderr, "tolerance breach: %s\n", b.c_str());
  return breaches.empty() ? 0 : kFailed;
}

int cmd_scaling(const CommonArgs& a, long long bfMax) {
  const oit::BenchConfig c = to_config(a);
  resolve_format(a);
  if (c.sizes.size() < 2) throw UsageError("scaling needs at least two sizes in --n");
  const oit::ScalingReport rep = oit::run_scaling(c, c.rankEps.front(), bfMax);
  print_table(rep.records);
  nlohmann::ordered_json growth = nlohmann::ordered_json::array();
  std::printf("\n%-6s %7s %7s %9s %6s\n", "metric", "from", "to", "growth", "limit");
  for (const auto& g : rep.growth) {
    std::printf("%-6s %7lld %7lld %9.3f %6.1f%s\n", g.metric.c_str(), static_cast<long long>(g.from),
                static_cast<long long>(g.to), g.factor, g.limit, g.ok() ? "" : "  EXCEEDED");
    growth.push_back({{"metric", g.metric}, {"from", g.from}, {"to", g.to}, {"factor", g.factor}, {"limit", g.limit}});
  }
  write_reports(a, c, rep.records, growth);
  return rep.ok() ? 0 : kFailed;
}

int cmd_verify(const std::vector<std::string>& suites, bool injectFault, std::uint64_t seed) {
  oit::VerifyOptions opt;
  opt.suites = suites;
  opt.injectFault = injectFault;
  opt.seed = seed;
  for (const auto& s : suites)
    if (std::find(oit::verify_suites().begin(), oit::verify_suites().end(), s) == oit::verify_suites().end())
      throw UsageError("unknown suite '" + s + "'");
  const auto t0 = std::chrono::steady_clock::now();
  const auto checks = oit::run_verify(opt);
  int failed = 0;
  for (const auto& c : checks) {
    std::printf("%s  [%s] %s: %.3e (bound %.3e)%s%s\n", c.passed ? "PASS" : "FAIL", c.suite.c_str(), c.name.c_str(),
                c.value, c.bound, c.detail.empty() ? "" : "  ", c.detail.c_str());
    failed += !c.passed;
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("%zu checks, %d failed, %.1f s\n", checks.size(), failed, secs);
  if (failed) {
    std::fprintf(stderr, "failing invariants:\n");
    for (const auto& c : checks)
      if (!c.passed) std::fprintf(stderr, "  [%s] %s\n", c.suite.c_str(), c.name.c_str());
  }
  return failed ? kFailed : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fast oscillatory integral transforms: benchmarks and checks"};
  app.set_version_flag("--version", oit::library_version());
  app.require_subcommand(1);

  CommonArgs benchArgs, scalingArgs;
  auto* bench = app.add_subcommand("bench", "recover, plan, apply and measure errors for an (N, r_eps) sweep");
  add_common(bench, benchArgs);
  auto* scaling = app.add_subcommand("scaling", "per-quadrupling growth of T_rec, T_fac, T_app and T_dec");
  add_common(scaling, scalingArgs);
  scalingArgs.sizes = {1024, 4096, 16384};
  long long bfMax = 16384;
  scaling->add_option("--bf-max", bfMax, "largest N for which the butterfly is factored");

  std::vector<std::string> suites;
  bool injectFault = false;
  std::uint64_t verifySeed = 0;
  auto* verify = app.add_subcommand("verify", "run the invariant suites at N <= 512");
  verify->add_option("--suite", suites, "recovery, interp, butterfly or nufft")->delimiter(',');
  verify->add_flag("--inject-fault", injectFault, "flip a sign in the butterfly recursion (test hook)");
  verify->add_option("--seed", verifySeed, "RNG seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsage;
  }

  try {
    if (*bench) return cmd_bench(benchArgs);
    if (*scaling) return cmd_scaling(scalingArgs, bfMax);
    return cmd_verify(suites, injectFault, verifySeed);
  } catch (const UsageError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return kUsage;
  } catch (const oit::ParameterError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return kUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kFailed;
  }
}
