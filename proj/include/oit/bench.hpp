#pragma once

#include "oit/kernels.hpp"
#include "oit/pipeline.hpp"

#include <optional>
#include <string>
#include <vector>

namespace oit {

struct BenchConfig {
  std::string kernel = "fio1d";
  std::vector<Index> sizes{1024};
  std::vector<Index> rankEps{8};
  Index rank = 20;
  Index oversampling = 5;
  double tau = kPi / 2;
  double tol = 1e-12;
  std::uint64_t seed = 0;
  Scenario scenario = Scenario::Entry;
  PathChoice force = PathChoice::Auto;
  int threads = 1;
  int repeats = 3;
  Index leaf = 1;
  std::optional<double> maxErr;
};

// One row of the result table. Errors that do not apply are NaN.
struct BenchRecord {
  std::string kernel;
  Index n = 0;
  Index rEps = 0;
  std::string scenario;
  std::uint64_t seed = 0;
  std::string path;
  double epsB = NAN, epsN = NAN, epsK = NAN, epsPha = NAN, epsAmp = NAN;
  double tRec = NAN, tFac = NAN, tApp = NAN, tD = NAN, tDec = NAN;
  std::string provenance;  // plan provenance JSON, not part of the table

  // eps_b or eps_n, whichever the path produced.
  double pathError() const { return std::isnan(epsB) ? epsN : epsB; }
};

bool operator==(const BenchRecord& a, const BenchRecord& b);

const std::vector<std::string>& bench_columns();

PipelineParams pipeline_params(const BenchConfig& cfg, const Kernel& k, Index rEps);

BenchRecord run_bench_case(const BenchConfig& cfg, Index n, Index rEps);

// Reference bound on the path error: 10x the published butterfly errors for
// fio1d (N = 1024, 4096) and hankel (N = 1024), r_eps in {6, 8, 10, 12}.
std::optional<double> reference_tolerance(const std::string& kernel, Index n, Index rEps);

// Checks a record against the reference table and maxErr; returns a message
// per breach.
std::vector<std::string> tolerance_breaches(const BenchRecord& r, const std::optional<double>& maxErr);

std::string records_to_csv(const std::vector<BenchRecord>& records);
std::string records_to_json(const std::vector<BenchRecord>& records);
std::vector<BenchRecord> records_from_csv(const std::string& text);
std::vector<BenchRecord> records_from_json(const std::string& text);

struct GrowthFactor {
  std::string metric;
  Index from = 0, to = 0;
  double factor = 0.0;  // normalised to one quadrupling of N
  double limit = 0.0;
  bool ok() const { return factor <= limit; }
};

struct ScalingReport {
  std::vector<BenchRecord> records;
  std::vector<GrowthFactor> growth;
  bool ok() const;
};

// T_rec and T_dec are measured at every size; the butterfly (forced) is
// factored and applied only for N <= bfMax.
ScalingReport run_scaling(const BenchConfig& cfg, Index rEps, Index bfMax = 16384);

std::string library_version();

}  // namespace oit
