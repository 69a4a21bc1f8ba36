#pragma once

#include "oit/butterfly.hpp"
#include "oit/kernel_access.hpp"
#include "oit/nufft.hpp"
#include "oit/phase_recovery.hpp"

#include <memory>
#include <string>

namespace oit {

enum class PathChoice { Auto, Nufft, Butterfly };
enum class PathKind { Nufft, Butterfly };

PathChoice parse_path_choice(const std::string& s);
const char* path_name(PathKind p);

struct PipelineParams {
  RecoveryOptions recovery;
  Index rEps = 8;
  double eps = 1e-12;  // pivot threshold and residual cutoff of the decision
  double tol = 1e-12;  // NUFFT tolerance
  Index leaf = 1;
  int threads = 1;
  PathChoice force = PathChoice::Auto;
  IndexList colSplits{0};  // column pieces for the NUFFT decision
  bool injectFault = false;
  std::string kernelId;    // provenance only
  Scenario scenario = Scenario::Entry;
};

struct RecoveredKernel {
  RealFactor amp, phase;
};

RecoveredKernel recover_kernel(const KernelAccess& access, const RecoveryOptions& opt);

// g = sum_k a_k .* F(b_k .* f) with F the butterfly, or the lifted NUFFT.
struct TransformPlan {
  Index n = 0;
  MatrixXd a, b;  // amplitude terms, N x r2 each
  PathKind path = PathKind::Butterfly;
  std::shared_ptr<const NufftDecision> decision;
  std::shared_ptr<const NufftEvaluator> evaluator;
  std::shared_ptr<const ButterflyFactorization> butterfly;
  Index nufftDim = 0;      // lifting dimension r of the NUFFT path
  std::string reason;      // why this path was chosen
  PipelineParams params;
  std::uint64_t phaseFingerprint = 0;
  double decisionSeconds = 0.0;  // time spent in decide_nufft
};

// Tries r = 1 then r = 2; the first applicable decision wins (null if none).
std::shared_ptr<const NufftDecision> select_nufft(const RealFactor& amp, const RealFactor& phase,
                                                 const PipelineParams& params);

// NUFFT path when a decision is given (and not overridden), butterfly otherwise.
TransformPlan build_plan(const RealFactor& amp, const RealFactor& phase, const PipelineParams& params,
                         std::shared_ptr<const NufftDecision> decision);

// select_nufft followed by build_plan, honouring params.force.
TransformPlan plan_transform(const RealFactor& amp, const RealFactor& phase, const PipelineParams& params);

VectorXcd apply_transform(const TransformPlan& plan, const VectorXcd& f, int threads = 1);

// Plan parameters, seeds and path as a JSON object.
std::string plan_provenance_json(const TransformPlan& plan);

// Sampled rows of the error metric, drawn from the seed.
IndexList error_rows(Index n, Index count, std::uint64_t seed);

// sqrt(sum_S |gApprox - gDirect|^2 / sum_S |gDirect|^2) over count random rows.
double relative_error(const VectorXcd& gApprox, const KernelAccess& access, const VectorXcd& f,
                      Index sampleCount = 256, std::uint64_t seed = 0);

// Factor errors on an S x S probe of random rows and columns; spectral norms.
struct FactorErrors {
  double kernel = 0.0;     // amp .* e^{2 pi i phase} against K
  double phase = 0.0;      // wrapped phase difference against arg K / 2 pi
  double amplitude = 0.0;  // amp against |K|
};
FactorErrors factor_errors(const KernelAccess& entries, const RealFactor& amp, const RealFactor& phase,
                           Index probe = 256, std::uint64_t seed = 0);

}  // namespace oit
