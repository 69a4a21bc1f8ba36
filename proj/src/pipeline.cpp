#include "oit/pipeline.hpp"

#include <json.hpp>

#include <chrono>
#include <random>

namespace oit {

PathChoice parse_path_choice(const std::string& s) {
  if (s == "auto") return PathChoice::Auto;
  if (s == "nufft") return PathChoice::Nufft;
  if (s == "bf") return PathChoice::Butterfly;
  throw ParameterError("unknown path '" + s + "' (expected auto, nufft or bf)");
}

const char* path_name(PathKind p) { return p == PathKind::Nufft ? "nufft" : "bf"; }

RecoveredKernel recover_kernel(const KernelAccess& access, const RecoveryOptions& opt) {
  RecoveredKernel out;
  out.amp = recover_amplitude(access, opt);
  out.phase = recover_phase_factor(access, out.amp, opt);
  return out;
}

std::shared_ptr<const NufftDecision> select_nufft(const RealFactor& amp, const RealFactor& phase,
                                                 const PipelineParams& params) {
  for (Index r = 1; r <= 2 && r < phase.rank(); ++r) {
    NufftDecision d = decide_nufft_split(phase, amp, params.colSplits, r, params.rEps,
                                         params.recovery.oversampling, params.eps,
                                         decision_seed(params.recovery.seed));
    if (d.applicable) return std::make_shared<const NufftDecision>(std::move(d));
  }
  return nullptr;
}

TransformPlan build_plan(const RealFactor& amp, const RealFactor& phase, const PipelineParams& params,
                         std::shared_ptr<const NufftDecision> decision) {
  amp.validate();
  phase.validate();
  if (amp.rows() != phase.rows() || amp.cols() != phase.cols() || phase.rows() != phase.cols())
    throw ParameterError("plan_transform: amplitude and phase must be square of equal size");
  TransformPlan plan;
  plan.n = phase.rows();
  plan.a = amp.scaledU();
  plan.b = amp.v;
  plan.params = params;
  plan.phaseFingerprint = phase_fingerprint(phase);

  std::string nufftFailure;
  if (params.force != PathChoice::Butterfly && decision) {
    const std::string reason = "decide_nufft returned y = 1 at r = " + std::to_string(decision->r);
    try {
      plan.evaluator = std::make_shared<const NufftEvaluator>(*decision, params.tol);
      plan.path = PathKind::Nufft;
      plan.nufftDim = decision->r;
      plan.reason = reason;
      plan.decision = std::move(decision);
      return plan;
    } catch (const PlanningError& e) {
      // The lifted grid grows with the product of the per-dimension bandwidths
      // and can outgrow memory even when the decision succeeds.
      if (params.force == PathChoice::Nufft) throw;
      nufftFailure = reason + " but the NUFFT plan failed (" + e.what() + "); butterfly used";
    }
  }
  if (params.force == PathChoice::Nufft)
    throw PlanningError("NUFFT path forced but decide_nufft returned y = 0 at r = 1 and r = 2");
  plan.reason = params.force == PathChoice::Butterfly ? "butterfly path forced"
                : !nufftFailure.empty()               ? nufftFailure
                                                      : "decide_nufft returned y = 0 at r = 1 and r = 2";
  ButterflyOptions bo;
  bo.rEps = params.rEps;
  bo.leaf = params.leaf;
  bo.threads = params.threads;
  bo.seed = params.recovery.seed;
  bo.injectFault = params.injectFault;
  plan.path = PathKind::Butterfly;
  plan.butterfly = std::make_shared<const ButterflyFactorization>(butterfly_factorize(phase, bo));
  return plan;
}

TransformPlan plan_transform(const RealFactor& amp, const RealFactor& phase, const PipelineParams& params) {
  std::shared_ptr<const NufftDecision> decision;
  double seconds = 0.0;
  if (params.force != PathChoice::Butterfly) {
    const auto t0 = std::chrono::steady_clock::now();
    decision = select_nufft(amp, phase, params);
    seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
  TransformPlan plan = build_plan(amp, phase, params, std::move(decision));
  plan.decisionSeconds = seconds;
  return plan;
}

VectorXcd apply_transform(const TransformPlan& plan, const VectorXcd& f, int threads) {
  if (f.size() != plan.n) throw ParameterError("apply_transform: input length does not match the plan");
  if (plan.path == PathKind::Nufft) return plan.evaluator->apply(f, threads);
  VectorXcd g = VectorXcd::Zero(plan.n);
  for (Index k = 0; k < plan.a.cols(); ++k)
    g += plan.a.col(k).cwiseProduct(plan.butterfly->apply(plan.b.col(k).cwiseProduct(f), threads));
  return g;
}

std::string plan_provenance_json(const TransformPlan& plan) {
  const PipelineParams& p = plan.params;
  nlohmann::ordered_json j;
  j["kernel"] = p.kernelId;
  j["N"] = plan.n;
  j["scenario"] = scenario_name(p.scenario);
  j["seed"] = p.recovery.seed;
  j["phase_seed"] = phase_seed(p.recovery.seed);
  j["decision_seed"] = decision_seed(p.recovery.seed);
  j["rank"] = p.recovery.rank;
  j["oversampling"] = p.recovery.oversampling;
  j["tau"] = p.recovery.tau;
  j["r_eps"] = p.rEps;
  j["eps"] = p.eps;
  j["tol"] = p.tol;
  j["leaf"] = p.leaf;
  j["col_splits"] = p.colSplits;
  j["path"] = path_name(plan.path);
  j["nufft_dim"] = plan.nufftDim;
  j["amplitude_terms"] = plan.a.cols();
  j["reason"] = plan.reason;
  j["phase_fingerprint"] = plan.phaseFingerprint;
  if (plan.butterfly) j["butterfly_fingerprint"] = plan.butterfly->fingerprint();
  return j.dump();
}

IndexList error_rows(Index n, Index count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return sample_indices(rng, n, std::min(n, count));
}

double relative_error(const VectorXcd& gApprox, const KernelAccess& access, const VectorXcd& f,
                      Index sampleCount, std::uint64_t seed) {
  if (gApprox.size() != access.size()) throw ParameterError("relative_error: length mismatch");
  const IndexList rows = error_rows(access.size(), sampleCount, seed);
  const VectorXcd direct = access.applyRows(rows, f);
  double num = 0.0, den = 0.0;
  for (std::size_t a = 0; a < rows.size(); ++a) {
    num += std::norm(gApprox(rows[a]) - direct(static_cast<Index>(a)));
    den += std::norm(direct(static_cast<Index>(a)));
  }
  if (den == 0.0) throw DegenerateReferenceError("relative_error: the direct result vanishes on the sampled rows");
  return std::sqrt(num / den);
}

FactorErrors factor_errors(const KernelAccess& entries, const RealFactor& amp, const RealFactor& phase,
                           Index probe, std::uint64_t seed) {
  const Index n = entries.size();
  std::mt19937_64 rng(seed);
  const IndexList I = sample_indices(rng, n, std::min(n, probe));
  const IndexList J = sample_indices(rng, n, std::min(n, probe));
  const MatrixXcd k = entries.block(I, J);
  const MatrixXd a = amp.block(I, J);
  const MatrixXd ph = phase.block(I, J);
  const MatrixXd absK = k.cwiseAbs();
  MatrixXcd recon(k.rows(), k.cols());
  MatrixXd dphase(k.rows(), k.cols());
  for (Index c = 0; c < k.cols(); ++c)
    for (Index r = 0; r < k.rows(); ++r) {
      recon(r, c) = a(r, c) * expi_cycles(ph(r, c));
      dphase(r, c) = wrap_half(ph(r, c) - std::arg(k(r, c)) / kTwoPi);
    }
  FactorErrors e;
  const double nk = spectral_norm(k), na = spectral_norm(absK), np = spectral_norm(ph);
  e.kernel = nk > 0 ? spectral_norm(MatrixXcd(recon - k)) / nk : 0.0;
  e.amplitude = na > 0 ? spectral_norm(MatrixXd(a - absK)) / na : 0.0;
  e.phase = np > 0 ? spectral_norm(dphase) / np : 0.0;
  return e;
}

}  // namespace oit
