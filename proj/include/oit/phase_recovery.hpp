#pragma once

#include "oit/kernel_access.hpp"
#include "oit/lowrank.hpp"

#include <functional>

namespace oit {

// Sum of absolute first/second/third differences (order 1, 2, 3).
double tv_norm(const VectorXd& v, int order);

// v = u + round(target - u): the value with fractional part u nearest to
// target. Exact ties take the lower value, v = target - 1/2.
double unwrap_next(double target, double u);

struct RecoveredVector {
  VectorXd values;   // cycles
  IndexList breaks;  // sorted piece starts, breaks[0] == 0
};

// Fixed value at a position; its fractional part must match the observation.
struct Anchor {
  Index pos;
  double value;
};

// Piecewise-smooth unwrapping of mod-1 data. u holds observations in [0,1); tau is the second-difference
// threshold for break detection (cycles).
RecoveredVector recover_vector(const VectorXd& u, double tau, const IndexList& knownBreaks = {},
                               const std::vector<Anchor>& anchors = {});

// Mod-1 observations of the phase on demand.
struct PhaseObserver {
  Index nrows = 0, ncols = 0;
  std::function<VectorXd(Index)> row;  // length ncols
  std::function<VectorXd(Index)> col;  // length nrows
};

PhaseObserver observer_from_matrix(const MatrixXd& args);

struct RecoveredPhase {
  IndexList rowIdx, colIdx;
  MatrixXd rowSamples;  // |rowIdx| x ncols
  MatrixXd colSamples;  // nrows x |colIdx|
  IndexList rowBreaks, colBreaks;
};

// Stitches unwrapped rows and columns into a consistent sample set. rowIdx/colIdx are augmented with index 0, the detected breaks
// and the two indices following every block start.
RecoveredPhase recover_phase_samples(const PhaseObserver& obs, const IndexList& rowIdx,
                                     const IndexList& colIdx, double tau);

struct RecoveryOptions {
  Index rank = 20;
  Index oversampling = 5;
  double tau = kPi / 2;
  std::uint64_t seed = 0;
  int iters = 2;
  // Relative cutoff applied to the amplitude factor.
  double ampTrim = 1e-12;
};

RealFactor recover_amplitude(const KernelAccess& access, const RecoveryOptions& opt);

// Phase factor from indirect access. Returns U V^T with e^{2 pi i U V^T} ~ K ./ amplitude.
RealFactor recover_phase_factor(const KernelAccess& access, const RealFactor& amp,
                                const RecoveryOptions& opt,
                                RecoveredPhase* samplesOut = nullptr);

// Seeds of the independent random streams used by the pipeline stages.
inline std::uint64_t phase_seed(std::uint64_t seed) { return seed + 1; }
inline std::uint64_t decision_seed(std::uint64_t seed) { return seed + 2; }

}  // namespace oit
