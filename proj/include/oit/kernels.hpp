#pragma once

#include "oit/kernel_access.hpp"
#include "oit/lowrank.hpp"
#include "oit/phase_recovery.hpp"

#include <functional>
#include <memory>
#include <string>

namespace oit {

// x_i = i/N on [0,1), xi_j = j - N/2 on [-N/2, N/2).
struct GridSpec {
  Index n = 0;

  explicit GridSpec(Index size);
  double x(Index i) const { return static_cast<double>(i) / static_cast<double>(n); }
  double xi(Index j) const { return static_cast<double>(j - n / 2); }
  Index xIndex(double x) const;
  Index xiIndex(double xi) const;
  // Column holding xi = 0.
  Index zeroColumn() const { return n / 2; }
};

// c(x) = (2 + 0.2 sin(2 pi x)) / 16
double fio_c(double x);

// Phases in cycles; entries are e^{2 pi i Phi} with unit amplitude.
double fio1d_phase(Index i, Index j, const GridSpec& g);        // x xi + c(x)|xi|
double fio_smooth_phase(Index i, Index j, const GridSpec& g);   // x xi + c(x) xi
cd fio1d_entry(Index i, Index j, const GridSpec& g);
cd fio_smooth_entry(Index i, Index j, const GridSpec& g);

// The fio1d phase as two exact rank-1 pieces: (x - c(x)) xi on columns
// [0, N/2) and (x + c(x)) xi on [N/2, N). Factors use piece-local columns.
struct SplitPhase {
  Index splitCol = 0;
  RealFactor negative, positive;
};
SplitPhase split_phase_pieces(const GridSpec& g);

// fio1d matvec through one 1D type-3 NUFFT per frequency half.
VectorXcd split_nufft_apply(const GridSpec& g, const VectorXcd& f, double tol);

// Bessel functions J_0..J_nmax and Y_0..Y_nmax at x >= 20 with nmax < x.
void bessel_jy_sequence(double x, Index nmax, double* jOut, double* yOut);
// H^(1)_m(x) = J_m(x) + i Y_m(x).
cd hankel1(Index order, double x);
// x_i = N + 2 pi i / 3
double hankel_point(Index i, Index n);
// Debye approximation of arg H^(1)_m(x) / (2 pi) for x > m.
double hankel_debye_phase(Index order, double x);
cd hankel_entry(Index i, Index j, Index n);

enum class SyntheticKind { Separable, SmoothLowRank, PlantedBreaks };
SyntheticKind parse_synthetic_kind(const std::string& s);
const char* synthetic_kind_name(SyntheticKind k);

struct SyntheticParams {
  Index rank = 3;
  std::uint64_t seed = 0;
  Index breakCol = -1;  // planted break column, -1 for N/2
  double jump = 0.35;   // planted jump in cycles
};

// Ground truth of a synthetic phase: Phi = u v^T exactly.
struct SyntheticPhase {
  SyntheticKind kind = SyntheticKind::Separable;
  RealFactor truth;
  IndexList colBreaks;  // {0} plus the planted break, if any
  double operator()(Index i, Index j) const { return truth.entry(i, j); }
};
SyntheticPhase synthetic_phase(SyntheticKind kind, const SyntheticParams& p, const GridSpec& g);

// A kernel K = amplitude .* e^{2 pi i phase} with oracles for every access scenario.
struct Kernel {
  std::string id;
  Index n = 0;
  std::function<double(Index, Index)> phase;      // cycles, unwrapped
  std::function<double(Index, Index)> amplitude;  // nonnegative
  KernelAccess::BlockFn block;
  // Column pieces on which the phase is smooth; {0, N/2} for fio-split.
  IndexList colSplits{0};
  // Present for kernels whose phase is known in closed form as a low-rank factor.
  std::shared_ptr<const RealFactor> exactPhase;

  MatrixXcd dense() const;
};

// Ids: fio1d, fio-smooth, hankel, fio-split, synthetic:<kind>.
Kernel make_kernel(const std::string& id, Index n, const SyntheticParams& p = {});
bool is_known_kernel(const std::string& id);

// Scenario 1 uses the entry oracle; Scenario 2 wraps a dense direct
// matvec; Scenario 3 supplies r q random rows and columns (plus row and
// column 0) of the amplitude and phase, drawn from the phase seed stream.
KernelAccess make_access(const Kernel& k, Scenario s, const RecoveryOptions& opt);

}  // namespace oit
