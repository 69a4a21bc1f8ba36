#include "oit/kernels.hpp"
#include "oit/phase_recovery.hpp"
#include "oit/pipeline.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <Eigen/SVD>

using namespace oit;

namespace {

VectorXd frac_of(const VectorXd& v) { return v.unaryExpr(&frac1); }

// Brute force: the representative of u + k nearest to target over k in [-4, 4].
double brute_unwrap(double target, double u) {
  double best = u - 4;
  for (int k = -4; k <= 4; ++k)
    if (std::abs(u + k - target) < std::abs(best - target)) best = u + k;
  return best;
}

// Recovery is exact when values - truth is one integer per piece.
void check_integer_offsets(const RecoveredVector& rv, const VectorXd& truth, const IndexList& pieces) {
  for (std::size_t p = 0; p < pieces.size(); ++p) {
    const Index s = pieces[p], e = p + 1 < pieces.size() ? pieces[p + 1] : truth.size();
    const double d0 = rv.values(s) - truth(s);
    CHECK(std::abs(d0 - std::round(d0)) <= 1e-10);
    for (Index i = s; i < e; ++i) CHECK(std::abs(rv.values(i) - truth(i) - d0) <= 1e-10);
  }
}

}  // namespace

TEST_CASE("tv_norm by direct summation") {
  CHECK(tv_norm((VectorXd(3) << 0, 1, 3).finished(), 1) == doctest::Approx(3.0));
  CHECK(tv_norm((VectorXd(4) << 0, 1, 2, 3).finished(), 3) == doctest::Approx(0.0));
  const VectorXd v = (VectorXd(5) << 0, 0, 1, 0, 0).finished();
  double oracle = 0;
  for (Index i = 1; i + 1 < 5; ++i) oracle += std::abs(v(i + 1) - 2 * v(i) + v(i - 1));
  CHECK(tv_norm(v, 2) == doctest::Approx(oracle));
  CHECK(oracle == doctest::Approx(4.0));
  CHECK_THROWS_AS(tv_norm((VectorXd(2) << 0, 1).finished(), 2), ParameterError);
}

TEST_CASE("unwrap_next against brute force") {
  CHECK(unwrap_next(1.1, 0.2) == doctest::Approx(1.2));
  CHECK(unwrap_next(0.9, 0.2) == doctest::Approx(1.2));
  CHECK(unwrap_next(-2.4, 0.5) == doctest::Approx(brute_unwrap(-2.4, 0.5)));
  CHECK(unwrap_next(-2.4, 0.5) == doctest::Approx(-2.5));
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> t(-3.4, 3.4), u(0, 1);
  for (int k = 0; k < 1000; ++k) {
    const double a = t(rng), b = u(rng);
    const double v = unwrap_next(a, b);
    CHECK(v == doctest::Approx(brute_unwrap(a, b)).epsilon(1e-14));
    CHECK(std::abs(v - a) <= 0.5);
    CHECK(frac1(v) == doctest::Approx(b).epsilon(1e-12));
  }
}

TEST_CASE("recover_vector on simple sequences") {
  const VectorXd lin = (VectorXd(6) << 0, .3, .6, .9, 1.2, 1.5).finished();
  const RecoveredVector a = recover_vector(frac_of(lin), kPi / 2);
  CHECK((a.values - lin).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(a.breaks == IndexList{0});

  const RecoveredVector c = recover_vector(VectorXd::Constant(9, 0.25), kPi / 2);
  CHECK((c.values.array() - 0.25).abs().maxCoeff() == 0.0);
  CHECK(c.breaks == IndexList{0});
}

TEST_CASE("recover_vector keeps the observations and smoothness invariants") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> d;
  for (int trial = 0; trial < 20; ++trial) {
    const Index n = 300;
    VectorXd truth(n);
    // First differences stay below 1/2: (2|a| + 3|b|) / n < 0.42.
    std::uniform_real_distribution<double> ua(-40, 40), ub(-15, 15);
    const double a = ua(rng), b = ub(rng), c = d(rng);
    for (Index i = 0; i < n; ++i) {
      const double t = static_cast<double>(i) / n;
      truth(i) = a * t * t + b * std::sin(3 * t + c);
    }
    const VectorXd u = frac_of(truth);
    const RecoveredVector rv = recover_vector(u, kPi / 2);
    for (Index i = 0; i < n; ++i) CHECK(std::abs(wrap_half(rv.values(i) - u(i))) <= 1e-12);
    check_integer_offsets(rv, truth, {0});
  }
}

TEST_CASE("recover_vector on a fio1d row") {
  const Index n = 256;
  const GridSpec g(n);
  const Index row = g.xIndex(0.5);
  VectorXd truth(n);
  for (Index j = 0; j < n; ++j) truth(j) = fio1d_phase(row, j, g);

  // Default tau: the kink is carried through by third differences.
  const RecoveredVector smooth = recover_vector(frac_of(truth), kPi / 2);
  CHECK(smooth.breaks == IndexList{0});
  check_integer_offsets(smooth, truth, {0});

  // Break detection needs tau below the second-difference jump 2 c(x) ~ 0.25.
  const RecoveredVector rv = recover_vector(frac_of(truth), 0.2);
  REQUIRE(rv.breaks.size() == 2);
  CHECK(rv.breaks[0] == 0);
  CHECK(std::abs(rv.breaks[1] - g.zeroColumn()) <= 1);
  // The slope after the kink is 0.625 cycles per sample, indistinguishable
  // from -0.375 once the piece restarts, so the second piece may differ from
  // the truth by an integer affine function of the index.
  const VectorXd d = rv.values - truth;
  for (Index i = 0; i < rv.breaks[1]; ++i) CHECK(std::abs(d(i) - std::round(d(0))) <= 1e-10);
  for (Index i = rv.breaks[1]; i < n; ++i) CHECK(std::abs(d(i) - std::round(d(i))) <= 1e-10);
  for (Index i = rv.breaks[1] + 2; i < n; ++i) CHECK(std::abs(d(i) - 2 * d(i - 1) + d(i - 2)) <= 1e-10);
}

TEST_CASE("recover_vector reports a planted break") {
  const Index n = 256;
  const GridSpec g(n);
  SyntheticParams sp;
  sp.jump = 0.35;
  const SyntheticPhase ph = synthetic_phase(SyntheticKind::PlantedBreaks, sp, g);
  VectorXd truth(n);
  for (Index j = 0; j < n; ++j) truth(j) = ph(40, j);
  const RecoveredVector rv = recover_vector(frac_of(truth), 0.2);
  CHECK(std::find(rv.breaks.begin(), rv.breaks.end(), n / 2) != rv.breaks.end());
  check_integer_offsets(rv, truth, rv.breaks);
}

TEST_CASE("recover_phase_samples on x xi agrees at intersections and up to one constant") {
  const Index n = 128;
  MatrixXd truth(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) truth(i, j) = (static_cast<double>(i) / n) * j;
  const PhaseObserver obs = observer_from_matrix(truth.unaryExpr(&frac1));
  IndexList rows, cols;
  for (Index k = 0; k < 8; ++k) {
    rows.push_back(k * 16 + 3);
    cols.push_back(k * 15 + 5);
  }
  const RecoveredPhase rp = recover_phase_samples(obs, rows, cols, kPi / 2);
  for (std::size_t a = 0; a < rp.rowIdx.size(); ++a)
    for (std::size_t b = 0; b < rp.colIdx.size(); ++b)
      CHECK(std::abs(rp.rowSamples(a, rp.colIdx[b]) - rp.colSamples(rp.rowIdx[a], b)) <= 1e-12);
  const double c0 = rp.rowSamples(0, 0) - truth(rp.rowIdx[0], 0);
  for (std::size_t a = 0; a < rp.rowIdx.size(); ++a)
    for (Index j = 0; j < n; ++j) CHECK(std::abs(rp.rowSamples(a, j) - truth(rp.rowIdx[a], j) - c0) <= 1e-12);
}

TEST_CASE("recover_phase_samples on a constant phase") {
  const PhaseObserver obs = observer_from_matrix(MatrixXd::Constant(64, 64, 0.3));
  const RecoveredPhase rp = recover_phase_samples(obs, {5, 9}, {7, 30}, kPi / 2);
  CHECK((rp.rowSamples.array() - 0.3).abs().maxCoeff() <= 1e-15);
  CHECK((rp.colSamples.array() - 0.3).abs().maxCoeff() <= 1e-15);
  CHECK(rp.rowBreaks == IndexList{0});
  CHECK(rp.colBreaks == IndexList{0});
}

TEST_CASE("recover_phase_samples on the fio1d phase finds the column break") {
  const Index n = 1024;
  const GridSpec g(n);
  MatrixXd arg(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) arg(i, j) = std::arg(fio1d_entry(i, j, g)) / kTwoPi;
  std::mt19937_64 rng(1);
  const IndexList R = sample_indices(rng, n, 100), C = sample_indices(rng, n, 100);
  // tau below the kink size so the break is detected; recovery itself is exact either way.
  const RecoveredPhase rp = recover_phase_samples(observer_from_matrix(arg.unaryExpr(&frac1)), R, C, 0.2);
  CHECK(rp.rowBreaks == IndexList{0});
  REQUIRE(rp.colBreaks.size() == 2);
  CHECK(std::abs(rp.colBreaks[1] - g.zeroColumn()) <= 1);
  const RealFactor f = restricted_svd_from_samples<double>(rp.rowSamples, rp.colSamples, rp.rowIdx, rp.colIdx, 20);
  const Kernel k = make_kernel("fio1d", n);
  RealFactor one;
  one.u = MatrixXd::Ones(n, 1);
  one.v = MatrixXd::Ones(n, 1);
  const FactorErrors fe = factor_errors(make_access(k, Scenario::Entry, {}), one, f, 256, 9);
  CHECK(fe.phase <= 1e-9);
}

TEST_CASE("recover_phase_samples flags inconsistent observations") {
  MatrixXd arg(32, 32);
  for (Index i = 0; i < 32; ++i)
    for (Index j = 0; j < 32; ++j) arg(i, j) = frac1(0.01 * i * j);
  PhaseObserver obs = observer_from_matrix(arg);
  auto col = obs.col;
  obs.col = [col](Index j) {
    VectorXd c = col(j);
    if (j == 7) c(20) = frac1(c(20) + 0.2);
    return c;
  };
  CHECK_THROWS_AS(recover_phase_samples(obs, {0, 20}, {0, 7}, kPi / 2), ConsistencyError);
}

TEST_CASE("amplitude recovery") {
  RecoveryOptions ro;
  {
    const Kernel k = make_kernel("fio1d", 1024);
    const KernelAccess acc = make_access(k, Scenario::Entry, ro);
    const RealFactor amp = recover_amplitude(acc, ro);
    RealFactor zero;
    zero.u = MatrixXd::Zero(1024, 1);
    zero.v = MatrixXd::Zero(1024, 1);
    CHECK(factor_errors(acc, amp, zero, 256, 4).amplitude <= 1e-12);
  }
  {
    const KernelAccess acc = KernelAccess::entry(64, [](const IndexList& I, const IndexList& J) {
      return MatrixXcd::Zero(static_cast<Index>(I.size()), static_cast<Index>(J.size())).eval();
    });
    RecoveryOptions small = ro;
    small.rank = 4;
    const RealFactor amp = recover_amplitude(acc, small);
    CHECK(amp.dense().cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("hankel amplitude recovery") {
  RecoveryOptions ro;
  const Kernel k = make_kernel("hankel", 1024);
  const KernelAccess acc = make_access(k, Scenario::Entry, ro);
  const RealFactor amp = recover_amplitude(acc, ro);
  RealFactor zero;
  zero.u = MatrixXd::Zero(1024, 1);
  zero.v = MatrixXd::Zero(1024, 1);
  CHECK(factor_errors(acc, amp, zero, 256, 4).amplitude <= 1e-8);
}

TEST_CASE("phase factor from the entry oracle and from matvecs") {
  RecoveryOptions ro;
  const Kernel k = make_kernel("fio1d", 1024);
  const KernelAccess e = make_access(k, Scenario::Entry, ro);
  const KernelAccess m = make_access(k, Scenario::Matvec, ro);
  const RecoveredKernel a = recover_kernel(e, ro);
  const RecoveredKernel b = recover_kernel(m, ro);
  CHECK(factor_errors(e, a.amp, a.phase, 256, 7).kernel <= 1e-8);
  CHECK((a.phase.dense() - b.phase.dense()).norm() / a.phase.dense().norm() <= 1e-10);
}

TEST_CASE("pure Fourier kernel gives a numerically rank-1 phase") {
  const Index n = 256;
  const GridSpec g(n);
  const KernelAccess acc = KernelAccess::entry(n, [g](const IndexList& I, const IndexList& J) {
    MatrixXcd b(static_cast<Index>(I.size()), static_cast<Index>(J.size()));
    for (std::size_t a = 0; a < I.size(); ++a)
      for (std::size_t c = 0; c < J.size(); ++c) b(a, c) = expi_cycles(g.x(I[a]) * g.xi(J[c]));
    return b;
  });
  RecoveryOptions ro;
  ro.rank = 10;
  const RecoveredKernel rk = recover_kernel(acc, ro);
  Eigen::JacobiSVD<MatrixXd> svd(rk.phase.dense());
  const VectorXd s = svd.singularValues();
  CHECK(s(1) / s(0) <= 1e-10);
}

TEST_CASE("synthetic smooth low-rank phase is recovered to 1e-8") {
  const Index n = 512;
  SyntheticParams sp;
  sp.rank = 3;
  const Kernel k = make_kernel("synthetic:smooth-low-rank", n, sp);
  RecoveryOptions ro;
  const KernelAccess acc = make_access(k, Scenario::Entry, ro);
  const RecoveredKernel rk = recover_kernel(acc, ro);
  CHECK(factor_errors(acc, rk.amp, rk.phase, 256, 3).kernel <= 1e-8);
}

TEST_CASE("degenerate amplitude is reported with the entry") {
  const Index n = 128;
  const KernelAccess acc = KernelAccess::entry(n, [](const IndexList& I, const IndexList& J) {
    MatrixXcd b(static_cast<Index>(I.size()), static_cast<Index>(J.size()));
    for (std::size_t a = 0; a < I.size(); ++a)
      for (std::size_t c = 0; c < J.size(); ++c) b(a, c) = I[a] == J[c] ? cd(0, 0) : cd(1, 0);
    return b;
  });
  RealFactor amp;
  amp.u = MatrixXd::Ones(n, 1);
  amp.v = MatrixXd::Ones(n, 1);
  amp.u(0, 0) = 0.0;
  RecoveryOptions ro;
  ro.rank = 4;
  CHECK_THROWS_AS(recover_phase_factor(acc, amp, ro), DegenerateAmplitudeError);
}
