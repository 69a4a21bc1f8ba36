#include "oit/kernels.hpp"
#include "oit/nufft.hpp"
#include "oit/pipeline.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <Eigen/SVD>

#include <cmath>

using namespace oit;
using oit::test::random_vector;

namespace {

Index svd_rank(const MatrixXd& m, double cutoff) {
  Eigen::JacobiSVD<MatrixXd> svd(m);
  const VectorXd& s = svd.singularValues();
  Index k = 0;
  for (Index t = 0; t < s.size(); ++t)
    if (s(t) > cutoff * s(0)) ++k;
  return k;
}

// J_n(x) = (1/pi) int_0^pi cos(n t - x sin t) dt; the trapezoid rule on the
// periodic extension converges geometrically once the node count exceeds x + n.
double bessel_j_integral(Index n, double x) {
  const int m = 8192;
  long double s = 0;
  for (int k = 0; k < m; ++k) {
    const long double t = 2.0L * 3.14159265358979323846264338327950288L * k / m;
    s += std::cos(static_cast<long double>(n) * t - static_cast<long double>(x) * std::sin(t));
  }
  return static_cast<double>(s / m);
}

}  // namespace

TEST_CASE("grid points and index round trip") {
  const GridSpec g(64);
  CHECK(g.x(0) == 0.0);
  CHECK(g.xi(0) == -32.0);
  CHECK(g.xi(g.zeroColumn()) == 0.0);
  for (Index i = 0; i < 64; ++i) {
    CHECK(g.xIndex(g.x(i)) == i);
    CHECK(g.xiIndex(g.xi(i)) == i);
    if (i > 0) {
      CHECK(g.x(i) > g.x(i - 1));
      CHECK(g.xi(i) == g.xi(i - 1) + 1);
    }
  }
  CHECK(g.x(63) < 1.0);
  CHECK_THROWS_AS(GridSpec(0), ParameterError);
  CHECK_THROWS_AS(GridSpec(7), ParameterError);
}

TEST_CASE("fio1d entries") {
  const Index n = 256;
  const GridSpec g(n);
  for (Index i = 0; i < n; i += 17) CHECK(std::abs(fio1d_entry(i, g.zeroColumn(), g) - cd(1, 0)) == 0.0);
  // x = 0: c(0) = 1/8, so xi = 4 gives half a cycle.
  CHECK(std::abs(fio1d_entry(0, g.xiIndex(4.0), g) - cd(-1, 0)) <= 1e-14);
  CHECK(std::abs(fio1d_phase(0, g.xiIndex(4.0), g) - 0.5) <= 1e-15);
  double dev = 0;
  for (Index i = 0; i < n; i += 3)
    for (Index j = 0; j < n; j += 5) {
      dev = std::max(dev, std::abs(std::abs(fio1d_entry(i, j, g)) - 1.0));
      dev = std::max(dev, std::abs(std::abs(fio_smooth_entry(i, j, g)) - 1.0));
    }
  CHECK(dev <= 1e-14);
  CHECK_THROWS_AS(fio1d_entry(n, 0, g), ParameterError);
  CHECK_THROWS_AS(fio1d_entry(0, -1, g), ParameterError);
}

TEST_CASE("fio-smooth phase is exactly rank 1") {
  const Index n = 128;
  const GridSpec g(n);
  MatrixXd phi(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) phi(i, j) = fio_smooth_phase(i, j, g);
  CHECK(svd_rank(phi, 1e-12) == 1);
  for (Index i = 0; i < n; ++i) CHECK(fio_smooth_entry(i, g.zeroColumn(), g) == cd(1, 0));

  const Kernel k = make_kernel("fio-smooth", n);
  REQUIRE(k.exactPhase);
  RealFactor ones;
  ones.u = MatrixXd::Ones(n, 1);
  ones.v = MatrixXd::Ones(n, 1);
  RealFactor padded = *k.exactPhase;
  const Index r0 = padded.rank();
  padded.u.conservativeResize(n, r0 + 1);
  padded.v.conservativeResize(n, r0 + 1);
  padded.u.rightCols(1).setZero();
  padded.v.rightCols(1).setZero();
  padded.sigma.resize(0);
  CHECK(decide_nufft(padded, ones, 1, 8, 5, 1e-12, 0).applicable);
}

TEST_CASE("Hankel modulus against the leading asymptotic") {
  const double x = 1024.0;
  const double lead = std::sqrt(2.0 / (kPi * x));
  CHECK(std::abs(std::abs(hankel1(0, x)) - lead) / lead <= 1e-3);
  CHECK(std::abs(hankel_point(0, 1024) - 1024.0) == 0.0);
  CHECK(std::abs(hankel_point(3, 1024) - (1024.0 + 2 * kPi)) <= 1e-12);
}

TEST_CASE("Hankel Wronskian and three-term recurrence") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> ux(20.0, 5000.0);
  double worstW = 0, worstR = 0;
  for (int t = 0; t < 60; ++t) {
    const double x = ux(rng);
    const Index nmax = std::max<Index>(2, static_cast<Index>(0.95 * x));
    std::vector<double> j(nmax + 1), y(nmax + 1);
    bessel_jy_sequence(x, nmax, j.data(), y.data());
    for (Index m : {Index(0), Index(1), nmax / 3, nmax / 2, nmax - 1}) {
      const double w = j[m + 1] * y[m] - j[m] * y[m + 1];
      worstW = std::max(worstW, std::abs(w - 2.0 / (kPi * x)) / (2.0 / (kPi * x)));
      if (m >= 1) {
        const cd hm = hankel1(m, x), hp = hankel1(m + 1, x), hmm = hankel1(m - 1, x);
        worstR = std::max(worstR, std::abs(hp - (2.0 * m / x) * hm + hmm) / std::abs(hp));
      }
    }
  }
  CHECK(worstW <= 1e-10);
  CHECK(worstR <= 1e-9);
}

TEST_CASE("order-0 Hankel against an independent evaluation") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> ux(20.0, 3000.0);
  for (int t = 0; t < 10; ++t) {
    const double x = ux(rng);
    const cd h = hankel1(0, x);
    CHECK(std::abs(h.real() - std::cyl_bessel_j(0.0, x)) <= 1e-9 * std::abs(h));
    CHECK(std::abs(h.imag() - std::cyl_neumann(0.0, x)) <= 1e-9 * std::abs(h));
    CHECK(std::abs(h.real() - bessel_j_integral(0, x)) <= 1e-9 * std::abs(h));
  }
}

TEST_CASE("high-order Bessel J against the integral representation") {
  for (auto [m, x] : std::vector<std::pair<Index, double>>{{10, 1030.0}, {300, 1100.0}, {900, 1024.0}, {1000, 1200.0}}) {
    const cd h = hankel1(m, x);
    CHECK(std::abs(h.real() - bessel_j_integral(m, x)) <= 1e-9 * std::abs(h));
  }
}

TEST_CASE("hankel_entry layout and Debye phase") {
  const Index n = 256;
  for (auto [i, j] : std::vector<std::pair<Index, Index>>{{0, 0}, {5, 100}, {255, 255}}) {
    const cd e = hankel_entry(i, j, n);
    CHECK(std::abs(e - hankel1(j, hankel_point(i, n))) <= 1e-15 * std::abs(e));
    const double arg = std::arg(e) / (2 * kPi);
    CHECK(std::abs(wrap_half(arg - hankel_debye_phase(j, hankel_point(i, n)))) <= 1e-3);
  }
}

TEST_CASE("split phase pieces") {
  const Index n = 128;
  const GridSpec g(n);
  const SplitPhase sp = split_phase_pieces(g);
  CHECK(sp.splitCol == g.zeroColumn());
  CHECK(svd_rank(sp.negative.dense(), 1e-12) == 1);
  CHECK(svd_rank(sp.positive.dense(), 1e-12) == 1);
  double worst = 0;
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) {
      const double piece = j < sp.splitCol ? sp.negative.entry(i, j) : sp.positive.entry(i, j - sp.splitCol);
      worst = std::max(worst, std::abs(expi_cycles(piece) - fio1d_entry(i, j, g)));
    }
  CHECK(worst <= 1e-12);
}

TEST_CASE("split NUFFT against direct summation, N = 4096") {
  const Index n = 4096;
  const GridSpec g(n);
  const VectorXcd f = random_vector(n, 21);
  const Kernel k = make_kernel("fio1d", n);
  const KernelAccess acc = make_access(k, Scenario::Entry, {});
  CHECK(relative_error(split_nufft_apply(g, f, 1e-12), acc, f, 256, 0) <= 1e-10);
}

TEST_CASE("synthetic phases") {
  const Index n = 256;
  const GridSpec g(n);
  CHECK(parse_synthetic_kind("separable") == SyntheticKind::Separable);
  CHECK(parse_synthetic_kind("smooth-low-rank") == SyntheticKind::SmoothLowRank);
  CHECK(parse_synthetic_kind("planted-breaks") == SyntheticKind::PlantedBreaks);
  CHECK_THROWS_AS(parse_synthetic_kind("bogus"), ParameterError);
  CHECK(std::string(synthetic_kind_name(SyntheticKind::PlantedBreaks)) == "planted-breaks");
  CHECK(is_known_kernel("synthetic:separable"));
  CHECK_FALSE(is_known_kernel("synthetic:bogus"));
  CHECK_FALSE(is_known_kernel("bessel"));
  CHECK_THROWS(make_kernel("bogus", n));

  SyntheticParams p;
  p.seed = 4;
  const SyntheticPhase a = synthetic_phase(SyntheticKind::SmoothLowRank, p, g);
  const SyntheticPhase b = synthetic_phase(SyntheticKind::SmoothLowRank, p, g);
  CHECK(a.truth.dense() == b.truth.dense());
  CHECK(svd_rank(a.truth.dense(), 1e-12) == 3);

  // Separable: recovery matches the truth up to one integer constant (the
  // anchor at (0,0) fixes only the fractional part), which leaves rank 1.
  {
    const SyntheticPhase sep = synthetic_phase(SyntheticKind::Separable, p, g);
    const Kernel k = make_kernel("synthetic:separable", n, p);
    const KernelAccess acc = make_access(k, Scenario::Entry, {});
    const RecoveredKernel rk = recover_kernel(acc, {});
    const MatrixXd diff = rk.phase.dense() - sep.truth.dense();
    const double c = std::round(diff(0, 0));
    CHECK((diff.array() - c).abs().maxCoeff() <= 1e-8);
    CHECK(svd_rank(rk.phase.dense().array() - c, 1e-10) == 1);
  }
  // Planted break at N/2: the unwrapped row starts a new piece there.
  {
    const SyntheticPhase pb = synthetic_phase(SyntheticKind::PlantedBreaks, p, g);
    CHECK(pb.colBreaks == IndexList{0, n / 2});
    VectorXd u(n);
    for (Index j = 0; j < n; ++j) u(j) = frac1(pb(3, j));
    const RecoveredVector rv = recover_vector(u, 0.2);
    CHECK(rv.breaks == IndexList{0, n / 2});
  }
}

TEST_CASE("kernel oracles agree across access scenarios") {
  const Index n = 128;
  const Kernel k = make_kernel("fio1d", n);
  const MatrixXcd dense = k.dense();
  const VectorXcd f = random_vector(n, 2);
  const KernelAccess e = make_access(k, Scenario::Entry, {}), m = make_access(k, Scenario::Matvec, {});
  CHECK((m.apply(f) - dense * f).norm() <= 1e-12 * (dense * f).norm());
  CHECK((m.applyTranspose(f) - dense.transpose() * f).norm() <= 1e-12 * (dense * f).norm());
  CHECK((e.row(5).transpose() - dense.row(5)).norm() == 0.0);
  const KernelAccess s = make_access(k, Scenario::Samples, {});
  const SampleSet& ss = s.sampleSet();
  for (std::size_t a = 0; a < ss.rowIdx.size(); ++a)
    for (Index j = 0; j < n; j += 9)
      CHECK(std::abs(expi_cycles(ss.phaseRows(a, j)) - dense(ss.rowIdx[a], j)) <= 1e-13);
}
