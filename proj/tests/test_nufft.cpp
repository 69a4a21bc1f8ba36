#include "oit/kernels.hpp"
#include "oit/nufft.hpp"
#include "oit/pipeline.hpp"
#include "test_util.hpp"

#include <doctest.h>
#include <fftw3.h>

#include <Eigen/QR>
#include <Eigen/SVD>

using namespace oit;
using oit::test::naive_type3;
using oit::test::random_vector;

namespace {

double rel(const VectorXcd& a, const VectorXcd& b) { return (a - b).norm() / b.norm(); }

MatrixXd uniform_points(Index n, double lo, double hi, std::uint64_t seed, int dim = 1) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  MatrixXd p(n, dim);
  for (Index i = 0; i < n; ++i)
    for (int d = 0; d < dim; ++d) p(i, d) = u(rng);
  return p;
}

RealFactor ones_factor(Index n) {
  RealFactor f;
  f.u = MatrixXd::Ones(n, 1);
  f.v = MatrixXd::Ones(n, 1);
  return f;
}

// Phase factors padded with a zero term so that r = rank - 1 stays valid.
RealFactor dft_phase(Index n) {
  const GridSpec g(n);
  RealFactor f;
  f.u = MatrixXd::Zero(n, 2);
  f.v = MatrixXd::Zero(n, 2);
  for (Index i = 0; i < n; ++i) f.u(i, 0) = g.x(i);
  for (Index j = 0; j < n; ++j) f.v(j, 0) = g.xi(j);
  return f;
}

RealFactor fio_phase(Index n) {
  const GridSpec g(n);
  RealFactor f;
  f.u = MatrixXd::Zero(n, 3);
  f.v = MatrixXd::Zero(n, 3);
  for (Index i = 0; i < n; ++i) f.u.row(i) << g.x(i), fio_c(g.x(i)), 0.0;
  for (Index j = 0; j < n; ++j) f.v.row(j) << g.xi(j), std::abs(g.xi(j)), 0.0;
  return f;
}

// Numerical rank of a dense matrix by pivoted QR, |R_tt| > |R_11| tol.
Index qr_rank(const MatrixXcd& m, double tol) {
  Eigen::ColPivHouseholderQR<MatrixXcd> qr(m);
  const auto& r = qr.matrixQR();
  Index k = 0;
  for (Index t = 0; t < std::min(r.rows(), r.cols()); ++t)
    if (std::abs(r(t, t)) > std::abs(r(0, 0)) * tol) ++k;
  return k;
}

VectorXcd fft_oracle(const VectorXcd& g) {
  const int n = static_cast<int>(g.size());
  VectorXcd in = g, out(n);
  fftw_plan p = fftw_plan_dft_1d(n, reinterpret_cast<fftw_complex*>(in.data()),
                                 reinterpret_cast<fftw_complex*>(out.data()), FFTW_BACKWARD, FFTW_ESTIMATE);
  fftw_execute(p);
  fftw_destroy_plan(p);
  for (int i = 1; i < n; i += 2) out(i) = -out(i);
  return out;
}

}  // namespace

TEST_CASE("type-3 NUFFT: one source, one target") {
  const MatrixXd s = (MatrixXd(1, 1) << 0.5).finished(), t = (MatrixXd(1, 1) << 0.5).finished();
  const VectorXcd c = (VectorXcd(1) << cd(2.0, -1.0)).finished();
  const VectorXcd out = NufftPlan(s, t, 1e-12).execute(c);
  CHECK(std::abs(out(0) - c(0) * cd(0, 1)) <= 1e-12);
}

TEST_CASE("type-3 NUFFT on uniform points is the DFT") {
  const Index n = 256;
  const GridSpec g(n);
  MatrixXd src(n, 1), tgt(n, 1);
  for (Index j = 0; j < n; ++j) src(j, 0) = g.xi(j);
  for (Index i = 0; i < n; ++i) tgt(i, 0) = g.x(i);
  const VectorXcd c = random_vector(n, 4);
  CHECK(rel(NufftPlan(src, tgt, 1e-14).execute(c), fft_oracle(c)) <= 1e-12);
}

TEST_CASE("type-3 NUFFT against direct summation, n = m = 4096") {
  const MatrixXd src = uniform_points(4096, -2048, 2048, 1), tgt = uniform_points(4096, 0, 1, 2);
  const VectorXcd c = random_vector(4096, 3);
  const VectorXcd ref = naive_type3(src, tgt, c);
  CHECK(rel(NufftPlan(src, tgt, 1e-12).execute(c), ref) <= 1e-11);
  CHECK(rel(nufft_direct(src, tgt, c), ref) <= 1e-12);
}

TEST_CASE("type-3 NUFFT accuracy contract over tolerances, 1D and 2D") {
  for (int dim = 1; dim <= 2; ++dim)
    for (double tol : {1e-3, 1e-6, 1e-9, 1e-12}) {
      const MatrixXd src = uniform_points(300, -30, 50, 10 + dim, dim), tgt = uniform_points(200, -3, 1, 20 + dim, dim);
      const VectorXcd c = random_vector(300, 5);
      const double e = rel(NufftPlan(src, tgt, tol).execute(c), naive_type3(src, tgt, c));
      CHECK(e <= 10 * tol);
    }
}

TEST_CASE("type-3 NUFFT adjoint consistency") {
  const MatrixXd a = uniform_points(150, -40, 40, 7, 2), b = uniform_points(170, -1, 1, 8, 2);
  const VectorXcd c = random_vector(150, 1), d = random_vector(170, 2);
  // <d, F c> = <F^* d, c>, with F^* the plan with swapped points and conjugated data.
  const VectorXcd fc = NufftPlan(a, b, 1e-12).execute(c);
  const VectorXcd fd = NufftPlan(b, a, 1e-12).execute(d.conjugate()).conjugate();
  CHECK(std::abs(d.dot(fc) - fd.dot(c)) / (d.norm() * fc.norm()) <= 1e-11);
}

TEST_CASE("type-3 NUFFT plan errors") {
  const MatrixXd p = MatrixXd::Zero(4, 1);
  CHECK_THROWS_AS(NufftPlan(p, p, 1e-16), PlanningError);
  CHECK_THROWS_AS(NufftPlan(p, p, 0.5), PlanningError);
  const MatrixXd p3 = MatrixXd::Zero(4, 3);
  CHECK_THROWS_AS(NufftPlan(p3, p3, 1e-6), NotImplementedError);
  const NufftPlan plan(uniform_points(10, -5, 5, 1), uniform_points(12, 0, 1, 2), 1e-8);
  CHECK(plan.dim() == 1);
  CHECK(plan.numSources() == 10);
  CHECK(plan.numTargets() == 12);
  CHECK(plan.oversampling() >= 1.25);
}

TEST_CASE("decide_nufft on the exact rank-1 phase") {
  const Index n = 512;
  const NufftDecision d = decide_nufft(dft_phase(n), ones_factor(n), 1, 8, 5, 1e-12, 0);
  CHECK(d.applicable);
  REQUIRE(d.pieces.size() == 1);
  // The residual is the constant all-ones matrix.
  const ComplexFactor& r = d.pieces[0].residual;
  CHECK(r.rank() == 1);
  const MatrixXcd res = r.dense();
  CHECK((res - MatrixXcd::Ones(n, n)).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("decide_nufft on the fio1d phase, with dense oracles") {
  const Index n = 512;
  const RealFactor phase = fio_phase(n);
  Eigen::JacobiSVD<MatrixXd> svd(phase.dense());
  CHECK(svd.singularValues()(2) / svd.singularValues()(0) <= 1e-12);

  const NufftDecision two = decide_nufft(phase, ones_factor(n), 2, 8, 5, 1e-12, 0);
  CHECK(two.applicable);
  CHECK(two.r == 2);

  // Residual kernel after the best rank-1 lifting: large numerical rank.
  const auto t1 = truncated_svd_of_factored(phase, 1);
  const MatrixXd resid = phase.dense() - t1.p * t1.q.transpose();
  const MatrixXcd k = resid.unaryExpr([](double v) { return expi_cycles(v); });
  CHECK(qr_rank(k, 1e-12) > 40);
  const NufftDecision one = decide_nufft(phase, ones_factor(n), 1, 8, 5, 1e-12, 0);
  CHECK_FALSE(one.applicable);
  CHECK(one.pieces[0].residual.rank() == 0);
}

TEST_CASE("decide_nufft residual approximates the lifted kernel") {
  const Index n = 512;
  const RealFactor phase = fio_phase(n);
  const NufftDecision d = decide_nufft(phase, ones_factor(n), 2, 8, 5, 1e-12, 0);
  REQUIRE(d.applicable);
  const NufftPiece& p = d.pieces[0];
  std::mt19937_64 rng(1);
  const IndexList I = sample_indices(rng, n, 32), J = sample_indices(rng, n, 32);
  MatrixXcd exact(32, 32), approx = p.residual.block(I, J);
  for (Index a = 0; a < 32; ++a)
    for (Index b = 0; b < 32; ++b)
      exact(a, b) = expi_cycles(phase.entry(I[a], J[b]) - p.p.row(I[a]).dot(p.q.row(J[b])));
  CHECK((approx - exact).norm() / exact.norm() <= 10 * 1e-12 * std::sqrt(n));
}

TEST_CASE("decide_nufft parameter errors") {
  const Index n = 64;
  const RealFactor phase = fio_phase(n);
  CHECK_THROWS_AS(decide_nufft(phase, ones_factor(n), 3, 8, 5, 1e-12, 0), ParameterError);
  RealFactor wide = phase;
  wide.u.conservativeResize(n, 5);
  wide.v.conservativeResize(n, 5);
  wide.u.rightCols(2).setZero();
  wide.v.rightCols(2).setZero();
  CHECK_THROWS_AS(decide_nufft(wide, ones_factor(n), 3, 8, 5, 1e-12, 0), NotImplementedError);
  CHECK_THROWS_AS(decide_nufft(phase, ones_factor(n), 2, 8, 5, 0.0, 0), ParameterError);
  const NufftDecision no = decide_nufft(phase, ones_factor(n), 1, 8, 5, 1e-12, 0);
  CHECK_THROWS_AS(NufftEvaluator(no, 1e-12), MisuseError);
}

TEST_CASE("NUFFT evaluation of the pure Fourier kernel") {
  const Index n = 1024;
  const NufftDecision d = decide_nufft(dft_phase(n), ones_factor(n), 1, 8, 5, 1e-12, 0);
  REQUIRE(d.applicable);
  const VectorXcd f = random_vector(n, 9);
  CHECK(rel(nufft_evaluate(d, f, 1e-12), fft_oracle(f)) <= 1e-11);
}

TEST_CASE("lifted and split NUFFT paths on the fio1d kernel, N = 4096") {
  const Index n = 4096;
  const GridSpec g(n);
  const Kernel k = make_kernel("fio1d", n);
  const KernelAccess acc = make_access(k, Scenario::Entry, {});
  const VectorXcd f = random_vector(n, 6);
  const NufftDecision d = decide_nufft(fio_phase(n), ones_factor(n), 2, 8, 5, 1e-12, 0);
  REQUIRE(d.applicable);
  const VectorXcd lifted = nufft_evaluate(d, f, 1e-12);
  CHECK(relative_error(lifted, acc, f, 256, 1) <= 1e-9);
  const VectorXcd split = split_nufft_apply(g, f, 1e-12);
  CHECK(relative_error(split, acc, f, 256, 1) <= 1e-9);
  CHECK(rel(split, lifted) <= 1e-9);
}

TEST_CASE("basis reoptimization keeps P Q^T and shrinks the grid") {
  const Index n = 1024;
  const auto t = truncated_svd_of_factored(fio_phase(n), 2);
  MatrixXd p = t.p, q = t.q;
  reoptimize_lifting_basis(p, q, 1e-12);
  CHECK((p * q.transpose() - t.p * t.q.transpose()).norm() / (t.p * t.q.transpose()).norm() <= 1e-12);
  auto grid = [](const MatrixXd& a, const MatrixXd& b) {
    const auto s = NufftPlan(b, a, 1e-12).gridSize();
    return s[0] * s[1];
  };
  CHECK(grid(p, q) <= grid(t.p, t.q));
}
