#include "oit/butterfly.hpp"
#include "oit/kernels.hpp"
#include "test_util.hpp"

#include <doctest.h>
#include <fftw3.h>

#include <sstream>

using namespace oit;
using oit::test::random_vector;

namespace {

RealFactor dft_phase(Index n) {
  const GridSpec g(n);
  RealFactor f;
  f.u.resize(n, 1);
  f.v.resize(n, 1);
  for (Index i = 0; i < n; ++i) f.u(i, 0) = g.x(i);
  for (Index j = 0; j < n; ++j) f.v(j, 0) = g.xi(j);
  return f;
}

RealFactor fio_phase(Index n) {
  const GridSpec g(n);
  RealFactor f;
  f.u.resize(n, 2);
  f.v.resize(n, 2);
  for (Index i = 0; i < n; ++i) f.u.row(i) << g.x(i), fio_c(g.x(i));
  for (Index j = 0; j < n; ++j) f.v.row(j) << g.xi(j), std::abs(g.xi(j));
  return f;
}

// sum_j e^{2 pi i (i/N)(j - N/2)} g_j = (-1)^i * unnormalised backward FFT of g.
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

MatrixXcd dense_kernel(const RealFactor& phase) {
  return phase.dense().unaryExpr([](double v) { return expi_cycles(v); });
}

double rel(const VectorXcd& a, const VectorXcd& b) { return (a - b).norm() / b.norm(); }

}  // namespace

TEST_CASE("dyadic trees") {
  const ButterflyTrees t = build_trees(16, 1);
  CHECK(t.x.depth == 4);
  for (int l = 0; l <= 4; ++l) CHECK(t.x.nodeCount(l) == (Index(1) << l));
  CHECK(t.x.node(0, 0).start == 0);
  CHECK(t.x.node(0, 0).len == 16);
  for (int l = 0; l < 4; ++l)
    for (Index k = 0; k < t.x.nodeCount(l); ++k) {
      const Range p = t.x.node(l, k), a = t.x.node(l + 1, 2 * k), b = t.x.node(l + 1, 2 * k + 1);
      CHECK(a.start == p.start);
      CHECK(b.start == a.end());
      CHECK(b.end() == p.end());
    }
  CHECK(build_trees(1024, 16).x.depth == 6);
  CHECK(build_trees(512, 1).x.depth % 2 == 0);
  CHECK_THROWS_AS(build_trees(24, 5), ParameterError);
}

TEST_CASE("butterfly on x xi equals the DFT") {
  const Index n = 1024;
  const VectorXcd g = random_vector(n, 1);
  ButterflyOptions o;
  o.rEps = 10;
  CHECK(rel(butterfly_apply(dft_phase(n), g, o), fft_oracle(g)) <= 1e-8);
  CHECK(butterfly_apply(dft_phase(n), VectorXcd::Zero(n), o).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("factorization matches the on-the-fly butterfly") {
  const Index n = 1024;
  ButterflyOptions o;
  o.rEps = 8;
  const RealFactor phase = fio_phase(n);
  const ButterflyFactorization bf = butterfly_factorize(phase, o);
  for (int k = 0; k < 10; ++k) {
    const VectorXcd g = random_vector(n, 100 + k);
    const VectorXcd a = bf.apply(g), b = butterfly_apply(phase, g, o);
    CHECK(rel(a, b) <= 1e-12);
  }
  // Basis vectors give columns of the on-the-fly transform.
  for (Index j : {0, 511, 512, 1023}) {
    VectorXcd e = VectorXcd::Zero(n);
    e(j) = 1.0;
    CHECK(rel(bf.apply(e), butterfly_apply(phase, e, o)) <= 1e-12);
  }
}

TEST_CASE("assembled butterfly against the dense kernel") {
  const Index n = 256;
  ButterflyOptions o;
  o.rEps = 8;
  const RealFactor phase = fio_phase(n);
  const ButterflyFactorization bf = butterfly_factorize(phase, o);
  MatrixXcd assembled(n, n);
  for (Index j = 0; j < n; ++j) {
    VectorXcd e = VectorXcd::Zero(n);
    e(j) = 1.0;
    assembled.col(j) = bf.apply(e);
  }
  const MatrixXcd k = dense_kernel(phase);
  CHECK((assembled - k).norm() / k.norm() <= 1e-5);
}

TEST_CASE("error decreases with r_eps") {
  const Index n = 1024;
  const RealFactor phase = fio_phase(n);
  const MatrixXcd k = dense_kernel(phase);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const VectorXcd g = random_vector(n, 200 + seed);
    const VectorXcd ref = k * g;
    double prev = INFINITY;
    for (Index r : {6, 8, 10, 12}) {
      ButterflyOptions o;
      o.rEps = r;
      const double e = rel(butterfly_apply(phase, g, o), ref);
      CHECK(e < prev);
      prev = e;
    }
  }
}

TEST_CASE("storage grows like N log N") {
  ButterflyOptions o;
  o.rEps = 8;
  std::size_t prev = 0;
  for (Index n : {1024, 4096, 16384}) {
    const std::size_t s = butterfly_factorize(fio_phase(n), o).storedEntries();
    if (prev) CHECK(static_cast<double>(s) / static_cast<double>(prev) <= 4.8);
    prev = s;
  }
}

TEST_CASE("threaded application is bitwise identical") {
  const Index n = 4096;
  ButterflyOptions o;
  o.rEps = 8;
  const ButterflyFactorization bf = butterfly_factorize(fio_phase(n), o);
  const VectorXcd g = random_vector(n, 5);
  CHECK(bf.apply(g, 1) == bf.apply(g, 4));
  ButterflyOptions ot = o;
  ot.threads = 4;
  CHECK(butterfly_factorize(fio_phase(n), ot).apply(g) == bf.apply(g));
}

TEST_CASE("serialization round trip") {
  const Index n = 256;
  ButterflyOptions o;
  o.rEps = 6;
  o.seed = 17;
  const ButterflyFactorization bf = butterfly_factorize(fio_phase(n), o);
  std::stringstream ss;
  bf.save(ss);
  const std::string bytes = ss.str();
  CHECK(bytes.substr(0, 4) == "IBFM");
  const ButterflyFactorization back = ButterflyFactorization::load(ss);
  CHECK(back.size() == n);
  CHECK(back.rankEps() == 6);
  CHECK(back.seed() == 17);
  CHECK(back.fingerprint() == bf.fingerprint());
  const VectorXcd g = random_vector(n, 3);
  CHECK(back.apply(g) == bf.apply(g));
  std::stringstream bad("XXXX");
  CHECK_THROWS_AS(ButterflyFactorization::load(bad), InvalidInputError);
  std::stringstream cut(bytes.substr(0, bytes.size() / 2));
  CHECK_THROWS_AS(ButterflyFactorization::load(cut), InvalidInputError);
}

TEST_CASE("injected fault breaks the DFT check") {
  const Index n = 256;
  ButterflyOptions o;
  o.rEps = 10;
  o.injectFault = true;
  const VectorXcd g = random_vector(n, 1);
  CHECK(rel(butterfly_apply(dft_phase(n), g, o), fft_oracle(g)) > 1e-2);
}

TEST_CASE("direct_apply") {
  const Index n = 64;
  const KernelAccess ones = KernelAccess::entry(n, [](const IndexList& I, const IndexList& J) {
    return MatrixXcd::Ones(static_cast<Index>(I.size()), static_cast<Index>(J.size())).eval();
  });
  const VectorXcd g = random_vector(n, 2), h = random_vector(n, 3);
  CHECK((direct_apply(ones, g) - VectorXcd::Constant(n, g.sum())).cwiseAbs().maxCoeff() <= 1e-12);
  const KernelAccess k = make_access(make_kernel("fio1d", n), Scenario::Entry, {});
  CHECK(rel(direct_apply(k, g + h), direct_apply(k, g) + direct_apply(k, h)) <= 1e-12);
}

TEST_CASE("parameter errors") {
  ButterflyOptions o;
  o.rEps = 1;
  CHECK_THROWS_AS(butterfly_factorize(dft_phase(64), o), ParameterError);
  o.rEps = 8;
  CHECK_THROWS_AS(butterfly_apply(dft_phase(64), VectorXcd::Zero(32), o), ParameterError);
}
