#include "oit/verify.hpp"

#include "oit/butterfly.hpp"
#include "oit/interp.hpp"
#include "oit/kernels.hpp"
#include "oit/nufft.hpp"
#include "oit/phase_recovery.hpp"

#include <Eigen/SVD>

#include <cstdio>
#include <functional>
#include <random>

namespace oit {

namespace {

VerifyCheck make_check(const std::string& suite, const std::string& name, double value, double bound,
                       std::string detail = {}) {
  VerifyCheck c;
  c.suite = suite;
  c.name = name;
  c.value = value;
  c.bound = bound;
  c.passed = value <= bound;
  c.detail = std::move(detail);
  return c;
}

VectorXcd random_vector(Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d;
  VectorXcd v(n);
  for (Index i = 0; i < n; ++i) v(i) = cd(d(rng), d(rng));
  return v;
}

// Largest circular distance between recovered samples and the observed arguments.
double frac_mismatch(const RecoveredPhase& rp, const MatrixXcd& k) {
  double worst = 0.0;
  for (std::size_t a = 0; a < rp.rowIdx.size(); ++a)
    for (Index j = 0; j < k.cols(); ++j)
      worst = std::max(worst, std::abs(wrap_half(rp.rowSamples(static_cast<Index>(a), j) -
                                                 std::arg(k(rp.rowIdx[a], j)) / kTwoPi)));
  for (std::size_t b = 0; b < rp.colIdx.size(); ++b)
    for (Index i = 0; i < k.rows(); ++i)
      worst = std::max(worst, std::abs(wrap_half(rp.colSamples(i, static_cast<Index>(b)) -
                                                 std::arg(k(i, rp.colIdx[b])) / kTwoPi)));
  return worst;
}

// Deviation of (recovered - truth) from one integer constant per piece.
double integer_offset_deviation(const RecoveredVector& rv, const VectorXd& truth) {
  double worst = 0.0;
  const Index n = truth.size();
  for (std::size_t p = 0; p < rv.breaks.size(); ++p) {
    const Index s = rv.breaks[p];
    const Index e = p + 1 < rv.breaks.size() ? rv.breaks[p + 1] : n;
    const double d0 = rv.values(s) - truth(s);
    worst = std::max(worst, std::abs(d0 - std::round(d0)));
    for (Index i = s; i < e; ++i) worst = std::max(worst, std::abs(rv.values(i) - truth(i) - d0));
  }
  return worst;
}

void suite_recovery(const VerifyOptions& opt, std::vector<VerifyCheck>& out) {
  RecoveryOptions ro;
  ro.seed = opt.seed;
  for (const std::string id : {"fio1d", "hankel"}) {
    const Index n = 512;
    const Kernel k = make_kernel(id, n);
    const KernelAccess acc = make_access(k, Scenario::Entry, ro);
    const RealFactor amp = recover_amplitude(acc, ro);
    RecoveredPhase rp;
    (void)recover_phase_factor(acc, amp, ro, &rp);
    out.push_back(make_check("recovery", "frac-consistency " + id + " N=512", frac_mismatch(rp, k.dense()), 1e-10));
  }

  // 20 smooth synthetic phases, N = 256: rows and columns unwrap to the truth
  // up to one integer per piece.
  {
    const GridSpec g(256);
    double worst = 0.0;
    for (std::uint64_t s = 0; s < 20; ++s) {
      SyntheticParams sp;
      sp.rank = 3;
      sp.seed = opt.seed + s;
      const SyntheticPhase ph = synthetic_phase(SyntheticKind::SmoothLowRank, sp, g);
      const MatrixXd truth = ph.truth.dense();
      for (Index line : {Index(0), Index(77), Index(200)}) {
        const VectorXd row = truth.row(line).transpose(), col = truth.col(line);
        worst = std::max(worst, integer_offset_deviation(recover_vector(row.unaryExpr(&frac1), ro.tau), row));
        worst = std::max(worst, integer_offset_deviation(recover_vector(col.unaryExpr(&frac1), ro.tau), col));
      }
    }
    out.push_back(make_check("recovery", "piecewise integer offset on 20 smooth phases", worst, 1e-10));
  }

  // Scenario 1 and Scenario 2 sample the same rows and columns under one seed.
  {
    const Index n = 256;
    const Kernel k = make_kernel("fio1d", n);
    const KernelAccess e = make_access(k, Scenario::Entry, ro);
    const KernelAccess m = make_access(k, Scenario::Matvec, ro);
    const RealFactor amp = recover_amplitude(e, ro);
    const MatrixXd pe = recover_phase_factor(e, amp, ro).dense();
    const MatrixXd pm = recover_phase_factor(m, amp, ro).dense();
    out.push_back(make_check("recovery", "scenario 1 vs scenario 2 phase factor", (pe - pm).norm() / pe.norm(), 1e-10));
  }
}

void suite_interp(const VerifyOptions& opt, std::vector<VerifyCheck>& out) {
  const Index n = 512;
  const GridSpec g(n);
  RealFactor phase;
  phase.u.resize(n, 2);
  phase.v.resize(n, 2);
  for (Index i = 0; i < n; ++i) {
    phase.u(i, 0) = g.x(i);
    phase.u(i, 1) = fio_c(g.x(i));
  }
  for (Index j = 0; j < n; ++j) {
    phase.v(j, 0) = g.xi(j);
    phase.v(j, 1) = std::abs(g.xi(j));
  }
  std::mt19937_64 rng(opt.seed);
  double nodeErr = 0.0;
  for (int trial = 0; trial < 40; ++trial) {
    const int level = static_cast<int>(rng() % 9);
    const Index la = n >> level, lb = Index(1) << level;
    const Range A{static_cast<Index>(rng() % static_cast<std::uint64_t>(n / la)) * la, la};
    const Range B{static_cast<Index>(rng() % static_cast<std::uint64_t>(n / lb)) * lb, lb};
    const InterpSide side = trial % 2 ? InterpSide::X : InterpSide::Xi;
    const InterpFactor f = interp_lowrank(phase, A, B, 8, side);
    IndexList I, J;
    for (Index i = A.start; i < A.end(); ++i) I.push_back(i);
    for (Index j = B.start; j < B.end(); ++j) J.push_back(j);
    const MatrixXd ph = phase.block(I, J);
    const MatrixXcd approx = f.u * f.v.adjoint();
    for (Index node : f.nodes) {
      double num = 0.0, den = 0.0;
      if (side == InterpSide::Xi) {
        for (Index a = 0; a < la; ++a) {
          num += std::norm(approx(a, node - B.start) - expi_cycles(ph(a, node - B.start)));
          den += 1.0;
        }
      } else {
        for (Index b = 0; b < lb; ++b) {
          num += std::norm(approx(node - A.start, b) - expi_cycles(ph(node - A.start, b)));
          den += 1.0;
        }
      }
      nodeErr = std::max(nodeErr, std::sqrt(num / den));
    }
  }
  out.push_back(make_check("interp", "node exactness on 40 blocks", nodeErr, 1e-12));

  double pou = 0.0;
  for (Index len : {2, 3, 7, 16, 64, 257, 512})
    for (Index r : {2, 4, 6, 8, 12}) {
      const IndexList nodes = interpolation_nodes(Range{0, len}, r);
      if (nodes.size() < 2) continue;
      for (Index q = 0; q < len; ++q)
        pou = std::max(pou, std::abs(lagrange_row(nodes, static_cast<double>(q)).sum() - 1.0));
    }
  out.push_back(make_check("interp", "partition of unity", pou, 1e-12));
}

void suite_butterfly(const VerifyOptions& opt, std::vector<VerifyCheck>& out) {
  // log2 N even keeps the leaf at one point; N = 512 would double it.
  const Index n = 256;
  const GridSpec g(n);
  RealFactor dft;
  dft.u.resize(n, 1);
  dft.v.resize(n, 1);
  for (Index i = 0; i < n; ++i) dft.u(i, 0) = g.x(i);
  for (Index j = 0; j < n; ++j) dft.v(j, 0) = g.xi(j);
  ButterflyOptions bo;
  bo.rEps = 10;
  bo.seed = opt.seed;
  bo.injectFault = opt.injectFault;
  const VectorXcd f = random_vector(n, opt.seed + 11);
  const VectorXcd ref = (dft.dense().unaryExpr([](double v) { return expi_cycles(v); })) * f;
  const ButterflyFactorization bf = butterfly_factorize(dft, bo);
  const VectorXcd got = bf.apply(f);
  out.push_back(make_check("butterfly", "butterfly recursion: DFT degeneracy (x xi phase, N=256, r_eps 10)",
                           (got - ref).norm() / ref.norm(), 1e-8));

  const VectorXcd onTheFly = butterfly_apply(dft, f, bo);
  out.push_back(make_check("butterfly", "factored apply equals on-the-fly apply",
                           (onTheFly - got).norm() / got.norm(), 1e-12));

  // Every complementary block of the fio1d kernel has numerical rank <= 10 at 1e-8.
  const Index m = 512;
  const MatrixXcd K = make_kernel("fio1d", m).dense();
  const Index rEps = 10;
  Index worst = 0;
  for (Index la = m; la >= 1; la /= 2) {
    const Index lb = m / la;
    for (Index a = 0; a < m; a += la)
      for (Index b = 0; b < m; b += lb) {
        Eigen::JacobiSVD<MatrixXcd> svd(K.block(a, b, la, lb));
        const VectorXd& s = svd.singularValues();
        Index r = 0;
        for (Index t = 0; t < s.size(); ++t)
          if (s(t) > 1e-8 * s(0)) ++r;
        worst = std::max(worst, r);
      }
  }
  out.push_back(make_check("butterfly", "complementary low-rank block ranks (fio1d N=512, cutoff 1e-8)",
                           static_cast<double>(worst), static_cast<double>(rEps)));
}

void suite_nufft(const VerifyOptions& opt, std::vector<VerifyCheck>& out) {
  std::mt19937_64 rng(opt.seed + 21);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  for (int dim = 1; dim <= 2; ++dim) {
    double worstRatio = 0.0;
    std::string worstCase;
    for (int trial = 0; trial < 100; ++trial) {
      const Index ns = 20 + static_cast<Index>(rng() % 300), nt = 20 + static_cast<Index>(rng() % 300);
      // Space-bandwidth products up to ~1e3 in 1D and ~1e2 per dimension in 2D.
      const double tol = std::pow(10.0, -2.0 - 10.0 * u01(rng));
      const double span = dim == 1 ? 1.5 : 1.0;
      const double X = std::pow(10.0, span * u01(rng)), S = std::pow(10.0, span * u01(rng));
      MatrixXd src(ns, dim), tgt(nt, dim);
      for (Index i = 0; i < ns; ++i)
        for (int d = 0; d < dim; ++d) src(i, d) = X * (2.0 * u01(rng) - 1.0) + 5.0 * d;
      for (Index i = 0; i < nt; ++i)
        for (int d = 0; d < dim; ++d) tgt(i, d) = S * (2.0 * u01(rng) - 1.0) - 2.0;
      VectorXcd c(ns);
      for (Index i = 0; i < ns; ++i) c(i) = cd(u01(rng) - 0.5, u01(rng) - 0.5);
      const VectorXcd ref = nufft_direct(src, tgt, c);
      const VectorXcd got = NufftPlan(src, tgt, tol).execute(c);
      const double ratio = (got - ref).norm() / ref.norm() / tol;
      if (ratio > worstRatio) {
        worstRatio = ratio;
        char buf[64];
        std::snprintf(buf, sizeof buf, "worst at tol %.2e", tol);
        worstCase = buf;
      }
    }
    out.push_back(make_check("nufft", "accuracy contract, 100 random " + std::to_string(dim) + "D plans (error / tol)",
                             worstRatio, 10.0, worstCase));
  }

  // Decision examples on exact factors at N = 512.
  const Index n = 512;
  const GridSpec g(n);
  RealFactor one;
  one.u = MatrixXd::Ones(n, 1);
  one.v = MatrixXd::Ones(n, 1);
  RealFactor fio;
  fio.u.resize(n, 3);
  fio.v.resize(n, 3);
  for (Index i = 0; i < n; ++i) fio.u.row(i) << g.x(i), fio_c(g.x(i)), 0.0;
  for (Index j = 0; j < n; ++j) fio.v.row(j) << g.xi(j), std::abs(g.xi(j)), 0.0;
  RealFactor lin = fio;
  lin.u.col(1).setZero();
  const bool y1 = decide_nufft(lin, one, 1, 8, 5, 1e-12, opt.seed).applicable;
  const bool y2 = decide_nufft(fio, one, 2, 8, 5, 1e-12, opt.seed).applicable;
  const bool y3 = decide_nufft(fio, one, 1, 8, 5, 1e-12, opt.seed).applicable;
  out.push_back(make_check("nufft", "decision y=1 on x xi at r=1", y1 ? 0.0 : 1.0, 0.0));
  out.push_back(make_check("nufft", "decision y=1 on fio1d phase at r=2", y2 ? 0.0 : 1.0, 0.0));
  out.push_back(make_check("nufft", "decision y=0 on fio1d phase at r=1", y3 ? 1.0 : 0.0, 0.0));
}

}  // namespace

const std::vector<std::string>& verify_suites() {
  static const std::vector<std::string> s{"recovery", "interp", "butterfly", "nufft"};
  return s;
}

std::vector<VerifyCheck> run_verify(const VerifyOptions& opt) {
  for (const std::string& s : opt.suites)
    if (std::find(verify_suites().begin(), verify_suites().end(), s) == verify_suites().end())
      throw ParameterError("unknown verify suite '" + s + "'");
  auto wanted = [&](const std::string& s) {
    return opt.suites.empty() || std::find(opt.suites.begin(), opt.suites.end(), s) != opt.suites.end();
  };
  std::vector<VerifyCheck> out;
  if (wanted("recovery")) suite_recovery(opt, out);
  if (wanted("interp")) suite_interp(opt, out);
  if (wanted("butterfly")) suite_butterfly(opt, out);
  if (wanted("nufft")) suite_nufft(opt, out);
  return out;
}

}  // namespace oit
