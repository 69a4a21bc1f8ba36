#include "oit/nufft.hpp"

#include <limits>
#include <memory>
#include <random>
#include <thread>

namespace oit {

namespace {

using Point = Eigen::Vector2d;

double cross(const Point& o, const Point& a, const Point& b) {
  return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
}

// Convex hull vertices (monotone chain); widths along any direction only
// depend on these.
std::vector<Point> convex_hull(const MatrixXd& pts) {
  std::vector<Point> p(static_cast<std::size_t>(pts.rows()));
  for (Index i = 0; i < pts.rows(); ++i) p[static_cast<std::size_t>(i)] = pts.row(i).transpose();
  std::sort(p.begin(), p.end(), [](const Point& a, const Point& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  });
  if (p.size() < 3) return p;
  std::vector<Point> h(2 * p.size());
  std::size_t k = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    while (k >= 2 && cross(h[k - 2], h[k - 1], p[i]) <= 0) --k;
    h[k++] = p[i];
  }
  for (std::size_t i = p.size() - 1, t = k + 1; i > 0; --i) {
    while (k >= t && cross(h[k - 2], h[k - 1], p[i - 1]) <= 0) --k;
    h[k++] = p[i - 1];
  }
  h.resize(k - 1);
  return h;
}

double half_width(const std::vector<Point>& hull, const Point& dir) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const Point& v : hull) {
    const double s = v.dot(dir);
    lo = std::min(lo, s);
    hi = std::max(hi, s);
  }
  return 0.5 * (hi - lo);
}

struct BasisCost {
  const std::vector<Point>& ph;
  const std::vector<Point>& qh;
  double kappa;

  // Returns the cost of B = [b1 b2] and writes its dual basis.
  double operator()(double t1, double t2, Eigen::Matrix2d* bOut = nullptr) const {
    Eigen::Matrix2d b;
    b << std::cos(t1), std::cos(t2), std::sin(t1), std::sin(t2);
    const double det = b.determinant();
    if (std::abs(det) < 1e-3) return std::numeric_limits<double>::infinity();
    const Eigen::Matrix2d c = b.inverse().transpose();
    double cost = 1.0;
    for (int d = 0; d < 2; ++d)
      cost *= half_width(qh, b.col(d)) * half_width(ph, c.col(d)) + kappa;
    if (bOut) *bOut = b;
    return cost;
  }
};

// Complex residual amp .* e^{2 pi i (Phi - p q^T)} restricted to a column range.
MatrixSampler<cd> residual_sampler(const RealFactor& phase, const RealFactor& amp,
                                   const MatrixXd& p, const MatrixXd& q, Index colStart) {
  MatrixSampler<cd> s;
  s.nrows = phase.rows();
  s.ncols = q.rows();
  s.sample = [&phase, &amp, &p, &q, colStart](const IndexList& I, const IndexList& J) {
    IndexList Jg(J.size());
    for (std::size_t b = 0; b < J.size(); ++b) Jg[b] = J[b] + colStart;
    const MatrixXd ph = phase.block(I, Jg);
    const MatrixXd am = amp.block(I, Jg);
    MatrixXcd out(static_cast<Index>(I.size()), static_cast<Index>(J.size()));
    for (std::size_t a = 0; a < I.size(); ++a)
      for (std::size_t b = 0; b < J.size(); ++b) {
        const Index ia = static_cast<Index>(a), jb = static_cast<Index>(b);
        const double lift = p.row(I[a]).dot(q.row(J[b]));
        out(ia, jb) = am(ia, jb) * expi_cycles(ph(ia, jb) - lift);
      }
    return out;
  };
  return s;
}

NufftPiece decide_piece(const RealFactor& phase, const RealFactor& amp, Index colStart,
                        Index colLen, Index r, Index rEps, Index q, double eps,
                        std::uint64_t seed, bool centered) {
  NufftPiece piece;
  piece.colStart = colStart;
  piece.colLen = colLen;
  piece.centered = centered;
  RealFactor sub = phase;
  sub.v = phase.v.middleRows(colStart, colLen);
  // Entries of Phi carry absolute rounding errors of about u max|Phi| cycles, so
  // residual pivots below 2 pi u max|Phi| (times a safety factor) are noise.
  const double phiMax = sub.scaledU().rowwise().norm().maxCoeff() * sub.v.rowwise().norm().maxCoeff();
  piece.threshold = std::max(eps, 8.0 * kTwoPi * std::numeric_limits<double>::epsilon() * phiMax);
  if (centered) {
    // (I - 11^T/m) U V^T (I - 11^T/n): drops terms depending on x or xi alone.
    sub.u = sub.u.rowwise() - sub.u.colwise().mean();
    sub.v = sub.v.rowwise() - sub.v.colwise().mean();
  }
  TruncatedFactors tf = truncated_svd_of_factored(sub, r);
  piece.p = std::move(tf.p);
  piece.q = std::move(tf.q);
  if (r == 2) reoptimize_lifting_basis(piece.p, piece.q, eps);

  const MatrixSampler<cd> z = residual_sampler(phase, amp, piece.p, piece.q, colStart);

  std::mt19937_64 rng(seed);
  const Index k = std::min(r * q, colLen);
  const IndexList J = sample_indices(rng, colLen, k);
  const PivotedQR<cd> qr = pivoted_qr<cd>(z.colsOf(J));
  const Index diag = std::min(qr.r.rows(), qr.r.cols());
  piece.pivots.resize(diag);
  for (Index t = 0; t < diag; ++t) piece.pivots(t) = std::abs(qr.r(t, t));
  const double r11 = diag > 0 ? piece.pivots(0) : 0.0;
  piece.pivotCount = 0;
  for (Index t = 0; t < diag; ++t)
    if (piece.pivots(t) > r11 * piece.threshold) ++piece.pivotCount;
  piece.applicable = piece.pivotCount < k;

  if (piece.applicable) {
    SvdOptions opt;
    opt.rank = std::min({rEps, colLen, phase.rows()});
    opt.oversampling = q;
    opt.seed = seed;
    piece.residual = trim(randomized_svd(z, opt), piece.threshold);
  }
  return piece;
}

}  // namespace

void reoptimize_lifting_basis(MatrixXd& p, MatrixXd& q, double tol) {
  if (p.cols() != 2 || q.cols() != 2) throw ParameterError("reoptimize_lifting_basis: rank must be 2");
  const std::vector<Point> ph = convex_hull(p), qh = convex_hull(q);
  const double lw = std::log(1.0 / std::clamp(tol, 1e-15, 1e-1)) + 2.0;
  const BasisCost cost{ph, qh, std::sqrt(2.0 * lw) / kPi};

  // With B = [b(t1) b(t2)], the columns of B^{-T} are the unit normals of b(t2)
  // and b(t1) over |det B|, so every half width depends on one angle only and
  // can be tabulated before the search over angle pairs.
  auto dir = [](double t) { return Point(std::cos(t), std::sin(t)); };
  auto search = [&](const std::vector<double>& a1, const std::vector<double>& a2, double& best, double& b1,
                    double& b2) {
    auto tab = [&](const std::vector<double>& a, std::vector<double>& wq, std::vector<double>& wp) {
      for (double t : a) {
        wq.push_back(half_width(qh, dir(t)));
        wp.push_back(half_width(ph, dir(t - kPi / 2)));
      }
    };
    std::vector<double> q1, p1, q2, p2;
    tab(a1, q1, p1);
    tab(a2, q2, p2);
    for (std::size_t i = 0; i < a1.size(); ++i)
      for (std::size_t j = 0; j < a2.size(); ++j) {
        const double det = std::abs(std::sin(a2[j] - a1[i]));
        if (det < 1e-3) continue;
        const double c = (q1[i] * p2[j] / det + cost.kappa) * (q2[j] * p1[i] / det + cost.kappa);
        if (c < best) {
          best = c;
          b1 = a1[i];
          b2 = a2[j];
        }
      }
  };

  // Starting point: the identity basis.
  double best = cost(0.0, kPi / 2), b1 = 0.0, b2 = kPi / 2;
  const int steps = 180;
  std::vector<double> coarse;
  for (int a = 0; a < steps; ++a) coarse.push_back(kPi * a / steps);
  search(coarse, coarse, best, b1, b2);
  const double step = kPi / steps;
  std::vector<double> r1, r2;
  for (int a = -50; a <= 50; ++a) {
    r1.push_back(b1 + step * a / 50.0);
    r2.push_back(b2 + step * a / 50.0);
  }
  search(r1, r2, best, b1, b2);
  Eigen::Matrix2d basis;
  cost(b1, b2, &basis);
  p = p * basis.inverse().transpose();
  q = q * basis;
}

NufftDecision decide_nufft_split(const RealFactor& phase, const RealFactor& amp,
                                 const IndexList& splits, Index r, Index rEps, Index q, double eps,
                                 std::uint64_t seed) {
  phase.validate();
  amp.validate();
  if (amp.rows() != phase.rows() || amp.cols() != phase.cols())
    throw ParameterError("decide_nufft: amplitude and phase sizes differ");
  if (r < 1) throw ParameterError("decide_nufft: r must be positive");
  if (r >= phase.rank())
    throw ParameterError("decide_nufft: r = " + std::to_string(r) +
                         " must be below the phase rank " + std::to_string(phase.rank()));
  if (r > 2) throw NotImplementedError("decide_nufft: lifting dimension above 2 is not implemented");
  if (rEps < 1 || q < 1) throw ParameterError("decide_nufft: r_eps and q must be positive");
  if (!(eps > 0.0 && eps < 1.0)) throw ParameterError("decide_nufft: eps must lie in (0, 1)");
  if (splits.empty() || splits.front() != 0 || !std::is_sorted(splits.begin(), splits.end()) ||
      splits.back() >= phase.cols())
    throw ParameterError("decide_nufft: splits must start at 0 and increase within the columns");

  NufftDecision d;
  d.r = r;
  d.rEps = rEps;
  d.oversampling = q;
  d.eps = eps;
  d.seed = seed;
  d.rows = phase.rows();
  d.cols = phase.cols();
  d.applicable = true;
  for (std::size_t s = 0; s < splits.size(); ++s) {
    const Index start = splits[s];
    const Index end = s + 1 < splits.size() ? splits[s + 1] : phase.cols();
    if (end <= start) throw ParameterError("decide_nufft: empty column piece");
    NufftPiece piece = decide_piece(phase, amp, start, end - start, r, rEps, q, eps, seed + s, false);
    if (!piece.applicable)
      piece = decide_piece(phase, amp, start, end - start, r, rEps, q, eps, seed + s, true);
    d.pieces.push_back(std::move(piece));
    d.applicable = d.applicable && d.pieces.back().applicable;
  }
  return d;
}

NufftDecision decide_nufft(const RealFactor& phase, const RealFactor& amp, Index r, Index rEps,
                           Index q, double eps, std::uint64_t seed) {
  return decide_nufft_split(phase, amp, {0}, r, rEps, q, eps, seed);
}

NufftEvaluator::NufftEvaluator(const NufftDecision& decision, double tol)
    : rows_(decision.rows), cols_(decision.cols) {
  if (!decision.applicable) throw MisuseError("nufft_evaluate: the decision was y = 0");
  for (const NufftPiece& piece : decision.pieces) {
    Part part;
    part.colStart = piece.colStart;
    part.colLen = piece.colLen;
    part.plan = std::make_shared<const NufftPlan>(piece.q, piece.p, tol);
    part.u = piece.residual.scaledU();
    part.v = piece.residual.v;
    parts_.push_back(std::move(part));
  }
}

Index NufftEvaluator::gridPoints() const {
  Index best = 0;
  for (const Part& part : parts_) {
    Index prod = 1;
    for (Index g : part.plan->gridSize()) prod *= g;
    best = std::max(best, prod);
  }
  return best;
}

VectorXcd NufftEvaluator::apply(const VectorXcd& f, int threads) const {
  if (f.size() != cols_) throw ParameterError("nufft_evaluate: input length does not match the kernel");
  struct Job {
    const Part* part;
    Index k;
  };
  std::vector<Job> jobs;
  for (const Part& part : parts_)
    for (Index k = 0; k < part.u.cols(); ++k) jobs.push_back({&part, k});
  std::vector<VectorXcd> results(jobs.size());
  auto run = [&](std::size_t j) {
    const Part& part = *jobs[j].part;
    const Index k = jobs[j].k;
    const VectorXcd c = part.v.col(k).conjugate().cwiseProduct(f.segment(part.colStart, part.colLen));
    results[j] = part.u.col(k).cwiseProduct(part.plan->execute(c));
  };
  const std::size_t nt = std::min<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), jobs.size());
  if (nt <= 1) {
    for (std::size_t j = 0; j < jobs.size(); ++j) run(j);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < nt; ++t)
      pool.emplace_back([&, t] {
        for (std::size_t j = t; j < jobs.size(); j += nt) run(j);
      });
    for (auto& th : pool) th.join();
  }
  VectorXcd g = VectorXcd::Zero(rows_);
  for (const VectorXcd& r : results) g += r;
  return g;
}

VectorXcd nufft_evaluate(const NufftDecision& decision, const VectorXcd& f, double tol, int threads) {
  return NufftEvaluator(decision, tol).apply(f, threads);
}

}  // namespace oit
