#include "oit/lowrank.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>

#include <limits>
#include <random>

namespace oit {

namespace {

template <class Scalar>
void check_finite(const Mat<Scalar>& m, const char* what) {
  if (!m.allFinite()) throw InvalidInputError(std::string(what) + ": non-finite input");
}

IndexList iota_list(Index n) {
  IndexList out(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = i;
  return out;
}

IndexList take_sorted(const IndexList& perm, Index r, const IndexList* map = nullptr) {
  IndexList out;
  for (Index t = 0; t < r && t < static_cast<Index>(perm.size()); ++t) {
    Index p = perm[static_cast<std::size_t>(t)];
    out.push_back(map ? (*map)[static_cast<std::size_t>(p)] : p);
  }
  std::sort(out.begin(), out.end());
  return out;
}

template <class Scalar>
Mat<Scalar> select_rows(const Mat<Scalar>& m, const IndexList& I) {
  Mat<Scalar> out(static_cast<Index>(I.size()), m.cols());
  for (std::size_t a = 0; a < I.size(); ++a) out.row(static_cast<Index>(a)) = m.row(I[a]);
  return out;
}

template <class Scalar>
Mat<Scalar> select_cols(const Mat<Scalar>& m, const IndexList& J) {
  Mat<Scalar> out(m.rows(), static_cast<Index>(J.size()));
  for (std::size_t b = 0; b < J.size(); ++b) out.col(static_cast<Index>(b)) = m.col(J[b]);
  return out;
}

// Orthonormal basis of the sampled columns, cut at the numerical rank of the
// sample. Directions spanned only by rounding noise tend to concentrate on a
// few rows and are amplified by the pseudo-inverses below, so they are dropped.
template <class Scalar>
Mat<Scalar> sample_basis(const Mat<Scalar>& sampled, Index r) {
  const PivotedQR<Scalar> qr = pivoted_qr<Scalar>(sampled);
  const Index kmax = std::min<Index>(r, qr.r.rows());
  const double r11 = std::abs(qr.r(0, 0));
  Index k = 0;
  while (k < kmax && std::abs(qr.r(k, k)) > 1e-14 * r11) ++k;
  return qr.q.leftCols(k);
}

// Middle matrix, SVD and assembly shared by both sampling variants. The
// result has exactly r terms; terms beyond the sampled rank are zero.
template <class Scalar>
LowRankFactor<Scalar> assemble(const Mat<Scalar>& qcol, const Mat<Scalar>& qrow,
                               const IndexList& I, const IndexList& J,
                               const Mat<Scalar>& kij, Index r) {
  if (qcol.cols() == 0 || qrow.cols() == 0) {
    LowRankFactor<Scalar> zero;
    zero.u = Mat<Scalar>::Zero(qcol.rows(), r);
    zero.v = Mat<Scalar>::Zero(qrow.rows(), r);
    zero.sigma = VectorXd::Zero(r);
    return zero;
  }
  Mat<Scalar> a = select_rows(qcol, I);
  Mat<Scalar> b = select_rows(qrow, J).adjoint();
  double ca = 0.0, cb = 0.0;
  Mat<Scalar> mid = pinv(a, 1e-13, &ca) * kij * pinv(b, 1e-13, &cb);
  LowRankFactor<Scalar> f;
  f.u = Mat<Scalar>::Zero(qcol.rows(), r);
  f.v = Mat<Scalar>::Zero(qrow.rows(), r);
  f.sigma = VectorXd::Zero(r);
  f.illConditioned = ca > 1e14 || cb > 1e14;
  Eigen::JacobiSVD<Mat<Scalar>> svd(mid, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Index k = std::min<Index>(r, svd.singularValues().size());
  f.u.leftCols(k) = qcol * svd.matrixU().leftCols(k);
  f.v.leftCols(k) = qrow * svd.matrixV().leftCols(k);
  f.sigma.head(k) = svd.singularValues().head(k);
  return f;
}

}  // namespace

template <class Scalar>
Mat<Scalar> LowRankFactor<Scalar>::scaledU() const {
  if (!hasSigma()) return u;
  return u * sigma.template cast<Scalar>().asDiagonal();
}

template <class Scalar>
Scalar LowRankFactor<Scalar>::entry(Index i, Index j) const {
  Scalar s(0);
  for (Index k = 0; k < rank(); ++k) {
    Scalar t = u(i, k) * Eigen::numext::conj(v(j, k));
    if (hasSigma()) t *= sigma(k);
    s += t;
  }
  return s;
}

template <class Scalar>
Mat<Scalar> LowRankFactor<Scalar>::block(const IndexList& I, const IndexList& J) const {
  for (Index i : I)
    if (i < 0 || i >= rows()) throw ParameterError("row index out of range");
  for (Index j : J)
    if (j < 0 || j >= cols()) throw ParameterError("column index out of range");
  Mat<Scalar> us = select_rows(scaledU(), I);
  Mat<Scalar> vs = select_rows(v, J);
  return us * vs.adjoint();
}

template <class Scalar>
Mat<Scalar> LowRankFactor<Scalar>::dense() const {
  return scaledU() * v.adjoint();
}

template <class Scalar>
void LowRankFactor<Scalar>::validate() const {
  if (u.cols() != v.cols()) throw ParameterError("factor rank mismatch between u and v");
  if (hasSigma()) {
    if (sigma.size() != u.cols()) throw ParameterError("sigma length differs from rank");
    for (Index k = 0; k < sigma.size(); ++k) {
      if (!(sigma(k) >= 0.0)) throw ParameterError("negative singular value");
      if (k > 0 && sigma(k) > sigma(k - 1)) throw ParameterError("sigma not nonincreasing");
    }
  }
  if (!u.allFinite() || !v.allFinite()) throw InvalidInputError("non-finite factor");
}

template <class Scalar>
LowRankFactor<Scalar> trim(const LowRankFactor<Scalar>& f, double relTol) {
  if (!f.hasSigma() || f.rank() <= 1) return f;
  Index keep = 1;
  const double cut = relTol * f.sigma(0);
  while (keep < f.rank() && f.sigma(keep) > cut) ++keep;
  LowRankFactor<Scalar> out;
  out.u = f.u.leftCols(keep);
  out.v = f.v.leftCols(keep);
  out.sigma = f.sigma.head(keep);
  out.illConditioned = f.illConditioned;
  return out;
}

template <class Scalar>
Mat<Scalar> MatrixSampler<Scalar>::rowsOf(const IndexList& I) const {
  return sample(I, iota_list(ncols));
}

template <class Scalar>
Mat<Scalar> MatrixSampler<Scalar>::colsOf(const IndexList& J) const {
  return sample(iota_list(nrows), J);
}

template <class Scalar>
MatrixSampler<Scalar> dense_sampler(const Mat<Scalar>& m) {
  MatrixSampler<Scalar> s;
  s.nrows = m.rows();
  s.ncols = m.cols();
  s.sample = [m](const IndexList& I, const IndexList& J) {
    Mat<Scalar> out(static_cast<Index>(I.size()), static_cast<Index>(J.size()));
    for (std::size_t a = 0; a < I.size(); ++a)
      for (std::size_t b = 0; b < J.size(); ++b)
        out(static_cast<Index>(a), static_cast<Index>(b)) = m(I[a], J[b]);
    return out;
  };
  return s;
}

template <class Scalar>
PivotedQR<Scalar> pivoted_qr(const Mat<Scalar>& m) {
  if (m.rows() < 1 || m.cols() < 1) throw ParameterError("pivoted_qr: empty matrix");
  check_finite(m, "pivoted_qr");
  Eigen::ColPivHouseholderQR<Mat<Scalar>> qr(m);
  const Index k = std::min(m.rows(), m.cols());
  PivotedQR<Scalar> out;
  out.q = qr.householderQ() * Mat<Scalar>::Identity(m.rows(), k);
  out.r = qr.matrixR().topRows(k).template triangularView<Eigen::Upper>();
  const auto& ind = qr.colsPermutation().indices();
  out.perm.resize(static_cast<std::size_t>(m.cols()));
  for (Index j = 0; j < m.cols(); ++j) out.perm[static_cast<std::size_t>(j)] = ind(j);
  return out;
}

template <class Scalar>
IndexList leading_pivots(const Mat<Scalar>& m, Index k) {
  if (m.rows() < 1 || m.cols() < 1) throw ParameterError("leading_pivots: empty matrix");
  check_finite(m, "leading_pivots");
  const Index rows = m.rows(), cols = m.cols();
  const Index steps = std::min({k, rows, cols});
  Mat<Scalar> w = m;
  VectorXd norm2 = w.colwise().squaredNorm().transpose();
  IndexList perm = iota_list(cols);
  for (Index t = 0; t < steps; ++t) {
    Index p = 0;
    norm2.tail(cols - t).maxCoeff(&p);
    p += t;
    if (p != t) {
      w.col(t).swap(w.col(p));
      std::swap(norm2(t), norm2(p));
      std::swap(perm[static_cast<std::size_t>(t)], perm[static_cast<std::size_t>(p)]);
    }
    if (t + 1 >= rows) continue;
    Scalar tau;
    double beta;
    w.col(t).tail(rows - t).makeHouseholderInPlace(tau, beta);
    const auto ess = w.col(t).tail(rows - t - 1);
    // Reflector update and the norm of the part below row t in one pass per column.
    for (Index j = t + 1; j < cols; ++j) {
      auto a = w.col(j).tail(rows - t);
      const Scalar s = tau * (a(0) + ess.dot(a.tail(rows - t - 1)));
      a(0) -= s;
      a.tail(rows - t - 1) -= s * ess;
      norm2(j) = a.tail(rows - t - 1).squaredNorm();
    }
  }
  perm.resize(static_cast<std::size_t>(steps));
  return perm;
}

template <class Scalar>
Mat<Scalar> pinv(const Mat<Scalar>& a, double relCut, double* cond) {
  Eigen::JacobiSVD<Mat<Scalar>> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const VectorXd& s = svd.singularValues();
  Mat<Scalar> out = Mat<Scalar>::Zero(a.cols(), a.rows());
  if (s.size() == 0 || s(0) == 0.0) {
    if (cond) *cond = s.size() == 0 ? 1.0 : std::numeric_limits<double>::infinity();
    return out;
  }
  const double cut = relCut * s(0);
  VectorXd inv = VectorXd::Zero(s.size());
  for (Index k = 0; k < s.size(); ++k)
    if (s(k) > cut) inv(k) = 1.0 / s(k);
  if (cond) {
    const double smin = s(s.size() - 1);
    *cond = smin > 0.0 ? s(0) / smin : std::numeric_limits<double>::infinity();
  }
  out = svd.matrixV() * inv.template cast<Scalar>().asDiagonal() * svd.matrixU().adjoint();
  return out;
}

template <class Scalar>
LowRankFactor<Scalar> randomized_svd(const MatrixSampler<Scalar>& sampler,
                                     const SvdOptions& opt) {
  const Index m = sampler.nrows, n = sampler.ncols;
  const Index r = opt.rank, q = opt.oversampling;
  if (r < 1 || q < 1) throw ParameterError("randomized_svd: rank and oversampling must be >= 1");
  if (opt.iters < 1) throw ParameterError("randomized_svd: iters must be >= 1");
  if (r * q > std::min(m, n))
    throw ParameterError("randomized_svd: r*q = " + std::to_string(r * q) +
                         " exceeds min(nrows, ncols) = " + std::to_string(std::min(m, n)));
  std::mt19937_64 rng(opt.seed);
  const IndexList allRows = iota_list(m), allCols = iota_list(n);
  IndexList piRow, piCol;
  for (int it = 0; it < opt.iters; ++it) {
    IndexList I = merge_indices(sample_indices(rng, m, r * q), piRow);
    Mat<Scalar> kI = sampler.sample(I, allCols);
    check_finite(kI, "randomized_svd");
    piCol = take_sorted(leading_pivots<Scalar>(kI, r), r);
    IndexList J = merge_indices(sample_indices(rng, n, r * q), piCol);
    Mat<Scalar> kJ = sampler.sample(allRows, J);
    check_finite(kJ, "randomized_svd");
    piRow = take_sorted(leading_pivots<Scalar>(Mat<Scalar>(kJ.adjoint()), r), r);
  }
  Mat<Scalar> qcol = sample_basis<Scalar>(sampler.sample(allRows, piCol), r);
  Mat<Scalar> qrow = sample_basis<Scalar>(Mat<Scalar>(sampler.sample(piRow, allCols).adjoint()), r);
  IndexList J = merge_indices(piCol, sample_indices(rng, n, r * q));
  IndexList I = merge_indices(piRow, sample_indices(rng, m, r * q));
  return assemble<Scalar>(qcol, qrow, I, J, sampler.sample(I, J), r);
}

template <class Scalar>
LowRankFactor<Scalar> restricted_svd_from_samples(const Mat<Scalar>& rows,
                                                  const Mat<Scalar>& cols,
                                                  const IndexList& rowIdx,
                                                  const IndexList& colIdx, Index r) {
  const Index k = static_cast<Index>(rowIdx.size());
  const Index kc = static_cast<Index>(colIdx.size());
  if (rows.rows() != k || cols.cols() != kc)
    throw ParameterError("restricted_svd_from_samples: sample shapes do not match index sets");
  if (r < 1 || k < r || kc < r)
    throw ParameterError("restricted_svd_from_samples: need at least r = " + std::to_string(r) +
                         " sampled rows and columns");
  for (std::size_t a = 1; a < rowIdx.size(); ++a)
    if (rowIdx[a] <= rowIdx[a - 1]) throw ParameterError("rowIdx must be sorted and distinct");
  for (std::size_t a = 1; a < colIdx.size(); ++a)
    if (colIdx[a] <= colIdx[a - 1]) throw ParameterError("colIdx must be sorted and distinct");
  check_finite(rows, "restricted_svd_from_samples");
  check_finite(cols, "restricted_svd_from_samples");

  Mat<Scalar> w = select_cols(rows, colIdx);
  IndexList colPos = take_sorted(pivoted_qr<Scalar>(w).perm, r);
  Mat<Scalar> wr = select_rows(cols, rowIdx).adjoint();
  IndexList rowPos = take_sorted(pivoted_qr<Scalar>(wr).perm, r);

  Mat<Scalar> qcol = sample_basis<Scalar>(select_cols(cols, colPos), r);
  Mat<Scalar> qrow = sample_basis<Scalar>(Mat<Scalar>(select_rows(rows, rowPos).adjoint()), r);
  return assemble<Scalar>(qcol, qrow, rowIdx, colIdx, w, r);
}

TruncatedFactors truncated_svd_of_factored(const RealFactor& f, Index r) {
  if (r < 1 || r >= f.rank())
    throw ParameterError("truncated_svd_of_factored: target rank " + std::to_string(r) +
                         " must be below the factor rank " + std::to_string(f.rank()));
  const MatrixXd us = f.scaledU();
  Eigen::HouseholderQR<MatrixXd> q1(us), q2(f.v);
  const Index r1 = f.rank();
  MatrixXd Q1 = q1.householderQ() * MatrixXd::Identity(us.rows(), r1);
  MatrixXd Q2 = q2.householderQ() * MatrixXd::Identity(f.v.rows(), r1);
  MatrixXd R1 = q1.matrixQR().topRows(r1).triangularView<Eigen::Upper>();
  MatrixXd R2 = q2.matrixQR().topRows(r1).triangularView<Eigen::Upper>();
  Eigen::JacobiSVD<MatrixXd> svd(R1 * R2.transpose(), Eigen::ComputeFullU | Eigen::ComputeFullV);
  TruncatedFactors out;
  out.sigma = svd.singularValues();
  out.p = Q1 * svd.matrixU().leftCols(r) * out.sigma.head(r).asDiagonal();
  out.q = Q2 * svd.matrixV().leftCols(r);
  return out;
}

#define OIT_INSTANTIATE(S)                                                                     \
  template struct LowRankFactor<S>;                                                           \
  template LowRankFactor<S> trim(const LowRankFactor<S>&, double);                            \
  template struct MatrixSampler<S>;                                                           \
  template MatrixSampler<S> dense_sampler(const Mat<S>&);                                     \
  template PivotedQR<S> pivoted_qr(const Mat<S>&);                                            \
  template IndexList leading_pivots(const Mat<S>&, Index);                                    \
  template Mat<S> pinv(const Mat<S>&, double, double*);                                       \
  template LowRankFactor<S> randomized_svd(const MatrixSampler<S>&, const SvdOptions&);       \
  template LowRankFactor<S> restricted_svd_from_samples(const Mat<S>&, const Mat<S>&,         \
                                                        const IndexList&, const IndexList&, \
                                                        Index);

OIT_INSTANTIATE(double)
OIT_INSTANTIATE(cd)

#undef OIT_INSTANTIATE

}  // namespace oit
