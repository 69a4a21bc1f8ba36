#pragma once

#include "oit/common.hpp"

#include <functional>

namespace oit {

// M ~= u * diag(sigma) * v^*. sigma may be empty, meaning all ones.
template <class Scalar>
struct LowRankFactor {
  Mat<Scalar> u;
  Mat<Scalar> v;
  VectorXd sigma;
  // Set when a pseudo-inverse of the middle matrix had condition number > 1e14.
  bool illConditioned = false;

  Index rows() const { return u.rows(); }
  Index cols() const { return v.rows(); }
  Index rank() const { return u.cols(); }
  bool hasSigma() const { return sigma.size() > 0; }

  // u * diag(sigma), i.e. the left factor with sigma absorbed.
  Mat<Scalar> scaledU() const;
  Scalar entry(Index i, Index j) const;
  Mat<Scalar> block(const IndexList& I, const IndexList& J) const;
  Mat<Scalar> dense() const;
  // Throws ParameterError when a structural invariant is violated.
  void validate() const;
};

using RealFactor = LowRankFactor<double>;
using ComplexFactor = LowRankFactor<cd>;

// Drop trailing terms with sigma_k <= relTol * sigma_1 (keeps at least one).
template <class Scalar>
LowRankFactor<Scalar> trim(const LowRankFactor<Scalar>& f, double relTol);

// Entry-level access to an m x n matrix.
template <class Scalar>
struct MatrixSampler {
  Index nrows = 0;
  Index ncols = 0;
  std::function<Mat<Scalar>(const IndexList&, const IndexList&)> sample;

  Mat<Scalar> rowsOf(const IndexList& I) const;
  Mat<Scalar> colsOf(const IndexList& J) const;
};

template <class Scalar>
MatrixSampler<Scalar> dense_sampler(const Mat<Scalar>& m);

template <class Scalar>
struct PivotedQR {
  Mat<Scalar> q;  // m x k, orthonormal columns, k = min(m, n)
  Mat<Scalar> r;  // k x n upper triangular
  IndexList perm; // m(:, perm) = q * r
};

template <class Scalar>
PivotedQR<Scalar> pivoted_qr(const Mat<Scalar>& m);

// The first k entries of pivoted_qr(m).perm, in k passes over m instead of
// min(rows, cols).
template <class Scalar>
IndexList leading_pivots(const Mat<Scalar>& m, Index k);

struct SvdOptions {
  Index rank = 20;
  Index oversampling = 5;
  int iters = 2;
  std::uint64_t seed = 0;
};

// Randomized row/column sampling for a rank-r approximate SVD.
template <class Scalar>
LowRankFactor<Scalar> randomized_svd(const MatrixSampler<Scalar>& sampler,
                                     const SvdOptions& opt);

// Same as randomized_svd but restricted to fixed samples: rows = M(rowIdx, :) (k x n),
// cols = M(:, colIdx) (m x k').
template <class Scalar>
LowRankFactor<Scalar> restricted_svd_from_samples(const Mat<Scalar>& rows,
                                                  const Mat<Scalar>& cols,
                                                  const IndexList& rowIdx,
                                                  const IndexList& colIdx,
                                                  Index r);

struct TruncatedFactors {
  MatrixXd p;  // N x r, singular values absorbed
  MatrixXd q;  // N x r
  VectorXd sigma;
};

// Leading rank-r SVD of the rank-r1 matrix f, O(N r1^2).
TruncatedFactors truncated_svd_of_factored(const RealFactor& f, Index r);

// Pseudo-inverse with cutoff relCut * sigma_max; cond receives
// sigma_max / sigma_min over the kept values (inf if nothing is kept).
template <class Scalar>
Mat<Scalar> pinv(const Mat<Scalar>& a, double relCut, double* cond = nullptr);

}  // namespace oit
