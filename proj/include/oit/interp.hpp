#pragma once

#include "oit/lowrank.hpp"

namespace oit {

// Piece-local mock-Chebyshev nodes, 1-based as produced by the rounding
// formula. Duplicates after rounding are dropped, so effectiveCount() can be
// smaller than the requested rank.
struct IndexGrid {
  IndexList indices;
  Index requested = 0;
  Index effectiveCount() const { return static_cast<Index>(indices.size()); }
};

// Node order of the Chebyshev points z_t fed into the rounding formula.
// Descending is the formula as usually written (z_1 = 1/2); it leaves the
// first and last r-1 indices of the piece uncovered and can produce repeated
// points. Ascending maps t = 1 to index 1 and t = r to index n, and is what
// the interpolation factors use.
enum class ChebOrder { Descending, Ascending };

IndexGrid mock_chebyshev_grid(Index n, Index r, ChebOrder order = ChebOrder::Descending);

// Lagrange basis values M_t(query) for t over the nodes.
VectorXd lagrange_row(const IndexList& nodes, double query);

// Contiguous 0-based index range.
struct Range {
  Index start = 0;
  Index len = 0;
  Index end() const { return start + len; }
  // Index closest to the mean; the smaller one on ties.
  Index center() const { return start + (len - 1) / 2; }
};

// O(rank) entry evaluation of a real low-rank phase factor.
class PhaseEval {
public:
  explicit PhaseEval(const RealFactor& phase);
  double operator()(Index i, Index j) const {
    return us_.row(i).dot(v_.row(j));
  }
  Index rows() const { return us_.rows(); }
  Index cols() const { return v_.rows(); }
  Index rank() const { return us_.cols(); }

private:
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> us_, v_;
};

// R(i,j) = Phi(i,j) - Phi(cA,j) - Phi(i,cB) + Phi(cA,cB) for i in I, j in J.
MatrixXd residual_phase(const RealFactor& phase, const Range& A, const Range& B,
                        const IndexList& I, const IndexList& J);

enum class InterpSide { Xi, X };

struct InterpFactor {
  MatrixXcd u;  // |A| x k
  MatrixXcd v;  // |B| x k, block ~ u * v^*
  InterpSide side = InterpSide::Xi;
  IndexList nodes;  // global indices of the interpolation nodes
};

// Global interpolation nodes of a piece: min(r, len) mock-Chebyshev points.
IndexList interpolation_nodes(const Range& piece, Index r);

InterpFactor interp_lowrank(const RealFactor& phase, const Range& A, const Range& B, Index r,
                            InterpSide side);

}  // namespace oit
