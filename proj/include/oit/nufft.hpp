#pragma once

#include "oit/lowrank.hpp"
#include "oit/nufft_type3.hpp"

namespace oit {

// Column range of the kernel handled by one lifted NUFFT.
struct NufftPiece {
  Index colStart = 0, colLen = 0;
  bool applicable = false;
  // Lifting taken from the doubly centred phase. The recovered phase may carry
  // an integer offset; terms in x or xi alone only add a rank-1 factor to the
  // residual, so they are removed before truncation.
  bool centered = false;
  MatrixXd p, q;            // rows x r and colLen x r, Phi ~= p q^T on the piece
  ComplexFactor residual;   // amp .* e^{2 pi i (Phi - p q^T)} ~= U V^*, empty if not applicable
  // Relative pivot cutoff: eps, raised to the rounding floor of evaluating
  // Phi - p q^T in double precision when the phase is large.
  double threshold = 0.0;
  Index pivotCount = 0;     // diagonal entries of R above |R_11| threshold
  VectorXd pivots;          // |R_tt| of the sampled residual columns
};

struct NufftDecision {
  bool applicable = false;
  Index r = 0, rEps = 0, oversampling = 0;
  double eps = 0.0;
  std::uint64_t seed = 0;
  Index rows = 0, cols = 0;
  std::vector<NufftPiece> pieces;

  // Lifting and residual of the first piece (the whole matrix unless split).
  const MatrixXd& p() const { return pieces.front().p; }
  const MatrixXd& q() const { return pieces.front().q; }
  Index pivotCount() const { return pieces.front().pivotCount; }
};

// Decides whether an r-dimensional type-3 NUFFT can replace the phase Phi = phase.
// q is the oversampling of the column test, rEps the maximum residual rank.
// The lifting is first taken from the phase as given and, if that fails,
// from its doubly centred version.
NufftDecision decide_nufft(const RealFactor& phase, const RealFactor& amp, Index r, Index rEps,
                           Index q, double eps, std::uint64_t seed);

// Same decision taken independently on consecutive column ranges starting at splits
// (splits[0] must be 0). The decision is applicable only if every piece is.
NufftDecision decide_nufft_split(const RealFactor& phase, const RealFactor& amp,
                                 const IndexList& splits, Index r, Index rEps, Index q, double eps,
                                 std::uint64_t seed);

// Plans built once for an applicable decision.
class NufftEvaluator {
public:
  NufftEvaluator(const NufftDecision& decision, double tol);
  VectorXcd apply(const VectorXcd& f, int threads = 1) const;
  Index size() const { return cols_; }
  // Product of the uniform grid sizes of the largest plan.
  Index gridPoints() const;

private:
  struct Part {
    Index colStart, colLen;
    std::shared_ptr<const NufftPlan> plan;
    MatrixXcd u, v;  // residual with sigma absorbed in u
  };
  std::vector<Part> parts_;
  Index rows_ = 0, cols_ = 0;
};

VectorXcd nufft_evaluate(const NufftDecision& decision, const VectorXcd& f, double tol,
                         int threads = 1);

// Basis change of a rank-2 lifting: p B^{-T}, q B with B minimising the NUFFT grid size.
void reoptimize_lifting_basis(MatrixXd& p, MatrixXd& q, double tol);

}  // namespace oit
