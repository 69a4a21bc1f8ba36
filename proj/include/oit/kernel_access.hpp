#pragma once

#include "oit/common.hpp"

#include <functional>
#include <memory>

namespace oit {

enum class Scenario { Entry, Matvec, Samples };

const char* scenario_name(Scenario s);
Scenario parse_scenario(const std::string& s);

// Scenario 3 data: O(1) rows and columns of the amplitude and (unwrapped)
// phase matrices.
struct SampleSet {
  IndexList rowIdx, colIdx;
  MatrixXd ampRows, ampCols;      // |rowIdx| x N, N x |colIdx|
  MatrixXd phaseRows, phaseCols;  // cycles
};

class KernelAccess {
public:
  using BlockFn = std::function<MatrixXcd(const IndexList&, const IndexList&)>;
  using ApplyFn = std::function<VectorXcd(const VectorXcd&)>;

  static KernelAccess entry(Index n, BlockFn block);
  // applyTranspose is the plain transpose K^T, not the adjoint.
  static KernelAccess matvec(Index n, ApplyFn apply, ApplyFn applyTranspose);
  static KernelAccess samples(Index n, SampleSet s);

  Scenario scenario() const { return scenario_; }
  Index size() const { return n_; }

  MatrixXcd block(const IndexList& I, const IndexList& J) const;
  VectorXcd row(Index i) const;
  VectorXcd col(Index j) const;
  VectorXcd apply(const VectorXcd& f) const;
  VectorXcd applyTranspose(const VectorXcd& f) const;
  // (K f)(rows) without forming the other rows when entries are available.
  VectorXcd applyRows(const IndexList& rows, const VectorXcd& f) const;
  const SampleSet& sampleSet() const;

private:
  Scenario scenario_ = Scenario::Entry;
  Index n_ = 0;
  BlockFn block_;
  ApplyFn apply_, applyT_;
  std::shared_ptr<const SampleSet> samples_;
};

}  // namespace oit
