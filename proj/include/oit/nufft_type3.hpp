#pragma once

#include "oit/common.hpp"

#include <memory>

namespace oit {

// out(k) = sum_j c(j) exp(2 pi i <targets(k,:), sources(j,:)>) for points in
// 1 or 2 dimensions, evaluated with Gaussian gridding to a relative l2
// tolerance. Plans are immutable and may be executed concurrently.
class NufftPlan {
public:
  NufftPlan(const MatrixXd& sources, const MatrixXd& targets, double tol);
  ~NufftPlan();
  NufftPlan(NufftPlan&&) noexcept;
  NufftPlan& operator=(NufftPlan&&) noexcept;

  VectorXcd execute(const VectorXcd& c) const;

  int dim() const;
  Index numSources() const;
  Index numTargets() const;
  double tolerance() const;
  double oversampling() const;
  // Gaussian spreading width in grid points per dimension (one side).
  Index spreadWidth() const;
  // Uniform grid points per dimension before oversampling.
  std::vector<Index> gridSize() const;

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// O(n m) reference sum.
VectorXcd nufft_direct(const MatrixXd& sources, const MatrixXd& targets, const VectorXcd& c);

}  // namespace oit
