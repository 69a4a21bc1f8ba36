#include "oit/kernel_access.hpp"

namespace oit {

const char* scenario_name(Scenario s) {
  switch (s) {
    case Scenario::Entry: return "entry";
    case Scenario::Matvec: return "matvec";
    case Scenario::Samples: return "samples";
  }
  return "?";
}

Scenario parse_scenario(const std::string& s) {
  if (s == "entry" || s == "1") return Scenario::Entry;
  if (s == "matvec" || s == "2") return Scenario::Matvec;
  if (s == "samples" || s == "3") return Scenario::Samples;
  throw ParameterError("unknown scenario '" + s + "'");
}

KernelAccess KernelAccess::entry(Index n, BlockFn block) {
  if (n < 1) throw ParameterError("kernel size must be positive");
  KernelAccess a;
  a.scenario_ = Scenario::Entry;
  a.n_ = n;
  a.block_ = std::move(block);
  return a;
}

KernelAccess KernelAccess::matvec(Index n, ApplyFn apply, ApplyFn applyTranspose) {
  if (n < 1) throw ParameterError("kernel size must be positive");
  KernelAccess a;
  a.scenario_ = Scenario::Matvec;
  a.n_ = n;
  a.apply_ = std::move(apply);
  a.applyT_ = std::move(applyTranspose);
  return a;
}

KernelAccess KernelAccess::samples(Index n, SampleSet s) {
  if (n < 1) throw ParameterError("kernel size must be positive");
  auto check = [n](const IndexList& idx) {
    for (std::size_t k = 0; k < idx.size(); ++k) {
      if (idx[k] < 0 || idx[k] >= n) throw ParameterError("sample index out of range");
      if (k > 0 && idx[k] <= idx[k - 1])
        throw ParameterError("sample indices must be sorted and distinct");
    }
  };
  check(s.rowIdx);
  check(s.colIdx);
  const Index nr = static_cast<Index>(s.rowIdx.size()), nc = static_cast<Index>(s.colIdx.size());
  if (s.ampRows.rows() != nr || s.ampRows.cols() != n || s.phaseRows.rows() != nr ||
      s.phaseRows.cols() != n || s.ampCols.rows() != n || s.ampCols.cols() != nc ||
      s.phaseCols.rows() != n || s.phaseCols.cols() != nc)
    throw ParameterError("sample matrices do not match index sets");
  KernelAccess a;
  a.scenario_ = Scenario::Samples;
  a.n_ = n;
  a.samples_ = std::make_shared<const SampleSet>(std::move(s));
  return a;
}

MatrixXcd KernelAccess::block(const IndexList& I, const IndexList& J) const {
  if (scenario_ != Scenario::Entry) throw MisuseError("entry access requires an entry oracle");
  return block_(I, J);
}

VectorXcd KernelAccess::row(Index i) const {
  if (i < 0 || i >= n_) throw ParameterError("row index out of range");
  if (scenario_ == Scenario::Entry) {
    IndexList all(static_cast<std::size_t>(n_));
    for (Index j = 0; j < n_; ++j) all[static_cast<std::size_t>(j)] = j;
    return block_({i}, all).row(0).transpose();
  }
  if (scenario_ == Scenario::Matvec) return applyT_(VectorXcd::Unit(n_, i));
  throw MisuseError("sample access has no kernel rows");
}

VectorXcd KernelAccess::col(Index j) const {
  if (j < 0 || j >= n_) throw ParameterError("column index out of range");
  if (scenario_ == Scenario::Entry) {
    IndexList all(static_cast<std::size_t>(n_));
    for (Index i = 0; i < n_; ++i) all[static_cast<std::size_t>(i)] = i;
    return block_(all, {j}).col(0);
  }
  if (scenario_ == Scenario::Matvec) return apply_(VectorXcd::Unit(n_, j));
  throw MisuseError("sample access has no kernel columns");
}

VectorXcd KernelAccess::apply(const VectorXcd& f) const {
  if (f.size() != n_) throw ParameterError("vector length does not match kernel size");
  if (scenario_ == Scenario::Matvec) return apply_(f);
  IndexList all(static_cast<std::size_t>(n_));
  for (Index i = 0; i < n_; ++i) all[static_cast<std::size_t>(i)] = i;
  return applyRows(all, f);
}

VectorXcd KernelAccess::applyTranspose(const VectorXcd& f) const {
  if (f.size() != n_) throw ParameterError("vector length does not match kernel size");
  if (scenario_ == Scenario::Matvec) return applyT_(f);
  if (scenario_ != Scenario::Entry) throw MisuseError("sample access cannot apply the kernel");
  IndexList all(static_cast<std::size_t>(n_));
  for (Index i = 0; i < n_; ++i) all[static_cast<std::size_t>(i)] = i;
  VectorXcd out(n_);
  const Index chunk = 64;
  for (Index j0 = 0; j0 < n_; j0 += chunk) {
    IndexList J;
    for (Index j = j0; j < std::min(n_, j0 + chunk); ++j) J.push_back(j);
    MatrixXcd b = block_(all, J);
    out.segment(j0, static_cast<Index>(J.size())) = b.transpose() * f;
  }
  return out;
}

VectorXcd KernelAccess::applyRows(const IndexList& rows, const VectorXcd& f) const {
  if (f.size() != n_) throw ParameterError("vector length does not match kernel size");
  if (scenario_ == Scenario::Matvec) {
    VectorXcd out(static_cast<Index>(rows.size()));
    for (std::size_t a = 0; a < rows.size(); ++a)
      out(static_cast<Index>(a)) = applyT_(VectorXcd::Unit(n_, rows[a])).cwiseProduct(f).sum();
    return out;
  }
  if (scenario_ != Scenario::Entry) throw MisuseError("sample access cannot apply the kernel");
  IndexList all(static_cast<std::size_t>(n_));
  for (Index j = 0; j < n_; ++j) all[static_cast<std::size_t>(j)] = j;
  VectorXcd out(static_cast<Index>(rows.size()));
  const std::size_t chunk = 64;
  for (std::size_t a0 = 0; a0 < rows.size(); a0 += chunk) {
    IndexList I(rows.begin() + static_cast<std::ptrdiff_t>(a0),
                rows.begin() + static_cast<std::ptrdiff_t>(std::min(rows.size(), a0 + chunk)));
    MatrixXcd b = block_(I, all);
    out.segment(static_cast<Index>(a0), static_cast<Index>(I.size())) = b * f;
  }
  return out;
}

const SampleSet& KernelAccess::sampleSet() const {
  if (!samples_) throw MisuseError("access does not carry fixed samples");
  return *samples_;
}

}  // namespace oit
