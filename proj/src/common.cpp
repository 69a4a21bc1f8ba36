#include "oit/common.hpp"

#include <Eigen/SVD>

namespace oit {

IndexList merge_indices(const IndexList& a, const IndexList& b) {
  IndexList out;
  out.reserve(a.size() + b.size());
  out.insert(out.end(), a.begin(), a.end());
  out.insert(out.end(), b.begin(), b.end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

double spectral_norm(const MatrixXcd& m) {
  if (m.size() == 0) return 0.0;
  Eigen::BDCSVD<MatrixXcd> svd(m);
  return svd.singularValues()(0);
}

double spectral_norm(const MatrixXd& m) {
  if (m.size() == 0) return 0.0;
  Eigen::BDCSVD<MatrixXd> svd(m);
  return svd.singularValues()(0);
}

std::uint64_t fnv1a(const void* data, std::size_t bytes, std::uint64_t h) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < bytes; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace oit
