#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace oit {

using cd = std::complex<double>;
using Index = Eigen::Index;
using IndexList = std::vector<Index>;
using MatrixXd = Eigen::MatrixXd;
using MatrixXcd = Eigen::MatrixXcd;
using VectorXd = Eigen::VectorXd;
using VectorXcd = Eigen::VectorXcd;

template <class Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <class Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Non-finite or malformed numeric input.
class InvalidInputError : public Error {
public:
  using Error::Error;
};

// Parameters outside the documented range (ranks, sizes, tolerances).
class ParameterError : public Error {
public:
  using Error::Error;
};

class ConsistencyError : public Error {
public:
  ConsistencyError(const std::string& what, Index i, Index j)
      : Error(what), row(i), col(j) {}
  Index row, col;
};

class DegenerateAmplitudeError : public Error {
public:
  DegenerateAmplitudeError(const std::string& what, Index i, Index j)
      : Error(what), row(i), col(j) {}
  Index row, col;
};

class DegenerateBlockError : public Error {
public:
  using Error::Error;
};

class PlanningError : public Error {
public:
  using Error::Error;
};

class NotImplementedError : public PlanningError {
public:
  using PlanningError::PlanningError;
};

// API used out of order, e.g. evaluating a NUFFT decision with y = 0.
class MisuseError : public Error {
public:
  using Error::Error;
};

class DegenerateReferenceError : public Error {
public:
  using Error::Error;
};

constexpr double kPi = 3.14159265358979323846;
constexpr double kTwoPi = 2.0 * kPi;

// e^{2 pi i phi} with phi in cycles; the integer part is removed first so
// large phases keep full relative accuracy in the argument.
inline cd expi_cycles(double phi) {
  const double f = phi - std::nearbyint(phi);
  return {std::cos(kTwoPi * f), std::sin(kTwoPi * f)};
}

// Fractional part in [0,1).
inline double frac1(double a) {
  double u = a - std::floor(a);
  if (u >= 1.0) u = 0.0;
  return u;
}

// Signed distance to the nearest integer, in [-1/2, 1/2).
inline double wrap_half(double a) {
  double w = a - std::floor(a + 0.5);
  if (w >= 0.5) w -= 1.0;
  return w;
}

// Sorted union of index lists without duplicates.
IndexList merge_indices(const IndexList& a, const IndexList& b);

// k distinct indices from [0, n), sorted.
template <class Rng>
IndexList sample_indices(Rng& rng, Index n, Index k);

// Largest singular value.
double spectral_norm(const MatrixXcd& m);
double spectral_norm(const MatrixXd& m);

// FNV-1a over raw bytes.
std::uint64_t fnv1a(const void* data, std::size_t bytes,
                    std::uint64_t h = 1469598103934665603ull);

}  // namespace oit

#include <algorithm>
#include <random>

namespace oit {

template <class Rng>
IndexList sample_indices(Rng& rng, Index n, Index k) {
  if (k > n) throw ParameterError("cannot sample " + std::to_string(k) +
                                  " distinct indices from " + std::to_string(n));
  IndexList out;
  out.reserve(static_cast<std::size_t>(k));
  if (2 * k > n) {
    // dense case: partial Fisher-Yates
    IndexList all(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) all[static_cast<std::size_t>(i)] = i;
    for (Index i = 0; i < k; ++i) {
      std::uniform_int_distribution<Index> d(i, n - 1);
      std::swap(all[static_cast<std::size_t>(i)], all[static_cast<std::size_t>(d(rng))]);
      out.push_back(all[static_cast<std::size_t>(i)]);
    }
  } else {
    std::uniform_int_distribution<Index> d(0, n - 1);
    std::vector<char> seen(static_cast<std::size_t>(n), 0);
    while (static_cast<Index>(out.size()) < k) {
      Index v = d(rng);
      if (!seen[static_cast<std::size_t>(v)]) {
        seen[static_cast<std::size_t>(v)] = 1;
        out.push_back(v);
      }
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace oit
