#include "oit/kernels.hpp"

#include <cmath>

namespace oit {

namespace {

// Hankel asymptotic expansion of J_nu, Y_nu for nu in {0, 1}. The series is
// summed until its terms stop decreasing, which at x >= 20 leaves an error
// near e^{-2x}.
void jy_asymptotic(int nu, double x, double& j, double& y) {
  const double mu = 4.0 * nu * nu;
  double p = 1.0, q = 0.0, t = 1.0, prev = 1.0;
  for (int k = 1; k < 200; ++k) {
    t *= (mu - (2.0 * k - 1) * (2.0 * k - 1)) / (k * 8.0 * x);
    const double at = std::abs(t);
    if (at > prev || at < 1e-18) break;
    prev = at;
    // k even contributes to P with sign (-1)^{k/2}, k odd to Q with (-1)^{(k-1)/2}
    const int m = k % 4;
    if (m == 0) p += t;
    else if (m == 1) q += t;
    else if (m == 2) p -= t;
    else q -= t;
  }
  // chi = x - (nu/2 + 1/4) pi; rotate cos x, sin x by the constant to keep
  // full accuracy for large x.
  const double c = (0.5 * nu + 0.25) * kPi;
  const double cx = std::cos(x), sx = std::sin(x);
  const double cc = std::cos(c), sc = std::sin(c);
  const double cosChi = cx * cc + sx * sc;
  const double sinChi = sx * cc - cx * sc;
  const double amp = std::sqrt(2.0 / (kPi * x));
  j = amp * (p * cosChi - q * sinChi);
  y = amp * (p * sinChi + q * cosChi);
}

}  // namespace

void bessel_jy_sequence(double x, Index nmax, double* jOut, double* yOut) {
  if (!(x >= 20.0)) throw ParameterError("bessel_jy_sequence: argument must be at least 20");
  if (nmax < 0 || static_cast<double>(nmax) >= x)
    throw ParameterError("bessel_jy_sequence: order must stay below the argument");
  double j0, y0, j1, y1;
  jy_asymptotic(0, x, j0, y0);
  jy_asymptotic(1, x, j1, y1);

  if (yOut) {
    yOut[0] = y0;
    if (nmax >= 1) yOut[1] = y1;
    for (Index n = 1; n < nmax; ++n) yOut[n + 1] = (2.0 * n / x) * yOut[n] - yOut[n - 1];
  }
  if (!jOut) return;

  // Miller: start well past the turning point n = x where J decays
  // super-exponentially, recur downward, then fit the scale to J_0, J_1.
  const Index start = static_cast<Index>(std::ceil(x + 10.0 * std::cbrt(x))) + 20;
  std::vector<double> t(static_cast<std::size_t>(start + 2), 0.0);
  t[static_cast<std::size_t>(start + 1)] = 0.0;
  t[static_cast<std::size_t>(start)] = 1e-300;
  for (Index n = start; n >= 1; --n) {
    const std::size_t s = static_cast<std::size_t>(n);
    t[s - 1] = (2.0 * n / x) * t[s] - t[s + 1];
    if (std::abs(t[s - 1]) > 1e250)
      for (std::size_t k = s - 1; k < t.size(); ++k) t[k] *= 1e-250;
  }
  const double m = std::max(std::abs(t[0]), std::abs(t[1]));
  const double a = t[0] / m, b = t[1] / m;
  const double scale = (j0 * a + j1 * b) / ((a * a + b * b) * m);
  for (Index n = 0; n <= nmax; ++n) jOut[n] = scale * t[static_cast<std::size_t>(n)];
}

cd hankel1(Index order, double x) {
  std::vector<double> j(static_cast<std::size_t>(order + 1)), y(static_cast<std::size_t>(order + 1));
  bessel_jy_sequence(x, order, j.data(), y.data());
  return {j.back(), y.back()};
}

double hankel_point(Index i, Index n) {
  return static_cast<double>(n) + kTwoPi * static_cast<double>(i) / 3.0;
}

double hankel_debye_phase(Index order, double x) {
  const double nu = static_cast<double>(order);
  if (!(x > nu)) throw ParameterError("hankel_debye_phase: requires x > order");
  const double s = std::sqrt((x - nu) * (x + nu));
  return (s - nu * std::acos(nu / x) - 0.25 * kPi) / kTwoPi;
}

cd hankel_entry(Index i, Index j, Index n) {
  if (i < 0 || j < 0 || i >= n || j >= n) throw ParameterError("hankel_entry: index out of range");
  return hankel1(j, hankel_point(i, n));
}

}  // namespace oit
