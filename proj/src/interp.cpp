#include "oit/interp.hpp"

namespace oit {

namespace {

Index round_half_away(double v) {
  return static_cast<Index>(std::round(v));
}

void check_range(const Range& R, Index n, const char* what) {
  if (R.len < 1 || R.start < 0 || R.end() > n)
    throw ParameterError(std::string("interp: ") + what + " range out of bounds");
}

}  // namespace

IndexGrid mock_chebyshev_grid(Index n, Index r, ChebOrder order) {
  if (r < 2) throw ParameterError("mock_chebyshev_grid: rank must be at least 2");
  if (n < 1) throw ParameterError("mock_chebyshev_grid: empty piece");
  IndexGrid g;
  g.requested = r;
  if (n <= r) {
    for (Index t = 1; t <= n; ++t) g.indices.push_back(t);
    return g;
  }
  for (Index t = 1; t <= r; ++t) {
    double z = 0.5 * std::cos(static_cast<double>(t - 1) * kPi / static_cast<double>(r - 1));
    if (order == ChebOrder::Ascending) z = -z;
    Index k = round_half_away(static_cast<double>(t) + static_cast<double>(n - r) * (z + 0.5));
    g.indices.push_back(std::clamp<Index>(k, 1, n));
  }
  std::sort(g.indices.begin(), g.indices.end());
  g.indices.erase(std::unique(g.indices.begin(), g.indices.end()), g.indices.end());
  return g;
}

VectorXd lagrange_row(const IndexList& nodes, double query) {
  const Index k = static_cast<Index>(nodes.size());
  if (k < 1) throw ParameterError("lagrange_row: no nodes");
  VectorXd out(k);
  for (Index t = 0; t < k; ++t) {
    const double xt = static_cast<double>(nodes[static_cast<std::size_t>(t)]);
    double p = 1.0;
    for (Index j = 0; j < k; ++j) {
      if (j == t) continue;
      const double xj = static_cast<double>(nodes[static_cast<std::size_t>(j)]);
      p *= (query - xj) / (xt - xj);
    }
    out(t) = p;
  }
  return out;
}

PhaseEval::PhaseEval(const RealFactor& phase) : us_(phase.scaledU()), v_(phase.v) {}

MatrixXd residual_phase(const RealFactor& phase, const Range& A, const Range& B,
                        const IndexList& I, const IndexList& J) {
  check_range(A, phase.rows(), "row");
  check_range(B, phase.cols(), "column");
  for (Index i : I)
    if (i < A.start || i >= A.end()) throw ParameterError("residual_phase: row outside A");
  for (Index j : J)
    if (j < B.start || j >= B.end()) throw ParameterError("residual_phase: column outside B");
  const PhaseEval phi(phase);
  const Index ca = A.center(), cb = B.center();
  const double cc = phi(ca, cb);
  MatrixXd out(static_cast<Index>(I.size()), static_cast<Index>(J.size()));
  for (std::size_t a = 0; a < I.size(); ++a)
    for (std::size_t b = 0; b < J.size(); ++b) {
      const Index i = I[a], j = J[b];
      // grouped so the centre row/column cancel exactly
      out(static_cast<Index>(a), static_cast<Index>(b)) =
          (phi(i, j) - phi(ca, j)) - (phi(i, cb) - cc);
    }
  return out;
}

IndexList interpolation_nodes(const Range& piece, Index r) {
  const Index k = std::min(r, piece.len);
  IndexList out;
  if (k < 2) {
    out.push_back(piece.start);
    return out;
  }
  for (Index t : mock_chebyshev_grid(piece.len, k, ChebOrder::Ascending).indices) out.push_back(piece.start + t - 1);
  return out;
}

InterpFactor interp_lowrank(const RealFactor& phase, const Range& A, const Range& B, Index r,
                            InterpSide side) {
  check_range(A, phase.rows(), "row");
  check_range(B, phase.cols(), "column");
  if (r < 2) throw ParameterError("interp_lowrank: rank must be at least 2");
  const PhaseEval phi(phase);
  const Index ca = A.center(), cb = B.center();
  const double cc = phi(ca, cb);
  auto R = [&](Index i, Index j) { return (phi(i, j) - phi(ca, j)) - (phi(i, cb) - cc); };

  InterpFactor f;
  f.side = side;
  const Range& piece = side == InterpSide::Xi ? B : A;
  f.nodes = interpolation_nodes(piece, r);
  if (f.nodes.size() < 2 && piece.len > 1)
    throw DegenerateBlockError("interp_lowrank: interpolation grid collapsed to one node");
  const Index k = static_cast<Index>(f.nodes.size());
  f.u.resize(A.len, k);
  f.v.resize(B.len, k);
  if (side == InterpSide::Xi) {
    for (Index t = 0; t < k; ++t)
      for (Index a = 0; a < A.len; ++a)
        f.u(a, t) = expi_cycles(R(A.start + a, f.nodes[static_cast<std::size_t>(t)]));
    for (Index b = 0; b < B.len; ++b)
      f.v.row(b) = lagrange_row(f.nodes, static_cast<double>(B.start + b)).cast<cd>().transpose();
  } else {
    for (Index a = 0; a < A.len; ++a)
      f.u.row(a) = lagrange_row(f.nodes, static_cast<double>(A.start + a)).cast<cd>().transpose();
    for (Index t = 0; t < k; ++t)
      for (Index b = 0; b < B.len; ++b)
        f.v(b, t) = std::conj(expi_cycles(R(f.nodes[static_cast<std::size_t>(t)], B.start + b)));
  }
  // U = e^{-2 pi i Phi(cA,cB)} diag(e^{2 pi i Phi(A,cB)}) U0,
  // V^* = V0^* diag(e^{2 pi i Phi(cA,B)}).
  const cd s = expi_cycles(-cc);
  for (Index a = 0; a < A.len; ++a) f.u.row(a) *= s * expi_cycles(phi(A.start + a, cb));
  for (Index b = 0; b < B.len; ++b) f.v.row(b) *= std::conj(expi_cycles(phi(ca, B.start + b)));
  return f;
}

}  // namespace oit
