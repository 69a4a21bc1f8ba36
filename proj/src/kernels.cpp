#include "oit/kernels.hpp"

#include "oit/nufft_type3.hpp"

#include <random>

namespace oit {

GridSpec::GridSpec(Index size) : n(size) {
  if (n < 2 || n % 2) throw ParameterError("grid size must be even and at least 2");
}

Index GridSpec::xIndex(double xv) const { return static_cast<Index>(std::lround(xv * static_cast<double>(n))); }
Index GridSpec::xiIndex(double xiv) const { return static_cast<Index>(std::lround(xiv)) + n / 2; }

double fio_c(double x) { return (2.0 + 0.2 * std::sin(kTwoPi * x)) / 16.0; }

namespace {

void check_index(Index i, Index j, Index n) {
  if (i < 0 || j < 0 || i >= n || j >= n) throw ParameterError("kernel index out of range");
}

template <class F>
KernelAccess::BlockFn block_from_entries(F entry) {
  return [entry](const IndexList& I, const IndexList& J) {
    MatrixXcd out(static_cast<Index>(I.size()), static_cast<Index>(J.size()));
    for (std::size_t b = 0; b < J.size(); ++b)
      for (std::size_t a = 0; a < I.size(); ++a)
        out(static_cast<Index>(a), static_cast<Index>(b)) = entry(I[a], J[b]);
    return out;
  };
}

// Full Hankel matrix, tabulated row by row (one recurrence per argument).
MatrixXcd hankel_table(Index n) {
  MatrixXcd t(n, n);
  std::vector<double> j(static_cast<std::size_t>(n)), y(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    bessel_jy_sequence(hankel_point(i, n), n - 1, j.data(), y.data());
    for (Index m = 0; m < n; ++m) t(i, m) = cd(j[static_cast<std::size_t>(m)], y[static_cast<std::size_t>(m)]);
  }
  return t;
}

// Hankel blocks without a table: one recurrence per requested row.
MatrixXcd hankel_block(Index n, const IndexList& I, const IndexList& J) {
  MatrixXcd out(static_cast<Index>(I.size()), static_cast<Index>(J.size()));
  if (J.empty()) return out;
  const Index mmax = *std::max_element(J.begin(), J.end());
  std::vector<double> jv(static_cast<std::size_t>(mmax + 1)), yv(static_cast<std::size_t>(mmax + 1));
  for (std::size_t a = 0; a < I.size(); ++a) {
    bessel_jy_sequence(hankel_point(I[a], n), mmax, jv.data(), yv.data());
    for (std::size_t b = 0; b < J.size(); ++b)
      out(static_cast<Index>(a), static_cast<Index>(b)) =
          cd(jv[static_cast<std::size_t>(J[b])], yv[static_cast<std::size_t>(J[b])]);
  }
  return out;
}

// Tables above this size would need more than ~64 MB.
constexpr Index kHankelTableMax = 2048;
constexpr Index kDenseMatvecMax = 2048;

}  // namespace

double fio1d_phase(Index i, Index j, const GridSpec& g) {
  check_index(i, j, g.n);
  const double x = g.x(i), xi = g.xi(j);
  return x * xi + fio_c(x) * std::abs(xi);
}

double fio_smooth_phase(Index i, Index j, const GridSpec& g) {
  check_index(i, j, g.n);
  const double x = g.x(i), xi = g.xi(j);
  return (x + fio_c(x)) * xi;
}

cd fio1d_entry(Index i, Index j, const GridSpec& g) { return expi_cycles(fio1d_phase(i, j, g)); }
cd fio_smooth_entry(Index i, Index j, const GridSpec& g) { return expi_cycles(fio_smooth_phase(i, j, g)); }

SplitPhase split_phase_pieces(const GridSpec& g) {
  SplitPhase s;
  s.splitCol = g.zeroColumn();
  const Index nNeg = s.splitCol, nPos = g.n - s.splitCol;
  s.negative.u.resize(g.n, 1);
  s.positive.u.resize(g.n, 1);
  for (Index i = 0; i < g.n; ++i) {
    const double x = g.x(i);
    s.negative.u(i, 0) = x - fio_c(x);
    s.positive.u(i, 0) = x + fio_c(x);
  }
  s.negative.v.resize(nNeg, 1);
  for (Index j = 0; j < nNeg; ++j) s.negative.v(j, 0) = g.xi(j);
  s.positive.v.resize(nPos, 1);
  for (Index j = 0; j < nPos; ++j) s.positive.v(j, 0) = g.xi(j + s.splitCol);
  return s;
}

VectorXcd split_nufft_apply(const GridSpec& g, const VectorXcd& f, double tol) {
  if (f.size() != g.n) throw ParameterError("split_nufft_apply: input length does not match the grid");
  const SplitPhase s = split_phase_pieces(g);
  const NufftPlan neg(s.negative.v, s.negative.u, tol);
  const NufftPlan pos(s.positive.v, s.positive.u, tol);
  return neg.execute(f.head(s.splitCol)) + pos.execute(f.tail(g.n - s.splitCol));
}

SyntheticKind parse_synthetic_kind(const std::string& s) {
  if (s == "separable") return SyntheticKind::Separable;
  if (s == "smooth-low-rank") return SyntheticKind::SmoothLowRank;
  if (s == "planted-breaks") return SyntheticKind::PlantedBreaks;
  throw ParameterError("unknown synthetic phase kind '" + s + "'");
}

const char* synthetic_kind_name(SyntheticKind k) {
  switch (k) {
    case SyntheticKind::Separable: return "separable";
    case SyntheticKind::SmoothLowRank: return "smooth-low-rank";
    case SyntheticKind::PlantedBreaks: return "planted-breaks";
  }
  return "?";
}

SyntheticPhase synthetic_phase(SyntheticKind kind, const SyntheticParams& p, const GridSpec& g) {
  SyntheticPhase s;
  s.kind = kind;
  s.colBreaks = {0};
  const Index n = g.n;
  std::mt19937_64 rng(p.seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  switch (kind) {
    case SyntheticKind::Separable: {
      // At most 3/8 cycle per frequency step, below the aliasing limit of 1/2.
      s.truth.u.resize(n, 1);
      s.truth.v.resize(n, 1);
      for (Index i = 0; i < n; ++i) s.truth.u(i, 0) = 0.25 + 0.125 * std::sin(kTwoPi * g.x(i));
      for (Index j = 0; j < n; ++j) s.truth.v(j, 0) = g.xi(j);
      break;
    }
    case SyntheticKind::SmoothLowRank: {
      if (p.rank < 1) throw ParameterError("synthetic_phase: rank must be positive");
      // Term k: a_k(x) b_k(xi) with |d/dxi| bounded by about 1/(4k), so the whole
      // phase moves by well under half a cycle per index.
      s.truth.u.resize(n, p.rank);
      s.truth.v.resize(n, p.rank);
      for (Index k = 0; k < p.rank; ++k) {
        const double fa = static_cast<double>(k + 1), ph1 = kTwoPi * unif(rng), ph2 = kTwoPi * unif(rng);
        const double amp = 0.5 + 0.5 * unif(rng);
        for (Index i = 0; i < n; ++i)
          s.truth.u(i, k) = amp * (1.0 + 0.5 * std::cos(kTwoPi * fa * g.x(i) + ph1)) / (fa * fa);
        for (Index j = 0; j < n; ++j) {
          const double t = g.xi(j) / static_cast<double>(n);
          s.truth.v(j, k) = static_cast<double>(n) / (6.0 * kPi * fa) * std::sin(kPi * fa * t + ph2);
        }
      }
      break;
    }
    case SyntheticKind::PlantedBreaks: {
      const Index bc = p.breakCol < 0 ? n / 2 : p.breakCol;
      if (bc < 3 || bc >= n - 3) throw ParameterError("synthetic_phase: break column too close to the edge");
      s.colBreaks = {0, bc};
      // Smooth rank-1 part plus a jump (jump + 0.1 x) on columns >= bc.
      s.truth.u.resize(n, 3);
      s.truth.v.resize(n, 3);
      for (Index i = 0; i < n; ++i) {
        const double x = g.x(i);
        s.truth.u(i, 0) = 0.2 + 0.05 * std::sin(kTwoPi * x);
        s.truth.u(i, 1) = p.jump;
        s.truth.u(i, 2) = 0.1 * x;
      }
      for (Index j = 0; j < n; ++j) {
        const double h = j >= bc ? 1.0 : 0.0;
        s.truth.v(j, 0) = g.xi(j);
        s.truth.v(j, 1) = h;
        s.truth.v(j, 2) = h;
      }
      break;
    }
  }
  return s;
}

MatrixXcd Kernel::dense() const {
  IndexList all(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) all[static_cast<std::size_t>(i)] = i;
  return block(all, all);
}

bool is_known_kernel(const std::string& id) {
  if (id == "fio1d" || id == "fio-smooth" || id == "hankel" || id == "fio-split") return true;
  if (id.rfind("synthetic:", 0) == 0) {
    try {
      parse_synthetic_kind(id.substr(10));
      return true;
    } catch (const ParameterError&) {
      return false;
    }
  }
  return false;
}

Kernel make_kernel(const std::string& id, Index n, const SyntheticParams& p) {
  const GridSpec g(n);
  Kernel k;
  k.id = id;
  k.n = n;
  k.amplitude = [](Index, Index) { return 1.0; };
  if (id == "fio1d" || id == "fio-split") {
    k.phase = [g](Index i, Index j) { return fio1d_phase(i, j, g); };
    k.block = block_from_entries([g](Index i, Index j) { return fio1d_entry(i, j, g); });
    if (id == "fio-split") k.colSplits = {0, g.zeroColumn()};
  } else if (id == "fio-smooth") {
    k.phase = [g](Index i, Index j) { return fio_smooth_phase(i, j, g); };
    k.block = block_from_entries([g](Index i, Index j) { return fio_smooth_entry(i, j, g); });
    auto exact = std::make_shared<RealFactor>();
    exact->u.resize(n, 1);
    exact->v.resize(n, 1);
    for (Index i = 0; i < n; ++i) exact->u(i, 0) = g.x(i) + fio_c(g.x(i));
    for (Index j = 0; j < n; ++j) exact->v(j, 0) = g.xi(j);
    k.exactPhase = exact;
  } else if (id == "hankel") {
    KernelAccess::BlockFn raw;
    if (n <= kHankelTableMax) {
      auto table = std::make_shared<const MatrixXcd>(hankel_table(n));
      raw = [table](const IndexList& I, const IndexList& J) {
        MatrixXcd out(static_cast<Index>(I.size()), static_cast<Index>(J.size()));
        for (std::size_t b = 0; b < J.size(); ++b)
          for (std::size_t a = 0; a < I.size(); ++a)
            out(static_cast<Index>(a), static_cast<Index>(b)) = (*table)(I[a], J[b]);
        return out;
      };
    } else {
      raw = [n](const IndexList& I, const IndexList& J) { return hankel_block(n, I, J); };
    }
    k.block = [raw, n](const IndexList& I, const IndexList& J) {
      for (Index i : I) check_index(i, 0, n);
      for (Index j : J) check_index(0, j, n);
      return raw(I, J);
    };
    k.amplitude = [raw](Index i, Index j) { return std::abs(raw({i}, {j})(0, 0)); };
    // Debye phase corrected to the exact argument of H.
    k.phase = [raw, n](Index i, Index j) {
      const double x = hankel_point(i, n);
      const double debye = hankel_debye_phase(j, x);
      const double arg = std::arg(raw({i}, {j})(0, 0)) / kTwoPi;
      return debye + wrap_half(arg - debye);
    };
  } else if (id.rfind("synthetic:", 0) == 0) {
    const SyntheticKind kind = parse_synthetic_kind(id.substr(10));
    auto s = std::make_shared<const SyntheticPhase>(synthetic_phase(kind, p, g));
    k.phase = [s](Index i, Index j) { return (*s)(i, j); };
    k.block = [s, n](const IndexList& I, const IndexList& J) {
      for (Index i : I) check_index(i, 0, n);
      for (Index j : J) check_index(0, j, n);
      const MatrixXd ph = s->truth.block(I, J);
      return MatrixXcd(ph.unaryExpr([](double v) { return expi_cycles(v); }));
    };
    k.colSplits = s->colBreaks;
    k.exactPhase = std::make_shared<const RealFactor>(s->truth);
  } else {
    throw ParameterError("unknown kernel '" + id + "'");
  }
  return k;
}

KernelAccess make_access(const Kernel& k, Scenario s, const RecoveryOptions& opt) {
  const Index n = k.n;
  switch (s) {
    case Scenario::Entry:
      return KernelAccess::entry(n, k.block);
    case Scenario::Matvec: {
      // Dense direct products: a cached matrix up to kDenseMatvecMax, row panels above.
      std::shared_ptr<const MatrixXcd> dense;
      if (n <= kDenseMatvecMax) dense = std::make_shared<const MatrixXcd>(k.dense());
      auto blockFn = k.block;
      auto product = [blockFn, dense, n](const VectorXcd& f, bool transpose) {
        if (f.size() != n) throw ParameterError("matvec: input length does not match the kernel");
        if (dense) return VectorXcd(transpose ? VectorXcd(dense->transpose() * f) : VectorXcd(*dense * f));
        VectorXcd g = VectorXcd::Zero(n);
        const Index panel = 64;
        IndexList all(static_cast<std::size_t>(n));
        for (Index i = 0; i < n; ++i) all[static_cast<std::size_t>(i)] = i;
        for (Index s0 = 0; s0 < n; s0 += panel) {
          IndexList rows;
          for (Index i = s0; i < std::min(n, s0 + panel); ++i) rows.push_back(i);
          const MatrixXcd b = blockFn(rows, all);
          if (transpose) g += b.transpose() * f.segment(s0, static_cast<Index>(rows.size()));
          else g.segment(s0, static_cast<Index>(rows.size())) = b * f;
        }
        return g;
      };
      return KernelAccess::matvec(
          n, [product](const VectorXcd& f) { return product(f, false); },
          [product](const VectorXcd& f) { return product(f, true); });
    }
    case Scenario::Samples: {
      std::mt19937_64 rng(phase_seed(opt.seed));
      const Index cnt = std::min(n, opt.rank * opt.oversampling);
      SampleSet set;
      set.rowIdx = merge_indices(sample_indices(rng, n, cnt), {0});
      set.colIdx = merge_indices(sample_indices(rng, n, cnt), {0});
      const Index nr = static_cast<Index>(set.rowIdx.size()), nc = static_cast<Index>(set.colIdx.size());
      set.ampRows.resize(nr, n);
      set.phaseRows.resize(nr, n);
      set.ampCols.resize(n, nc);
      set.phaseCols.resize(n, nc);
      for (Index a = 0; a < nr; ++a)
        for (Index j = 0; j < n; ++j) {
          set.ampRows(a, j) = k.amplitude(set.rowIdx[static_cast<std::size_t>(a)], j);
          set.phaseRows(a, j) = k.phase(set.rowIdx[static_cast<std::size_t>(a)], j);
        }
      for (Index b = 0; b < nc; ++b)
        for (Index i = 0; i < n; ++i) {
          set.ampCols(i, b) = k.amplitude(i, set.colIdx[static_cast<std::size_t>(b)]);
          set.phaseCols(i, b) = k.phase(i, set.colIdx[static_cast<std::size_t>(b)]);
        }
      return KernelAccess::samples(n, std::move(set));
    }
  }
  throw ParameterError("unknown scenario");
}

}  // namespace oit
