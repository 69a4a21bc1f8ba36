#include "oit/phase_recovery.hpp"

#include <map>
#include <random>

namespace oit {

namespace {

constexpr double kAnchorTol = 1e-8;
constexpr double kBlockTau = kTwoPi;

// Thrown by recover_vector for an anchor at `pos`; recover_phase_samples maps
// it to global matrix coordinates.
struct AnchorMismatch {
  Index pos;
};

}  // namespace

double tv_norm(const VectorXd& v, int order) {
  if (order < 1 || order > 3) throw ParameterError("tv_norm: order must be 1, 2 or 3");
  if (v.size() < order + 1) throw ParameterError("tv_norm: vector too short for the order");
  const Index n = v.size();
  double s = 0.0;
  if (order == 1) {
    for (Index i = 1; i < n; ++i) s += std::abs(v(i) - v(i - 1));
  } else if (order == 2) {
    for (Index i = 1; i + 1 < n; ++i) s += std::abs(v(i + 1) + v(i - 1) - 2 * v(i));
  } else {
    for (Index i = 1; i + 2 < n; ++i)
      s += std::abs(v(i + 1) + v(i - 1) - 2 * v(i) - (v(i + 2) + v(i) - 2 * v(i + 1)));
  }
  return s;
}

double unwrap_next(double target, double u) {
  const double d = target - u;
  double k = std::round(d);
  // Ties land in [target - 1/2, target + 1/2), the convention of wrap_half and
  // of the frequency grid [-N/2, N/2): a Nyquist column unwraps with slope -1/2.
  if (std::abs(d - std::trunc(d)) == 0.5) k = std::floor(d);
  return u + k;
}

RecoveredVector recover_vector(const VectorXd& u, double tau, const IndexList& knownBreaks,
                               const std::vector<Anchor>& anchors) {
  const Index n = u.size();
  if (n < 1) throw ParameterError("recover_vector: empty observation");
  if (!(tau > 0)) throw ParameterError("recover_vector: tau must be positive");
  std::vector<double> fixed(static_cast<std::size_t>(n), std::numeric_limits<double>::quiet_NaN());
  for (const Anchor& a : anchors) {
    if (a.pos < 0 || a.pos >= n) throw ParameterError("recover_vector: anchor out of range");
    if (std::abs(wrap_half(a.value - u(a.pos))) > kAnchorTol) throw AnchorMismatch{a.pos};
    fixed[static_cast<std::size_t>(a.pos)] = a.value;
  }
  IndexList S{0};
  for (Index b : knownBreaks) {
    if (b < 0 || b >= n) throw ParameterError("recover_vector: break out of range");
    S.push_back(b);
  }
  std::sort(S.begin(), S.end());
  S.erase(std::unique(S.begin(), S.end()), S.end());

  VectorXd v(n);
  auto assign = [&](Index a, double target) {
    const double f = fixed[static_cast<std::size_t>(a)];
    v(a) = std::isnan(f) ? unwrap_next(target, u(a)) : f;
  };

  for (std::size_t c = 0; c < S.size(); ++c) {
    const Index st = S[c];
    const Index ed = c + 1 < S.size() ? S[c + 1] - 1 : n - 1;
    const double f0 = fixed[static_cast<std::size_t>(st)];
    if (!std::isnan(f0))
      v(st) = f0;
    else if (c == 0)
      v(st) = u(st);
    else
      v(st) = unwrap_next(v(st - 1), u(st));
    if (ed - st + 1 < 4) {
      for (Index a = st + 1; a <= ed; ++a) assign(a, v(a - 1));
      continue;
    }
    assign(st + 1, v(st));
    assign(st + 2, 2 * v(st + 1) - v(st));
    for (Index a = st + 3; a <= ed; ++a) {
      assign(a, 3 * v(a - 1) - 3 * v(a - 2) + v(a - 3));
      if (std::abs(v(a) + v(a - 2) - 2 * v(a - 1)) > tau) {
        S.insert(S.begin() + static_cast<std::ptrdiff_t>(c) + 1, a);
        break;
      }
    }
  }
  return {v, S};
}

PhaseObserver observer_from_matrix(const MatrixXd& args) {
  PhaseObserver obs;
  obs.nrows = args.rows();
  obs.ncols = args.cols();
  obs.row = [args](Index i) { return VectorXd(args.row(i).transpose()); };
  obs.col = [args](Index j) { return VectorXd(args.col(j)); };
  return obs;
}

RecoveredPhase recover_phase_samples(const PhaseObserver& obs, const IndexList& rowIdx,
                                     const IndexList& colIdx, double tau) {
  const Index m = obs.nrows, n = obs.ncols;
  if (m < 1 || n < 1) throw ParameterError("recover_phase_samples: empty matrix");
  for (Index i : rowIdx)
    if (i < 0 || i >= m) throw ParameterError("recover_phase_samples: row index out of range");
  for (Index j : colIdx)
    if (j < 0 || j >= n) throw ParameterError("recover_phase_samples: column index out of range");

  std::map<Index, VectorXd> rowObs, colObs;
  auto rowOf = [&](Index i) -> const VectorXd& {
    auto it = rowObs.find(i);
    if (it == rowObs.end()) it = rowObs.emplace(i, obs.row(i)).first;
    return it->second;
  };
  auto colOf = [&](Index j) -> const VectorXd& {
    auto it = colObs.find(j);
    if (it == colObs.end()) it = colObs.emplace(j, obs.col(j)).first;
    return it->second;
  };

  RecoveredPhase out;
  out.rowBreaks = recover_vector(colOf(0), tau).breaks;
  out.colBreaks = recover_vector(rowOf(0), tau).breaks;

  auto augment = [](IndexList idx, const IndexList& breaks, Index len) {
    idx.push_back(0);
    for (std::size_t b = 0; b < breaks.size(); ++b) {
      const Index end = b + 1 < breaks.size() ? breaks[b + 1] : len;
      for (Index k = breaks[b]; k < std::min(end, breaks[b] + 3); ++k) idx.push_back(k);
    }
    std::sort(idx.begin(), idx.end());
    idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
    return idx;
  };
  out.rowIdx = augment(rowIdx, out.rowBreaks, m);
  out.colIdx = augment(colIdx, out.colBreaks, n);

  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::map<Index, VectorXd> rowVal, colVal;
  for (Index i : out.rowIdx) rowVal.emplace(i, VectorXd::Constant(n, nan));
  for (Index j : out.colIdx) colVal.emplace(j, VectorXd::Constant(m, nan));

  // Recover obs(start:start+len) of a row (isRow) or column with anchors given
  // in segment-local positions; anchor mismatches are reported globally.
  auto run = [&](bool isRow, Index line, Index start, Index len,
                 const std::vector<Anchor>& anchors) {
    const VectorXd& full = isRow ? rowOf(line) : colOf(line);
    try {
      RecoveredVector rv = recover_vector(full.segment(start, len), kBlockTau, {}, anchors);
      (isRow ? rowVal : colVal)[line].segment(start, len) = rv.values;
    } catch (const AnchorMismatch& e) {
      const Index i = isRow ? line : start + e.pos;
      const Index j = isRow ? start + e.pos : line;
      throw ConsistencyError("inconsistent phase observations at (" + std::to_string(i) + ", " +
                                 std::to_string(j) + ")",
                             i, j);
    }
  };

  IndexList rb = out.rowBreaks, cb = out.colBreaks;
  rb.push_back(m);
  cb.push_back(n);
  for (std::size_t bi = 0; bi + 1 < rb.size(); ++bi) {
    const Index rs = rb[bi], re = rb[bi + 1] - 1, lr = re - rs + 1;
    IndexList rowsIn;
    for (Index i : out.rowIdx)
      if (i >= rs && i <= re) rowsIn.push_back(i);
    for (std::size_t bj = 0; bj + 1 < cb.size(); ++bj) {
      const Index cs = cb[bj], ce = cb[bj + 1] - 1, lc = ce - cs + 1;
      IndexList colsIn;
      for (Index j : out.colIdx)
        if (j >= cs && j <= ce) colsIn.push_back(j);

      const double u0 = rowOf(rs)(cs);
      double corner = u0;
      if (cs > 0)
        corner = unwrap_next(rowVal[rs](cs - 1), u0);
      else if (rs > 0)
        corner = unwrap_next(colVal[cs](rs - 1), u0);

      run(true, rs, cs, lc, {{0, corner}});
      run(false, cs, rs, lr, {{0, corner}});
      for (Index c = cs + 1; c <= std::min(ce, cs + 2); ++c)
        run(false, c, rs, lr, {{0, rowVal[rs](c)}});
      for (Index i : rowsIn) {
        if (i == rs) continue;
        std::vector<Anchor> a;
        for (Index c = cs; c <= std::min(ce, cs + 2); ++c) a.push_back({c - cs, colVal[c](i)});
        run(true, i, cs, lc, a);
      }
      for (Index j : colsIn) {
        if (j <= cs + 2) continue;
        std::vector<Anchor> a;
        for (Index i : rowsIn) a.push_back({i - rs, rowVal[i](j)});
        run(false, j, rs, lr, a);
      }
    }
  }

  out.rowSamples.resize(static_cast<Index>(out.rowIdx.size()), n);
  out.colSamples.resize(m, static_cast<Index>(out.colIdx.size()));
  for (std::size_t a = 0; a < out.rowIdx.size(); ++a)
    out.rowSamples.row(static_cast<Index>(a)) = rowVal[out.rowIdx[a]].transpose();
  for (std::size_t b = 0; b < out.colIdx.size(); ++b)
    out.colSamples.col(static_cast<Index>(b)) = colVal[out.colIdx[b]];
  for (std::size_t a = 0; a < out.rowIdx.size(); ++a)
    for (std::size_t b = 0; b < out.colIdx.size(); ++b) {
      const Index i = out.rowIdx[a], j = out.colIdx[b];
      if (std::abs(out.rowSamples(static_cast<Index>(a), j) -
                   out.colSamples(i, static_cast<Index>(b))) > 1e-10)
        throw ConsistencyError("recovered rows and columns disagree at (" + std::to_string(i) +
                                   ", " + std::to_string(j) + ")",
                               i, j);
    }
  return out;
}

namespace {

// Scenario 2 amplitude/phase probes go through the matvec oracle with natural
// basis vectors; Scenario 1 reads rows/columns directly. Both return the same
// values bitwise for a dense emulation.
MatrixXcd kernel_rows(const KernelAccess& access, const IndexList& I) {
  MatrixXcd out(static_cast<Index>(I.size()), access.size());
  for (std::size_t a = 0; a < I.size(); ++a) out.row(static_cast<Index>(a)) = access.row(I[a]).transpose();
  return out;
}

MatrixXcd kernel_cols(const KernelAccess& access, const IndexList& J) {
  MatrixXcd out(access.size(), static_cast<Index>(J.size()));
  for (std::size_t b = 0; b < J.size(); ++b) out.col(static_cast<Index>(b)) = access.col(J[b]);
  return out;
}

double observed_phase(cd k, double amp, Index i, Index j) {
  if (std::abs(amp) < 1e-14)
    throw DegenerateAmplitudeError("amplitude vanishes at sampled entry (" + std::to_string(i) +
                                       ", " + std::to_string(j) + ")",
                                   i, j);
  double p = std::arg(k) / kTwoPi;
  if (amp < 0) p += 0.5;
  return frac1(p);
}

}  // namespace

RealFactor recover_amplitude(const KernelAccess& access, const RecoveryOptions& opt) {
  const Index n = access.size();
  RealFactor f;
  if (access.scenario() == Scenario::Entry) {
    MatrixSampler<double> s;
    s.nrows = s.ncols = n;
    s.sample = [&access](const IndexList& I, const IndexList& J) {
      return MatrixXd(access.block(I, J).cwiseAbs());
    };
    SvdOptions so;
    so.rank = opt.rank;
    so.oversampling = opt.oversampling;
    so.iters = opt.iters;
    so.seed = opt.seed;
    f = randomized_svd(s, so);
  } else if (access.scenario() == Scenario::Matvec) {
    std::mt19937_64 rng(opt.seed);
    const Index k = opt.rank * opt.oversampling;
    IndexList I = sample_indices(rng, n, k), J = sample_indices(rng, n, k);
    MatrixXd rows = kernel_rows(access, I).cwiseAbs();
    MatrixXd cols = kernel_cols(access, J).cwiseAbs();
    f = restricted_svd_from_samples<double>(rows, cols, I, J, opt.rank);
  } else {
    const SampleSet& s = access.sampleSet();
    f = restricted_svd_from_samples<double>(s.ampRows, s.ampCols, s.rowIdx, s.colIdx,
                                            std::min<Index>(opt.rank, static_cast<Index>(std::min(s.rowIdx.size(), s.colIdx.size()))));
  }
  return trim(f, opt.ampTrim);
}

RealFactor recover_phase_factor(const KernelAccess& access, const RealFactor& amp,
                                const RecoveryOptions& opt, RecoveredPhase* samplesOut) {
  const Index n = access.size();
  if (access.scenario() == Scenario::Samples) {
    const SampleSet& s = access.sampleSet();
    const Index r =
        std::min<Index>(opt.rank, static_cast<Index>(std::min(s.rowIdx.size(), s.colIdx.size())));
    return restricted_svd_from_samples<double>(s.phaseRows, s.phaseCols, s.rowIdx, s.colIdx, r);
  }
  if (amp.rows() != n || amp.cols() != n)
    throw ParameterError("amplitude factor does not match kernel size");
  const Index k = opt.rank * opt.oversampling;
  if (k > n) throw ParameterError("r*q exceeds the kernel size");
  std::mt19937_64 rng(phase_seed(opt.seed));
  IndexList R = sample_indices(rng, n, k), C = sample_indices(rng, n, k);

  const MatrixXd ampU = amp.scaledU();
  PhaseObserver obs;
  obs.nrows = obs.ncols = n;
  obs.row = [&](Index i) {
    VectorXcd kr = access.row(i);
    VectorXd a = amp.v * ampU.row(i).transpose();
    VectorXd out(n);
    for (Index j = 0; j < n; ++j) out(j) = observed_phase(kr(j), a(j), i, j);
    return out;
  };
  obs.col = [&](Index j) {
    VectorXcd kc = access.col(j);
    VectorXd a = ampU * amp.v.row(j).transpose();
    VectorXd out(n);
    for (Index i = 0; i < n; ++i) out(i) = observed_phase(kc(i), a(i), i, j);
    return out;
  };
  RecoveredPhase rp = recover_phase_samples(obs, R, C, opt.tau);
  RealFactor f = restricted_svd_from_samples<double>(rp.rowSamples, rp.colSamples, rp.rowIdx,
                                                     rp.colIdx, opt.rank);
  if (samplesOut) *samplesOut = std::move(rp);
  return f;
}

}  // namespace oit
