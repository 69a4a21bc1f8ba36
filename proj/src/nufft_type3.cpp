#include "oit/nufft_type3.hpp"

#include <fftw3.h>

#include <mutex>

namespace oit {

namespace {

std::mutex& fftw_mutex() {
  static std::mutex m;
  return m;
}

// Smallest n' >= n whose prime factors are 2, 3, 5 or 7, and even.
Index next_fast_size(Index n) {
  for (Index k = std::max<Index>(n, 2);; ++k) {
    if (k % 2) continue;
    Index r = k;
    for (Index p : {2, 3, 5, 7})
      while (r % p == 0) r /= p;
    if (r == 1) return k;
  }
}

struct FftwBuffer {
  fftw_complex* p = nullptr;
  explicit FftwBuffer(std::size_t n) {
    p = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n));
    if (!p) throw std::bad_alloc();
  }
  ~FftwBuffer() { fftw_free(p); }
  FftwBuffer(const FftwBuffer&) = delete;
  FftwBuffer& operator=(const FftwBuffer&) = delete;
  cd* data() { return reinterpret_cast<cd*>(p); }
};

// Beyond this many grid points the plan is refused instead of exhausting memory.
constexpr double kMaxGrid = 1u << 28;

// Outer Gaussian: amplification e^{b} of the final deconvolution.
constexpr double kAmplification = 2.0;
constexpr double kOversampling = 2.0;

}  // namespace

struct NufftPlan::Impl {
  int d = 1;
  Index n = 0, m = 0;
  double tol = 0;
  int msp = 0;
  Index spread = 0;  // outer points per source per dimension

  // per dimension
  Index M[2] = {0, 0}, ng[2] = {1, 1}, mr[2] = {1, 1};
  double h[2] = {0, 0};
  std::vector<double> deconv[2];  // 1/G_l for l = -M..M

  std::vector<cd> pre;   // per source
  std::vector<cd> post;  // per target
  std::vector<Index> srcStart[2];
  std::vector<double> srcW[2];
  std::vector<Index> tgtStart[2];
  std::vector<double> tgtW[2];

  fftw_plan plan = nullptr;

  ~Impl() {
    if (plan) {
      std::lock_guard<std::mutex> lock(fftw_mutex());
      fftw_destroy_plan(plan);
    }
  }
};

NufftPlan::NufftPlan(const MatrixXd& sources, const MatrixXd& targets, double tol)
    : impl_(std::make_unique<Impl>()) {
  Impl& P = *impl_;
  if (sources.cols() != targets.cols()) throw ParameterError("nufft: source and target dimensions differ");
  const Index dim = sources.cols();
  if (dim == 3) throw NotImplementedError("nufft: 3-dimensional type-3 transforms are not implemented");
  if (dim < 1 || dim > 3) throw ParameterError("nufft: dimension must be 1 or 2");
  if (sources.rows() < 1 || targets.rows() < 1) throw ParameterError("nufft: need at least one source and one target");
  if (!sources.allFinite() || !targets.allFinite()) throw InvalidInputError("nufft: non-finite points");
  if (!(tol > 1e-15 && tol < 1e-1)) throw PlanningError("nufft: tolerance must lie in (1e-15, 1e-1)");
  P.d = static_cast<int>(dim);
  P.n = sources.rows();
  P.m = targets.rows();
  P.tol = tol;

  const double Lw = std::log(1.0 / tol) + 2.0;
  const double lambda = 1.0 + std::sqrt(1.0 + Lw / kAmplification);
  P.msp = std::clamp(static_cast<int>(std::ceil(-std::log10(tol))) + 2, 4, 16);

  std::vector<double> cq(P.d), cp(P.d), X(P.d), S(P.d), tau1(P.d);
  double total = 1.0;
  for (int k = 0; k < P.d; ++k) {
    const double qmin = sources.col(k).minCoeff(), qmax = sources.col(k).maxCoeff();
    const double pmin = targets.col(k).minCoeff(), pmax = targets.col(k).maxCoeff();
    cq[k] = 0.5 * (qmin + qmax);
    cp[k] = 0.5 * (pmin + pmax);
    X[k] = 0.5 * (qmax - qmin);
    S[k] = std::max(0.5 * (pmax - pmin), 1.0 / std::max(X[k], 1.0));
    P.h[k] = 1.0 / (lambda * S[k]);
    tau1[k] = kAmplification / (4.0 * kPi * kPi * S[k] * S[k]);
    const double w = std::sqrt(4.0 * tau1[k] * Lw);
    P.M[k] = static_cast<Index>(std::ceil((X[k] + w) / P.h[k]));
    P.ng[k] = 2 * P.M[k] + 1;
    P.mr[k] = next_fast_size(static_cast<Index>(std::ceil(kOversampling * static_cast<double>(P.ng[k]))));
    total *= static_cast<double>(P.mr[k]);
  }
  if (total > kMaxGrid) throw PlanningError("nufft: required grid exceeds the memory limit");

  // Outer spreading weights. Every source touches the same number of grid
  // points per dimension.
  for (int k = 0; k < P.d; ++k) {
    const double w = std::sqrt(4.0 * tau1[k] * Lw);
    const Index half = static_cast<Index>(std::ceil(w / P.h[k]));
    P.spread = std::max(P.spread, half);
    const Index W = 2 * half + 1;
    P.srcStart[k].resize(static_cast<std::size_t>(P.n));
    P.srcW[k].resize(static_cast<std::size_t>(P.n * W));
    for (Index j = 0; j < P.n; ++j) {
      const double y = sources(j, k) - cq[k];
      const Index l0 = std::clamp<Index>(static_cast<Index>(std::lround(y / P.h[k])) - half, -P.M[k], P.M[k] - W + 1);
      P.srcStart[k][static_cast<std::size_t>(j)] = l0;
      for (Index u = 0; u < W; ++u) {
        const double dlt = static_cast<double>(l0 + u) * P.h[k] - y;
        P.srcW[k][static_cast<std::size_t>(j * W + u)] = std::exp(-dlt * dlt / (4.0 * tau1[k]));
      }
    }
  }

  // Inner type-2: Gaussian gridding on the oversampled periodic grid.
  const double R = kOversampling;
  for (int k = 0; k < P.d; ++k) {
    const double nn = static_cast<double>(P.ng[k]);
    const double tau = kPi * P.msp / (nn * nn * R * (R - 0.5));
    const double mrd = static_cast<double>(P.mr[k]);
    P.deconv[k].resize(static_cast<std::size_t>(P.ng[k]));
    for (Index l = -P.M[k]; l <= P.M[k]; ++l)
      P.deconv[k][static_cast<std::size_t>(l + P.M[k])] =
          std::sqrt(kPi / tau) * std::exp(static_cast<double>(l * l) * tau);
    const Index W = 2 * P.msp;
    P.tgtStart[k].resize(static_cast<std::size_t>(P.m));
    P.tgtW[k].resize(static_cast<std::size_t>(P.m * W));
    for (Index t = 0; t < P.m; ++t) {
      const double s = targets(t, k) - cp[k];
      const double theta = kTwoPi * s * P.h[k];
      const Index mc = static_cast<Index>(std::floor(theta * mrd / kTwoPi));
      const Index m0 = mc - P.msp + 1;
      P.tgtStart[k][static_cast<std::size_t>(t)] = m0;
      for (Index u = 0; u < W; ++u) {
        const double dlt = theta - kTwoPi * static_cast<double>(m0 + u) / mrd;
        P.tgtW[k][static_cast<std::size_t>(t * W + u)] = std::exp(-dlt * dlt / (4.0 * tau)) / mrd;
      }
    }
  }

  P.pre.resize(static_cast<std::size_t>(P.n));
  for (Index j = 0; j < P.n; ++j) {
    double ph = 0.0;
    for (int k = 0; k < P.d; ++k) ph += cp[k] * (sources(j, k) - cq[k]);
    P.pre[static_cast<std::size_t>(j)] = expi_cycles(ph);
  }
  double cc = 0.0;
  for (int k = 0; k < P.d; ++k) cc += cp[k] * cq[k];
  P.post.resize(static_cast<std::size_t>(P.m));
  for (Index t = 0; t < P.m; ++t) {
    double ph = cc, scale = 1.0;
    for (int k = 0; k < P.d; ++k) {
      const double s = targets(t, k) - cp[k];
      ph += s * cq[k];
      // h / ghat1(s), ghat1(s) = sqrt(4 pi tau1) e^{-4 pi^2 tau1 s^2}
      scale *= P.h[k] / std::sqrt(4.0 * kPi * tau1[k]) * std::exp(4.0 * kPi * kPi * tau1[k] * s * s);
    }
    P.post[static_cast<std::size_t>(t)] = scale * expi_cycles(ph);
  }

  const std::size_t cells = static_cast<std::size_t>(P.mr[0] * P.mr[1]);
  FftwBuffer buf(cells);
  std::lock_guard<std::mutex> lock(fftw_mutex());
  if (P.d == 1)
    P.plan = fftw_plan_dft_1d(static_cast<int>(P.mr[0]), buf.p, buf.p, FFTW_BACKWARD, FFTW_ESTIMATE);
  else
    P.plan = fftw_plan_dft_2d(static_cast<int>(P.mr[0]), static_cast<int>(P.mr[1]), buf.p, buf.p,
                              FFTW_BACKWARD, FFTW_ESTIMATE);
  if (!P.plan) throw PlanningError("nufft: FFTW planning failed");
}

NufftPlan::~NufftPlan() = default;
NufftPlan::NufftPlan(NufftPlan&&) noexcept = default;
NufftPlan& NufftPlan::operator=(NufftPlan&&) noexcept = default;

VectorXcd NufftPlan::execute(const VectorXcd& c) const {
  const Impl& P = *impl_;
  if (c.size() != P.n) throw ParameterError("nufft: coefficient length does not match the source count");
  const Index n1 = P.ng[1];
  std::vector<cd> grid(static_cast<std::size_t>(P.ng[0] * n1), cd(0.0, 0.0));
  const Index W0 = static_cast<Index>(P.srcW[0].size() / static_cast<std::size_t>(P.n));
  const Index W1 = P.d == 2 ? static_cast<Index>(P.srcW[1].size() / static_cast<std::size_t>(P.n)) : 1;
  for (Index j = 0; j < P.n; ++j) {
    const cd cj = c(j) * P.pre[static_cast<std::size_t>(j)];
    if (cj == cd(0.0, 0.0)) continue;
    const Index a0 = P.srcStart[0][static_cast<std::size_t>(j)] + P.M[0];
    const double* w0 = &P.srcW[0][static_cast<std::size_t>(j * W0)];
    if (P.d == 1) {
      for (Index u = 0; u < W0; ++u) grid[static_cast<std::size_t>(a0 + u)] += cj * w0[u];
    } else {
      const Index a1 = P.srcStart[1][static_cast<std::size_t>(j)] + P.M[1];
      const double* w1 = &P.srcW[1][static_cast<std::size_t>(j * W1)];
      for (Index u = 0; u < W0; ++u) {
        const cd cu = cj * w0[u];
        cd* row = &grid[static_cast<std::size_t>((a0 + u) * n1 + a1)];
        for (Index v = 0; v < W1; ++v) row[v] += cu * w1[v];
      }
    }
  }

  const Index m0 = P.mr[0], m1 = P.mr[1];
  FftwBuffer buf(static_cast<std::size_t>(m0 * m1));
  cd* b = buf.data();
  std::fill(b, b + m0 * m1, cd(0.0, 0.0));
  for (Index l0 = -P.M[0]; l0 <= P.M[0]; ++l0) {
    const Index i0 = ((l0 % m0) + m0) % m0;
    const double d0 = P.deconv[0][static_cast<std::size_t>(l0 + P.M[0])];
    if (P.d == 1) {
      b[i0] = grid[static_cast<std::size_t>(l0 + P.M[0])] * d0;
      continue;
    }
    for (Index l1 = -P.M[1]; l1 <= P.M[1]; ++l1) {
      const Index i1 = ((l1 % m1) + m1) % m1;
      b[i0 * m1 + i1] = grid[static_cast<std::size_t>((l0 + P.M[0]) * n1 + l1 + P.M[1])] * d0 *
                        P.deconv[1][static_cast<std::size_t>(l1 + P.M[1])];
    }
  }
  fftw_execute_dft(P.plan, buf.p, buf.p);

  VectorXcd out(P.m);
  const Index T = 2 * P.msp;
  for (Index t = 0; t < P.m; ++t) {
    const Index s0 = P.tgtStart[0][static_cast<std::size_t>(t)];
    const double* g0 = &P.tgtW[0][static_cast<std::size_t>(t * T)];
    cd acc(0.0, 0.0);
    if (P.d == 1) {
      for (Index u = 0; u < T; ++u) acc += b[(((s0 + u) % m0) + m0) % m0] * g0[u];
    } else {
      const Index s1 = P.tgtStart[1][static_cast<std::size_t>(t)];
      const double* g1 = &P.tgtW[1][static_cast<std::size_t>(t * T)];
      for (Index u = 0; u < T; ++u) {
        const cd* row = b + ((((s0 + u) % m0) + m0) % m0) * m1;
        cd racc(0.0, 0.0);
        for (Index v = 0; v < T; ++v) racc += row[(((s1 + v) % m1) + m1) % m1] * g1[v];
        acc += racc * g0[u];
      }
    }
    out(t) = acc * P.post[static_cast<std::size_t>(t)];
  }
  return out;
}

int NufftPlan::dim() const { return impl_->d; }
Index NufftPlan::numSources() const { return impl_->n; }
Index NufftPlan::numTargets() const { return impl_->m; }
double NufftPlan::tolerance() const { return impl_->tol; }
double NufftPlan::oversampling() const { return kOversampling; }
Index NufftPlan::spreadWidth() const { return impl_->spread; }
std::vector<Index> NufftPlan::gridSize() const {
  std::vector<Index> out;
  for (int k = 0; k < impl_->d; ++k) out.push_back(impl_->ng[k]);
  return out;
}

VectorXcd nufft_direct(const MatrixXd& sources, const MatrixXd& targets, const VectorXcd& c) {
  if (sources.cols() != targets.cols() || c.size() != sources.rows())
    throw ParameterError("nufft_direct: shape mismatch");
  VectorXcd out(targets.rows());
  for (Index t = 0; t < targets.rows(); ++t) {
    cd acc(0.0, 0.0);
    for (Index j = 0; j < sources.rows(); ++j) acc += c(j) * expi_cycles(targets.row(t).dot(sources.row(j)));
    out(t) = acc;
  }
  return out;
}

}  // namespace oit
