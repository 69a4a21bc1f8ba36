#include "oit/butterfly.hpp"

#include <bit>
#include <exception>
#include <fstream>
#include <mutex>
#include <thread>

namespace oit {

static_assert(std::endian::native == std::endian::little,
              "butterfly serialization assumes a little-endian host");

Range DyadicTree::node(int level, Index k) const {
  if (level < 0 || level > depth || k < 0 || k >= nodeCount(level))
    throw ParameterError("DyadicTree::node: (level, index) out of range");
  const Index len = n >> level;
  return {k * len, len};
}

ButterflyTrees build_trees(Index n, Index leaf) {
  if (n < 1 || leaf < 1) throw ParameterError("build_trees: sizes must be positive");
  if (n % leaf != 0)
    throw ParameterError("build_trees: N = " + std::to_string(n) +
                         " is not a multiple of the leaf size " + std::to_string(leaf) +
                         "; pad the input to leaf * 2^L points");
  Index m = n / leaf;
  if ((m & (m - 1)) != 0)
    throw ParameterError("build_trees: N / leaf = " + std::to_string(m) +
                         " is not a power of two; pad the input to leaf * 2^L points");
  int L = std::countr_zero(static_cast<std::uint64_t>(m));
  if (L % 2 == 1) {
    if (leaf % 2 == 0) {
      leaf /= 2;
      ++L;
    } else {
      leaf *= 2;
      --L;
    }
  }
  DyadicTree t{n, leaf, L};
  return {t, t};
}

namespace {

template <class F>
void parallel_for(Index count, int threads, F&& body) {
  if (threads <= 1 || count < 64) {
    for (Index i = 0; i < count; ++i) body(i);
    return;
  }
  const int nt = static_cast<int>(std::min<Index>(threads, count));
  std::vector<std::thread> pool;
  std::exception_ptr err;
  std::mutex m;
  for (int t = 0; t < nt; ++t) {
    pool.emplace_back([&, t] {
      const Index lo = count * t / nt, hi = count * (t + 1) / nt;
      try {
        for (Index i = lo; i < hi; ++i) body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(m);
        if (!err) err = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  if (err) std::rethrow_exception(err);
}

// y = left .* (Op * (right .* x)) accumulated into out.
void apply_term(const ButterflyStage& st, const ButterflyTerm& term, const cd* in, cd* out,
                Index outLen) {
  thread_local std::vector<cd> tmp;
  tmp.assign(in + term.inOff, in + term.inOff + term.inLen);
  if (term.right.size() > 0)
    for (Index s = 0; s < term.inLen; ++s) tmp[static_cast<std::size_t>(s)] *= term.right(s);
  for (Index t = 0; t < outLen; ++t) {
    cd acc(0.0, 0.0);
    if (term.lag >= 0) {
      const MatrixXd& M = st.lags[static_cast<std::size_t>(term.lag)];
      double re = 0.0, im = 0.0;
      for (Index s = 0; s < term.inLen; ++s) {
        const double w = M(t, s);
        re += w * tmp[static_cast<std::size_t>(s)].real();
        im += w * tmp[static_cast<std::size_t>(s)].imag();
      }
      acc = {re, im};
    } else {
      const MatrixXcd& D = st.dense[static_cast<std::size_t>(term.dense)];
      for (Index s = 0; s < term.inLen; ++s) acc += D(t, s) * tmp[static_cast<std::size_t>(s)];
    }
    if (term.left.size() > 0) acc *= term.left(t);
    out[t] += acc;
  }
}

// Builds the butterfly stages for one phase factor. Factorization and the
// on-the-fly apply share this builder so both run identical arithmetic.
class StageBuilder {
public:
  StageBuilder(const RealFactor& phase, const ButterflyOptions& opt)
      : phi_(phase), opt_(opt) {
    if (phase.rows() != phase.cols())
      throw ParameterError("butterfly: phase factor must be square");
    if (opt.rEps < 2) throw ParameterError("butterfly: r_eps must be at least 2");
    ButterflyTrees t = build_trees(phase.rows(), opt.leaf);
    tree_ = t.x;
    n_ = tree_.n;
    L_ = tree_.depth;
    h_ = L_ / 2;
  }

  int depth() const { return L_; }
  Index leaf() const { return tree_.leaf; }
  int stageCount() const { return L_ + 3; }

  ButterflyStage build(int s) const {
    if (s == 0) return init();
    if (s <= h_) return xiRecursion(s);
    if (s == h_ + 1) return switchStage();
    if (s <= L_ + 1) return xRecursion(s - 1);
    return finalStage();
  }

private:
  // Piece-local nodes of a length-len node.
  IndexList localNodes(Index len) const { return interpolation_nodes(Range{0, len}, opt_.rEps); }

  void checkGrid(const IndexList& nodes, Index len, int level) const {
    if (nodes.size() < 2 && len > 1)
      throw DegenerateBlockError("butterfly: interpolation grid collapsed at level " +
                                 std::to_string(level) + " (A, B) blocks of length " +
                                 std::to_string(len));
  }

  static MatrixXd lagrangeMatrix(const IndexList& nodes, const std::vector<double>& queries) {
    MatrixXd M(static_cast<Index>(queries.size()), static_cast<Index>(nodes.size()));
    for (std::size_t q = 0; q < queries.size(); ++q)
      M.row(static_cast<Index>(q)) = lagrange_row(nodes, queries[q]).transpose();
    return M;
  }

  ButterflyStage init() const {
    ButterflyStage st;
    st.kind = StageKind::Init;
    st.level = 0;
    const Index leaf = tree_.leaf, nb = tree_.nodeCount(L_);
    const IndexList nB = localNodes(leaf);
    checkGrid(nB, leaf, 0);
    const Index k = static_cast<Index>(nB.size());
    std::vector<double> q;
    for (Index j = 0; j < leaf; ++j) q.push_back(static_cast<double>(j));
    st.lags.push_back(lagrangeMatrix(nB, q).transpose());  // k x leaf
    st.inSize = n_;
    st.outSize = nb * k;
    const Index cA = Range{0, n_}.center();
    st.blocks.resize(static_cast<std::size_t>(nb));
    parallel_for(nb, opt_.threads, [&](Index b) {
      const Index bs = b * leaf;
      ButterflyBlock& blk = st.blocks[static_cast<std::size_t>(b)];
      blk.outOff = b * k;
      blk.outLen = k;
      ButterflyTerm term;
      term.inOff = bs;
      term.inLen = leaf;
      term.lag = 0;
      term.right.resize(leaf);
      for (Index j = 0; j < leaf; ++j) term.right(j) = expi_cycles(phi_(cA, bs + j));
      blk.terms.push_back(std::move(term));
    });
    return st;
  }

  ButterflyStage xiRecursion(int l) const {
    ButterflyStage st;
    st.kind = StageKind::XiRecursion;
    st.level = l;
    const Index lenA = n_ >> l, lenB = tree_.leaf << l, lenC = lenB / 2;
    const IndexList nB = localNodes(lenB), nC = localNodes(lenC);
    checkGrid(nB, lenB, l);
    const Index k = static_cast<Index>(nB.size()), kc = static_cast<Index>(nC.size());
    std::vector<double> q;
    for (Index c = 0; c < 2; ++c)
      for (Index s : nC) q.push_back(static_cast<double>(c * lenC + s));
    st.lags.push_back(lagrangeMatrix(nB, q).transpose());  // k x 2kc
    const Index na = tree_.nodeCount(l), nb = tree_.nodeCount(L_ - l);
    st.inSize = na / 2 * (2 * nb) * kc;
    st.outSize = na * nb * k;
    st.blocks.resize(static_cast<std::size_t>(na * nb));
    parallel_for(na * nb, opt_.threads, [&](Index id) {
      const Index a = id / nb, b = id % nb;
      const Index cA = Range{a * lenA, lenA}.center();
      const Index cP = Range{(a / 2) * 2 * lenA, 2 * lenA}.center();
      const Index bs = b * lenB;
      ButterflyBlock& blk = st.blocks[static_cast<std::size_t>(id)];
      blk.outOff = id * k;
      blk.outLen = k;
      ButterflyTerm term;
      term.inOff = ((a / 2) * 2 * nb + 2 * b) * kc;
      term.inLen = 2 * kc;
      term.lag = 0;
      term.right.resize(2 * kc);
      for (Index c = 0; c < 2; ++c)
        for (Index s = 0; s < kc; ++s) {
          const Index xi = bs + c * lenC + nC[static_cast<std::size_t>(s)];
          // the parent's outgoing e^{-2 pi i Phi(cP, xi_s)} is folded in here
          cd w = expi_cycles(phi_(cA, xi) - phi_(cP, xi));
          if (opt_.injectFault && c == 1) w = -w;
          term.right(c * kc + s) = w;
        }
      blk.terms.push_back(std::move(term));
    });
    return st;
  }

  ButterflyStage switchStage() const {
    ButterflyStage st;
    st.kind = StageKind::Switch;
    st.level = h_;
    const Index len = n_ >> h_;  // == leaf << h
    const IndexList nodes = localNodes(len);
    const Index k = static_cast<Index>(nodes.size());
    const Index na = tree_.nodeCount(h_), nb = tree_.nodeCount(L_ - h_);
    st.inSize = st.outSize = na * nb * k;
    st.blocks.resize(static_cast<std::size_t>(na * nb));
    st.dense.resize(static_cast<std::size_t>(na * nb));
    parallel_for(na * nb, opt_.threads, [&](Index id) {
      const Index a = id / nb, b = id % nb;
      const Index as = a * len, bs = b * len;
      const Index cA = Range{as, len}.center(), cB = Range{bs, len}.center();
      MatrixXcd D(k, k);
      for (Index t = 0; t < k; ++t)
        for (Index s = 0; s < k; ++s) {
          const Index x = as + nodes[static_cast<std::size_t>(t)];
          const Index xi = bs + nodes[static_cast<std::size_t>(s)];
          // incoming e^{-2 pi i Phi(cA, xi_s)} and the next stage's
          // e^{-2 pi i Phi(x_t, cB)} are folded into the switch matrix
          D(t, s) = expi_cycles((phi_(x, xi) - phi_(cA, xi)) - phi_(x, cB));
        }
      st.dense[static_cast<std::size_t>(id)] = std::move(D);
      ButterflyBlock& blk = st.blocks[static_cast<std::size_t>(id)];
      blk.outOff = id * k;
      blk.outLen = k;
      ButterflyTerm term;
      term.inOff = id * k;
      term.inLen = k;
      term.dense = id;
      blk.terms.push_back(std::move(term));
    });
    return st;
  }

  ButterflyStage xRecursion(int l) const {
    ButterflyStage st;
    st.kind = StageKind::XRecursion;
    st.level = l;
    const Index lenA = n_ >> l, lenP = 2 * lenA, lenB = tree_.leaf << l, lenC = lenB / 2;
    const IndexList nA = localNodes(lenA), nP = localNodes(lenP);
    checkGrid(nA, lenA, l);
    const Index k = static_cast<Index>(nA.size()), kp = static_cast<Index>(nP.size());
    for (Index side = 0; side < 2; ++side) {
      std::vector<double> q;
      for (Index t : nA) q.push_back(static_cast<double>(side * lenA + t));
      st.lags.push_back(lagrangeMatrix(nP, q));  // k x kp
    }
    const Index na = tree_.nodeCount(l), nb = tree_.nodeCount(L_ - l);
    st.inSize = na / 2 * (2 * nb) * kp;
    st.outSize = na * nb * k;
    st.blocks.resize(static_cast<std::size_t>(na * nb));
    parallel_for(na * nb, opt_.threads, [&](Index id) {
      const Index a = id / nb, b = id % nb, p = a / 2;
      const Index as = a * lenA;
      const Index cB = Range{b * lenB, lenB}.center();
      ButterflyBlock& blk = st.blocks[static_cast<std::size_t>(id)];
      blk.outOff = id * k;
      blk.outLen = k;
      for (Index c = 0; c < 2; ++c) {
        const Index cC = Range{b * lenB + c * lenC, lenC}.center();
        ButterflyTerm term;
        term.inOff = (p * 2 * nb + 2 * b + c) * kp;
        term.inLen = kp;
        term.lag = a % 2;
        term.left.resize(k);
        // the incoming e^{-2 pi i Phi(x_s^P, cC)} was applied by the previous
        // stage; the next stage's e^{-2 pi i Phi(x_t^A, cB)} is applied here
        for (Index t = 0; t < k; ++t) {
          const Index x = as + nA[static_cast<std::size_t>(t)];
          term.left(t) = expi_cycles(phi_(x, cC) - phi_(x, cB));
        }
        blk.terms.push_back(std::move(term));
      }
    });
    return st;
  }

  ButterflyStage finalStage() const {
    ButterflyStage st;
    st.kind = StageKind::Final;
    st.level = L_;
    const Index leaf = tree_.leaf, na = tree_.nodeCount(L_);
    const IndexList nA = localNodes(leaf);
    const Index k = static_cast<Index>(nA.size());
    std::vector<double> q;
    for (Index j = 0; j < leaf; ++j) q.push_back(static_cast<double>(j));
    st.lags.push_back(lagrangeMatrix(nA, q));  // leaf x k
    st.inSize = na * k;
    st.outSize = n_;
    const Index cB = Range{0, n_}.center();
    st.blocks.resize(static_cast<std::size_t>(na));
    parallel_for(na, opt_.threads, [&](Index a) {
      const Index as = a * leaf;
      ButterflyBlock& blk = st.blocks[static_cast<std::size_t>(a)];
      blk.outOff = as;
      blk.outLen = leaf;
      ButterflyTerm term;
      term.inOff = a * k;
      term.inLen = k;
      term.lag = 0;
      term.left.resize(leaf);
      for (Index x = 0; x < leaf; ++x) term.left(x) = expi_cycles(phi_(as + x, cB));
      blk.terms.push_back(std::move(term));
    });
    return st;
  }

  PhaseEval phi_;
  ButterflyOptions opt_;
  DyadicTree tree_;
  Index n_ = 0;
  int L_ = 0, h_ = 0;
};

}  // namespace

VectorXcd ButterflyStage::apply(const VectorXcd& in, int threads) const {
  if (in.size() != inSize) throw ParameterError("butterfly stage: input size mismatch");
  VectorXcd out = VectorXcd::Zero(outSize);
  parallel_for(static_cast<Index>(blocks.size()), threads, [&](Index id) {
    const ButterflyBlock& blk = blocks[static_cast<std::size_t>(id)];
    for (const ButterflyTerm& term : blk.terms)
      apply_term(*this, term, in.data(), out.data() + blk.outOff, blk.outLen);
  });
  return out;
}

std::size_t ButterflyStage::storedEntries() const {
  std::size_t n = 0;
  for (const MatrixXd& m : lags) n += static_cast<std::size_t>(m.size());
  for (const MatrixXcd& m : dense) n += static_cast<std::size_t>(m.size());
  for (const ButterflyBlock& b : blocks)
    for (const ButterflyTerm& t : b.terms)
      n += static_cast<std::size_t>(t.left.size() + t.right.size());
  return n;
}

VectorXcd ButterflyFactorization::apply(const VectorXcd& f, int threads) const {
  if (f.size() != n_) throw ParameterError("butterfly apply: vector length does not match N");
  VectorXcd v = f;
  for (const ButterflyStage& st : stages_) v = st.apply(v, threads);
  return v;
}

std::size_t ButterflyFactorization::storedEntries() const {
  std::size_t n = 0;
  for (const ButterflyStage& st : stages_) n += st.storedEntries();
  return n;
}

std::uint64_t phase_fingerprint(const RealFactor& phase) {
  const MatrixXd us = phase.scaledU();
  std::uint64_t h = fnv1a(us.data(), sizeof(double) * static_cast<std::size_t>(us.size()));
  return fnv1a(phase.v.data(), sizeof(double) * static_cast<std::size_t>(phase.v.size()), h);
}

VectorXcd butterfly_apply(const RealFactor& phase, const VectorXcd& g, const ButterflyOptions& opt) {
  if (g.size() != phase.cols()) throw ParameterError("butterfly_apply: vector length does not match N");
  StageBuilder builder(phase, opt);
  VectorXcd v = g;
  for (int s = 0; s < builder.stageCount(); ++s) v = builder.build(s).apply(v, opt.threads);
  return v;
}

ButterflyFactorization butterfly_factorize(const RealFactor& phase, const ButterflyOptions& opt) {
  StageBuilder builder(phase, opt);
  ButterflyFactorization bf;
  bf.n_ = phase.rows();
  bf.rEps_ = opt.rEps;
  bf.leaf_ = builder.leaf();
  bf.depth_ = builder.depth();
  bf.seed_ = opt.seed;
  bf.fingerprint_ = phase_fingerprint(phase);
  for (int s = 0; s < builder.stageCount(); ++s) bf.stages_.push_back(builder.build(s));
  return bf;
}

VectorXcd direct_apply(const KernelAccess& access, const VectorXcd& g) {
  if (g.size() != access.size()) throw ParameterError("direct_apply: vector length does not match N");
  return access.apply(g);
}

namespace {

constexpr char kMagic[4] = {'I', 'B', 'F', 'M'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw InvalidInputError("butterfly load: truncated stream");
  return v;
}

void put_doubles(std::ostream& os, const double* p, std::size_t n) {
  os.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n * sizeof(double)));
}

void get_doubles(std::istream& is, double* p, std::size_t n) {
  is.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(n * sizeof(double)));
  if (!is) throw InvalidInputError("butterfly load: truncated stream");
}

void put_cvec(std::ostream& os, const VectorXcd& v) {
  put<std::uint64_t>(os, static_cast<std::uint64_t>(v.size()));
  put_doubles(os, reinterpret_cast<const double*>(v.data()), 2 * static_cast<std::size_t>(v.size()));
}

VectorXcd get_cvec(std::istream& is) {
  VectorXcd v(static_cast<Index>(get<std::uint64_t>(is)));
  get_doubles(is, reinterpret_cast<double*>(v.data()), 2 * static_cast<std::size_t>(v.size()));
  return v;
}

}  // namespace

void ButterflyFactorization::save(std::ostream& os) const {
  os.write(kMagic, 4);
  put<std::uint32_t>(os, kVersion);
  put<std::uint64_t>(os, static_cast<std::uint64_t>(n_));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(depth_));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(rEps_));
  put<std::uint64_t>(os, seed_);
  put<std::uint64_t>(os, static_cast<std::uint64_t>(leaf_));
  put<std::uint64_t>(os, fingerprint_);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(stages_.size()));
  for (const ButterflyStage& st : stages_) {
    put<std::uint32_t>(os, static_cast<std::uint32_t>(st.level));
    put<std::uint32_t>(os, static_cast<std::uint32_t>(st.kind));
    put<std::uint64_t>(os, static_cast<std::uint64_t>(st.inSize));
    put<std::uint64_t>(os, static_cast<std::uint64_t>(st.outSize));
    put<std::uint64_t>(os, st.lags.size());
    for (const MatrixXd& m : st.lags) {
      put<std::uint64_t>(os, static_cast<std::uint64_t>(m.rows()));
      put<std::uint64_t>(os, static_cast<std::uint64_t>(m.cols()));
      put_doubles(os, m.data(), static_cast<std::size_t>(m.size()));
    }
    put<std::uint64_t>(os, st.dense.size());
    for (const MatrixXcd& m : st.dense) {
      put<std::uint64_t>(os, static_cast<std::uint64_t>(m.rows()));
      put<std::uint64_t>(os, static_cast<std::uint64_t>(m.cols()));
      put_doubles(os, reinterpret_cast<const double*>(m.data()), 2 * static_cast<std::size_t>(m.size()));
    }
    put<std::uint64_t>(os, st.blocks.size());
    for (const ButterflyBlock& b : st.blocks) {
      put<std::uint64_t>(os, static_cast<std::uint64_t>(b.outOff));
      put<std::uint64_t>(os, static_cast<std::uint64_t>(b.outLen));
      put<std::uint64_t>(os, b.terms.size());
      for (const ButterflyTerm& t : b.terms) {
        put<std::uint64_t>(os, static_cast<std::uint64_t>(t.inOff));
        put<std::uint64_t>(os, static_cast<std::uint64_t>(t.inLen));
        put<std::int64_t>(os, t.lag);
        put<std::int64_t>(os, t.dense);
        put_cvec(os, t.left);
        put_cvec(os, t.right);
      }
    }
  }
  if (!os) throw Error("butterfly save: write failed");
}

ButterflyFactorization ButterflyFactorization::load(std::istream& is) {
  char magic[4];
  is.read(magic, 4);
  if (!is || std::string(magic, 4) != std::string(kMagic, 4))
    throw InvalidInputError("butterfly load: bad magic");
  if (get<std::uint32_t>(is) != kVersion) throw InvalidInputError("butterfly load: unsupported version");
  ButterflyFactorization bf;
  bf.n_ = static_cast<Index>(get<std::uint64_t>(is));
  bf.depth_ = static_cast<int>(get<std::uint32_t>(is));
  bf.rEps_ = static_cast<Index>(get<std::uint32_t>(is));
  bf.seed_ = get<std::uint64_t>(is);
  bf.leaf_ = static_cast<Index>(get<std::uint64_t>(is));
  bf.fingerprint_ = get<std::uint64_t>(is);
  const std::uint32_t ns = get<std::uint32_t>(is);
  for (std::uint32_t s = 0; s < ns; ++s) {
    ButterflyStage st;
    st.level = static_cast<int>(get<std::uint32_t>(is));
    st.kind = static_cast<StageKind>(get<std::uint32_t>(is));
    st.inSize = static_cast<Index>(get<std::uint64_t>(is));
    st.outSize = static_cast<Index>(get<std::uint64_t>(is));
    st.lags.resize(get<std::uint64_t>(is));
    for (MatrixXd& m : st.lags) {
      const auto r = static_cast<Index>(get<std::uint64_t>(is));
      const auto c = static_cast<Index>(get<std::uint64_t>(is));
      m.resize(r, c);
      get_doubles(is, m.data(), static_cast<std::size_t>(m.size()));
    }
    st.dense.resize(get<std::uint64_t>(is));
    for (MatrixXcd& m : st.dense) {
      const auto r = static_cast<Index>(get<std::uint64_t>(is));
      const auto c = static_cast<Index>(get<std::uint64_t>(is));
      m.resize(r, c);
      get_doubles(is, reinterpret_cast<double*>(m.data()), 2 * static_cast<std::size_t>(m.size()));
    }
    st.blocks.resize(get<std::uint64_t>(is));
    for (ButterflyBlock& b : st.blocks) {
      b.outOff = static_cast<Index>(get<std::uint64_t>(is));
      b.outLen = static_cast<Index>(get<std::uint64_t>(is));
      b.terms.resize(get<std::uint64_t>(is));
      for (ButterflyTerm& t : b.terms) {
        t.inOff = static_cast<Index>(get<std::uint64_t>(is));
        t.inLen = static_cast<Index>(get<std::uint64_t>(is));
        t.lag = get<std::int64_t>(is);
        t.dense = get<std::int64_t>(is);
        t.left = get_cvec(is);
        t.right = get_cvec(is);
        const bool lagOk = t.lag >= 0 && static_cast<std::size_t>(t.lag) < st.lags.size();
        const bool denseOk = t.dense >= 0 && static_cast<std::size_t>(t.dense) < st.dense.size();
        if (!(lagOk || denseOk) || t.inOff < 0 || t.inOff + t.inLen > st.inSize ||
            b.outOff < 0 || b.outOff + b.outLen > st.outSize)
          throw InvalidInputError("butterfly load: corrupt block");
      }
    }
    bf.stages_.push_back(std::move(st));
  }
  return bf;
}

void ButterflyFactorization::save(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("butterfly save: cannot open " + path);
  save(os);
}

ButterflyFactorization ButterflyFactorization::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("butterfly load: cannot open " + path);
  return load(is);
}

}  // namespace oit
