#pragma once

#include "oit/interp.hpp"
#include "oit/kernel_access.hpp"

#include <iosfwd>

namespace oit {

// Dyadic partition of [0, n): level l has 2^l nodes of length n / 2^l.
struct DyadicTree {
  Index n = 0;
  Index leaf = 1;
  int depth = 0;
  Range node(int level, Index k) const;
  Index nodeCount(int level) const { return Index(1) << level; }
};

struct ButterflyTrees {
  DyadicTree x, omega;
};

// Requires n = leaf * 2^L. An odd L is made even by halving an even leaf
// (one more level) or doubling an odd one (one level less).
ButterflyTrees build_trees(Index n, Index leaf);

struct ButterflyOptions {
  Index rEps = 8;
  Index leaf = 1;
  int threads = 1;
  std::uint64_t seed = 0;  // recorded in the metadata only
  // Test hook: flips the sign of the second child in the first recursion.
  bool injectFault = false;
};

enum class StageKind : std::uint32_t { Init = 0, XiRecursion = 1, Switch = 2, XRecursion = 3, Final = 4 };

// out(outOff : outOff+outLen) += left .* (Op * (right .* in(inOff : inOff+inLen)))
// where Op is a shared real Lagrange matrix or a per-term dense matrix. Empty
// left/right vectors mean no scaling.
struct ButterflyTerm {
  Index inOff = 0, inLen = 0;
  std::int64_t lag = -1;    // index into Stage::lags
  std::int64_t dense = -1;  // index into Stage::dense
  VectorXcd left, right;
};

struct ButterflyBlock {
  Index outOff = 0, outLen = 0;
  std::vector<ButterflyTerm> terms;
};

struct ButterflyStage {
  StageKind kind = StageKind::Init;
  int level = 0;
  Index inSize = 0, outSize = 0;
  std::vector<MatrixXd> lags;
  std::vector<MatrixXcd> dense;
  std::vector<ButterflyBlock> blocks;

  VectorXcd apply(const VectorXcd& in, int threads) const;
  std::size_t storedEntries() const;
};

class ButterflyFactorization {
public:
  Index size() const { return n_; }
  int depth() const { return depth_; }
  Index rankEps() const { return rEps_; }
  Index leaf() const { return leaf_; }
  std::uint64_t seed() const { return seed_; }
  std::uint64_t fingerprint() const { return fingerprint_; }
  const std::vector<ButterflyStage>& stages() const { return stages_; }

  VectorXcd apply(const VectorXcd& f, int threads = 1) const;
  // Number of stored scalars (complex and real) over all factors.
  std::size_t storedEntries() const;

  void save(std::ostream& os) const;
  static ButterflyFactorization load(std::istream& is);
  void save(const std::string& path) const;
  static ButterflyFactorization load(const std::string& path);

private:
  friend ButterflyFactorization butterfly_factorize(const RealFactor&, const ButterflyOptions&);
  Index n_ = 0, rEps_ = 0, leaf_ = 1;
  int depth_ = 0;
  std::uint64_t seed_ = 0, fingerprint_ = 0;
  std::vector<ButterflyStage> stages_;
};

// u(x) ~ sum_xi e^{2 pi i Phi(x,xi)} g(xi), built and applied stage by stage.
VectorXcd butterfly_apply(const RealFactor& phase, const VectorXcd& g, const ButterflyOptions& opt);

ButterflyFactorization butterfly_factorize(const RealFactor& phase, const ButterflyOptions& opt);

// Dense O(N^2) matvec through the access oracle.
VectorXcd direct_apply(const KernelAccess& access, const VectorXcd& g);

std::uint64_t phase_fingerprint(const RealFactor& phase);

}  // namespace oit
