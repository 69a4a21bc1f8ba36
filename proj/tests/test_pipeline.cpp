#include "oit/kernels.hpp"
#include "oit/pipeline.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <json.hpp>

#include <set>

using namespace oit;
using oit::test::random_vector;
using oit::test::rel;

namespace {

struct Setup {
  Kernel kernel;
  KernelAccess access;
  RecoveredKernel rk;
  PipelineParams params;
};

Setup setup(const std::string& id, Index n, Index rEps = 8, const SyntheticParams& sp = {}) {
  Setup s{make_kernel(id, n, sp), {}, {}, {}};
  s.access = make_access(s.kernel, Scenario::Entry, {});
  s.params.rEps = rEps;
  s.params.kernelId = id;
  s.params.colSplits = s.kernel.colSplits;
  s.rk = recover_kernel(s.access, s.params.recovery);
  return s;
}

}  // namespace

TEST_CASE("path selection follows the decision") {
  SUBCASE("fio-smooth: NUFFT at r = 1") {
    const Setup s = setup("fio-smooth", 512);
    const TransformPlan p = plan_transform(s.rk.amp, s.rk.phase, s.params);
    CHECK(p.path == PathKind::Nufft);
    CHECK(p.nufftDim == 1);
  }
  SUBCASE("fio1d: NUFFT at r = 2") {
    const Setup s = setup("fio1d", 512);
    const TransformPlan p = plan_transform(s.rk.amp, s.rk.phase, s.params);
    CHECK(p.path == PathKind::Nufft);
    CHECK(p.nufftDim == 2);
    CHECK(p.a.cols() == 1);
    CHECK(p.reason.find("r = 2") != std::string::npos);
  }
  SUBCASE("synthetic rank-8 phase: butterfly") {
    SyntheticParams sp;
    sp.rank = 8;
    const Setup s = setup("synthetic:smooth-low-rank", 512, 8, sp);
    CHECK(select_nufft(s.rk.amp, s.rk.phase, s.params) == nullptr);
    const TransformPlan p = plan_transform(s.rk.amp, s.rk.phase, s.params);
    CHECK(p.path == PathKind::Butterfly);
    CHECK(p.butterfly != nullptr);
  }
}

TEST_CASE("recovery errors on fio1d and hankel, N = 1024") {
  {
    const Setup s = setup("fio1d", 1024);
    const FactorErrors e = factor_errors(s.access, s.rk.amp, s.rk.phase);
    CHECK(e.amplitude <= 1e-12);
    CHECK(e.phase <= 1e-9);
  }
  {
    const Setup s = setup("hankel", 1024);
    CHECK(factor_errors(s.access, s.rk.amp, s.rk.phase).phase <= 1e-7);
  }
}

TEST_CASE("forced butterfly and NUFFT paths on fio1d, N = 1024") {
  const Setup s = setup("fio1d", 1024);
  PipelineParams bfp = s.params;
  bfp.force = PathChoice::Butterfly;
  const TransformPlan bf = plan_transform(s.rk.amp, s.rk.phase, bfp);
  const TransformPlan nu = plan_transform(s.rk.amp, s.rk.phase, s.params);
  REQUIRE(bf.path == PathKind::Butterfly);
  REQUIRE(nu.path == PathKind::Nufft);

  const VectorXcd f = random_vector(1024, 0);
  const VectorXcd gb = apply_transform(bf, f), gn = apply_transform(nu, f);
  CHECK(relative_error(gb, s.access, f) <= 2.6e-5);
  CHECK(relative_error(gn, s.access, f) <= 1e-9);

  const IndexList rows = error_rows(1024, 256, 0);
  double num = 0, den = 0;
  for (Index i : rows) {
    num += std::norm(gb(i) - gn(i));
    den += std::norm(gn(i));
  }
  CHECK(std::sqrt(num / den) <= 1e-5);

  CHECK(apply_transform(bf, VectorXcd::Zero(1024)).norm() == 0.0);
  CHECK(apply_transform(nu, VectorXcd::Zero(1024)).norm() == 0.0);
  CHECK_THROWS_AS(apply_transform(bf, VectorXcd::Zero(1000)), ParameterError);
}

TEST_CASE("apply_transform is linear") {
  const Setup s = setup("hankel", 256);
  PipelineParams p = s.params;
  p.force = PathChoice::Butterfly;
  const TransformPlan bf = plan_transform(s.rk.amp, s.rk.phase, p);
  CHECK(bf.a.cols() == s.rk.amp.rank());
  const MatrixXcd coef = oit::test::random_complex(4, 2, 3);
  for (int t = 0; t < 4; ++t) {
    const VectorXcd f = random_vector(256, 10 + t), g = random_vector(256, 20 + t);
    const cd a = coef(t, 0), b = coef(t, 1);
    const VectorXcd lhs = apply_transform(bf, a * f + b * g);
    CHECK(rel(lhs, a * apply_transform(bf, f) + b * apply_transform(bf, g)) <= 1e-12);
  }
}

TEST_CASE("relative_error examples") {
  const Setup s = setup("fio1d", 256);
  const VectorXcd f = random_vector(256, 1);
  const VectorXcd g = s.access.apply(f);
  CHECK(relative_error(g, s.access, f) <= 1e-15);
  CHECK(std::abs(relative_error(1.01 * g, s.access, f) - 0.01) <= 1e-12);
  CHECK_THROWS_AS(relative_error(g, s.access, VectorXcd::Zero(256)), DegenerateReferenceError);
  const IndexList rows = error_rows(256, 64, 7);
  CHECK(rows.size() == 64);
  CHECK(std::set<Index>(rows.begin(), rows.end()).size() == 64);
  CHECK(rows == error_rows(256, 64, 7));
}

TEST_CASE("plans are deterministic") {
  const Setup a = setup("fio1d", 512), b = setup("fio1d", 512);
  CHECK(a.rk.phase.dense() == b.rk.phase.dense());
  for (PathChoice force : {PathChoice::Auto, PathChoice::Butterfly}) {
    PipelineParams p = a.params;
    p.force = force;
    const TransformPlan pa = plan_transform(a.rk.amp, a.rk.phase, p);
    const TransformPlan pb = plan_transform(b.rk.amp, b.rk.phase, p);
    const VectorXcd f = random_vector(512, 4);
    CHECK(apply_transform(pa, f) == apply_transform(pb, f));
    auto ja = nlohmann::json::parse(plan_provenance_json(pa)), jb = nlohmann::json::parse(plan_provenance_json(pb));
    CHECK(ja == jb);
    CHECK(ja["N"] == 512);
    CHECK(ja["path"] == path_name(pa.path));
  }
}

TEST_CASE("path choice parsing") {
  CHECK(parse_path_choice("auto") == PathChoice::Auto);
  CHECK(parse_path_choice("nufft") == PathChoice::Nufft);
  CHECK(parse_path_choice("bf") == PathChoice::Butterfly);
  CHECK_THROWS_AS(parse_path_choice("fft"), ParameterError);
}
