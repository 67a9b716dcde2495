#include <gtest/gtest.h>

#include "lossmit/loss_network.hpp"
#include "lossmit/moments.hpp"
#include "lossmit/vibronic.hpp"

using namespace lossmit;

namespace {

CMat random_unitary(int m, std::uint64_t seed) {
  CounterRng rng{seed, 0};
  CMat a(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) a(i, j) = cplx(rng.normal(), rng.normal());
  Eigen::HouseholderQR<CMat> qr(a);
  return qr.householderQ() * CMat::Identity(m, m);
}

GbsSpec random_spec(int m, std::uint64_t seed) {
  CounterRng rng{seed, 1};
  GbsSpec s = GbsSpec::identity(m);
  for (int i = 0; i < m; ++i) {
    s.squeezing[i] = std::polar(rng.uniform(0.0, 1.0), rng.uniform(0.0, 6.28));
    s.displacement[i] = cplx(rng.normal(), rng.normal());
  }
  s.unitary = random_unitary(m, seed);
  return s;
}

double max_abs(const Mat& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace

TEST(CounterRng, DeterministicAndRoughlyCalibrated) {
  CounterRng a{3, 4}, b{3, 4}, c{3, 5};
  for (int i = 0; i < 10; ++i) EXPECT_EQ(a.next(), b.next());
  EXPECT_NE(CounterRng({3, 4}).next(), c.next());
  CounterRng r{1, 0};
  double s = 0.0, s2 = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double x = r.normal();
    s += x;
    s2 += x * x;
  }
  EXPECT_NEAR(s / n, 0.0, 0.01);
  EXPECT_NEAR(s2 / n, 1.0, 0.01);
}

TEST(Decompose, IdentityHasNoSplitters) {
  const MeshDecomposition d = decompose_interferometer(CMat::Identity(4, 4));
  EXPECT_TRUE(d.splitters.empty());
  EXPECT_LT(d.output_phases.cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Decompose, SplitterCounts) {
  EXPECT_EQ(decompose_interferometer(random_unitary(2, 1)).splitters.size(), 1u);
  const MeshDecomposition d = decompose_interferometer(random_unitary(7, 2));
  EXPECT_EQ(d.splitters.size(), 21u);
  EXPECT_EQ(d.num_columns, 7);
}

TEST(Decompose, RecomposesAndNormalizesPhases) {
  for (int m : {2, 3, 5, 8}) {
    const CMat u = random_unitary(m, 10 + m);
    const MeshDecomposition d = decompose_interferometer(u);
    EXPECT_LT((d.compose() - u).cwiseAbs().maxCoeff(), 1e-8) << m;
    for (const auto& b : d.splitters) {
      EXPECT_GE(b.phi, 0.0);
      EXPECT_LT(b.phi, 2 * std::numbers::pi);
    }
    for (int i = 0; i < m; ++i) {
      EXPECT_GE(d.output_phases[i], 0.0);
      EXPECT_LT(d.output_phases[i], 2 * std::numbers::pi);
    }
  }
  EXPECT_EQ(decompose_interferometer(dct_unitary(7)).splitters.size(), 21u);
}

TEST(Decompose, RejectsNonUnitary) {
  CMat u = CMat::Identity(3, 3);
  u(0, 1) = 0.5;
  EXPECT_THROW(decompose_interferometer(u), SpecError);
}

TEST(LossModel, LosslessLimitIsExact) {
  const GbsSpec g = random_spec(4, 7);
  const int cols = decompose_interferometer(g.unitary).num_columns;
  const LossModel lm = build_loss_model(g.unitary, Vec::Ones(4), std::vector<Vec>(cols, Vec::Ones(4)), Vec::Ones(4));
  EXPECT_LT((passive_product(lm) - g.unitary).cwiseAbs().maxCoeff(), 1e-8);
  const GaussianState a = propagate(g, lm), b = prepare_target(g);
  EXPECT_LT(max_abs(a.cov - b.cov), 1e-8);
  EXPECT_LT((a.mean - b.mean).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_LT((effective_transmissivity(lm).array() - 1.0).abs().maxCoeff(), 1e-12);
}

TEST(LossModel, RejectsBadEtas) {
  const CMat u = random_unitary(3, 1);
  EXPECT_THROW(build_loss_model(u, Vec::Ones(2), {}, Vec::Ones(3)), SpecError);
  EXPECT_THROW(build_loss_model(u, Vec::Constant(3, -0.1), {}, Vec::Ones(3)), SpecError);
  EXPECT_THROW(build_loss_model(u, Vec::Ones(3), {Vec::Ones(3)}, Vec::Ones(3)), SpecError);
}

TEST(LossModel, UniformLossCommutesWithOptics) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const GbsSpec g = random_spec(3, seed);
    const GaussianState a = propagate(g, uniform_loss_model(g.unitary, 0.63, 1.0));
    const GaussianState b = propagate(g, uniform_loss_model(g.unitary, 1.0, 0.63));
    EXPECT_LT(max_abs(a.cov - b.cov), 1e-12);
    EXPECT_LT((a.mean - b.mean).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(EffectiveTransmissivity, SequentialSingleMode) {
  const LossModel lm = build_loss_model(CMat::Identity(1, 1), Vec::Constant(1, 0.7), {}, Vec::Constant(1, 0.4));
  EXPECT_NEAR(effective_transmissivity(lm)[0], 0.28, 1e-15);
}

TEST(EffectiveTransmissivity, PhotonNumberBookkeeping) {
  // product inputs, loss only before the interferometer
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    GbsSpec g = random_spec(4, seed);
    CounterRng rng{seed, 2};
    Vec pre(4);
    for (int i = 0; i < 4; ++i) pre[i] = rng.uniform(0.2, 1.0);
    const LossModel lm = build_loss_model(g.unitary, pre, {}, Vec::Ones(4));
    const Vec nin = photon_moments(prepare_inputs(g.squeezing, g.displacement)).nbar;
    const double nout = photon_moments(propagate(g, lm)).nbar.sum();
    EXPECT_NEAR(nout, effective_transmissivity(lm).dot(nin), 1e-10);
  }
}

TEST(SampleLossModel, SeededAndInRange) {
  const CMat u = dct_unitary(7);
  const LossRanges r = formic_acid_loss_ranges();
  const LossModel a = sample_loss_model(u, r, 5), b = sample_loss_model(u, r, 5), c = sample_loss_model(u, r, 6);
  EXPECT_EQ(a.pre, b.pre);
  EXPECT_EQ(a.post, b.post);
  ASSERT_EQ(a.internal.size(), 7u);
  for (std::size_t k = 0; k < a.internal.size(); ++k) EXPECT_EQ(a.internal[k], b.internal[k]);
  EXPECT_NE(a.pre, c.pre);
  EXPECT_TRUE(a.sampled);
  EXPECT_EQ(a.seed, 5u);
  EXPECT_GE(a.pre.minCoeff(), 0.5);
  EXPECT_LE(a.pre.maxCoeff(), 0.6);
  EXPECT_GE(a.post.minCoeff(), 0.7);
  EXPECT_LE(a.post.maxCoeff(), 0.8);
  for (const auto& e : a.internal) {
    EXPECT_GE(e.minCoeff(), 0.8);
    EXPECT_LE(e.maxCoeff(), 0.85);
  }
}

TEST(SampleLossModel, FormicAcidAverageTransmissivity) {
  // the average system transmissivity quoted for the molecule is 0.17
  const CMat u = dct_unitary(7);
  double mean = 0.0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed)
    mean += effective_transmissivity(sample_loss_model(u, formic_acid_loss_ranges(), seed)).mean();
  mean /= 20;
  EXPECT_NEAR(mean, 0.17, 0.05);
}

TEST(WithUnitary, KeepsPlacement) {
  const LossModel a = sample_loss_model(dct_unitary(3), {{0.5, 0.6}, {0.8, 0.85}, {0.7, 0.8}, true}, 2);
  const CMat v = random_unitary(3, 4);
  const LossModel b = with_unitary(a, v);
  EXPECT_EQ(b.pre, a.pre);
  EXPECT_EQ(b.post, a.post);
  EXPECT_EQ(b.internal.size(), a.internal.size());
  EXPECT_LT((passive_product(b) - v).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_TRUE(b.sampled);
}
