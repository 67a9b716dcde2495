#include <gtest/gtest.h>

#include "lossmit/loss_network.hpp"
#include "lossmit/mitigation.hpp"

#include <numbers>

using namespace lossmit;

namespace {

double max_abs(const Mat& m) { return m.cwiseAbs().maxCoeff(); }

GbsSpec fig1_spec() {
  GbsSpec s = GbsSpec::identity(2);
  s.squeezing << 0.4, 0.5;
  s.unitary = two_mode_unitary(0.8, 0.44);
  return s;
}

// random unitary from the QR of a complex Gaussian matrix
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
    s.squeezing[i] = std::polar(rng.uniform(0.0, 1.2), rng.uniform(0.0, 6.28));
    s.displacement[i] = cplx(rng.normal(), rng.normal());
  }
  s.unitary = random_unitary(m, seed);
  return s;
}

}  // namespace

TEST(PrepareTarget, Vacuum) {
  const GaussianState s = prepare_target(GbsSpec::identity(1));
  EXPECT_EQ(s.mean.norm(), 0.0);
  EXPECT_LT(max_abs(s.cov - 0.5 * Mat::Identity(2, 2)), 1e-15);
}

TEST(PrepareTarget, SqueezingConvention) {
  GbsSpec g = GbsSpec::identity(1);
  g.squeezing << 1.5;
  const GaussianState s = prepare_target(g);
  EXPECT_NEAR(s.cov(0, 0), 0.5 * std::exp(-3.0), 1e-14);
  EXPECT_NEAR(s.cov(1, 1), 0.5 * std::exp(3.0), 1e-12);
  EXPECT_NEAR(s.cov(0, 1), 0.0, 1e-14);
}

TEST(PrepareTarget, TropolonePure) {
  GbsSpec g = GbsSpec::identity(2);
  g.squeezing << 0.19, 0.72;
  g.unitary = two_mode_unitary(0.27, 0.0);
  const Vec nu = symplectic_eigenvalues(prepare_target(g).cov);
  for (int i = 0; i < 2; ++i) EXPECT_NEAR(nu[i], 0.5, 1e-10);
}

TEST(PrepareTarget, DisplacementMean) {
  GbsSpec g = GbsSpec::identity(1);
  g.displacement << cplx(0.3, -0.7);
  const GaussianState s = prepare_target(g);
  EXPECT_NEAR(s.mean[0], std::sqrt(2.0) * 0.3, 1e-15);
  EXPECT_NEAR(s.mean[1], -std::sqrt(2.0) * 0.7, 1e-15);
  EXPECT_NEAR(std::abs(mean_amplitudes(s)[0] - cplx(0.3, -0.7)), 0.0, 1e-15);
}

TEST(Validate, RejectsBadInputs) {
  GbsSpec g = GbsSpec::identity(2);
  g.unitary(0, 0) = 2.0;
  EXPECT_THROW(validate(g), SpecError);
  GbsSpec h = GbsSpec::identity(2);
  h.displacement = CVec::Zero(3);
  EXPECT_THROW(validate(h), SpecError);
  GaussianState s = GaussianState::vacuum(1);
  s.cov(0, 0) = 0.1;
  EXPECT_THROW(validate(s), SpecError);
  s = GaussianState::vacuum(1);
  s.cov(0, 1) = 0.1;
  EXPECT_THROW(validate(s), SpecError);
}

TEST(ApplySymplectic, IdentityAndDisplacement) {
  const GbsSpec g = random_spec(3, 5);
  const GaussianState s = prepare_target(g);
  const GaussianState t = apply_symplectic(s, Mat::Identity(6, 6), Vec::Zero(6));
  EXPECT_EQ(max_abs(t.cov - s.cov), 0.0);
  Vec d = Vec::Zero(2);
  d[0] = std::sqrt(2.0);
  const GaussianState c = apply_symplectic(GaussianState::vacuum(1), Mat::Identity(2, 2), d);
  EXPECT_NEAR(mean_amplitudes(c)[0].real(), 1.0, 1e-15);
  EXPECT_LT(max_abs(c.cov - 0.5 * Mat::Identity(2, 2)), 1e-15);
}

TEST(ApplySymplectic, RejectsNonSymplectic) {
  EXPECT_THROW(apply_symplectic(GaussianState::vacuum(1), 2.0 * Mat::Identity(2, 2), Vec::Zero(2)), SpecError);
}

TEST(ApplySymplectic, BeamSplitterMakesTwoModeSqueezing) {
  const double r = 0.7;
  CVec xi(2);
  xi << r, -r;
  const GaussianState in = prepare_inputs(xi, CVec::Zero(2));
  CMat bs(2, 2);
  bs << 1.0, -1.0, 1.0, 1.0;
  bs /= std::sqrt(2.0);
  const GaussianState out = apply_symplectic(in, passive_symplectic(bs), Vec::Zero(4));
  const Mat off = out.cov.block(0, 2, 2, 2);
  EXPECT_NEAR(std::abs(off(0, 0)), 0.5 * std::sinh(2 * r), 1e-12);
  EXPECT_NEAR(std::abs(off(1, 1)), 0.5 * std::sinh(2 * r), 1e-12);
  EXPECT_NEAR(off(0, 0), -off(1, 1), 1e-12);
  EXPECT_NEAR(off(0, 1), 0.0, 1e-12);
}

TEST(ApplySymplectic, PurityPreserved) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const GbsSpec g = random_spec(4, seed);
    const Vec nu = symplectic_eigenvalues(prepare_target(g).cov);
    EXPECT_LT((nu.array() - 0.5).abs().maxCoeff(), 1e-10) << seed;
    // a further passive map keeps the spectrum
    const Mat S = passive_symplectic(random_unitary(4, seed + 100));
    const GaussianState t = apply_symplectic(prepare_target(g), S, Vec::Zero(8));
    EXPECT_LT((symplectic_eigenvalues(t.cov) - nu).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(LossLayer, Limits) {
  const GaussianState s = prepare_target(random_spec(2, 3));
  const GaussianState same = apply_loss_layer(s, Vec::Ones(2));
  EXPECT_LT(max_abs(same.cov - s.cov), 1e-15);
  EXPECT_LT((same.mean - s.mean).cwiseAbs().maxCoeff(), 1e-15);
  const GaussianState gone = apply_loss_layer(s, Vec::Zero(2));
  EXPECT_LT(max_abs(gone.cov - 0.5 * Mat::Identity(4, 4)), 1e-15);
  EXPECT_EQ(gone.mean.norm(), 0.0);
  EXPECT_THROW(apply_loss_layer(s, Vec::Constant(2, 1.1)), SpecError);
  EXPECT_THROW(apply_loss_layer(s, Vec::Ones(3)), SpecError);
}

TEST(LossLayer, SingleModeValue) {
  GbsSpec g = GbsSpec::identity(1);
  g.squeezing << 1.5;
  const GaussianState s = apply_loss_layer(prepare_target(g), Vec::Constant(1, 0.5));
  EXPECT_NEAR(s.cov(0, 0), 0.5 * (0.5 * std::exp(-3.0) + 0.5), 1e-14);
  EXPECT_NEAR(s.cov(1, 1), 0.5 * (0.5 * std::exp(3.0) + 0.5), 1e-12);
}

TEST(LossLayer, CompositionAttenuationPhysicality) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    CounterRng rng{seed, 9};
    const GaussianState s = prepare_target(random_spec(3, seed));
    Vec a(3), b(3);
    for (int i = 0; i < 3; ++i) {
      a[i] = rng.uniform();
      b[i] = rng.uniform();
    }
    const GaussianState two = apply_loss_layer(apply_loss_layer(s, a), b);
    const GaussianState one = apply_loss_layer(s, a.cwiseProduct(b));
    EXPECT_LT(max_abs(two.cov - one.cov), 1e-12);
    EXPECT_LT((two.mean - one.mean).cwiseAbs().maxCoeff(), 1e-12);
    for (int i = 0; i < 3; ++i)
      EXPECT_NEAR(std::abs(mean_amplitudes(one)[i] - std::sqrt(a[i] * b[i]) * mean_amplitudes(s)[i]), 0.0, 1e-12);
    EXPECT_GE(symplectic_eigenvalues(one.cov).minCoeff(), 0.5 - 1e-10);
  }
}

TEST(Propagate, TrivialLossEqualsTarget) {
  const GbsSpec g = random_spec(3, 11);
  const GaussianState a = propagate(g, lossless_model(g.unitary));
  const GaussianState b = prepare_target(g);
  EXPECT_LT(max_abs(a.cov - b.cov), 1e-10);
  EXPECT_LT((a.mean - b.mean).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Propagate, Fig1ModelIsMixed) {
  const GbsSpec g = fig1_spec();
  Vec pre(2), post(2);
  pre << 0.7, 0.6;
  post << 0.5, 0.8;
  const GaussianState s = propagate(g, build_loss_model(g.unitary, pre, {}, post));
  EXPECT_GT(symplectic_eigenvalues(s.cov).minCoeff(), 0.5 + 1e-3);
}

TEST(Propagate, CoherentStaysCoherent) {
  GbsSpec g = GbsSpec::identity(2);
  g.displacement << cplx(0.4, 0.1), cplx(-0.3, 0.8);
  g.unitary = two_mode_unitary(0.3, 1.0);
  const GaussianState s = propagate(g, uniform_loss_model(g.unitary, 0.6, 1.0));
  EXPECT_LT(max_abs(s.cov - 0.5 * Mat::Identity(4, 4)), 1e-12);
  const CVec want = std::sqrt(0.6) * (g.unitary * g.displacement);
  EXPECT_LT((mean_amplitudes(s) - want).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Reduce, PicksModes) {
  const GaussianState s = prepare_target(random_spec(3, 2));
  const GaussianState r = reduce(s, {2, 0});
  EXPECT_EQ(r.num_modes, 2);
  EXPECT_EQ(r.cov(0, 0), s.cov(4, 4));
  EXPECT_EQ(r.cov(1, 2), s.cov(5, 0));
  EXPECT_EQ(r.mean[3], s.mean[1]);
  EXPECT_THROW(reduce(s, {3}), SpecError);
}
