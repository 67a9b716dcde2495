#include <gtest/gtest.h>

#include "lossmit/mitigation.hpp"
#include "lossmit/single_mode.hpp"
#include "lossmit/vibronic.hpp"

#include <numbers>

using namespace lossmit;

namespace {

GbsSpec sm(cplx xi, cplx alpha = 0.0) {
  GbsSpec g = GbsSpec::identity(1);
  g.squeezing << xi;
  g.displacement << alpha;
  return g;
}

LossModel sm_loss(double eta) { return uniform_loss_model(CMat::Identity(1, 1), eta, 1.0); }

GbsSpec fig1() {
  GbsSpec s = GbsSpec::identity(2);
  s.squeezing << 0.4, 0.5;
  s.unitary = two_mode_unitary(0.8, 0.44);
  return s;
}

LossModel fig1_loss(const CMat& u) {
  Vec pre(2), post(2);
  pre << 0.7, 0.6;
  post << 0.5, 0.8;
  return build_loss_model(u, pre, {}, post);
}

std::vector<std::pair<double, double>> grid() {
  std::vector<std::pair<double, double>> g;
  for (double xt = 0.2; xt < 2.01; xt += 0.2)
    for (double eta = 0.2; eta < 0.91; eta += 0.1) g.emplace_back(xt, eta);
  return g;
}

}  // namespace

TEST(Names, RoundTrip) {
  for (const auto& [s, n] : scheme_names()) EXPECT_EQ(scheme_from_string(to_string(s)), s);
  for (Ansatz a : {Ansatz::SQ_VAC, Ansatz::DISPLACED_SQ, Ansatz::SQ_THERMAL, Ansatz::DISPLACED_SQ_THERMAL})
    EXPECT_EQ(ansatz_from_string(to_string(a)), a);
  EXPECT_THROW(scheme_from_string("VAC"), SpecError);
}

TEST(Analytic, LosslessLimit) {
  const AnalyticCorrections a = analytic_corrections(1.3, 1.0);
  EXPECT_NEAR(a.F, 1.3, 1e-12);
  EXPECT_NEAR(a.MEAN, 1.3, 1e-12);
  EXPECT_NEAR(a.VARIANCE, 1.3, 1e-12);
  EXPECT_NEAR(a.VAC, 1.3, 1e-12);
}

TEST(Analytic, FrozenValues) {
  // 30-digit evaluation of the closed forms, rounded to 12 significant digits
  const AnalyticCorrections a = analytic_corrections(1.5, 0.5);
  EXPECT_NEAR(a.F, 0.905703240561, 1e-11);
  EXPECT_NEAR(a.MEAN, 1.82199988520, 1e-10);
  EXPECT_NEAR(a.VARIANCE, 1.83380370701, 1e-10);
  EXPECT_NEAR(a.VAC, 1.63177504385, 1e-10);
}

TEST(Analytic, FidelityBracket) {
  for (const auto& [xt, eta] : grid()) {
    const double f = xi_fidelity(xt, eta);
    EXPECT_LE(0.5 * xt, f + 1e-12);
    EXPECT_LE(f, xt + 1e-12);
  }
}

TEST(Analytic, VarianceCancellationSafe) {
  // tiny squeezing and weak loss, where the naive form loses all digits
  const double xt = 1e-6, eta = 1.0 - 1e-9;
  const double x = xi_variance(xt, eta);
  EXPECT_TRUE(std::isfinite(x));
  EXPECT_NEAR(x, xt, 1e-9);
}

TEST(PhaseSpaceOptimizer, LosslessLimit) {
  for (MeasureKind k : {MeasureKind::WAS, MeasureKind::KLD_UP, MeasureKind::KLD_PU, MeasureKind::KLD_SYM,
                        MeasureKind::BHA})
    EXPECT_LT(std::abs(phase_space_optimizer(k, 1.2, 1.0 - 1e-6) - 1.2), 1e-3) << to_string(k);
}

TEST(PhaseSpaceOptimizer, RootsSolveTheirFunctions) {
  for (MeasureKind k : {MeasureKind::WAS, MeasureKind::KLD_UP, MeasureKind::KLD_PU, MeasureKind::KLD_SYM,
                        MeasureKind::BHA}) {
    const double x = phase_space_optimizer(k, 1.5, 0.5);
    EXPECT_LT(std::abs(root_function(k, x, 1.5, 0.5)), 1e-10) << to_string(k);
  }
}

TEST(OrderingChain, GridWithinProvenRegion) {
  for (const auto& [xt, eta] : grid()) {
    const double xv = xi_vacuum(xt, eta);
    ASSERT_EQ(classify_vacuum_optimality(xv, eta), Region::PROVEN_OPTIMAL);
    const double chain[] = {xi_fidelity(xt, eta),
                            xt,
                            xv,
                            xi_mean(xt, eta),
                            xi_variance(xt, eta),
                            phase_space_optimizer(MeasureKind::WAS, xt, eta),
                            phase_space_optimizer(MeasureKind::KLD_UP, xt, eta),
                            phase_space_optimizer(MeasureKind::BHA, xt, eta),
                            phase_space_optimizer(MeasureKind::KLD_SYM, xt, eta),
                            phase_space_optimizer(MeasureKind::KLD_PU, xt, eta)};
    EXPECT_LE(chain[0], chain[1]);
    for (int i = 1; i + 1 < 10; ++i) EXPECT_LT(chain[i], chain[i + 1]) << xt << " " << eta << " link " << i;
  }
}

TEST(Delta, MonotoneInLoss) {
  for (double xt : {0.5, 1.0, 1.8}) {
    const TargetContext t = make_target(sm(xt));
    double prev = 0.0;
    for (double eta = 1.0; eta > 0.05; eta -= 0.1) {
      const double d = evaluate_delta(t, sm(xt), sm_loss(eta)).delta;
      EXPECT_GE(d, prev - 1e-12);
      prev = d;
    }
  }
}

TEST(Region, Classification) {
  EXPECT_NEAR(edge_threshold(), 2.2900478, 5e-7);
  EXPECT_EQ(classify_vacuum_optimality(1.0, 0.99), Region::PROVEN_OPTIMAL);
  EXPECT_EQ(classify_vacuum_optimality(3.0, 0.5), Region::PROVEN_OPTIMAL);
  EXPECT_EQ(classify_vacuum_optimality(3.0, 0.99), Region::EDGE);
  // below 14/15 every squeezing is covered
  EXPECT_EQ(classify_vacuum_optimality(15.0, 14.0 / 15.0 - 1e-3), Region::PROVEN_OPTIMAL);
  EXPECT_EQ(classify_vacuum_optimality(edge_threshold() - 1e-6, 0.999), Region::PROVEN_OPTIMAL);
  EXPECT_EQ(classify_vacuum_optimality(xi_vacuum(2.38, 0.97), 0.97), Region::EDGE);
}

TEST(CorrectDisplacement, Values) {
  const GbsSpec g = sm(0.3, 0.5);
  EXPECT_NEAR(std::abs(correct_displacement(g, sm_loss(0.5)).displacement[0]), 0.5 / std::sqrt(0.5), 1e-12);
  EXPECT_NEAR(std::abs(correct_displacement(g, sm_loss(0.5)).displacement[0]), 0.70711, 5e-6);
  const MoleculeFixture so2 = sulfur_dioxide();
  const GbsSpec same = correct_displacement(so2.spec, lossless_model(so2.spec.unitary));
  EXPECT_LT((same.displacement - so2.spec.displacement).cwiseAbs().maxCoeff(), 1e-12);
  // the corrected mean reaches the detectors unchanged
  const LossModel lm = fig1_loss(so2.spec.unitary);
  const GbsSpec dc = correct_displacement(so2.spec, lm);
  EXPECT_LT((mean_amplitudes(propagate(dc, lm)) - mean_amplitudes(prepare_target(so2.spec))).cwiseAbs().maxCoeff(),
            1e-12);
}

TEST(VacuumOverlap, SingleModeMatchesClosedForm) {
  const GbsSpec g = vacuum_overlap_correct(sm(1.5), sm_loss(0.5), VacuumStrategy::FIXED_RATIO);
  EXPECT_NEAR(std::abs(g.squeezing[0]), xi_vacuum(1.5, 0.5), 1e-9);
}

TEST(VacuumOverlap, LosslessUnchanged) {
  const GbsSpec s = fig1();
  for (VacuumStrategy v : {VacuumStrategy::FIXED_RATIO, VacuumStrategy::LOSS_WEIGHTED}) {
    const GbsSpec g = vacuum_overlap_correct(s, lossless_model(s.unitary), v);
    EXPECT_LT((g.squeezing - s.squeezing).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(VacuumOverlap, EveryStrategyMatchesTheVacuum) {
  for (const GbsSpec& s : {fig1(), sulfur_dioxide().spec}) {
    const LossModel lm = fig1_loss(s.unitary);
    const double want = vacuum_overlap(prepare_target(s));
    for (VacuumStrategy v : {VacuumStrategy::FIXED_RATIO, VacuumStrategy::LOSS_WEIGHTED, VacuumStrategy::PLUS_DC,
                             VacuumStrategy::PLUS_MEAN}) {
      double residual = -1.0;
      const GbsSpec g = vacuum_overlap_correct(s, lm, v, &residual);
      EXPECT_NEAR(vacuum_overlap(propagate(g, lm)), want, 1e-10);
      EXPECT_LT(residual, 1e-10);
    }
  }
}

TEST(VacuumOverlap, LossWeightedWithEqualTransmissivity) {
  // equal eta_eff: the weighting keeps the target's sinh^2 ratios, so it stays
  // close to, but not on top of, the fixed |xi| ratio
  const GbsSpec s = tropolone().spec;
  const LossModel lm = uniform_loss_model(s.unitary, 0.7, 0.7);
  const GbsSpec a = vacuum_overlap_correct(s, lm, VacuumStrategy::FIXED_RATIO);
  const GbsSpec b = vacuum_overlap_correct(s, lm, VacuumStrategy::LOSS_WEIGHTED);
  auto sh2 = [](cplx z) { return std::pow(std::sinh(std::abs(z)), 2); };
  EXPECT_NEAR(sh2(b.squeezing[0]) / sh2(b.squeezing[1]), sh2(s.squeezing[0]) / sh2(s.squeezing[1]), 1e-12);
  const TargetContext t = make_target(s);
  EXPECT_NEAR(evaluate_delta(t, a, lm).delta, evaluate_delta(t, b, lm).delta, 1e-4);
}

TEST(VacuumOverlap, KeepsSqueezingRatioAndPhases) {
  GbsSpec s = fig1();
  s.squeezing[1] = std::polar(0.5, 0.3);
  const GbsSpec g = vacuum_overlap_correct(s, fig1_loss(s.unitary), VacuumStrategy::FIXED_RATIO);
  EXPECT_NEAR(std::abs(g.squeezing[0]) / std::abs(g.squeezing[1]), 0.8, 1e-12);
  EXPECT_NEAR(std::arg(g.squeezing[1]), 0.3, 1e-12);
}

TEST(MeanCorrect, MatchesTotalMeanAndLosslessLimit) {
  const GbsSpec d = sm(1.0, 0.1);
  const LossModel lm = sm_loss(0.5);
  const GbsSpec g = mean_correct(d, lm, MeanFix::DC);
  const double nt = photon_moments(prepare_target(d)).nbar.sum();
  EXPECT_NEAR(photon_moments(propagate(g, lm)).nbar.sum(), nt, 1e-12);
  const GbsSpec same = mean_correct(d, lossless_model(d.unitary), MeanFix::DC);
  EXPECT_NEAR(std::abs(same.squeezing[0]), 1.0, 1e-12);
  EXPECT_NEAR(std::abs(mean_correct(sm(1.5), sm_loss(0.5), MeanFix::NONE).squeezing[0]), xi_mean(1.5, 0.5), 1e-10);
  EXPECT_NEAR(std::abs(variance_correct(sm(1.5), sm_loss(0.5)).squeezing[0]), xi_variance(1.5, 0.5), 1e-10);
}

TEST(FidelityOptimize, SingleModeAndLossless) {
  EXPECT_NEAR(std::abs(fidelity_optimize(sm(1.5), sm_loss(0.5)).squeezing[0]), 0.90571, 1e-5);
  const GbsSpec s = fig1();
  const GbsSpec g = fidelity_optimize(s, lossless_model(s.unitary));
  EXPECT_LT((g.squeezing.cwiseAbs() - s.squeezing.cwiseAbs()).cwiseAbs().maxCoeff(), 1e-5);
}

TEST(ApplyScheme, LosslessGivesZeroDelta) {
  const MoleculeFixture fx = sulfur_dioxide();
  const LossModel lm = lossless_model(fx.spec.unitary);
  const TargetContext t = make_target(fx.spec);
  for (Scheme s : {Scheme::NONE, Scheme::DC, Scheme::FIDELITY, Scheme::PS_WAS, Scheme::MEAN_PLUS_DC,
                   Scheme::VAC_FIXED_RATIO, Scheme::VAC_PLUS_DC, Scheme::VAC_PLUS_MEAN}) {
    const MitigationResult r = apply_scheme(s, t, lm);
    EXPECT_LT(r.delta, 1e-6) << to_string(s);
  }
  EXPECT_THROW(corrected_spec(Scheme::DELTA_MIN, fx.spec, lm), SpecError);
}

TEST(MinimizeDelta, LosslessReturnsTarget) {
  const TargetContext t = make_target(sm(0.9));
  const MitigationResult r = minimize_delta(t, sm_loss(1.0), Ansatz::SQ_VAC);
  EXPECT_LT(r.delta, 1e-9);
  EXPECT_NEAR(std::abs(r.corrected.squeezing[0]), 0.9, 1e-4);
}

TEST(MinimizeDelta, SingleModeFindsVacuumMatch) {
  const TargetContext t = make_target(sm(1.5));
  MinimizeOptions mo;
  mo.seed_corrections = false;
  const MitigationResult r = minimize_delta(t, sm_loss(0.5), Ansatz::SQ_VAC, mo);
  EXPECT_NEAR(r.diagnostics.at("x.xi0"), xi_vacuum(1.5, 0.5), 1e-4);
  EXPECT_FALSE(r.flagged);
  EXPECT_GT(r.diagnostics.at("matched_outcomes"), 0.0);
}

TEST(MinimizeDelta, DeterministicAcrossThreadCounts) {
  const GbsSpec s = fig1();
  const LossModel lm = fig1_loss(s.unitary);
  const TargetContext t = make_target(s);
  MinimizeOptions a, b;
  a.search.grid_points = b.search.grid_points = 15;
  a.search.threads = 1;
  b.search.threads = 3;
  const MitigationResult ra = minimize_delta(t, lm, Ansatz::SQ_VAC, a), rb = minimize_delta(t, lm, Ansatz::SQ_VAC, b);
  EXPECT_EQ(ra.delta, rb.delta);
  EXPECT_EQ(ra.corrected.squeezing, rb.corrected.squeezing);
}

TEST(MinimizeDelta, SmallDisplacementVanishesNearPointFour) {
  // alpha~ = 0.2, eta = 0.5: the optimal displacement switches off as xi~ grows past ~0.4
  auto abs_alpha = [](double xt) {
    const TargetContext t = make_target(sm(xt, 0.2));
    return minimize_delta(t, sm_loss(0.5), Ansatz::DISPLACED_SQ).diagnostics.at("x.abs_alpha0");
  };
  EXPECT_GT(abs_alpha(0.30), 0.05);
  EXPECT_LT(abs_alpha(0.42), 1e-3);
  EXPECT_LT(abs_alpha(0.50), 1e-3);
}

TEST(Manifold, SeededAndVacuumMatched) {
  const GbsSpec s = fig1();
  const LossModel lm = fig1_loss(s.unitary);
  const TargetContext t = make_target(s);
  ManifoldOptions o;
  o.samples = 40;
  const ManifoldStats a = sample_vacuum_manifold(t, lm, o), b = sample_vacuum_manifold(t, lm, o);
  EXPECT_EQ(a.deltas, b.deltas);
  EXPECT_EQ(a.rejected, 0);
  EXPECT_LE(a.min, a.mean);
  EXPECT_LE(a.mean, a.max);
  // no vacuum-matched point beats the full minimizer by more than its tolerance
  EXPECT_GT(a.min, 0.106);
}

TEST(TwoModeUnitary, AnglesRoundTrip) {
  for (double th : {0.1, 0.8, 2.0})
    for (double ga : {0.0, 0.44, 4.0}) {
      const auto [t2, g2] = two_mode_angles(two_mode_unitary(th, ga));
      EXPECT_LT((two_mode_unitary(t2, g2) - two_mode_unitary(th, ga)).cwiseAbs().maxCoeff(), 1e-12);
    }
}
