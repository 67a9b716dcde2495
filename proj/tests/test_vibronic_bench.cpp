#include <gtest/gtest.h>

#include "lossmit/vibronic.hpp"

#include <numeric>

using namespace lossmit;

TEST(Fixtures, Validate) {
  for (const MoleculeFixture& f : {tropolone(), sulfur_dioxide(), formic_acid()}) EXPECT_NO_THROW(validate(f));
  MoleculeFixture bad = tropolone();
  bad.frequencies = Vec::Constant(3, 100.0);
  EXPECT_THROW(validate(bad), SpecError);
  bad.frequencies = Vec::Constant(2, -1.0);
  EXPECT_THROW(validate(bad), SpecError);
  EXPECT_THROW(formic_acid(CMat::Identity(3, 3)), SpecError);
  EXPECT_NE(formic_acid().notes.find("PLACEHOLDER"), std::string::npos);
}

TEST(Spectrum, MassAndBins) {
  MoleculeFixture f = tropolone();
  f.frequencies = Vec(2);
  f.frequencies << 100.0, 200.0;
  const TargetContext t = make_target(f.spec);
  const Spectrum s = spectrum(t.pnd, f.frequencies);
  EXPECT_NEAR(s.total(), std::accumulate(t.pnd.probs.begin(), t.pnd.probs.end(), 0.0), 1e-12);
  EXPECT_EQ(s.bins.front().first, 0.0);
  EXPECT_NEAR(s.bins.front().second, t.vacuum, 1e-15);
  for (std::size_t i = 1; i < s.bins.size(); ++i) {
    EXPECT_GT(s.bins[i].first, s.bins[i - 1].first);
    // every energy is a multiple of 100 here
    EXPECT_NEAR(std::fmod(s.bins[i].first, 100.0), 0.0, 1e-9);
  }
  EXPECT_THROW(spectrum(t.pnd, Vec::Ones(3)), SpecError);
}

TEST(Benchmark, LosslessGivesZeroDelta) {
  const MoleculeFixture f = sulfur_dioxide();
  const BenchmarkResult r = run_benchmark(f, lossless_model(f.spec.unitary), {Scheme::NONE, Scheme::VAC_PLUS_DC});
  ASSERT_EQ(r.rows.size(), 2u);
  for (const auto& row : r.rows) EXPECT_LT(row.delta, 1e-9);
  EXPECT_THROW(run_benchmark(f, lossless_model(CMat::Identity(3, 3)), {Scheme::NONE}), SpecError);
}

TEST(Benchmark, TropoloneFrozen) {
  const MoleculeFixture f = tropolone();
  const BenchmarkResult r =
      run_benchmark(f, uniform_loss_model(f.spec.unitary, 0.7, 0.7), {Scheme::NONE, Scheme::VAC_FIXED_RATIO});
  EXPECT_NEAR(r.rows[0].delta, 0.158565496549, 1e-9);
  EXPECT_NEAR(r.rows[1].delta, 0.139155912553, 1e-9);
  EXPECT_LT(r.rows[1].delta, r.rows[0].delta);
}

TEST(Benchmark, SulfurDioxideDisplacementFixDominates) {
  const MoleculeFixture f = sulfur_dioxide();
  const BenchmarkResult r = run_benchmark(f, uniform_loss_model(f.spec.unitary, 0.7, 0.7),
                                          {Scheme::NONE, Scheme::DC, Scheme::VAC_PLUS_DC});
  EXPECT_NEAR(r.rows[0].delta, 0.305718, 5e-6);
  EXPECT_LT(r.rows[1].delta, 0.1 * r.rows[0].delta);
  EXPECT_LT(r.rows[2].delta, r.rows[1].delta);
}

TEST(PhaseNoise, ZeroSigmaHasNoSpread) {
  const MoleculeFixture f = tropolone();
  const LossModel lm = uniform_loss_model(f.spec.unitary, 0.7, 0.7);
  const auto lv = phase_noise_study(f, lm, {0.0, 0.1}, 20, 3);
  ASSERT_EQ(lv.size(), 2u);
  EXPECT_EQ(lv[0].std_uncorrected, 0.0);
  EXPECT_EQ(lv[0].std_corrected, 0.0);
  EXPECT_NEAR(lv[0].mean_uncorrected, 0.158565496549, 1e-9);
  EXPECT_NEAR(lv[0].mean_corrected, 0.139155912553, 1e-9);
  EXPECT_NEAR(lv[1].mean_corrected, lv[0].mean_corrected, 0.005);
  const auto again = phase_noise_study(f, lm, {0.0, 0.1}, 20, 3);
  EXPECT_EQ(again[1].mean_uncorrected, lv[1].mean_uncorrected);
  EXPECT_THROW(phase_noise_study(f, lm, {0.1}, 0, 3), SpecError);
}

TEST(MeanStd, ShiftedEstimator) {
  const auto [m, s] = detail::mean_std({0.3, 0.3, 0.3});
  EXPECT_EQ(m, 0.3);
  EXPECT_EQ(s, 0.0);
  const auto [m2, s2] = detail::mean_std({1.0, 2.0, 3.0});
  EXPECT_DOUBLE_EQ(m2, 2.0);
  EXPECT_DOUBLE_EQ(s2, 1.0);
}

TEST(Sweeps, Fig2LossRaisesVacuumRatio) {
  SweepParams p;
  p.max_photons = 4;
  const Dataset d = sweep_single_mode(Study::FIG2_RATIOS, p);
  ASSERT_EQ(d.rows.size(), p.etas.size() * 5);
  for (const auto& r : d.rows) {
    if (r[0] == 1.0) EXPECT_NEAR(r[2], 1.0, 1e-12);
    else if (r[1] == 0.0) EXPECT_GT(r[2], 1.0);
  }
}

TEST(Sweeps, Fig3BoundaryAgreesWithClassifier) {
  SweepParams p;
  p.points = 12;
  const Dataset d = sweep_single_mode(Study::FIG3_REGIONS, p);
  ASSERT_EQ(d.rows.size(), 144u);
  int edge = 0;
  for (std::size_t i = 0; i < d.rows.size(); ++i) {
    const auto& r = d.rows[i];
    EXPECT_EQ(r[2] == 1.0, classify_vacuum_optimality(r[0], r[1]) == Region::EDGE);
    EXPECT_EQ(d.labels[i], r[2] == 1.0 ? "EDGE" : "PROVEN_OPTIMAL");
    edge += r[2] == 1.0;
    if (r[1] < 14.0 / 15.0) EXPECT_EQ(r[2], 0.0);
  }
  EXPECT_GT(edge, 0);
}

TEST(Sweeps, Fig4VacuumMatchLowestExceptMinimizers) {
  SweepParams p;
  p.points = 4;
  p.xi_max = 2.0;
  p.threads = 1;
  const Dataset d = sweep_single_mode(Study::FIG4_DELTA_VS_XI, p);
  const std::size_t ns = detail::fig4_schemes().size();
  ASSERT_EQ(d.rows.size(), 4 * ns);
  for (std::size_t i = 0; i < 4; ++i) {
    double vac = 0.0, best = 1.0;
    for (std::size_t k = 0; k < ns; ++k) {
      const auto& row = d.rows[i * ns + k];
      if (d.labels[i * ns + k] == "VAC_FIXED_RATIO") vac = row[3];
      best = std::min(best, row[3]);
    }
    EXPECT_EQ(vac, best) << i;
  }
}

TEST(Sweeps, Deterministic) {
  SweepParams p;
  p.points = 5;
  p.threads = 2;
  const Dataset a = sweep_single_mode(Study::FIG6_BANDS, p);
  p.threads = 1;
  const Dataset b = sweep_single_mode(Study::FIG6_BANDS, p);
  EXPECT_EQ(a.rows, b.rows);
  EXPECT_EQ(a.labels.back(), "argmin");
  p.points = 1;
  EXPECT_THROW(sweep_single_mode(Study::FIG6_BANDS, p), SpecError);
  EXPECT_THROW(study_from_string("FIG7"), SpecError);
}
