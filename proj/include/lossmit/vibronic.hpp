#pragma once

#include "lossmit/mitigation.hpp"

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

namespace lossmit {

struct MoleculeFixture {
  std::string name;
  GbsSpec spec;
  Vec frequencies;  // cm^-1, optional
  std::string notes;
};

inline void validate(const MoleculeFixture& f) {
  validate(f.spec);
  if (f.frequencies.size() && f.frequencies.size() != f.spec.modes())
    throw SpecError("fixture '" + f.name + "': frequencies have the wrong length");
  for (Eigen::Index i = 0; i < f.frequencies.size(); ++i)
    if (!(f.frequencies[i] > 0.0)) throw SpecError("fixture '" + f.name + "': frequencies must be positive");
}

inline MoleculeFixture tropolone() {
  MoleculeFixture f;
  f.name = "tropolone";
  f.spec = GbsSpec::identity(2);
  f.spec.squeezing << 0.19, 0.72;
  f.spec.unitary = two_mode_unitary(0.27, 0.0);
  f.notes = "two-mode subsystem of the 370 nm transition, no displacement";
  return f;
}

inline MoleculeFixture sulfur_dioxide() {
  MoleculeFixture f;
  f.name = "so2";
  f.spec = GbsSpec::identity(2);
  f.spec.squeezing << -0.11, -0.05;
  f.spec.displacement << -0.93, 1.01;
  f.spec.unitary = two_mode_unitary(0.59, 0.0);
  f.notes = "two-mode subsystem of SO2- -> SO2";
  return f;
}

// Orthonormal DCT-II matrix; stands in for the formic-acid interferometer.
inline CMat dct_unitary(int m) {
  CMat u(m, m);
  for (int k = 0; k < m; ++k)
    for (int n = 0; n < m; ++n)
      u(k, n) = std::sqrt((k == 0 ? 1.0 : 2.0) / m) * std::cos(std::numbers::pi * (n + 0.5) * k / m);
  return u;
}

// Squeezing and displacement of the seven-mode a' block. The molecule's
// interferometer is not bundled; pass it in, otherwise a DCT placeholder is used.
inline MoleculeFixture formic_acid(const CMat& unitary = CMat()) {
  static const double xi[] = {-0.0972, -0.0701, -0.0208, 0.0597, 0.0749, 0.1120, 0.1867};
  static const double al[] = {0.6176, 0.4362, -0.4334, -0.5482, -0.1207, 0.6419, -0.0611};
  MoleculeFixture f;
  f.name = "formic_acid";
  f.spec = GbsSpec::identity(7);
  for (int i = 0; i < 7; ++i) {
    f.spec.squeezing[i] = xi[i];
    f.spec.displacement[i] = al[i];
  }
  if (unitary.size()) {
    if (unitary.rows() != 7 || unitary.cols() != 7) throw SpecError("formic_acid: unitary must be 7x7");
    f.spec.unitary = unitary;
    f.notes = "user-supplied interferometer";
  } else {
    f.spec.unitary = dct_unitary(7);
    f.notes = "PLACEHOLDER interferometer (orthonormal DCT-II), not the molecule's; deltas are not comparable to published values";
  }
  validate(f.spec);
  return f;
}

inline LossRanges formic_acid_loss_ranges() {
  LossRanges r;
  r.pre = {0.5, 0.6};
  r.internal = {0.8, 0.85};
  r.post = {0.7, 0.8};
  return r;
}

// ---------------------------------------------------------------------------

struct Spectrum {
  std::vector<std::pair<double, double>> bins;  // (omega_v, probability), ascending omega

  double total() const {
    double s = 0.0;
    for (const auto& b : bins) s += b.second;
    return s;
  }
};

inline Spectrum spectrum(const Pnd& p, const Vec& frequencies, double tol = 1e-6) {
  if (frequencies.size() != p.num_modes) throw SpecError("spectrum: frequencies length != modes");
  std::vector<std::pair<double, double>> pts;
  pts.reserve(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    const int* e = p.index->exponents(i);
    double w = 0.0;
    for (int j = 0; j < p.num_modes; ++j) w += e[j] * frequencies[j];
    pts.emplace_back(w, p.probs[i]);
  }
  std::stable_sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  Spectrum s;
  for (const auto& [w, q] : pts) {
    if (!s.bins.empty() && w - s.bins.back().first <= tol)
      s.bins.back().second += q;
    else
      s.bins.emplace_back(w, q);
  }
  return s;
}

struct BenchmarkRow {
  Scheme scheme = Scheme::NONE;
  double delta = 0.0;
  double uncertainty = 0.0;
  bool flagged = false;
  GbsSpec corrected;
  Spectrum spectrum;  // empty without frequencies
};

struct BenchmarkResult {
  std::string fixture;
  int cutoff = 0;
  double target_vacuum = 0.0;
  Spectrum target_spectrum;
  std::vector<BenchmarkRow> rows;
};

inline BenchmarkResult run_benchmark(const MoleculeFixture& fx, const LossModel& loss, const std::vector<Scheme>& schemes,
                                     const SchemeOptions& opt = {}) {
  validate(fx);
  if (loss.num_modes != fx.spec.modes()) throw SpecError("run_benchmark: loss model and fixture differ in modes");
  BenchmarkResult out;
  out.fixture = fx.name;
  const TargetContext t = make_target(fx.spec, opt.pnd);
  out.cutoff = t.pnd.cutoff;
  out.target_vacuum = t.vacuum;
  const bool spectra = fx.frequencies.size() > 0;
  if (spectra) out.target_spectrum = spectrum(t.pnd, fx.frequencies);
  for (Scheme s : schemes) {
    const MitigationResult r = apply_scheme(s, t, loss, opt);
    BenchmarkRow row;
    row.scheme = s;
    row.delta = r.delta;
    row.uncertainty = r.delta_uncertainty;
    row.flagged = r.flagged;
    row.corrected = r.corrected;
    if (spectra) row.spectrum = spectrum(probe_pnd(t, r.corrected, loss, opt.pnd), fx.frequencies);
    out.rows.push_back(std::move(row));
  }
  return out;
}

// ---------------------------------------------------------------------------
// phase noise on the first mode's squeezing phase

struct PhaseNoiseLevel {
  double sigma = 0.0;
  double mean_uncorrected = 0.0, std_uncorrected = 0.0;
  double mean_corrected = 0.0, std_corrected = 0.0;
};

inline std::vector<double> default_phase_noise_levels() {
  std::vector<double> v;
  for (double deg : {0.0, 2.0, 5.0, 10.0, 20.0, 40.0, 60.0, 90.0}) v.push_back(deg * std::numbers::pi / 180.0);
  return v;
}

namespace detail {

inline std::pair<double, double> mean_std(const std::vector<double>& v) {
  if (v.empty()) return {0.0, 0.0};
  // shifted by the first sample so identical samples give exactly zero spread
  const double x0 = v[0];
  double m = 0.0;
  for (double x : v) m += x - x0;
  m /= v.size();
  double s = 0.0;
  for (double x : v) s += (x - x0 - m) * (x - x0 - m);
  return {x0 + m, v.size() > 1 ? std::sqrt(s / (v.size() - 1)) : 0.0};
}

}  // namespace detail

inline std::vector<PhaseNoiseLevel> phase_noise_study(const MoleculeFixture& fx, const LossModel& loss,
                                                      const std::vector<double>& sigmas, int n_samples,
                                                      std::uint64_t seed, int threads = 0) {
  if (n_samples < 1) throw SpecError("phase_noise_study: n_samples must be >= 1");
  const TargetContext t = make_target(fx.spec);
  // corrections are fixed at the nominal spec; the noise is not known shot by shot
  const GbsSpec corrected = vacuum_overlap_correct(fx.spec, loss, VacuumStrategy::FIXED_RATIO);
  std::vector<PhaseNoiseLevel> out;
  for (std::size_t l = 0; l < sigmas.size(); ++l) {
    std::vector<double> du(n_samples), dc(n_samples);
    parallel_for(n_samples, threads, [&](std::size_t k) {
      CounterRng rng{seed, (static_cast<std::uint64_t>(l) << 32) | k};
      const double dphi = sigmas[l] * rng.normal();
      const cplx rot = std::polar(1.0, dphi);
      PndOptions po;
      po.threads = 1;
      GbsSpec a = fx.spec, b = corrected;
      a.squeezing[0] *= rot;
      b.squeezing[0] *= rot;
      du[k] = evaluate_delta(t, a, loss, po).delta;
      dc[k] = evaluate_delta(t, b, loss, po).delta;
    });
    PhaseNoiseLevel lv;
    lv.sigma = sigmas[l];
    std::tie(lv.mean_uncorrected, lv.std_uncorrected) = detail::mean_std(du);
    std::tie(lv.mean_corrected, lv.std_corrected) = detail::mean_std(dc);
    out.push_back(lv);
  }
  return out;
}

// ---------------------------------------------------------------------------
// single-mode sweeps

enum class Study { FIG2_RATIOS, FIG3_REGIONS, FIG4_DELTA_VS_XI, FIG5_DOTGRID, FIG6_BANDS };

inline std::string to_string(Study s) {
  switch (s) {
    case Study::FIG2_RATIOS: return "FIG2_RATIOS";
    case Study::FIG3_REGIONS: return "FIG3_REGIONS";
    case Study::FIG4_DELTA_VS_XI: return "FIG4_DELTA_VS_XI";
    case Study::FIG5_DOTGRID: return "FIG5_DOTGRID";
    case Study::FIG6_BANDS: return "FIG6_BANDS";
  }
  return "?";
}

inline Study study_from_string(const std::string& s) {
  for (Study k : {Study::FIG2_RATIOS, Study::FIG3_REGIONS, Study::FIG4_DELTA_VS_XI, Study::FIG5_DOTGRID, Study::FIG6_BANDS})
    if (to_string(k) == s) return k;
  throw SpecError("unknown study '" + s + "'");
}

struct SweepParams {
  double eta = 0.5;
  std::vector<double> etas{1.0, 0.9, 0.8, 0.7, 0.6, 0.5};  // FIG2
  double xi = 0.9, alpha = 0.25, phi = 0.0;                 // FIG2 state; FIG5/6 target phase
  int max_photons = 10;                                     // FIG2 ratios, FIG6 belts
  double xi_max = 3.0;                                      // FIG4 range (0, xi_max]
  int points = 30;                                          // FIG4 points, FIG3/FIG5/FIG6 grid side
  double eta_min = 0.8;                                     // FIG3 eta range [eta_min, 1)
  double xi_vac_max = 3.0;                                  // FIG3 range
  double xi_target = 0.15, alpha_target = 0.31;             // FIG6 target
  double alpha_max = 1.0;                                   // FIG5 grid
  double rel_tol = 0.005;
  int threads = 0;
};

struct Dataset {
  std::string study;
  std::vector<std::string> columns;  // numeric columns after "label"
  std::vector<std::string> labels;
  std::vector<std::vector<double>> rows;

  void add(std::string label, std::vector<double> row) {
    labels.push_back(std::move(label));
    rows.push_back(std::move(row));
  }
};

namespace detail {

inline GbsSpec single_mode(cplx xi, cplx alpha) {
  GbsSpec s = GbsSpec::identity(1);
  s.squeezing[0] = xi;
  s.displacement[0] = alpha;
  return s;
}

inline bool rel_match(double a, double b, double tol) {
  return std::abs(a - b) <= tol * std::max(std::abs(a), std::abs(b));
}

inline Dataset fig2(const SweepParams& p) {
  Dataset d;
  d.study = "FIG2_RATIOS";
  d.columns = {"eta", "m", "ratio"};
  const GbsSpec s = single_mode(p.xi, p.alpha);
  const Pnd t = pnd_gaussian(prepare_target(s), {.cutoff = p.max_photons});
  for (double eta : p.etas) {
    const Pnd q = pnd_gaussian(propagate(s, uniform_loss_model(s.unitary, eta, 1.0)), {.cutoff = p.max_photons});
    for (int m = 0; m <= p.max_photons; ++m) d.add("", {eta, double(m), q.probs[m] / t.probs[m]});
  }
  return d;
}

inline Dataset fig3(const SweepParams& p) {
  Dataset d;
  d.study = "FIG3_REGIONS";
  d.columns = {"xi_vac", "eta", "edge", "polynomial"};
  const int n = p.points;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double xv = p.xi_vac_max * (i + 0.5) / n;
      const double eta = p.eta_min + (1.0 - p.eta_min) * (j + 0.5) / n;
      const double s = std::sinh(xv);
      const Region r = classify_vacuum_optimality(xv, eta);
      d.add(to_string(r), {xv, eta, r == Region::EDGE ? 1.0 : 0.0, edge_polynomial(eta, s * s)});
    }
  return d;
}

inline std::vector<Scheme> fig4_schemes() {
  return {Scheme::NONE,      Scheme::FIDELITY,  Scheme::MEAN,       Scheme::VARIANCE,
          Scheme::VAC_FIXED_RATIO, Scheme::PS_WAS, Scheme::PS_KLD_UP, Scheme::PS_KLD_PU,
          Scheme::PS_KLD_SYM, Scheme::PS_BHA};
}

inline Dataset fig4(const SweepParams& p) {
  Dataset d;
  d.study = "FIG4_DELTA_VS_XI";
  d.columns = {"eta", "xi_tilde", "xi", "delta"};
  const auto schemes = fig4_schemes();
  const int n = p.points;
  std::vector<std::vector<std::pair<double, double>>> res(n);
  parallel_for(n, p.threads, [&](std::size_t i) {
    const double xt = p.xi_max * (i + 1.0) / n;
    const GbsSpec s = single_mode(xt, 0.0);
    const LossModel lm = uniform_loss_model(s.unitary, p.eta, 1.0);
    PndOptions po;
    po.threads = 1;
    po.allow_truncation = true;  // thermal tails at xi ~ 3 outrun the photon cap
    const TargetContext t = make_target(s, po);
    SchemeOptions so;
    so.pnd = po;
    for (Scheme sc : schemes) {
      const MitigationResult r = apply_scheme(sc, t, lm, so);
      res[i].emplace_back(std::abs(r.corrected.squeezing[0]), r.delta);
    }
  });
  for (int i = 0; i < n; ++i)
    for (std::size_t k = 0; k < schemes.size(); ++k)
      d.add(to_string(schemes[k]), {p.eta, p.xi_max * (i + 1.0) / n, res[i][k].first, res[i][k].second});
  return d;
}

// Matching flags for m = 0..4, the mean and the variance between the target and the
// delta-minimizing lossy displaced squeezed state, on a (xi_tilde, |alpha_tilde|) grid.
inline Dataset fig5(const SweepParams& p) {
  Dataset d;
  d.study = "FIG5_DOTGRID";
  d.columns = {"eta", "phi", "xi_tilde", "alpha_tilde", "xi_min", "alpha_min", "delta", "m0", "m1", "m2", "m3", "m4",
               "all", "mean", "variance"};
  const int n = p.points;
  std::vector<std::vector<double>> rows(n * n);
  parallel_for(n * n, p.threads, [&](std::size_t k) {
    const double xt = p.xi_max * (k / n + 1.0) / n;
    const double at = p.alpha_max * (k % n + 1.0) / n;
    const GbsSpec s = single_mode(xt, std::polar(at, p.phi));
    const LossModel lm = uniform_loss_model(s.unitary, p.eta, 1.0);
    PndOptions po;
    po.threads = 1;
    const TargetContext t = make_target(s, po);
    MinimizeOptions mo;
    mo.pnd = po;
    mo.search.threads = 1;
    mo.search.grid_points = 21;
    mo.search.phase_points = 24;
    const MitigationResult r = minimize_delta(t, lm, Ansatz::DISPLACED_SQ, mo);
    const Pnd q = probe_pnd(t, r.corrected, lm, po);
    std::vector<double> row{p.eta, p.phi, xt, at, std::abs(r.corrected.squeezing[0]), std::abs(r.corrected.displacement[0]),
                            r.delta};
    bool all = true;
    for (int m = 0; m <= 4; ++m) {
      const bool ok = m < static_cast<int>(q.size()) && rel_match(t.pnd.probs[m], q.probs[m], p.rel_tol);
      all = all && ok;
      row.push_back(ok);
    }
    row.push_back(all);
    const PhotonMoments a = photon_moments(t.state), b = photon_moments(propagate(r.corrected, lm));
    row.push_back(rel_match(a.nbar.sum(), b.nbar.sum(), p.rel_tol));
    row.push_back(rel_match(a.ncov.sum(), b.ncov.sum(), p.rel_tol));
    rows[k] = row;
  });
  for (auto& r : rows) d.add("", std::move(r));
  return d;
}

// delta over the (xi, |alpha|) plane of the lossy probe at fixed phase, with a
// bitmask of the photon numbers whose probabilities match the target; the last
// row (label "argmin") is the grid minimum.
inline Dataset fig6(const SweepParams& p) {
  Dataset d;
  d.study = "FIG6_BANDS";
  d.columns = {"xi", "alpha", "delta", "match_mask"};
  const GbsSpec s = single_mode(p.xi_target, std::polar(p.alpha_target, p.phi));
  const LossModel lm = uniform_loss_model(s.unitary, p.eta, 1.0);
  const TargetContext t = make_target(s);
  const int n = p.points;
  const double xmax = 2.0 * p.xi_target + 0.5, amax = 2.0 * p.alpha_target / std::sqrt(p.eta) + 0.5;
  std::vector<std::vector<double>> rows(n * n);
  parallel_for(n * n, p.threads, [&](std::size_t k) {
    const double x = xmax * (k / n) / (n - 1.0), a = amax * (k % n) / (n - 1.0);
    PndOptions po;
    po.threads = 1;
    po.cutoff = std::max(t.pnd.cutoff, p.max_photons);
    const Pnd q = pnd_gaussian(propagate(single_mode(x, std::polar(a, p.phi)), lm), po);
    double mask = 0.0;
    for (int m = 0; m <= p.max_photons && m < static_cast<int>(t.pnd.size()); ++m)
      if (rel_match(t.pnd.probs[m], q.probs[m], p.rel_tol)) mask += std::ldexp(1.0, m);
    rows[k] = {x, a, total_variation_normalized(t.pnd, q).delta, mask};
  });
  std::size_t best = 0;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (rows[k][2] < rows[best][2]) best = k;
    d.add("", rows[k]);
  }
  d.add("argmin", rows[best]);
  return d;
}

}  // namespace detail

inline Dataset sweep_single_mode(Study s, const SweepParams& p = {}) {
  if (p.points < 2) throw SpecError("sweep_single_mode: points must be >= 2");
  detail::require_eta(p.eta);
  switch (s) {
    case Study::FIG2_RATIOS: return detail::fig2(p);
    case Study::FIG3_REGIONS: return detail::fig3(p);
    case Study::FIG4_DELTA_VS_XI: return detail::fig4(p);
    case Study::FIG5_DOTGRID: return detail::fig5(p);
    case Study::FIG6_BANDS: return detail::fig6(p);
  }
  throw SpecError("sweep_single_mode: unknown study");
}

}  // namespace lossmit
