#pragma once

#include "lossmit/gaussian_pnd.hpp"
#include "lossmit/loss_network.hpp"
#include "lossmit/measures.hpp"
#include "lossmit/moments.hpp"
#include "lossmit/optimize.hpp"
#include "lossmit/single_mode.hpp"

#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

namespace lossmit {

enum class Scheme {
  NONE,
  DC,
  FIDELITY,
  PS_WAS,
  PS_KLD_UP,
  PS_KLD_PU,
  PS_KLD_SYM,
  PS_BHA,
  PS_WIGNER_TVD,
  MEAN,
  VARIANCE,
  MEAN_PLUS_DC,
  VAC_FIXED_RATIO,
  VAC_LOSS_WEIGHTED,
  VAC_PLUS_DC,
  VAC_PLUS_MEAN,
  DELTA_MIN
};

enum class Ansatz { SQ_VAC, DISPLACED_SQ, SQ_THERMAL, DISPLACED_SQ_THERMAL };

inline const std::vector<std::pair<Scheme, std::string>>& scheme_names() {
  static const std::vector<std::pair<Scheme, std::string>> t = {
      {Scheme::NONE, "NONE"},
      {Scheme::DC, "DC"},
      {Scheme::FIDELITY, "FIDELITY"},
      {Scheme::PS_WAS, "PS_WAS"},
      {Scheme::PS_KLD_UP, "PS_KLD_UP"},
      {Scheme::PS_KLD_PU, "PS_KLD_PU"},
      {Scheme::PS_KLD_SYM, "PS_KLD_SYM"},
      {Scheme::PS_BHA, "PS_BHA"},
      {Scheme::PS_WIGNER_TVD, "PS_WIGNER_TVD"},
      {Scheme::MEAN, "MEAN"},
      {Scheme::VARIANCE, "VARIANCE"},
      {Scheme::MEAN_PLUS_DC, "MEAN_PLUS_DC"},
      {Scheme::VAC_FIXED_RATIO, "VAC_FIXED_RATIO"},
      {Scheme::VAC_LOSS_WEIGHTED, "VAC_LOSS_WEIGHTED"},
      {Scheme::VAC_PLUS_DC, "VAC_PLUS_DC"},
      {Scheme::VAC_PLUS_MEAN, "VAC_PLUS_MEAN"},
      {Scheme::DELTA_MIN, "DELTA_MIN"}};
  return t;
}

inline std::string to_string(Scheme s) {
  for (const auto& [k, v] : scheme_names())
    if (k == s) return v;
  return "?";
}

inline Scheme scheme_from_string(const std::string& name) {
  for (const auto& [k, v] : scheme_names())
    if (v == name) return k;
  throw SpecError("unknown scheme '" + name + "'");
}

inline std::string to_string(Ansatz a) {
  switch (a) {
    case Ansatz::SQ_VAC: return "SQ_VAC";
    case Ansatz::DISPLACED_SQ: return "DISPLACED_SQ";
    case Ansatz::SQ_THERMAL: return "SQ_THERMAL";
    case Ansatz::DISPLACED_SQ_THERMAL: return "DISPLACED_SQ_THERMAL";
  }
  return "?";
}

inline Ansatz ansatz_from_string(const std::string& name) {
  for (Ansatz a : {Ansatz::SQ_VAC, Ansatz::DISPLACED_SQ, Ansatz::SQ_THERMAL, Ansatz::DISPLACED_SQ_THERMAL})
    if (to_string(a) == name) return a;
  throw SpecError("unknown ansatz '" + name + "'");
}

// ---------------------------------------------------------------------------
// single-mode squeezed vacuum: closed forms and root functions

struct AnalyticCorrections {
  double F = 0.0;
  double MEAN = 0.0;
  double VARIANCE = 0.0;
  double VAC = 0.0;
};

inline double xi_fidelity(double xt, double eta) {
  return 0.25 * std::log((1.0 - eta + std::exp(2.0 * xt)) / (1.0 - eta + std::exp(-2.0 * xt)));
}

inline double xi_mean(double xt, double eta) { return std::asinh(std::sinh(xt) / std::sqrt(eta)); }

inline double xi_variance(double xt, double eta) {
  const double s = std::sinh(xt), c = std::cosh(xt);
  const double nt = 2.0 * s * s * c * c;
  const double a = 8.0 * nt / ((1.0 + eta) * (1.0 + eta));
  // sqrt(1 + a) - 1 without cancellation
  const double s2 = (1.0 + eta) / (4.0 * eta) * a / (std::sqrt(1.0 + a) + 1.0);
  return std::asinh(std::sqrt(s2));
}

inline double xi_vacuum(double xt, double eta) { return std::asinh(std::sinh(xt) / std::sqrt(eta * (2.0 - eta))); }

inline AnalyticCorrections analytic_corrections(double xt, double eta) {
  if (xt < 0.0) throw SpecError("analytic_corrections: xi_tilde < 0");
  if (!(eta > 0.0 && eta <= 1.0)) throw SpecError("analytic_corrections: eta outside (0,1]");
  return {xi_fidelity(xt, eta), xi_mean(xt, eta), xi_variance(xt, eta), xi_vacuum(xt, eta)};
}

// Stationarity conditions of the phase-space measures for a squeezed vacuum
// target xt against the lossy probe (xi, eta), up to positive factors.
inline double root_function(MeasureKind k, double xi, double xt, double eta) {
  const double q = 1.0 - eta;
  const double dd = eta * eta + q * q + 2.0 * eta * q * std::cosh(2.0 * xi);
  const double sm = std::sinh(2.0 * xi - 2.0 * xt);
  switch (k) {
    case MeasureKind::KLD_PU: return sm - q * std::sinh(2.0 * xi) / dd;
    case MeasureKind::KLD_SYM:
      return sm - (2.0 * eta * q * std::sinh(2.0 * xt) + q * q * std::sinh(2.0 * xi + 2.0 * xt)) / (eta * eta + dd * dd);
    case MeasureKind::KLD_UP:
      return eta * eta * sm - q * q * std::sinh(2.0 * xi + 2.0 * xt) - 2.0 * eta * q * std::sinh(2.0 * xt) +
             eta * q * q * std::sinh(4.0 * xi) + q * (eta * eta + q * q) * std::sinh(2.0 * xi);
    case MeasureKind::BHA: {
      const double s2 = std::sinh(xi) * std::sinh(xi);
      return eta * sm - q * std::sinh(2.0 * xt) + 2.0 * eta * q * q * s2 * std::sinh(2.0 * xi) / (1.0 + 2.0 * q * s2);
    }
    case MeasureKind::WAS:
      return 2.0 * std::sinh(2.0 * xi) + std::exp(-(2.0 * xi + xt)) / std::sqrt(q + eta * std::exp(-2.0 * xi)) -
             std::exp(2.0 * xi + xt) / std::sqrt(q + eta * std::exp(2.0 * xi));
    default: throw SpecError("root_function: no root function for " + to_string(k));
  }
}

inline GaussianState lossy_squeezed_state(cplx xi, cplx alpha, double eta, double thermal = 0.0) {
  return apply_loss_layer(prepare_inputs(CVec::Constant(1, xi), CVec::Constant(1, alpha), Vec::Constant(1, thermal)),
                          Vec::Constant(1, eta));
}

// Squeezing of the lossy probe that minimizes the measure against the squeezed
// vacuum target xt.
inline double phase_space_optimizer(MeasureKind k, double xt, double eta) {
  if (xt < 0.0) throw SpecError("phase_space_optimizer: xi_tilde < 0");
  detail::require_eta(eta);
  if (eta == 1.0 || xt == 0.0) return xt;
  if (eta == 0.0) throw SpecError("phase_space_optimizer: eta = 0");
  if (k == MeasureKind::FIDELITY) return xi_fidelity(xt, eta);
  if (k == MeasureKind::WIGNER_TVD) {
    const GaussianState target = lossy_squeezed_state(xt, 0.0, 1.0);
    auto f = [&](double x) { return wigner_tvd(target, lossy_squeezed_state(x, 0.0, eta), 1e-9).value; };
    const double hi = phase_space_optimizer(MeasureKind::KLD_PU, xt, eta) + 0.5;
    return minimize_1d(f, 0.5 * xt, hi, false, 1e-7).x;
  }
  auto f = [&](double x) { return root_function(k, x, xt, eta); };
  double lo = xt;
  if (f(lo) > 0.0) lo = 0.0;
  const double r = solve_root_expanding(f, lo, 1.0, 50.0, "phase_space_optimizer");
  return r;
}

// Monotonicity polynomial of the vacuum-plus-odd bound (overall factor eta dropped).
inline double edge_polynomial(double eta, double s2) {
  const double a = 2.0 - eta, b = 1.0 - eta;
  return 4.0 - 3.0 * eta + 12.0 * a * b * s2 + 36.0 * eta * a * a * b * b * s2 * s2 +
         4.0 * eta * eta * (14.0 - 15.0 * eta) * a * a * b * b * s2 * s2 * s2;
}

// Smallest xi at which the polynomial can turn negative, over eta in (14/15, 1).
inline double edge_threshold() {
  static const double t = [] {
    auto root_xi = [](double eta) {
      auto p = [&](double s2) { return edge_polynomial(eta, s2); };
      const double s2 = solve_root_expanding(p, 0.0, 1.0, 1e12, "edge_threshold");
      return std::asinh(std::sqrt(s2));
    };
    const double lo = 14.0 / 15.0 + 1e-9, hi = 1.0 - 1e-9;
    return minimize_1d(root_xi, lo, hi, true).f;
  }();
  return t;
}

enum class Region { PROVEN_OPTIMAL, EDGE };

inline std::string to_string(Region r) { return r == Region::EDGE ? "EDGE" : "PROVEN_OPTIMAL"; }

inline Region classify_vacuum_optimality(double xi_vac, double eta) {
  if (xi_vac < 2.290047 || eta < 14.0 / 15.0) return Region::PROVEN_OPTIMAL;
  const double s = std::sinh(xi_vac);
  return edge_polynomial(eta, s * s) < 0.0 ? Region::EDGE : Region::PROVEN_OPTIMAL;
}

// ---------------------------------------------------------------------------
// target context and delta evaluation

struct TargetContext {
  GbsSpec spec;
  GaussianState state;
  Pnd pnd;
  double vacuum = 0.0;
};

inline TargetContext make_target(const GbsSpec& spec, const PndOptions& opt = {}) {
  TargetContext t;
  t.spec = spec;
  t.state = prepare_target(spec);
  t.pnd = pnd_gaussian(t.state, opt);
  t.vacuum = vacuum_overlap(t.state);
  return t;
}

inline Pnd probe_pnd(const TargetContext& t, const GbsSpec& probe, const LossModel& loss, PndOptions opt = {}) {
  opt.cutoff = t.pnd.cutoff;
  return pnd_gaussian(propagate(probe, loss), opt);
}

inline TvdResult evaluate_delta(const TargetContext& t, const GbsSpec& probe, const LossModel& loss,
                                const PndOptions& opt = {}) {
  return total_variation_normalized(t.pnd, probe_pnd(t, probe, loss, opt));
}

// ---------------------------------------------------------------------------
// spec helpers

namespace detail {

inline double phase_or_zero(cplx z) { return std::abs(z) > 0 ? std::arg(z) : 0.0; }

inline GbsSpec with_magnitudes(const GbsSpec& s, const Vec& r) {
  GbsSpec o = s;
  for (int i = 0; i < s.modes(); ++i) o.squeezing[i] = std::polar(r[i], phase_or_zero(s.squeezing[i]));
  return o;
}

inline Vec magnitudes(const CVec& v) {
  Vec r(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) r[i] = std::abs(v[i]);
  return r;
}

// Net transmissivity of a single-mode model.
inline double single_mode_eta(const LossModel& lm) {
  const CMat t = amplitude_transfer(lm);
  return std::norm(t(0, 0));
}

inline bool is_single_mode_squeezed_vacuum(const GbsSpec& s) {
  return s.modes() == 1 && std::abs(s.displacement[0]) == 0.0 && (s.thermal.size() == 0 || s.thermal[0] == 0.0);
}

inline double max_abs(const CVec& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

constexpr double kMaxSqueezing = 20.0;

}  // namespace detail

// Two-mode interferometer in the (theta, gamma) form used by the benchmarks.
inline CMat two_mode_unitary(double theta, double gamma) {
  CMat u(2, 2);
  u << std::cos(theta), -std::polar(1.0, gamma) * std::sin(theta), std::polar(1.0, -gamma) * std::sin(theta),
      std::cos(theta);
  return u;
}

// Inverse of two_mode_unitary up to output phases; gamma in [0, 2pi).
inline std::pair<double, double> two_mode_angles(const CMat& u) {
  // u(0,0) = cos(theta) is real, u(1,0) = e^{-i gamma} sin(theta) with sin(theta) >= 0 on [0, pi]
  const double th = std::atan2(std::abs(u(1, 0)), u(0, 0).real());
  double ga = std::abs(u(1, 0)) > 0 ? -std::arg(u(1, 0)) : 0.0;
  ga = std::fmod(std::fmod(ga, 2 * std::numbers::pi) + 2 * std::numbers::pi, 2 * std::numbers::pi);
  return {th, ga};
}

// ---------------------------------------------------------------------------
// corrections

inline GbsSpec correct_displacement(const GbsSpec& spec, const LossModel& loss) {
  validate(spec);
  const CMat t = amplitude_transfer(with_unitary(loss, spec.unitary));
  const CVec want = spec.unitary * spec.displacement;
  Eigen::FullPivLU<CMat> lu(t);
  if (lu.rank() < spec.modes() || std::abs(lu.determinant()) < 1e-300)
    throw SpecError("correct_displacement: singular loss map");
  GbsSpec out = spec;
  out.displacement = lu.solve(want);
  return out;
}

enum class VacuumStrategy { FIXED_RATIO, LOSS_WEIGHTED, PLUS_DC, PLUS_MEAN };

namespace detail {

// First root in (0, hi] of vac(at(s)) = want, scanning upward; the vacuum need
// not be monotone along a family once displacements are present. s_start is
// tried first so an exact match (the lossless case) is returned unchanged.
inline GbsSpec first_vacuum_crossing(const std::function<GbsSpec(double)>& at, const LossModel& loss, double want,
                                     double hi, double s_start, const char* who) {
  auto vac = [&](double c) { return vacuum_overlap(propagate(at(c), loss)) - want; };
  if (s_start > 0.0 && std::abs(vac(s_start)) <= 1e-15) return at(s_start);
  const int n = std::max(1, static_cast<int>(std::ceil(hi / 0.05)));
  double a = 0.0, fa = vac(0.0);
  if (fa == 0.0) return at(0.0);
  for (int i = 1; i <= n; ++i) {
    const double b = hi * i / n;
    double fb;
    try {
      fb = vac(b);
    } catch (const NumericalError&) {
      break;  // covariance too ill-conditioned to go further
    }
    if ((fb > 0) != (fa > 0) || fb == 0.0) return at(solve_root(vac, a, b, who));
    a = b;
    fa = fb;
  }
  throw NumericalError(std::string(who) + ": vacuum constraint unreachable with |xi| <= 20");
}

// Squeezing magnitudes along a family indexed by the largest magnitude.
inline GbsSpec solve_vacuum_family(const GbsSpec& base, const LossModel& loss, double want,
                                   const std::function<Vec(double)>& family, double s_start, const char* who) {
  return first_vacuum_crossing([&](double c) { return with_magnitudes(base, family(c)); }, loss, want,
                               kMaxSqueezing, s_start, who);
}

}  // namespace detail

// Match the lossy global vacuum probability to the target's with the
// interferometer kept at its target value.
inline GbsSpec vacuum_overlap_correct(const GbsSpec& spec, const LossModel& loss, VacuumStrategy strategy,
                                      double* residual = nullptr) {
  validate(spec);
  const int m = spec.modes();
  const double want = vacuum_overlap(prepare_target(spec));
  const Vec r0 = detail::magnitudes(spec.squeezing);
  const double rmax = r0.maxCoeff();
  GbsSpec base = spec;
  if (strategy == VacuumStrategy::PLUS_DC || strategy == VacuumStrategy::PLUS_MEAN) base = correct_displacement(spec, loss);
  GbsSpec out;
  if (rmax == 0.0) {
    if (strategy == VacuumStrategy::PLUS_MEAN) throw SpecError("vacuum_overlap_correct: PLUS_MEAN needs squeezing");
    out = base;
  } else if (strategy == VacuumStrategy::FIXED_RATIO || strategy == VacuumStrategy::PLUS_DC) {
    auto fam = [&](double t) -> Vec { return (t / rmax) * r0; };
    out = detail::solve_vacuum_family(base, loss, want, fam, rmax, "vacuum_overlap_correct");
  } else if (strategy == VacuumStrategy::LOSS_WEIGHTED) {
    const Vec eff = effective_transmissivity(with_unitary(loss, spec.unitary));
    Vec w(m);
    for (int i = 0; i < m; ++i) {
      if (eff[i] <= 0.0) throw SpecError("vacuum_overlap_correct: zero effective transmissivity");
      const double s = std::sinh(r0[i]);
      w[i] = s * s / eff[i];
    }
    const double wmax = w.maxCoeff();
    // indexed by the largest magnitude: sinh^2 r_i = sinh^2(t) w_i / wmax
    auto fam = [&](double t) -> Vec {
      Vec r(m);
      const double st = std::sinh(t);
      for (int i = 0; i < m; ++i) r[i] = std::asinh(st * std::sqrt(w[i] / wmax));
      return r;
    };
    out = detail::solve_vacuum_family(base, loss, want, fam, rmax, "vacuum_overlap_correct");
  } else {
    // vacuum and total mean photon number, with squeezing scaled by t and the
    // corrected displacement scaled by s; s is eliminated through the mean
    const double nt = photon_moments(prepare_target(spec)).nbar.sum();
    const CVec a0 = base.displacement;
    auto mean_sq = [&](double t) {
      GbsSpec g = detail::with_magnitudes(base, t * r0);
      g.displacement.setZero();
      return photon_moments(propagate(g, loss)).nbar.sum();
    };
    GbsSpec dpart = base;
    dpart.squeezing.setZero();
    const double nd = photon_moments(propagate(dpart, loss)).nbar.sum();
    auto at = [&](double t) {
      const double rest = nt - mean_sq(t);
      GbsSpec g = detail::with_magnitudes(base, t * r0);
      g.displacement = (nd > 0 && rest > 0 ? std::sqrt(rest / nd) : 0.0) * a0;
      return g;
    };
    // the largest t with a nonnegative displacement budget
    double t_hi = detail::kMaxSqueezing / rmax;
    if (mean_sq(t_hi) > nt) t_hi = solve_root([&](double t) { return mean_sq(t) - nt; }, 0.0, t_hi, "PLUS_MEAN");
    try {
      out = detail::first_vacuum_crossing(at, loss, want, t_hi, 0.0, "PLUS_MEAN");
    } catch (const NumericalError&) {
      throw NumericalError("vacuum_overlap_correct: PLUS_MEAN has no physical solution");
    }
  }
  if (residual) *residual = std::abs(vacuum_overlap(propagate(out, loss)) - want);
  return out;
}

enum class MeanFix { NONE, DC, VAC };

// Match the total mean photon number. Squeezing intensities sinh^2 are scaled by
// one common factor; the displacement is left alone (NONE), set to the
// displacement correction (DC), or fixed jointly with the vacuum (VAC).
inline GbsSpec mean_correct(const GbsSpec& spec, const LossModel& loss, MeanFix fix) {
  validate(spec);
  if (fix == MeanFix::VAC) return vacuum_overlap_correct(spec, loss, VacuumStrategy::PLUS_MEAN);
  const int m = spec.modes();
  GbsSpec base = fix == MeanFix::DC ? correct_displacement(spec, loss) : spec;
  const double nt = photon_moments(prepare_target(spec)).nbar.sum();
  GbsSpec dpart = base;
  dpart.squeezing.setZero();
  const double nd = photon_moments(propagate(dpart, loss)).nbar.sum();
  const Vec eff = effective_transmissivity(with_unitary(loss, spec.unitary));
  double ns = 0.0;
  Vec s2(m);
  for (int i = 0; i < m; ++i) {
    const double s = std::sinh(std::abs(spec.squeezing[i]));
    s2[i] = s * s;
    ns += eff[i] * s2[i];
  }
  if (ns == 0.0) {
    if (std::abs(nd - nt) > 1e-12 * std::max(1.0, nt))
      throw SpecError("mean_correct: no squeezing to adjust and displacement does not match the mean");
    return base;
  }
  const double c = (nt - nd) / ns;
  if (c < 0.0) throw SpecError("mean_correct: physicality violated (sinh^2 < 0) in mode 0");
  Vec r(m);
  for (int i = 0; i < m; ++i) r[i] = std::asinh(std::sqrt(c * s2[i]));
  return detail::with_magnitudes(base, r);
}

// Match the total photon-number variance, scaling sinh^2 by a common factor.
inline GbsSpec variance_correct(const GbsSpec& spec, const LossModel& loss) {
  validate(spec);
  const int m = spec.modes();
  auto total_var = [](const GaussianState& s) { return photon_moments(s).ncov.sum(); };
  const double want = total_var(prepare_target(spec));
  Vec s2(m);
  for (int i = 0; i < m; ++i) {
    const double s = std::sinh(std::abs(spec.squeezing[i]));
    s2[i] = s * s;
  }
  if (s2.maxCoeff() == 0.0) return spec;
  auto fam = [&](double c) {
    Vec r(m);
    for (int i = 0; i < m; ++i) r[i] = std::asinh(std::sqrt(c * s2[i]));
    return detail::with_magnitudes(spec, r);
  };
  auto g = [&](double c) { return total_var(propagate(fam(c), loss)) - want; };
  const double sm = std::sinh(detail::kMaxSqueezing);
  const double c = solve_root(g, 0.0, sm * sm / s2.maxCoeff(), "variance_correct");
  return fam(c);
}

struct CovarianceSearch {
  bool optimize_unitary = false;  // two-mode (theta, gamma) only
};

namespace detail {

// Minimize a covariance objective over squeezing magnitudes (target phases kept)
// and optionally the two-mode interferometer angles, starting from the target.
inline GbsSpec minimize_covariance_objective(const GbsSpec& base, const LossModel& loss,
                                             const std::function<double(const GaussianState&)>& obj,
                                             const CovarianceSearch& cs) {
  const int m = base.modes();
  const bool with_u = cs.optimize_unitary && m == 2;
  Box box;
  const Vec r0 = magnitudes(base.squeezing);
  for (int i = 0; i < m; ++i) box.add("r" + std::to_string(i), 0.0, 2.0 * r0[i] + 1.0, 41);
  std::vector<double> x0(r0.data(), r0.data() + m);
  if (with_u) {
    const auto [th, ga] = two_mode_angles(base.unitary);
    box.add("theta", th - std::numbers::pi / 2, th + std::numbers::pi / 2, 41);
    box.add("gamma", ga - std::numbers::pi, ga + std::numbers::pi, 41);
    x0.push_back(th);
    x0.push_back(ga);
  }
  auto build = [&](const std::vector<double>& x) {
    GbsSpec g = with_magnitudes(base, Eigen::Map<const Vec>(x.data(), m));
    if (with_u) g.unitary = two_mode_unitary(x[m], x[m + 1]);
    return g;
  };
  auto f = [&](const std::vector<double>& x) { return obj(propagate(build(x), loss)); };
  const SearchResult r = coordinate_descent(f, x0, box);
  return build(r.x);
}

}  // namespace detail

// Displacement from the linear solve, squeezing (and optionally the two-mode
// interferometer) by minimizing log det(sigma + sigma').
inline GbsSpec fidelity_optimize(const GbsSpec& spec, const LossModel& loss, const CovarianceSearch& cs = {}) {
  const GaussianState target = prepare_target(spec);
  if (!is_pure(target)) throw SpecError("fidelity_optimize: target is not pure");
  GbsSpec base = correct_displacement(spec, loss);
  if (detail::is_single_mode_squeezed_vacuum(spec)) {
    const double eta = detail::single_mode_eta(loss);
    base.squeezing[0] = std::polar(xi_fidelity(std::abs(spec.squeezing[0]), eta), detail::phase_or_zero(spec.squeezing[0]));
    return base;
  }
  auto obj = [&](const GaussianState& s) { return detail::logdet_spd(target.cov + s.cov, "fidelity_optimize"); };
  return detail::minimize_covariance_objective(base, loss, obj, cs);
}

inline GbsSpec phase_space_optimize(MeasureKind k, const GbsSpec& spec, const LossModel& loss,
                                    const CovarianceSearch& cs = {}) {
  GbsSpec base = correct_displacement(spec, loss);
  if (detail::is_single_mode_squeezed_vacuum(spec)) {
    const double eta = detail::single_mode_eta(loss);
    base.squeezing[0] =
        std::polar(phase_space_optimizer(k, std::abs(spec.squeezing[0]), eta), detail::phase_or_zero(spec.squeezing[0]));
    return base;
  }
  const GaussianState target = prepare_target(spec);
  if (k == MeasureKind::WIGNER_TVD) {
    if (spec.modes() != 1) throw SpecError("phase_space_optimize: WIGNER_TVD is single-mode only");
    auto obj = [&](const GaussianState& s) { return wigner_tvd(target, s, 1e-9).value; };
    Box box;
    const double r0 = std::abs(spec.squeezing[0]);
    box.add("r0", 0.0, 2.0 * r0 + 1.0, 41);
    auto f = [&](const std::vector<double>& x) {
      return obj(propagate(detail::with_magnitudes(base, Vec::Constant(1, x[0])), loss));
    };
    SearchOptions so;
    so.starts = 1;
    const SearchResult r = grid_then_refine(f, box, so, false);
    return detail::with_magnitudes(base, Vec::Constant(1, r.x[0]));
  }
  auto obj = [&](const GaussianState& s) { return phase_space_distance(k, target, s); };
  return detail::minimize_covariance_objective(base, loss, obj, cs);
}

// ---------------------------------------------------------------------------
// direct minimization of delta

struct MitigationResult {
  Scheme scheme = Scheme::NONE;
  Ansatz ansatz = Ansatz::SQ_VAC;
  GbsSpec corrected;
  double delta = 0.0;
  double delta_uncertainty = 0.0;
  std::map<std::string, double> diagnostics;
  bool flagged = false;  // budget exhausted; best-so-far returned
};

struct MinimizeOptions {
  SearchOptions search;
  bool optimize_unitary = false;  // two-mode only
  int search_phases = -1;         // -1: displacement phases searched for one mode only
  double thermal_max = 1.0;
  bool seed_corrections = true;  // also refine from the target and closed-form corrections
  PndOptions pnd;
};

// Outcomes whose probabilities agree within a relative tolerance.
inline std::vector<std::size_t> matched_outcomes(const Pnd& target, const Pnd& probe, double rel = 0.005,
                                                 double floor = 1e-6) {
  std::vector<std::size_t> out;
  const std::size_t n = std::min(target.size(), probe.size());
  for (std::size_t i = 0; i < n; ++i) {
    const double a = target.probs[i], b = probe.probs[i];
    if (a < floor && b < floor) continue;
    if (std::abs(a - b) <= rel * std::max(a, b)) out.push_back(i);
  }
  return out;
}

inline MitigationResult minimize_delta(const TargetContext& t, const LossModel& loss, Ansatz ansatz,
                                       const MinimizeOptions& opt = {}) {
  const GbsSpec& spec = t.spec;
  const int m = spec.modes();
  const bool disp = ansatz == Ansatz::DISPLACED_SQ || ansatz == Ansatz::DISPLACED_SQ_THERMAL;
  const bool therm = ansatz == Ansatz::SQ_THERMAL || ansatz == Ansatz::DISPLACED_SQ_THERMAL;
  const bool with_u = opt.optimize_unitary && m == 2;
  const bool phases = opt.search_phases < 0 ? m == 1 : opt.search_phases > 0;
  const Vec r0 = detail::magnitudes(spec.squeezing);
  const Vec eff = effective_transmissivity(with_unitary(loss, spec.unitary));
  const double eta_min = std::max(1e-3, eff.minCoeff());
  // displacement seeds from the linear correction so the phase reference is sensible
  GbsSpec dc;
  try {
    dc = correct_displacement(spec, loss);
  } catch (const SpecError&) {
    dc = spec;
  }

  Box box;
  for (int i = 0; i < m; ++i) box.add("xi" + std::to_string(i), 0.0, 2.0 * r0[i] + 1.0, opt.search.grid_points);
  if (disp)
    for (int i = 0; i < m; ++i) {
      box.add("abs_alpha" + std::to_string(i), 0.0, 2.0 * std::abs(spec.displacement[i]) / std::sqrt(eta_min) + 0.5,
              opt.search.grid_points);
      if (phases) box.add("phi" + std::to_string(i), 0.0, 2.0 * std::numbers::pi, opt.search.phase_points, true);
    }
  if (therm)
    for (int i = 0; i < m; ++i) box.add("mu" + std::to_string(i), 0.0, opt.thermal_max, opt.search.grid_points);
  if (with_u) {
    box.add("theta", 0.0, std::numbers::pi, opt.search.grid_points);
    box.add("gamma", 0.0, 2.0 * std::numbers::pi, opt.search.phase_points, true);
  }

  auto build = [&](const std::vector<double>& x) {
    GbsSpec g = detail::with_magnitudes(spec, Eigen::Map<const Vec>(x.data(), m));
    int k = m;
    if (disp) {
      for (int i = 0; i < m; ++i) {
        const double a = x[k++];
        const double ph = phases ? x[k++] : detail::phase_or_zero(dc.displacement[i]);
        g.displacement[i] = std::polar(a, ph);
      }
    } else {
      g.displacement.setZero();
    }
    if (therm) {
      g.thermal = Vec(m);
      for (int i = 0; i < m; ++i) g.thermal[i] = x[k++];
    } else {
      g.thermal = Vec();
    }
    if (with_u) {
      g.unitary = two_mode_unitary(x[k], x[k + 1]);
      k += 2;
    }
    return g;
  };
  PndOptions po = opt.pnd;
  po.threads = 1;  // the grid is already parallel
  auto f = [&](const std::vector<double>& x) { return evaluate_delta(t, build(x), loss, po).delta; };
  auto encode = [&](const GbsSpec& g) {
    std::vector<double> x;
    for (int i = 0; i < m; ++i) x.push_back(std::abs(g.squeezing[i]));
    if (disp)
      for (int i = 0; i < m; ++i) {
        x.push_back(std::abs(g.displacement[i]));
        if (phases) {
          const double p = detail::phase_or_zero(g.displacement[i]);
          x.push_back(p < 0 ? p + 2 * std::numbers::pi : p);
        }
      }
    if (therm)
      for (int i = 0; i < m; ++i) x.push_back(0.0);
    if (with_u) {
      const auto [th, ga] = two_mode_angles(g.unitary);
      x.push_back(th);
      x.push_back(ga);
    }
    return x;
  };
  // the target and the closed-form corrections seed the refinement next to the grid
  std::vector<std::vector<double>> seeds;
  if (opt.seed_corrections) seeds.push_back(encode(spec));
  for (Scheme sc : {Scheme::DC, Scheme::VAC_FIXED_RATIO, Scheme::VAC_PLUS_DC}) {
    if (!opt.seed_corrections || (!disp && sc != Scheme::VAC_FIXED_RATIO)) continue;
    try {
      const GbsSpec g = sc == Scheme::DC                ? dc
                        : sc == Scheme::VAC_FIXED_RATIO ? vacuum_overlap_correct(spec, loss, VacuumStrategy::FIXED_RATIO)
                                                        : vacuum_overlap_correct(spec, loss, VacuumStrategy::PLUS_DC);
      seeds.push_back(encode(g));
    } catch (const std::exception&) {
    }
  }
  const SearchResult r = grid_then_refine(f, box, opt.search, false, seeds);

  MitigationResult out;
  out.scheme = Scheme::DELTA_MIN;
  out.ansatz = ansatz;
  out.corrected = build(r.x);
  const Pnd q = probe_pnd(t, out.corrected, loss, opt.pnd);
  const TvdResult d = total_variation_normalized(t.pnd, q);
  out.delta = d.delta;
  out.delta_uncertainty = d.uncertainty;
  out.flagged = !r.converged;
  out.diagnostics["evaluations"] = static_cast<double>(r.evaluations);
  out.diagnostics["cycles"] = r.cycles;
  out.diagnostics["matched_outcomes"] = static_cast<double>(matched_outcomes(t.pnd, q).size());
  for (int k = 0; k < box.dim(); ++k) out.diagnostics["x." + box.names[k]] = r.x[k];
  return out;
}

// ---------------------------------------------------------------------------
// vacuum-matched manifold sampling

struct ManifoldOptions {
  int samples = 500;
  std::uint64_t seed = 1;
  double theta_sd = 0.1;  // two-mode interferometer angle spreads (rad)
  double gamma_sd = 0.1;
  int threads = 0;
};

struct ManifoldStats {
  std::vector<double> deltas;
  double mean = 0.0, stddev = 0.0, min = 0.0, max = 0.0;
  int rejected = 0;
};

// Random points on the vacuum-matched manifold: the squeezing direction is drawn
// uniformly from the positive orthant (for two modes, a uniform ratio angle), the
// two-mode interferometer angles are perturbed around the target, and all
// squeezings are then rescaled by one factor until the global vacuum matches.
inline ManifoldStats sample_vacuum_manifold(const TargetContext& t, const LossModel& loss, const ManifoldOptions& o) {
  const GbsSpec& spec = t.spec;
  const int m = spec.modes();
  std::vector<double> d(o.samples, std::numeric_limits<double>::quiet_NaN());
  parallel_for(o.samples, o.threads, [&](std::size_t k) {
    CounterRng rng{o.seed, 0x6d616e69ULL + k};
    GbsSpec g = spec;
    Vec dir(m);
    if (m == 2) {
      const double psi = rng.uniform(0.0, 0.5 * std::numbers::pi);
      dir << std::cos(psi), std::sin(psi);
      const auto [th, ga] = two_mode_angles(spec.unitary);
      g.unitary = two_mode_unitary(th + o.theta_sd * rng.normal(), ga + o.gamma_sd * rng.normal());
    } else {
      for (int i = 0; i < m; ++i) dir[i] = std::abs(rng.normal());
    }
    const double dmax = dir.maxCoeff();
    if (dmax <= 0.0) return;
    try {
      auto fam = [&](double c) -> Vec { return (c / dmax) * dir; };
      const GbsSpec s = detail::solve_vacuum_family(g, loss, t.vacuum, fam, 0.0, "sample_vacuum_manifold");
      PndOptions po;
      po.threads = 1;
      d[k] = evaluate_delta(t, s, loss, po).delta;
    } catch (const NumericalError&) {
    }
  });
  ManifoldStats st;
  for (double v : d) {
    if (std::isnan(v)) {
      ++st.rejected;
      continue;
    }
    st.deltas.push_back(v);
  }
  if (st.deltas.empty()) return st;
  st.min = *std::min_element(st.deltas.begin(), st.deltas.end());
  st.max = *std::max_element(st.deltas.begin(), st.deltas.end());
  double s = 0.0;
  for (double v : st.deltas) s += v;
  st.mean = s / st.deltas.size();
  double v2 = 0.0;
  for (double v : st.deltas) v2 += (v - st.mean) * (v - st.mean);
  st.stddev = st.deltas.size() > 1 ? std::sqrt(v2 / (st.deltas.size() - 1)) : 0.0;
  return st;
}

// ---------------------------------------------------------------------------
// scheme dispatch

struct SchemeOptions {
  Ansatz ansatz = Ansatz::SQ_VAC;  // DELTA_MIN only
  MinimizeOptions minimize;
  CovarianceSearch covariance;     // FIDELITY and PS_* in the multimode case
  PndOptions pnd;
};

inline GbsSpec corrected_spec(Scheme s, const GbsSpec& spec, const LossModel& loss, const SchemeOptions& o = {}) {
  switch (s) {
    case Scheme::NONE: return spec;
    case Scheme::DC: return correct_displacement(spec, loss);
    case Scheme::FIDELITY: return fidelity_optimize(spec, loss, o.covariance);
    case Scheme::PS_WAS: return phase_space_optimize(MeasureKind::WAS, spec, loss, o.covariance);
    case Scheme::PS_KLD_UP: return phase_space_optimize(MeasureKind::KLD_UP, spec, loss, o.covariance);
    case Scheme::PS_KLD_PU: return phase_space_optimize(MeasureKind::KLD_PU, spec, loss, o.covariance);
    case Scheme::PS_KLD_SYM: return phase_space_optimize(MeasureKind::KLD_SYM, spec, loss, o.covariance);
    case Scheme::PS_BHA: return phase_space_optimize(MeasureKind::BHA, spec, loss, o.covariance);
    case Scheme::PS_WIGNER_TVD: return phase_space_optimize(MeasureKind::WIGNER_TVD, spec, loss, o.covariance);
    case Scheme::MEAN: return mean_correct(spec, loss, MeanFix::NONE);
    case Scheme::VARIANCE: return variance_correct(spec, loss);
    case Scheme::MEAN_PLUS_DC: return mean_correct(spec, loss, MeanFix::DC);
    case Scheme::VAC_FIXED_RATIO: return vacuum_overlap_correct(spec, loss, VacuumStrategy::FIXED_RATIO);
    case Scheme::VAC_LOSS_WEIGHTED: return vacuum_overlap_correct(spec, loss, VacuumStrategy::LOSS_WEIGHTED);
    case Scheme::VAC_PLUS_DC: return vacuum_overlap_correct(spec, loss, VacuumStrategy::PLUS_DC);
    case Scheme::VAC_PLUS_MEAN: return vacuum_overlap_correct(spec, loss, VacuumStrategy::PLUS_MEAN);
    case Scheme::DELTA_MIN: break;
  }
  throw SpecError("corrected_spec: DELTA_MIN needs minimize_delta");
}

inline MitigationResult apply_scheme(Scheme s, const TargetContext& t, const LossModel& loss,
                                     const SchemeOptions& o = {}) {
  if (s == Scheme::DELTA_MIN) return minimize_delta(t, loss, o.ansatz, o.minimize);
  MitigationResult r;
  r.scheme = s;
  r.corrected = corrected_spec(s, t.spec, loss, o);
  const GaussianState st = propagate(r.corrected, loss);
  PndOptions po = o.pnd;
  po.cutoff = t.pnd.cutoff;
  const TvdResult d = total_variation_normalized(t.pnd, pnd_gaussian(st, po));
  r.delta = d.delta;
  r.delta_uncertainty = d.uncertainty;
  r.diagnostics["vacuum_residual"] = std::abs(vacuum_overlap(st) - t.vacuum);
  const MomentMetrics mm = moment_metrics(t.state, st);
  r.diagnostics["delta_nbar"] = mm.delta_nbar;
  r.diagnostics["delta_ncov"] = mm.delta_ncov;
  return r;
}

}  // namespace lossmit
