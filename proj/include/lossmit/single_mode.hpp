#pragma once

#include "lossmit/pnd.hpp"

#include <cmath>
#include <complex>
#include <limits>

namespace lossmit {

namespace detail {

struct Kahan {
  long double s = 0.0L, c = 0.0L;
  void add(long double x) {
    const long double y = x - c;
    const long double t = s + y;
    c = (t - s) - y;
    s = t;
  }
};

inline long double log_choose(int n, int k) {
  return std::lgamma(static_cast<long double>(n) + 1) - std::lgamma(static_cast<long double>(k) + 1) -
         std::lgamma(static_cast<long double>(n - k) + 1);
}

inline void require_cutoff(int cutoff) {
  if (cutoff < 0) throw SpecError("cutoff must be nonnegative");
}

inline void require_eta(double eta) {
  if (!(eta >= 0.0 && eta <= 1.0)) throw SpecError("eta outside [0,1]");
}

}  // namespace detail

// Thermal occupation of a lossy squeezed vacuum, written without cancellation.
inline double thermal_mu(double xi, double eta) {
  const double s2 = std::sinh(xi) * std::sinh(xi);
  const double a = 4.0 * eta * (1.0 - eta) * s2;
  return 0.5 * a / (std::sqrt(1.0 + a) + 1.0);
}

inline double thermal_zeta(double xi, double eta) {
  return 0.5 * std::asinh(eta * std::sinh(2.0 * xi) / (2.0 * thermal_mu(xi, eta) + 1.0));
}

inline Pnd pnd_squeezed_vacuum(double xi, int cutoff) {
  detail::require_cutoff(cutoff);
  xi = std::abs(xi);
  Pnd p = Pnd::make(1, cutoff);
  if (xi == 0.0) {
    p.probs[0] = 1.0;
    p.finalize_tail();
    return p;
  }
  const long double lt = std::log(std::tanh(static_cast<long double>(xi)));
  const long double lc = std::log(std::cosh(static_cast<long double>(xi)));
  for (int m = 0; m <= cutoff; m += 2) {
    const int h = m / 2;
    const long double lp = std::lgamma(m + 1.0L) - m * std::log(2.0L) - 2 * std::lgamma(h + 1.0L) +
                           m * lt - lc;
    p.probs[m] = static_cast<double>(std::exp(lp));
  }
  p.finalize_tail();
  return p;
}

// Squeezed thermal form with a terminating 2F1((1-m)/2, -m/2; 1; x); every term of
// the sum is positive, and all factors are carried in logs.
inline Pnd pnd_lossy_squeezed_vacuum(double xi, double eta, int cutoff) {
  detail::require_cutoff(cutoff);
  detail::require_eta(eta);
  xi = std::abs(xi);
  if (eta == 1.0) return pnd_squeezed_vacuum(xi, cutoff);
  Pnd p = Pnd::make(1, cutoff);
  const long double mu = thermal_mu(xi, eta);
  if (xi == 0.0 || eta == 0.0 || mu == 0.0L) {
    p.probs[0] = 1.0;
    p.finalize_tail();
    return p;
  }
  const long double z = thermal_zeta(xi, eta);
  const long double ch = std::cosh(z), sh = std::sinh(z);
  const long double log_a = std::log(mu * (1 + mu)) - std::log(mu * mu + (1 + 2 * mu) * ch * ch);
  const long double log_b = 0.5L * std::log((1 + mu) * (1 + mu) + (1 + 2 * mu) * sh * sh);
  const long double log_x = 2 * std::log((1 + 2 * mu) * std::sinh(2 * z)) - 2 * std::log(2 * mu * (1 + mu));
  for (int m = 0; m <= cutoff; ++m) {
    const long double pre = m * log_a - log_b;
    const long double a = (1.0L - m) / 2, b = -m / 2.0L;
    // log-sum-exp over the positive series
    std::vector<long double> terms;
    long double lt = 0.0L;
    for (int k = 0; k <= m / 2; ++k) {
      terms.push_back(pre + lt);
      lt += std::log((a + k) * (b + k)) - 2 * std::log(k + 1.0L) + log_x;
    }
    long double mx = -std::numeric_limits<long double>::infinity();
    for (auto t : terms) mx = std::max(mx, t);
    detail::Kahan acc;
    for (auto t : terms) acc.add(std::exp(t - mx));
    p.probs[m] = static_cast<double>(std::exp(mx) * acc.s);
  }
  p.finalize_tail();
  return p;
}

// Lossy D(alpha) S(xi)|0> via its displaced squeezed thermal form. The four-fold
// sum is evaluated with its Kronecker constraint s = k + 2l = k' + 2l' resolved:
//   P(m) = E D^{-1/2} sum_s C(m, s) X^{-(m-s)} |T_s|^2,
// where T_s sqrt(1/s!) = [t^s] exp(p t - q t^2) obeys a Hermite-type recurrence.
inline Pnd pnd_lossy_displaced_squeezed(cplx xi, cplx alpha, double eta, int cutoff) {
  detail::require_cutoff(cutoff);
  detail::require_eta(eta);
  using ld = long double;
  using lc = std::complex<long double>;
  const ld r = std::abs(xi);
  const ld phx = r > 0 ? std::arg(xi) : 0.0;
  const ld ab = std::abs(alpha);
  const ld pha = ab > 0 ? std::arg(alpha) : 0.0;
  const ld mu = thermal_mu(static_cast<double>(r), eta);
  const ld z = r > 0 ? thermal_zeta(static_cast<double>(r), eta) : 0.0L;
  const ld ch = std::cosh(z), sh = std::sinh(z);
  const ld se = std::sqrt(static_cast<ld>(eta));

  const ld abr = se * ab * std::sqrt(std::sinh(2 * z) * std::cos(2 * pha - phx) + std::cosh(2 * z));
  const lc gsum = se * ab * std::polar<ld>(1.0L, -(pha - phx)) * sh + se * ab * std::polar<ld>(1.0L, pha) * ch;
  const ld gam = std::abs(gsum) > 0 ? std::arg(gsum) : 0.0L;
  const ld dn = mu * (mu + std::cosh(2 * z) + 1) + ch * ch;
  const ld log_e =
      abr * abr * (-2 * mu + std::sinh(2 * z) * std::cos(2 * gam - phx) - 2 * ch * ch) / (2 * dn);
  // 1/X with X = sinh^2/(mu+1) + cosh^2/mu + 1
  const ld xinv = mu * (mu + 1) / (mu * sh * sh + (mu + 1) * (ch * ch + mu));

  const lc p = abr * (std::polar<ld>(1.0L, -gam) * ch * (mu + 1) + std::polar<ld>(1.0L, gam - phx) * sh * mu) / dn;
  const lc q = std::polar<ld>(1.0L, -phx) * std::sinh(2 * z) * (2 * mu + 1) / (4 * dn);

  std::vector<lc> t(cutoff + 1);
  t[0] = 1.0L;
  if (cutoff >= 1) t[1] = p;
  for (int s = 2; s <= cutoff; ++s)
    t[s] = p * t[s - 1] / std::sqrt(static_cast<ld>(s)) -
           ld(2) * q * t[s - 2] * std::sqrt(static_cast<ld>(s - 1) / s);

  Pnd out = Pnd::make(1, cutoff);
  const ld log_pre = log_e - 0.5L * std::log(dn);
  const ld log_xinv = xinv > 0 ? std::log(xinv) : -std::numeric_limits<ld>::infinity();
  for (int m = 0; m <= cutoff; ++m) {
    detail::Kahan acc;
    for (int s = 0; s <= m; ++s) {
      const ld t2 = std::norm(t[s]);
      if (t2 == 0.0L) continue;
      if (s < m && xinv == 0.0L) continue;
      const ld lt = detail::log_choose(m, s) + (m - s) * (s < m ? log_xinv : 0.0L) + std::log(t2);
      acc.add(std::exp(lt + log_pre));
    }
    out.probs[m] = static_cast<double>(acc.s);
  }
  out.finalize_tail();
  return out;
}

// Closed forms used by the single-mode analysis.
inline double lossy_vacuum_probability(double xi, double eta) {
  const double s = std::sinh(xi);
  return 1.0 / std::sqrt(1.0 + eta * (2.0 - eta) * s * s);
}

// Half the odd-photon mass of a lossy squeezed vacuum (the target has none).
inline double delta_odd_closed(double xi, double eta) {
  const double s = std::sinh(xi);
  return 0.25 * (1.0 - 1.0 / std::sqrt(1.0 + 4.0 * eta * (1.0 - eta) * s * s));
}

inline double delta_lower_bound(double xi_tilde, double xi, double eta) {
  detail::require_eta(eta);
  return 0.5 * std::abs(1.0 / std::cosh(xi_tilde) - lossy_vacuum_probability(xi, eta)) +
         delta_odd_closed(xi, eta);
}

}  // namespace lossmit
