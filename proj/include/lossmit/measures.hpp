#pragma once

#include "lossmit/gaussian.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>
#include <string>

namespace lossmit {

enum class MeasureKind { FIDELITY, WAS, KLD_UP, KLD_PU, KLD_SYM, BHA, WIGNER_TVD };

inline std::string to_string(MeasureKind k) {
  switch (k) {
    case MeasureKind::FIDELITY: return "FIDELITY";
    case MeasureKind::WAS: return "WAS";
    case MeasureKind::KLD_UP: return "KLD_UP";
    case MeasureKind::KLD_PU: return "KLD_PU";
    case MeasureKind::KLD_SYM: return "KLD_SYM";
    case MeasureKind::BHA: return "BHA";
    case MeasureKind::WIGNER_TVD: return "WIGNER_TVD";
  }
  return "?";
}

namespace detail {

inline void same_modes(const GaussianState& a, const GaussianState& b, const char* who) {
  if (a.num_modes != b.num_modes) throw SpecError(std::string(who) + ": mode counts differ");
}

inline double logdet_spd(const Mat& m, const char* who) {
  Eigen::LLT<Mat> llt(m);
  if (llt.info() != Eigen::Success) throw NumericalError(std::string(who) + ": matrix not positive definite");
  double s = 0.0;
  for (int i = 0; i < m.rows(); ++i) s += 2.0 * std::log(llt.matrixL()(i, i));
  return s;
}

}  // namespace detail

inline bool is_pure(const GaussianState& s, double tol = 1e-8) {
  const Vec nu = symplectic_eigenvalues(s.cov);
  return (nu.array() - 0.5).abs().maxCoeff() < tol;
}

// Overlap with a pure state; the target must be pure.
inline double fidelity(const GaussianState& target, const GaussianState& probe) {
  detail::same_modes(target, probe, "fidelity");
  if (!is_pure(target)) throw SpecError("fidelity: target is not pure");
  const Mat s = target.cov + probe.cov;
  const Vec d = probe.mean - target.mean;
  Eigen::LLT<Mat> llt(s);
  if (llt.info() != Eigen::Success) throw NumericalError("fidelity: cov sum not positive definite");
  const double ld = detail::logdet_spd(s, "fidelity");
  return std::exp(-0.25 * ld - 0.25 * d.dot(llt.solve(d)));
}

// tr sqrt(A B) for symmetric positive A, B, from the symmetric form sqrt(A) B sqrt(A).
inline double trace_sqrt_product(const Mat& a, const Mat& b) {
  Eigen::SelfAdjointEigenSolver<Mat> ea(0.5 * (a + a.transpose()));
  const Vec la = ea.eigenvalues().cwiseMax(1e-14);
  const Mat ra = ea.eigenvectors() * la.cwiseSqrt().asDiagonal() * ea.eigenvectors().transpose();
  const Mat c = ra * b * ra;
  Eigen::SelfAdjointEigenSolver<Mat> ec(0.5 * (c + c.transpose()));
  return ec.eigenvalues().cwiseMax(1e-14).cwiseSqrt().sum();
}

inline double d_was(const GaussianState& a, const GaussianState& b) {
  detail::same_modes(a, b, "WAS");
  const Vec d = a.mean - b.mean;
  return d.squaredNorm() + a.cov.trace() + b.cov.trace() - 2.0 * trace_sqrt_product(a.cov, b.cov);
}

// D(a, b) with the second argument supplying the inverse covariance.
inline double d_kld(const GaussianState& a, const GaussianState& b) {
  detail::same_modes(a, b, "KLD");
  Eigen::LLT<Mat> llt(b.cov);
  if (llt.info() != Eigen::Success) throw NumericalError("KLD: singular covariance");
  const Vec d = a.mean - b.mean;
  const double tr = llt.solve(a.cov).trace();
  return 0.5 * d.dot(llt.solve(d)) + 0.5 * tr +
         0.5 * (detail::logdet_spd(b.cov, "KLD") - detail::logdet_spd(a.cov, "KLD")) - a.num_modes;
}

inline double d_bha(const GaussianState& a, const GaussianState& b) {
  detail::same_modes(a, b, "BHA");
  const Mat s = 0.5 * (a.cov + b.cov);
  Eigen::LLT<Mat> llt(s);
  if (llt.info() != Eigen::Success) throw NumericalError("BHA: singular covariance");
  const Vec d = a.mean - b.mean;
  return 0.125 * d.dot(llt.solve(d)) +
         0.5 * (detail::logdet_spd(s, "BHA") -
                0.5 * (detail::logdet_spd(a.cov, "BHA") + detail::logdet_spd(b.cov, "BHA")));
}

inline double phase_space_distance(MeasureKind k, const GaussianState& target, const GaussianState& probe) {
  switch (k) {
    case MeasureKind::WAS: return d_was(target, probe);
    case MeasureKind::KLD_UP: return d_kld(target, probe);
    case MeasureKind::KLD_PU: return d_kld(probe, target);
    case MeasureKind::KLD_SYM: return d_kld(target, probe) + d_kld(probe, target);
    case MeasureKind::BHA: return d_bha(target, probe);
    default: throw SpecError("phase_space_distance: unsupported measure " + to_string(k));
  }
}

struct QuadratureResult {
  double value = 0.0;
  double error = 0.0;
};

namespace detail {

// Integral over p of |wa N(p; ma, sa^2) - wb N(p; mb, sb^2)|, weights given as logs.
// The two log-densities cross at most twice, so the integral is a sum of CDF differences.
inline double abs_gauss_diff_1d(double lwa, double ma, double sa, double lwb, double mb, double sb) {
  auto lg = [](double lw, double m, double s, double p) {
    return lw - std::log(s) - 0.5 * (p - m) * (p - m) / (s * s);
  };
  // roots of lg_a - lg_b
  const double qa = 0.5 / (sb * sb) - 0.5 / (sa * sa);
  const double qb = ma / (sa * sa) - mb / (sb * sb);
  const double qc = mb * mb / (2 * sb * sb) - ma * ma / (2 * sa * sa) + (lwa - std::log(sa)) - (lwb - std::log(sb));
  std::vector<double> cuts;
  const double scale = std::max({std::abs(qb), std::abs(qc), 1.0 / (sa * sa), 1.0 / (sb * sb)});
  if (std::abs(qa) <= 1e-14 * scale) {
    if (qb != 0.0) cuts.push_back(-qc / qb);
  } else {
    const double disc = qb * qb - 4 * qa * qc;
    if (disc > 0.0) {
      const double sq = std::sqrt(disc);
      const double q = -0.5 * (qb + std::copysign(sq, qb));
      double r1 = q / qa, r2 = q != 0.0 ? qc / q : r1;
      if (r1 > r2) std::swap(r1, r2);
      cuts = {r1, r2};
    }
  }
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> edges{-inf};
  edges.insert(edges.end(), cuts.begin(), cuts.end());
  edges.push_back(inf);
  auto cdf = [](double m, double s, double p) {
    if (std::isinf(p)) return p > 0 ? 1.0 : 0.0;
    return 0.5 * std::erfc(-(p - m) / (s * std::sqrt(2.0)));
  };
  auto upper = [](double m, double s, double p) {
    if (std::isinf(p)) return p > 0 ? 0.0 : 1.0;
    return 0.5 * std::erfc((p - m) / (s * std::sqrt(2.0)));
  };
  // mass of N(m, s^2) on [l, r], from whichever tail keeps digits
  auto mass = [&](double m, double s, double l, double r) {
    return l >= m ? upper(m, s, l) - upper(m, s, r) : cdf(m, s, r) - cdf(m, s, l);
  };
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < edges.size(); ++k) {
    const double l = edges[k], r = edges[k + 1];
    double probe;
    if (std::isinf(l) && std::isinf(r)) probe = 0.5 * (ma + mb);
    else if (std::isinf(l)) probe = r - 1.0 - 10 * std::max(sa, sb);
    else if (std::isinf(r)) probe = l + 1.0 + 10 * std::max(sa, sb);
    else probe = 0.5 * (l + r);
    const double sign = lg(lwa, ma, sa, probe) >= lg(lwb, mb, sb, probe) ? 1.0 : -1.0;
    total += sign * (std::exp(lwa) * mass(ma, sa, l, r) - std::exp(lwb) * mass(mb, sb, l, r));
  }
  return total;
}

}  // namespace detail

// Integral of |W - W'| over the plane for single-mode states. For fixed x both
// Wigner functions are Gaussians in p, so the p integral is exact; the x integral
// is adaptive Gauss-Kronrod over +-8 sd of the wider marginal around both means.
inline QuadratureResult wigner_tvd(const GaussianState& a, const GaussianState& b, double tol = 1e-10) {
  detail::same_modes(a, b, "wigner_tvd");
  if (a.num_modes != 1) throw SpecError("wigner_tvd: only single-mode states are supported");
  struct Cond {
    double mx, vx, mp, slope, sp;
  };
  auto cond = [](const GaussianState& s) {
    const double vx = s.cov(0, 0);
    const double vp = s.cov(1, 1) - s.cov(0, 1) * s.cov(0, 1) / vx;
    if (!(vx > 0.0 && vp > 0.0)) throw NumericalError("wigner_tvd: covariance not positive definite");
    return Cond{s.mean[0], vx, s.mean[1], s.cov(0, 1) / vx, std::sqrt(vp)};
  };
  const Cond ca = cond(a), cb = cond(b);
  auto inner = [&](double x) {
    auto lw = [x](const Cond& c) {
      return -0.5 * (x - c.mx) * (x - c.mx) / c.vx - 0.5 * std::log(2 * std::numbers::pi * c.vx);
    };
    return detail::abs_gauss_diff_1d(lw(ca), ca.mp + ca.slope * (x - ca.mx), ca.sp, lw(cb),
                                     cb.mp + cb.slope * (x - cb.mx), cb.sp);
  };
  const double sd = std::sqrt(std::max(ca.vx, cb.vx));
  const double lo = std::min(ca.mx, cb.mx) - 8.0 * sd, hi = std::max(ca.mx, cb.mx) + 8.0 * sd;
  QuadratureResult out;
  double l1 = 0.0;
  out.value = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(inner, lo, hi, 20, tol, &out.error, &l1);
  out.error *= std::max(1.0, l1);  // boost reports it relative to the L1 norm
  return out;
}

}  // namespace lossmit
