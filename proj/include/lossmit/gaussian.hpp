#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

namespace lossmit {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;
using cplx = std::complex<double>;

// Raised for malformed inputs (shape, range, unitarity).
struct SpecError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Raised when a computation cannot meet its accuracy contract.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Quadrature moments, ordering (x1,p1,...,xM,pM), vacuum covariance 1/2.
struct GaussianState {
  int num_modes = 0;
  Vec mean;
  Mat cov;

  static GaussianState vacuum(int m) {
    GaussianState s;
    s.num_modes = m;
    s.mean = Vec::Zero(2 * m);
    s.cov = 0.5 * Mat::Identity(2 * m, 2 * m);
    return s;
  }
};

struct GbsSpec {
  CVec squeezing;
  CVec displacement;
  CMat unitary;
  Vec thermal;  // input thermal occupations; empty means pure inputs

  int modes() const { return static_cast<int>(squeezing.size()); }

  static GbsSpec identity(int m) {
    return {CVec::Zero(m), CVec::Zero(m), CMat::Identity(m, m), Vec()};
  }
};

inline Mat symplectic_form(int m) {
  Mat om = Mat::Zero(2 * m, 2 * m);
  for (int i = 0; i < m; ++i) {
    om(2 * i, 2 * i + 1) = 1.0;
    om(2 * i + 1, 2 * i) = -1.0;
  }
  return om;
}

// Symplectic eigenvalues, ascending. Each appears once.
inline Vec symplectic_eigenvalues(const Mat& cov) {
  const int m = static_cast<int>(cov.rows()) / 2;
  Eigen::MatrixXcd a = cplx(0.0, 1.0) * (symplectic_form(m) * cov).cast<cplx>();
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(a, false);
  std::vector<double> ev;
  for (int i = 0; i < 2 * m; ++i) ev.push_back(std::abs(es.eigenvalues()[i]));
  std::sort(ev.begin(), ev.end());
  Vec out(m);
  for (int i = 0; i < m; ++i) out[i] = 0.5 * (ev[2 * i] + ev[2 * i + 1]);
  return out;
}

inline void validate(const GaussianState& s) {
  const int n = 2 * s.num_modes;
  if (s.num_modes <= 0 || s.mean.size() != n || s.cov.rows() != n || s.cov.cols() != n)
    throw SpecError("GaussianState: shape mismatch");
  const double scale = std::max(1.0, s.cov.cwiseAbs().maxCoeff());
  if ((s.cov - s.cov.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw SpecError("GaussianState: covariance not symmetric");
  if (symplectic_eigenvalues(s.cov).minCoeff() < 0.5 - 1e-10)
    throw SpecError("GaussianState: violates uncertainty relation");
}

inline void validate(const GbsSpec& spec) {
  const int m = spec.modes();
  if (m <= 0 || spec.displacement.size() != m || spec.unitary.rows() != m ||
      spec.unitary.cols() != m)
    throw SpecError("GbsSpec: shape mismatch");
  const CMat d = spec.unitary.adjoint() * spec.unitary - CMat::Identity(m, m);
  if (d.cwiseAbs().maxCoeff() >= 1e-10) throw SpecError("GbsSpec: unitary is not unitary");
  if (spec.thermal.size() != 0 && (spec.thermal.size() != m || spec.thermal.minCoeff() < 0.0))
    throw SpecError("GbsSpec: thermal occupations must be M nonnegative numbers");
}

// S(xi) for xi = r e^{i th}; real xi > 0 squeezes x.
inline Eigen::Matrix2d squeezing_symplectic(cplx xi) {
  const double r = std::abs(xi);
  const double th = r > 0 ? std::arg(xi) : 0.0;
  Eigen::Matrix2d s;
  s << std::cosh(r) - std::sinh(r) * std::cos(th), -std::sinh(r) * std::sin(th),
      -std::sinh(r) * std::sin(th), std::cosh(r) + std::sinh(r) * std::cos(th);
  return s;
}

// Quadrature image of a -> U a.
inline Mat passive_symplectic(const CMat& u) {
  const int m = static_cast<int>(u.rows());
  Mat s(2 * m, 2 * m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      const cplx z = u(i, j);
      s(2 * i, 2 * j) = z.real();
      s(2 * i, 2 * j + 1) = -z.imag();
      s(2 * i + 1, 2 * j) = z.imag();
      s(2 * i + 1, 2 * j + 1) = z.real();
    }
  return s;
}

inline Vec displacement_vector(const CVec& alpha) {
  Vec d(2 * alpha.size());
  for (Eigen::Index i = 0; i < alpha.size(); ++i) {
    d[2 * i] = std::sqrt(2.0) * alpha[i].real();
    d[2 * i + 1] = std::sqrt(2.0) * alpha[i].imag();
  }
  return d;
}

// Complex amplitudes <a_j> from the quadrature mean.
inline CVec mean_amplitudes(const GaussianState& s) {
  CVec a(s.num_modes);
  for (int i = 0; i < s.num_modes; ++i)
    a[i] = cplx(s.mean[2 * i], s.mean[2 * i + 1]) / std::sqrt(2.0);
  return a;
}

inline GaussianState apply_symplectic(const GaussianState& s, const Mat& S, const Vec& d) {
  if (S.rows() != s.mean.size() || S.cols() != s.mean.size() || d.size() != s.mean.size())
    throw SpecError("apply_symplectic: dimension mismatch");
  const Mat om = symplectic_form(s.num_modes);
  if ((S * om * S.transpose() - om).cwiseAbs().maxCoeff() > 1e-9)
    throw SpecError("apply_symplectic: matrix is not symplectic");
  GaussianState o = s;
  o.mean = S * s.mean + d;
  o.cov = S * s.cov * S.transpose();
  o.cov = 0.5 * (o.cov + o.cov.transpose()).eval();
  return o;
}

inline GaussianState apply_loss_layer(const GaussianState& s, const Vec& etas) {
  if (etas.size() != s.num_modes) throw SpecError("apply_loss_layer: need one eta per mode");
  for (Eigen::Index i = 0; i < etas.size(); ++i)
    if (!(etas[i] >= 0.0 && etas[i] <= 1.0))
      throw SpecError("apply_loss_layer: eta outside [0,1]");
  Vec t(2 * s.num_modes);
  for (int i = 0; i < s.num_modes; ++i) t[2 * i] = t[2 * i + 1] = std::sqrt(etas[i]);
  GaussianState o = s;
  o.mean = t.cwiseProduct(s.mean);
  o.cov = t.asDiagonal() * s.cov * t.asDiagonal();
  for (int i = 0; i < 2 * s.num_modes; ++i) o.cov(i, i) += 0.5 * (1.0 - t[i] * t[i]);
  return o;
}

// Product of D(alpha_i) S(xi_i) rho_th(mu_i), before any interferometer.
inline GaussianState prepare_inputs(const CVec& xi, const CVec& alpha, const Vec& thermal = Vec()) {
  const int m = static_cast<int>(xi.size());
  GaussianState s = GaussianState::vacuum(m);
  for (int i = 0; i < m; ++i) {
    const Eigen::Matrix2d S = squeezing_symplectic(xi[i]);
    const double mu = thermal.size() ? thermal[i] : 0.0;
    s.cov.block<2, 2>(2 * i, 2 * i) = (mu + 0.5) * S * S.transpose();
  }
  s.mean = displacement_vector(alpha);
  return s;
}

// R(U) D(alpha) S(xi) |0>.
inline GaussianState prepare_target(const GbsSpec& spec) {
  validate(spec);
  const GaussianState in = prepare_inputs(spec.squeezing, spec.displacement, spec.thermal);
  return apply_symplectic(in, passive_symplectic(spec.unitary), Vec::Zero(2 * spec.modes()));
}

// Keep only the listed modes.
inline GaussianState reduce(const GaussianState& s, const std::vector<int>& modes) {
  GaussianState o;
  o.num_modes = static_cast<int>(modes.size());
  o.mean.resize(2 * o.num_modes);
  o.cov.resize(2 * o.num_modes, 2 * o.num_modes);
  for (int a = 0; a < o.num_modes; ++a) {
    if (modes[a] < 0 || modes[a] >= s.num_modes) throw SpecError("reduce: mode out of range");
    for (int q = 0; q < 2; ++q) {
      o.mean[2 * a + q] = s.mean[2 * modes[a] + q];
      for (int b = 0; b < o.num_modes; ++b)
        for (int p = 0; p < 2; ++p)
          o.cov(2 * a + q, 2 * b + p) = s.cov(2 * modes[a] + q, 2 * modes[b] + p);
    }
  }
  return o;
}

}  // namespace lossmit
