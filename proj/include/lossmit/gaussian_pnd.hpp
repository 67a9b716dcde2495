#pragma once

#include "lossmit/gaussian.hpp"
#include "lossmit/parallel.hpp"
#include "lossmit/pnd.hpp"

#include <sstream>
#include <string>

namespace lossmit {

struct PndOptions {
  double tail_tol = 1e-10;
  int cutoff = -1;      // fixed total-photon cutoff; -1 chooses adaptively
  int max_cutoff = -1;  // -1: 4000 for one mode, 60 otherwise
  bool allow_truncation = false;
  int threads = 0;
};

inline int default_max_cutoff(int modes) { return modes == 1 ? 4000 : 60; }

namespace detail {

// The probability generating function of a Gaussian state,
//   G(z) = sum_m P(m) z^m = exp(-r^T B^{-1} L r / 2) / sqrt(det B),
// with B = Q - Z K, Q = cov + 1/2, K = cov - 1/2, L = 1 - Z and Z = diag(z_j)
// on both quadratures of mode j. Writing W = K Q^{-1} and u = Q^{-1} r,
//   log G = log G(0) + sum_k [ tr((ZW)^k)/(2k) + u^T c_k ],
//   c_1 = Z (r - W r)/2,  c_k = Z W c_{k-1},
// and the coefficients of exp(log G) follow from k g_k = sum_j j f_j g_{k-j}.
struct GfSetup {
  Mat w;
  Vec u;
  Vec c1;  // before multiplication by Z
  double log_p0 = 0.0;
};

inline GfSetup gf_setup(const GaussianState& s) {
  const int n = 2 * s.num_modes;
  const Mat q = s.cov + 0.5 * Mat::Identity(n, n);
  const Mat k = s.cov - 0.5 * Mat::Identity(n, n);
  Eigen::LLT<Mat> llt(q);
  if (llt.info() != Eigen::Success) throw NumericalError("pnd_gaussian: cov + 1/2 not positive");
  GfSetup g;
  const Mat qinv = llt.solve(Mat::Identity(n, n));
  g.w = k * qinv;
  g.u = qinv * s.mean;
  g.c1 = 0.5 * (s.mean - g.w * s.mean);
  double logdet = 0.0;
  for (int i = 0; i < n; ++i) logdet += 2.0 * std::log(llt.matrixL()(i, i));
  g.log_p0 = -0.5 * logdet - 0.5 * s.mean.dot(g.u);
  return g;
}

// Distribution of the total photon number (all z_j equal), extended until the
// omitted mass drops below tol or kmax is reached.
inline std::vector<double> total_photon_series(const GfSetup& g, int kmax, double tol = -1.0) {
  std::vector<double> f(1, 0.0), p(1, std::exp(g.log_p0));
  Mat wk = Mat::Identity(g.w.rows(), g.w.cols());
  Vec c = g.c1;
  long double mass = p[0];
  for (int k = 1; k <= kmax; ++k) {
    if (tol > 0 && 1.0L - mass < tol) break;
    wk = wk * g.w;
    if (k > 1) c = g.w * c;
    f.push_back(wk.trace() / (2.0 * k) + g.u.dot(c));
    long double acc = 0.0L;
    for (int j = 1; j <= k; ++j) acc += static_cast<long double>(j) * f[j] * p[k - j];
    p.push_back(static_cast<double>(acc / k));
    mass += p.back();
  }
  return p;
}

}  // namespace detail

// Smallest total cutoff whose omitted mass is below tol, or -1 if none up to cap.
inline int choose_cutoff(const GaussianState& s, double tol, int cap, std::vector<double>* totals = nullptr) {
  const detail::GfSetup g = detail::gf_setup(s);
  const std::vector<double> p = detail::total_photon_series(g, cap, tol);
  if (totals) *totals = p;
  long double acc = 0.0L;
  for (int k = 0; k < static_cast<int>(p.size()); ++k) {
    acc += p[k];
    if (1.0L - acc < tol) return k;
  }
  return -1;
}

// Multimode photon-number distribution of any Gaussian state.
inline Pnd pnd_gaussian(const GaussianState& s, const PndOptions& opt = {}) {
  validate(s);
  const int m = s.num_modes;
  const int n = 2 * m;
  const int cap = opt.max_cutoff > 0 ? opt.max_cutoff : default_max_cutoff(m);
  int c = opt.cutoff;
  if (c < 0) {
    c = choose_cutoff(s, opt.tail_tol, cap);
    if (c < 0) {
      if (!opt.allow_truncation) {
        std::ostringstream os;
        os << "pnd_gaussian: tail above " << opt.tail_tol << " at the hard cap of " << cap << " photons";
        throw NumericalError(os.str());
      }
      c = cap;
    }
  }
  const detail::GfSetup g = detail::gf_setup(s);
  Pnd out = Pnd::make(m, c);
  const OutcomeIndex& ix = *out.index;
  const std::size_t total = ix.size();

  // up[i*m + j]: outcome i with one more photon in mode j
  std::vector<std::size_t> up(c > 0 ? ix.begin_of(c) * m : 0);
  for (std::size_t i = 0; c > 0 && i < ix.begin_of(c); ++i)
    for (int j = 0; j < m; ++j) up[i * m + j] = ix.raise(i, j);

  // v_k = Z W v_{k-1}, one polynomial per quadrature row
  auto step = [&](const std::vector<double>& prev, int kprev, std::vector<double>& next) {
    const std::size_t b0 = ix.begin_of(kprev), e0 = ix.end_of(kprev);
    const std::size_t np = e0 - b0;
    const std::size_t b1 = ix.begin_of(kprev + 1), nn = ix.end_of(kprev + 1) - b1;
    next.assign(n * nn, 0.0);
    for (int row = 0; row < n; ++row) {
      const int mode = row / 2;
      double* dst = next.data() + row * nn;
      for (int col = 0; col < n; ++col) {
        const double wrc = g.w(row, col);
        if (wrc == 0.0) continue;
        const double* src = prev.data() + col * np;
        for (std::size_t a = 0; a < np; ++a) dst[up[(b0 + a) * m + mode] - b1] += wrc * src[a];
      }
    }
  };

  std::vector<double> f(total, 0.0);
  // trace terms, one starting row at a time
  std::vector<std::vector<double>> trace_part(n, std::vector<double>(total, 0.0));
  parallel_for(n, opt.threads, [&](std::size_t r) {
    std::vector<double> v(n, 0.0), nx;
    v[r] = 1.0;
    for (int k = 1; k <= c; ++k) {
      step(v, k - 1, nx);
      v.swap(nx);
      const std::size_t b = ix.begin_of(k), nk = ix.end_of(k) - b;
      for (std::size_t a = 0; a < nk; ++a) trace_part[r][b + a] = v[r * nk + a] / (2.0 * k);
    }
  });
  for (int r = 0; r < n; ++r)
    for (std::size_t i = 0; i < total; ++i) f[i] += trace_part[r][i];

  // displacement terms
  if (c >= 1 && s.mean.cwiseAbs().maxCoeff() > 0.0) {
    std::vector<double> v(n * m, 0.0), nx;
    const std::size_t b1 = ix.begin_of(1);
    for (int row = 0; row < n; ++row) v[row * m + (up[0 * m + row / 2] - b1)] = g.c1[row];
    for (int k = 1; k <= c; ++k) {
      if (k > 1) {
        step(v, k - 1, nx);
        v.swap(nx);
      }
      const std::size_t b = ix.begin_of(k), nk = ix.end_of(k) - b;
      for (int row = 0; row < n; ++row)
        for (std::size_t a = 0; a < nk; ++a) f[b + a] += g.u[row] * v[row * nk + a];
    }
  }

  // exponentiate degree by degree
  std::vector<double>& p = out.probs;
  p[0] = std::exp(g.log_p0);
  std::vector<int> e(m);
  std::vector<long double> acc;
  for (int k = 1; k <= c; ++k) {
    const std::size_t bk = ix.begin_of(k);
    acc.assign(ix.end_of(k) - bk, 0.0L);
    for (int j = 1; j <= k; ++j) {
      for (std::size_t a = ix.begin_of(j); a < ix.end_of(j); ++a) {
        const long double fa = static_cast<long double>(j) * f[a];
        if (fa == 0.0L) continue;
        const int* ea = ix.exponents(a);
        for (std::size_t b = ix.begin_of(k - j); b < ix.end_of(k - j); ++b) {
          const int* eb = ix.exponents(b);
          for (int t = 0; t < m; ++t) e[t] = ea[t] + eb[t];
          acc[ix.rank(e.data()) - bk] += fa * p[b];
        }
      }
    }
    for (std::size_t i = 0; i < acc.size(); ++i) p[bk + i] = static_cast<double>(acc[i] / k);
  }
  for (double& x : p) x = std::clamp(x, 0.0, 1.0);
  out.finalize_tail();
  return out;
}

}  // namespace lossmit
