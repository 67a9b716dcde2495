#pragma once

#include "lossmit/loss_network.hpp"
#include "lossmit/pnd.hpp"
#include "lossmit/single_mode.hpp"

#include <complex>
#include <vector>

namespace lossmit {

namespace detail {

using lcplx = std::complex<long double>;

// Fock amplitudes of D(alpha) S(xi)|0>, from
// (a cosh r + a^dag e^{i th} sinh r) psi = (alpha cosh r + alpha* e^{i th} sinh r) psi.
inline std::vector<lcplx> displaced_squeezed_amplitudes(cplx xi, cplx alpha, int nmax) {
  const long double r = std::abs(xi);
  const long double th = r > 0 ? std::arg(xi) : 0.0L;
  const lcplx e = std::polar<long double>(1.0L, th);
  const lcplx a(alpha.real(), alpha.imag());
  const long double ch = std::cosh(r), sh = std::sinh(r);
  const lcplx g = a * ch + std::conj(a) * e * sh;
  std::vector<lcplx> c(nmax + 1);
  c[0] = std::exp(-0.5L * std::norm(a) - 0.5L * std::conj(a) * std::conj(a) * e * std::tanh(r)) /
         std::sqrt(ch);
  if (nmax >= 1) c[1] = g * c[0] / ch;
  for (int n = 1; n < nmax; ++n)
    c[n + 1] = (g * c[n] - e * sh * std::sqrt(static_cast<long double>(n)) * c[n - 1]) /
               (ch * std::sqrt(static_cast<long double>(n + 1)));
  return c;
}

// Fock truncation large enough that the lossless input misses < 1e-15 of its norm.
inline int fock_extent(cplx xi, cplx alpha, int at_least, int cap) {
  int n = std::max(at_least, 16);
  while (true) {
    const auto c = displaced_squeezed_amplitudes(xi, alpha, n);
    long double s = 0;
    for (const auto& v : c) s += std::norm(v);
    if (1.0L - s < 1e-15L || n >= cap) return n;
    n = std::min(cap, 2 * n);
  }
}

// Binomial thinning of a photon-number distribution.
inline std::vector<long double> thin(const std::vector<long double>& p, double eta, int cutoff) {
  std::vector<long double> out(cutoff + 1, 0.0L);
  const int n = static_cast<int>(p.size()) - 1;
  if (eta == 1.0) {
    for (int k = 0; k <= std::min(cutoff, n); ++k) out[k] = p[k];
    return out;
  }
  if (eta == 0.0) {
    long double s = 0;
    for (auto v : p) s += v;
    out[0] = s;
    return out;
  }
  const long double le = std::log(static_cast<long double>(eta));
  const long double l1 = std::log1p(-static_cast<long double>(eta));
  for (int k = 0; k <= cutoff; ++k) {
    Kahan acc;
    for (int j = k; j <= n; ++j) {
      if (p[j] == 0.0L) continue;
      acc.add(p[j] * std::exp(log_choose(j, k) + k * le + (j - k) * l1));
    }
    out[k] = acc.s;
  }
  return out;
}

// Matrix of R(U) on the Fock states with n1 + n2 = total, in OutcomeIndex order
// (first mode descending), using R a_j^dag R^dag = sum_i U_ij a_i^dag.
inline std::vector<lcplx> two_mode_block(const CMat& u, int total) {
  const int d = total + 1;
  std::vector<lcplx> blk(static_cast<std::size_t>(d) * d, 0.0L);
  const lcplx u11(u(0, 0).real(), u(0, 0).imag()), u21(u(1, 0).real(), u(1, 0).imag());
  const lcplx u12(u(0, 1).real(), u(0, 1).imag()), u22(u(1, 1).real(), u(1, 1).imag());
  auto lf = [](int n) { return std::lgamma(static_cast<long double>(n) + 1); };
  for (int n1 = total; n1 >= 0; --n1) {
    const int n2 = total - n1;
    const int col = total - n1;
    for (int i = 0; i <= n1; ++i)
      for (int j = 0; j <= n2; ++j) {
        const int k1 = i + j;
        const long double mag = std::exp(log_choose(n1, i) + log_choose(n2, j) +
                                         0.5L * (lf(k1) + lf(total - k1) - lf(n1) - lf(n2)));
        const lcplx term = std::pow(u11, i) * std::pow(u21, n1 - i) * std::pow(u12, j) *
                           std::pow(u22, n2 - j);
        blk[static_cast<std::size_t>(total - k1) * d + col] += mag * term;
      }
  }
  return blk;
}

}  // namespace detail

// Brute-force Fock-space reference. One mode: lossless amplitudes thinned by
// the net transmissivity. Two modes: density matrix on n1 + n2 <= L, with each
// loss layer applied as the partial trace of a beam splitter with a vacuum
// ancilla (its Kraus form) and passive blocks applied per photon number.
inline Pnd oracle_pnd(const GbsSpec& spec, const LossModel& loss, int cutoff) {
  validate(spec);
  detail::require_cutoff(cutoff);
  if (spec.thermal.size() && spec.thermal.maxCoeff() > 0.0) throw SpecError("oracle_pnd: thermal inputs not supported");
  const int m = spec.modes();
  const LossModel lm = with_unitary(loss, spec.unitary);
  if (m == 1) {
    double eta = 1.0;
    for (const auto& s : lm.segments)
      if (s.kind == Segment::Kind::Loss) eta *= s.etas[0];
    const int n = detail::fock_extent(spec.squeezing[0], spec.displacement[0], cutoff, 200000);
    const auto c = detail::displaced_squeezed_amplitudes(spec.squeezing[0], spec.displacement[0], n);
    std::vector<long double> p(c.size());
    for (std::size_t i = 0; i < c.size(); ++i) p[i] = std::norm(c[i]);
    const auto q = detail::thin(p, eta, cutoff);
    Pnd out = Pnd::make(1, cutoff);
    for (int k = 0; k <= cutoff; ++k) out.probs[k] = static_cast<double>(q[k]);
    out.finalize_tail();
    return out;
  }
  if (m != 2) throw SpecError("oracle_pnd: only one or two modes");

  using detail::lcplx;
  int ext = 0;
  for (int j = 0; j < 2; ++j)
    ext = std::max(ext, detail::fock_extent(spec.squeezing[j], spec.displacement[j], cutoff, 200));
  // joint truncation: keep the product state's omitted norm tiny
  std::vector<std::vector<lcplx>> amp(2);
  for (int j = 0; j < 2; ++j)
    amp[j] = detail::displaced_squeezed_amplitudes(spec.squeezing[j], spec.displacement[j], ext);
  int big = cutoff;
  for (;; ++big) {
    long double kept = 0;
    for (int a = 0; a <= std::min(big, ext); ++a)
      for (int b = 0; b <= std::min(big - a, ext); ++b) kept += std::norm(amp[0][a]) * std::norm(amp[1][b]);
    if (1.0L - kept < 1e-14L || big >= 2 * ext || big >= 50) break;
  }
  const OutcomeIndex ix(2, big);
  const std::size_t dim = ix.size();
  std::vector<lcplx> psi(dim);
  for (std::size_t i = 0; i < dim; ++i) {
    const int* e = ix.exponents(i);
    psi[i] = (e[0] <= ext && e[1] <= ext) ? amp[0][e[0]] * amp[1][e[1]] : lcplx(0);
  }
  std::vector<lcplx> rho(dim * dim);
  for (std::size_t i = 0; i < dim; ++i)
    for (std::size_t k = 0; k < dim; ++k) rho[i * dim + k] = psi[i] * std::conj(psi[k]);

  auto lossy = [&](int mode, double eta) {
    if (eta == 1.0) return;
    std::vector<lcplx> next(dim * dim, 0.0L);
    const long double le = eta > 0 ? std::log(static_cast<long double>(eta)) : 0.0L;
    const long double l1 = eta < 1 ? std::log1p(-static_cast<long double>(eta)) : 0.0L;
    // amplitude of |n - k> <n| in the k-th Kraus operator
    std::vector<long double> ktab(static_cast<std::size_t>(big + 1) * (big + 1), 0.0L);
    for (int n = 0; n <= big; ++n)
      for (int k = 0; k <= n; ++k)
        ktab[n * (big + 1) + k] =
            eta == 0.0 ? (n == k ? 1.0L : 0.0L)
                       : std::exp(0.5L * (detail::log_choose(n, k) + (n - k) * le + k * l1));
    auto kraus = [&](int n, int k) { return ktab[n * (big + 1) + k]; };
    for (std::size_t i = 0; i < dim; ++i) {
      const int* a = ix.exponents(i);
      for (std::size_t j = 0; j < dim; ++j) {
        const int* b = ix.exponents(j);
        lcplx acc = 0;
        for (int k = 0;; ++k) {
          int a2[2] = {a[0], a[1]}, b2[2] = {b[0], b[1]};
          a2[mode] += k;
          b2[mode] += k;
          if (a2[0] + a2[1] > big || b2[0] + b2[1] > big) break;
          acc += kraus(a2[mode], k) * kraus(b2[mode], k) * rho[ix.rank(a2) * dim + ix.rank(b2)];
        }
        next[i * dim + j] = acc;
      }
    }
    rho.swap(next);
  };

  auto passive = [&](const CMat& u) {
    std::vector<std::vector<lcplx>> blocks(big + 1);
    for (int t = 0; t <= big; ++t) blocks[t] = detail::two_mode_block(u, t);
    std::vector<lcplx> next(dim * dim, 0.0L);
    for (int t1 = 0; t1 <= big; ++t1) {
      const std::size_t o1 = ix.begin_of(t1), d1 = t1 + 1;
      for (int t2 = 0; t2 <= big; ++t2) {
        const std::size_t o2 = ix.begin_of(t2), d2 = t2 + 1;
        // R1 rho R2^dag on the (t1, t2) block
        std::vector<lcplx> tmp(d1 * d2, 0.0L);
        for (std::size_t i = 0; i < d1; ++i)
          for (std::size_t k = 0; k < d1; ++k) {
            const lcplx r = blocks[t1][i * d1 + k];
            if (r == lcplx(0)) continue;
            for (std::size_t j = 0; j < d2; ++j) tmp[i * d2 + j] += r * rho[(o1 + k) * dim + o2 + j];
          }
        for (std::size_t i = 0; i < d1; ++i)
          for (std::size_t j = 0; j < d2; ++j) {
            lcplx acc = 0;
            for (std::size_t k = 0; k < d2; ++k) acc += tmp[i * d2 + k] * std::conj(blocks[t2][j * d2 + k]);
            next[(o1 + i) * dim + o2 + j] = acc;
          }
      }
    }
    rho.swap(next);
  };

  for (const auto& s : lm.segments) {
    if (s.kind == Segment::Kind::Loss) {
      lossy(0, s.etas[0]);
      lossy(1, s.etas[1]);
    } else {
      passive(s.unitary);
    }
  }
  Pnd out = Pnd::make(2, cutoff);
  for (std::size_t i = 0; i < out.size(); ++i) out.probs[i] = static_cast<double>(rho[i * dim + i].real());
  out.finalize_tail();
  return out;
}

}  // namespace lossmit
