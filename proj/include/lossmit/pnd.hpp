#pragma once

#include "lossmit/gaussian.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <utility>
#include <vector>

namespace lossmit {

// Outcomes m in N^M with |m| <= cutoff, ordered by total photon number and,
// within a total, lexicographically with the first mode descending. A table
// for a smaller cutoff is a prefix of a larger one.
class OutcomeIndex {
 public:
  OutcomeIndex(int modes, int cutoff) : modes_(modes), cutoff_(cutoff) {
    if (modes <= 0 || cutoff < 0) throw SpecError("OutcomeIndex: bad shape");
    // only C(n, k) with k < modes is ever needed
    const int nmax = cutoff + modes + 1;
    binom_.assign(static_cast<std::size_t>(nmax + 1) * stride(), 0);
    for (int n = 0; n <= nmax; ++n) {
      binom_at(n, 0) = 1;
      for (int k = 1; k <= std::min(n, modes); ++k)
        binom_at(n, k) = binom_at(n - 1, k - 1) + (k <= n - 1 ? binom_at(n - 1, k) : 0);
    }
    offset_.resize(cutoff + 2);
    offset_[0] = 0;
    for (int d = 0; d <= cutoff; ++d) offset_[d + 1] = offset_[d] + count(d, modes);
    exps_.resize(size() * modes);
    std::vector<int> e(modes, 0);
    std::size_t pos = 0;
    for (int d = 0; d <= cutoff; ++d) fill(d, 0, e, pos);
  }

  int modes() const { return modes_; }
  int cutoff() const { return cutoff_; }
  std::size_t size() const { return offset_.back(); }
  std::size_t begin_of(int d) const { return offset_[d]; }
  std::size_t end_of(int d) const { return offset_[d + 1]; }
  const int* exponents(std::size_t i) const { return exps_.data() + i * modes_; }
  int degree(std::size_t i) const {
    int s = 0;
    for (int j = 0; j < modes_; ++j) s += exps_[i * modes_ + j];
    return s;
  }

  std::size_t rank(const int* e) const {
    int r = 0;
    for (int j = 0; j < modes_; ++j) r += e[j];
    std::size_t idx = offset_[r];
    for (int j = 0; j < modes_ - 1; ++j) {
      const int parts = modes_ - j;
      const int s = r - e[j] - 1;
      if (s >= 0) idx += static_cast<std::size_t>(binom(s + parts - 1, parts - 1));
      r -= e[j];
    }
    return idx;
  }

  // Index of outcome i with one more photon in mode j; requires degree < cutoff.
  std::size_t raise(std::size_t i, int j) const {
    std::vector<int> e(exponents(i), exponents(i) + modes_);
    ++e[j];
    return rank(e.data());
  }

  std::uint64_t binom(int n, int k) const {
    if (k < 0 || n < 0 || k > n) return 0;
    if (k > modes_) throw SpecError("OutcomeIndex::binom: k out of table");
    return binom_[static_cast<std::size_t>(n) * stride() + k];
  }

 private:
  std::size_t stride() const { return static_cast<std::size_t>(modes_ + 1); }
  std::uint64_t& binom_at(int n, int k) { return binom_[static_cast<std::size_t>(n) * stride() + k]; }
  std::size_t count(int d, int parts) const {
    return static_cast<std::size_t>(binom(d + parts - 1, parts - 1));
  }
  void fill(int remaining, int j, std::vector<int>& e, std::size_t& pos) {
    if (j == modes_ - 1) {
      e[j] = remaining;
      std::copy(e.begin(), e.end(), exps_.begin() + pos * modes_);
      ++pos;
      return;
    }
    for (int v = remaining; v >= 0; --v) {
      e[j] = v;
      fill(remaining - v, j + 1, e, pos);
    }
  }

  int modes_;
  int cutoff_;
  std::vector<std::uint64_t> binom_;
  std::vector<std::size_t> offset_;
  std::vector<int> exps_;
};

// Truncated photon-number distribution over total photon number <= cutoff.
struct Pnd {
  int num_modes = 1;
  int cutoff = 0;
  std::vector<double> probs;
  double tail_bound = 0.0;
  std::shared_ptr<const OutcomeIndex> index;

  static Pnd make(int modes, int cutoff) {
    Pnd p;
    p.num_modes = modes;
    p.cutoff = cutoff;
    p.index = std::make_shared<OutcomeIndex>(modes, cutoff);
    p.probs.assign(p.index->size(), 0.0);
    return p;
  }

  std::size_t size() const { return probs.size(); }

  double prob(const std::vector<int>& m) const {
    if (static_cast<int>(m.size()) != num_modes) throw SpecError("Pnd::prob: wrong arity");
    int tot = 0;
    for (int v : m) {
      if (v < 0) return 0.0;
      tot += v;
    }
    if (tot > cutoff) return 0.0;
    return probs[index->rank(m.data())];
  }

  std::vector<int> outcome(std::size_t i) const {
    const int* e = index->exponents(i);
    return std::vector<int>(e, e + num_modes);
  }

  double sum() const {
    double s = 0.0, c = 0.0;
    for (double p : probs) {
      const double y = p - c;
      const double t = s + y;
      c = (t - s) - y;
      s = t;
    }
    return s;
  }

  // Probability of each total photon number.
  std::vector<double> totals() const {
    std::vector<double> t(cutoff + 1, 0.0);
    for (int d = 0; d <= cutoff; ++d)
      for (std::size_t i = index->begin_of(d); i < index->end_of(d); ++i) t[d] += probs[i];
    return t;
  }

  void finalize_tail() { tail_bound = std::max(0.0, 1.0 - sum()); }
};

struct TvdResult {
  double delta = 0.0;
  double uncertainty = 0.0;
};

inline void check_compatible(const Pnd& p, const Pnd& q) {
  if (p.num_modes != q.num_modes) throw SpecError("Pnd: mode counts differ");
}

// Half the l1 distance over the union of supports; the omitted tails bound the error.
inline TvdResult total_variation(const Pnd& p, const Pnd& q) {
  check_compatible(p, q);
  const std::size_t n = std::max(p.size(), q.size());
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = i < p.size() ? p.probs[i] : 0.0;
    const double b = i < q.size() ? q.probs[i] : 0.0;
    s += std::abs(a - b);
  }
  return {0.5 * s, 0.5 * (p.tail_bound + q.tail_bound)};
}

// Both distributions are taken to be normalized, so the mass each misses beyond
// its cutoff is known; the interval for the unseen part of |p - q| is
// [|Pt - Qt|, Pt + Qt] and we report its midpoint.
inline TvdResult total_variation_normalized(const Pnd& p, const Pnd& q) {
  check_compatible(p, q);
  const std::size_t n = std::max(p.size(), q.size());
  long double s = 0.0L, sp = 0.0L, sq = 0.0L;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = i < p.size() ? p.probs[i] : 0.0;
    const double b = i < q.size() ? q.probs[i] : 0.0;
    s += std::abs(a - b);
    sp += a;
    sq += b;
  }
  const double pt = std::max(0.0L, 1.0L - sp), qt = std::max(0.0L, 1.0L - sq);
  const double lo = std::abs(pt - qt), hi = pt + qt;
  return {static_cast<double>(0.5L * s) + 0.25 * (lo + hi), 0.25 * (hi - lo)};
}

struct ParitySplit {
  double delta_even = 0.0;
  double delta_odd = 0.0;
  double delta_vac = 0.0;
};

// Parity of the total photon number; the vacuum counts as even.
inline ParitySplit parity_split(const Pnd& target, const Pnd& lossy) {
  check_compatible(target, lossy);
  double odd = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i)
    if (target.index->degree(i) % 2 == 1) odd += target.probs[i];
  if (odd > 1e-12) throw SpecError("parity_split: target has odd total photon numbers");
  const Pnd& big = target.size() >= lossy.size() ? target : lossy;
  ParitySplit r;
  for (std::size_t i = 0; i < big.size(); ++i) {
    const double a = i < target.size() ? target.probs[i] : 0.0;
    const double b = i < lossy.size() ? lossy.probs[i] : 0.0;
    const double d = 0.5 * std::abs(a - b);
    if (big.index->degree(i) % 2 == 0)
      r.delta_even += d;
    else
      r.delta_odd += d;
    if (i == 0) r.delta_vac = d;
  }
  return r;
}

}  // namespace lossmit
