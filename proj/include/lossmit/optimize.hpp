#pragma once

#include "lossmit/gaussian.hpp"
#include "lossmit/parallel.hpp"

#include <boost/math/tools/minima.hpp>
#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <functional>
#include <limits>
#include <string>
#include <vector>

namespace lossmit {

// Root of a sign-changing f on [lo, hi] to full double precision.
inline double solve_root(const std::function<double(double)>& f, double lo, double hi, const char* who) {
  double flo = f(lo), fhi = f(hi);
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  if ((flo > 0) == (fhi > 0)) throw NumericalError(std::string(who) + ": root not bracketed");
  std::uintmax_t iters = 300;
  const auto r = boost::math::tools::toms748_solve(f, lo, hi, flo, fhi,
                                                   boost::math::tools::eps_tolerance<double>(52), iters);
  return 0.5 * (r.first + r.second);
}

// Expand [lo, lo + step] by doubling the step until f changes sign or step exceeds max_step.
inline double solve_root_expanding(const std::function<double(double)>& f, double lo, double step,
                                   double max_step, const char* who) {
  const double flo = f(lo);
  if (flo == 0.0) return lo;
  for (double d = step; d <= max_step; d *= 2.0) {
    const double fhi = f(lo + d);
    if ((fhi > 0) != (flo > 0)) return solve_root(f, lo, lo + d, who);
  }
  throw NumericalError(std::string(who) + ": no bracket within " + std::to_string(max_step));
}

struct Min1d {
  double x = 0.0;
  double f = 0.0;
};

// Brent on [lo, hi]; smooth objectives get a final stationary-point polish on a
// central-difference derivative, which Brent alone cannot resolve below ~1e-8.
inline Min1d minimize_1d(const std::function<double(double)>& f, double lo, double hi, bool smooth,
                         double xtol = 1e-10) {
  if (hi <= lo) return {lo, f(lo)};
  int bits = 40;
  if (!smooth) bits = std::clamp(static_cast<int>(-std::log2(std::max(xtol, 1e-15) / std::max(1.0, hi - lo))), 8, 40);
  std::uintmax_t iters = 500;
  auto r = boost::math::tools::brent_find_minima(f, lo, hi, bits, iters);
  Min1d out{r.first, r.second};
  if (smooth) {
    const double h = 1e-6 * std::max(1.0, std::abs(out.x));
    const double w = 1e-4 * std::max(1.0, std::abs(out.x));
    auto g = [&](double x) { return (f(x + h) - f(x - h)) / (2 * h); };
    const double a = std::max(lo + h, out.x - w), b = std::min(hi - h, out.x + w);
    if (a < b) {
      const double ga = g(a), gb = g(b);
      if (ga < 0 && gb > 0) {
        try {
          const double x = solve_root(g, a, b, "minimize_1d");
          const double fx = f(x);
          if (fx <= out.f + 1e-14 * std::max(1.0, std::abs(out.f))) out = {x, fx};
        } catch (const NumericalError&) {
        }
      }
    }
  }
  return out;
}

struct Box {
  std::vector<double> lo, hi;
  std::vector<int> points;  // grid points per coordinate
  std::vector<bool> periodic;
  std::vector<std::string> names;

  int dim() const { return static_cast<int>(lo.size()); }
  void add(std::string name, double a, double b, int n, bool per = false) {
    names.push_back(std::move(name));
    lo.push_back(a);
    hi.push_back(b);
    points.push_back(n);
    periodic.push_back(per);
  }
};

struct SearchOptions {
  int grid_points = 41;
  int phase_points = 64;
  long max_grid_evals = 40000;  // the per-coordinate grid shrinks to respect this
  int starts = 3;               // best grid points refined
  double tol = 1e-5;
  int max_cycles = 60;
  int threads = 0;
};

struct SearchResult {
  std::vector<double> x;
  double f = std::numeric_limits<double>::infinity();
  long evaluations = 0;
  int cycles = 0;
  bool converged = false;
};

namespace detail {

inline bool lex_less(const std::vector<double>& a, const std::vector<double>& b) {
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

inline bool better(double fa, const std::vector<double>& a, double fb, const std::vector<double>& b) {
  if (fa != fb) return fa < fb;
  return lex_less(a, b);
}

}  // namespace detail

// Nelder-Mead on the box (points clamped; periodic coordinates left free).
inline SearchResult nelder_mead(const std::function<double(const std::vector<double>&)>& f, std::vector<double> x0,
                                const std::vector<double>& step, const Box& box, double tol, int max_evals) {
  const int d = static_cast<int>(x0.size());
  auto clamp = [&](std::vector<double> y) {
    for (int k = 0; k < d; ++k)
      if (!box.periodic[k]) y[k] = std::clamp(y[k], box.lo[k], box.hi[k]);
    return y;
  };
  SearchResult out;
  std::vector<std::vector<double>> p(d + 1, x0);
  std::vector<double> v(d + 1);
  for (int k = 0; k < d; ++k) {
    p[k + 1][k] += step[k];
    if (!box.periodic[k] && p[k + 1][k] > box.hi[k]) p[k + 1][k] = x0[k] - step[k];
    p[k + 1] = clamp(p[k + 1]);
  }
  for (int i = 0; i <= d; ++i) v[i] = f(p[i]);
  out.evaluations = d + 1;
  std::vector<int> idx(d + 1);
  while (out.evaluations < max_evals) {
    for (int i = 0; i <= d; ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](int a, int b) { return v[a] < v[b]; });
    const int best = idx[0], worst = idx[d], second = idx[d - 1];
    double size = 0.0;
    for (int i = 1; i <= d; ++i)
      for (int k = 0; k < d; ++k) size = std::max(size, std::abs(p[idx[i]][k] - p[best][k]));
    if (size < tol) {
      out.converged = true;
      break;
    }
    std::vector<double> c(d, 0.0);
    for (int i = 0; i <= d; ++i)
      if (i != worst)
        for (int k = 0; k < d; ++k) c[k] += p[i][k] / d;
    auto along = [&](double t) {
      std::vector<double> y(d);
      for (int k = 0; k < d; ++k) y[k] = c[k] + t * (p[worst][k] - c[k]);
      return clamp(y);
    };
    const auto xr = along(-1.0);
    const double fr = f(xr);
    ++out.evaluations;
    if (fr < v[best]) {
      const auto xe = along(-2.0);
      const double fe = f(xe);
      ++out.evaluations;
      if (fe < fr) {
        p[worst] = xe;
        v[worst] = fe;
      } else {
        p[worst] = xr;
        v[worst] = fr;
      }
    } else if (fr < v[second]) {
      p[worst] = xr;
      v[worst] = fr;
    } else {
      const auto xc = fr < v[worst] ? along(-0.5) : along(0.5);
      const double fc = f(xc);
      ++out.evaluations;
      if (fc < std::min(fr, v[worst])) {
        p[worst] = xc;
        v[worst] = fc;
      } else {
        for (int i = 0; i <= d; ++i) {
          if (i == best) continue;
          for (int k = 0; k < d; ++k) p[i][k] = p[best][k] + 0.5 * (p[i][k] - p[best][k]);
          v[i] = f(p[i]);
          ++out.evaluations;
        }
      }
    }
  }
  int b = 0;
  for (int i = 1; i <= d; ++i)
    if (v[i] < v[b]) b = i;
  out.x = p[b];
  out.f = v[b];
  return out;
}

// Grid scan over the box (parallel, order-independent reduction) followed by
// coordinate-wise refinement of the best few grid points. Ties go to the
// lexicographically smallest parameter vector.
inline SearchResult grid_then_refine(const std::function<double(const std::vector<double>&)>& f, const Box& box,
                                     const SearchOptions& opt, bool smooth,
                                     const std::vector<std::vector<double>>& seeds = {}) {
  const int d = box.dim();
  SearchResult best;
  if (d == 0) {
    best.f = f({});
    best.evaluations = 1;
    best.converged = true;
    return best;
  }
  // per-coordinate counts, reduced uniformly until the grid fits the budget
  std::vector<int> n = box.points;
  auto total = [&] {
    long t = 1;
    for (int v : n) t *= std::max(1, v);
    return t;
  };
  while (total() > opt.max_grid_evals) {
    bool changed = false;
    for (int& v : n)
      if (v > 3) {
        v = std::max(3, static_cast<int>(v * 0.85));
        changed = true;
      }
    if (!changed) break;
  }
  auto coord = [&](int k, int i) {
    if (n[k] == 1) return 0.5 * (box.lo[k] + box.hi[k]);
    if (box.periodic[k]) return box.lo[k] + (box.hi[k] - box.lo[k]) * i / n[k];
    return box.lo[k] + (box.hi[k] - box.lo[k]) * i / (n[k] - 1);
  };
  const long count = total();
  std::vector<double> vals(count);
  parallel_for(static_cast<std::size_t>(count), opt.threads, [&](std::size_t idx) {
    std::vector<double> x(d);
    std::size_t r = idx;
    for (int k = d - 1; k >= 0; --k) {
      x[k] = coord(k, static_cast<int>(r % n[k]));
      r /= n[k];
    }
    vals[idx] = f(x);
  });
  best.evaluations = count;
  // grid ordering is lexicographic in x, so a stable sort keeps the tie-break
  std::vector<long> order(count);
  for (long i = 0; i < count; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](long a, long b) {
    const double va = std::isnan(vals[a]) ? std::numeric_limits<double>::infinity() : vals[a];
    const double vb = std::isnan(vals[b]) ? std::numeric_limits<double>::infinity() : vals[b];
    return va < vb;
  });
  std::vector<double> span(d);
  for (int k = 0; k < d; ++k)
    span[k] = n[k] > 1 ? (box.hi[k] - box.lo[k]) / (box.periodic[k] ? n[k] : n[k] - 1) : 0.0;

  const int starts = static_cast<int>(std::min<long>(opt.starts, count));
  const int total_starts = starts + static_cast<int>(seeds.size());
  for (int s = 0; s < total_starts; ++s) {
    std::vector<double> x(d);
    double fx;
    if (s < starts) {
      std::size_t r = order[s];
      for (int k = d - 1; k >= 0; --k) {
        x[k] = coord(k, static_cast<int>(r % n[k]));
        r /= n[k];
      }
      fx = vals[order[s]];
    } else {
      x = seeds[s - starts];
      if (static_cast<int>(x.size()) != d) throw SpecError("grid_then_refine: seed has wrong dimension");
      for (int k = 0; k < d; ++k)
        if (!box.periodic[k]) x[k] = std::clamp(x[k], box.lo[k], box.hi[k]);
      fx = f(x);
      ++best.evaluations;
    }
    long evals = 0;
    int cyc = 0;
    bool conv = false;
    for (; cyc < opt.max_cycles; ++cyc) {
      double moved = 0.0;
      const std::vector<double> start = x;
      for (int k = 0; k < d; ++k) {
        if (span[k] == 0.0) continue;
        auto g = [&](double t) {
          std::vector<double> y = x;
          y[k] = t;
          ++evals;
          return f(y);
        };
        double a = x[k] - span[k], b = x[k] + span[k];
        if (!box.periodic[k]) {
          a = std::max(a, box.lo[k]);
          b = std::min(b, box.hi[k]);
        }
        const Min1d m = minimize_1d(g, a, b, smooth, 0.1 * opt.tol);
        if (m.f < fx) {
          moved = std::max(moved, std::abs(m.x - x[k]));
          x[k] = m.x;
          fx = m.f;
        }
      }
      // line search along the net step of this cycle; coordinate moves alone
      // crawl along diagonal valleys
      std::vector<double> dir(d);
      double dn = 0.0;
      for (int k = 0; k < d; ++k) {
        dir[k] = x[k] - start[k];
        dn = std::max(dn, std::abs(dir[k]));
      }
      if (dn > 0.0) {
        double a = -1.0, b = 3.0;
        for (int k = 0; k < d; ++k) {
          if (box.periodic[k] || dir[k] == 0.0) continue;
          const double t1 = (box.lo[k] - x[k]) / dir[k], t2 = (box.hi[k] - x[k]) / dir[k];
          a = std::max(a, std::min(t1, t2));
          b = std::min(b, std::max(t1, t2));
        }
        auto g = [&](double t) {
          std::vector<double> y = x;
          for (int k = 0; k < d; ++k) y[k] += t * dir[k];
          ++evals;
          return f(y);
        };
        if (a < b) {
          const Min1d m = minimize_1d(g, a, b, smooth, 0.1 * opt.tol / dn);
          if (m.f < fx) {
            for (int k = 0; k < d; ++k) x[k] += m.x * dir[k];
            moved = std::max(moved, std::abs(m.x) * dn);
            fx = m.f;
          }
        }
      }
      if (moved < opt.tol) {
        conv = true;
        ++cyc;
        break;
      }
    }
    if (d > 1) {
      // kinks in the objective can stall coordinate moves on a valley floor
      std::vector<double> step(d);
      for (int k = 0; k < d; ++k) step[k] = 0.5 * span[k];
      const SearchResult nm = nelder_mead(f, x, step, box, 0.1 * opt.tol, 400 * d);
      evals += nm.evaluations;
      if (nm.f < fx) {
        x = nm.x;
        fx = nm.f;
        conv = conv && nm.converged;
      }
    }
    for (int k = 0; k < d; ++k)
      if (box.periodic[k]) {
        const double p = box.hi[k] - box.lo[k];
        x[k] = box.lo[k] + std::fmod(std::fmod(x[k] - box.lo[k], p) + p, p);
      }
    best.evaluations += evals;
    if (s == 0 || detail::better(fx, x, best.f, best.x)) {
      best.x = x;
      best.f = fx;
      best.cycles = cyc;
      best.converged = conv;
    }
  }
  return best;
}

// Coordinate descent from a given start for smooth objectives.
inline SearchResult coordinate_descent(const std::function<double(const std::vector<double>&)>& f,
                                       std::vector<double> x, const Box& box, double tol = 1e-10,
                                       int max_cycles = 200) {
  SearchResult out;
  double fx = f(x);
  out.evaluations = 1;
  for (int cyc = 0; cyc < max_cycles; ++cyc) {
    double moved = 0.0;
    for (int k = 0; k < box.dim(); ++k) {
      auto g = [&](double t) {
        std::vector<double> y = x;
        y[k] = t;
        ++out.evaluations;
        return f(y);
      };
      const Min1d m = minimize_1d(g, box.lo[k], box.hi[k], true);
      if (m.f <= fx) {
        moved = std::max(moved, std::abs(m.x - x[k]));
        x[k] = m.x;
        fx = m.f;
      }
    }
    out.cycles = cyc + 1;
    if (moved < tol) {
      out.converged = true;
      break;
    }
  }
  out.x = x;
  out.f = fx;
  return out;
}

}  // namespace lossmit
