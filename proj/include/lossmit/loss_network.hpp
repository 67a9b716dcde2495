#pragma once

#include "lossmit/gaussian.hpp"

#include <array>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

namespace lossmit {

// splitmix64 finalizer keyed on (seed, stream, counter); no hidden state.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

struct CounterRng {
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  std::uint64_t counter = 0;

  std::uint64_t next() {
    return mix64(seed ^ mix64(stream * 0xd1342543de82ef95ULL + mix64(counter++)));
  }
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }
};

// T(theta, phi) on modes (mode, mode+1):
// [[e^{i phi} cos, -sin], [e^{i phi} sin, cos]].
struct BeamSplitter {
  int mode = 0;
  double theta = 0.0;
  double phi = 0.0;
  int column = 0;

  Eigen::Matrix2cd block() const {
    const cplx e = std::polar(1.0, phi);
    Eigen::Matrix2cd t;
    t << e * std::cos(theta), -std::sin(theta), e * std::sin(theta), std::cos(theta);
    return t;
  }
  CMat embed(int m) const {
    CMat u = CMat::Identity(m, m);
    u.block<2, 2>(mode, mode) = block();
    return u;
  }
};

// Beam splitters in the order light meets them, then output phases.
struct MeshDecomposition {
  int num_modes = 0;
  int num_columns = 0;
  std::vector<BeamSplitter> splitters;
  Vec output_phases;

  CMat compose() const {
    CMat u = CMat::Identity(num_modes, num_modes);
    for (const auto& b : splitters) u = b.embed(num_modes) * u;
    CVec d(num_modes);
    for (int i = 0; i < num_modes; ++i) d[i] = std::polar(1.0, output_phases[i]);
    return d.asDiagonal() * u;
  }
};

namespace detail {

inline double wrap_phase(double a) {
  const double tau = 2.0 * std::numbers::pi;
  a = std::fmod(a, tau);
  if (a < 0) a += tau;
  if (a >= tau) a -= tau;
  return a;
}

// Write w = diag(e^{i b1}, e^{i b2}) T(theta, phi).
inline void factor_phase_left(const Eigen::Matrix2cd& w, double& theta, double& phi, double& b1,
                              double& b2) {
  const double c = std::min(1.0, std::abs(w(0, 0)));
  const double s = std::min(1.0, std::abs(w(0, 1)));
  theta = std::atan2(s, c);
  constexpr double tiny = 1e-14;
  if (s > tiny && c > tiny) {
    b1 = std::arg(-w(0, 1));
    b2 = std::arg(w(1, 1));
    phi = std::arg(w(0, 0)) - b1;
  } else if (s <= tiny) {
    phi = 0.0;
    b1 = std::arg(w(0, 0));
    b2 = std::arg(w(1, 1));
  } else {
    phi = 0.0;
    b1 = std::arg(-w(0, 1));
    b2 = std::arg(w(1, 0));
  }
}

}  // namespace detail

// Rectangular (Clements) mesh. Splitters equal to the identity are dropped.
inline MeshDecomposition decompose_interferometer(const CMat& u_in) {
  const int n = static_cast<int>(u_in.rows());
  if (u_in.cols() != n) throw SpecError("decompose_interferometer: matrix not square");
  if ((u_in.adjoint() * u_in - CMat::Identity(n, n)).cwiseAbs().maxCoeff() >= 1e-10)
    throw SpecError("decompose_interferometer: matrix not unitary");

  auto tmat = [n](int m, double th, double ph) {
    BeamSplitter b{m, th, ph, 0};
    return b.embed(n);
  };
  struct Rot {
    int m;
    double th, ph;
  };
  std::vector<Rot> right, left;
  CMat v = u_in;
  for (int k = 0, i = n - 2; i >= 0; ++k, --i) {
    if (k % 2 == 0) {
      for (int j = n - 2 - i; j >= 0; --j) {
        // null v(i+j+1, j) from the right
        const int row = i + j + 1;
        double th, ph;
        if (v(row, j) == 0.0) {
          th = 0.0;
          ph = 0.0;
        } else if (std::abs(v(row, j + 1)) == 0.0) {
          th = std::numbers::pi / 2;
          ph = 0.0;
        } else {
          const cplx r = v(row, j) / v(row, j + 1);
          th = std::atan(std::abs(r));
          ph = std::arg(r);
        }
        right.push_back({j, th, ph});
        v = v * tmat(j, th, ph).adjoint();
      }
    } else {
      for (int j = 0; j <= n - 2 - i; ++j) {
        // null v(i+j+1, j) from the left
        const int row = i + j + 1;
        double th, ph;
        if (v(row, j) == 0.0) {
          th = 0.0;
          ph = 0.0;
        } else if (std::abs(v(row - 1, j)) == 0.0) {
          th = std::numbers::pi / 2;
          ph = 0.0;
        } else {
          const cplx r = -v(row, j) / v(row - 1, j);
          th = std::atan(std::abs(r));
          ph = std::arg(r);
        }
        left.push_back({row - 1, th, ph});
        v = tmat(row - 1, th, ph) * v;
      }
    }
  }
  // u = L1^+ ... Lk^+ D R_last ... R_1 with D = diag(v)
  CVec d = v.diagonal();
  std::vector<BeamSplitter> moved;
  for (auto it = left.rbegin(); it != left.rend(); ++it) {
    BeamSplitter b{it->m, it->th, it->ph, 0};
    Eigen::Matrix2cd dd = Eigen::Matrix2cd::Zero();
    dd(0, 0) = d[b.mode];
    dd(1, 1) = d[b.mode + 1];
    const Eigen::Matrix2cd w = b.block().adjoint() * dd;
    double th, ph, b1, b2;
    detail::factor_phase_left(w, th, ph, b1, b2);
    d[b.mode] = std::polar(1.0, b1);
    d[b.mode + 1] = std::polar(1.0, b2);
    moved.push_back({b.mode, th, ph, 0});
  }
  MeshDecomposition out;
  out.num_modes = n;
  std::vector<BeamSplitter> seq;
  for (const auto& r : right) seq.push_back({r.m, r.th, r.ph, 0});
  for (const auto& b : moved) seq.push_back(b);
  std::vector<int> depth(n, 0);
  for (auto& b : seq) {
    b.column = std::max(depth[b.mode], depth[b.mode + 1]);
    depth[b.mode] = depth[b.mode + 1] = b.column + 1;
    out.num_columns = std::max(out.num_columns, b.column + 1);
    b.phi = detail::wrap_phase(b.phi);
    if ((b.block() - Eigen::Matrix2cd::Identity()).cwiseAbs().maxCoeff() < 1e-14) continue;
    out.splitters.push_back(b);
  }
  out.output_phases.resize(n);
  for (int i = 0; i < n; ++i) out.output_phases[i] = detail::wrap_phase(std::arg(d[i]));
  if ((out.compose() - u_in).cwiseAbs().maxCoeff() > 1e-8)
    throw NumericalError("decompose_interferometer: recomposition failed");
  return out;
}

struct Segment {
  enum class Kind { Passive, Loss };
  Kind kind = Kind::Passive;
  CMat unitary;  // Passive only
  Vec etas;      // Loss only
  std::string label;
};

// Loss placement around an interferometer. internal has one eta vector per mesh
// column; an empty internal list keeps U as one lumped block.
struct LossModel {
  int num_modes = 0;
  Vec pre;
  std::vector<Vec> internal;
  Vec post;
  CMat unitary;  // U the segments were realized for
  std::vector<Segment> segments;

  // Ranged draws keep their provenance.
  bool sampled = false;
  std::uint64_t seed = 0;
};

inline void check_etas(const Vec& e, int m, const char* what) {
  if (e.size() != m) throw SpecError(std::string("loss model: wrong length for ") + what);
  for (Eigen::Index i = 0; i < e.size(); ++i)
    if (!(e[i] >= 0.0 && e[i] <= 1.0))
      throw SpecError(std::string("loss model: eta outside [0,1] in ") + what);
}

inline LossModel build_loss_model(const CMat& u, const Vec& pre, const std::vector<Vec>& internal,
                                  const Vec& post) {
  const int m = static_cast<int>(u.rows());
  check_etas(pre, m, "pre");
  check_etas(post, m, "post");
  LossModel lm;
  lm.num_modes = m;
  lm.pre = pre;
  lm.internal = internal;
  lm.post = post;
  lm.unitary = u;
  lm.segments.push_back({Segment::Kind::Loss, {}, pre, "pre"});
  if (internal.empty()) {
    lm.segments.push_back({Segment::Kind::Passive, u, {}, "interferometer"});
  } else {
    const MeshDecomposition mesh = decompose_interferometer(u);
    if (static_cast<int>(internal.size()) != mesh.num_columns)
      throw SpecError("loss model: need one internal eta vector per mesh column (" +
                      std::to_string(mesh.num_columns) + ")");
    for (const auto& e : internal) check_etas(e, m, "internal");
    for (const auto& b : mesh.splitters) {
      lm.segments.push_back({Segment::Kind::Passive, b.embed(m), {}, "splitter"});
      Vec e = Vec::Ones(m);
      e[b.mode] = internal[b.column][b.mode];
      e[b.mode + 1] = internal[b.column][b.mode + 1];
      lm.segments.push_back({Segment::Kind::Loss, {}, e, "internal"});
    }
    CVec ph(m);
    for (int i = 0; i < m; ++i) ph[i] = std::polar(1.0, mesh.output_phases[i]);
    lm.segments.push_back({Segment::Kind::Passive, CMat(ph.asDiagonal()), {}, "phases"});
  }
  lm.segments.push_back({Segment::Kind::Loss, {}, post, "post"});
  return lm;
}

inline LossModel lossless_model(const CMat& u) {
  const int m = static_cast<int>(u.rows());
  return build_loss_model(u, Vec::Ones(m), {}, Vec::Ones(m));
}

inline LossModel uniform_loss_model(const CMat& u, double eta_pre, double eta_post) {
  const int m = static_cast<int>(u.rows());
  return build_loss_model(u, Vec::Constant(m, eta_pre), {}, Vec::Constant(m, eta_post));
}

struct LossRanges {
  std::array<double, 2> pre{1.0, 1.0};
  std::array<double, 2> internal{1.0, 1.0};
  std::array<double, 2> post{1.0, 1.0};
  bool mesh = true;
};

// Streams: 1 pre, 2 internal (column-major), 3 post.
inline LossModel sample_loss_model(const CMat& u, const LossRanges& r, std::uint64_t seed) {
  const int m = static_cast<int>(u.rows());
  CounterRng pre_rng{seed, 1}, int_rng{seed, 2}, post_rng{seed, 3};
  Vec pre(m), post(m);
  for (int i = 0; i < m; ++i) pre[i] = pre_rng.uniform(r.pre[0], r.pre[1]);
  for (int i = 0; i < m; ++i) post[i] = post_rng.uniform(r.post[0], r.post[1]);
  std::vector<Vec> internal;
  if (r.mesh && m > 1) {
    const int cols = decompose_interferometer(u).num_columns;
    for (int c = 0; c < cols; ++c) {
      Vec e(m);
      for (int i = 0; i < m; ++i) e[i] = int_rng.uniform(r.internal[0], r.internal[1]);
      internal.push_back(e);
    }
  }
  LossModel lm = build_loss_model(u, pre, internal, post);
  lm.sampled = true;
  lm.seed = seed;
  return lm;
}

// Same loss placement, realized for another interferometer.
inline LossModel with_unitary(const LossModel& lm, const CMat& u) {
  if (lm.unitary.size() == u.size() && (lm.unitary - u).cwiseAbs().maxCoeff() == 0.0) return lm;
  LossModel out = build_loss_model(u, lm.pre, lm.internal, lm.post);
  out.sampled = lm.sampled;
  out.seed = lm.seed;
  return out;
}

inline GaussianState apply_segments(GaussianState s, const std::vector<Segment>& segs) {
  for (const auto& seg : segs) {
    if (seg.kind == Segment::Kind::Loss) {
      s = apply_loss_layer(s, seg.etas);
    } else {
      s = apply_symplectic(s, passive_symplectic(seg.unitary), Vec::Zero(2 * s.num_modes));
    }
  }
  return s;
}

inline GaussianState propagate(const GbsSpec& spec, const LossModel& loss) {
  validate(spec);
  if (loss.num_modes != spec.modes()) throw SpecError("propagate: mode count mismatch");
  const LossModel lm = with_unitary(loss, spec.unitary);
  return apply_segments(prepare_inputs(spec.squeezing, spec.displacement, spec.thermal), lm.segments);
}

// Linear map on mode amplitudes <a> realized by the whole network.
inline CMat amplitude_transfer(const LossModel& lm) {
  CMat t = CMat::Identity(lm.num_modes, lm.num_modes);
  for (const auto& seg : lm.segments) {
    if (seg.kind == Segment::Kind::Passive) {
      t = seg.unitary * t;
    } else {
      t = seg.etas.cwiseSqrt().cast<cplx>().asDiagonal() * t;
    }
  }
  return t;
}

// Output intensity per unit intensity injected in each input mode.
inline Vec effective_transmissivity(const LossModel& lm) {
  const CMat t = amplitude_transfer(lm);
  Vec e(lm.num_modes);
  for (int i = 0; i < lm.num_modes; ++i) e[i] = t.col(i).squaredNorm();
  return e;
}

// Passive part with losses replaced by identity.
inline CMat passive_product(const LossModel& lm) {
  CMat u = CMat::Identity(lm.num_modes, lm.num_modes);
  for (const auto& seg : lm.segments)
    if (seg.kind == Segment::Kind::Passive) u = seg.unitary * u;
  return u;
}

}  // namespace lossmit
