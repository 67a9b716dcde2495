#pragma once

#include "lossmit/vibronic.hpp"

#include <yaml-cpp/yaml.h>

#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace lossmit {

struct LossConfig {
  enum class Kind { EXPLICIT, UNIFORM, RANGED };
  Kind kind = Kind::UNIFORM;
  double uniform_pre = 1.0, uniform_post = 1.0;
  Vec pre, post;
  std::vector<Vec> internal;
  LossRanges ranges;
  std::uint64_t seed = 0;

  bool operator==(const LossConfig& o) const {
    if (kind != o.kind) return false;
    switch (kind) {
      case Kind::UNIFORM: return uniform_pre == o.uniform_pre && uniform_post == o.uniform_post;
      case Kind::EXPLICIT:
        if (internal.size() != o.internal.size()) return false;
        for (std::size_t i = 0; i < internal.size(); ++i)
          if (internal[i] != o.internal[i]) return false;
        return pre == o.pre && post == o.post;
      case Kind::RANGED:
        return ranges.pre == o.ranges.pre && ranges.internal == o.ranges.internal && ranges.post == o.ranges.post &&
               ranges.mesh == o.ranges.mesh && seed == o.seed;
    }
    return false;
  }
};

inline LossModel build(const LossConfig& c, const CMat& u) {
  switch (c.kind) {
    case LossConfig::Kind::UNIFORM: return uniform_loss_model(u, c.uniform_pre, c.uniform_post);
    case LossConfig::Kind::EXPLICIT: return build_loss_model(u, c.pre, c.internal, c.post);
    case LossConfig::Kind::RANGED: return sample_loss_model(u, c.ranges, c.seed);
  }
  throw SpecError("loss: unknown kind");
}

struct StudyConfig {
  std::string name;  // a sweep Study, PHASE_NOISE or MANIFOLD
  SweepParams sweep;
  int samples = 1000;
  std::vector<double> sigmas;  // PHASE_NOISE, radians
};

struct ExperimentConfig {
  std::string name = "experiment";
  GbsSpec target = GbsSpec::identity(1);
  Vec frequencies;
  LossConfig loss;
  std::vector<Scheme> schemes;
  Ansatz ansatz = Ansatz::SQ_VAC;
  bool optimize_unitary = false;
  std::optional<StudyConfig> study;
  int cutoff = -1;
  std::string output_dir = "out";
  std::string format = "csv";
  std::uint64_t seed = 1;
  int threads = 0;
};

namespace detail {

[[noreturn]] inline void schema(const std::string& what) { throw SpecError("config: " + what); }

inline cplx parse_complex(const YAML::Node& n, const std::string& where) {
  if (n.IsScalar()) return {n.as<double>(), 0.0};
  if (n.IsSequence() && n.size() == 2) return {n[0].as<double>(), n[1].as<double>()};
  schema(where + ": expected a number or [re, im]");
}

inline CVec parse_cvec(const YAML::Node& n, const std::string& where) {
  if (!n.IsSequence()) schema(where + ": expected a list");
  CVec v(n.size());
  for (std::size_t i = 0; i < n.size(); ++i) v[i] = parse_complex(n[i], where);
  return v;
}

inline Vec parse_vec(const YAML::Node& n, const std::string& where) {
  if (!n.IsSequence()) schema(where + ": expected a list of numbers");
  Vec v(n.size());
  for (std::size_t i = 0; i < n.size(); ++i) v[i] = n[i].as<double>();
  return v;
}

inline CMat parse_cmat(const YAML::Node& n, const std::string& where) {
  if (!n.IsSequence() || n.size() == 0) schema(where + ": expected a list of rows");
  const std::size_t m = n.size();
  CMat u(m, m);
  for (std::size_t i = 0; i < m; ++i) {
    if (!n[i].IsSequence() || n[i].size() != m) schema(where + ": matrix must be square");
    for (std::size_t j = 0; j < m; ++j) u(i, j) = parse_complex(n[i][j], where);
  }
  return u;
}

inline std::array<double, 2> parse_range(const YAML::Node& n, const std::string& where) {
  if (!n) return {1.0, 1.0};
  if (!n.IsSequence() || n.size() != 2) schema(where + ": expected [lo, hi]");
  std::array<double, 2> r{n[0].as<double>(), n[1].as<double>()};
  if (!(0.0 <= r[0] && r[0] <= r[1] && r[1] <= 1.0)) schema(where + ": need 0 <= lo <= hi <= 1");
  return r;
}

inline void check_keys(const YAML::Node& n, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!n.IsMap()) schema(where + ": expected a mapping");
  for (const auto& kv : n) {
    const std::string k = kv.first.as<std::string>();
    bool ok = false;
    for (const char* a : allowed) ok = ok || k == a;
    if (!ok) schema(where + ": unknown key '" + k + "'");
  }
}

inline YAML::Node emit_complex(cplx z) {
  YAML::Node n;
  n.SetStyle(YAML::EmitterStyle::Flow);
  n.push_back(z.real());
  n.push_back(z.imag());
  return n;
}

inline YAML::Node emit_cvec(const CVec& v) {
  YAML::Node n;
  n.SetStyle(YAML::EmitterStyle::Flow);
  for (Eigen::Index i = 0; i < v.size(); ++i) n.push_back(emit_complex(v[i]));
  return n;
}

inline YAML::Node emit_vec(const Vec& v) {
  YAML::Node n;
  n.SetStyle(YAML::EmitterStyle::Flow);
  for (Eigen::Index i = 0; i < v.size(); ++i) n.push_back(v[i]);
  return n;
}

inline YAML::Node emit_range(const std::array<double, 2>& r) {
  YAML::Node n;
  n.SetStyle(YAML::EmitterStyle::Flow);
  n.push_back(r[0]);
  n.push_back(r[1]);
  return n;
}

inline MoleculeFixture named_fixture(const std::string& name) {
  if (name == "tropolone") return tropolone();
  if (name == "so2") return sulfur_dioxide();
  if (name == "formic_acid") return formic_acid();
  schema("unknown fixture '" + name + "'");
}

}  // namespace detail

inline ExperimentConfig parse_config(const YAML::Node& root) {
  using namespace detail;
  ExperimentConfig c;
  try {
    check_keys(root,
               {"name", "target", "loss", "schemes", "ansatz", "optimize_unitary", "study", "cutoff", "output", "seed",
                "threads"},
               "top level");
    if (root["name"]) c.name = root["name"].as<std::string>();
    if (root["seed"]) c.seed = root["seed"].as<std::uint64_t>();
    if (root["threads"]) c.threads = root["threads"].as<int>();
    if (root["cutoff"]) c.cutoff = root["cutoff"].as<int>();

    const YAML::Node t = root["target"];
    if (!t) schema("missing 'target'");
    check_keys(t, {"fixture", "modes", "squeezing", "displacement", "unitary", "two_mode", "thermal", "frequencies"},
               "target");
    int m = 0;
    if (t["fixture"]) {
      const MoleculeFixture f = named_fixture(t["fixture"].as<std::string>());
      c.target = f.spec;
      c.frequencies = f.frequencies;
      m = f.spec.modes();
    }
    if (t["squeezing"]) {
      const CVec xi = parse_cvec(t["squeezing"], "target.squeezing");
      if (m && xi.size() != m) schema("target.squeezing: wrong length");
      m = static_cast<int>(xi.size());
      if (!t["fixture"]) c.target = GbsSpec::identity(m);
      c.target.squeezing = xi;
    }
    if (t["modes"]) {
      const int mm = t["modes"].as<int>();
      if (m && mm != m) schema("target.modes disagrees with the other fields");
      if (!m) c.target = GbsSpec::identity(mm);
      m = mm;
    }
    if (!m) schema("target: give a fixture, squeezing or modes");
    if (t["displacement"]) c.target.displacement = parse_cvec(t["displacement"], "target.displacement");
    if (t["unitary"] && t["two_mode"]) schema("target: give either unitary or two_mode");
    if (t["unitary"]) c.target.unitary = parse_cmat(t["unitary"], "target.unitary");
    if (t["two_mode"]) {
      check_keys(t["two_mode"], {"theta", "gamma"}, "target.two_mode");
      if (m != 2) schema("target.two_mode needs two modes");
      c.target.unitary = two_mode_unitary(t["two_mode"]["theta"].as<double>(0.0), t["two_mode"]["gamma"].as<double>(0.0));
    }
    if (t["thermal"]) c.target.thermal = parse_vec(t["thermal"], "target.thermal");
    if (t["frequencies"]) c.frequencies = parse_vec(t["frequencies"], "target.frequencies");
    validate(c.target);
    MoleculeFixture check{c.name, c.target, c.frequencies, ""};
    validate(check);

    const YAML::Node l = root["loss"];
    if (!l) schema("missing 'loss'");
    check_keys(l, {"uniform", "pre", "internal", "post", "ranges", "seed", "mesh"}, "loss");
    if (l["uniform"]) {
      check_keys(l["uniform"], {"pre", "post"}, "loss.uniform");
      c.loss.kind = LossConfig::Kind::UNIFORM;
      c.loss.uniform_pre = l["uniform"]["pre"].as<double>(1.0);
      c.loss.uniform_post = l["uniform"]["post"].as<double>(1.0);
    } else if (l["ranges"]) {
      check_keys(l["ranges"], {"pre", "internal", "post"}, "loss.ranges");
      c.loss.kind = LossConfig::Kind::RANGED;
      c.loss.ranges.pre = parse_range(l["ranges"]["pre"], "loss.ranges.pre");
      c.loss.ranges.internal = parse_range(l["ranges"]["internal"], "loss.ranges.internal");
      c.loss.ranges.post = parse_range(l["ranges"]["post"], "loss.ranges.post");
      c.loss.ranges.mesh = l["mesh"].as<bool>(true);
      c.loss.seed = l["seed"] ? l["seed"].as<std::uint64_t>() : c.seed;
    } else {
      c.loss.kind = LossConfig::Kind::EXPLICIT;
      c.loss.pre = l["pre"] ? parse_vec(l["pre"], "loss.pre") : Vec::Ones(m);
      c.loss.post = l["post"] ? parse_vec(l["post"], "loss.post") : Vec::Ones(m);
      if (l["internal"]) {
        if (!l["internal"].IsSequence()) schema("loss.internal: expected a list of columns");
        for (const auto& col : l["internal"]) c.loss.internal.push_back(parse_vec(col, "loss.internal"));
      }
    }
    build(c.loss, c.target.unitary);  // range and shape checks up front

    if (root["schemes"]) {
      if (!root["schemes"].IsSequence()) schema("schemes: expected a list");
      for (const auto& s : root["schemes"]) c.schemes.push_back(scheme_from_string(s.as<std::string>()));
    }
    if (root["ansatz"]) c.ansatz = ansatz_from_string(root["ansatz"].as<std::string>());
    if (root["optimize_unitary"]) c.optimize_unitary = root["optimize_unitary"].as<bool>();

    if (root["study"]) {
      const YAML::Node s = root["study"];
      check_keys(s,
                 {"name", "eta", "etas", "xi", "alpha", "phi", "max_photons", "xi_max", "points", "eta_min", "xi_vac_max",
                  "xi_target", "alpha_target", "alpha_max", "rel_tol", "samples", "sigmas"},
                 "study");
      StudyConfig st;
      st.name = s["name"].as<std::string>("");
      if (st.name != "PHASE_NOISE" && st.name != "MANIFOLD") study_from_string(st.name);
      SweepParams& p = st.sweep;
      p.eta = s["eta"].as<double>(p.eta);
      if (s["etas"]) {
        const Vec e = parse_vec(s["etas"], "study.etas");
        p.etas.assign(e.data(), e.data() + e.size());
      }
      p.xi = s["xi"].as<double>(p.xi);
      p.alpha = s["alpha"].as<double>(p.alpha);
      p.phi = s["phi"].as<double>(p.phi);
      p.max_photons = s["max_photons"].as<int>(p.max_photons);
      p.xi_max = s["xi_max"].as<double>(p.xi_max);
      p.points = s["points"].as<int>(p.points);
      p.eta_min = s["eta_min"].as<double>(p.eta_min);
      p.xi_vac_max = s["xi_vac_max"].as<double>(p.xi_vac_max);
      p.xi_target = s["xi_target"].as<double>(p.xi_target);
      p.alpha_target = s["alpha_target"].as<double>(p.alpha_target);
      p.alpha_max = s["alpha_max"].as<double>(p.alpha_max);
      p.rel_tol = s["rel_tol"].as<double>(p.rel_tol);
      st.samples = s["samples"].as<int>(st.samples);
      if (s["sigmas"]) {
        const Vec v = parse_vec(s["sigmas"], "study.sigmas");
        st.sigmas.assign(v.data(), v.data() + v.size());
      } else {
        st.sigmas = default_phase_noise_levels();
      }
      if (st.samples < 1) schema("study.samples must be >= 1");
      c.study = st;
    }
    if (!c.study && c.schemes.empty()) schema("give 'schemes' or a 'study'");

    if (root["output"]) {
      check_keys(root["output"], {"dir", "format"}, "output");
      c.output_dir = root["output"]["dir"].as<std::string>(c.output_dir);
      c.format = root["output"]["format"].as<std::string>(c.format);
    }
    if (c.format != "csv" && c.format != "json") schema("output.format must be csv or json");
  } catch (const YAML::Exception& e) {
    schema(e.what());
  }
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  YAML::Node root;
  try {
    root = YAML::LoadFile(path);
  } catch (const YAML::BadFile&) {
    throw SpecError("config: cannot read '" + path + "'");
  } catch (const YAML::Exception& e) {
    throw SpecError(std::string("config: ") + e.what());
  }
  return parse_config(root);
}

// Fully resolved form: fixtures expand to explicit parameters.
inline std::string serialize(const ExperimentConfig& c) {
  using namespace detail;
  YAML::Node root;
  root["name"] = c.name;
  YAML::Node t;
  t["squeezing"] = emit_cvec(c.target.squeezing);
  t["displacement"] = emit_cvec(c.target.displacement);
  YAML::Node u;
  for (Eigen::Index i = 0; i < c.target.unitary.rows(); ++i) u.push_back(emit_cvec(c.target.unitary.row(i).transpose()));
  t["unitary"] = u;
  if (c.target.thermal.size()) t["thermal"] = emit_vec(c.target.thermal);
  if (c.frequencies.size()) t["frequencies"] = emit_vec(c.frequencies);
  root["target"] = t;
  YAML::Node l;
  switch (c.loss.kind) {
    case LossConfig::Kind::UNIFORM:
      l["uniform"]["pre"] = c.loss.uniform_pre;
      l["uniform"]["post"] = c.loss.uniform_post;
      break;
    case LossConfig::Kind::EXPLICIT:
      l["pre"] = emit_vec(c.loss.pre);
      l["post"] = emit_vec(c.loss.post);
      if (!c.loss.internal.empty()) {
        YAML::Node in;
        for (const auto& col : c.loss.internal) in.push_back(emit_vec(col));
        l["internal"] = in;
      }
      break;
    case LossConfig::Kind::RANGED:
      l["ranges"]["pre"] = emit_range(c.loss.ranges.pre);
      l["ranges"]["internal"] = emit_range(c.loss.ranges.internal);
      l["ranges"]["post"] = emit_range(c.loss.ranges.post);
      l["mesh"] = c.loss.ranges.mesh;
      l["seed"] = c.loss.seed;
      break;
  }
  root["loss"] = l;
  if (!c.schemes.empty()) {
    YAML::Node s;
    s.SetStyle(YAML::EmitterStyle::Flow);
    for (Scheme k : c.schemes) s.push_back(to_string(k));
    root["schemes"] = s;
  }
  root["ansatz"] = to_string(c.ansatz);
  root["optimize_unitary"] = c.optimize_unitary;
  if (c.study) {
    const StudyConfig& st = *c.study;
    const SweepParams& p = st.sweep;
    YAML::Node s;
    s["name"] = st.name;
    s["eta"] = p.eta;
    s["etas"] = emit_vec(Eigen::Map<const Vec>(p.etas.data(), p.etas.size()));
    s["xi"] = p.xi;
    s["alpha"] = p.alpha;
    s["phi"] = p.phi;
    s["max_photons"] = p.max_photons;
    s["xi_max"] = p.xi_max;
    s["points"] = p.points;
    s["eta_min"] = p.eta_min;
    s["xi_vac_max"] = p.xi_vac_max;
    s["xi_target"] = p.xi_target;
    s["alpha_target"] = p.alpha_target;
    s["alpha_max"] = p.alpha_max;
    s["rel_tol"] = p.rel_tol;
    s["samples"] = st.samples;
    s["sigmas"] = emit_vec(Eigen::Map<const Vec>(st.sigmas.data(), st.sigmas.size()));
    root["study"] = s;
  }
  root["cutoff"] = c.cutoff;
  root["output"]["dir"] = c.output_dir;
  root["output"]["format"] = c.format;
  root["seed"] = c.seed;
  root["threads"] = c.threads;
  YAML::Emitter e;
  e.SetDoublePrecision(17);
  e << root;
  return std::string(e.c_str()) + "\n";
}

inline bool same_config(const ExperimentConfig& a, const ExperimentConfig& b) {
  auto same_study = [](const std::optional<StudyConfig>& x, const std::optional<StudyConfig>& y) {
    if (x.has_value() != y.has_value()) return false;
    if (!x) return true;
    const SweepParams &p = x->sweep, &q = y->sweep;
    return x->name == y->name && x->samples == y->samples && x->sigmas == y->sigmas && p.eta == q.eta &&
           p.etas == q.etas && p.xi == q.xi && p.alpha == q.alpha && p.phi == q.phi && p.max_photons == q.max_photons &&
           p.xi_max == q.xi_max && p.points == q.points && p.eta_min == q.eta_min && p.xi_vac_max == q.xi_vac_max &&
           p.xi_target == q.xi_target && p.alpha_target == q.alpha_target && p.alpha_max == q.alpha_max &&
           p.rel_tol == q.rel_tol;
  };
  const bool thermal_same = a.target.thermal.size() == b.target.thermal.size() &&
                            (a.target.thermal.size() == 0 || a.target.thermal == b.target.thermal);
  return a.name == b.name && a.target.squeezing == b.target.squeezing &&
         a.target.displacement == b.target.displacement && a.target.unitary == b.target.unitary && thermal_same &&
         a.frequencies.size() == b.frequencies.size() && (a.frequencies.size() == 0 || a.frequencies == b.frequencies) &&
         a.loss == b.loss && a.schemes == b.schemes && a.ansatz == b.ansatz && a.optimize_unitary == b.optimize_unitary &&
         same_study(a.study, b.study) && a.cutoff == b.cutoff && a.output_dir == b.output_dir && a.format == b.format &&
         a.seed == b.seed && a.threads == b.threads;
}

}  // namespace lossmit
