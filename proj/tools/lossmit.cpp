// lossmit: run experiment configs and the acceptance battery.
#include "lossmit/acceptance.hpp"
#include "lossmit/config.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace fs = std::filesystem;
using namespace lossmit;
using ojson = nlohmann::ordered_json;

namespace {

struct Overrides {
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::optional<int> cutoff;
  std::optional<int> threads;
  std::optional<std::string> format;
};

// Where the run currently is, for error reports.
std::string g_stage = "startup";

std::string timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[64];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  return buf;
}

std::string g12(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

std::string f4(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

// A table: labelled rows of numbers. The first line of each output file is the
// timestamp so reruns differ only there.
struct Table {
  std::string title;
  std::vector<std::string> columns;  // after "label"
  std::vector<std::string> labels;
  std::vector<std::vector<double>> rows;
  std::vector<std::string> notes;  // extra summary lines for stdout
};

void print_table(const Table& t, const std::vector<std::size_t>& rounded = {}) {
  std::cout << "# " << t.title << "\n";
  std::cout << "label";
  for (const auto& c : t.columns) std::cout << "\t" << c;
  for (std::size_t k : rounded) std::cout << "\t" << t.columns[k] << "_4dp";
  std::cout << "\n";
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    std::cout << (t.labels[i].empty() ? "-" : t.labels[i]);
    for (double v : t.rows[i]) std::cout << "\t" << g12(v);
    for (std::size_t k : rounded) std::cout << "\t" << f4(t.rows[i][k]);
    std::cout << "\n";
  }
  for (const auto& n : t.notes) std::cout << n << "\n";
}

void write_table(const Table& t, const ExperimentConfig& c) {
  fs::create_directories(c.output_dir);
  const fs::path path = fs::path(c.output_dir) / (c.name + "." + c.format);
  std::ofstream os(path);
  if (!os) throw SpecError("output: cannot write '" + path.string() + "'");
  if (c.format == "csv") {
    os << "# generated " << timestamp() << "\n";
    os << "label";
    for (const auto& col : t.columns) os << "," << col;
    os << "\n";
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
      os << t.labels[i];
      for (double v : t.rows[i]) os << "," << g12(v);
      os << "\n";
    }
  } else {
    ojson j;
    j["generated"] = timestamp();
    j["title"] = t.title;
    j["columns"] = t.columns;
    ojson rows = ojson::array();
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
      ojson r;
      r["label"] = t.labels[i];
      for (std::size_t k = 0; k < t.columns.size(); ++k) r[t.columns[k]] = std::stod(g12(t.rows[i][k]));
      rows.push_back(r);
    }
    j["rows"] = rows;
    os << j.dump(1) << "\n";
  }
  std::ofstream(fs::path(c.output_dir) / (c.name + ".resolved.yaml")) << serialize(c);
  std::cerr << "wrote " << path.string() << "\n";
}

Table run_schemes(const ExperimentConfig& c) {
  PndOptions po;
  po.cutoff = c.cutoff;
  po.threads = c.threads;
  g_stage = "loss model";
  const LossModel loss = build(c.loss, c.target.unitary);
  g_stage = "target distribution";
  const TargetContext t = make_target(c.target, po);
  SchemeOptions so;
  so.ansatz = c.ansatz;
  so.minimize.optimize_unitary = c.optimize_unitary;
  so.minimize.search.threads = c.threads;
  so.minimize.pnd.threads = c.threads;
  so.covariance.optimize_unitary = c.optimize_unitary;
  so.pnd.threads = c.threads;
  Table tab;
  tab.title = c.name + ": delta per scheme (cutoff " + std::to_string(t.pnd.cutoff) + ")";
  tab.columns = {"delta", "uncertainty", "flagged"};
  for (Scheme s : c.schemes) {
    g_stage = "scheme " + to_string(s);
    const MitigationResult r = apply_scheme(s, t, loss, so);
    tab.labels.push_back(to_string(s));
    tab.rows.push_back({r.delta, r.delta_uncertainty, r.flagged ? 1.0 : 0.0});
  }
  return tab;
}

Table run_study(const ExperimentConfig& c) {
  const StudyConfig& st = *c.study;
  Table tab;
  tab.title = c.name + ": " + st.name;
  g_stage = "study " + st.name;
  if (st.name == "PHASE_NOISE") {
    const MoleculeFixture fx{c.name, c.target, c.frequencies, ""};
    const LossModel loss = build(c.loss, c.target.unitary);
    const auto lv = phase_noise_study(fx, loss, st.sigmas, st.samples, c.seed, c.threads);
    tab.columns = {"sigma", "mean_uncorrected", "std_uncorrected", "mean_corrected", "std_corrected"};
    for (const auto& l : lv) {
      tab.labels.push_back("");
      tab.rows.push_back({l.sigma, l.mean_uncorrected, l.std_uncorrected, l.mean_corrected, l.std_corrected});
    }
    return tab;
  }
  if (st.name == "MANIFOLD") {
    PndOptions po;
    po.cutoff = c.cutoff;
    const LossModel loss = build(c.loss, c.target.unitary);
    const TargetContext t = make_target(c.target, po);
    ManifoldOptions mo;
    mo.samples = st.samples;
    mo.seed = c.seed;
    mo.threads = c.threads;
    const ManifoldStats ms = sample_vacuum_manifold(t, loss, mo);
    tab.columns = {"delta"};
    for (double d : ms.deltas) {
      tab.labels.push_back("");
      tab.rows.push_back({d});
    }
    tab.notes.push_back("# mean " + g12(ms.mean) + " std " + g12(ms.stddev) + " min " + g12(ms.min) + " max " +
                        g12(ms.max) + " rejected " + std::to_string(ms.rejected));
    return tab;
  }
  SweepParams p = st.sweep;
  p.threads = c.threads;
  const Dataset d = sweep_single_mode(study_from_string(st.name), p);
  tab.columns = d.columns;
  tab.labels = d.labels;
  tab.rows = d.rows;
  return tab;
}

int cmd_run(const std::string& cfg_path, const Overrides& ov) {
  g_stage = "config";
  ExperimentConfig c = load_config(cfg_path);
  if (ov.out) c.output_dir = *ov.out;
  if (ov.seed) {
    c.seed = *ov.seed;
    if (c.loss.kind == LossConfig::Kind::RANGED) c.loss.seed = *ov.seed;
  }
  if (ov.cutoff) c.cutoff = *ov.cutoff;
  if (ov.threads) c.threads = *ov.threads;
  if (ov.format) c.format = *ov.format;
  if (c.format != "csv" && c.format != "json") throw SpecError("config: format must be csv or json");
  default_threads() = c.threads;

  if (c.study) {
    const Table tab = run_study(c);
    print_table(tab);
    g_stage = "output";
    write_table(tab, c);
  } else {
    const Table tab = run_schemes(c);
    print_table(tab, {0});
    g_stage = "output";
    write_table(tab, c);
  }
  return 0;
}

int cmd_verify(const std::string& filter, const Overrides& ov) {
  g_stage = "verify";
  acceptance::Options o;
  o.threads = ov.threads.value_or(0);
  default_threads() = o.threads;
  const auto reps = acceptance::run(filter, o);
  int failed = 0;
  for (const auto& r : reps) failed += !r.pass;
  if (reps.empty()) {
    std::cerr << "verify: no criterion matches '" << filter << "'\n";
    return 2;
  }
  std::printf("%zu criteria, %d failed\n", reps.size(), failed);
  return failed ? 1 : 0;
}

int report(const char* kind, int code, const std::string& msg) {
  const auto colon = msg.find(':');
  ojson j;
  j["error"] = kind;
  j["stage"] = g_stage;
  j["operation"] = colon == std::string::npos ? g_stage : msg.substr(0, colon);
  j["message"] = msg;
  j["exit_code"] = code;
  std::cerr << j.dump() << "\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Loss mitigation for Gaussian boson sampling"};
  app.require_subcommand(1);
  Overrides ov;
  app.add_option("--out", ov.out, "output directory");
  app.add_option("--seed", ov.seed, "RNG seed");
  app.add_option("--cutoff", ov.cutoff, "total-photon cutoff for the target distribution");
  app.add_option("--threads", ov.threads, "worker thread cap (0: all cores)");
  app.add_option("--format", ov.format, "output format")->check(CLI::IsMember({"csv", "json"}));

  std::string cfg, filter;
  auto* run = app.add_subcommand("run", "run an experiment config");
  run->add_option("config", cfg, "config file")->required();
  run->fallthrough();
  auto* verify = app.add_subcommand("verify", "run the acceptance battery");
  verify->add_option("--filter", filter, "criterion id, tag or name substring");
  verify->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (*run) return cmd_run(cfg, ov);
    return cmd_verify(filter, ov);
  } catch (const SpecError& e) {
    return report("schema", 2, e.what());
  } catch (const YAML::Exception& e) {
    return report("schema", 2, e.what());
  } catch (const NumericalError& e) {
    return report("numerical", 3, e.what());
  } catch (const std::exception& e) {
    return report("internal", 1, e.what());
  }
}
