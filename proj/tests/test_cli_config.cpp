#include <gtest/gtest.h>

#include "lossmit/config.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace lossmit;
namespace fs = std::filesystem;

namespace {

ExperimentConfig parse(const std::string& text) { return parse_config(YAML::Load(text)); }

std::string slurp(const fs::path& p) {
  std::ifstream is(p);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::string drop_first_line(const std::string& s) { return s.substr(s.find('\n') + 1); }

const char* kTwoMode = R"(
name: t
target:
  squeezing: [0.4, 0.5]
  displacement: [[0.2, 0.1], 0.0]
  two_mode: {theta: 0.8, gamma: 0.44}
loss:
  pre: [0.7, 0.6]
  post: [0.5, 0.8]
schemes: [NONE, VAC_FIXED_RATIO]
)";

}  // namespace

TEST(Config, ParsesTwoModeTarget) {
  const ExperimentConfig c = parse(kTwoMode);
  EXPECT_EQ(c.target.modes(), 2);
  EXPECT_EQ(c.target.displacement[0], cplx(0.2, 0.1));
  EXPECT_LT((c.target.unitary - two_mode_unitary(0.8, 0.44)).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_EQ(c.loss.kind, LossConfig::Kind::EXPLICIT);
  EXPECT_EQ(c.schemes.size(), 2u);
  EXPECT_EQ(c.format, "csv");
}

TEST(Config, SerializeRoundTrip) {
  for (const std::string text :
       {std::string(kTwoMode),
        std::string("target: {fixture: tropolone}\nloss: {uniform: {pre: 0.7, post: 0.7}}\nschemes: [DELTA_MIN]\n"
                    "ansatz: DISPLACED_SQ\noutput: {dir: x, format: json}\n"),
        std::string("target: {fixture: formic_acid}\nloss: {ranges: {pre: [0.5, 0.6], internal: [0.8, 0.85], "
                    "post: [0.7, 0.8]}, seed: 9}\nschemes: [NONE]\n"),
        std::string("target: {squeezing: [1.0]}\nloss: {uniform: {pre: 0.5}}\nstudy: {name: FIG4_DELTA_VS_XI, "
                    "eta: 0.5, points: 7}\n"),
        std::string("target: {fixture: tropolone}\nloss: {uniform: {pre: 0.7, post: 0.7}}\n"
                    "study: {name: PHASE_NOISE, samples: 10, sigmas: [0.0, 0.5]}\n")}) {
    const ExperimentConfig a = parse(text);
    const ExperimentConfig b = parse(serialize(a));
    EXPECT_TRUE(same_config(a, b)) << text;
    EXPECT_EQ(serialize(a), serialize(b));
  }
}

TEST(Config, SchemaErrors) {
  const char* bad[] = {
      "loss: {uniform: {pre: 0.5}}\nschemes: [NONE]\n",                                          // no target
      "target: {squeezing: [1.0]}\nschemes: [NONE]\n",                                           // no loss
      "target: {squeezing: [1.0]}\nloss: {uniform: {pre: 0.5}}\n",                               // nothing to do
      "target: {squeezing: [1.0]}\nloss: {uniform: {pre: 1.5}}\nschemes: [NONE]\n",              // eta > 1
      "target: {squeezing: [1.0]}\nloss: {uniform: {pre: 0.5}}\nschemes: [VAC]\n",               // unknown scheme
      "target: {squeezing: [1.0]}\nloss: {uniform: {pre: 0.5}}\nschemes: [NONE]\ncolour: red\n", // unknown key
      "target: {squeezing: [1.0], two_mode: {theta: 1}}\nloss: {}\nschemes: [NONE]\n",           // two_mode on 1 mode
      "target: {fixture: benzene}\nloss: {}\nschemes: [NONE]\n",
      "target: {squeezing: [1.0, 2.0], modes: 3}\nloss: {}\nschemes: [NONE]\n",
      "target: {squeezing: [1.0]}\nloss: {pre: [0.5, 0.5]}\nschemes: [NONE]\n",
      "target: {squeezing: [1.0]}\nloss: {}\nschemes: [NONE]\noutput: {format: xml}\n",
      "target: {squeezing: [1.0]}\nloss: {}\nstudy: {name: FIG9}\n",
      "target: {squeezing: [abc]}\nloss: {}\nschemes: [NONE]\n",
  };
  for (const char* b : bad) EXPECT_THROW(parse(b), SpecError) << b;
  EXPECT_THROW(load_config("/nonexistent/x.cfg"), SpecError);
}

TEST(Config, ShippedExamplesLoad) {
  for (const char* f : {"tropolone.cfg", "lossless.cfg", "fig4.cfg"})
    EXPECT_NO_THROW(load_config(std::string(LOSSMIT_EXAMPLES) + "/" + f)) << f;
}

TEST(Cli, RerunIsIdenticalApartFromTimestamp) {
  const fs::path dir = fs::temp_directory_path() / "lossmit_cli_test";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const fs::path cfg = dir / "t.cfg";
  std::ofstream(cfg) << kTwoMode;
  std::string outs[2];
  for (int k = 0; k < 2; ++k) {
    const fs::path out = dir / ("o" + std::to_string(k));
    const std::string cmd = std::string(LOSSMIT_CLI) + " run " + cfg.string() + " --out " + out.string() +
                            " --format json > " + (dir / "stdout").string() + " 2>&1";
    ASSERT_EQ(std::system(cmd.c_str()), 0) << slurp(dir / "stdout");
    outs[k] = slurp(out / "t.json");
    EXPECT_TRUE(fs::exists(out / "t.resolved.yaml"));
  }
  EXPECT_NE(outs[0].find("\"generated\""), std::string::npos);
  EXPECT_EQ(drop_first_line(drop_first_line(outs[0])), drop_first_line(drop_first_line(outs[1])));
}

TEST(Cli, ExitCodes) {
  const fs::path dir = fs::temp_directory_path() / "lossmit_cli_codes";
  fs::create_directories(dir);
  const fs::path cfg = dir / "bad.cfg";
  std::ofstream(cfg) << "target: {squeezing: [1.0]}\nloss: {}\nschemes: [NOPE]\n";
  auto code = [&](const std::string& args) {
    const int s = std::system((std::string(LOSSMIT_CLI) + " " + args + " > /dev/null 2>&1").c_str());
    return WEXITSTATUS(s);
  };
  EXPECT_EQ(code("run " + cfg.string()), 2);
  EXPECT_EQ(code("run " + (dir / "missing.cfg").string()), 2);
  EXPECT_EQ(code("run " + cfg.string() + " --format xml"), 2);
  EXPECT_EQ(code("verify --filter nothing_matches_this"), 2);
}
