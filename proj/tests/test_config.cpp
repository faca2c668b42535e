#include <gtest/gtest.h>

#include "bdqsd/config.hpp"
#include "bdqsd/error.hpp"
#include "test_support.hpp"

using namespace bdqsd;

namespace {

std::string message_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ValidationError& e) {
    return e.what();
  }
  return "";
}

constexpr const char* kLogistic = R"(
[model]
r = 1
gamma = 1
b = 1
d = 0
c = 1
)";

}  // namespace

TEST(Config, MinimalLogisticDefaults) {
  const auto cfg = parse_config(kLogistic);
  EXPECT_EQ(cfg.r, 1u);
  EXPECT_EQ(cfg.tol, 1e-12);
  EXPECT_EQ(cfg.max_iter, 1000000u);
  EXPECT_FALSE(cfg.n_trunc.has_value());
  EXPECT_EQ(cfg.seed, 42u);
  EXPECT_EQ(cfg.initials, (std::vector<State>{{1}}));
  const auto echo = cfg.echo();
  EXPECT_TRUE(echo.contains("solver"));
  const auto model = build_model(cfg);
  EXPECT_EQ(model.rates().family, RateFamily::kConstant);
  EXPECT_EQ(total_rate(model, State{1}), 2.0);
}

TEST(Config, RejectsGammaZero) {
  const auto msg = message_of("[model]\nr = 1\ngamma = 0\nb = 1\nd = 0\nc = 1\n");
  EXPECT_NE(msg.find("model.gamma"), std::string::npos) << msg;
}

TEST(Config, RejectsBeta2AboveOne) {
  const auto msg = message_of(
      "[model]\nr = 1\ngamma = 1\nfamily = power-law\nb = 1\nd = 0\nc = 1\nbeta2 = 1.5\n");
  EXPECT_NE(msg.find("model.beta2"), std::string::npos) << msg;
}

TEST(Config, RejectsUnknownKeyAndSection) {
  auto msg = message_of(std::string(kLogistic) + "colour = blue\n");
  EXPECT_NE(msg.find("model.colour"), std::string::npos) << msg;
  msg = message_of(std::string(kLogistic) + "[plotting]\nstyle = x\n");
  EXPECT_NE(msg.find("plotting"), std::string::npos) << msg;
}

TEST(Config, ParseErrorNamesLine) {
  const auto msg = message_of("[model]\nr = 1\n[broken\n");
  EXPECT_NE(msg.find("line 3"), std::string::npos) << msg;
}

TEST(Config, RejectsZeroIntraCompetition) {
  const auto cfg = parse_config("[model]\nr = 1\ngamma = 1\nb = 1\nd = 0\nc = 0\n");
  EXPECT_THROW(build_model(cfg), ValidationError);
}

TEST(Config, RejectsBadLitterLaw) {
  const auto text = std::string(kLogistic) +
                    "[extensions]\nlitter_sizes = 1, 2\nlitter_probs = 0.5, 0.4\n";
  EXPECT_THROW(build_model(parse_config(text)), ValidationError);
}

TEST(Config, TruncationBelowDimension) {
  const auto msg = message_of(
      "[model]\nr = 2\ngamma = 1\nb = 1, 1\nd = 0, 0\nc = 1, 0; 0, 1\n[truncation]\nN = 1\n");
  EXPECT_NE(msg.find("truncation.N"), std::string::npos) << msg;
}

TEST(Config, MatrixRowsAndFractions) {
  const auto cfg = parse_config(
      "[model]\nr = 2\ngamma = 1/2\nb = 1, 2\nd = 0, 0\nc = 1, 0.5; 0.25, 2\n"
      "[converge]\ninitials = 1,1; 3,4\n");
  EXPECT_EQ(cfg.gamma, 0.5);
  EXPECT_EQ(cfg.c, (std::vector<double>{1, 0.5, 0.25, 2}));
  EXPECT_EQ(cfg.initials, (std::vector<State>{{1, 1}, {3, 4}}));
}

TEST(Config, RejectsBoundaryInitial) {
  const auto msg = message_of(std::string(kLogistic) + "[converge]\ninitials = 0\n");
  EXPECT_NE(msg.find("converge.initials"), std::string::npos) << msg;
}

TEST(Config, ShippedConfigsLoad) {
  for (const char* name : {"ref2d.cfg", "logistic1d.cfg", "neutral3d.cfg", "catastrophe1d.cfg",
                           "multibirth1d.cfg"}) {
    EXPECT_NO_THROW(bdqsd::testing::config_model(name)) << name;
  }
}

TEST(Config, MissingFile) {
  EXPECT_THROW(load_config("/nonexistent/bdqsd.cfg"), IoError);
}

TEST(Config, TabulatedFamily) {
  const auto dir = std::filesystem::temp_directory_path() / "bdqsd_table_test";
  std::filesystem::create_directories(dir);
  std::string csv = "n_1,b_1,d_1,c_1_1\n";
  for (int n = 1; n <= 4; ++n) csv += std::to_string(n) + ",2,0.5,1\n";
  write_text(dir / "rates.csv", csv);
  const auto cfg = parse_config(
      "[model]\nr = 1\ngamma = 1\nfamily = tabulated\ntable = rates.csv\n", dir);
  const auto model = build_model(cfg);
  EXPECT_DOUBLE_EQ(total_rate(model, State{2}), 2 * 2.0 + 2 * (0.5 + 2.0));
  // beyond the box the nearest box point is used
  EXPECT_DOUBLE_EQ(model.birth(State{9}, 0), 2.0);
}
