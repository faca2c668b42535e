#include <gtest/gtest.h>

#include <omp.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "bdqsd/convergence.hpp"
#include "bdqsd/error.hpp"
#include "bdqsd/simulation.hpp"
#include "test_support.hpp"

using namespace bdqsd;
using bdqsd::testing::logistic_1d;

namespace {

Model death_only() {
  RateSpec spec;
  spec.birth = {0.0};
  spec.death = {1.0};
  spec.competition = {1e-9};
  return Model::unchecked(1, 1.0, spec);
}

bool same_path(const Trajectory& a, const Trajectory& b) {
  if (a.events.size() != b.events.size() || a.status != b.status ||
      a.end_time != b.end_time) {
    return false;
  }
  for (std::size_t k = 0; k < a.events.size(); ++k) {
    if (a.events[k].time != b.events[k].time || a.events[k].state != b.events[k].state) {
      return false;
    }
  }
  return true;
}

}  // namespace

TEST(SimulatePath, ZeroHorizon) {
  const auto path = simulate_path(logistic_1d(), State{3}, 0.0, RngPlan{1});
  EXPECT_TRUE(path.events.empty());
  EXPECT_EQ(path.status, PathStatus::kAlive);
}

TEST(SimulatePath, DeathOnlyAbsorbsInOneEvent) {
  const auto path = simulate_path(death_only(), State{1}, 1e6, RngPlan{5});
  ASSERT_EQ(path.events.size(), 1u);
  EXPECT_EQ(path.events[0].state, State{0});
  EXPECT_EQ(path.status, PathStatus::kAbsorbed);
  EXPECT_EQ(path.end_time, path.events[0].time);
}

TEST(SimulatePath, RegressionTrace) {
  const auto model = bdqsd::testing::config_model("ref2d.cfg");
  const auto path = simulate_path(model, State{1, 1}, 3.0, RngPlan{42}, 0);
  std::ifstream in(std::string(BDQSD_TEST_DATA) + "/ref2d_seed42_trace.csv");
  ASSERT_TRUE(in) << "fixture missing";
  std::string line;
  std::getline(in, line);
  std::size_t k = 0;
  while (std::getline(in, line)) {
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream row(line);
    double t;
    Count a, b;
    row >> t >> a >> b;
    ASSERT_LT(k, path.events.size());
    EXPECT_EQ(path.events[k].time, t) << "event " << k;
    EXPECT_EQ(path.events[k].state, (State{a, b})) << "event " << k;
    ++k;
  }
  EXPECT_EQ(k, 5u);
}

TEST(SimulatePath, TrajectoriesAreLegal) {
  const auto model = bdqsd::testing::config_model("ref2d.cfg");
  for (std::uint64_t s = 0; s < 50; ++s) {
    const auto path = simulate_path(model, State{2, 3}, 2.0, RngPlan{9}, s);
    EXPECT_NO_THROW(validate_trajectory(model, path));
    for (const auto& e : path.events) {
      if (&e != &path.events.back()) EXPECT_FALSE(is_absorbed(e.state));
    }
  }
}

TEST(SimulatePath, ValidatorCatchesIllegalSteps) {
  const auto model = logistic_1d();
  Trajectory jump;
  jump.initial = {2};
  jump.events = {{0.1, {4}}};
  jump.end_time = 1.0;
  EXPECT_THROW(validate_trajectory(model, jump), std::logic_error);

  Trajectory backwards;
  backwards.initial = {2};
  backwards.events = {{0.2, {3}}, {0.1, {2}}};
  backwards.end_time = 1.0;
  EXPECT_THROW(validate_trajectory(model, backwards), std::logic_error);

  Trajectory after;
  after.initial = {1};
  after.events = {{0.2, {0}}, {0.3, {1}}};
  after.status = PathStatus::kAbsorbed;
  after.end_time = 0.2;
  EXPECT_THROW(validate_trajectory(model, after), std::logic_error);
}

TEST(SimulatePath, Reproducible) {
  const auto model = logistic_1d();
  const auto a = simulate_path(model, State{4}, 5.0, RngPlan{11}, 3);
  const auto b = simulate_path(model, State{4}, 5.0, RngPlan{11}, 3);
  const auto c = simulate_path(model, State{4}, 5.0, RngPlan{11}, 4);
  EXPECT_TRUE(same_path(a, b));
  EXPECT_FALSE(same_path(a, c));
}

TEST(EstimateConditional, TimeZero) {
  const auto law = estimate_conditional(logistic_1d(), State{2}, 0.0, 100, RngPlan{1});
  EXPECT_EQ(law.effective_sample_size, 100.0);
  ASSERT_EQ(law.normalized().size(), 1u);
  EXPECT_EQ(law.normalized()[0].first, State{2});
  EXPECT_EQ(law.normalized()[0].second, 1.0);
}

TEST(EstimateConditional, NoSurvivors) {
  EXPECT_THROW(estimate_conditional(death_only(), State{1}, 50.0, 10, RngPlan{1}),
               NoSurvivorError);
}

TEST(EstimateConditional, ThreadCountIndependent) {
  const auto model = bdqsd::testing::config_model("ref2d.cfg");
  omp_set_num_threads(1);
  const auto a = estimate_conditional(model, State{1, 1}, 1.0, 3000, RngPlan{42});
  omp_set_num_threads(4);
  const auto b = estimate_conditional(model, State{1, 1}, 1.0, 3000, RngPlan{42});
  EXPECT_EQ(a.weights, b.weights);
  EXPECT_EQ(a.survival, b.survival);
}

TEST(EstimateConditional, AgreesWithExactLaw) {
  const auto model = logistic_1d();
  const auto space = enumerate_space(1, 50);
  const auto q = assemble(model, space);
  const double t = 1.0;
  const std::size_t n = 20000;
  const auto exact = transient_conditional(q, point_mass(space.size(), 1), t);
  const auto law = estimate_conditional(model, State{2}, t, n, RngPlan{17});
  EXPECT_LT(law.tv_to(space, exact.law), 0.03);
  const double sd = std::sqrt(exact.survival * (1 - exact.survival) / n);
  EXPECT_LT(std::abs(law.survival - exact.survival), 3 * sd);
}

TEST(FlemingViot, Domain) {
  EXPECT_THROW(fleming_viot(logistic_1d(), State{1}, 1, 1.0, RngPlan{1}), DomainError);
}

TEST(FlemingViot, TimeZero) {
  const auto law = fleming_viot(logistic_1d(), State{3}, 10, 0.0, RngPlan{1});
  ASSERT_EQ(law.normalized().size(), 1u);
  EXPECT_EQ(law.normalized()[0].first, State{3});
}

TEST(FlemingViot, ApproachesQsd) {
  const auto model = logistic_1d();
  const auto space = enumerate_space(1, 40);
  const auto qsd = solve_qsd(assemble(model, space));
  const auto law = fleming_viot(model, State{1}, 4000, 10.0, RngPlan{8});
  EXPECT_LT(law.tv_to(space, qsd.alpha), 0.05);
  // particles never rest on the boundary
  for (const auto& [s, w] : law.weights) EXPECT_FALSE(is_absorbed(s));
}

TEST(FlemingViot, Reproducible) {
  const auto model = logistic_1d();
  const auto a = fleming_viot(model, State{2}, 200, 3.0, RngPlan{4});
  const auto b = fleming_viot(model, State{2}, 200, 3.0, RngPlan{4});
  EXPECT_EQ(a.weights, b.weights);
}

namespace {

struct TwoState {
  Model model = logistic_1d();
  TruncatedSpace space = enumerate_space(1, 2);
  SubGenerator q = assemble(model, space);
  QsdResult qsd = solve_qsd(q);
};

}  // namespace

TEST(QProcess, TransformedRatesOnTwoStates) {
  const TwoState ex;
  const double lambda = 4.0 - 2.0 * std::sqrt(2.0);
  // Q eta = -lambda eta gives eta_2 = (2 - lambda) eta_1
  const double ratio = 2.0 - lambda;
  const auto gen = qprocess_generator(ex.q, ex.qsd);
  ASSERT_EQ(gen.rows.nonzeros(), 2u);
  EXPECT_NEAR(gen.rows.values[0], 1.0 * ratio, 1e-12);
  EXPECT_NEAR(gen.rows.values[1], 4.0 / ratio, 1e-12);
  for (double s : gen.row_sums()) EXPECT_LT(std::abs(s), 1e-12);
}

TEST(QProcess, RowSumsVanishOnLargerSpace) {
  const auto model = bdqsd::testing::config_model("ref2d.cfg");
  const auto q = assemble(model, enumerate_space(2, 30));
  const auto qsd = solve_qsd(q);
  const auto gen = qprocess_generator(q, qsd);
  const auto sums = gen.row_sums();
  for (std::size_t i = 0; i < sums.size(); ++i) {
    EXPECT_LT(std::abs(sums[i]), 1e-12 * std::abs(q.diagonal()[i]) + 1e-12);
  }
}

TEST(QProcess, SingleStateNeverMoves) {
  const auto model = logistic_1d();
  const auto space = enumerate_space(1, 1);
  const auto q = assemble(model, space);
  const auto qsd = solve_qsd(q);
  const auto path = simulate_qprocess(model, q, qsd, space, State{1}, 100.0, RngPlan{1});
  EXPECT_TRUE(path.events.empty());
  EXPECT_EQ(path.status, PathStatus::kAlive);
}

TEST(QProcess, OccupationMatchesProduct) {
  const TwoState ex;
  const double horizon = 1e3;
  const auto path =
      simulate_qprocess(ex.model, ex.q, ex.qsd, ex.space, State{1}, horizon, RngPlan{42});
  for (const auto& e : path.events) EXPECT_FALSE(is_absorbed(e.state));
  const auto occ = occupation_measure(path, ex.space, horizon);
  std::vector<double> product{ex.qsd.alpha[0] * ex.qsd.eta[0],
                              ex.qsd.alpha[1] * ex.qsd.eta[1]};
  EXPECT_LT(tv_distance(occ, product), 0.05);
}

TEST(QProcess, RejectsStartOutsideSpace) {
  const TwoState ex;
  EXPECT_THROW(simulate_qprocess(ex.model, ex.q, ex.qsd, ex.space, State{3}, 1.0, RngPlan{1}),
               DomainError);
}
