#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>

#include "bdqsd/convergence.hpp"
#include "bdqsd/error.hpp"
#include "test_support.hpp"

using namespace bdqsd;
using bdqsd::testing::logistic_1d;

namespace {

// exp(tQ) 1 for Q = [[-2, 1], [4, -6]] from its spectral decomposition.
Eigen::Vector2d two_state_survival(double t) {
  Eigen::Matrix2d q;
  q << -2, 1, 4, -6;
  Eigen::EigenSolver<Eigen::Matrix2d> es(q);
  const Eigen::Matrix2d v = es.eigenvectors().real();
  const Eigen::Vector2d e(std::exp(t * es.eigenvalues()(0).real()),
                          std::exp(t * es.eigenvalues()(1).real()));
  return v * e.asDiagonal() * v.inverse() * Eigen::Vector2d::Ones();
}

}  // namespace

TEST(TvDistance, Examples) {
  const std::vector<double> a{0.3, 0.7};
  EXPECT_EQ(tv_distance(a, a), 0.0);
  EXPECT_EQ(tv_distance(std::vector<double>{1, 0}, std::vector<double>{0, 1}), 1.0);
  EXPECT_EQ(tv_distance(std::vector<double>{0.5, 0.5}, std::vector<double>{1, 0}), 0.5);
  EXPECT_THROW(tv_distance(a, std::vector<double>{1.0}), DomainError);
}

TEST(TvDistance, MetricOnSimplex) {
  bdqsd::testing::Gen gen(31);
  for (int k = 0; k < 2000; ++k) {
    const auto size = static_cast<std::size_t>(gen.integer(1, 40));
    const auto x = gen.simplex(size);
    const auto y = gen.simplex(size);
    const auto z = gen.simplex(size);
    const double xy = tv_distance(x, y);
    ASSERT_GE(xy, 0.0);
    ASSERT_LE(xy, 1.0);
    ASSERT_EQ(xy, tv_distance(y, x));
    ASSERT_EQ(tv_distance(x, x), 0.0);
    if (size > 1) ASSERT_GT(xy, 0.0);
    ASSERT_LE(xy, tv_distance(x, z) + tv_distance(z, y) + 1e-15);
  }
}

TEST(TimeGrid, ParseAndPoints) {
  const auto g = TimeGrid::parse("0:1:0.25");
  EXPECT_EQ(g.intervals(), 4u);
  EXPECT_EQ(g.points(), (std::vector<double>{0, 0.25, 0.5, 0.75, 1.0}));
  EXPECT_EQ(g.refined().intervals(), 8u);
  EXPECT_THROW(TimeGrid::parse("0:1"), ValidationError);
  EXPECT_THROW(TimeGrid::parse("0:x:1"), ValidationError);
  EXPECT_THROW((TimeGrid{1.0, 0.0, 0.1}).validate(), ValidationError);
}

TEST(ConvergenceCurve, StationaryStart) {
  const auto model = bdqsd::testing::config_model("ref2d.cfg");
  const auto q = assemble(model, enumerate_space(2, 30));
  const auto qsd = solve_qsd(q);
  const std::vector<std::vector<double>> laws{qsd.alpha};
  const auto curve = convergence_curve(q, qsd, laws, TimeGrid{0, 5, 0.5});
  for (double tv : curve.tv[0]) EXPECT_LT(tv, 1e-8);
}

TEST(ConvergenceCurve, SingleState) {
  const auto space = enumerate_space(1, 1);
  const auto q = assemble(logistic_1d(), space);
  const auto qsd = solve_qsd(q);
  const auto curve =
      convergence_curve(q, space, qsd, std::vector<State>{{1}}, TimeGrid{0, 3, 0.5});
  for (double tv : curve.tv[0]) EXPECT_EQ(tv, 0.0);
}

TEST(ConvergenceCurve, SurvivalNonincreasingAndTvInRange) {
  const auto space = enumerate_space(1, 50);
  const auto q = assemble(logistic_1d(), space);
  const auto qsd = solve_qsd(q);
  const auto curve = convergence_curve(q, space, qsd, all_initials(space), TimeGrid{0, 10, 0.1});
  ASSERT_EQ(curve.tv.size(), 50u);
  for (std::size_t i = 0; i < curve.tv.size(); ++i) {
    for (std::size_t k = 0; k < curve.times.size(); ++k) {
      EXPECT_GE(curve.tv[i][k], 0.0);
      EXPECT_LE(curve.tv[i][k], 1.0);
      if (k > 0) EXPECT_LE(curve.survival[i][k], curve.survival[i][k - 1]);
    }
  }
}

TEST(ConvergenceCurve, RejectsInitialOutsideSpace) {
  const auto space = enumerate_space(1, 5);
  const auto q = assemble(logistic_1d(), space);
  const auto qsd = solve_qsd(q);
  EXPECT_THROW(convergence_curve(q, space, qsd, std::vector<State>{{9}}, TimeGrid{}),
               DomainError);
}

TEST(FitRate, ExactExponential) {
  std::vector<double> t, tv;
  for (int k = 0; k <= 400; ++k) {
    t.push_back(0.1 * k);
    tv.push_back(2.0 * std::exp(-0.3 * t.back()));
  }
  const auto fit = fit_rate(t, tv);
  EXPECT_NEAR(fit.prefactor, 2.0, 1e-12);
  EXPECT_NEAR(fit.rate, 0.3, 1e-12);
  EXPECT_FALSE(fit.degenerate);
  for (std::size_t k = 0; k < t.size(); ++k) {
    if (tv[k] >= kFitWindowLow && tv[k] <= kFitWindowHigh) {
      EXPECT_LE(tv[k], fit.envelope(t[k]));
    }
  }
}

TEST(FitRate, ConstantCurve) {
  const std::vector<double> t{0, 1, 2, 3, 4, 5};
  const std::vector<double> flat(6, 0.01);
  const auto fit = fit_rate(t, flat);
  EXPECT_TRUE(fit.degenerate);
  EXPECT_NEAR(fit.rate, 0.0, 1e-15);
  EXPECT_THROW(fit_rate(t, std::vector<double>(6, 0.5)), NumericalError);
}

TEST(FitRate, ReferenceCurvesAreSelfDominated) {
  const auto space = enumerate_space(1, 50);
  const auto q = assemble(logistic_1d(), space);
  const auto qsd = solve_qsd(q);
  const std::vector<State> initials{{1}, {50}};
  const auto curve = convergence_curve(q, space, qsd, initials, TimeGrid{0, 20, 0.05});
  const auto fits = fit_rate(curve);
  for (std::size_t i = 0; i < fits.size(); ++i) {
    for (std::size_t k = 0; k < curve.times.size(); ++k) {
      const double tv = curve.tv[i][k];
      if (tv >= kFitWindowLow && tv <= kFitWindowHigh) {
        EXPECT_LE(tv, fits[i].envelope(curve.times[k]));
      }
    }
  }
  EXPECT_NEAR(fits[0].rate / fits[1].rate, 1.0, 0.1);
}

TEST(VerifyA1, SingleState) {
  const auto space = enumerate_space(1, 1);
  const auto q = assemble(logistic_1d(), space);
  const auto cert = verify_a1(q, space, 1.3);
  EXPECT_EQ(*cert.c1, 1.0);
  EXPECT_TRUE(cert.valid());
}

TEST(VerifyA1, LogisticPositive) {
  const auto space = enumerate_space(1, 50);
  const auto q = assemble(logistic_1d(), space);
  const auto cert = verify_a1(q, space, 2.0);
  EXPECT_GT(*cert.c1, 0.0);
  EXPECT_LE(*cert.c1, 1.0);
  EXPECT_NEAR(*cert.c1, *cert.c1_recomputed, 1e-9);
  EXPECT_TRUE(cert.valid());
}

TEST(VerifyA1, ZeroTimeIsInvalid) {
  const auto space = enumerate_space(1, 5);
  const auto q = assemble(logistic_1d(), space);
  const auto cert = verify_a1(q, space, 0.0);
  EXPECT_EQ(*cert.c1, 0.0);
  EXPECT_FALSE(cert.valid());
}

TEST(VerifyA2, SingleState) {
  const auto space = enumerate_space(1, 1);
  const auto q = assemble(logistic_1d(), space);
  EXPECT_EQ(*verify_a2(q, space, TimeGrid{0, 5, 0.5}).c2, 1.0);
}

TEST(VerifyA2, TwoStateClosedForm) {
  const auto space = enumerate_space(1, 2);
  const auto q = assemble(logistic_1d(), space);
  const TimeGrid grid{0, 10, 0.05};
  const auto cert = verify_a2(q, space, grid);
  double oracle = 1.0;
  for (double t : grid.points()) {
    const auto s = two_state_survival(t);
    oracle = std::min({oracle, s(0) / s(0), s(0) / s(1)});
  }
  EXPECT_NEAR(*cert.c2, oracle, 1e-12);
  EXPECT_GT(*cert.c2, 0.0);
  EXPECT_LE(*cert.c2, 1.0);
  EXPECT_TRUE(cert.valid());
}

TEST(EtaPlateau, TwoStateDecreasing) {
  const auto q = assemble(logistic_1d(), enumerate_space(1, 2));
  const auto qsd = solve_qsd(q);
  const auto curve = eta_plateau(q, qsd, TimeGrid{0, 5, 0.25});
  ASSERT_EQ(curve.size(), 21u);
  const double at_zero = std::max(std::abs(1 - qsd.eta[0]), std::abs(1 - qsd.eta[1]));
  EXPECT_NEAR(curve[0].error, at_zero, 1e-15);
  for (std::size_t k = 1; k < curve.size(); ++k) EXPECT_LT(curve[k].error, curve[k - 1].error);
}

TEST(EtaPlateau, SingleState) {
  const auto q = assemble(logistic_1d(), enumerate_space(1, 1));
  const auto qsd = solve_qsd(q);
  for (const auto& p : eta_plateau(q, qsd, TimeGrid{0, 4, 0.5})) {
    EXPECT_NEAR(p.error, 0.0, 1e-13);
  }
}
