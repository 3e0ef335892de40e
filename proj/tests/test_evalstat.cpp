#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "demandsg/evalstat.hpp"
#include "demandsg/protocol.hpp"
#include "demandsg/stats.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace demandsg;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

std::vector<double> stdvec(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

Eigen::VectorXd gaussian(Eigen::Index n, double mean, double sd, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(mean, sd);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = g(rng);
  return v;
}

struct Problem {
  FeatureFrame features;
  Eigen::VectorXd y;
  SplitIndices split;
};

Problem problem(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd X(static_cast<Eigen::Index>(n), 3);
  Eigen::VectorXd y(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    X.row(i) << g(rng), g(rng), g(rng);
    y[i] = 4.0 + X(i, 0) - 0.5 * X(i, 1) * X(i, 2) + 0.3 * g(rng);
  }
  return {testutil::numeric(X), y, split(n, {}, seed)};
}

std::vector<LearnerSpec> cheap_pool() {
  return {{"LR", LearnerKind::LR, {ElasticNetConfig{}}},
          {"DT", LearnerKind::DT, {TreeConfig{.max_depth = 3}, TreeConfig{.max_depth = 5}}},
          {"RF", LearnerKind::RF, {ForestConfig{.n_trees = 4}}},
          {"GBT", LearnerKind::GBT, {GbtConfig{.n_stages = 10}}}};
}

ProtocolPlan plan_with(const std::vector<std::vector<std::string>>& member_sets) {
  ProtocolPlan plan;
  plan.pool = cheap_pool();
  plan.singles = cheap_pool();
  const auto second = default_combiner(LearnerKind::LR);
  for (const auto& members : member_sets) plan.combos.push_back({combo_name(second, members), members, second});
  return plan;
}

ProtocolConfig quick(std::size_t repetitions = 3) {
  return {.repetitions = repetitions, .folds = 3, .threads = 1};
}

}  // namespace

TEST(Rmse, Examples) {
  EXPECT_EQ(rmse(vec({1, 2, 3}), vec({1, 2, 3})), 0.0);
  EXPECT_DOUBLE_EQ(rmse(vec({3, 3}), vec({1, 5})), 2.0);
  EXPECT_THROW(rmse(vec({1}), vec({1, 2})), std::invalid_argument);
  EXPECT_THROW(rmse(Eigen::VectorXd(), Eigen::VectorXd()), std::invalid_argument);
  EXPECT_THROW(rmse(vec({NAN}), vec({1})), std::invalid_argument);
}

TEST(Rmse, SymmetricAndScalesLinearly) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const Eigen::VectorXd p = gaussian(30, 0, 2, s), a = gaussian(30, 1, 1, s + 100);
    EXPECT_DOUBLE_EQ(rmse(p, a), rmse(a, p));
    for (double c : {-3.0, 0.5, 7.0}) EXPECT_NEAR(rmse(c * p, c * a), std::abs(c) * rmse(p, a), 1e-12);
  }
}

TEST(Anova, IdenticalGroupsGiveZero) {
  const std::vector<Eigen::VectorXd> groups{vec({1, 2, 3}), vec({1, 2, 3})};
  const auto r = anova(groups);
  EXPECT_EQ(r.f_statistic, 0.0);
  EXPECT_FALSE(r.reject_at_005);
  EXPECT_NEAR(r.p_value, 1.0, 1e-12);
}

TEST(Anova, ShiftedGroupsMatchTextbookFormula) {
  const std::vector<Eigen::VectorXd> groups{vec({1, 2, 3}), vec({11, 12, 13})};
  const auto r = anova(groups);
  EXPECT_NEAR(r.f_statistic, 150.0, 1e-9);
  EXPECT_NEAR(r.f_statistic, oracle::anova_f({{1, 2, 3}, {11, 12, 13}}), 1e-9);
  EXPECT_EQ(r.df_between, 1);
  EXPECT_EQ(r.df_within, 4);
  EXPECT_TRUE(r.reject_at_005);
}

TEST(Anova, Errors) {
  const std::vector<Eigen::VectorXd> one{vec({1, 2, 3})};
  EXPECT_THROW(anova(one), std::invalid_argument);
  const std::vector<Eigen::VectorXd> flat{vec({2, 2}), vec({2, 2})};
  EXPECT_THROW(anova(flat), std::invalid_argument);
  const std::vector<Eigen::VectorXd> tiny{vec({1}), vec({1, 2})};
  EXPECT_THROW(anova(tiny), std::invalid_argument);
}

TEST(Anova, PropertiesOnRandomGroups) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t k = 2 + rng() % 4;
    std::vector<Eigen::VectorXd> groups;
    std::vector<std::vector<double>> plain;
    std::size_t total = 0;
    for (std::size_t g = 0; g < k; ++g) {
      const Eigen::Index n = 2 + static_cast<Eigen::Index>(rng() % 20);
      groups.push_back(gaussian(n, static_cast<double>(rng() % 3), 1.0, rng()));
      plain.push_back(stdvec(groups.back()));
      total += static_cast<std::size_t>(n);
    }
    const auto r = anova(groups);
    EXPECT_GE(r.f_statistic, 0.0);
    EXPECT_GE(r.p_value, 0.0);
    EXPECT_LE(r.p_value, 1.0);
    EXPECT_EQ(r.df_between, static_cast<int>(k - 1));
    EXPECT_EQ(r.df_within, static_cast<int>(total - k));
    EXPECT_NEAR(r.f_statistic, oracle::anova_f(plain), 1e-9 * std::max(1.0, r.f_statistic));

    auto shifted = groups, scaled = groups;
    for (auto& g : shifted) g.array() += 37.5;
    for (auto& g : scaled) g *= -4.25;
    EXPECT_NEAR(anova(shifted).f_statistic, r.f_statistic, 1e-9 * std::max(1.0, r.f_statistic));
    EXPECT_NEAR(anova(scaled).f_statistic, r.f_statistic, 1e-9 * std::max(1.0, r.f_statistic));
  }
}

TEST(TTest, IdenticalSamples) {
  const auto r = t_test(vec({1, 4, 2, 8}), vec({1, 4, 2, 8}));
  EXPECT_EQ(r.t_statistic, 0.0);
  EXPECT_FALSE(r.reject_at_005);
}

TEST(TTest, ShiftedSamplesMatchWelchFormula) {
  const auto r = t_test(vec({1, 2, 3}), vec({101, 102, 103}));
  EXPECT_NEAR(r.t_statistic, oracle::welch_t({1, 2, 3}, {101, 102, 103}), 1e-9);
  EXPECT_NEAR(r.t_statistic, -100.0 / std::sqrt(2.0 / 3.0), 1e-9);
  EXPECT_NEAR(r.df, 4.0, 1e-12);
  EXPECT_TRUE(r.reject_at_005);
  EXPECT_LT(r.p_value, 1e-6);
}

TEST(TTest, RandomSamplesMatchOracleAndStayInRange) {
  for (std::uint64_t s = 0; s < 30; ++s) {
    const Eigen::VectorXd a = gaussian(5 + static_cast<Eigen::Index>(s % 7), 0, 1, s);
    const Eigen::VectorXd b = gaussian(4 + static_cast<Eigen::Index>(s % 5), 0.3, 2, s + 50);
    const auto r = t_test(a, b);
    EXPECT_NEAR(r.t_statistic, oracle::welch_t(stdvec(a), stdvec(b)), 1e-9);
    EXPECT_GE(r.p_value, 0.0);
    EXPECT_LE(r.p_value, 1.0);
    EXPECT_EQ(r.reject_at_005, r.p_value < 0.05);
  }
}

TEST(TTest, PairedVariantTestsDifferences) {
  const Eigen::VectorXd a = vec({1.0, 2.0, 3.0, 4.0, 5.0});
  const Eigen::VectorXd b = a.array() + vec({0.1, 0.2, 0.1, 0.3, 0.2}).array();
  const auto r = t_test(a, b, 0.05, true);
  const Eigen::VectorXd d = a - b;
  const double sd = std::sqrt((d.array() - d.mean()).square().sum() / 4.0);
  EXPECT_NEAR(r.t_statistic, d.mean() / (sd / std::sqrt(5.0)), 1e-12);
  EXPECT_EQ(r.df, 4.0);
  EXPECT_TRUE(r.reject_at_005);
  EXPECT_THROW(t_test(a, vec({1, 2}), 0.05, true), std::invalid_argument);
}

TEST(TTest, DegenerateCases) {
  EXPECT_THROW(t_test(vec({2, 2}), vec({2, 2})), std::invalid_argument);
  const auto r = t_test(vec({2, 2}), vec({3, 3}));
  EXPECT_TRUE(std::isinf(r.t_statistic));
  EXPECT_EQ(r.p_value, 0.0);
  EXPECT_THROW(t_test(vec({1}), vec({1, 2})), std::invalid_argument);
}

TEST(Distributions, TCdfMatchesQuadrature) {
  for (double df : {1.0, 3.0, 10.0, 37.5}) {
    for (int q = 0; q < 20; ++q) {
      const double x = -6.0 + 12.0 * q / 19.0;
      EXPECT_NEAR(t_cdf(x, df), oracle::t_cdf_numeric(x, df), 1e-6) << "df " << df << " x " << x;
    }
  }
}

TEST(Distributions, FCdfMatchesQuadrature) {
  for (auto [d1, d2] : {std::pair{1.0, 5.0}, {3.0, 76.0}, {5.0, 20.0}, {2.0, 2.0}}) {
    for (int q = 1; q <= 20; ++q) {
      const double x = 0.25 * q;
      EXPECT_NEAR(f_cdf(x, d1, d2), oracle::f_cdf_numeric(x, d1, d2), 1e-6) << d1 << "," << d2 << " x " << x;
      EXPECT_NEAR(f_sf(x, d1, d2), 1.0 - f_cdf(x, d1, d2), 1e-12);
    }
  }
  EXPECT_EQ(f_cdf(0.0, 3, 4), 0.0);
}

TEST(Distributions, IncompleteBetaEdges) {
  EXPECT_EQ(incomplete_beta(2, 3, 0.0), 0.0);
  EXPECT_EQ(incomplete_beta(2, 3, 1.0), 1.0);
  EXPECT_NEAR(incomplete_beta(1, 1, 0.3), 0.3, 1e-14);
  EXPECT_NEAR(incomplete_beta(2, 5, 0.4) + incomplete_beta(5, 2, 0.6), 1.0, 1e-12);
  EXPECT_NEAR(t_two_sided_p(0.0, 7), 1.0, 1e-12);
}

TEST(RunMatrixCsv, HeaderAndFailureMarkers) {
  RunMatrix m{{"a", "b"}, (Eigen::MatrixXd(2, 2) << 0.5, NAN, 0.25, NAN).finished(), {"", "b failed"}};
  EXPECT_EQ(m.to_csv(), "repetition,a,b\n0,0.5,FAILED\n1,0.25,FAILED\n");
  EXPECT_EQ(m.column("a"), vec({0.5, 0.25}));
  EXPECT_TRUE(m.failed(1));
  EXPECT_THROW(m.index_of("c"), std::out_of_range);
}

TEST(Protocol, BinaryAndTripleCombosGiveExpectedColumns) {
  const auto p = problem(200, 1);
  const auto binary = plan_with({{"LR", "DT"}, {"LR", "RF"}, {"LR", "GBT"}, {"DT", "RF"}, {"DT", "GBT"}, {"RF", "GBT"}});
  const auto m = run_protocol(p.features, p.y, p.split, binary, quick(2), 7);
  EXPECT_EQ(m.columns.size(), 6u + 4u);
  EXPECT_EQ(m.repetitions(), 2);
  EXPECT_EQ(m.columns.front(), "SG(LR):LR+DT");
  EXPECT_TRUE(m.values.allFinite());
  EXPECT_TRUE((m.values.array() >= 0).all());

  const auto triple = plan_with({{"LR", "DT", "RF"}, {"LR", "DT", "GBT"}, {"LR", "RF", "GBT"}, {"DT", "RF", "GBT"}});
  EXPECT_EQ(run_protocol(p.features, p.y, p.split, triple, quick(2), 7).columns.size(), 4u + 4u);
}

TEST(Protocol, ConstantTargetGivesEqualRows) {
  auto p = problem(120, 2);
  p.y.setConstant(3.0);
  const auto m = run_protocol(p.features, p.y, p.split, plan_with({{"LR", "DT"}}), quick(2), 1);
  EXPECT_EQ(m.values.row(0), m.values.row(1));
}

TEST(Protocol, DeterministicAndThreadIndependent) {
  const auto p = problem(150, 3);
  const auto plan = plan_with({{"LR", "GBT"}, {"DT", "RF", "GBT"}});
  const auto a = run_protocol(p.features, p.y, p.split, plan, quick(3), 5);
  auto cfg = quick(3);
  cfg.threads = 3;
  const auto b = run_protocol(p.features, p.y, p.split, plan, cfg, 5);
  EXPECT_EQ(a.to_csv(), b.to_csv());
  EXPECT_NE(a.values.row(0), a.values.row(1));
  EXPECT_NE(a.to_csv(), run_protocol(p.features, p.y, p.split, plan, quick(3), 6).to_csv());
}

TEST(Protocol, FailureAbortsOrIsRecorded) {
  const auto p = problem(100, 4);
  auto plan = plan_with({{"LR", "BAD"}});
  // Asking for more candidate features than exist makes the forest fit throw.
  plan.pool.push_back({"BAD", LearnerKind::RF, {ForestConfig{.feature_subset_size = 10}}});
  try {
    run_protocol(p.features, p.y, p.split, plan, quick(2), 1);
    FAIL() << "expected the run to abort";
  } catch (const ProtocolError& e) {
    EXPECT_NE(std::string(e.what()).find("SG(LR):LR+BAD"), std::string::npos) << e.what();
  }
  auto cfg = quick(2);
  cfg.abort_on_failure = false;
  const auto m = run_protocol(p.features, p.y, p.split, plan, cfg, 1);
  const auto bad = m.index_of("SG(LR):LR+BAD");
  EXPECT_TRUE(m.failed(bad));
  EXPECT_TRUE(m.values.col(static_cast<Eigen::Index>(bad)).array().isNaN().all());
  EXPECT_TRUE(m.values.col(static_cast<Eigen::Index>(m.index_of("LR"))).allFinite());
}

TEST(Protocol, TooFewRepetitionsIsAnError) {
  const auto p = problem(100, 5);
  EXPECT_ANY_THROW(run_protocol(p.features, p.y, p.split, plan_with({}), quick(1), 1));
}
