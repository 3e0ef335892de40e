#include <cmath>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "demandsg/dataset.hpp"
#include "demandsg/evalstat.hpp"
#include "demandsg/tree.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace demandsg;

namespace {

std::vector<double> span_of(std::initializer_list<double> v) { return v; }

// Leaf index reached by a row.
std::int32_t leaf_of(const RegressionTree& t, const Eigen::RowVectorXd& row) {
  const auto& nodes = t.nodes();
  std::int32_t i = 0;
  while (!nodes[i].is_leaf()) {
    const auto& n = nodes[i];
    if (n.categorical) {
      const auto code = static_cast<std::size_t>(row[n.feature]);
      const std::int32_t next = code < n.children.size() ? n.children[code] : -1;
      i = next >= 0 ? next : n.fallback;
    } else {
      i = row[n.feature] <= n.threshold ? n.children[0] : n.children[1];
    }
  }
  return i;
}

// Random frame mixing categorical (small code alphabets) and numeric columns
// with few distinct values, so ties are common.
FeatureFrame random_frame(std::mt19937_64& rng, Eigen::Index n, std::vector<bool>& categorical) {
  const Eigen::Index p = 1 + static_cast<Eigen::Index>(rng() % 4);
  FeatureFrame f;
  f.values.resize(n, p);
  categorical.assign(static_cast<std::size_t>(p), false);
  for (Eigen::Index j = 0; j < p; ++j) {
    const bool cat = rng() % 2 == 0;
    categorical[static_cast<std::size_t>(j)] = cat;
    const int alphabet = 2 + static_cast<int>(rng() % 4);
    FeatureInfo info{"f" + std::to_string(j), cat ? FeatureKind::Categorical : FeatureKind::Numeric, {}};
    if (cat)
      for (int c = 0; c < alphabet; ++c) info.levels.push_back("c" + std::to_string(c));
    f.layout.push_back(info);
    for (Eigen::Index i = 0; i < n; ++i) f.values(i, j) = static_cast<double>(rng() % alphabet);
  }
  return f;
}

Eigen::VectorXd random_target(std::mt19937_64& rng, Eigen::Index n) {
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) y[i] = static_cast<double>(rng() % 7);
  return y;
}

FeatureFrame categorical_frame(const std::vector<int>& codes, std::vector<std::string> levels) {
  FeatureFrame f{{{"x", FeatureKind::Categorical, std::move(levels)}}, Eigen::MatrixXd(codes.size(), 1)};
  for (std::size_t i = 0; i < codes.size(); ++i) f.values(static_cast<Eigen::Index>(i), 0) = codes[i];
  return f;
}

}  // namespace

TEST(Variance, NodeVarianceExamples) {
  EXPECT_DOUBLE_EQ(node_variance(std::span<const double>(span_of({1, 1, 3, 3}))), 1.0);
  EXPECT_DOUBLE_EQ(node_variance(std::span<const double>(span_of({5}))), 0.0);
  EXPECT_DOUBLE_EQ(node_variance(std::span<const double>(span_of({4.5, 4.5, 4.5}))), 0.0);
  EXPECT_THROW(node_variance(std::span<const double>()), std::invalid_argument);
}

TEST(Variance, SplitVarianceExamples) {
  const std::vector<char> ab{'a', 'a', 'b', 'b'};
  const std::vector<char> alt{'a', 'b', 'a', 'b'};
  const std::vector<char> same{'a', 'a', 'a', 'a'};
  const auto y1 = span_of({1, 1, 3, 3});
  const auto y2 = span_of({1, 3, 1, 3});
  EXPECT_DOUBLE_EQ(split_variance<char>(ab, y1), 0.0);
  EXPECT_DOUBLE_EQ(split_variance<char>(same, y1), 1.0);
  EXPECT_DOUBLE_EQ(split_variance<char>(ab, y2), 1.0);
  EXPECT_DOUBLE_EQ(variance_reduction<char>(ab, y1), 1.0);
  EXPECT_DOUBLE_EQ(variance_reduction<char>(same, y1), 0.0);
  EXPECT_DOUBLE_EQ(variance_reduction<char>(alt, y1), 0.0);
  const std::vector<char> short_x{'a'};
  EXPECT_THROW(split_variance<char>(short_x, y1), std::invalid_argument);
}

TEST(Variance, SplitVarianceMatchesGroupByOracle) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng() % 200;
    std::vector<int> x(n);
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = static_cast<int>(rng() % 6);
      y[i] = std::ldexp(static_cast<double>(rng() % 1000), -3);
    }
    const double ours = split_variance<int>(x, y);
    EXPECT_NEAR(ours, oracle::group_by_variance(x, y), 1e-9);
    EXPECT_GE(variance_reduction<int>(x, y), -1e-12);
  }
}

TEST(FitTree, ConstantTargetGivesSingleLeaf) {
  const auto f = testutil::numeric(Eigen::MatrixXd::Random(10, 2));
  Rng rng(1);
  const auto t = fit_tree(f, Eigen::VectorXd::Constant(10, 4.0), TreeConfig{}, rng);
  ASSERT_EQ(t.nodes().size(), 1u);
  EXPECT_DOUBLE_EQ(t.predict(f.values)[3], 4.0);
}

TEST(FitTree, FourRowCategoricalInstance) {
  const auto f = categorical_frame({0, 0, 1, 1}, {"a", "b"});
  const Eigen::Vector4d y(1, 1, 3, 3);
  Rng rng(1);
  const auto t = fit_tree(f, y, TreeConfig{}, rng);
  const auto& root = t.nodes()[0];
  EXPECT_EQ(root.feature, 0);
  EXPECT_TRUE(root.categorical);
  EXPECT_EQ(t.leaf_count(), 2u);
  EXPECT_EQ(rmse(t.predict(f.values), y), 0.0);
  const TreeModel m(f.layout, t);
  EXPECT_DOUBLE_EQ(m.predict(categorical_frame({0}, {"a"}))[0], 1.0);
}

TEST(FitTree, UnseenCategoryFollowsMostPopulousChild) {
  const auto f = categorical_frame({0, 0, 0, 1}, {"a", "b"});
  const Eigen::Vector4d y(1, 1, 1, 3);
  Rng rng(1);
  const TreeModel m(f.layout, fit_tree(f, y, TreeConfig{}, rng));
  EXPECT_DOUBLE_EQ(m.predict(categorical_frame({0}, {"z"}))[0], 1.0);
}

TEST(FitTree, StockThenPriceAreSuccessiveSeparators) {
  // Stock explains most of the variance, price the rest; brand is noise.
  FeatureFrame f{{{"brand", FeatureKind::Categorical, {"Apple", "Nokia"}},
                  {"stock", FeatureKind::Numeric, {}},
                  {"price", FeatureKind::Numeric, {}}},
                 Eigen::MatrixXd(8, 3)};
  f.values << 0, 1, 100, 1, 1, 200, 0, 1, 100, 1, 1, 200, 0, 50, 100, 1, 50, 200, 1, 50, 100, 0, 50, 200;
  const Eigen::VectorXd y = (Eigen::VectorXd(8) << 1, 1, 1, 1, 10, 12, 10, 12).finished();
  Rng rng(1);
  const auto t = fit_tree(f, y, TreeConfig{}, rng);
  const auto& root = t.nodes()[0];
  EXPECT_EQ(f.layout[root.feature].name, "stock");
  const auto& high_stock = t.nodes()[root.children[1]];
  ASSERT_FALSE(high_stock.is_leaf());
  EXPECT_EQ(f.layout[high_stock.feature].name, "price");
  EXPECT_TRUE(t.nodes()[root.children[0]].is_leaf());
}

TEST(FitTree, RootSplitMatchesBruteForceArgmax) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<bool> categorical;
    const Eigen::Index n = 2 + static_cast<Eigen::Index>(rng() % 40);
    const auto f = random_frame(rng, n, categorical);
    const Eigen::VectorXd y = random_target(rng, n);
    const std::size_t min_leaf = 1 + rng() % 3;
    TreeConfig cfg{.max_depth = 1, .min_samples_leaf = min_leaf};
    Rng tree_rng(trial);
    const auto t = fit_tree(f, y, cfg, tree_rng);
    const auto expected =
        oracle::brute_force_split(f.values, categorical, std::vector<double>(y.data(), y.data() + n), min_leaf);
    const auto& root = t.nodes()[0];
    if (expected.feature < 0 || oracle::population_variance(std::vector<double>(y.data(), y.data() + n)) == 0.0) {
      EXPECT_TRUE(root.is_leaf()) << "trial " << trial;
      continue;
    }
    ASSERT_FALSE(root.is_leaf()) << "trial " << trial;
    EXPECT_EQ(root.feature, expected.feature) << "trial " << trial;
    if (!root.categorical) {
      EXPECT_DOUBLE_EQ(root.threshold, expected.threshold) << "trial " << trial;
    }
  }
}

TEST(FitTree, LeavesRespectMinSizeAndHoldReplayMeans) {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<bool> categorical;
    const Eigen::Index n = 5 + static_cast<Eigen::Index>(rng() % 80);
    const auto f = random_frame(rng, n, categorical);
    const Eigen::VectorXd y = random_target(rng, n);
    const TreeConfig cfg{.min_samples_leaf = 1 + rng() % 4};
    Rng tree_rng(trial);
    const auto t = fit_tree(f, y, cfg, tree_rng);
    std::map<std::int32_t, std::vector<double>> reached;
    for (Eigen::Index i = 0; i < n; ++i) reached[leaf_of(t, f.values.row(i))].push_back(y[i]);
    for (std::size_t i = 0; i < t.nodes().size(); ++i) {
      const auto& node = t.nodes()[i];
      if (!node.is_leaf()) continue;
      EXPECT_GE(node.samples, cfg.min_samples_leaf);
      const auto& ys = reached[static_cast<std::int32_t>(i)];
      ASSERT_EQ(ys.size(), node.samples);
      EXPECT_NEAR(node.prediction, std::accumulate(ys.begin(), ys.end(), 0.0) / static_cast<double>(ys.size()), 1e-12);
    }
  }
}

TEST(FitTree, SeparableDataIsFitExactly) {
  std::mt19937_64 rng(5);
  Eigen::MatrixXd X(60, 2);
  Eigen::VectorXd y(60);
  for (Eigen::Index i = 0; i < 60; ++i) {
    X(i, 0) = static_cast<double>(i % 7);
    X(i, 1) = static_cast<double>(i / 7);
    y[i] = static_cast<double>(rng() % 100);
  }
  const auto f = testutil::numeric(X);
  Rng tree_rng(1);
  const auto t = fit_tree(f, y, TreeConfig{}, tree_rng);
  EXPECT_EQ(rmse(t.predict(X), y), 0.0);
}

TEST(FitTree, MaxDepthAndCategoricalOncePerPath) {
  std::mt19937_64 rng(9);
  const auto f = categorical_frame({0, 1, 2, 0, 1, 2, 0, 1}, {"a", "b", "c"});
  Eigen::VectorXd y(8);
  for (Eigen::Index i = 0; i < 8; ++i) y[i] = static_cast<double>(rng() % 10);
  Rng tree_rng(1);
  EXPECT_LE(fit_tree(f, y, TreeConfig{}, tree_rng).depth(), 1u);

  const auto g = testutil::numeric(Eigen::VectorXd::LinSpaced(64, 0, 63));
  const Eigen::VectorXd z = Eigen::VectorXd::LinSpaced(64, 0, 63).array().square();
  for (int d : {0, 1, 2, 5}) {
    EXPECT_LE(fit_tree(g, z, TreeConfig{.max_depth = d}, tree_rng).depth(), static_cast<std::size_t>(d));
  }
}

TEST(FitTree, PresortedAndPlainAgree) {
  std::mt19937_64 rng(29);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<bool> categorical;
    const Eigen::Index n = 10 + static_cast<Eigen::Index>(rng() % 300);
    const auto f = random_frame(rng, n, categorical);
    const Eigen::VectorXd y = random_target(rng, n);
    std::vector<std::size_t> sample(static_cast<std::size_t>(n));
    for (auto& s : sample) s = rng() % static_cast<std::size_t>(n);
    const TreeConfig cfg{.min_samples_leaf = 2};
    Rng a(trial), b(trial);
    const auto sorted = presort(f.values, f.layout, sample);
    const auto plain = fit_tree(f.values, f.layout, y, sample, cfg, a);
    const auto fast = fit_tree(f.values, f.layout, y, sample, cfg, b, &sorted);
    EXPECT_EQ(tree_to_json(plain, f.layout), tree_to_json(fast, f.layout));
  }
}

TEST(FitTree, FeatureSubsetIsSeedDeterministic) {
  const Eigen::MatrixXd X = Eigen::MatrixXd::Random(100, 6);
  const Eigen::VectorXd y = X.rowwise().sum();
  const TreeConfig cfg{.feature_subset_size = 2};
  const auto a = TreeModel::fit(testutil::numeric(X), y, cfg, 7);
  const auto b = TreeModel::fit(testutil::numeric(X), y, cfg, 7);
  EXPECT_EQ(a.to_json(), b.to_json());
}

TEST(FitTree, Errors) {
  Rng rng(1);
  const auto f = testutil::numeric(Eigen::MatrixXd(0, 1));
  EXPECT_ANY_THROW(fit_tree(f, Eigen::VectorXd(0), TreeConfig{}, rng));
  const auto g = testutil::numeric(Eigen::MatrixXd::Ones(3, 1));
  const std::vector<std::size_t> bad{0, 5};
  EXPECT_ANY_THROW(fit_tree(g.values, g.layout, Eigen::Vector3d(1, 2, 3), bad, TreeConfig{}, rng));
  EXPECT_ANY_THROW(TreeConfig{.min_samples_leaf = 0}.validate());
}

TEST(TreeModel, JsonRoundTripPredictsIdentically) {
  std::mt19937_64 rng(31);
  std::vector<bool> categorical;
  const auto f = random_frame(rng, 120, categorical);
  const Eigen::VectorXd y = random_target(rng, 120);
  const auto m = TreeModel::fit(f, y, TreeConfig{.min_samples_leaf = 3}, 4);
  const auto back = TreeModel::from_json(Json::parse(m.to_json().dump()));
  EXPECT_EQ(back.predict(f), m.predict(f));
  EXPECT_EQ(back.to_json(), m.to_json());
}
