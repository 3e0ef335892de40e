#include "demandsg/ensemble.hpp"

#include <cmath>
#include <string>

#include "demandsg/dataset.hpp"
#include "demandsg/parallel.hpp"

namespace demandsg {

BootstrapSample bootstrap_sample(std::size_t n, Rng& rng) {
  if (n == 0) throw DataError("bootstrap_sample: n must be >= 1");
  BootstrapSample s;
  s.in_bag.resize(n);
  std::vector<bool> drawn(n, false);
  for (auto& idx : s.in_bag) {
    idx = uniform_index(rng, n);
    drawn[idx] = true;
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!drawn[i]) s.out_of_bag.push_back(i);
  }
  return s;
}

ForestModel ForestModel::fit(const FeatureFrame& frame, const Eigen::Ref<const Eigen::VectorXd>& y,
                             const ForestConfig& cfg) {
  const auto n = static_cast<std::size_t>(frame.rows());
  const auto p = static_cast<std::size_t>(frame.cols());
  if (n < 2) throw DataError("fit_forest: needs at least 2 rows");
  if (static_cast<std::size_t>(y.size()) != n) throw DataError("fit_forest: row count of X and y differ");
  if (cfg.n_trees < 1) throw std::invalid_argument("forest: n_trees must be >= 1");
  if (p == 0) throw DataError("fit_forest: no feature columns");
  const std::size_t subset =
      cfg.feature_subset_size.value_or(std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(p))))));
  if (subset < 1 || subset > p) {
    throw std::invalid_argument("forest: feature_subset_size " + std::to_string(subset) +
                                " must lie in [1, " + std::to_string(p) + "]");
  }
  TreeConfig tree_cfg = cfg.tree;
  tree_cfg.feature_subset_size = subset;
  tree_cfg.validate();

  std::vector<RegressionTree> trees(cfg.n_trees);
  std::vector<BootstrapSample> logs(cfg.n_trees);
  parallel_for(cfg.n_trees, cfg.threads, [&](std::size_t t) {
    Rng rng(derive_seed(cfg.seed, "tree", t));
    logs[t] = bootstrap_sample(n, rng);
    trees[t] = fit_tree(frame.values, frame.layout, y, logs[t].in_bag, tree_cfg, rng);
  });

  Eigen::VectorXd oob_sum = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  std::vector<std::size_t> oob_count(n, 0);
  for (std::size_t t = 0; t < cfg.n_trees; ++t) {
    for (auto i : logs[t].out_of_bag) {
      oob_sum[static_cast<Eigen::Index>(i)] += trees[t].predict_row(frame.values.row(static_cast<Eigen::Index>(i)));
      ++oob_count[i];
    }
  }
  double sse = 0.0;
  std::size_t covered = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (oob_count[i] == 0) continue;
    const auto r = static_cast<Eigen::Index>(i);
    const double err = oob_sum[r] / static_cast<double>(oob_count[i]) - y[r];
    sse += err * err;
    ++covered;
  }
  ForestModel model(frame.layout, std::move(trees),
                    covered ? std::sqrt(sse / static_cast<double>(covered)) : 0.0, n - covered);
  model.bootstrap_logs_ = std::move(logs);
  return model;
}

Eigen::VectorXd ForestModel::predict(const FeatureFrame& frame) const {
  const Eigen::MatrixXd x = align(frame, layout_).values;
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(x.rows());
  for (const auto& t : trees_) sum += t.predict(x);
  return sum / static_cast<double>(trees_.size());
}

Json ForestModel::to_json() const {
  Json j;
  j["type"] = "forest";
  j["layout"] = layout_to_json(layout_);
  j["oob_rmse"] = oob_rmse_;
  j["oob_uncovered"] = oob_uncovered_;
  Json trees = Json::array();
  for (const auto& t : trees_) trees.push_back(tree_to_json(t, layout_));
  j["trees"] = std::move(trees);
  return j;
}

ForestModel ForestModel::from_json(const Json& j) {
  auto layout = layout_from_json(j.at("layout"));
  std::vector<RegressionTree> trees;
  for (const auto& t : j.at("trees")) trees.push_back(tree_from_json(t, layout));
  if (trees.empty()) throw DataError("forest model has no trees");
  return ForestModel(std::move(layout), std::move(trees), j.at("oob_rmse").get<double>(),
                     j.at("oob_uncovered").get<std::size_t>());
}

void GbtConfig::validate() const {
  if (n_stages < 1) throw std::invalid_argument("gbt: n_stages must be >= 1");
  if (!(learning_rate > 0.0 && learning_rate <= 1.0)) throw std::invalid_argument("gbt: learning_rate must lie in (0, 1]");
  tree.validate();
}

GbtModel GbtModel::fit(const FeatureFrame& frame, const Eigen::Ref<const Eigen::VectorXd>& y,
                       const GbtConfig& cfg) {
  cfg.validate();
  const auto n = static_cast<std::size_t>(frame.rows());
  if (n < 2) throw DataError("fit_gbt: needs at least 2 rows");
  if (static_cast<std::size_t>(y.size()) != n) throw DataError("fit_gbt: row count of X and y differ");
  if (!y.allFinite()) throw DataError("fit_gbt: non-finite targets");

  std::vector<std::size_t> all(n);
  for (std::size_t i = 0; i < n; ++i) all[i] = i;
  Rng rng(derive_seed(cfg.seed, "gbt"));
  const PresortedSample sorted = presort(frame.values, frame.layout, all);

  const double initial = y.mean();
  Eigen::VectorXd F = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n), initial);
  std::vector<RegressionTree> stages;
  std::vector<double> losses;
  stages.reserve(cfg.n_stages);
  for (std::size_t s = 0; s < cfg.n_stages; ++s) {
    const Eigen::VectorXd residual = y - F;
    stages.push_back(fit_tree(frame.values, frame.layout, residual, all, cfg.tree, rng, &sorted));
    F += cfg.learning_rate * stages.back().predict(frame.values);
    losses.push_back((y - F).squaredNorm());
  }
  return GbtModel(frame.layout, initial, cfg.learning_rate, std::move(stages), std::move(losses));
}

Eigen::VectorXd GbtModel::predict(const FeatureFrame& frame) const {
  const Eigen::MatrixXd x = align(frame, layout_).values;
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(x.rows());
  for (const auto& t : stages_) sum += t.predict(x);
  return (learning_rate_ * sum).array() + initial_;
}

Json GbtModel::to_json() const {
  Json j;
  j["type"] = "gbt";
  j["layout"] = layout_to_json(layout_);
  j["initial_prediction"] = initial_;
  j["learning_rate"] = learning_rate_;
  j["stage_losses"] = stage_losses_;
  Json stages = Json::array();
  for (const auto& t : stages_) stages.push_back(tree_to_json(t, layout_));
  j["stages"] = std::move(stages);
  return j;
}

GbtModel GbtModel::from_json(const Json& j) {
  auto layout = layout_from_json(j.at("layout"));
  std::vector<RegressionTree> stages;
  for (const auto& t : j.at("stages")) stages.push_back(tree_from_json(t, layout));
  return GbtModel(std::move(layout), j.at("initial_prediction").get<double>(),
                  j.at("learning_rate").get<double>(), std::move(stages),
                  j.at("stage_losses").get<std::vector<double>>());
}

Json tree_config_to_json(const TreeConfig& cfg) {
  Json j;
  j["variance_threshold"] = cfg.variance_threshold;
  j["max_depth"] = cfg.max_depth ? Json(*cfg.max_depth) : Json(nullptr);
  j["min_samples_leaf"] = cfg.min_samples_leaf;
  j["feature_subset_size"] = cfg.feature_subset_size ? Json(*cfg.feature_subset_size) : Json(nullptr);
  return j;
}

TreeConfig tree_config_from_json(const Json& j, TreeConfig cfg) {
  if (j.contains("variance_threshold")) cfg.variance_threshold = j["variance_threshold"].get<double>();
  if (j.contains("max_depth")) {
    cfg.max_depth = j["max_depth"].is_null() ? std::nullopt : std::optional<int>(j["max_depth"].get<int>());
  }
  if (j.contains("min_samples_leaf")) cfg.min_samples_leaf = j["min_samples_leaf"].get<std::size_t>();
  if (j.contains("feature_subset_size")) {
    cfg.feature_subset_size = j["feature_subset_size"].is_null()
                                  ? std::nullopt
                                  : std::optional<std::size_t>(j["feature_subset_size"].get<std::size_t>());
  }
  cfg.validate();
  return cfg;
}

}  // namespace demandsg
