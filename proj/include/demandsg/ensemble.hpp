#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "demandsg/tree.hpp"

namespace demandsg {

struct BootstrapSample {
  std::vector<std::size_t> in_bag;      // n draws with replacement, in draw order
  std::vector<std::size_t> out_of_bag;  // indices never drawn, ascending
};

BootstrapSample bootstrap_sample(std::size_t n, Rng& rng);

struct ForestConfig {
  std::size_t n_trees = 20;
  // Per-node candidate feature count; unset = floor(sqrt(p)).
  std::optional<std::size_t> feature_subset_size;
  TreeConfig tree;
  std::uint64_t seed = 0;
  std::size_t threads = 1;  // 0 = hardware concurrency
};

class ForestModel final : public Regressor {
 public:
  ForestModel(FeatureLayout layout, std::vector<RegressionTree> trees, double oob_rmse = 0.0,
              std::size_t oob_uncovered = 0)
      : layout_(std::move(layout)),
        trees_(std::move(trees)),
        oob_rmse_(oob_rmse),
        oob_uncovered_(oob_uncovered) {}

  // Each tree is grown on its own bootstrap sample with a random stream
  // derived from (seed, tree index), so results do not depend on threading.
  static ForestModel fit(const FeatureFrame& frame, const Eigen::Ref<const Eigen::VectorXd>& y,
                         const ForestConfig& cfg);

  Eigen::VectorXd predict(const FeatureFrame& frame) const override;
  const FeatureLayout& layout() const override { return layout_; }
  std::string_view type_name() const override { return "forest"; }
  Json to_json() const override;
  static ForestModel from_json(const Json& j);

  const std::vector<RegressionTree>& trees() const { return trees_; }
  const std::vector<BootstrapSample>& bootstrap_logs() const { return bootstrap_logs_; }
  // RMSE of out-of-bag predictions, over rows left out by at least one tree.
  double oob_rmse() const { return oob_rmse_; }
  // Rows that every tree drew in-bag; excluded from oob_rmse.
  std::size_t oob_uncovered() const { return oob_uncovered_; }

 private:
  FeatureLayout layout_;
  std::vector<RegressionTree> trees_;
  std::vector<BootstrapSample> bootstrap_logs_;
  double oob_rmse_;
  std::size_t oob_uncovered_;
};

struct GbtConfig {
  std::size_t n_stages = 100;
  double learning_rate = 0.1;
  TreeConfig tree{.max_depth = 3};
  std::uint64_t seed = 0;

  void validate() const;
};

// F(x) = initial + learning_rate * sum of stage trees, each stage fit to the
// residuals y - F_{s-1}(x) of squared-error loss.
class GbtModel final : public Regressor {
 public:
  GbtModel(FeatureLayout layout, double initial, double learning_rate,
           std::vector<RegressionTree> stages, std::vector<double> stage_losses = {})
      : layout_(std::move(layout)),
        initial_(initial),
        learning_rate_(learning_rate),
        stages_(std::move(stages)),
        stage_losses_(std::move(stage_losses)) {}

  static GbtModel fit(const FeatureFrame& frame, const Eigen::Ref<const Eigen::VectorXd>& y,
                      const GbtConfig& cfg);

  Eigen::VectorXd predict(const FeatureFrame& frame) const override;
  const FeatureLayout& layout() const override { return layout_; }
  std::string_view type_name() const override { return "gbt"; }
  Json to_json() const override;
  static GbtModel from_json(const Json& j);

  double initial_prediction() const { return initial_; }
  double learning_rate() const { return learning_rate_; }
  const std::vector<RegressionTree>& stages() const { return stages_; }
  // Training loss J = sum (y - F_s(x))^2 after each stage.
  const std::vector<double>& stage_losses() const { return stage_losses_; }

 private:
  FeatureLayout layout_;
  double initial_;
  double learning_rate_;
  std::vector<RegressionTree> stages_;
  std::vector<double> stage_losses_;
};

Json tree_config_to_json(const TreeConfig& cfg);
TreeConfig tree_config_from_json(const Json& j, TreeConfig defaults = {});

}  // namespace demandsg
