#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "demandsg/random.hpp"
#include "demandsg/regressor.hpp"

namespace demandsg {

struct TreeConfig {
  double variance_threshold = 0.0;  // a node with variance below this is a leaf
  std::optional<int> max_depth;     // root has depth 0; unset = unlimited
  std::size_t min_samples_leaf = 1;
  // Features drawn (without replacement) as split candidates at each node;
  // unset = all features.
  std::optional<std::size_t> feature_subset_size;

  void validate() const;
};

// Split candidates whose variance reductions differ by less than this
// fraction of the node variance are ties; ties go to the earlier feature in
// layout order, then to the smaller numeric threshold.
inline constexpr double kSplitTieTolerance = 1e-12;

// Population variance (divisor n) of the targets.
template <typename Derived>
double node_variance(const Eigen::DenseBase<Derived>& targets) {
  if (targets.size() == 0) throw std::invalid_argument("node_variance: empty target vector");
  const double mean = targets.derived().mean();
  return (targets.derived().array() - mean).square().sum() / static_cast<double>(targets.size());
}

inline double node_variance(std::span<const double> targets) {
  return node_variance(Eigen::Map<const Eigen::VectorXd>(targets.data(),
                                                         static_cast<Eigen::Index>(targets.size())));
}

// Weighted within-category variance: sum over distinct values c of
// P(c) * variance(targets with value c).
template <typename Value>
double split_variance(std::span<const Value> feature_values, std::span<const double> targets) {
  if (feature_values.size() != targets.size()) {
    throw std::invalid_argument("split_variance: feature and target lengths differ");
  }
  if (targets.empty()) throw std::invalid_argument("split_variance: empty input");
  std::map<Value, std::vector<double>> groups;
  for (std::size_t i = 0; i < targets.size(); ++i) groups[feature_values[i]].push_back(targets[i]);
  const double n = static_cast<double>(targets.size());
  double total = 0.0;
  for (const auto& [value, ys] : groups) {
    total += static_cast<double>(ys.size()) / n * node_variance(std::span<const double>(ys));
  }
  return total;
}

template <typename Value>
double variance_reduction(std::span<const Value> feature_values, std::span<const double> targets) {
  return node_variance(targets) - split_variance(feature_values, targets);
}

// Arena node. Leaves have feature < 0. Categorical children are indexed by
// level code (-1 where the category never reached this node); numeric nodes
// send value <= threshold to children[0] and the rest to children[1].
struct TreeNode {
  std::int32_t feature = -1;
  bool categorical = false;
  double threshold = 0.0;
  std::vector<std::int32_t> children;
  std::int32_t fallback = -1;  // most-populous child, for unseen categories
  double prediction = 0.0;     // mean of training targets reaching the node
  std::size_t samples = 0;

  bool is_leaf() const { return feature < 0; }
};

class RegressionTree {
 public:
  RegressionTree() = default;
  explicit RegressionTree(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) {}

  // Row values must follow the training layout (see align()).
  template <typename Row>
  double predict_row(const Row& row) const {
    std::int32_t i = 0;
    while (!nodes_[i].is_leaf()) {
      const TreeNode& node = nodes_[i];
      const double v = row[node.feature];
      if (node.categorical) {
        const auto code = static_cast<std::int64_t>(v);
        std::int32_t next = -1;
        if (v >= 0 && code < static_cast<std::int64_t>(node.children.size())) next = node.children[code];
        i = next >= 0 ? next : node.fallback;
      } else {
        i = v <= node.threshold ? node.children[0] : node.children[1];
      }
    }
    return nodes_[i].prediction;
  }

  Eigen::VectorXd predict(const Eigen::MatrixXd& aligned) const;

  const std::vector<TreeNode>& nodes() const { return nodes_; }
  std::size_t leaf_count() const;
  std::size_t depth() const;

 private:
  std::vector<TreeNode> nodes_;
};

// For each numeric feature, positions into `sample` ordered by value. Trees
// grown repeatedly on one sample (boosting stages) can share it.
struct PresortedSample {
  std::vector<std::vector<std::uint32_t>> order;  // empty for categorical features
};

PresortedSample presort(const Eigen::MatrixXd& X, const FeatureLayout& layout,
                        std::span<const std::size_t> sample);

// Grows a variance-reduction tree on the rows listed in `sample` (repeats
// allowed, as in a bootstrap sample). `X` is an aligned feature matrix whose
// column kinds are given by `layout`. `presorted`, when given, must come from
// presort() on the same X and sample.
RegressionTree fit_tree(const Eigen::MatrixXd& X, const FeatureLayout& layout,
                        const Eigen::Ref<const Eigen::VectorXd>& y,
                        std::span<const std::size_t> sample, const TreeConfig& cfg, Rng& rng,
                        const PresortedSample* presorted = nullptr);

// Convenience overload over every row.
RegressionTree fit_tree(const FeatureFrame& frame, const Eigen::Ref<const Eigen::VectorXd>& y,
                        const TreeConfig& cfg, Rng& rng);

// Nested depth-first representation with category labels and feature names.
Json tree_to_json(const RegressionTree& tree, const FeatureLayout& layout);
RegressionTree tree_from_json(const Json& j, const FeatureLayout& layout);

class TreeModel final : public Regressor {
 public:
  TreeModel(FeatureLayout layout, RegressionTree tree)
      : layout_(std::move(layout)), tree_(std::move(tree)) {}

  static TreeModel fit(const FeatureFrame& frame, const Eigen::Ref<const Eigen::VectorXd>& y,
                       const TreeConfig& cfg, std::uint64_t seed);

  Eigen::VectorXd predict(const FeatureFrame& frame) const override;
  const FeatureLayout& layout() const override { return layout_; }
  std::string_view type_name() const override { return "tree"; }
  Json to_json() const override;
  static TreeModel from_json(const Json& j);

  const RegressionTree& tree() const { return tree_; }

 private:
  FeatureLayout layout_;
  RegressionTree tree_;
};

}  // namespace demandsg
