#include "demandsg/tree.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "demandsg/dataset.hpp"

namespace demandsg {
namespace {

struct Candidate {
  std::int32_t feature = -1;
  double reduction = 0.0;
  double threshold = 0.0;
};

class TreeBuilder {
 public:
  TreeBuilder(const Eigen::MatrixXd& X, const FeatureLayout& layout,
              const Eigen::Ref<const Eigen::VectorXd>& y, std::span<const std::size_t> sample,
              const PresortedSample& presorted, const TreeConfig& cfg, Rng& rng)
      : X_(X),
        layout_(layout),
        y_(y),
        sample_(sample),
        presorted_(presorted),
        cfg_(cfg),
        rng_(rng),
        used_(layout.size(), false),
        stamp_(sample.size(), 0) {}

  // Nodes hold positions into the sample, so bootstrap repeats stay distinct.
  std::vector<TreeNode> build() {
    std::vector<std::size_t> positions(sample_.size());
    std::iota(positions.begin(), positions.end(), 0);
    grow(std::move(positions), 0);
    return std::move(nodes_);
  }

 private:
  std::int32_t grow(std::vector<std::size_t> rows, int depth) {
    const auto id = static_cast<std::int32_t>(nodes_.size());
    nodes_.emplace_back();

    std::vector<double> targets(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) targets[i] = y_[row(rows[i])];
    const double variance = node_variance(std::span<const double>(targets));
    nodes_[id].samples = rows.size();
    nodes_[id].prediction =
        std::accumulate(targets.begin(), targets.end(), 0.0) / static_cast<double>(targets.size());

    const bool stop = variance == 0.0 || variance < cfg_.variance_threshold ||
                      (cfg_.max_depth && depth >= *cfg_.max_depth) ||
                      rows.size() < 2 * cfg_.min_samples_leaf;
    if (stop) return id;

    const Candidate best = choose_split(rows, targets, variance);
    if (best.feature < 0) return id;

    const auto col = static_cast<Eigen::Index>(best.feature);
    const bool categorical = layout_[best.feature].kind == FeatureKind::Categorical;
    std::vector<std::vector<std::size_t>> parts;
    if (categorical) {
      std::map<std::int32_t, std::vector<std::size_t>> by_code;
      for (auto r : rows) by_code[static_cast<std::int32_t>(X_(row(r), col))].push_back(r);
      std::vector<std::int32_t> codes;
      for (auto& [code, part] : by_code) {
        codes.push_back(code);
        parts.push_back(std::move(part));
      }
      std::size_t fallback = 0;
      for (std::size_t c = 1; c < parts.size(); ++c) {
        if (parts[c].size() > parts[fallback].size()) fallback = c;
      }
      rows.clear();
      rows.shrink_to_fit();
      used_[best.feature] = true;
      std::vector<std::int32_t> child_ids;
      for (auto& part : parts) child_ids.push_back(grow(std::move(part), depth + 1));
      used_[best.feature] = false;

      TreeNode& node = nodes_[id];
      node.feature = best.feature;
      node.categorical = true;
      node.children.assign(static_cast<std::size_t>(codes.back()) + 1, -1);
      for (std::size_t c = 0; c < codes.size(); ++c) node.children[codes[c]] = child_ids[c];
      node.fallback = child_ids[fallback];
      return id;
    }

    std::vector<std::size_t> left, right;
    for (auto r : rows) {
      (X_(row(r), col) <= best.threshold ? left : right).push_back(r);
    }
    rows.clear();
    rows.shrink_to_fit();
    const auto l = grow(std::move(left), depth + 1);
    const auto r = grow(std::move(right), depth + 1);
    TreeNode& node = nodes_[id];
    node.feature = best.feature;
    node.threshold = best.threshold;
    node.children = {l, r};
    node.fallback = nodes_[l].samples >= nodes_[r].samples ? l : r;
    return id;
  }

  std::vector<std::size_t> candidate_features() {
    std::vector<std::size_t> available;
    for (std::size_t j = 0; j < layout_.size(); ++j) {
      if (!(layout_[j].kind == FeatureKind::Categorical && used_[j])) available.push_back(j);
    }
    if (!cfg_.feature_subset_size || *cfg_.feature_subset_size >= available.size()) return available;
    const std::size_t m = *cfg_.feature_subset_size;
    for (std::size_t i = 0; i < m; ++i) {
      std::swap(available[i], available[i + uniform_index(rng_, available.size() - i)]);
    }
    available.resize(m);
    std::sort(available.begin(), available.end());
    return available;
  }

  Candidate choose_split(const std::vector<std::size_t>& rows, const std::vector<double>& targets,
                         double variance) {
    const double tie = kSplitTieTolerance * variance;
    ++current_stamp_;
    for (auto p : rows) stamp_[p] = current_stamp_;
    Candidate best;
    for (auto j : candidate_features()) {
      auto c = layout_[j].kind == FeatureKind::Categorical ? categorical_split(j, rows, targets, variance)
                                                           : numeric_split(j, rows, targets, variance);
      if (c.feature < 0) continue;
      if (best.feature < 0 || c.reduction > best.reduction + tie) best = c;
    }
    return best;
  }

  Candidate categorical_split(std::size_t j, const std::vector<std::size_t>& rows,
                              const std::vector<double>& targets, double variance) {
    const std::size_t k = layout_[j].levels.size();
    counts_.assign(k, 0);
    sums_.assign(k, 0.0);
    codes_.resize(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto code = static_cast<std::size_t>(X_(row(rows[i]), static_cast<Eigen::Index>(j)));
      codes_[i] = code;
      ++counts_[code];
      sums_[code] += targets[i];
    }
    std::size_t groups = 0;
    for (auto c : counts_) {
      if (c == 0) continue;
      if (c < cfg_.min_samples_leaf) return {};
      ++groups;
    }
    if (groups < 2) return {};
    for (std::size_t c = 0; c < k; ++c) {
      if (counts_[c]) sums_[c] /= static_cast<double>(counts_[c]);
    }
    double sse = 0.0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const double d = targets[i] - sums_[codes_[i]];
      sse += d * d;
    }
    return {static_cast<std::int32_t>(j), variance - sse / static_cast<double>(rows.size()), 0.0};
  }

  Candidate numeric_split(std::size_t j, const std::vector<std::size_t>& rows,
                          const std::vector<double>& targets, double variance) {
    const std::size_t n = rows.size();
    const auto col = static_cast<Eigen::Index>(j);
    const double m = static_cast<double>(sample_.size());
    if (m < 4.0 * static_cast<double>(n) * std::log2(static_cast<double>(n) + 1.0)) {
      // Large node: filter the presorted column instead of sorting.
      pairs_.clear();
      for (auto p : presorted_.order[j]) {
        if (stamp_[p] == current_stamp_) pairs_.emplace_back(X_(row(p), col), y_[row(p)]);
      }
    } else {
      pairs_.resize(n);
      for (std::size_t i = 0; i < n; ++i) pairs_[i] = {X_(row(rows[i]), col), targets[i]};
      std::sort(pairs_.begin(), pairs_.end());
    }

    double mean = 0.0;
    for (const auto& [v, t] : pairs_) mean += t;
    mean /= static_cast<double>(n);
    double s1 = 0.0, s2 = 0.0;
    for (const auto& [v, t] : pairs_) {
      s1 += t - mean;
      s2 += (t - mean) * (t - mean);
    }
    const double nd = static_cast<double>(n);
    const double tie = kSplitTieTolerance * variance;

    bool found = false;
    double best_reduction = 0.0;
    std::size_t best_pos = 0;
    double l1 = 0.0, l2 = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      const double d = pairs_[i].second - mean;
      l1 += d;
      l2 += d * d;
      if (pairs_[i].first == pairs_[i + 1].first) continue;
      const std::size_t nl = i + 1, nr = n - nl;
      if (nl < cfg_.min_samples_leaf || nr < cfg_.min_samples_leaf) continue;
      const double sse_l = l2 - l1 * l1 / static_cast<double>(nl);
      const double r1 = s1 - l1, r2 = s2 - l2;
      const double sse_r = r2 - r1 * r1 / static_cast<double>(nr);
      const double reduction = variance - (sse_l + sse_r) / nd;
      if (!found || reduction > best_reduction + tie) {
        found = true;
        best_reduction = reduction;
        best_pos = i;
      }
    }
    if (!found) return {};

    const double lo = pairs_[best_pos].first;
    const double hi = pairs_[best_pos + 1].first;
    double threshold = lo + (hi - lo) / 2.0;
    if (!(threshold < hi)) threshold = lo;

    // Exact two-pass reduction of the chosen partition, computed the same way
    // as for categorical features so feature comparisons are like for like.
    const std::size_t nl = best_pos + 1;
    double ml = 0.0, mr = 0.0;
    for (std::size_t i = 0; i < n; ++i) (i < nl ? ml : mr) += pairs_[i].second;
    ml /= static_cast<double>(nl);
    mr /= static_cast<double>(n - nl);
    double sse = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = pairs_[i].second - (i < nl ? ml : mr);
      sse += d * d;
    }
    return {static_cast<std::int32_t>(j), variance - sse / nd, threshold};
  }

  Eigen::Index row(std::size_t position) const { return static_cast<Eigen::Index>(sample_[position]); }

  const Eigen::MatrixXd& X_;
  const FeatureLayout& layout_;
  const Eigen::Ref<const Eigen::VectorXd>& y_;
  std::span<const std::size_t> sample_;
  const PresortedSample& presorted_;
  const TreeConfig& cfg_;
  Rng& rng_;
  std::vector<bool> used_;
  std::vector<TreeNode> nodes_;
  std::vector<std::pair<double, double>> pairs_;
  std::vector<std::size_t> counts_;
  std::vector<double> sums_;
  std::vector<std::size_t> codes_;
  std::vector<std::uint32_t> stamp_;
  std::uint32_t current_stamp_ = 0;
};

Json node_to_json(const std::vector<TreeNode>& nodes, std::int32_t id, const FeatureLayout& layout) {
  const TreeNode& node = nodes[id];
  Json j;
  if (node.is_leaf()) {
    j["leaf"] = true;
    j["prediction"] = node.prediction;
    j["samples"] = node.samples;
    return j;
  }
  const auto& info = layout[node.feature];
  j["feature"] = info.name;
  j["prediction"] = node.prediction;
  j["samples"] = node.samples;
  if (!node.categorical) {
    j["threshold"] = node.threshold;
    j["left"] = node_to_json(nodes, node.children[0], layout);
    j["right"] = node_to_json(nodes, node.children[1], layout);
    return j;
  }
  Json children = Json::array();
  for (std::size_t code = 0; code < node.children.size(); ++code) {
    const auto child = node.children[code];
    if (child < 0) continue;
    if (child == node.fallback) j["fallback"] = info.levels.at(code);
    Json c;
    c["category"] = info.levels.at(code);
    c["node"] = node_to_json(nodes, child, layout);
    children.push_back(std::move(c));
  }
  j["children"] = std::move(children);
  return j;
}

std::int32_t node_from_json(const Json& j, const FeatureLayout& layout, std::vector<TreeNode>& nodes) {
  const auto id = static_cast<std::int32_t>(nodes.size());
  nodes.emplace_back();
  nodes[id].prediction = j.at("prediction").get<double>();
  nodes[id].samples = j.at("samples").get<std::size_t>();
  if (j.contains("leaf")) return id;

  const auto name = j.at("feature").get<std::string>();
  std::int32_t feature = -1;
  for (std::size_t f = 0; f < layout.size(); ++f) {
    if (layout[f].name == name) feature = static_cast<std::int32_t>(f);
  }
  if (feature < 0) throw DataError("tree references unknown feature '" + name + "'");
  const auto& info = layout[feature];

  if (j.contains("threshold")) {
    const auto l = node_from_json(j.at("left"), layout, nodes);
    const auto r = node_from_json(j.at("right"), layout, nodes);
    TreeNode& node = nodes[id];
    node.feature = feature;
    node.threshold = j.at("threshold").get<double>();
    node.children = {l, r};
    node.fallback = nodes[l].samples >= nodes[r].samples ? l : r;
    return id;
  }
  std::vector<std::pair<std::size_t, std::int32_t>> kids;
  const auto fallback_label = j.at("fallback").get<std::string>();
  std::int32_t fallback = -1;
  for (const auto& c : j.at("children")) {
    const auto label = c.at("category").get<std::string>();
    auto it = std::find(info.levels.begin(), info.levels.end(), label);
    if (it == info.levels.end()) throw DataError("tree references unknown category '" + label + "'");
    const auto child = node_from_json(c.at("node"), layout, nodes);
    kids.emplace_back(static_cast<std::size_t>(it - info.levels.begin()), child);
    if (label == fallback_label) fallback = child;
  }
  if (kids.empty() || fallback < 0) throw DataError("malformed categorical tree node");
  TreeNode& node = nodes[id];
  node.feature = feature;
  node.categorical = true;
  std::size_t width = 0;
  for (const auto& [code, child] : kids) width = std::max(width, code + 1);
  node.children.assign(width, -1);
  for (const auto& [code, child] : kids) node.children[code] = child;
  node.fallback = fallback;
  return id;
}

}  // namespace

void TreeConfig::validate() const {
  if (!(variance_threshold >= 0.0)) throw std::invalid_argument("tree: variance_threshold must be >= 0");
  if (min_samples_leaf < 1) throw std::invalid_argument("tree: min_samples_leaf must be >= 1");
  if (max_depth && *max_depth < 0) throw std::invalid_argument("tree: max_depth must be >= 0");
  if (feature_subset_size && *feature_subset_size < 1) {
    throw std::invalid_argument("tree: feature_subset_size must be >= 1");
  }
}

Eigen::VectorXd RegressionTree::predict(const Eigen::MatrixXd& aligned) const {
  Eigen::VectorXd out(aligned.rows());
  for (Eigen::Index r = 0; r < aligned.rows(); ++r) out[r] = predict_row(aligned.row(r));
  return out;
}

std::size_t RegressionTree::leaf_count() const {
  return static_cast<std::size_t>(
      std::count_if(nodes_.begin(), nodes_.end(), [](const TreeNode& n) { return n.is_leaf(); }));
}

std::size_t RegressionTree::depth() const {
  if (nodes_.empty()) return 0;
  std::vector<std::size_t> depth(nodes_.size(), 0);
  std::size_t deepest = 0;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    deepest = std::max(deepest, depth[i]);
    for (auto c : nodes_[i].children) {
      if (c >= 0) depth[c] = depth[i] + 1;
    }
  }
  return deepest;
}

PresortedSample presort(const Eigen::MatrixXd& X, const FeatureLayout& layout,
                        std::span<const std::size_t> sample) {
  PresortedSample out;
  out.order.resize(layout.size());
  for (std::size_t j = 0; j < layout.size(); ++j) {
    if (layout[j].kind == FeatureKind::Categorical) continue;
    auto& order = out.order[j];
    order.resize(sample.size());
    std::iota(order.begin(), order.end(), 0u);
    const auto col = static_cast<Eigen::Index>(j);
    std::stable_sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
      return X(static_cast<Eigen::Index>(sample[a]), col) < X(static_cast<Eigen::Index>(sample[b]), col);
    });
  }
  return out;
}

RegressionTree fit_tree(const Eigen::MatrixXd& X, const FeatureLayout& layout,
                        const Eigen::Ref<const Eigen::VectorXd>& y,
                        std::span<const std::size_t> sample, const TreeConfig& cfg, Rng& rng,
                        const PresortedSample* presorted) {
  cfg.validate();
  if (sample.empty()) throw DataError("fit_tree: no training rows");
  if (X.rows() != y.size()) throw DataError("fit_tree: row count of X and y differ");
  if (X.cols() != static_cast<Eigen::Index>(layout.size())) throw DataError("fit_tree: layout width mismatch");
  if (sample.size() > std::numeric_limits<std::uint32_t>::max()) throw DataError("fit_tree: sample too large");
  for (auto r : sample) {
    if (r >= static_cast<std::size_t>(X.rows())) throw DataError("fit_tree: sample index out of range");
  }
  PresortedSample local;
  if (!presorted) {
    local = presort(X, layout, sample);
    presorted = &local;
  } else if (presorted->order.size() != layout.size()) {
    throw std::invalid_argument("fit_tree: presorted sample does not match the layout");
  }
  TreeBuilder builder(X, layout, y, sample, *presorted, cfg, rng);
  return RegressionTree(builder.build());
}

RegressionTree fit_tree(const FeatureFrame& frame, const Eigen::Ref<const Eigen::VectorXd>& y,
                        const TreeConfig& cfg, Rng& rng) {
  std::vector<std::size_t> all(static_cast<std::size_t>(frame.rows()));
  std::iota(all.begin(), all.end(), 0);
  return fit_tree(frame.values, frame.layout, y, all, cfg, rng);
}

Json tree_to_json(const RegressionTree& tree, const FeatureLayout& layout) {
  return node_to_json(tree.nodes(), 0, layout);
}

RegressionTree tree_from_json(const Json& j, const FeatureLayout& layout) {
  std::vector<TreeNode> nodes;
  node_from_json(j, layout, nodes);
  return RegressionTree(std::move(nodes));
}

TreeModel TreeModel::fit(const FeatureFrame& frame, const Eigen::Ref<const Eigen::VectorXd>& y,
                         const TreeConfig& cfg, std::uint64_t seed) {
  Rng rng(seed);
  return TreeModel(frame.layout, fit_tree(frame, y, cfg, rng));
}

Eigen::VectorXd TreeModel::predict(const FeatureFrame& frame) const {
  return tree_.predict(align(frame, layout_).values);
}

Json TreeModel::to_json() const {
  Json j;
  j["type"] = "tree";
  j["layout"] = layout_to_json(layout_);
  j["root"] = tree_to_json(tree_, layout_);
  return j;
}

TreeModel TreeModel::from_json(const Json& j) {
  auto layout = layout_from_json(j.at("layout"));
  auto tree = tree_from_json(j.at("root"), layout);
  return TreeModel(std::move(layout), std::move(tree));
}

}  // namespace demandsg
