#include "demandsg/stacking.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "demandsg/dataset.hpp"
#include "demandsg/model_io.hpp"

namespace demandsg {

std::string_view to_string(LearnerKind kind) {
  switch (kind) {
    case LearnerKind::LR: return "LR";
    case LearnerKind::DT: return "DT";
    case LearnerKind::RF: return "RF";
    case LearnerKind::GBT: return "GBT";
  }
  return "?";
}

LearnerKind parse_learner_kind(std::string_view text) {
  if (text == "LR") return LearnerKind::LR;
  if (text == "DT") return LearnerKind::DT;
  if (text == "RF") return LearnerKind::RF;
  if (text == "GBT") return LearnerKind::GBT;
  throw std::invalid_argument("unknown learner kind '" + std::string(text) + "' (expected LR, DT, RF or GBT)");
}

LearnerKind kind_of(const LearnerConfig& cfg) {
  switch (cfg.index()) {
    case 0: return LearnerKind::LR;
    case 1: return LearnerKind::DT;
    case 2: return LearnerKind::RF;
    default: return LearnerKind::GBT;
  }
}

void LearnerSpec::validate() const {
  if (label.empty()) throw std::invalid_argument("learner spec has an empty label");
  if (grid.empty()) throw std::invalid_argument("learner '" + label + "' has an empty grid");
  for (const auto& cfg : grid) {
    if (kind_of(cfg) != kind) {
      throw std::invalid_argument("learner '" + label + "' mixes configurations of different kinds");
    }
  }
}

LearnerSpec default_learner(LearnerKind kind) {
  LearnerSpec spec{std::string(to_string(kind)), kind, {}};
  switch (kind) {
    case LearnerKind::LR:
      for (double lambda : {0.1, 0.3, 1.0}) spec.grid.emplace_back(ElasticNetConfig{.lambda = lambda});
      break;
    case LearnerKind::DT:
      spec.grid.emplace_back(TreeConfig{.max_depth = 3});
      spec.grid.emplace_back(TreeConfig{.max_depth = 6});
      spec.grid.emplace_back(TreeConfig{});
      break;
    case LearnerKind::RF:
      spec.grid.emplace_back(ForestConfig{});
      break;
    case LearnerKind::GBT:
      for (double rate : {0.05, 0.1}) {
        for (std::size_t stages : {50, 100}) {
          spec.grid.emplace_back(GbtConfig{.n_stages = stages, .learning_rate = rate});
        }
      }
      break;
  }
  return spec;
}

LearnerSpec default_combiner(LearnerKind kind) {
  LearnerSpec spec{std::string(to_string(kind)), kind, {}};
  switch (kind) {
    case LearnerKind::LR: spec.grid.emplace_back(ElasticNetConfig{.standardize = false}); break;
    case LearnerKind::DT: spec.grid.emplace_back(TreeConfig{.max_depth = 6, .min_samples_leaf = 5}); break;
    case LearnerKind::RF: spec.grid.emplace_back(ForestConfig{}); break;
    case LearnerKind::GBT: spec.grid.emplace_back(GbtConfig{}); break;
  }
  return spec;
}

RegressorPtr fit_learner(const LearnerConfig& cfg, const FeatureFrame& frame,
                         const Eigen::Ref<const Eigen::VectorXd>& y, std::uint64_t seed) {
  return std::visit(
      [&](const auto& c) -> RegressorPtr {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, ElasticNetConfig>) {
          return std::make_shared<LinearModel>(LinearModel::fit(frame, y, c));
        } else if constexpr (std::is_same_v<T, TreeConfig>) {
          return std::make_shared<TreeModel>(TreeModel::fit(frame, y, c, seed));
        } else if constexpr (std::is_same_v<T, ForestConfig>) {
          ForestConfig fc = c;
          fc.seed = seed;
          return std::make_shared<ForestModel>(ForestModel::fit(frame, y, fc));
        } else {
          GbtConfig gc = c;
          gc.seed = seed;
          return std::make_shared<GbtModel>(GbtModel::fit(frame, y, gc));
        }
      },
      cfg);
}

namespace {

double cv_rmse(const LearnerConfig& cfg, const FeatureFrame& train,
               const Eigen::Ref<const Eigen::VectorXd>& y, const FoldPlan& folds, std::uint64_t seed) {
  double sse = 0.0;
  for (std::size_t f = 0; f < folds.k; ++f) {
    const auto fit_rows = folds.training_positions(f);
    const auto hold_rows = folds.holdout_positions(f);
    if (hold_rows.empty()) continue;
    Eigen::VectorXd y_fit(static_cast<Eigen::Index>(fit_rows.size()));
    for (std::size_t i = 0; i < fit_rows.size(); ++i) y_fit[static_cast<Eigen::Index>(i)] = y[static_cast<Eigen::Index>(fit_rows[i])];
    auto model = fit_learner(cfg, take_rows(train, fit_rows), y_fit, derive_seed(seed, "fold", f));
    const Eigen::VectorXd pred = model->predict(take_rows(train, hold_rows));
    for (std::size_t i = 0; i < hold_rows.size(); ++i) {
      const double e = pred[static_cast<Eigen::Index>(i)] - y[static_cast<Eigen::Index>(hold_rows[i])];
      sse += e * e;
    }
  }
  return std::sqrt(sse / static_cast<double>(y.size()));
}

void sort_by_label(std::vector<TrainedLearner>& learners) {
  std::stable_sort(learners.begin(), learners.end(),
                   [](const TrainedLearner& a, const TrainedLearner& b) { return a.label < b.label; });
  for (std::size_t i = 1; i < learners.size(); ++i) {
    if (learners[i].label == learners[i - 1].label) {
      throw std::invalid_argument("duplicate first-level learner label '" + learners[i].label + "'");
    }
  }
}

}  // namespace

std::vector<TrainedLearner> train_first_level(const FeatureFrame& train,
                                              const Eigen::Ref<const Eigen::VectorXd>& y,
                                              std::span<const LearnerSpec> specs,
                                              const FoldPlan& folds, std::uint64_t seed) {
  if (specs.empty()) throw std::invalid_argument("train_first_level: no learner specs");
  if (folds.assignments.size() != static_cast<std::size_t>(train.rows()) ||
      static_cast<std::size_t>(y.size()) != folds.assignments.size()) {
    throw DataError("fold plan covers " + std::to_string(folds.assignments.size()) +
                    " rows but the training slice has " + std::to_string(train.rows()));
  }
  for (auto a : folds.assignments) {
    if (a >= folds.k) throw DataError("fold plan assigns a row to a fold beyond k");
  }

  std::vector<TrainedLearner> out;
  for (const auto& spec : specs) {
    spec.validate();
    const auto learner_seed = derive_seed(seed, "learner/" + spec.label);
    TrainedLearner t;
    t.label = spec.label;
    if (spec.kind == LearnerKind::RF) {
      // Out-of-bag error replaces cross-validation for forests.
      t.oob_score = true;
      for (std::size_t g = 0; g < spec.grid.size(); ++g) {
        auto model = fit_learner(spec.grid[g], train, y, learner_seed);
        const double score = static_cast<const ForestModel&>(*model).oob_rmse();
        t.grid_scores.push_back(score);
        if (!t.model || score < t.score) {
          t.model = std::move(model);
          t.score = score;
          t.chosen = g;
        }
      }
    } else {
      for (std::size_t g = 0; g < spec.grid.size(); ++g) {
        t.grid_scores.push_back(spec.grid.size() == 1
                                    ? std::numeric_limits<double>::quiet_NaN()
                                    : cv_rmse(spec.grid[g], train, y, folds, derive_seed(learner_seed, "cv", g)));
      }
      for (std::size_t g = 1; g < t.grid_scores.size(); ++g) {
        if (t.grid_scores[g] < t.grid_scores[t.chosen]) t.chosen = g;
      }
      t.score = t.grid_scores[t.chosen];
      t.model = fit_learner(spec.grid[t.chosen], train, y, learner_seed);
    }
    out.push_back(std::move(t));
  }
  return out;
}

Eigen::MatrixXd build_meta_features(std::span<const TrainedLearner> models, const FeatureFrame& rows) {
  Eigen::MatrixXd meta(rows.rows(), static_cast<Eigen::Index>(models.size()));
  for (std::size_t j = 0; j < models.size(); ++j) {
    meta.col(static_cast<Eigen::Index>(j)) = models[j].model->predict(rows);
  }
  return meta;
}

StackedModel::StackedModel(FeatureLayout layout, std::vector<TrainedLearner> first_level,
                           RegressorPtr second_level)
    : layout_(std::move(layout)), first_level_(std::move(first_level)), second_(std::move(second_level)) {
  if (first_level_.empty()) throw std::invalid_argument("stacked model needs at least one first-level learner");
  const auto names = meta_layout();
  if (second_->layout().size() != names.size()) {
    throw std::invalid_argument("second-level input width does not match the number of first-level learners");
  }
  for (std::size_t j = 0; j < names.size(); ++j) {
    if (second_->layout()[j].name != names[j]) {
      throw std::invalid_argument("second-level layout does not follow the meta-feature layout");
    }
  }
}

std::vector<std::string> StackedModel::meta_layout() const {
  std::vector<std::string> names;
  for (const auto& t : first_level_) names.push_back(t.label);
  return names;
}

Eigen::MatrixXd StackedModel::meta_features(const FeatureFrame& frame) const {
  return build_meta_features(first_level_, frame);
}

Eigen::VectorXd StackedModel::predict(const FeatureFrame& frame) const {
  return second_->predict(numeric_frame(meta_features(frame), meta_layout()));
}

Json StackedModel::to_json() const {
  Json j;
  j["type"] = "stacked";
  j["layout"] = layout_to_json(layout_);
  j["meta_layout"] = meta_layout();
  Json first = Json::array();
  for (const auto& t : first_level_) {
    Json e;
    e["label"] = t.label;
    e["chosen"] = t.chosen;
    e["score"] = std::isfinite(t.score) ? Json(t.score) : Json(nullptr);
    e["oob_score"] = t.oob_score;
    e["model"] = t.model->to_json();
    first.push_back(std::move(e));
  }
  j["first_level"] = std::move(first);
  j["second_level"] = second_->to_json();
  return j;
}

StackedModel StackedModel::from_json(const Json& j) {
  std::vector<TrainedLearner> first;
  for (const auto& e : j.at("first_level")) {
    TrainedLearner t;
    t.label = e.at("label").get<std::string>();
    t.chosen = e.at("chosen").get<std::size_t>();
    t.score = e.at("score").is_null() ? std::numeric_limits<double>::quiet_NaN() : e.at("score").get<double>();
    t.oob_score = e.at("oob_score").get<bool>();
    t.model = model_from_json(e.at("model"));
    first.push_back(std::move(t));
  }
  const auto manifest = j.at("meta_layout").get<std::vector<std::string>>();
  if (manifest.size() != first.size()) throw DataError("stacked model: layout manifest does not match members");
  for (std::size_t i = 0; i < first.size(); ++i) {
    if (manifest[i] != first[i].label) throw DataError("stacked model: layout manifest does not match members");
  }
  return StackedModel(layout_from_json(j.at("layout")), std::move(first),
                      model_from_json(j.at("second_level")));
}

StackedModel stack_models(std::vector<TrainedLearner> first_level, const FeatureFrame& validation,
                          const Eigen::Ref<const Eigen::VectorXd>& y_validation,
                          const LearnerSpec& second_spec, std::uint64_t seed) {
  if (first_level.empty()) throw std::invalid_argument("stacking needs at least one first-level learner");
  if (validation.rows() == 0) throw DataError("stacking: validation set is empty");
  second_spec.validate();
  sort_by_label(first_level);
  std::vector<std::string> names;
  for (const auto& t : first_level) names.push_back(t.label);
  FeatureFrame meta = numeric_frame(build_meta_features(first_level, validation), names);
  RegressorPtr second = fit_learner(second_spec.grid.front(), meta, y_validation, derive_seed(seed, "combiner"));
  return StackedModel(validation.layout, std::move(first_level), std::move(second));
}

StackedModel train_stacked(const FeatureFrame& train, const Eigen::Ref<const Eigen::VectorXd>& y_train,
                           const FeatureFrame& validation,
                           const Eigen::Ref<const Eigen::VectorXd>& y_validation,
                           std::span<const LearnerSpec> first_specs, const LearnerSpec& second_spec,
                           const FoldPlan& folds, std::uint64_t seed) {
  if (validation.rows() == 0) throw DataError("stacking: validation set is empty");
  auto first = train_first_level(train, y_train, first_specs, folds, seed);
  return stack_models(std::move(first), align(validation, train.layout), y_validation, second_spec, seed);
}

Json learner_config_to_json(const LearnerConfig& cfg) {
  return std::visit(
      [](const auto& c) -> Json {
        using T = std::decay_t<decltype(c)>;
        Json j;
        if constexpr (std::is_same_v<T, ElasticNetConfig>) {
          j["lambda"] = c.lambda;
          j["l1_ratio"] = c.l1_ratio;
          j["max_iters"] = c.max_iters;
          j["tol"] = c.tol;
          j["standardize"] = c.standardize;
          j["fit_intercept"] = c.fit_intercept;
        } else if constexpr (std::is_same_v<T, TreeConfig>) {
          j = tree_config_to_json(c);
        } else if constexpr (std::is_same_v<T, ForestConfig>) {
          j["n_trees"] = c.n_trees;
          j["feature_subset_size"] = c.feature_subset_size ? Json(*c.feature_subset_size) : Json(nullptr);
          j["tree"] = tree_config_to_json(c.tree);
        } else {
          j["n_stages"] = c.n_stages;
          j["learning_rate"] = c.learning_rate;
          j["tree"] = tree_config_to_json(c.tree);
        }
        return j;
      },
      cfg);
}

LearnerConfig learner_config_from_json(LearnerKind kind, const Json& j) {
  switch (kind) {
    case LearnerKind::LR: {
      ElasticNetConfig c;
      c.lambda = j.value("lambda", c.lambda);
      c.l1_ratio = j.value("l1_ratio", c.l1_ratio);
      c.max_iters = j.value("max_iters", c.max_iters);
      c.tol = j.value("tol", c.tol);
      c.standardize = j.value("standardize", c.standardize);
      c.fit_intercept = j.value("fit_intercept", c.fit_intercept);
      c.validate();
      return c;
    }
    case LearnerKind::DT:
      return tree_config_from_json(j);
    case LearnerKind::RF: {
      ForestConfig c;
      c.n_trees = j.value("n_trees", c.n_trees);
      if (j.contains("feature_subset_size") && !j["feature_subset_size"].is_null()) {
        c.feature_subset_size = j["feature_subset_size"].get<std::size_t>();
      }
      if (j.contains("tree")) c.tree = tree_config_from_json(j["tree"]);
      c.threads = j.value("threads", c.threads);
      return c;
    }
    case LearnerKind::GBT: {
      GbtConfig c;
      c.n_stages = j.value("n_stages", c.n_stages);
      c.learning_rate = j.value("learning_rate", c.learning_rate);
      if (j.contains("tree")) c.tree = tree_config_from_json(j["tree"], c.tree);
      c.validate();
      return c;
    }
  }
  throw std::invalid_argument("unknown learner kind");
}

}  // namespace demandsg
