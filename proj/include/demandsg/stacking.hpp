#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "demandsg/ensemble.hpp"
#include "demandsg/linear.hpp"
#include "demandsg/preprocess.hpp"

namespace demandsg {

enum class LearnerKind { LR, DT, RF, GBT };

std::string_view to_string(LearnerKind kind);
LearnerKind parse_learner_kind(std::string_view text);

using LearnerConfig = std::variant<ElasticNetConfig, TreeConfig, ForestConfig, GbtConfig>;

LearnerKind kind_of(const LearnerConfig& cfg);

// A learner and its candidate configurations. The label names the learner's
// meta-feature column and seeds its random stream.
struct LearnerSpec {
  std::string label;
  LearnerKind kind = LearnerKind::LR;
  std::vector<LearnerConfig> grid;

  void validate() const;
};

// First-level grids: LR lambda in {0.1, 0.3, 1}; DT max_depth in {3, 6,
// unlimited}; GBT learning rate in {0.05, 0.1} x stages in {50, 100}; RF a
// single 20-tree forest.
LearnerSpec default_learner(LearnerKind kind);

// Second-level defaults. The LR combiner does not standardize meta-features.
LearnerSpec default_combiner(LearnerKind kind);

RegressorPtr fit_learner(const LearnerConfig& cfg, const FeatureFrame& frame,
                         const Eigen::Ref<const Eigen::VectorXd>& y, std::uint64_t seed);

struct TrainedLearner {
  std::string label;
  RegressorPtr model;
  std::size_t chosen = 0;          // grid index of the refit configuration
  double score = 0.0;              // CV RMSE, or OOB RMSE for random forests
  bool oob_score = false;
  std::vector<double> grid_scores;
};

// Selects each spec's configuration by k-fold CV RMSE on `train` and refits it
// on all of `train`. Random forests skip CV and are scored out-of-bag.
std::vector<TrainedLearner> train_first_level(const FeatureFrame& train,
                                              const Eigen::Ref<const Eigen::VectorXd>& y,
                                              std::span<const LearnerSpec> specs,
                                              const FoldPlan& folds, std::uint64_t seed);

// Column j holds models[j]'s predictions.
Eigen::MatrixXd build_meta_features(std::span<const TrainedLearner> models, const FeatureFrame& rows);

class StackedModel final : public Regressor {
 public:
  StackedModel(FeatureLayout layout, std::vector<TrainedLearner> first_level, RegressorPtr second_level);

  Eigen::VectorXd predict(const FeatureFrame& frame) const override;
  const FeatureLayout& layout() const override { return layout_; }
  std::string_view type_name() const override { return "stacked"; }
  Json to_json() const override;
  static StackedModel from_json(const Json& j);

  // Meta-feature column order, which is also the order of first_level().
  std::vector<std::string> meta_layout() const;
  const std::vector<TrainedLearner>& first_level() const { return first_level_; }
  const Regressor& second_level() const { return *second_; }
  Eigen::MatrixXd meta_features(const FeatureFrame& frame) const;

 private:
  FeatureLayout layout_;
  std::vector<TrainedLearner> first_level_;
  RegressorPtr second_;
};

// Combines already-trained first-level models: the second level is fit on
// (meta-features of `validation`, y_validation). Learners are ordered by
// label, so the result does not depend on the order they are passed in.
StackedModel stack_models(std::vector<TrainedLearner> first_level, const FeatureFrame& validation,
                          const Eigen::Ref<const Eigen::VectorXd>& y_validation,
                          const LearnerSpec& second_spec, std::uint64_t seed);

// First level on `train` (train_first_level), second level on `validation`.
StackedModel train_stacked(const FeatureFrame& train, const Eigen::Ref<const Eigen::VectorXd>& y_train,
                           const FeatureFrame& validation,
                           const Eigen::Ref<const Eigen::VectorXd>& y_validation,
                           std::span<const LearnerSpec> first_specs, const LearnerSpec& second_spec,
                           const FoldPlan& folds, std::uint64_t seed);

Json learner_config_to_json(const LearnerConfig& cfg);
LearnerConfig learner_config_from_json(LearnerKind kind, const Json& j);

}  // namespace demandsg
