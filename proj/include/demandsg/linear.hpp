#pragma once

#include <vector>

#include <Eigen/Dense>

#include "demandsg/regressor.hpp"

namespace demandsg {

// Penalty: lambda * (l1_ratio * |beta|_1 + (1 - l1_ratio) * |beta|_2^2).
struct ElasticNetConfig {
  double lambda = 0.3;
  double l1_ratio = 0.8;
  int max_iters = 10000;
  double tol = 1e-7;
  bool standardize = true;
  bool fit_intercept = true;

  void validate() const;
};

struct TrainReport {
  double final_loss = 0;  // objective at the returned coefficients
  int iterations = 0;
  bool converged = false;
  Eigen::VectorXd residuals;            // y - prediction per training row
  std::vector<double> objective_trace;  // objective after each sweep
};

// Solution of the penalized problem in the original column space.
struct ElasticNetFit {
  Eigen::VectorXd beta;
  double intercept = 0;
  Eigen::VectorXd center;  // column means subtracted before fitting (zeros without intercept)
  Eigen::VectorXd scale;   // column scales divided out before fitting (ones without standardization)
  TrainReport report;
};

// Minimizes (1/n)|y - X beta - b|^2 + penalty by cyclic coordinate descent
// with soft-thresholding. The penalty applies to the standardized
// coefficients when cfg.standardize is set; the intercept is never penalized.
// Converged iff the largest coefficient change in a sweep drops below tol.
ElasticNetFit fit_elastic_net(const Eigen::Ref<const Eigen::MatrixXd>& X,
                              const Eigen::Ref<const Eigen::VectorXd>& y,
                              const ElasticNetConfig& cfg);

// Objective value in raw column space (no standardization applied).
double elastic_net_objective(const Eigen::Ref<const Eigen::MatrixXd>& X,
                             const Eigen::Ref<const Eigen::VectorXd>& y,
                             const Eigen::Ref<const Eigen::VectorXd>& beta, double intercept,
                             double lambda, double l1_ratio);

class LinearModel final : public Regressor {
 public:
  LinearModel(FeatureLayout layout, Eigen::VectorXd beta, double intercept,
              Eigen::VectorXd center, Eigen::VectorXd scale);

  static LinearModel fit(const FeatureFrame& frame, const Eigen::Ref<const Eigen::VectorXd>& y,
                         const ElasticNetConfig& cfg, TrainReport* report = nullptr);

  Eigen::VectorXd predict(const FeatureFrame& frame) const override;
  const FeatureLayout& layout() const override { return layout_; }
  std::string_view type_name() const override { return "linear"; }
  Json to_json() const override;
  static LinearModel from_json(const Json& j);

  const Eigen::VectorXd& beta() const { return beta_; }
  double intercept() const { return intercept_; }
  const Eigen::VectorXd& center() const { return center_; }
  const Eigen::VectorXd& scale() const { return scale_; }

 private:
  FeatureLayout layout_;
  Eigen::VectorXd beta_;  // one per one-hot encoded column
  double intercept_;
  Eigen::VectorXd center_;
  Eigen::VectorXd scale_;
};

}  // namespace demandsg
