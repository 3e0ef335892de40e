#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "demandsg/regressor.hpp"

namespace demandsg {

template <typename A, typename B>
double rmse(const Eigen::DenseBase<A>& predicted, const Eigen::DenseBase<B>& actual) {
  if (predicted.size() != actual.size()) throw std::invalid_argument("rmse: length mismatch");
  if (predicted.size() == 0) throw std::invalid_argument("rmse: empty input");
  if (!predicted.derived().allFinite() || !actual.derived().allFinite()) {
    throw std::invalid_argument("rmse: non-finite input");
  }
  return std::sqrt((predicted.derived().array() - actual.derived().array()).square().mean());
}

// Test-set RMSE per repetition (row) and model (column). A failed cell is
// NaN and its column carries the failure message.
struct RunMatrix {
  std::vector<std::string> columns;
  Eigen::MatrixXd values;
  std::vector<std::string> failures;  // per column; empty = every cell succeeded

  Eigen::Index repetitions() const { return values.rows(); }
  std::size_t index_of(std::string_view name) const;
  bool failed(std::size_t column) const { return !failures[column].empty(); }
  Eigen::VectorXd column(std::string_view name) const;

  std::string to_csv() const;
};

struct AnovaResult {
  double f_statistic = 0.0;
  int df_between = 0;
  int df_within = 0;
  double p_value = 1.0;
  bool reject_at_005 = false;
};

AnovaResult anova(std::span<const Eigen::VectorXd> groups);

struct TTestResult {
  double t_statistic = 0.0;
  double df = 0.0;
  double p_value = 1.0;
  bool reject_at_005 = false;  // p < alpha
};

// Welch's unequal-variance test, or the paired test on a - b.
TTestResult t_test(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double alpha = 0.05,
                   bool paired = false);

Json to_json(const AnovaResult& r);
Json to_json(const TTestResult& r);

}  // namespace demandsg
