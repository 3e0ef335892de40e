#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "demandsg/dataset.hpp"

namespace demandsg {

enum class FeatureKind { Numeric, Categorical };

struct FeatureInfo {
  std::string name;
  FeatureKind kind = FeatureKind::Numeric;
  std::vector<std::string> levels;  // categorical only; index = code

  bool operator==(const FeatureInfo&) const = default;
};

using FeatureLayout = std::vector<FeatureInfo>;

// Code stored for a category that the layout has never seen.
inline constexpr double kUnseenCode = -1.0;

// Learner input: one column per feature. Categorical cells hold the level
// code into layout[j].levels as a double.
struct FeatureFrame {
  FeatureLayout layout;
  Eigen::MatrixXd values;

  Eigen::Index rows() const { return values.rows(); }
  Eigen::Index cols() const { return values.cols(); }
};

// Columns with role `feature`, in schema order. Requires no missing cells.
FeatureFrame feature_frame(const Dataset& d);

// Numeric-only frame with the given column names.
FeatureFrame numeric_frame(Eigen::MatrixXd values, std::vector<std::string> names);

// Reorders columns by name into `layout` and remaps category codes by label;
// labels absent from the layout become kUnseenCode. Throws DataError naming
// any layout column the frame lacks.
FeatureFrame align(const FeatureFrame& frame, const FeatureLayout& layout);

FeatureFrame take_rows(const FeatureFrame& frame, std::span<const std::size_t> rows);

// Number of columns after one-hot expansion.
Eigen::Index encoded_width(const FeatureLayout& layout);
std::vector<std::string> encoded_names(const FeatureLayout& layout);

// One-hot expansion of an aligned frame: numeric columns pass through, a
// categorical column with k levels becomes k indicators (unseen -> all zero).
Eigen::MatrixXd one_hot(const FeatureFrame& aligned);

std::pair<Eigen::MatrixXd, FeatureLayout> encode_features(const Dataset& d);

}  // namespace demandsg
