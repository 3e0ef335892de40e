#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "demandsg/dataset.hpp"

namespace demandsg {

enum class NumericFill { ColumnMean, ColumnMedian };
enum class CategoricalFill { Mode, Sentinel };

inline constexpr std::string_view kMissingSentinel = "__missing__";

// Fills every missing cell from a statistic over that column's non-missing
// cells. Mode ties go to the label seen first in row order.
Dataset fill_missing(const Dataset& d, NumericFill numeric = NumericFill::ColumnMean,
                     CategoricalFill categorical = CategoricalFill::Mode);

// Removes columns whose missing fraction exceeds `threshold`.
Dataset drop_sparse(const Dataset& d, double threshold = 0.5);

// Moves the listed columns to role `drop` and removes them.
Dataset drop_columns(const Dataset& d, std::span<const std::string> names);

struct WeeklyAggregation {
  std::string product_key = "product_id";
  std::vector<std::string> week_keys = {"year", "week"};
  // Summed into demand when set; otherwise demand counts sale rows.
  std::optional<std::string> quantity_column;
  std::string target_name = "demand";
};

// One output row per (product, week keys) group, in first-appearance order.
// Numeric features take the group mean, symbolic features the group mode.
Dataset aggregate_weekly(const Dataset& d, const WeeklyAggregation& opts = {});

// Adds a numeric column counting rows per product across all event tables
// (purchases and abandoned views weigh 1:1). Unseen products get 0.
Dataset derive_popularity(std::span<const Dataset> event_tables, const Dataset& d,
                          std::string_view product_key = "product_id",
                          std::string_view column_name = "popularity");

// Keeps rows whose target is strictly below `max_demand`.
Dataset remove_outliers(const Dataset& d, double max_demand = 20.0);

struct SplitFractions {
  double train = 0.5;
  double validation = 0.2;
  double test = 0.3;
};

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
  std::vector<std::size_t> test;
};

SplitIndices split(std::size_t n, const SplitFractions& fractions, std::uint64_t seed);

// `count` random proper subsets of `indices`, each of size
// floor(|indices| * fraction), sorted ascending.
std::vector<std::vector<std::size_t>> subsample_subsets(std::span<const std::size_t> indices,
                                                        std::size_t count, std::uint64_t seed,
                                                        double fraction = 0.8);

struct FoldPlan {
  std::size_t k = 10;
  // Fold of each training row, by position in the training list.
  std::vector<std::size_t> assignments;

  std::vector<std::size_t> holdout_positions(std::size_t fold) const;
  std::vector<std::size_t> training_positions(std::size_t fold) const;
};

FoldPlan kfold(std::size_t n_train, std::size_t k, std::uint64_t seed);

}  // namespace demandsg
