#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "demandsg/dataset.hpp"

namespace demandsg {

// Expected weekly demand as a function of listing features:
//   intercept + price*p + stock*s + popularity*v + seller_rating*r
//   + week_of_year*w + brand_effects[brand] + price_x_popularity*p*v
struct GroundTruth {
  double intercept = 2.0;
  double price = -0.01;
  double stock = 0.05;
  double popularity = 0.02;
  double seller_rating = 0.8;
  double week_of_year = 0.0;
  double price_x_popularity = -3e-5;
  std::vector<double> brand_effects = {0.0, 2.0, -1.0, 0.5};

  double expected(double price_v, double stock_v, double popularity_v, double rating_v,
                  double week_v, std::size_t brand) const;
};

struct SyntheticSpec {
  std::size_t n_products = 40;
  std::size_t weeks = 50;
  double noise_std = 1.0;
  std::uint64_t seed = 42;
  GroundTruth truth;
  // When false the target is the raw (unclamped, unrounded) draw, which
  // keeps noise-free data exactly linear in the features.
  bool round_demand = true;

  void validate() const;
};

struct SyntheticData {
  Dataset data;                    // one row per product-week
  Eigen::VectorXd expected_demand;  // ground-truth mean per row
};

// Columns: product_id, year, week, brand, price, stock, popularity,
// seller_rating, demand (target).
SyntheticData generate_synthetic(const SyntheticSpec& spec);

// Sale-level view of a weekly dataset: a row with demand k becomes k sale
// rows carrying the same features and no target.
Dataset expand_to_sales(const Dataset& weekly);

// View-event tables for derive_popularity: every sale row counts as a
// purchase event and each product gets `popularity` abandoned-view events.
std::pair<Dataset, Dataset> synthetic_view_events(const Dataset& weekly);

}  // namespace demandsg
