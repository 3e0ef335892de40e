#include "demandsg/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "demandsg/random.hpp"

namespace demandsg {
namespace {

const std::vector<std::string> kBrands = {"Samsung", "Apple", "Nokia", "Xiaomi"};

}  // namespace

double GroundTruth::expected(double price_v, double stock_v, double popularity_v,
                             double rating_v, double week_v, std::size_t brand) const {
  double brand_effect = brand < brand_effects.size() ? brand_effects[brand] : 0.0;
  return intercept + price * price_v + stock * stock_v + popularity * popularity_v +
         seller_rating * rating_v + week_of_year * week_v + brand_effect +
         price_x_popularity * price_v * popularity_v;
}

void SyntheticSpec::validate() const {
  if (n_products == 0) throw DataError("synthetic spec is empty: n_products must be >= 1");
  if (weeks == 0) throw DataError("synthetic spec is empty: weeks must be >= 1");
  if (!(noise_std >= 0.0) || !std::isfinite(noise_std)) throw DataError("noise_std must be a finite non-negative real");
  if (truth.brand_effects.empty() || truth.brand_effects.size() > kBrands.size()) {
    throw DataError("brand_effects must have between 1 and " + std::to_string(kBrands.size()) + " entries");
  }
}

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng(derive_seed(spec.seed, "synthetic"));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);

  struct Product {
    std::size_t brand;
    double base_price;
    double popularity;
    double rating;
  };
  const std::size_t n_brands = spec.truth.brand_effects.size();
  std::vector<Product> products(spec.n_products);
  for (auto& p : products) {
    p.brand = uniform_index(rng, n_brands);
    p.base_price = 50.0 + 450.0 * unit(rng);
    p.popularity = static_cast<double>(uniform_index(rng, 301));
    p.rating = 1.0 + 4.0 * unit(rng);
  }

  Column product_id({"product_id", ColumnKind::Identifier, ColumnRole::Key});
  Column year({"year", ColumnKind::TimestampPart, ColumnRole::Key});
  Column week({"week", ColumnKind::TimestampPart, ColumnRole::Feature});
  Column brand({"brand", ColumnKind::Categorical, ColumnRole::Feature});
  Column price({"price", ColumnKind::Numeric, ColumnRole::Feature});
  Column stock({"stock", ColumnKind::Numeric, ColumnRole::Feature});
  Column popularity({"popularity", ColumnKind::Numeric, ColumnRole::Feature});
  Column rating({"seller_rating", ColumnKind::Numeric, ColumnRole::Feature});
  Column demand({"demand", ColumnKind::Numeric, ColumnRole::Target});
  for (std::size_t b = 0; b < n_brands; ++b) brand.intern(kBrands[b]);

  const std::size_t n = spec.n_products * spec.weeks;
  Eigen::VectorXd expected(static_cast<Eigen::Index>(n));
  std::size_t row = 0;
  for (std::size_t w = 0; w < spec.weeks; ++w) {
    const double week_of_year = static_cast<double>(w % 52 + 1);
    const double year_v = 2017.0 + static_cast<double>(w / 52);
    for (std::size_t p = 0; p < spec.n_products; ++p) {
      const auto& prod = products[p];
      const double price_v = prod.base_price * (0.9 + 0.2 * unit(rng));
      const double stock_v = static_cast<double>(uniform_index(rng, 101));
      const double mu = spec.truth.expected(price_v, stock_v, prod.popularity, prod.rating,
                                            week_of_year, prod.brand);
      double y = mu + spec.noise_std * noise(rng);
      if (spec.round_demand) y = std::max(0.0, std::round(y));

      product_id.codes.push_back(product_id.intern("P" + std::to_string(p + 1)));
      year.values.push_back(year_v);
      week.values.push_back(week_of_year);
      brand.codes.push_back(static_cast<std::int32_t>(prod.brand));
      price.values.push_back(price_v);
      stock.values.push_back(stock_v);
      popularity.values.push_back(prod.popularity);
      rating.values.push_back(prod.rating);
      demand.values.push_back(y);
      expected[static_cast<Eigen::Index>(row++)] = mu;
    }
  }

  std::vector<Column> cols;
  for (auto* c : {&product_id, &year, &week, &brand, &price, &stock, &popularity, &rating, &demand}) {
    cols.push_back(std::move(*c));
  }
  return {Dataset(std::move(cols)), expected};
}

Dataset expand_to_sales(const Dataset& weekly) {
  const auto t = weekly.target_index();
  const auto& target = weekly.column(t);
  std::vector<std::size_t> rows;
  for (std::size_t r = 0; r < weekly.rows(); ++r) {
    const auto k = static_cast<std::size_t>(std::max(0.0, std::round(target.values[r])));
    rows.insert(rows.end(), k, r);
  }
  Dataset sales = weekly.select_rows(rows);
  sales.remove_column(t);
  return sales;
}

std::pair<Dataset, Dataset> synthetic_view_events(const Dataset& weekly) {
  const auto& ids = weekly.column("product_id");
  const auto& target = weekly.column(weekly.target_index());
  const auto& pop = weekly.column("popularity");

  std::map<std::int32_t, double> purchases_per_product;
  std::map<std::int32_t, double> popularity_of;
  Column purchases({"product_id", ColumnKind::Identifier, ColumnRole::Key});
  purchases.levels = ids.levels;
  for (std::size_t r = 0; r < weekly.rows(); ++r) {
    const auto k = static_cast<std::size_t>(std::max(0.0, std::round(target.values[r])));
    purchases.codes.insert(purchases.codes.end(), k, ids.codes[r]);
    purchases_per_product[ids.codes[r]] += static_cast<double>(k);
    popularity_of.try_emplace(ids.codes[r], pop.values[r]);
  }
  Column abandons({"product_id", ColumnKind::Identifier, ColumnRole::Key});
  abandons.levels = ids.levels;
  for (const auto& [code, views] : popularity_of) {
    const auto extra = static_cast<std::size_t>(std::max(0.0, views - purchases_per_product[code]));
    abandons.codes.insert(abandons.codes.end(), extra, code);
  }
  std::vector<Column> a, b;
  a.push_back(std::move(purchases));
  b.push_back(std::move(abandons));
  return {Dataset(std::move(a)), Dataset(std::move(b))};
}

}  // namespace demandsg
