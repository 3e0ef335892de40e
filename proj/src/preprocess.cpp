#include "demandsg/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include "demandsg/random.hpp"

namespace demandsg {
namespace {

// Most frequent code among `codes`, ties to the first seen; kMissingCode if
// none is present.
std::int32_t mode_of(std::span<const std::int32_t> codes) {
  std::map<std::int32_t, std::pair<std::size_t, std::size_t>> counts;  // code -> (count, first)
  for (std::size_t i = 0; i < codes.size(); ++i) {
    if (codes[i] == kMissingCode) continue;
    auto [it, inserted] = counts.try_emplace(codes[i], 0, i);
    ++it->second.first;
  }
  std::int32_t best = kMissingCode;
  std::size_t best_count = 0, best_first = 0;
  for (const auto& [code, cf] : counts) {
    if (cf.first > best_count || (cf.first == best_count && cf.second < best_first)) {
      best = code;
      best_count = cf.first;
      best_first = cf.second;
    }
  }
  return best;
}

double mean_of(std::span<const double> values) {
  double sum = 0;
  std::size_t n = 0;
  for (double v : values) {
    if (std::isnan(v)) continue;
    sum += v;
    ++n;
  }
  return n ? sum / static_cast<double>(n) : std::nan("");
}

double median_of(std::vector<double> values) {
  std::erase_if(values, [](double v) { return std::isnan(v); });
  if (values.empty()) return std::nan("");
  std::sort(values.begin(), values.end());
  auto n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace

Dataset fill_missing(const Dataset& d, NumericFill numeric, CategoricalFill categorical) {
  std::vector<Column> out(d.columns());
  for (auto& c : out) {
    const auto missing = c.missing_count();
    if (missing == 0) continue;
    if (missing == c.size()) {
      throw DataError("column '" + c.schema.name +
                      "' is entirely missing; remove it with drop_sparse before filling");
    }
    if (c.numeric()) {
      const double fill =
          numeric == NumericFill::ColumnMean ? mean_of(c.values) : median_of(c.values);
      for (double& v : c.values) {
        if (std::isnan(v)) v = fill;
      }
    } else {
      const std::int32_t fill =
          categorical == CategoricalFill::Mode ? mode_of(c.codes) : c.intern(kMissingSentinel);
      for (auto& code : c.codes) {
        if (code == kMissingCode) code = fill;
      }
    }
  }
  return Dataset(std::move(out));
}

Dataset drop_sparse(const Dataset& d, double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw DataError("drop_sparse threshold must lie in [0, 1]");
  std::vector<Column> out;
  for (const auto& c : d.columns()) {
    const double frac =
        d.rows() ? static_cast<double>(c.missing_count()) / static_cast<double>(d.rows()) : 0.0;
    if (frac > threshold) {
      if (c.schema.role == ColumnRole::Target) {
        std::ostringstream msg;
        msg << "target column '" << c.schema.name << "' is " << frac * 100
            << "% missing, above the drop threshold";
        throw DataError(msg.str());
      }
      continue;
    }
    out.push_back(c);
  }
  Dataset result(std::move(out));
  if (result.cols() == 0) return Dataset();
  return result;
}

Dataset drop_columns(const Dataset& d, std::span<const std::string> names) {
  std::vector<Column> out;
  for (const auto& c : d.columns()) {
    if (std::find(names.begin(), names.end(), c.schema.name) != names.end()) {
      if (c.schema.role == ColumnRole::Target) throw DataError("cannot drop target column '" + c.schema.name + "'");
      continue;
    }
    if (c.schema.role == ColumnRole::Drop) continue;
    out.push_back(c);
  }
  for (const auto& n : names) d.index_of(n);
  return Dataset(std::move(out));
}

Dataset aggregate_weekly(const Dataset& d, const WeeklyAggregation& opts) {
  std::vector<std::size_t> key_cols;
  if (!d.find(opts.product_key)) throw DataError("aggregation: missing product column '" + opts.product_key + "'");
  key_cols.push_back(d.index_of(opts.product_key));
  for (const auto& k : opts.week_keys) {
    if (!d.find(k)) throw DataError("aggregation: missing week/year column '" + k + "'");
    key_cols.push_back(d.index_of(k));
  }
  std::optional<std::size_t> qty;
  if (opts.quantity_column) qty = d.index_of(*opts.quantity_column);

  // Group rows by key, preserving first-appearance order.
  std::map<std::vector<double>, std::size_t> group_of;
  std::vector<std::vector<std::size_t>> groups;
  for (std::size_t r = 0; r < d.rows(); ++r) {
    std::vector<double> key;
    for (auto kc : key_cols) {
      const auto& c = d.column(kc);
      if (c.missing(r)) {
        throw DataError("aggregation: row " + std::to_string(r + 1) + " has no value for key '" +
                        c.schema.name + "'");
      }
      key.push_back(c.numeric() ? c.values[r] : static_cast<double>(c.codes[r]));
    }
    auto [it, inserted] = group_of.try_emplace(std::move(key), groups.size());
    if (inserted) groups.emplace_back();
    groups[it->second].push_back(r);
  }

  std::vector<Column> out;
  for (std::size_t j = 0; j < d.cols(); ++j) {
    const auto& c = d.column(j);
    if (c.schema.role == ColumnRole::Target || c.schema.role == ColumnRole::Drop) continue;
    if (qty && j == *qty) continue;
    if (c.schema.name == opts.target_name) continue;
    Column nc(c.schema);
    nc.levels = c.levels;
    for (const auto& g : groups) {
      if (c.numeric()) {
        std::vector<double> vals;
        for (auto r : g) vals.push_back(c.values[r]);
        nc.values.push_back(mean_of(vals));
      } else {
        std::vector<std::int32_t> codes;
        for (auto r : g) codes.push_back(c.codes[r]);
        nc.codes.push_back(mode_of(codes));
      }
    }
    out.push_back(std::move(nc));
  }

  Column demand({opts.target_name, ColumnKind::Numeric, ColumnRole::Target});
  for (const auto& g : groups) {
    if (!qty) {
      demand.values.push_back(static_cast<double>(g.size()));
      continue;
    }
    double sum = 0;
    for (auto r : g) {
      const auto& qc = d.column(*qty);
      if (!qc.numeric()) throw DataError("aggregation: quantity column must be numeric");
      if (!qc.missing(r)) sum += qc.values[r];
    }
    demand.values.push_back(sum);
  }
  out.push_back(std::move(demand));
  return Dataset(std::move(out));
}

Dataset derive_popularity(std::span<const Dataset> event_tables, const Dataset& d,
                          std::string_view product_key, std::string_view column_name) {
  std::map<std::string, double, std::less<>> views;
  for (const auto& table : event_tables) {
    const auto& c = table.column(product_key);
    for (std::size_t r = 0; r < table.rows(); ++r) {
      if (c.missing(r)) continue;
      views[c.cell_text(r)] += 1.0;
    }
  }
  const auto& products = d.column(product_key);
  Column pop({std::string(column_name), ColumnKind::Numeric, ColumnRole::Feature});
  pop.values.reserve(d.rows());
  for (std::size_t r = 0; r < d.rows(); ++r) {
    auto it = products.missing(r) ? views.end() : views.find(products.cell_text(r));
    pop.values.push_back(it == views.end() ? 0.0 : it->second);
  }
  std::vector<Column> cols;
  if (auto existing = d.find(column_name)) {
    for (std::size_t j = 0; j < d.cols(); ++j) {
      cols.push_back(j == *existing ? pop : d.column(j));
    }
    return Dataset(std::move(cols));
  }
  // Insert before the target so the target stays the trailing column.
  auto t = d.target_column();
  for (std::size_t j = 0; j < d.cols(); ++j) {
    if (t && j == *t) cols.push_back(pop);
    cols.push_back(d.column(j));
  }
  if (!t) cols.push_back(pop);
  return Dataset(std::move(cols));
}

Dataset remove_outliers(const Dataset& d, double max_demand) {
  const auto& target = d.column(d.target_index());
  std::vector<std::size_t> keep;
  for (std::size_t r = 0; r < d.rows(); ++r) {
    if (target.values[r] < max_demand) keep.push_back(r);
  }
  if (keep.empty()) {
    std::ostringstream msg;
    msg << "outlier removal with max_demand " << max_demand << " leaves no rows";
    throw DataError(msg.str());
  }
  return d.select_rows(keep);
}

SplitIndices split(std::size_t n, const SplitFractions& f, std::uint64_t seed) {
  if (f.train < 0 || f.validation < 0 || f.test < 0 ||
      std::abs(f.train + f.validation + f.test - 1.0) > 1e-9) {
    throw DataError("split fractions must be non-negative and sum to 1");
  }
  if (n < 10) throw DataError("split needs at least 10 rows, got " + std::to_string(n));
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);

  const auto n_train = static_cast<std::size_t>(std::llround(f.train * static_cast<double>(n)));
  const auto n_val = static_cast<std::size_t>(std::llround(f.validation * static_cast<double>(n)));
  if (n_train + n_val > n) throw DataError("split fractions leave no room for a test set");

  SplitIndices s;
  s.train.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.validation.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train),
                      perm.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  s.test.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), perm.end());
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.validation.begin(), s.validation.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

std::vector<std::vector<std::size_t>> subsample_subsets(std::span<const std::size_t> indices,
                                                        std::size_t count, std::uint64_t seed,
                                                        double fraction) {
  if (count < 2) throw DataError("subsample_subsets needs count >= 2");
  if (!(fraction > 0.0 && fraction < 1.0)) throw DataError("subset fraction must lie in (0, 1)");
  const auto size = static_cast<std::size_t>(std::floor(static_cast<double>(indices.size()) * fraction));
  if (size == 0 || size >= indices.size()) {
    throw DataError("subset size " + std::to_string(size) + " is not a proper non-empty subset of " +
                    std::to_string(indices.size()) + " indices");
  }
  Rng rng(seed);
  std::vector<std::vector<std::size_t>> out;
  out.reserve(count);
  std::vector<std::size_t> pool(indices.begin(), indices.end());
  for (std::size_t s = 0; s < count; ++s) {
    // Partial Fisher-Yates over a fresh copy.
    std::vector<std::size_t> work = pool;
    for (std::size_t i = 0; i < size; ++i) {
      std::swap(work[i], work[i + uniform_index(rng, work.size() - i)]);
    }
    work.resize(size);
    std::sort(work.begin(), work.end());
    out.push_back(std::move(work));
  }
  return out;
}

std::vector<std::size_t> FoldPlan::holdout_positions(std::size_t fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < assignments.size(); ++i) {
    if (assignments[i] == fold) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> FoldPlan::training_positions(std::size_t fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < assignments.size(); ++i) {
    if (assignments[i] != fold) out.push_back(i);
  }
  return out;
}

FoldPlan kfold(std::size_t n_train, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw DataError("k-fold needs k >= 2");
  if (n_train < k) {
    throw DataError("k-fold with k=" + std::to_string(k) + " needs at least k rows, got " +
                    std::to_string(n_train));
  }
  std::vector<std::size_t> perm(n_train);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);
  FoldPlan plan;
  plan.k = k;
  plan.assignments.resize(n_train);
  for (std::size_t i = 0; i < n_train; ++i) plan.assignments[perm[i]] = i % k;
  return plan;
}

}  // namespace demandsg
