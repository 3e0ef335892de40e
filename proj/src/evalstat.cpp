#include "demandsg/evalstat.hpp"

#include <limits>
#include <sstream>

#include "demandsg/csv.hpp"
#include "demandsg/stats.hpp"

namespace demandsg {

std::size_t RunMatrix::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i] == name) return i;
  }
  throw std::out_of_range("run matrix has no column '" + std::string(name) + "'");
}

Eigen::VectorXd RunMatrix::column(std::string_view name) const {
  return values.col(static_cast<Eigen::Index>(index_of(name)));
}

std::string RunMatrix::to_csv() const {
  std::ostringstream out;
  std::vector<std::string> fields{"repetition"};
  fields.insert(fields.end(), columns.begin(), columns.end());
  write_csv_row(out, fields);
  for (Eigen::Index r = 0; r < values.rows(); ++r) {
    fields.assign(1, std::to_string(r));
    for (Eigen::Index c = 0; c < values.cols(); ++c) {
      const double v = values(r, c);
      fields.push_back(std::isnan(v) ? "FAILED" : format_double(v));
    }
    write_csv_row(out, fields);
  }
  return out.str();
}

namespace {

double sample_variance(const Eigen::VectorXd& v) {
  return (v.array() - v.mean()).square().sum() / static_cast<double>(v.size() - 1);
}

}  // namespace

AnovaResult anova(std::span<const Eigen::VectorXd> groups) {
  if (groups.size() < 2) throw std::invalid_argument("anova: needs at least 2 groups");
  Eigen::Index total = 0;
  double grand_sum = 0.0;
  for (const auto& g : groups) {
    if (g.size() < 2) throw std::invalid_argument("anova: every group needs at least 2 values");
    if (!g.allFinite()) throw std::invalid_argument("anova: non-finite value");
    total += g.size();
    grand_sum += g.sum();
  }
  const double grand_mean = grand_sum / static_cast<double>(total);
  double ss_between = 0.0;
  double ss_within = 0.0;
  for (const auto& g : groups) {
    const double m = g.mean();
    ss_between += static_cast<double>(g.size()) * (m - grand_mean) * (m - grand_mean);
    ss_within += (g.array() - m).square().sum();
  }
  AnovaResult r;
  r.df_between = static_cast<int>(groups.size()) - 1;
  r.df_within = static_cast<int>(total) - static_cast<int>(groups.size());
  if (ss_within == 0.0) {
    throw std::invalid_argument("anova: degenerate variance (every group is constant)");
  }
  const double ms_between = ss_between / r.df_between;
  const double ms_within = ss_within / r.df_within;
  r.f_statistic = ms_between / ms_within;
  r.p_value = f_sf(r.f_statistic, r.df_between, r.df_within);
  r.reject_at_005 = r.p_value < 0.05;
  return r;
}

TTestResult t_test(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double alpha, bool paired) {
  if (a.size() < 2 || b.size() < 2) throw std::invalid_argument("t_test: each sample needs at least 2 values");
  if (!a.allFinite() || !b.allFinite()) throw std::invalid_argument("t_test: non-finite value");
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("t_test: alpha must lie in (0, 1)");
  TTestResult r;
  double diff = 0.0;
  double se2 = 0.0;
  if (paired) {
    if (a.size() != b.size()) throw std::invalid_argument("t_test: paired samples differ in length");
    const Eigen::VectorXd d = a - b;
    diff = d.mean();
    se2 = sample_variance(d) / static_cast<double>(d.size());
    r.df = static_cast<double>(d.size() - 1);
  } else {
    const double va = sample_variance(a) / static_cast<double>(a.size());
    const double vb = sample_variance(b) / static_cast<double>(b.size());
    diff = a.mean() - b.mean();
    se2 = va + vb;
    r.df = se2 > 0.0 ? se2 * se2 /
                           (va * va / static_cast<double>(a.size() - 1) + vb * vb / static_cast<double>(b.size() - 1))
                     : static_cast<double>(a.size() + b.size() - 2);
  }
  if (se2 == 0.0) {
    if (diff == 0.0) throw std::invalid_argument("t_test: degenerate samples (zero variance, equal means)");
    r.t_statistic = diff > 0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
    r.p_value = 0.0;
  } else {
    r.t_statistic = diff / std::sqrt(se2);
    r.p_value = t_two_sided_p(r.t_statistic, r.df);
  }
  r.reject_at_005 = r.p_value < alpha;
  return r;
}

namespace {

Json finite_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

}  // namespace

Json to_json(const AnovaResult& r) {
  Json j;
  j["f_statistic"] = finite_or_null(r.f_statistic);
  j["df_between"] = r.df_between;
  j["df_within"] = r.df_within;
  j["p_value"] = r.p_value;
  j["reject_at_005"] = r.reject_at_005;
  return j;
}

Json to_json(const TTestResult& r) {
  Json j;
  j["t_statistic"] = finite_or_null(r.t_statistic);
  j["df"] = r.df;
  j["p_value"] = r.p_value;
  j["reject_at_005"] = r.reject_at_005;
  return j;
}

}  // namespace demandsg
