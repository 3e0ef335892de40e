#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "demandsg/cli.hpp"
#include "demandsg/csv.hpp"

namespace demandsg {

namespace {

std::string join(std::span<const std::string> parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

const LearnerSpec& primary_combiner(const ExperimentConfig& cfg) {
  for (const auto& c : cfg.combiners) {
    if (c.label == "LR") return c;
  }
  return cfg.combiners.front();
}

struct ColumnStats {
  double mean = std::numeric_limits<double>::quiet_NaN();
  double std = std::numeric_limits<double>::quiet_NaN();
  double min = std::numeric_limits<double>::quiet_NaN();
  std::string failure;
};

ColumnStats column_stats(const RunMatrix& m, std::size_t c) {
  ColumnStats s;
  if (m.failed(c)) {
    s.failure = m.failures[c];
    return s;
  }
  const Eigen::VectorXd v = m.values.col(static_cast<Eigen::Index>(c));
  s.mean = v.mean();
  s.std = v.size() > 1 ? std::sqrt((v.array() - s.mean).square().sum() / static_cast<double>(v.size() - 1)) : 0.0;
  s.min = v.minCoeff();
  return s;
}

std::string fixed4(double v) {
  if (std::isnan(v)) return "-";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

std::string table_csv(const ReportTable& t, const RunMatrix& m) {
  std::ostringstream out;
  write_csv_row(out, {"model", "column", "mean_rmse", "std_rmse", "min_rmse", "status"});
  for (const auto& row : t.rows) {
    const auto s = column_stats(m, m.index_of(row.column));
    if (s.failure.empty()) {
      write_csv_row(out, {row.label, row.column, format_double(s.mean), format_double(s.std), format_double(s.min), "ok"});
    } else {
      write_csv_row(out, {row.label, row.column, "", "", "", "FAILED: " + s.failure});
    }
  }
  return out.str();
}

std::string table_text(const ReportTable& t, const RunMatrix& m) {
  std::vector<std::vector<std::string>> cells{{"Model", "Mean RMSE", "Std", "Min RMSE"}};
  std::vector<std::string> notes;
  for (const auto& row : t.rows) {
    const auto s = column_stats(m, m.index_of(row.column));
    if (s.failure.empty()) {
      cells.push_back({row.label, fixed4(s.mean), fixed4(s.std), fixed4(s.min)});
    } else {
      cells.push_back({row.label, "FAILED", "-", "-"});
      notes.push_back(row.label + ": " + s.failure);
    }
  }
  std::vector<std::size_t> width(4, 0);
  for (const auto& r : cells) {
    for (std::size_t i = 0; i < 4; ++i) width[i] = std::max(width[i], r[i].size());
  }
  std::ostringstream out;
  out << t.title << "\n";
  for (std::size_t k = 0; k < cells.size(); ++k) {
    const auto& r = cells[k];
    out << r[0] << std::string(width[0] - r[0].size(), ' ');
    for (std::size_t i = 1; i < 4; ++i) out << "  " << std::string(width[i] - r[i].size(), ' ') << r[i];
    out << "\n";
    if (k == 0) {
      std::size_t total = width[0];
      for (std::size_t i = 1; i < 4; ++i) total += 2 + width[i];
      out << std::string(total, '-') << "\n";
    }
  }
  if (t.rows.empty()) out << "(no rows configured)\n";
  for (const auto& n : notes) out << "  " << n << "\n";
  return out.str();
}

struct Verdict {
  std::string name;
  std::string description;
  Json result;
  std::string text;
};

Verdict anova_verdict(const std::string& name, const std::string& description, const RunMatrix& m,
                      const std::vector<std::string>& columns) {
  Verdict v{name, description, Json::object(), ""};
  v.result["groups"] = columns;
  try {
    if (columns.size() < 2) throw std::invalid_argument("needs at least 2 groups");
    std::vector<Eigen::VectorXd> groups;
    for (const auto& c : columns) {
      const auto idx = m.index_of(c);
      if (m.failed(idx)) throw std::invalid_argument("group '" + c + "' failed to train");
      groups.push_back(m.values.col(static_cast<Eigen::Index>(idx)));
    }
    const auto r = anova(groups);
    v.result.update(to_json(r));
    v.text = "F(" + std::to_string(r.df_between) + ", " + std::to_string(r.df_within) + ") = " + fixed4(r.f_statistic) +
             ", p = " + format_double(r.p_value) + (r.reject_at_005 ? ", means differ at 5%" : ", no significant difference at 5%");
  } catch (const std::exception& e) {
    v.result["error"] = e.what();
    v.text = std::string("not computed: ") + e.what();
  }
  return v;
}

}  // namespace

RunLayout build_run_layout(const ExperimentConfig& cfg) {
  RunLayout layout;
  layout.plan.pool = cfg.learners;
  std::vector<std::string> all;
  for (const auto& l : cfg.learners) all.push_back(l.label);

  std::set<std::string> names;
  const auto add_combo = [&](const std::vector<std::string>& members, const LearnerSpec& second) {
    Combo c{combo_name(second, members), members, second};
    if (names.insert(c.name).second) layout.plan.combos.push_back(c);
    return c.name;
  };

  ReportTable t1{"table1_level2", "Table 1: second-level learner sweep (first level: " + join(all, "+") + ")", {}};
  for (const auto& c : cfg.combiners) {
    const auto col = add_combo(all, c);
    t1.rows.push_back({c.label, col});
    layout.level2_columns.push_back(col);
  }
  const auto& primary = primary_combiner(cfg);
  for (const auto& row : t1.rows) {
    if (row.label == primary.label) layout.sg_lr_columns.push_back(row.column);
  }

  ReportTable t3{"table3_binary", "Table 3: SG(" + primary.label + ") over binary combinations", {}};
  for (const auto& members : cfg.binary) {
    const auto col = add_combo(members, primary);
    t3.rows.push_back({join(members, "+"), col});
    layout.sg_lr_columns.push_back(col);
  }
  ReportTable t4{"table4_triple", "Table 4: SG(" + primary.label + ") over triple combinations", {}};
  for (const auto& members : cfg.triple) {
    const auto col = add_combo(members, primary);
    t4.rows.push_back({join(members, "+"), col});
    layout.sg_lr_columns.push_back(col);
  }

  ReportTable t2{"table2_best", "Table 2: single learners and the best SG(" + primary.label + ")", {}};
  for (const auto& l : cfg.learners) {
    layout.plan.singles.push_back(l);
    layout.singles.push_back(l.label);
    t2.rows.push_back({l.label, l.label});
  }
  layout.tables = {t1, t2, t3, t4};
  return layout;
}

RunReport build_report(const ExperimentConfig& cfg, const RunLayout& layout_in, const RunMatrix& m,
                       const SplitIndices& split, std::size_t dataset_rows) {
  RunLayout layout = layout_in;
  const auto& primary = primary_combiner(cfg);

  // Best SG row for Table 2: lowest mean RMSE among successful SG(primary) columns.
  std::optional<std::size_t> best_sg;
  for (const auto& col : layout.sg_lr_columns) {
    const auto idx = m.index_of(col);
    if (m.failed(idx)) continue;
    if (!best_sg || column_stats(m, idx).mean < column_stats(m, *best_sg).mean) best_sg = idx;
  }
  std::optional<std::size_t> best_single;
  for (const auto& col : layout.singles) {
    const auto idx = m.index_of(col);
    if (m.failed(idx)) continue;
    if (!best_single || column_stats(m, idx).mean < column_stats(m, *best_single).mean) best_single = idx;
  }
  auto& t2 = layout.tables[1];
  if (best_sg) {
    t2.rows.push_back({m.columns[*best_sg], m.columns[*best_sg]});
  } else if (!layout.sg_lr_columns.empty()) {
    t2.rows.push_back({"SG(" + primary.label + ")", layout.sg_lr_columns.front()});
  }

  std::vector<Verdict> verdicts;
  verdicts.push_back(anova_verdict("anova_level1", "single learners", m, layout.singles));
  verdicts.push_back(anova_verdict("anova_level2", "second-level learner sweep", m, layout.level2_columns));
  for (std::size_t t = 2; t < 4; ++t) {
    std::vector<std::string> cols;
    for (const auto& r : layout.tables[t].rows) cols.push_back(r.column);
    verdicts.push_back(anova_verdict(t == 2 ? "anova_binary" : "anova_triple",
                                     t == 2 ? "binary combinations" : "triple combinations", m, cols));
  }
  {
    Verdict v{"t_test", "", Json::object(), ""};
    v.result["variant"] = cfg.paired_t_test ? "paired" : "welch";
    v.result["alpha"] = cfg.alpha;
    try {
      if (!best_single || !best_sg) throw std::invalid_argument("needs a successful single learner and SG model");
      const auto& a = m.columns[*best_sg];
      const auto& b = m.columns[*best_single];
      v.description = a + " vs " + b;
      v.result["a"] = a;
      v.result["b"] = b;
      const auto r = t_test(m.values.col(static_cast<Eigen::Index>(*best_sg)),
                            m.values.col(static_cast<Eigen::Index>(*best_single)), cfg.alpha, cfg.paired_t_test);
      v.result.update(to_json(r));
      v.text = "t = " + fixed4(r.t_statistic) + ", df = " + fixed4(r.df) + ", p = " + format_double(r.p_value) +
               (r.reject_at_005 ? ", significant at alpha = " : ", not significant at alpha = ") + format_double(cfg.alpha);
    } catch (const std::exception& e) {
      v.description = "best SG vs best single";
      v.result["error"] = e.what();
      v.text = std::string("not computed: ") + e.what();
    }
    verdicts.push_back(std::move(v));
  }

  RunReport report;
  report.files.emplace_back("run_matrix.csv", m.to_csv());
  std::string text = "Demand forecasting experiment report\n";
  text += "seed " + std::to_string(cfg.seed) + ", " + std::to_string(dataset_rows) + " rows (train " +
          std::to_string(split.train.size()) + ", validation " + std::to_string(split.validation.size()) + ", test " +
          std::to_string(split.test.size()) + "), " + std::to_string(m.repetitions()) + " repetitions\n\n";
  for (const auto& t : layout.tables) {
    report.files.emplace_back(t.name + ".csv", table_csv(t, m));
    const auto txt = table_text(t, m);
    report.files.emplace_back(t.name + ".txt", txt);
    text += txt + "\n";
  }
  text += "Statistical tests\n";
  for (const auto& v : verdicts) text += "  " + v.name + " (" + v.description + "): " + v.text + "\n";
  report.files.emplace_back("report.txt", text);

  Json summary;
  summary["seed"] = cfg.seed;
  summary["rows"] = dataset_rows;
  summary["split"] = {{"train", split.train.size()}, {"validation", split.validation.size()}, {"test", split.test.size()}};
  summary["repetitions"] = m.repetitions();
  Json cols = Json::array();
  for (std::size_t c = 0; c < m.columns.size(); ++c) {
    const auto s = column_stats(m, c);
    Json e{{"name", m.columns[c]}};
    if (s.failure.empty()) {
      e["mean_rmse"] = s.mean;
      e["std_rmse"] = s.std;
      e["min_rmse"] = s.min;
    } else {
      e["failure"] = s.failure;
    }
    cols.push_back(std::move(e));
  }
  summary["columns"] = std::move(cols);
  Json tables = Json::object();
  for (const auto& t : layout.tables) {
    Json rows = Json::array();
    for (const auto& r : t.rows) rows.push_back({{"label", r.label}, {"column", r.column}});
    tables[t.name] = std::move(rows);
  }
  summary["tables"] = std::move(tables);
  summary["best_single"] = best_single ? Json(m.columns[*best_single]) : Json(nullptr);
  summary["best_sg"] = best_sg ? Json(m.columns[*best_sg]) : Json(nullptr);
  Json tests = Json::object();
  for (const auto& v : verdicts) tests[v.name] = v.result;
  summary["tests"] = std::move(tests);
  report.files.emplace_back("summary.json", summary.dump(2) + "\n");
  return report;
}

}  // namespace demandsg
