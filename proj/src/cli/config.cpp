#include <fstream>
#include <set>

#include "demandsg/cli.hpp"

namespace demandsg {

namespace fs = std::filesystem;

namespace {

void check_keys(const Json& j, std::initializer_list<std::string_view> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (auto a : allowed) known = known || key == a;
    if (!known) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

template <typename T>
T get_or(const Json& j, const char* key, T fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception&) {
    throw ConfigError(where + "." + key + ": wrong type");
  }
}

template <typename T>
std::optional<T> get_optional(const Json& j, const char* key, std::optional<T> fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  if (j.at(key).is_null()) return std::nullopt;
  return get_or<T>(j, key, T{}, where);
}

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

std::vector<ColumnSchema> schema_field(const Json& j, const fs::path& base, const std::string& where) {
  if (!j.contains("schema")) throw ConfigError(where + ": missing 'schema'");
  const auto& s = j.at("schema");
  if (s.is_string()) return load_schema(resolve(base, s.get<std::string>()));
  return parse_schema(s);
}

SyntheticSpec parse_synthetic(const Json& j) {
  check_keys(j, {"n_products", "weeks", "noise_std", "round_demand", "truth"}, "data.synthetic");
  SyntheticSpec s;
  s.n_products = get_or(j, "n_products", s.n_products, "data.synthetic");
  s.weeks = get_or(j, "weeks", s.weeks, "data.synthetic");
  s.noise_std = get_or(j, "noise_std", s.noise_std, "data.synthetic");
  s.round_demand = get_or(j, "round_demand", s.round_demand, "data.synthetic");
  if (j.contains("truth")) {
    const auto& t = j.at("truth");
    check_keys(t, {"intercept", "price", "stock", "popularity", "seller_rating", "week_of_year",
                   "price_x_popularity", "brand_effects"},
               "data.synthetic.truth");
    auto& g = s.truth;
    const std::string w = "data.synthetic.truth";
    g.intercept = get_or(t, "intercept", g.intercept, w);
    g.price = get_or(t, "price", g.price, w);
    g.stock = get_or(t, "stock", g.stock, w);
    g.popularity = get_or(t, "popularity", g.popularity, w);
    g.seller_rating = get_or(t, "seller_rating", g.seller_rating, w);
    g.week_of_year = get_or(t, "week_of_year", g.week_of_year, w);
    g.price_x_popularity = get_or(t, "price_x_popularity", g.price_x_popularity, w);
    g.brand_effects = get_or(t, "brand_effects", g.brand_effects, w);
  }
  return s;
}

LearnerSpec parse_learner(const std::string& label, const Json& value, bool combiner, const std::string& where) {
  LearnerKind kind;
  try {
    kind = parse_learner_kind(label);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(where + ": " + e.what());
  }
  LearnerSpec spec = combiner ? default_combiner(kind) : default_learner(kind);
  if (value.is_null()) return spec;
  const Json grid = value.is_array() ? value : Json::array({value});
  if (grid.empty()) throw ConfigError(where + "." + label + ": empty grid");
  spec.grid.clear();
  for (const auto& entry : grid) {
    try {
      // Combiner entries start from the combiner defaults.
      Json merged = combiner ? learner_config_to_json(default_combiner(kind).grid.front()) : Json::object();
      for (const auto& [k, v] : entry.items()) merged[k] = v;
      spec.grid.push_back(learner_config_from_json(kind, merged));
    } catch (const std::exception& e) {
      throw ConfigError(where + "." + label + ": " + e.what());
    }
  }
  return spec;
}

std::vector<LearnerSpec> parse_learners(const Json& j, bool combiner, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object keyed by LR, DT, RF, GBT");
  std::vector<LearnerSpec> specs;
  for (const auto& label : {"LR", "DT", "RF", "GBT"}) {
    if (j.contains(label)) specs.push_back(parse_learner(label, j.at(label), combiner, where));
  }
  if (specs.size() != j.size()) check_keys(j, {"LR", "DT", "RF", "GBT"}, where);
  if (specs.empty()) throw ConfigError(where + ": no learners listed");
  return specs;
}

std::vector<std::vector<std::string>> parse_combos(const Json& j, const std::string& where) {
  try {
    return j.get<std::vector<std::vector<std::string>>>();
  } catch (const Json::exception&) {
    throw ConfigError(where + ": expected a list of learner-label lists");
  }
}

}  // namespace

std::vector<ColumnSchema> parse_schema(const Json& j) {
  const Json& cols = j.is_object() && j.contains("columns") ? j.at("columns") : j;
  if (!cols.is_array()) throw ConfigError("schema: expected an array of columns");
  std::vector<ColumnSchema> schema;
  for (const auto& c : cols) {
    check_keys(c, {"name", "kind", "role"}, "schema column");
    if (!c.contains("name")) throw ConfigError("schema column without a name");
    ColumnSchema s;
    s.name = c.at("name").get<std::string>();
    try {
      s.kind = parse_column_kind(get_or<std::string>(c, "kind", "numeric", "schema"));
      s.role = parse_column_role(get_or<std::string>(c, "role", "feature", "schema"));
    } catch (const DataError& e) {
      throw ConfigError("schema column '" + s.name + "': " + e.what());
    }
    schema.push_back(std::move(s));
  }
  return schema;
}

std::vector<ColumnSchema> load_schema(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open schema file '" + path.string() + "'");
  try {
    return parse_schema(Json::parse(in, nullptr, true, true));
  } catch (const Json::exception& e) {
    throw ConfigError("schema file '" + path.string() + "': " + e.what());
  }
}

Json schema_to_json(std::span<const ColumnSchema> schema) {
  Json cols = Json::array();
  for (const auto& c : schema) {
    cols.push_back({{"name", c.name}, {"kind", std::string(to_string(c.kind))}, {"role", std::string(to_string(c.role))}});
  }
  return Json{{"columns", std::move(cols)}};
}

ExperimentConfig parse_config(const Json& j, const fs::path& base) {
  check_keys(j, {"seed", "data", "preprocess", "split", "protocol", "learners", "combiners", "binary", "triple",
                 "output_dir", "export_model"},
             "config");
  ExperimentConfig cfg;
  cfg.seed = get_or(j, "seed", cfg.seed, "config");

  if (j.contains("data")) {
    const auto& d = j.at("data");
    check_keys(d, {"source", "synthetic", "sale_level", "csv", "schema", "events"}, "data");
    const auto source = get_or<std::string>(d, "source", "synthetic", "data");
    if (source == "synthetic") {
      cfg.data.synthetic = true;
      if (d.contains("synthetic")) cfg.data.synthetic_spec = parse_synthetic(d.at("synthetic"));
      cfg.data.sale_level = get_or(d, "sale_level", false, "data");
    } else if (source == "csv") {
      cfg.data.synthetic = false;
      if (!d.contains("csv")) throw ConfigError("data: source 'csv' needs a 'csv' path");
      cfg.data.csv = resolve(base, d.at("csv").get<std::string>());
      cfg.data.schema = schema_field(d, base, "data");
      if (d.contains("events")) {
        for (const auto& e : d.at("events")) {
          check_keys(e, {"csv", "schema"}, "data.events");
          if (!e.contains("csv")) throw ConfigError("data.events: entry without 'csv'");
          cfg.data.events.push_back({resolve(base, e.at("csv").get<std::string>()), schema_field(e, base, "data.events")});
        }
      }
    } else {
      throw ConfigError("data.source: expected 'synthetic' or 'csv', got '" + source + "'");
    }
  }
  cfg.data.synthetic_spec.seed = derive_seed(cfg.seed, "synthetic");

  if (j.contains("preprocess")) {
    const auto& p = j.at("preprocess");
    const std::string w = "preprocess";
    check_keys(p, {"drop", "drop_threshold", "numeric_fill", "categorical_fill", "aggregate", "popularity", "max_demand"}, w);
    auto& pc = cfg.preprocess;
    pc.drop = get_or(p, "drop", pc.drop, w);
    pc.drop_threshold = get_optional(p, "drop_threshold", pc.drop_threshold, w);
    const auto nf = get_or<std::string>(p, "numeric_fill", "mean", w);
    if (nf == "mean") pc.numeric_fill = NumericFill::ColumnMean;
    else if (nf == "median") pc.numeric_fill = NumericFill::ColumnMedian;
    else throw ConfigError("preprocess.numeric_fill: expected 'mean' or 'median'");
    const auto cf = get_or<std::string>(p, "categorical_fill", "mode", w);
    if (cf == "mode") pc.categorical_fill = CategoricalFill::Mode;
    else if (cf == "sentinel") pc.categorical_fill = CategoricalFill::Sentinel;
    else throw ConfigError("preprocess.categorical_fill: expected 'mode' or 'sentinel'");
    if (p.contains("aggregate") && !p.at("aggregate").is_null()) {
      const auto& a = p.at("aggregate");
      check_keys(a, {"product_key", "week_keys", "quantity_column", "target"}, "preprocess.aggregate");
      WeeklyAggregation agg;
      agg.product_key = get_or(a, "product_key", agg.product_key, w);
      agg.week_keys = get_or(a, "week_keys", agg.week_keys, w);
      agg.quantity_column = get_optional<std::string>(a, "quantity_column", std::nullopt, w);
      agg.target_name = get_or(a, "target", agg.target_name, w);
      pc.aggregate = agg;
    }
    if (p.contains("popularity") && !p.at("popularity").is_null()) {
      const auto& a = p.at("popularity");
      check_keys(a, {"product_key", "column"}, "preprocess.popularity");
      PopularityConfig pop;
      pop.product_key = get_or(a, "product_key", pop.product_key, w);
      pop.column = get_or(a, "column", pop.column, w);
      pc.popularity = pop;
    }
    pc.max_demand = get_optional(p, "max_demand", pc.max_demand, w);
  }
  if (cfg.data.synthetic && cfg.data.sale_level && !cfg.preprocess.aggregate) {
    throw ConfigError("data.sale_level needs preprocess.aggregate to rebuild weekly demand");
  }

  if (j.contains("split")) {
    const auto& s = j.at("split");
    check_keys(s, {"train", "validation", "test"}, "split");
    cfg.split.train = get_or(s, "train", cfg.split.train, "split");
    cfg.split.validation = get_or(s, "validation", cfg.split.validation, "split");
    cfg.split.test = get_or(s, "test", cfg.split.test, "split");
  }
  if (std::abs(cfg.split.train + cfg.split.validation + cfg.split.test - 1.0) > 1e-9) {
    throw ConfigError("split: fractions must sum to 1");
  }

  if (j.contains("protocol")) {
    const auto& p = j.at("protocol");
    const std::string w = "protocol";
    check_keys(p, {"repetitions", "subset_fraction", "folds", "threads", "t_test", "alpha"}, w);
    auto& pc = cfg.protocol;
    pc.repetitions = get_or(p, "repetitions", pc.repetitions, w);
    pc.subset_fraction = get_or(p, "subset_fraction", pc.subset_fraction, w);
    pc.folds = get_or(p, "folds", pc.folds, w);
    pc.threads = get_or(p, "threads", pc.threads, w);
    const auto t = get_or<std::string>(p, "t_test", "welch", w);
    if (t == "welch") cfg.paired_t_test = false;
    else if (t == "paired") cfg.paired_t_test = true;
    else throw ConfigError("protocol.t_test: expected 'welch' or 'paired'");
    cfg.alpha = get_or(p, "alpha", cfg.alpha, w);
  }
  if (cfg.protocol.repetitions < 2) throw ConfigError("protocol.repetitions must be >= 2");
  if (cfg.protocol.folds < 2) throw ConfigError("protocol.folds must be >= 2");
  if (!(cfg.protocol.subset_fraction > 0.0 && cfg.protocol.subset_fraction < 1.0)) {
    throw ConfigError("protocol.subset_fraction must lie in (0, 1)");
  }
  if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0)) throw ConfigError("protocol.alpha must lie in (0, 1)");

  if (j.contains("learners")) {
    cfg.learners = parse_learners(j.at("learners"), false, "learners");
  } else {
    for (auto k : {LearnerKind::LR, LearnerKind::DT, LearnerKind::RF, LearnerKind::GBT}) cfg.learners.push_back(default_learner(k));
  }
  if (j.contains("combiners")) {
    cfg.combiners = parse_learners(j.at("combiners"), true, "combiners");
  } else {
    for (auto k : {LearnerKind::LR, LearnerKind::DT, LearnerKind::RF, LearnerKind::GBT}) cfg.combiners.push_back(default_combiner(k));
  }

  std::set<std::string> pool;
  for (const auto& l : cfg.learners) pool.insert(l.label);
  const bool full_pool = pool.size() == 4;
  if (j.contains("binary")) {
    cfg.binary = parse_combos(j.at("binary"), "binary");
  } else if (full_pool) {
    cfg.binary = {{"GBT", "DT"}, {"GBT", "LR"}, {"LR", "DT"}, {"DT", "RF"}, {"GBT", "RF"}, {"LR", "RF"}};
  }
  if (j.contains("triple")) {
    cfg.triple = parse_combos(j.at("triple"), "triple");
  } else if (full_pool) {
    cfg.triple = {{"DT", "RF", "GBT"}, {"RF", "DT", "LR"}, {"GBT", "LR", "DT"}, {"LR", "RF", "GBT"}};
  }
  for (const auto* list : {&cfg.binary, &cfg.triple}) {
    for (const auto& combo : *list) {
      if (combo.empty()) throw ConfigError("combo lists must not contain empty combos");
      for (const auto& m : combo) {
        if (!pool.count(m)) throw ConfigError("combo member '" + m + "' is not among the configured learners");
      }
    }
  }

  cfg.output_dir = get_or<std::string>(j, "output_dir", cfg.output_dir.string(), "config");
  if (j.contains("export_model")) {
    if (j.at("export_model").is_null()) {
      cfg.export_model.reset();
    } else {
      const auto& e = j.at("export_model");
      check_keys(e, {"members", "combiner"}, "export_model");
      ExportConfig ec;
      ec.members = get_or(e, "members", std::vector<std::string>(pool.begin(), pool.end()), "export_model");
      ec.combiner = get_or(e, "combiner", ec.combiner, "export_model");
      cfg.export_model = ec;
    }
  } else {
    cfg.export_model = ExportConfig{std::vector<std::string>(pool.begin(), pool.end()), "LR"};
  }
  if (cfg.export_model) {
    for (const auto& m : cfg.export_model->members) {
      if (!pool.count(m)) throw ConfigError("export_model member '" + m + "' is not among the configured learners");
    }
    const bool has = std::any_of(cfg.combiners.begin(), cfg.combiners.end(),
                                 [&](const LearnerSpec& c) { return c.label == cfg.export_model->combiner; });
    if (!has) throw ConfigError("export_model combiner '" + cfg.export_model->combiner + "' is not configured");
  }
  return cfg;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  Json j;
  try {
    j = Json::parse(in, nullptr, true, true);
  } catch (const Json::exception& e) {
    throw ConfigError("config file '" + path.string() + "': " + e.what());
  }
  return parse_config(j, path.parent_path());
}

Json PreprocessSummary::to_json() const {
  return Json{{"input_rows", input_rows},
              {"aggregated_rows", aggregated_rows},
              {"output_rows", output_rows},
              {"dropped_columns", dropped_columns}};
}

LoadedData load_data(const DataConfig& cfg) {
  LoadedData out;
  if (cfg.synthetic) {
    auto synth = generate_synthetic(cfg.synthetic_spec);
    if (cfg.sale_level) {
      auto [purchases, abandons] = synthetic_view_events(synth.data);
      out.raw = expand_to_sales(synth.data);
      out.events.push_back(std::move(purchases));
      out.events.push_back(std::move(abandons));
    } else {
      out.raw = std::move(synth.data);
    }
    return out;
  }
  if (!fs::exists(cfg.csv)) throw ConfigError("data file '" + cfg.csv.string() + "' does not exist");
  out.raw = ingest_csv(cfg.csv, cfg.schema);
  for (const auto& e : cfg.events) {
    if (!fs::exists(e.csv)) throw ConfigError("event file '" + e.csv.string() + "' does not exist");
    out.events.push_back(ingest_csv(e.csv, e.schema));
  }
  return out;
}

Dataset apply_preprocess(const LoadedData& data, const PreprocessConfig& cfg, PreprocessSummary* summary) {
  PreprocessSummary s;
  s.input_rows = data.raw.rows();
  Dataset d = data.raw;
  std::set<std::string> before;
  for (const auto& c : d.columns()) before.insert(c.schema.name);
  if (!cfg.drop.empty()) d = drop_columns(d, cfg.drop);
  if (cfg.drop_threshold) d = drop_sparse(d, *cfg.drop_threshold);
  for (const auto& name : before) {
    if (!d.find(name)) s.dropped_columns.push_back(name);
  }
  d = fill_missing(d, cfg.numeric_fill, cfg.categorical_fill);
  if (cfg.aggregate) d = aggregate_weekly(d, *cfg.aggregate);
  s.aggregated_rows = d.rows();
  if (cfg.popularity) {
    if (data.events.empty()) throw ConfigError("preprocess.popularity needs event tables (data.events)");
    d = derive_popularity(data.events, d, cfg.popularity->product_key, cfg.popularity->column);
  }
  if (cfg.max_demand) d = remove_outliers(d, *cfg.max_demand);
  d.validate();
  s.output_rows = d.rows();
  if (summary) *summary = std::move(s);
  return d;
}

}  // namespace demandsg
