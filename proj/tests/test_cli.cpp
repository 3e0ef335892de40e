#include <cstdlib>
#include <sstream>

#include <gtest/gtest.h>
#include <sys/wait.h>

#include "demandsg/cli.hpp"
#include "demandsg/csv.hpp"
#include "demandsg/model_io.hpp"
#include "support.hpp"

using namespace demandsg;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

// Runs the installed CLI binary with `args`, capturing both streams.
Result run_tool(const testutil::TempDir& dir, const std::string& args) {
  const auto out = dir / "stdout.txt";
  const auto err = dir / "stderr.txt";
  const std::string cmd =
      std::string(DEMANDSG_CLI_PATH) + " " + args + " >" + out.string() + " 2>" + err.string();
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, testutil::read_text(out), testutil::read_text(err)};
}

// Small and quick experiment over all four learners.
Json small_config(const fs::path& out_dir) {
  Json j = Json::parse(R"({
    "seed": 7,
    "data": {"source": "synthetic", "synthetic": {"n_products": 12, "weeks": 20, "noise_std": 0.7}},
    "protocol": {"repetitions": 2, "folds": 3},
    "learners": {
      "LR": [{"lambda": 0.1}, {"lambda": 1.0}],
      "DT": [{"max_depth": 3}, {"max_depth": null}],
      "RF": {"n_trees": 4},
      "GBT": {"n_stages": 15}
    },
    "combiners": {"LR": null, "DT": null, "RF": {"n_trees": 4}, "GBT": {"n_stages": 15}}
  })");
  j["output_dir"] = out_dir.string();
  return j;
}

fs::path write_config(const testutil::TempDir& dir, const std::string& name, const Json& j) {
  testutil::write_text(dir / name, j.dump(2));
  return dir / name;
}

std::size_t csv_rows(const fs::path& p) {
  std::istringstream in(testutil::read_text(p));
  return parse_csv(in).rows.size();
}

}  // namespace

TEST(Config, DefaultsAreValid) {
  const auto cfg = parse_config(Json::object(), fs::current_path());
  EXPECT_EQ(cfg.seed, 42u);
  EXPECT_EQ(cfg.protocol.repetitions, 20u);
  EXPECT_EQ(cfg.learners.size(), 4u);
  EXPECT_EQ(cfg.combiners.size(), 4u);
  EXPECT_EQ(cfg.binary.size(), 6u);
  EXPECT_EQ(cfg.triple.size(), 4u);
}

TEST(Config, ShippedExampleParses) {
  EXPECT_NO_THROW(load_config(fs::path(DEMANDSG_SOURCE_DIR) / "configs" / "example.jsonc"));
}

TEST(Config, RejectsInvalidSettings) {
  const auto bad = [](const char* text) { return parse_config(Json::parse(text), fs::current_path()); };
  EXPECT_THROW(bad(R"({"sed": 1})"), ConfigError);
  EXPECT_THROW(bad(R"({"split": {"train": 0.5, "validation": 0.3, "test": 0.3}})"), ConfigError);
  EXPECT_THROW(bad(R"({"protocol": {"repetitions": 1}})"), ConfigError);
  EXPECT_THROW(bad(R"({"protocol": {"folds": 1}})"), ConfigError);
  EXPECT_THROW(bad(R"({"learners": {"SVM": null}})"), ConfigError);
  EXPECT_THROW(bad(R"({"binary": [["LR", "XX"]]})"), ConfigError);
  EXPECT_THROW(bad(R"({"data": {"source": "csv", "csv": "/nonexistent/x.csv", "schema": "/nonexistent/s.json"}})"),
               ConfigError);
}

TEST(Cli, BadConfigExitsWithUsageCode) {
  testutil::TempDir dir("badcfg");
  const auto path = write_config(dir, "c.json", Json{{"protocol", {{"repetitions", 1}}}});
  std::ostringstream out, err;
  EXPECT_EQ(cmd_run({.config = path}, out, err), 2);
  EXPECT_NE(err.str().find("repetitions"), std::string::npos) << err.str();
}

TEST(Cli, BadSchemaPathIsNamed) {
  testutil::TempDir dir("badschema");
  testutil::write_text(dir / "d.csv", "a,demand\n1,2\n");
  const auto path = write_config(
      dir, "c.json", Json{{"data", {{"source", "csv"}, {"csv", "d.csv"}, {"schema", "missing.schema.json"}}}});
  const auto r = run_tool(dir, "preprocess --config " + path.string() + " --out " + (dir / "o").string());
  EXPECT_NE(r.code, 0);
  EXPECT_NE(r.err.find("missing.schema.json"), std::string::npos) << r.err;
}

TEST(Cli, SyntheticPreprocessWithoutOutliersKeepsRows) {
  testutil::TempDir dir("synthpre");
  Json cfg = small_config(dir / "o");
  cfg["preprocess"] = {{"max_demand", nullptr}};
  const auto path = write_config(dir, "c.json", cfg);
  std::ostringstream out, err;
  ASSERT_EQ(cmd_preprocess({.config = path, .quiet = true}, out, err), 0) << err.str();
  const auto summary = Json::parse(testutil::read_text(dir / "o" / "preprocess_summary.json"));
  EXPECT_EQ(summary["input_rows"], 240);
  EXPECT_EQ(summary["output_rows"], 240);
  EXPECT_EQ(csv_rows(dir / "o" / "processed.csv"), 240u);
}

TEST(Cli, SaleLevelInputIsAggregatedWeekly) {
  testutil::TempDir dir("sales");
  Json cfg = small_config(dir / "raw");
  cfg["data"]["sale_level"] = true;
  cfg["preprocess"] = {{"aggregate", Json::object()}};
  std::ostringstream out, err;
  ASSERT_EQ(cmd_synth({.config = write_config(dir, "synth.json", cfg), .quiet = true}, out, err), 0) << err.str();

  // Weekly rows with positive demand are what aggregation can recover.
  std::istringstream weekly_in(testutil::read_text(dir / "raw" / "synthetic.csv"));
  const auto weekly = parse_csv(weekly_in);
  const auto demand_col = std::find(weekly.header.begin(), weekly.header.end(), "demand") - weekly.header.begin();
  std::size_t positive = 0;
  double total = 0.0;
  for (const auto& row : weekly.rows) {
    const double d = std::stod(row[static_cast<std::size_t>(demand_col)]);
    positive += d > 0;
    total += d;
  }

  Json pre = small_config(dir / "pre");
  pre["data"] = {{"source", "csv"},
                 {"csv", "raw/sales.csv"},
                 {"schema", "raw/sales.schema.json"},
                 {"events", {{{"csv", "raw/purchases.csv"}, {"schema", "raw/events.schema.json"}},
                             {{"csv", "raw/abandons.csv"}, {"schema", "raw/events.schema.json"}}}}};
  pre["preprocess"] = {{"aggregate", {{"product_key", "product_id"}, {"week_keys", {"year", "week"}}}},
                       {"popularity", {{"product_key", "product_id"}, {"column", "popularity_events"}}},
                       {"max_demand", nullptr}};
  ASSERT_EQ(cmd_preprocess({.config = write_config(dir, "pre.json", pre), .quiet = true}, out, err), 0) << err.str();
  const auto summary = Json::parse(testutil::read_text(dir / "pre" / "preprocess_summary.json"));
  EXPECT_EQ(summary["input_rows"].get<double>(), total);
  EXPECT_EQ(summary["aggregated_rows"].get<std::size_t>(), positive);

  std::istringstream processed_in(testutil::read_text(dir / "pre" / "processed.csv"));
  const auto processed = parse_csv(processed_in);
  EXPECT_NE(std::find(processed.header.begin(), processed.header.end(), "popularity_events"), processed.header.end());
  const auto pd = std::find(processed.header.begin(), processed.header.end(), "demand") - processed.header.begin();
  double recovered = 0.0;
  for (const auto& row : processed.rows) recovered += std::stod(row[static_cast<std::size_t>(pd)]);
  EXPECT_EQ(recovered, total);
}

TEST(Cli, RunEmitsTablesAndIsByteIdentical) {
  testutil::TempDir dir("run");
  const auto path = write_config(dir, "c.json", small_config(dir / "a"));
  std::ostringstream out, err;
  ASSERT_EQ(cmd_run({.config = path, .quiet = true}, out, err), 0) << err.str();
  ASSERT_EQ(cmd_run({.config = path, .out = dir / "b", .quiet = true}, out, err), 0) << err.str();

  const std::vector<std::pair<std::string, std::size_t>> tables{
      {"table1_level2.csv", 4}, {"table2_best.csv", 5}, {"table3_binary.csv", 6}, {"table4_triple.csv", 4}};
  for (const auto& [name, rows] : tables) {
    EXPECT_EQ(csv_rows(dir / "a" / name), rows) << name;
  }
  for (const auto& entry : fs::directory_iterator(dir / "a")) {
    const auto name = entry.path().filename().string();
    EXPECT_EQ(testutil::read_text(entry.path()), testutil::read_text(dir / "b" / name)) << name;
  }
  const auto summary = Json::parse(testutil::read_text(dir / "a" / "summary.json"));
  for (const char* t : {"anova_level1", "anova_level2", "anova_binary", "anova_triple", "t_test"}) {
    EXPECT_TRUE(summary["tests"].contains(t)) << t;
  }
  EXPECT_TRUE(fs::exists(dir / "a" / "model.json"));
}

TEST(Cli, SeedFlagChangesResults) {
  testutil::TempDir dir("seed");
  Json cfg = small_config(dir / "a");
  cfg["export_model"] = nullptr;
  const auto path = write_config(dir, "c.json", cfg);
  std::ostringstream out, err;
  ASSERT_EQ(cmd_run({.config = path, .quiet = true}, out, err), 0);
  ASSERT_EQ(cmd_run({.config = path, .seed = 8, .out = dir / "b", .quiet = true}, out, err), 0);
  EXPECT_NE(testutil::read_text(dir / "a" / "run_matrix.csv"), testutil::read_text(dir / "b" / "run_matrix.csv"));
}

TEST(Cli, PredictRoundTripMatchesInMemoryModel) {
  testutil::TempDir dir("predict");
  const auto path = write_config(dir, "c.json", small_config(dir / "o"));
  std::ostringstream out, err;
  ASSERT_EQ(cmd_run({.config = path, .quiet = true}, out, err), 0) << err.str();
  ASSERT_EQ(cmd_preprocess({.config = path, .quiet = true}, out, err), 0) << err.str();

  const auto model = load_model(dir / "o" / "model.json");
  const auto frame = read_feature_csv(dir / "o" / "processed.csv", model->layout());
  const Eigen::VectorXd expected = model->predict(frame);

  const auto r = run_tool(dir, "predict --model " + (dir / "o" / "model.json").string() + " --input " +
                                   (dir / "o" / "processed.csv").string());
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream in(r.out);
  const auto table = parse_csv(in);
  ASSERT_EQ(table.header, std::vector<std::string>{"prediction"});
  ASSERT_EQ(table.rows.size(), static_cast<std::size_t>(expected.size()));
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    EXPECT_NEAR(std::stod(table.rows[i][0]), expected[static_cast<Eigen::Index>(i)], 1e-12);
  }
}

TEST(Cli, PredictEdgeCases) {
  testutil::TempDir dir("edges");
  FeatureLayout layout{{"price", FeatureKind::Numeric, {}}};
  TreeNode leaf;
  leaf.prediction = 2.5;
  leaf.samples = 3;
  save_model(TreeModel(layout, RegressionTree({leaf})), dir / "leaf.json");

  testutil::write_text(dir / "rows.csv", "price,other\n1,a\n100,b\n-3,c\n");
  std::ostringstream out, err;
  ASSERT_EQ(cmd_predict(dir / "leaf.json", dir / "rows.csv", std::nullopt, out, err), 0) << err.str();
  EXPECT_EQ(out.str(), "prediction\n2.5\n2.5\n2.5\n");

  testutil::write_text(dir / "empty.csv", "price\n");
  ASSERT_EQ(cmd_predict(dir / "leaf.json", dir / "empty.csv", dir / "p" / "empty_out.csv", out, err), 0);
  EXPECT_EQ(testutil::read_text(dir / "p" / "empty_out.csv"), "prediction\n");

  testutil::write_text(dir / "wrong.csv", "cost\n1\n");
  std::ostringstream err2;
  EXPECT_NE(cmd_predict(dir / "leaf.json", dir / "wrong.csv", std::nullopt, out, err2), 0);
  EXPECT_NE(err2.str().find("price"), std::string::npos) << err2.str();
}

TEST(Cli, BinaryRejectsUnknownArguments) {
  testutil::TempDir dir("args");
  EXPECT_NE(run_tool(dir, "frobnicate").code, 0);
  EXPECT_NE(run_tool(dir, "run --bogus").code, 0);
  EXPECT_NE(run_tool(dir, "predict --model /nonexistent/m.json --input x.csv").code, 0);
  EXPECT_EQ(run_tool(dir, "--help").code, 0);
}

TEST(Cli, BinarySynthWritesFiles) {
  testutil::TempDir dir("binsynth");
  const auto path = write_config(dir, "c.json", small_config(dir / "o"));
  const auto r = run_tool(dir, "synth --config " + path.string() + " --seed 3");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("240 weekly rows"), std::string::npos) << r.out;
  EXPECT_EQ(csv_rows(dir / "o" / "synthetic.csv"), 240u);
  EXPECT_EQ(csv_rows(dir / "o" / "expected_demand.csv"), 240u);
}
