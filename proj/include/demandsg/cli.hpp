#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "demandsg/preprocess.hpp"
#include "demandsg/protocol.hpp"
#include "demandsg/synthetic.hpp"

namespace demandsg {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct EventSource {
  std::filesystem::path csv;
  std::vector<ColumnSchema> schema;
};

struct DataConfig {
  bool synthetic = true;
  SyntheticSpec synthetic_spec;
  bool sale_level = false;  // synthetic only: emit sale rows plus view events
  std::filesystem::path csv;
  std::vector<ColumnSchema> schema;
  std::vector<EventSource> events;
};

struct PopularityConfig {
  std::string product_key = "product_id";
  std::string column = "popularity";
};

struct PreprocessConfig {
  std::vector<std::string> drop;
  std::optional<double> drop_threshold = 0.5;
  NumericFill numeric_fill = NumericFill::ColumnMean;
  CategoricalFill categorical_fill = CategoricalFill::Mode;
  std::optional<WeeklyAggregation> aggregate;
  std::optional<PopularityConfig> popularity;
  std::optional<double> max_demand = 20.0;
};

struct ExportConfig {
  std::vector<std::string> members = {"LR", "DT", "RF", "GBT"};
  std::string combiner = "LR";
};

struct ExperimentConfig {
  std::uint64_t seed = 42;
  DataConfig data;
  PreprocessConfig preprocess;
  SplitFractions split;
  ProtocolConfig protocol;
  bool paired_t_test = false;
  double alpha = 0.05;
  std::vector<LearnerSpec> learners;   // first-level pool, one per kind
  std::vector<LearnerSpec> combiners;  // second-level sweep
  std::vector<std::vector<std::string>> binary;
  std::vector<std::vector<std::string>> triple;
  std::filesystem::path output_dir = "out";
  std::optional<ExportConfig> export_model = ExportConfig{};
};

// Parses a JSON config (comments allowed). Relative paths resolve against
// `base_dir`. Every field is optional and falls back to the defaults above.
ExperimentConfig parse_config(const Json& j, const std::filesystem::path& base_dir);
ExperimentConfig load_config(const std::filesystem::path& path);

std::vector<ColumnSchema> parse_schema(const Json& j);
std::vector<ColumnSchema> load_schema(const std::filesystem::path& path);
Json schema_to_json(std::span<const ColumnSchema> schema);

struct PreprocessSummary {
  std::size_t input_rows = 0;
  std::size_t aggregated_rows = 0;
  std::size_t output_rows = 0;
  std::vector<std::string> dropped_columns;
  Json to_json() const;
};

struct LoadedData {
  Dataset raw;
  std::vector<Dataset> events;
};

LoadedData load_data(const DataConfig& cfg);
Dataset apply_preprocess(const LoadedData& data, const PreprocessConfig& cfg, PreprocessSummary* summary);

// Run-report assembly from a finished run matrix.
struct TableRow {
  std::string label;   // row label as printed
  std::string column;  // run-matrix column
};

struct ReportTable {
  std::string name;
  std::string title;
  std::vector<TableRow> rows;
};

struct RunLayout {
  ProtocolPlan plan;
  std::vector<ReportTable> tables;  // level-2 sweep, best, binary, triple
  std::vector<std::string> singles;
  std::vector<std::string> level2_columns;
  std::vector<std::string> sg_lr_columns;  // candidates for the best SG row
};

RunLayout build_run_layout(const ExperimentConfig& cfg);

struct RunReport {
  std::vector<std::pair<std::string, std::string>> files;  // name, contents
};

RunReport build_report(const ExperimentConfig& cfg, const RunLayout& layout, const RunMatrix& matrix,
                       const SplitIndices& split, std::size_t dataset_rows);

// Subcommands. Each returns the process exit code and writes diagnostics to
// `err`.
struct CommonOptions {
  std::optional<std::filesystem::path> config;
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> out;
  bool quiet = false;
};

int cmd_synth(const CommonOptions& opts, std::ostream& out, std::ostream& err);
int cmd_preprocess(const CommonOptions& opts, std::ostream& out, std::ostream& err);
int cmd_run(const CommonOptions& opts, std::ostream& out, std::ostream& err);
int cmd_predict(const std::filesystem::path& model, const std::filesystem::path& input,
                const std::optional<std::filesystem::path>& output, std::ostream& out, std::ostream& err);

}  // namespace demandsg
