#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace demandsg {

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ColumnKind { Numeric, Categorical, TimestampPart, Identifier };
enum class ColumnRole { Feature, Target, Key, Drop };

std::string_view to_string(ColumnKind kind);
std::string_view to_string(ColumnRole role);
ColumnKind parse_column_kind(std::string_view text);
ColumnRole parse_column_role(std::string_view text);

// Numeric and timestamp-part columns hold reals; categorical and identifier
// columns hold interned symbols.
constexpr bool is_numeric_kind(ColumnKind kind) {
  return kind == ColumnKind::Numeric || kind == ColumnKind::TimestampPart;
}

struct ColumnSchema {
  std::string name;
  ColumnKind kind = ColumnKind::Numeric;
  ColumnRole role = ColumnRole::Feature;

  bool operator==(const ColumnSchema&) const = default;
};

inline constexpr std::int32_t kMissingCode = -1;

struct Column {
  ColumnSchema schema;
  std::vector<double> values;       // numeric storage, NaN marks missing
  std::vector<std::int32_t> codes;  // symbolic storage, kMissingCode marks missing
  std::vector<std::string> levels;  // symbol table in first-seen order

  explicit Column(ColumnSchema s) : schema(std::move(s)) {}

  bool numeric() const { return is_numeric_kind(schema.kind); }
  std::size_t size() const { return numeric() ? values.size() : codes.size(); }
  bool missing(std::size_t row) const;
  std::size_t missing_count() const;

  std::int32_t intern(std::string_view label);
  std::optional<std::int32_t> find_level(std::string_view label) const;
  const std::string& label(std::size_t row) const { return levels[codes[row]]; }
  std::string cell_text(std::size_t row) const;

  void push_missing();
  // Parses one CSV cell; empty (after trimming) means missing.
  void push_text(std::string_view text, std::size_t row);
};

// Column-major table. Schema invariants: names unique, at most one target
// column. Preprocessing invariants are checked separately by validate().
class Dataset {
 public:
  Dataset() = default;
  explicit Dataset(std::vector<ColumnSchema> schema);
  explicit Dataset(std::vector<Column> columns);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return columns_.size(); }

  const std::vector<Column>& columns() const { return columns_; }
  const Column& column(std::size_t i) const { return columns_[i]; }
  const Column& column(std::string_view name) const { return columns_[index_of(name)]; }
  std::vector<ColumnSchema> schema() const;

  std::optional<std::size_t> find(std::string_view name) const;
  std::size_t index_of(std::string_view name) const;
  std::optional<std::size_t> target_column() const;
  std::size_t target_index() const;
  Eigen::VectorXd target() const;

  // Appends a row of CSV text cells; `row_number` is used in parse errors.
  void append_text_row(std::span<const std::string> cells, std::size_t row_number);
  void add_column(Column column);
  void remove_column(std::size_t index);
  Column& mutable_column(std::size_t i) { return columns_[i]; }

  Dataset select_rows(std::span<const std::size_t> rows) const;
  bool has_missing() const;

  // No missing cells, finite numerics, non-negative target.
  void validate() const;

 private:
  void check_schema() const;

  std::vector<Column> columns_;
  std::size_t rows_ = 0;
};

Dataset ingest_csv(const std::filesystem::path& path, std::span<const ColumnSchema> schema);
std::string to_csv(const Dataset& d);

}  // namespace demandsg
