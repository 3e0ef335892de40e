#include "demandsg/dataset.hpp"

#include <charconv>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "demandsg/csv.hpp"

namespace demandsg {

std::string_view to_string(ColumnKind kind) {
  switch (kind) {
    case ColumnKind::Numeric: return "numeric";
    case ColumnKind::Categorical: return "categorical";
    case ColumnKind::TimestampPart: return "timestamp-part";
    case ColumnKind::Identifier: return "identifier";
  }
  return "?";
}

std::string_view to_string(ColumnRole role) {
  switch (role) {
    case ColumnRole::Feature: return "feature";
    case ColumnRole::Target: return "target";
    case ColumnRole::Key: return "key";
    case ColumnRole::Drop: return "drop";
  }
  return "?";
}

ColumnKind parse_column_kind(std::string_view text) {
  if (text == "numeric") return ColumnKind::Numeric;
  if (text == "categorical") return ColumnKind::Categorical;
  if (text == "timestamp-part" || text == "year" || text == "month" || text == "week" ||
      text == "day")
    return ColumnKind::TimestampPart;
  if (text == "identifier") return ColumnKind::Identifier;
  throw DataError("unknown column kind '" + std::string(text) + "'");
}

ColumnRole parse_column_role(std::string_view text) {
  if (text == "feature") return ColumnRole::Feature;
  if (text == "target") return ColumnRole::Target;
  if (text == "key") return ColumnRole::Key;
  if (text == "drop") return ColumnRole::Drop;
  throw DataError("unknown column role '" + std::string(text) + "'");
}

bool Column::missing(std::size_t row) const {
  return numeric() ? std::isnan(values[row]) : codes[row] == kMissingCode;
}

std::size_t Column::missing_count() const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < size(); ++i) n += missing(i);
  return n;
}

std::int32_t Column::intern(std::string_view label) {
  if (auto code = find_level(label)) return *code;
  levels.emplace_back(label);
  return static_cast<std::int32_t>(levels.size() - 1);
}

std::optional<std::int32_t> Column::find_level(std::string_view label) const {
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (levels[i] == label) return static_cast<std::int32_t>(i);
  }
  return std::nullopt;
}

std::string Column::cell_text(std::size_t row) const {
  if (missing(row)) return {};
  return numeric() ? format_double(values[row]) : levels[codes[row]];
}

void Column::push_missing() {
  if (numeric()) {
    values.push_back(std::numeric_limits<double>::quiet_NaN());
  } else {
    codes.push_back(kMissingCode);
  }
}

void Column::push_text(std::string_view text, std::size_t row) {
  auto cell = trim(text);
  if (cell.empty()) {
    push_missing();
    return;
  }
  if (!numeric()) {
    codes.push_back(intern(cell));
    return;
  }
  double v = 0;
  const char* first = cell.data();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, cell.data() + cell.size(), v);
  if (ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(v)) {
    std::ostringstream msg;
    msg << "parse error at row " << row << ", column '" << schema.name
        << "': expected a finite number, got '" << cell << "'";
    throw DataError(msg.str());
  }
  values.push_back(v);
}

Dataset::Dataset(std::vector<ColumnSchema> schema) {
  columns_.reserve(schema.size());
  for (auto& s : schema) columns_.emplace_back(std::move(s));
  check_schema();
}

Dataset::Dataset(std::vector<Column> columns) : columns_(std::move(columns)) {
  rows_ = columns_.empty() ? 0 : columns_.front().size();
  for (const auto& c : columns_) {
    if (c.size() != rows_) throw DataError("column '" + c.schema.name + "' has a different row count");
  }
  check_schema();
}

void Dataset::check_schema() const {
  std::set<std::string_view> names;
  std::size_t targets = 0;
  for (const auto& c : columns_) {
    if (!names.insert(c.schema.name).second) {
      throw DataError("duplicate column name '" + c.schema.name + "'");
    }
    targets += c.schema.role == ColumnRole::Target;
  }
  if (targets > 1) throw DataError("schema declares more than one target column");
}

std::vector<ColumnSchema> Dataset::schema() const {
  std::vector<ColumnSchema> out;
  out.reserve(columns_.size());
  for (const auto& c : columns_) out.push_back(c.schema);
  return out;
}

std::optional<std::size_t> Dataset::find(std::string_view name) const {
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    if (columns_[i].schema.name == name) return i;
  }
  return std::nullopt;
}

std::size_t Dataset::index_of(std::string_view name) const {
  if (auto i = find(name)) return *i;
  throw DataError("no column named '" + std::string(name) + "'");
}

std::optional<std::size_t> Dataset::target_column() const {
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    if (columns_[i].schema.role == ColumnRole::Target) return i;
  }
  return std::nullopt;
}

std::size_t Dataset::target_index() const {
  if (auto t = target_column()) return *t;
  throw DataError("dataset has no target column");
}

Eigen::VectorXd Dataset::target() const {
  const auto& c = columns_[target_index()];
  if (!c.numeric()) throw DataError("target column '" + c.schema.name + "' is not numeric");
  return Eigen::Map<const Eigen::VectorXd>(c.values.data(), static_cast<Eigen::Index>(c.values.size()));
}

void Dataset::append_text_row(std::span<const std::string> cells, std::size_t row_number) {
  if (cells.size() != columns_.size()) {
    std::ostringstream msg;
    msg << "row " << row_number << " has " << cells.size() << " cells, expected " << columns_.size();
    throw DataError(msg.str());
  }
  for (std::size_t j = 0; j < cells.size(); ++j) columns_[j].push_text(cells[j], row_number);
  ++rows_;
}

void Dataset::add_column(Column column) {
  if (!columns_.empty() && column.size() != rows_) {
    throw DataError("column '" + column.schema.name + "' has a different row count");
  }
  if (columns_.empty()) rows_ = column.size();
  columns_.push_back(std::move(column));
  try {
    check_schema();
  } catch (...) {
    columns_.pop_back();
    throw;
  }
}

void Dataset::remove_column(std::size_t index) {
  columns_.erase(columns_.begin() + static_cast<std::ptrdiff_t>(index));
  if (columns_.empty()) rows_ = 0;
}

Dataset Dataset::select_rows(std::span<const std::size_t> rows) const {
  std::vector<Column> out;
  out.reserve(columns_.size());
  for (const auto& c : columns_) {
    Column nc(c.schema);
    nc.levels = c.levels;
    if (c.numeric()) {
      nc.values.reserve(rows.size());
      for (auto r : rows) nc.values.push_back(c.values.at(r));
    } else {
      nc.codes.reserve(rows.size());
      for (auto r : rows) nc.codes.push_back(c.codes.at(r));
    }
    out.push_back(std::move(nc));
  }
  Dataset d(std::move(out));
  d.rows_ = rows.size();
  return d;
}

bool Dataset::has_missing() const {
  for (const auto& c : columns_) {
    if (c.missing_count() > 0) return true;
  }
  return false;
}

void Dataset::validate() const {
  for (const auto& c : columns_) {
    if (auto m = c.missing_count()) {
      throw DataError("column '" + c.schema.name + "' still has " + std::to_string(m) +
                      " missing values");
    }
    if (c.numeric()) {
      for (double v : c.values) {
        if (!std::isfinite(v)) throw DataError("column '" + c.schema.name + "' has a non-finite value");
      }
    }
  }
  if (auto t = target_column()) {
    const auto& c = columns_[*t];
    if (!c.numeric()) throw DataError("target column '" + c.schema.name + "' is not numeric");
    for (double v : c.values) {
      if (v < 0) throw DataError("target column '" + c.schema.name + "' has a negative value");
    }
  }
}

Dataset ingest_csv(const std::filesystem::path& path, std::span<const ColumnSchema> schema) {
  if (!std::filesystem::exists(path)) throw DataError("missing file: " + path.string());
  CsvTable table = read_csv(path);
  std::vector<std::string> expected;
  for (const auto& s : schema) expected.push_back(s.name);
  std::vector<std::string> header;
  for (const auto& h : table.header) header.emplace_back(trim(h));
  if (header != expected) {
    std::ostringstream msg;
    msg << "header/schema mismatch in " << path.string() << ":";
    for (std::size_t i = 0; i < std::max(header.size(), expected.size()); ++i) {
      std::string got = i < header.size() ? header[i] : "<none>";
      std::string want = i < expected.size() ? expected[i] : "<none>";
      if (got != want) msg << " column " << i + 1 << " is '" << got << "', schema expects '" << want << "';";
    }
    throw DataError(msg.str());
  }
  Dataset d(std::vector<ColumnSchema>(schema.begin(), schema.end()));
  for (std::size_t i = 0; i < table.rows.size(); ++i) d.append_text_row(table.rows[i], i + 1);
  return d;
}

std::string to_csv(const Dataset& d) {
  std::ostringstream out;
  std::vector<std::string> fields;
  for (const auto& c : d.columns()) fields.push_back(c.schema.name);
  write_csv_row(out, fields);
  for (std::size_t r = 0; r < d.rows(); ++r) {
    fields.clear();
    for (const auto& c : d.columns()) fields.push_back(c.cell_text(r));
    write_csv_row(out, fields);
  }
  return out.str();
}

}  // namespace demandsg
