#include "demandsg/model_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "demandsg/csv.hpp"
#include "demandsg/dataset.hpp"
#include "demandsg/ensemble.hpp"
#include "demandsg/linear.hpp"
#include "demandsg/stacking.hpp"

namespace demandsg {

Json layout_to_json(const FeatureLayout& layout) {
  Json arr = Json::array();
  for (const auto& f : layout) {
    Json e;
    e["name"] = f.name;
    e["kind"] = f.kind == FeatureKind::Categorical ? "categorical" : "numeric";
    if (f.kind == FeatureKind::Categorical) e["levels"] = f.levels;
    arr.push_back(std::move(e));
  }
  return arr;
}

FeatureLayout layout_from_json(const Json& j) {
  if (!j.is_array()) throw DataError("model layout must be an array");
  FeatureLayout layout;
  for (const auto& e : j) {
    FeatureInfo f;
    f.name = e.at("name").get<std::string>();
    const auto kind = e.at("kind").get<std::string>();
    if (kind == "categorical") {
      f.kind = FeatureKind::Categorical;
      f.levels = e.at("levels").get<std::vector<std::string>>();
    } else if (kind != "numeric") {
      throw DataError("unknown feature kind '" + kind + "' in model layout");
    }
    layout.push_back(std::move(f));
  }
  return layout;
}

std::unique_ptr<Regressor> model_from_json(const Json& j) {
  if (!j.is_object() || !j.contains("type")) throw DataError("model JSON lacks a \"type\" field");
  const auto type = j.at("type").get<std::string>();
  try {
    if (type == "linear") return std::make_unique<LinearModel>(LinearModel::from_json(j));
    if (type == "tree") return std::make_unique<TreeModel>(TreeModel::from_json(j));
    if (type == "forest") return std::make_unique<ForestModel>(ForestModel::from_json(j));
    if (type == "gbt") return std::make_unique<GbtModel>(GbtModel::from_json(j));
    if (type == "stacked") return std::make_unique<StackedModel>(StackedModel::from_json(j));
  } catch (const Json::exception& e) {
    throw DataError("malformed " + type + " model: " + e.what());
  }
  throw DataError("unknown model type '" + type + "'");
}

void save_model(const Regressor& model, const std::filesystem::path& path) {
  write_file_atomic(path, model.to_json().dump(1) + "\n");
}

std::unique_ptr<Regressor> load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open model file '" + path.string() + "'");
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::exception& e) {
    throw DataError("model file '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return model_from_json(j);
}

FeatureFrame read_feature_csv(const std::filesystem::path& path, const FeatureLayout& layout) {
  const CsvTable table = read_csv(path);
  std::unordered_map<std::string, std::size_t> position;
  for (std::size_t c = 0; c < table.header.size(); ++c) position.emplace(std::string(trim(table.header[c])), c);

  std::vector<std::size_t> source(layout.size());
  for (std::size_t j = 0; j < layout.size(); ++j) {
    auto it = position.find(layout[j].name);
    if (it == position.end()) {
      throw DataError("input '" + path.string() + "' lacks feature column '" + layout[j].name + "'");
    }
    source[j] = it->second;
  }

  FeatureFrame frame{layout, Eigen::MatrixXd(static_cast<Eigen::Index>(table.rows.size()),
                                             static_cast<Eigen::Index>(layout.size()))};
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    for (std::size_t j = 0; j < layout.size(); ++j) {
      const std::string_view cell = source[j] < row.size() ? trim(row[source[j]]) : std::string_view{};
      double value = 0.0;
      if (layout[j].kind == FeatureKind::Categorical) {
        value = kUnseenCode;
        for (std::size_t l = 0; l < layout[j].levels.size(); ++l) {
          if (layout[j].levels[l] == cell) {
            value = static_cast<double>(l);
            break;
          }
        }
      } else {
        const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
        if (cell.empty() || ec != std::errc{} || ptr != cell.data() + cell.size() || !std::isfinite(value)) {
          throw DataError("parse error at row " + std::to_string(r + 1) + ", column '" + layout[j].name +
                          "': expected a finite number, got '" + std::string(cell) + "'");
        }
      }
      frame.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = value;
    }
  }
  return frame;
}

}  // namespace demandsg
