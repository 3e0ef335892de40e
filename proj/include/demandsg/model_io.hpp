#pragma once

#include <filesystem>
#include <memory>

#include "demandsg/regressor.hpp"

namespace demandsg {

// Dispatches on the "type" field: linear, tree, forest, gbt or stacked.
std::unique_ptr<Regressor> model_from_json(const Json& j);

void save_model(const Regressor& model, const std::filesystem::path& path);
std::unique_ptr<Regressor> load_model(const std::filesystem::path& path);

// Reads a CSV whose header names (at least) the layout's columns. Extra
// columns are ignored; categories unknown to the layout become kUnseenCode.
FeatureFrame read_feature_csv(const std::filesystem::path& path, const FeatureLayout& layout);

}  // namespace demandsg
