#pragma once

#include <memory>
#include <string_view>

#include <Eigen/Dense>
#include "json.hpp"

#include "demandsg/features.hpp"

namespace demandsg {

using Json = nlohmann::ordered_json;

// A trained model. Immutable after fitting; safe to share across threads.
class Regressor {
 public:
  virtual ~Regressor() = default;

  // Frame columns are matched to layout() by name, categories by label.
  virtual Eigen::VectorXd predict(const FeatureFrame& frame) const = 0;
  virtual const FeatureLayout& layout() const = 0;
  virtual std::string_view type_name() const = 0;
  virtual Json to_json() const = 0;
};

using RegressorPtr = std::shared_ptr<const Regressor>;

Json layout_to_json(const FeatureLayout& layout);
FeatureLayout layout_from_json(const Json& j);

}  // namespace demandsg
