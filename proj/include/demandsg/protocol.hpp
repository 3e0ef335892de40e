#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "demandsg/evalstat.hpp"
#include "demandsg/preprocess.hpp"
#include "demandsg/stacking.hpp"

namespace demandsg {

// A stacked combination: first-level learners named by label from the pool,
// combined by `second`.
struct Combo {
  std::string name;
  std::vector<std::string> members;
  LearnerSpec second;
};

// "SG(LR):DT+GBT" for combiner LR over members DT and GBT.
std::string combo_name(const LearnerSpec& second, std::span<const std::string> members);

struct ProtocolPlan {
  std::vector<LearnerSpec> pool;     // first-level learners available to combos
  std::vector<Combo> combos;
  std::vector<LearnerSpec> singles;  // evaluated alone; column name = label
};

struct ProtocolConfig {
  std::size_t repetitions = 20;
  double subset_fraction = 0.8;
  std::size_t folds = 10;
  std::size_t threads = 1;  // repetitions run in parallel; 0 = hardware concurrency
  // When false a failed fit becomes a NaN cell with its message recorded in
  // RunMatrix::failures instead of aborting the run.
  bool abort_on_failure = true;
};

class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Repetition r draws training subset r; first-level pool learners are fit once
// on it and shared by every combo, whose combiner is fit on the validation
// rows. Singles train on subset r plus the validation rows. Every model is
// scored on the test rows. Columns: combos in plan order, then singles.
RunMatrix run_protocol(const FeatureFrame& features, const Eigen::VectorXd& y, const SplitIndices& split,
                       const ProtocolPlan& plan, const ProtocolConfig& cfg, std::uint64_t seed);

RunMatrix run_protocol(const Dataset& d, const SplitIndices& split, const ProtocolPlan& plan,
                       const ProtocolConfig& cfg, std::uint64_t seed);

}  // namespace demandsg
