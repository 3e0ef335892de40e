#include "demandsg/protocol.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <optional>

#include "demandsg/parallel.hpp"

namespace demandsg {

std::string combo_name(const LearnerSpec& second, std::span<const std::string> members) {
  std::string name = "SG(" + second.label + "):";
  for (std::size_t i = 0; i < members.size(); ++i) {
    if (i) name += "+";
    name += members[i];
  }
  return name;
}

namespace {

Eigen::VectorXd take(const Eigen::VectorXd& y, std::span<const std::size_t> rows) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) out[static_cast<Eigen::Index>(i)] = y[static_cast<Eigen::Index>(rows[i])];
  return out;
}

void check_plan(const ProtocolPlan& plan) {
  std::map<std::string, int> seen;
  for (const auto& spec : plan.pool) {
    spec.validate();
    if (seen[spec.label]++) throw std::invalid_argument("duplicate pool learner label '" + spec.label + "'");
  }
  std::map<std::string, int> columns;
  for (const auto& c : plan.combos) {
    if (c.members.empty()) throw std::invalid_argument("combo '" + c.name + "' has no members");
    c.second.validate();
    for (const auto& m : c.members) {
      if (!seen.count(m)) throw std::invalid_argument("combo '" + c.name + "' names unknown learner '" + m + "'");
    }
    if (columns[c.name]++) throw std::invalid_argument("duplicate column name '" + c.name + "'");
  }
  for (const auto& s : plan.singles) {
    s.validate();
    if (columns[s.label]++) throw std::invalid_argument("duplicate column name '" + s.label + "'");
  }
  if (columns.empty()) throw std::invalid_argument("protocol plan has no combos or singles");
}

}  // namespace

RunMatrix run_protocol(const FeatureFrame& features, const Eigen::VectorXd& y, const SplitIndices& split,
                       const ProtocolPlan& plan, const ProtocolConfig& cfg, std::uint64_t seed) {
  if (cfg.repetitions < 2) throw std::invalid_argument("run_protocol: repetitions must be >= 2");
  if (static_cast<Eigen::Index>(y.size()) != features.rows()) {
    throw DataError("run_protocol: feature and target row counts differ");
  }
  if (split.validation.empty() || split.test.empty()) throw DataError("run_protocol: empty validation or test split");
  check_plan(plan);

  const auto subsets = subsample_subsets(split.train, cfg.repetitions, derive_seed(seed, "subsets"),
                                         cfg.subset_fraction);
  const FeatureFrame validation = take_rows(features, split.validation);
  const FeatureFrame test = take_rows(features, split.test);
  const Eigen::VectorXd y_validation = take(y, split.validation);
  const Eigen::VectorXd y_test = take(y, split.test);

  RunMatrix matrix;
  for (const auto& c : plan.combos) matrix.columns.push_back(c.name);
  for (const auto& s : plan.singles) matrix.columns.push_back(s.label);
  const auto n_cols = matrix.columns.size();
  matrix.values = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(cfg.repetitions),
                                            static_cast<Eigen::Index>(n_cols),
                                            std::numeric_limits<double>::quiet_NaN());
  std::vector<std::vector<std::string>> errors(cfg.repetitions, std::vector<std::string>(n_cols));

  parallel_for(cfg.repetitions, cfg.threads, [&](std::size_t r) {
    const auto row = static_cast<Eigen::Index>(r);
    const std::uint64_t rep_seed = derive_seed(seed, "repetition", r);
    const auto fail = [&](std::size_t col, const std::string& what) {
      const std::string msg = "'" + matrix.columns[col] + "' failed in repetition " + std::to_string(r) + ": " + what;
      if (cfg.abort_on_failure) throw ProtocolError(msg);
      errors[r][col] = msg;
    };

    const auto& subset = subsets[r];
    const FeatureFrame train = take_rows(features, subset);
    const Eigen::VectorXd y_train = take(y, subset);

    // Pool learners, trained once per repetition.
    std::map<std::string, std::optional<TrainedLearner>> pool;
    std::map<std::string, std::string> pool_errors;
    if (!plan.combos.empty()) {
      const FoldPlan folds = kfold(subset.size(), cfg.folds, derive_seed(rep_seed, "folds"));
      for (const auto& spec : plan.pool) {
        const bool used = std::any_of(plan.combos.begin(), plan.combos.end(), [&](const Combo& c) {
          return std::find(c.members.begin(), c.members.end(), spec.label) != c.members.end();
        });
        if (!used) continue;
        try {
          auto trained = train_first_level(train, y_train, std::span(&spec, 1), folds, rep_seed);
          pool[spec.label] = std::move(trained.front());
        } catch (const std::exception& e) {
          pool_errors[spec.label] = std::string("learner '") + spec.label + "': " + e.what();
        }
      }
    }

    for (std::size_t c = 0; c < plan.combos.size(); ++c) {
      const auto& combo = plan.combos[c];
      std::vector<TrainedLearner> members;
      std::string missing;
      for (const auto& m : combo.members) {
        if (pool_errors.count(m)) {
          missing = pool_errors[m];
          break;
        }
        members.push_back(*pool.at(m));
      }
      if (!missing.empty()) {
        fail(c, missing);
        continue;
      }
      try {
        const auto model = stack_models(std::move(members), validation, y_validation, combo.second,
                                        derive_seed(rep_seed, combo.name));
        matrix.values(row, static_cast<Eigen::Index>(c)) = rmse(model.predict(test), y_test);
      } catch (const ProtocolError&) {
        throw;
      } catch (const std::exception& e) {
        fail(c, e.what());
      }
    }

    if (!plan.singles.empty()) {
      std::vector<std::size_t> combined(subset.begin(), subset.end());
      combined.insert(combined.end(), split.validation.begin(), split.validation.end());
      std::sort(combined.begin(), combined.end());
      const FeatureFrame single_train = take_rows(features, combined);
      const Eigen::VectorXd y_single = take(y, combined);
      const FoldPlan folds = kfold(combined.size(), cfg.folds, derive_seed(rep_seed, "single-folds"));
      for (std::size_t s = 0; s < plan.singles.size(); ++s) {
        const std::size_t col = plan.combos.size() + s;
        try {
          auto trained = train_first_level(single_train, y_single, std::span(&plan.singles[s], 1), folds,
                                           derive_seed(rep_seed, "single"));
          matrix.values(row, static_cast<Eigen::Index>(col)) = rmse(trained.front().model->predict(test), y_test);
        } catch (const std::exception& e) {
          fail(col, e.what());
        }
      }
    }
  });

  matrix.failures.assign(n_cols, {});
  for (std::size_t c = 0; c < n_cols; ++c) {
    for (std::size_t r = 0; r < cfg.repetitions; ++r) {
      if (!errors[r][c].empty()) {
        matrix.failures[c] = errors[r][c];
        break;
      }
    }
  }
  return matrix;
}

RunMatrix run_protocol(const Dataset& d, const SplitIndices& split, const ProtocolPlan& plan,
                       const ProtocolConfig& cfg, std::uint64_t seed) {
  return run_protocol(feature_frame(d), d.target(), split, plan, cfg, seed);
}

}  // namespace demandsg
