#include <fstream>
#include <ostream>
#include <sstream>

#include "demandsg/cli.hpp"
#include "demandsg/csv.hpp"
#include "demandsg/model_io.hpp"

namespace demandsg {

namespace fs = std::filesystem;

namespace {

constexpr int kExitError = 1;
constexpr int kExitUsage = 2;

ExperimentConfig resolve_config(const CommonOptions& opts) {
  ExperimentConfig cfg = opts.config ? load_config(*opts.config) : parse_config(Json::object(), fs::current_path());
  if (opts.seed) cfg.seed = *opts.seed;
  cfg.data.synthetic_spec.seed = derive_seed(cfg.seed, "synthetic");
  if (opts.out) cfg.output_dir = *opts.out;
  return cfg;
}

void write_outputs(const fs::path& dir, const std::vector<std::pair<std::string, std::string>>& files) {
  fs::create_directories(dir);
  for (const auto& [name, contents] : files) write_file_atomic(dir / name, contents);
}

template <typename Fn>
int guarded(std::ostream& err, Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitError;
  }
}

}  // namespace

int cmd_synth(const CommonOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto cfg = resolve_config(opts);
    if (!cfg.data.synthetic) throw ConfigError("synth needs data.source = 'synthetic'");
    const auto synth = generate_synthetic(cfg.data.synthetic_spec);
    std::vector<std::pair<std::string, std::string>> files;
    files.emplace_back("synthetic.csv", to_csv(synth.data));
    files.emplace_back("synthetic.schema.json", schema_to_json(synth.data.schema()).dump(2) + "\n");
    std::ostringstream expected;
    write_csv_row(expected, {"expected_demand"});
    for (Eigen::Index i = 0; i < synth.expected_demand.size(); ++i) {
      write_csv_row(expected, {format_double(synth.expected_demand[i])});
    }
    files.emplace_back("expected_demand.csv", expected.str());
    std::size_t sale_rows = 0;
    if (cfg.data.sale_level) {
      const auto sales = expand_to_sales(synth.data);
      sale_rows = sales.rows();
      const auto [purchases, abandons] = synthetic_view_events(synth.data);
      files.emplace_back("sales.csv", to_csv(sales));
      files.emplace_back("sales.schema.json", schema_to_json(sales.schema()).dump(2) + "\n");
      files.emplace_back("purchases.csv", to_csv(purchases));
      files.emplace_back("abandons.csv", to_csv(abandons));
      files.emplace_back("events.schema.json", schema_to_json(purchases.schema()).dump(2) + "\n");
    }
    write_outputs(cfg.output_dir, files);
    if (!opts.quiet) {
      out << "wrote " << synth.data.rows() << " weekly rows";
      if (cfg.data.sale_level) out << " and " << sale_rows << " sale rows";
      out << " to " << cfg.output_dir.string() << "\n";
    }
    return 0;
  });
}

int cmd_preprocess(const CommonOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto cfg = resolve_config(opts);
    PreprocessSummary summary;
    const Dataset d = apply_preprocess(load_data(cfg.data), cfg.preprocess, &summary);
    write_outputs(cfg.output_dir, {{"processed.csv", to_csv(d)},
                                   {"processed.schema.json", schema_to_json(d.schema()).dump(2) + "\n"},
                                   {"preprocess_summary.json", summary.to_json().dump(2) + "\n"}});
    if (!opts.quiet) {
      out << "rows: " << summary.input_rows << " input, " << summary.aggregated_rows << " after aggregation, "
          << summary.output_rows << " after outlier removal\n";
      if (!summary.dropped_columns.empty()) {
        out << "dropped columns:";
        for (const auto& c : summary.dropped_columns) out << " " << c;
        out << "\n";
      }
      out << "wrote " << (cfg.output_dir / "processed.csv").string() << "\n";
    }
    return 0;
  });
}

int cmd_run(const CommonOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    auto cfg = resolve_config(opts);
    cfg.protocol.abort_on_failure = false;
    const Dataset d = apply_preprocess(load_data(cfg.data), cfg.preprocess, nullptr);
    const auto split_idx = split(d.rows(), cfg.split, derive_seed(cfg.seed, "split"));
    const FeatureFrame features = feature_frame(d);
    const Eigen::VectorXd y = d.target();
    const auto layout = build_run_layout(cfg);
    if (!opts.quiet) {
      out << "running " << layout.plan.combos.size() << " stacked combos and " << layout.plan.singles.size()
          << " single learners over " << cfg.protocol.repetitions << " repetitions on " << d.rows() << " rows\n";
    }
    const RunMatrix matrix = run_protocol(features, y, split_idx, layout.plan, cfg.protocol, derive_seed(cfg.seed, "protocol"));
    auto report = build_report(cfg, layout, matrix, split_idx, d.rows());

    int status = 0;
    if (cfg.export_model) {
      try {
        std::vector<LearnerSpec> members;
        for (const auto& label : cfg.export_model->members) {
          for (const auto& l : cfg.learners) {
            if (l.label == label) members.push_back(l);
          }
        }
        const LearnerSpec* combiner = nullptr;
        for (const auto& c : cfg.combiners) {
          if (c.label == cfg.export_model->combiner) combiner = &c;
        }
        const FeatureFrame train = take_rows(features, split_idx.train);
        const FeatureFrame validation = take_rows(features, split_idx.validation);
        Eigen::VectorXd y_train(static_cast<Eigen::Index>(split_idx.train.size()));
        for (std::size_t i = 0; i < split_idx.train.size(); ++i) y_train[static_cast<Eigen::Index>(i)] = y[static_cast<Eigen::Index>(split_idx.train[i])];
        Eigen::VectorXd y_val(static_cast<Eigen::Index>(split_idx.validation.size()));
        for (std::size_t i = 0; i < split_idx.validation.size(); ++i) y_val[static_cast<Eigen::Index>(i)] = y[static_cast<Eigen::Index>(split_idx.validation[i])];
        const auto folds = kfold(split_idx.train.size(), cfg.protocol.folds, derive_seed(cfg.seed, "export-folds"));
        const auto model = train_stacked(train, y_train, validation, y_val, members, *combiner, folds,
                                         derive_seed(cfg.seed, "export"));
        report.files.emplace_back("model.json", model.to_json().dump(1) + "\n");
      } catch (const std::exception& e) {
        err << "error: exporting the stacked model failed: " << e.what() << "\n";
        status = kExitError;
      }
    }
    write_outputs(cfg.output_dir, report.files);
    if (!opts.quiet) {
      std::ifstream txt(cfg.output_dir / "report.txt");
      out << txt.rdbuf();
      out << "reports written to " << cfg.output_dir.string() << "\n";
    }
    for (std::size_t c = 0; c < matrix.columns.size(); ++c) {
      if (matrix.failed(c)) err << "warning: " << matrix.failures[c] << "\n";
    }
    return status;
  });
}

int cmd_predict(const fs::path& model_path, const fs::path& input, const std::optional<fs::path>& output,
                std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto model = load_model(model_path);
    if (!fs::exists(input)) throw DataError("input file '" + input.string() + "' does not exist");
    const FeatureFrame frame = read_feature_csv(input, model->layout());
    const Eigen::VectorXd pred = frame.rows() ? model->predict(frame) : Eigen::VectorXd();
    std::ostringstream csv;
    write_csv_row(csv, {"prediction"});
    for (Eigen::Index i = 0; i < pred.size(); ++i) write_csv_row(csv, {format_double(pred[i])});
    if (output) {
      if (output->has_parent_path()) fs::create_directories(output->parent_path());
      write_file_atomic(*output, csv.str());
    } else {
      out << csv.str();
    }
    return 0;
  });
}

}  // namespace demandsg
