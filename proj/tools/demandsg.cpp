#include <iostream>

#include "CLI11.hpp"
#include "demandsg/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Demand forecasting with stacked generalization"};
  app.require_subcommand(1);

  demandsg::CommonOptions common;
  std::string config, out;
  std::uint64_t seed = 0;
  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config, "experiment config (JSON, comments allowed)")->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "master seed, overrides the config");
    sub->add_option("--out", out, "output directory");
    sub->add_flag("--quiet", common.quiet, "suppress progress output");
  };

  auto* synth = app.add_subcommand("synth", "generate a synthetic demand dataset");
  add_common(synth);
  auto* preprocess = app.add_subcommand("preprocess", "clean, aggregate and filter a dataset");
  add_common(preprocess);
  auto* run = app.add_subcommand("run", "run the repeated evaluation and write report tables");
  add_common(run);

  std::string model, input, output;
  auto* predict = app.add_subcommand("predict", "predict demand with a saved model");
  predict->add_option("--model", model, "model JSON")->required()->check(CLI::ExistingFile);
  predict->add_option("--input", input, "feature CSV")->required();
  predict->add_option("--out", output, "prediction CSV (default: stdout)");

  CLI11_PARSE(app, argc, argv);

  const auto finish_common = [&](CLI::App* sub) {
    if (!config.empty()) common.config = config;
    if (sub->count("--seed")) common.seed = seed;
    if (!out.empty()) common.out = out;
  };
  if (*synth) {
    finish_common(synth);
    return demandsg::cmd_synth(common, std::cout, std::cerr);
  }
  if (*preprocess) {
    finish_common(preprocess);
    return demandsg::cmd_preprocess(common, std::cout, std::cerr);
  }
  if (*run) {
    finish_common(run);
    return demandsg::cmd_run(common, std::cout, std::cerr);
  }
  std::optional<std::filesystem::path> out_path;
  if (!output.empty()) out_path = output;
  return demandsg::cmd_predict(model, input, out_path, std::cout, std::cerr);
}
