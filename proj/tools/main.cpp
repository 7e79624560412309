#include <iostream>

#include <CLI11.hpp>

#include "commands.hpp"
#include "ldmm/errors.hpp"

namespace {

enum ExitCode { kOk = 0, kConfig = 2, kData = 3, kNumerical = 4 };

void add_common(CLI::App* cmd, ldmm::app::CommonOptions& common) {
  cmd->add_option("--config", common.config, "JSON run configuration")->required();
  cmd->add_option("--seed", common.seed, "Overrides the configured seed");
  cmd->add_option("--threads", common.threads, "Worker threads (0 = OpenMP default)");
  cmd->add_option("--out", common.out, "Output directory (default: config output_dir)");
}

void add_artifacts(CLI::App* cmd, ldmm::app::ArtifactOptions& a) {
  cmd->add_option("--model", a.model, "Model file (default: <out>/model.json)");
  cmd->add_option("--draws", a.draws, "Posterior draws (default: <out>/draws.jsonl)");
  cmd->add_option("--input", a.input, "Claims CSV (default: data.test or <out>/test.csv)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Joint clustering of claim amounts and claim descriptions"};
  app.require_subcommand(1);

  ldmm::app::CommonOptions common;
  ldmm::app::ArtifactOptions artifacts;
  bool em_only = false;
  std::filesystem::path split_input;

  auto* simulate = app.add_subcommand("simulate", "Simulate a claims CSV from configured true parameters");
  add_common(simulate, common);

  auto* fit = app.add_subcommand("fit", "Fit the model (EM, then the Gibbs sampler)");
  add_common(fit, common);
  fit->add_flag("--em-only", em_only, "Stop after the EM fit; no draws are written");

  auto* predict = app.add_subcommand("predict", "Per-claim predictive mean, VaR and CTE");
  add_common(predict, common);
  add_artifacts(predict, artifacts);

  auto* evaluate = app.add_subcommand("evaluate", "Model-selection metrics");
  add_common(evaluate, common);
  add_artifacts(evaluate, artifacts);
  evaluate->add_option("--corpus", artifacts.corpus, "Training corpus snapshot (default: <out>/corpus.json)");

  auto* split = app.add_subcommand("split", "Loss-stratified train/test split of a claims CSV");
  add_common(split, common);
  split->add_option("--input", split_input, "Claims CSV (default: data.train)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (*simulate) ldmm::app::cmd_simulate(common);
    if (*fit) ldmm::app::cmd_fit(common, em_only);
    if (*predict) ldmm::app::cmd_predict(common, artifacts);
    if (*evaluate) ldmm::app::cmd_evaluate(common, artifacts);
    if (*split) ldmm::app::cmd_split(common, split_input);
  } catch (const ldmm::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const ldmm::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const ldmm::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumerical;
  }
  return kOk;
}
