#include <cstdio>
#include <exception>

#include <CLI11.hpp>

#include "commands.hpp"
#include "eyessl/errors.hpp"

using namespace eyessl;
using namespace eyessl::cli;

namespace {

void add_config_flags(CLI::App* cmd, ConfigFlags& f) {
  cmd->add_option("--config", f.config_path, "Config file (key: value lines)")->check(CLI::ExistingFile);
  cmd->add_option("--set", f.overrides, "Override a config entry, key=value (repeatable)");
  cmd->add_option("--method", f.method, "SL, SSL_D or SSL_SS");
  cmd->add_option("--k", f.k, "Number of labeled frames");
  cmd->add_option("--seed", f.seed, "Seed for data, split, init and sampling");
  cmd->add_option("--data-root", f.data_root, "Dataset root with train/ and validation/");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semi-supervised eye segmentation"};
  app.require_subcommand(1);

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Train one run and write its run directory");
  add_config_flags(train_cmd, train.config);
  train_cmd->add_option("--out", train.out, "Output root (default $EYESSL_OUT or ./runs)");
  train_cmd->add_option("--max-steps", train.max_steps, "Cap on steps per epoch");
  train_cmd->add_flag("--quiet", train.quiet, "Only warnings on stderr");

  EvaluateArgs eval;
  auto* eval_cmd = app.add_subcommand("evaluate", "Validation IoU of a run's checkpoint");
  eval_cmd->add_option("run", eval.run_dir, "Run directory")->required();
  eval_cmd->add_option("--checkpoint", eval.checkpoint, "Checkpoint (default <run>/checkpoint.bin)");
  eval_cmd->add_option("--data-root", eval.data_root, "Evaluate on this dataset root instead");
  eval_cmd->add_flag("--per-image", eval.per_image, "Average IoU per image instead of globally");

  PredictArgs predict;
  auto* predict_cmd = app.add_subcommand("predict", "Write class masks and overlays for images");
  predict_cmd->add_option("--checkpoint", predict.checkpoint, "Checkpoint file")->required();
  predict_cmd->add_option("inputs", predict.inputs, "PNG files or directories")->required();
  predict_cmd->add_option("--out", predict.out, "Output directory (default ./predictions)");

  GenerateArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-synthetic", "Write a synthetic dataset root");
  gen_cmd->add_option("--out", gen.out, "Dataset root to create")->required();
  gen_cmd->add_option("--train", gen.train, "Training frames");
  gen_cmd->add_option("--subjects", gen.subjects, "Training subjects");
  gen_cmd->add_option("--validation", gen.validation, "Validation frames (0 for none)");
  gen_cmd->add_option("--validation-subjects", gen.validation_subjects, "Validation subjects");
  gen_cmd->add_option("--height", gen.height, "Frame height");
  gen_cmd->add_option("--width", gen.width, "Frame width");
  gen_cmd->add_option("--seed", gen.seed, "Generator seed");

  ReportArgs report;
  auto* report_cmd = app.add_subcommand("report", "Method x k comparison over run histories");
  report_cmd->add_option("runs", report.runs, "Run directories or history.jsonl files")->required();
  report_cmd->add_option("--out", report.out, "Also write report.txt, report.csv, plot.csv here");
  report_cmd->add_option("--format", report.format, "table, csv or plot");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*train_cmd) return cmd_train(train);
    if (*eval_cmd) return cmd_evaluate(eval);
    if (*predict_cmd) return cmd_predict(predict);
    if (*gen_cmd) return cmd_gen_synthetic(gen);
    if (*report_cmd) return cmd_report(report);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const UsageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  }
  return kExitUsage;
}
