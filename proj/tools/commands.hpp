#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "eyessl/config.hpp"
#include "eyessl/errors.hpp"

namespace eyessl::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

// Bad flags or an invalid resolved config; exits with kExitUsage.
class UsageError : public Error {
 public:
  using Error::Error;
};

// Flags shared by the commands that resolve a TrainConfig. Applied in order:
// config file, --set entries, then the dedicated flags.
struct ConfigFlags {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::string> method;
  std::optional<int> k;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> data_root;
};

TrainConfig resolve_config(const ConfigFlags& flags);

/// --out when given, else $EYESSL_OUT, else ./runs.
std::filesystem::path output_root(const std::string& out_flag);

/// "<hash of the config without its seed>-seed<seed>", so seeds of one
/// configuration sit side by side.
std::string run_dir_name(const TrainConfig& cfg);

struct TrainArgs {
  ConfigFlags config;
  std::string out;
  std::optional<int> max_steps;
  bool quiet = false;
};

struct EvaluateArgs {
  std::string run_dir;
  std::string checkpoint;  // defaults to <run_dir>/checkpoint.bin
  std::optional<std::string> data_root;
  bool per_image = false;
};

struct PredictArgs {
  std::string checkpoint;
  std::vector<std::string> inputs;
  std::string out;
};

struct GenerateArgs {
  int train = 120;
  int subjects = 10;
  int validation = 24;
  int validation_subjects = 2;
  int height = 240;
  int width = 320;
  std::uint64_t seed = 0;
  std::string out;
};

struct ReportArgs {
  std::vector<std::string> runs;
  std::string out;
  std::string format = "table";
};

int cmd_train(const TrainArgs& args);
int cmd_evaluate(const EvaluateArgs& args);
int cmd_predict(const PredictArgs& args);
int cmd_gen_synthetic(const GenerateArgs& args);
int cmd_report(const ReportArgs& args);

}  // namespace eyessl::cli
