// Flat key=value run configuration ('#' comments). Parsing is strict:
// unknown keys, bad ranges, and missing required keys are errors that name
// the key and line. serialize_config emits a canonical form that parses
// back to an equal RunConfig.
#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "plasticnn/harness.hpp"
#include "plasticnn/policy.hpp"
#include "plasticnn/tasks.hpp"

namespace plasticnn {

struct RunConfig {
  std::vector<int> widths;
  std::vector<Activation> activations;
  Loss loss = Loss::MeanSquaredError;
  double learning_rate = 0.1;
  int epochs_per_round = 50;
  int max_rounds = 20;
  std::vector<std::uint64_t> seeds{1};
  std::vector<ArmConfig> arms;
  PlasticityPolicy policy;
  std::vector<TaskSpec> tasks;
  std::string out_dir = "results";
  int checkpoint_interval = 0;  // rounds between checkpoints; 0 = final only
  std::string train_csv;
  std::string val_csv;

  bool operator==(const RunConfig&) const = default;
};

RunConfig parse_config(const std::filesystem::path& path);

/// Same parser over an in-memory document; `origin` names it in errors.
RunConfig parse_config_text(const std::string& text, const std::string& origin);

std::string serialize_config(const RunConfig& config);

}  // namespace plasticnn
