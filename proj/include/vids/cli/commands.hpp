#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "vids/config.hpp"

namespace vids::cli {

struct Options {
  std::string config_path;  // empty: built-in defaults
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
};

inline const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{"gen-data", "pretrain", "fit", "predict",
                                              "eval", "envcheck", "prior-grid"};
  return names;
}

// Config file (or defaults) with --seed and --out applied.
ExperimentConfig resolve_config(const Options& opts);

std::string seed_dir(const ExperimentConfig& cfg, std::uint64_t seed);

void cmd_gen_data(const ExperimentConfig& cfg, std::ostream& log);
void cmd_pretrain(const ExperimentConfig& cfg, std::ostream& log);
void cmd_fit(const ExperimentConfig& cfg, std::ostream& log);
void cmd_predict(const ExperimentConfig& cfg, std::ostream& log);
void cmd_eval(const ExperimentConfig& cfg, std::ostream& log);
void cmd_envcheck(const ExperimentConfig& cfg, std::ostream& log);
void cmd_prior_grid(const ExperimentConfig& cfg, std::ostream& log);

// Runs one command. Returns the exit status; failures print a single line
//   error stage=<cmd> kind=<kind> message="<text>"
// to err.
int run_command(const std::string& name, const Options& opts, std::ostream& out, std::ostream& err);

}  // namespace vids::cli
