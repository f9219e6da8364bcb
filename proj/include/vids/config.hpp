#pragma once

// Experiment configuration: a flat INI file with one section per block.
// Unknown sections and keys are rejected. Defaults are the heteroscedastic
// regression settings.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "vids/data.hpp"
#include "vids/env_theory.hpp"
#include "vids/environments.hpp"
#include "vids/model.hpp"
#include "vids/prior.hpp"

namespace vids {

enum class TaskKind { hetero, logistic_gap, csv };

std::string_view task_kind_name(TaskKind k);
TaskKind parse_task_kind(std::string_view name);

enum class FitMode { environments, transductive };

std::string_view fit_mode_name(FitMode m);
FitMode parse_fit_mode(std::string_view name);

struct TaskBlock {
  TaskKind kind = TaskKind::hetero;
  std::size_t n_train = 500;
  std::size_t n_test = 500;
  double a = 0.5;
  double b = 1.0;
  double beta = 1.0;
  NoiseScale noise_scale = NoiseScale::stddev;
  double t = 0.3;
  std::string csv_path;
  std::string target;
  Task csv_task = Task::regression;
  bool standardize = true;
  SplitSpec split;  // seed comes from the run seed
};

struct ModelBlock {
  std::vector<std::size_t> hidden{8};  // embedding net; the last width is k
  Activation activation = Activation::relu;
  std::size_t pretrain_epochs = 2000;
  double pretrain_lr = 0.05;
};

struct PriorBlock {
  std::size_t r = 64;
  double margin = 3.0;                // auto range: [min y - margin, max y + margin]
  std::optional<double> y_min;        // both set: explicit range
  std::optional<double> y_max;
};

struct MetricsBlock {
  std::size_t ace_bins = 10;
  double gap_lo = 0.3;        // classification spread: (gap_lo, gap_hi) vs the rest
  double gap_hi = 0.7;
  double extrap_from = 0.5;   // regression spread: x* > extrap_from
};

struct PriorGridBlock {
  PriorGridSpec spec;
  std::size_t n_train = 50;
  std::size_t n_test = 50;
  double test_x2_sd = 1.0;
};

struct EnvCheckBlock {
  std::vector<double> p{0.5, 0.5};
  std::vector<double> p_star{0.5, 0.5};
  double eps = 0.5;
  double alpha = 0.05;
  std::size_t trials = 10000;
};

struct ExperimentConfig {
  TaskBlock task;
  ModelBlock model;
  TrainConfig train;
  FitMode mode = FitMode::environments;
  PriorBlock prior;
  MetricsBlock metrics;
  PriorGridBlock prior_grid;
  EnvCheckBlock envcheck;
  std::string out = "runs";
  std::vector<std::uint64_t> seeds{0};

  // Throws ConfigError.
  void validate() const;
};

// Throws ConfigError (unknown key, bad value) or IoError.
ExperimentConfig parse_config(std::istream& is);
ExperimentConfig load_config(const std::string& path);

// Every field in a fixed order; identical configs give identical text.
std::string canonical_config(const ExperimentConfig& cfg);
// SHA-256 of the canonical text with run.out and run.seeds blanked.
std::string config_hash(const ExperimentConfig& cfg);

PretrainConfig pretrain_config(const ExperimentConfig& cfg, std::uint64_t seed);
PriorConfig prior_config(const ExperimentConfig& cfg, const Dataset& train);

}  // namespace vids
