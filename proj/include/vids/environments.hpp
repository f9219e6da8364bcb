#pragma once

// Synthetic environments (bootstrap train/test resamples of the training
// data), the variance-penalized cross-environment objective, the training
// loop for the inference network, and sample-based predictive uncertainty.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "vids/error.hpp"
#include "vids/model.hpp"
#include "vids/posterior.hpp"
#include "vids/prior.hpp"
#include "vids/rng.hpp"

namespace vids {

// Indices into a source table, drawn with replacement. Test outcomes are
// kept for diagnostics; the objective only reads test covariates.
struct Environment {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;

  bool operator==(const Environment&) const = default;
};

Environment sample_environment(std::size_t source_size, std::size_t n, std::size_t m, Rng& rng);
Environment sample_environment(const Dataset& data, std::size_t n, std::size_t m, Rng& rng);

struct TrainConfig {
  std::size_t environments = 30;  // L
  std::size_t n = 500;            // train part size
  std::size_t m = 20;             // test part size
  double tau = 0.001;             // variance penalty
  double lambda = 0.005;          // KL penalty
  double lr = 0.01;
  std::size_t iterations = 30;    // K
  std::size_t samples = 1000;     // S at prediction time
  std::uint64_t seed = 0;
  bool fixed_envs = false;        // sample environments once instead of per iteration
  bool analytic_entropy = false;
  // Step on the gradient of J divided by the number of likelihood terms,
  // sum over environments of m * n; the trace still reports J.
  bool normalize_gradient = true;
  std::vector<std::size_t> inference_hidden{512, 256, 128, 64, 32, 16};
  double init_log_std = -1.0;

  // Throws ConfigError.
  void validate() const;
};

// Embeddings of every source row, computed once.
struct SourceTable {
  Matrix embeds;
  std::vector<double> y;
  Task task = Task::regression;

  std::size_t size() const { return embeds.rows; }
};

SourceTable make_source_table(const EmbeddingModel& model, const Dataset& data);

// Separate seeds for each randomness source of a training run.
struct FitStreams {
  std::uint64_t init = 0;
  std::uint64_t envs = 0;
  std::uint64_t eps = 0;
  std::uint64_t prior = 0;

  static FitStreams from_master(std::uint64_t seed);
};

// ELBO summed over the environment's test covariates, conditioning on its
// train part. Noise comes from rngs, test point by test point.
double env_loss(const InferenceNet& net, const Environment& env, const SourceTable& src,
                const PriorConfig& prior, const ElboOptions& opts, ElboRngs& rngs);

// sum(losses) + tau * population variance(losses).
double cross_env_objective(std::span<const double> losses, double tau);
double cross_env_variance(std::span<const double> losses);
// d objective / d loss_l.
std::vector<double> cross_env_weights(std::span<const double> losses, double tau);

struct TraceRow {
  std::size_t iter = 0;
  double objective = 0.0;
  double var_penalty = 0.0;
  double env_loss_min = 0.0;
  double env_loss_max = 0.0;

  bool operator==(const TraceRow&) const = default;
};

struct FitResult {
  InferenceNet net;
  std::vector<TraceRow> trace;
};

class FitDivergence : public DivergenceError {
 public:
  FitDivergence(const std::string& what, std::vector<TraceRow> trace)
      : DivergenceError(what), trace_(std::move(trace)) {}
  const std::vector<TraceRow>& trace() const { return trace_; }

 private:
  std::vector<TraceRow> trace_;
};

// Environments for one iteration; may draw from env_rng.
using EnvironmentProvider = std::function<std::vector<Environment>(std::size_t iter, Rng& env_rng)>;

// Runs cfg.iterations gradient-ascent steps from `initial`. Iteration k
// evaluates every environment with noise from streams keyed by (k, l).
FitResult fit_with_provider(InferenceNet initial, const SourceTable& src, const PriorConfig& prior,
                            const TrainConfig& cfg, const FitStreams& streams,
                            const EnvironmentProvider& provider);

// Synthetic-environment training: L environments of sizes (n, m) per
// iteration, resampled every iteration unless cfg.fixed_envs.
FitResult fit(const Dataset& data, const EmbeddingModel& embedding, const HeadParams& init_head,
              const TrainConfig& cfg, const PriorConfig& prior);
FitResult fit(const Dataset& data, const EmbeddingModel& embedding, const HeadParams& init_head,
              const TrainConfig& cfg, const PriorConfig& prior, const FitStreams& streams);

// Single-environment mode with externally supplied test covariates: the
// whole training set conditions, every test covariate is a test point,
// L = 1 and tau = 0.
FitResult fit_transductive(const Dataset& data, const Matrix& test_x, const EmbeddingModel& embedding,
                           const HeadParams& init_head, const TrainConfig& cfg,
                           const PriorConfig& prior, const FitStreams& streams);

InferenceNet initial_inference_net(const EmbeddingModel& embedding, const HeadParams& init_head,
                                   const TrainConfig& cfg, const FitStreams& streams);

struct PredictiveSummary {
  std::vector<double> mean;
  std::vector<double> std;  // population std over the S draws; 0 when S = 1
  Matrix samples;           // x*-rows by S, only when requested
};

// Regression: head outputs. Classification: sigmoid probabilities.
PredictiveSummary predict(const InferenceNet& net, const EmbeddingModel& embedding, const Dataset& train,
                          const Matrix& x_star, std::size_t samples, Rng& rng,
                          bool keep_samples = false);

}  // namespace vids
