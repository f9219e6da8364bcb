#pragma once

// Amortized diagonal-Gaussian posterior over head parameters. An inference
// network h maps (aggregated training embedding || test embedding) to
// phi = (mu, log_std); theta is drawn by reparametrization and the
// single-sample ELBO
//
//   sum_i log p(y_i | x_i, theta) - lambda * (log q(theta; phi) - E(theta))
//
// is differentiated exactly with respect to the network parameters. E is the
// unnormalized log prior, so the ELBO is known up to an additive constant.

#include <cstddef>
#include <span>
#include <vector>

#include "vids/model.hpp"
#include "vids/nn.hpp"
#include "vids/prior.hpp"
#include "vids/rng.hpp"

namespace vids {

inline constexpr double kLogStdMin = -6.0;
inline constexpr double kLogStdMax = 3.0;

struct VariationalParams {
  std::vector<double> mu;
  std::vector<double> log_std;

  std::size_t dim() const { return mu.size(); }
  std::vector<double> stddev() const;
};

struct InferenceNet {
  DenseNet h;

  std::size_t embed_width() const { return h.input_width() / 2; }
  std::size_t theta_dim() const { return h.output_width() / 2; }
};

// Relu hidden layers, identity output of width 2(k+1). The output layer
// starts with zero weights and bias (init_head, init_log_std, ...), so the
// initial mu equals init_head for every input.
InferenceNet make_inference_net(std::size_t embed_width, std::span<const std::size_t> hidden,
                                const HeadParams& init_head, Rng& rng, double init_log_std = -1.0);

std::vector<double> inference_input(std::span<const double> train_summary,
                                    std::span<const double> test_embed);

// Splits a raw network output into (mu, log_std) and clamps log_std to
// [kLogStdMin, kLogStdMax].
VariationalParams phi_from_output(std::span<const double> raw);

// Throws DimensionError if widths do not match the network.
VariationalParams infer_phi(const InferenceNet& net, std::span<const double> train_summary,
                            std::span<const double> test_embed);

// theta_i = mu_i + exp(log_std_i) * eps_i
std::vector<double> sample_theta(const VariationalParams& phi, std::span<const double> eps);

double log_q(std::span<const double> theta, const VariationalParams& phi);

struct ElboOptions {
  double lambda = 0.005;
  // Replace the sampled log q by minus the closed-form Gaussian entropy.
  bool analytic_entropy = false;
};

// Rows the likelihood and the prior condition on, gathered contiguously.
struct ConditioningSet {
  Matrix design;                    // rows (g(x_i), 1), repeats allowed
  std::vector<double> y;
  std::vector<double> summary;      // aggregated embedding of the rows
  Task task = Task::regression;

  std::size_t size() const { return design.rows; }
};

// rows empty means every row of embeds.
ConditioningSet make_conditioning_set(const Matrix& embeds, std::span<const double> y, Task task,
                                      std::span<const std::size_t> rows = {});

// Reparametrization noise and prior Monte Carlo draws for one test point.
struct NoiseSample {
  std::vector<double> eps;
  std::vector<double> prior_draws;
};

// eps from eps_rng, prior draws from prior_rng (independent streams).
NoiseSample draw_noise(std::size_t theta_dim, const PriorConfig& prior, Rng& eps_rng, Rng& prior_rng);

struct ElboRngs {
  Rng eps;
  Rng prior;
};

// ELBO term for one test point given the raw network output. If d_raw is
// non-empty it receives d(ELBO)/d(raw) (zero where log_std is clamped).
double elbo_from_output(std::span<const double> raw, const ConditioningSet& cond,
                        std::span<const double> test_embed, const PriorConfig& prior,
                        const ElboOptions& opts, const NoiseSample& noise,
                        std::span<double> d_raw = {});

// One draw of eps (and prior targets) from rngs, then elbo_from_output.
double elbo_single(const InferenceNet& net, const ConditioningSet& cond,
                   std::span<const double> test_embed, const PriorConfig& prior,
                   const ElboOptions& opts, ElboRngs& rngs);

// Sum over test embeddings (rows), one noise sample per row.
double elbo_sum(const InferenceNet& net, const ConditioningSet& cond, const Matrix& test_embeds,
                const PriorConfig& prior, const ElboOptions& opts,
                std::span<const NoiseSample> noise);
double elbo_sum(const InferenceNet& net, const ConditioningSet& cond, const Matrix& test_embeds,
                const PriorConfig& prior, const ElboOptions& opts, ElboRngs& rngs);

// Value and exact gradient with respect to the network parameters.
GradResult elbo_sum_grad(const InferenceNet& net, const ConditioningSet& cond,
                         const Matrix& test_embeds, const PriorConfig& prior,
                         const ElboOptions& opts, std::span<const NoiseSample> noise);

// Output objective for the batch of inference inputs built from
// (cond.summary || test_embeds row j); used by the gradient and its checks.
OutputObjective elbo_sum_objective(const ConditioningSet& cond, const Matrix& test_embeds,
                                   const PriorConfig& prior, const ElboOptions& opts,
                                   std::span<const NoiseSample> noise);
Matrix inference_batch(std::span<const double> summary, const Matrix& test_embeds);

}  // namespace vids
