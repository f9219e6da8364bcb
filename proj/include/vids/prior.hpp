#pragma once

// Covariate-conditioned energy prior over head parameters:
//
//   E(theta; x_1:N, x*) = integral over y of
//       sum_i log p(y | x_i, theta) + log p(y | x*, theta)
//
// and p(theta | x_1:N, x*) proportional to exp(E). For binary outcomes the
// integral is an exact sum over y in {0, 1}; for continuous outcomes it is a
// plain Monte Carlo estimate with r uniform draws on [y_min, y_max], scaled
// by the range volume. The normalizer does not depend on theta, so only the
// unnormalized log density is exposed.

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "vids/model.hpp"
#include "vids/rng.hpp"

namespace vids {

struct PriorConfig {
  double y_min = -3.0;
  double y_max = 3.0;
  std::size_t r = 64;
  Task task = Task::regression;

  // Throws ConfigError.
  void validate() const;
  double volume() const { return y_max - y_min; }
};

// Integration range [min(y) - 3, max(y) + 3].
PriorConfig default_prior_config(const Dataset& train, std::size_t r = 64);

// r uniform draws on [y_min, y_max]; empty for classification.
std::vector<double> draw_prior_targets(const PriorConfig& cfg, Rng& rng);

// Contribution of one point with head output f, and its derivative in f.
// draws must come from draw_prior_targets for regression.
struct PointEnergy {
  Task task = Task::regression;
  std::span<const double> draws;
  double volume = 0.0;
  double draw_mean = 0.0;

  static PointEnergy make(const PriorConfig& cfg, std::span<const double> draws);
  double value(double f) const;
  double grad(double f) const;
};

// Energy for N training embeddings (rows) plus one test embedding.
double energy(std::span<const double> theta, const Matrix& train_embeds,
              std::span<const double> test_embed, const PriorConfig& cfg, Rng& rng);
double energy_with_draws(std::span<const double> theta, const Matrix& train_embeds,
                         std::span<const double> test_embed, const PriorConfig& cfg,
                         std::span<const double> draws);

// Same, with any number of test embeddings (possibly none).
double energy_multi(std::span<const double> theta, const Matrix& train_embeds,
                    const Matrix& test_embeds, const PriorConfig& cfg,
                    std::span<const double> draws);

// Unnormalized log prior; equal to energy().
double log_prior_unnorm(std::span<const double> theta, const Matrix& train_embeds,
                        std::span<const double> test_embed, const PriorConfig& cfg, Rng& rng);

// Two-feature logistic demonstration. Coefficients are numbered as in
// rho(x) = beta0 + beta1 x1 + beta2 x2.
struct GridAxis {
  std::size_t coef = 0;
  double lo = -5.0;
  double hi = 5.0;
  std::size_t count = 41;

  double at(std::size_t i) const;
};

struct PriorGridSpec {
  GridAxis a{0, -5.0, 5.0, 41};
  GridAxis b{2, -5.0, 5.0, 41};
  std::size_t fixed_coef = 1;
  double fixed_value = 1.0;

  void validate() const;
};

// theta in head layout (w1, w2, bias) from (beta0, beta1, beta2).
std::vector<double> logistic_theta(double beta0, double beta1, double beta2);

// Energies at every node, a.count rows by b.count columns. test_x may have
// zero rows.
Matrix prior_grid(const Matrix& train_x, const Matrix& test_x, const PriorGridSpec& spec);

// CSV with header beta_a,beta_b,energy, rows in row-major grid order.
void write_prior_grid_csv(std::ostream& os, const PriorGridSpec& spec, const Matrix& grid);

// Largest |E(b0, b1, b2) - E(b0 + d, b1, b2 - d / c)| over base points
// (b0, b1, b2) and shifts d. With every training x2 equal to c and no test
// rows the two arguments give the same head outputs.
double exchangeability_gap(const Matrix& train_x, const Matrix& test_x, double c,
                           std::span<const std::array<double, 3>> bases, std::span<const double> shifts);

struct PriorExample {
  Matrix train_x;
  Matrix test_x;
};

// x1 ~ N(1, 1) everywhere; x2 = 1/2 in training, x2 ~ N(1/2, test_x2_sd^2)
// at test time.
PriorExample prior_example_covariates(std::size_t n_train, std::size_t n_test, double test_x2_sd,
                                      std::uint64_t seed);

}  // namespace vids
