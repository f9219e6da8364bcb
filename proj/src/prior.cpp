#include "vids/prior.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <string>

#include "vids/csv.hpp"
#include "vids/error.hpp"
#include "vids/kernels.hpp"

namespace vids {

namespace {
constexpr double kHalfLog2Pi = 0.91893853320467274178;
}

void PriorConfig::validate() const {
  if (task == Task::regression) {
    if (r == 0) throw ConfigError("prior: r must be at least 1 for regression");
    if (!(y_min < y_max)) throw ConfigError("prior: y_min must be below y_max");
  }
}

PriorConfig default_prior_config(const Dataset& train, std::size_t r) {
  train.validate();
  PriorConfig cfg;
  cfg.task = train.task;
  cfg.r = r;
  const auto [lo, hi] = std::minmax_element(train.y.begin(), train.y.end());
  cfg.y_min = *lo - 3.0;
  cfg.y_max = *hi + 3.0;
  return cfg;
}

std::vector<double> draw_prior_targets(const PriorConfig& cfg, Rng& rng) {
  cfg.validate();
  if (cfg.task == Task::classification) return {};
  std::vector<double> draws(cfg.r);
  for (double& v : draws) v = rng.uniform(cfg.y_min, cfg.y_max);
  return draws;
}

PointEnergy PointEnergy::make(const PriorConfig& cfg, std::span<const double> draws) {
  cfg.validate();
  PointEnergy pe;
  pe.task = cfg.task;
  pe.draws = draws;
  pe.volume = cfg.volume();
  if (cfg.task == Task::regression) {
    if (draws.empty()) throw ConfigError("prior: regression energy needs Monte Carlo draws");
    pe.draw_mean = kernels::sum(draws) / static_cast<double>(draws.size());
  }
  return pe;
}

double PointEnergy::value(double f) const {
  if (task == Task::classification) {
    // log s(f) + log(1 - s(f))
    return -softplus(-f) - softplus(f);
  }
  const double r = static_cast<double>(draws.size());
  return volume * (-kHalfLog2Pi - 0.5 * kernels::sum_sq_diff(draws, f) / r);
}

double PointEnergy::grad(double f) const {
  if (task == Task::classification) return stable_sigmoid(-f) - stable_sigmoid(f);
  return volume * (draw_mean - f);
}

double energy_multi(std::span<const double> theta, const Matrix& train_embeds,
                    const Matrix& test_embeds, const PriorConfig& cfg,
                    std::span<const double> draws) {
  if (train_embeds.rows == 0) throw InputError("prior: no training embeddings");
  if (test_embeds.rows > 0 && test_embeds.cols != train_embeds.cols)
    throw DimensionError("prior: train and test embeddings differ in width");
  const PointEnergy pe = PointEnergy::make(cfg, draws);
  double total = 0.0;
  for (std::size_t i = 0; i < train_embeds.rows; ++i)
    total += pe.value(head_output(theta, train_embeds.row(i)));
  for (std::size_t j = 0; j < test_embeds.rows; ++j)
    total += pe.value(head_output(theta, test_embeds.row(j)));
  return total;
}

double energy_with_draws(std::span<const double> theta, const Matrix& train_embeds,
                         std::span<const double> test_embed, const PriorConfig& cfg,
                         std::span<const double> draws) {
  Matrix test(1, test_embed.size());
  std::copy(test_embed.begin(), test_embed.end(), test.data.begin());
  return energy_multi(theta, train_embeds, test, cfg, draws);
}

double energy(std::span<const double> theta, const Matrix& train_embeds,
              std::span<const double> test_embed, const PriorConfig& cfg, Rng& rng) {
  const std::vector<double> draws = draw_prior_targets(cfg, rng);
  return energy_with_draws(theta, train_embeds, test_embed, cfg, draws);
}

double log_prior_unnorm(std::span<const double> theta, const Matrix& train_embeds,
                        std::span<const double> test_embed, const PriorConfig& cfg, Rng& rng) {
  return energy(theta, train_embeds, test_embed, cfg, rng);
}

double GridAxis::at(std::size_t i) const {
  if (count <= 1) return lo;
  return lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
}

void PriorGridSpec::validate() const {
  if (a.coef > 2 || b.coef > 2 || fixed_coef > 2)
    throw ConfigError("prior grid: coefficients are numbered 0..2");
  if (a.coef == b.coef || a.coef == fixed_coef || b.coef == fixed_coef)
    throw ConfigError("prior grid: the two axes and the fixed coefficient must be distinct");
  if (a.count == 0 || b.count == 0) throw ConfigError("prior grid: axes need at least one node");
}

std::vector<double> logistic_theta(double beta0, double beta1, double beta2) {
  return {beta1, beta2, beta0};
}

Matrix prior_grid(const Matrix& train_x, const Matrix& test_x, const PriorGridSpec& spec) {
  spec.validate();
  if (train_x.cols != 2) throw DimensionError("prior grid: covariates must have two features");
  PriorConfig cfg;
  cfg.task = Task::classification;
  Matrix grid(spec.a.count, spec.b.count);
  double beta[3];
  for (std::size_t i = 0; i < spec.a.count; ++i) {
    for (std::size_t j = 0; j < spec.b.count; ++j) {
      beta[spec.fixed_coef] = spec.fixed_value;
      beta[spec.a.coef] = spec.a.at(i);
      beta[spec.b.coef] = spec.b.at(j);
      const std::vector<double> theta = logistic_theta(beta[0], beta[1], beta[2]);
      grid(i, j) = energy_multi(theta, train_x, test_x, cfg, {});
    }
  }
  return grid;
}

void write_prior_grid_csv(std::ostream& os, const PriorGridSpec& spec, const Matrix& grid) {
  os << "beta_a,beta_b,energy\n";
  for (std::size_t i = 0; i < grid.rows; ++i)
    for (std::size_t j = 0; j < grid.cols; ++j)
      os << format_double(spec.a.at(i)) << ',' << format_double(spec.b.at(j)) << ','
         << format_double(grid(i, j)) << '\n';
}

double exchangeability_gap(const Matrix& train_x, const Matrix& test_x, double c,
                           std::span<const std::array<double, 3>> bases, std::span<const double> shifts) {
  if (c == 0.0) throw DomainError("exchangeability: c must be nonzero");
  PriorConfig cfg;
  cfg.task = Task::classification;
  double worst = 0.0;
  for (const auto& b : bases) {
    const double e0 = energy_multi(logistic_theta(b[0], b[1], b[2]), train_x, test_x, cfg, {});
    for (double d : shifts) {
      const double e1 = energy_multi(logistic_theta(b[0] + d, b[1], b[2] - d / c), train_x, test_x, cfg, {});
      worst = std::max(worst, std::abs(e1 - e0));
    }
  }
  return worst;
}

PriorExample prior_example_covariates(std::size_t n_train, std::size_t n_test, double test_x2_sd,
                                      std::uint64_t seed) {
  Rng rng(seed);
  PriorExample ex{Matrix(n_train, 2), Matrix(n_test, 2)};
  for (std::size_t i = 0; i < n_train; ++i) {
    ex.train_x(i, 0) = rng.normal(1.0, 1.0);
    ex.train_x(i, 1) = 0.5;
  }
  for (std::size_t j = 0; j < n_test; ++j) {
    ex.test_x(j, 0) = rng.normal(1.0, 1.0);
    ex.test_x(j, 1) = rng.normal(0.5, test_x2_sd);
  }
  return ex;
}

}  // namespace vids
