#include "vids/posterior.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "vids/error.hpp"
#include "vids/kernels.hpp"

namespace vids {

namespace {
constexpr double kHalfLog2Pi = 0.91893853320467274178;
constexpr double kHalfLog2PiE = 1.41893853320467274178;  // 0.5 * ln(2 pi e)
}  // namespace

std::vector<double> VariationalParams::stddev() const {
  std::vector<double> s(log_std.size());
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = std::exp(log_std[i]);
  return s;
}

InferenceNet make_inference_net(std::size_t embed_width, std::span<const std::size_t> hidden,
                                const HeadParams& init_head, Rng& rng, double init_log_std) {
  if (init_head.values.size() != embed_width + 1)
    throw DimensionError("inference net: initial head has " + std::to_string(init_head.values.size()) +
                         " parameters, expected " + std::to_string(embed_width + 1));
  const std::size_t d = embed_width + 1;
  std::vector<std::size_t> widths{2 * embed_width};
  std::vector<Activation> acts;
  for (std::size_t w : hidden) {
    widths.push_back(w);
    acts.push_back(Activation::relu);
  }
  widths.push_back(2 * d);
  acts.push_back(Activation::identity);

  DenseNet h = DenseNet::random(widths, acts, rng);
  Layer& out = h.layers().back();
  std::fill(out.weights.begin(), out.weights.end(), 0.0);
  for (std::size_t i = 0; i < d; ++i) {
    out.bias[i] = init_head.values[i];
    out.bias[d + i] = init_log_std;
  }
  return InferenceNet{std::move(h)};
}

std::vector<double> inference_input(std::span<const double> train_summary,
                                    std::span<const double> test_embed) {
  std::vector<double> in(train_summary.begin(), train_summary.end());
  in.insert(in.end(), test_embed.begin(), test_embed.end());
  return in;
}

VariationalParams phi_from_output(std::span<const double> raw) {
  if (raw.size() % 2 != 0) throw DimensionError("variational output width must be even");
  const std::size_t d = raw.size() / 2;
  VariationalParams phi;
  phi.mu.assign(raw.begin(), raw.begin() + static_cast<std::ptrdiff_t>(d));
  phi.log_std.resize(d);
  for (std::size_t i = 0; i < d; ++i) phi.log_std[i] = std::clamp(raw[d + i], kLogStdMin, kLogStdMax);
  return phi;
}

VariationalParams infer_phi(const InferenceNet& net, std::span<const double> train_summary,
                            std::span<const double> test_embed) {
  if (train_summary.size() != net.embed_width() || test_embed.size() != net.embed_width())
    throw DimensionError("infer_phi: embeddings of width " + std::to_string(train_summary.size()) + "/" +
                         std::to_string(test_embed.size()) + ", network expects " +
                         std::to_string(net.embed_width()));
  return phi_from_output(net.h.forward(inference_input(train_summary, test_embed)));
}

std::vector<double> sample_theta(const VariationalParams& phi, std::span<const double> eps) {
  if (eps.size() != phi.dim()) throw DimensionError("sample_theta: noise width does not match phi");
  std::vector<double> theta(phi.dim());
  for (std::size_t i = 0; i < theta.size(); ++i) theta[i] = phi.mu[i] + std::exp(phi.log_std[i]) * eps[i];
  return theta;
}

double log_q(std::span<const double> theta, const VariationalParams& phi) {
  if (theta.size() != phi.dim()) throw DimensionError("log_q: theta width does not match phi");
  double acc = 0.0;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double z = (theta[i] - phi.mu[i]) / std::exp(phi.log_std[i]);
    acc += -kHalfLog2Pi - phi.log_std[i] - 0.5 * z * z;
  }
  return acc;
}

ConditioningSet make_conditioning_set(const Matrix& embeds, std::span<const double> y, Task task,
                                      std::span<const std::size_t> rows) {
  if (y.size() != embeds.rows) throw DimensionError("conditioning set: outcome count does not match embeddings");
  std::vector<std::size_t> all;
  if (rows.empty()) {
    all.resize(embeds.rows);
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    rows = all;
  }
  ConditioningSet cond;
  cond.task = task;
  cond.design = Matrix(rows.size(), embeds.cols + 1);
  cond.y.resize(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto src = embeds.row(rows[i]);
    auto dst = cond.design.row(i);
    std::copy(src.begin(), src.end(), dst.begin());
    dst.back() = 1.0;
    cond.y[i] = y[rows[i]];
  }
  cond.summary = aggregate(embeds, rows);
  return cond;
}

NoiseSample draw_noise(std::size_t theta_dim, const PriorConfig& prior, Rng& eps_rng, Rng& prior_rng) {
  NoiseSample s;
  s.eps.resize(theta_dim);
  for (double& e : s.eps) e = eps_rng.normal();
  s.prior_draws = draw_prior_targets(prior, prior_rng);
  return s;
}

double elbo_from_output(std::span<const double> raw, const ConditioningSet& cond,
                        std::span<const double> test_embed, const PriorConfig& prior,
                        const ElboOptions& opts, const NoiseSample& noise, std::span<double> d_raw) {
  const std::size_t d = raw.size() / 2;
  if (cond.design.cols != d || test_embed.size() + 1 != d || noise.eps.size() != d)
    throw DimensionError("elbo: head width, embedding width and noise width disagree");
  if (cond.size() == 0) throw InputError("elbo: empty conditioning set");
  if (!(opts.lambda > 0.0)) throw ConfigError("elbo: lambda must be positive");

  const VariationalParams phi = phi_from_output(raw);
  const std::vector<double> theta = sample_theta(phi, noise.eps);
  const PointEnergy pe = PointEnergy::make(prior, noise.prior_draws);

  const std::size_t n = cond.size();
  std::vector<double> f(n);
  kernels::gemv(cond.design.data, n, d, theta, {}, f);
  const double f_star = head_output(theta, test_embed);

  double data_term = 0.0;
  double prior_term = pe.value(f_star);
  for (std::size_t i = 0; i < n; ++i) {
    data_term += log_lik(cond.y[i], f[i], cond.task);
    prior_term += pe.value(f[i]);
  }
  double log_q_term;
  if (opts.analytic_entropy) {
    double entropy = 0.0;
    for (double l : phi.log_std) entropy += l + kHalfLog2PiE;
    log_q_term = -entropy;
  } else {
    log_q_term = log_q(theta, phi);
  }
  const double value = data_term - opts.lambda * (log_q_term - prior_term);

  if (!d_raw.empty()) {
    if (d_raw.size() != raw.size()) throw DimensionError("elbo: gradient buffer width");
    std::vector<double> coef(n);
    for (std::size_t i = 0; i < n; ++i)
      coef[i] = log_lik_grad(cond.y[i], f[i], cond.task) + opts.lambda * pe.grad(f[i]);
    std::vector<double> g_theta(d, 0.0);
    kernels::gemv_t_acc(cond.design.data, n, d, coef, g_theta);
    const double c_star = opts.lambda * pe.grad(f_star);
    for (std::size_t i = 0; i + 1 < d; ++i) g_theta[i] += c_star * test_embed[i];
    g_theta[d - 1] += c_star;

    // Along theta = mu + s * eps the sampled log q equals
    // sum(-0.5 ln 2pi - log_std - 0.5 eps^2), so d(-lambda log q) is 0 in mu
    // and +lambda in each log_std; the closed-form entropy gives the same.
    for (std::size_t i = 0; i < d; ++i) {
      d_raw[i] = g_theta[i];
      const double r = raw[d + i];
      const bool active = r > kLogStdMin && r < kLogStdMax;
      d_raw[d + i] = active ? g_theta[i] * std::exp(phi.log_std[i]) * noise.eps[i] + opts.lambda : 0.0;
    }
  }
  return value;
}

double elbo_single(const InferenceNet& net, const ConditioningSet& cond,
                   std::span<const double> test_embed, const PriorConfig& prior,
                   const ElboOptions& opts, ElboRngs& rngs) {
  const NoiseSample noise = draw_noise(net.theta_dim(), prior, rngs.eps, rngs.prior);
  if (test_embed.size() != net.embed_width() || cond.summary.size() != net.embed_width())
    throw DimensionError("elbo_single: embedding width does not match the inference network");
  const std::vector<double> raw = net.h.forward(inference_input(cond.summary, test_embed));
  return elbo_from_output(raw, cond, test_embed, prior, opts, noise);
}

Matrix inference_batch(std::span<const double> summary, const Matrix& test_embeds) {
  if (test_embeds.cols != summary.size())
    throw DimensionError("inference batch: test embedding width does not match the summary");
  Matrix in(test_embeds.rows, 2 * summary.size());
  for (std::size_t j = 0; j < test_embeds.rows; ++j) {
    auto dst = in.row(j);
    std::copy(summary.begin(), summary.end(), dst.begin());
    auto src = test_embeds.row(j);
    std::copy(src.begin(), src.end(), dst.begin() + static_cast<std::ptrdiff_t>(summary.size()));
  }
  return in;
}

OutputObjective elbo_sum_objective(const ConditioningSet& cond, const Matrix& test_embeds,
                                   const PriorConfig& prior, const ElboOptions& opts,
                                   std::span<const NoiseSample> noise) {
  if (test_embeds.rows == 0) throw InputError("elbo_sum: no test points");
  if (noise.size() != test_embeds.rows) throw DimensionError("elbo_sum: one noise sample per test point is required");
  return [&cond, &test_embeds, &prior, opts, noise](const Matrix& out, Matrix* d_out) {
    double total = 0.0;
    for (std::size_t j = 0; j < out.rows; ++j) {
      std::span<double> d = d_out ? d_out->row(j) : std::span<double>{};
      total += elbo_from_output(out.row(j), cond, test_embeds.row(j), prior, opts, noise[j], d);
    }
    return total;
  };
}

double elbo_sum(const InferenceNet& net, const ConditioningSet& cond, const Matrix& test_embeds,
                const PriorConfig& prior, const ElboOptions& opts, std::span<const NoiseSample> noise) {
  const OutputObjective obj = elbo_sum_objective(cond, test_embeds, prior, opts, noise);
  return obj(net.h.forward(inference_batch(cond.summary, test_embeds)), nullptr);
}

double elbo_sum(const InferenceNet& net, const ConditioningSet& cond, const Matrix& test_embeds,
                const PriorConfig& prior, const ElboOptions& opts, ElboRngs& rngs) {
  if (test_embeds.rows == 0) throw InputError("elbo_sum: no test points");
  std::vector<NoiseSample> noise;
  noise.reserve(test_embeds.rows);
  for (std::size_t j = 0; j < test_embeds.rows; ++j)
    noise.push_back(draw_noise(net.theta_dim(), prior, rngs.eps, rngs.prior));
  return elbo_sum(net, cond, test_embeds, prior, opts, noise);
}

GradResult elbo_sum_grad(const InferenceNet& net, const ConditioningSet& cond,
                         const Matrix& test_embeds, const PriorConfig& prior,
                         const ElboOptions& opts, std::span<const NoiseSample> noise) {
  const OutputObjective obj = elbo_sum_objective(cond, test_embeds, prior, opts, noise);
  return grad(net.h, inference_batch(cond.summary, test_embeds), obj);
}

}  // namespace vids
