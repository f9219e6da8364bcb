#include "vids/environments.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <string>

#include "vids/kernels.hpp"

namespace vids {

Environment sample_environment(std::size_t source_size, std::size_t n, std::size_t m, Rng& rng) {
  if (source_size == 0) throw InputError("sample_environment: empty source data");
  Environment env;
  env.train.resize(n);
  env.test.resize(m);
  for (std::size_t& i : env.train) i = static_cast<std::size_t>(rng.below(source_size));
  for (std::size_t& i : env.test) i = static_cast<std::size_t>(rng.below(source_size));
  return env;
}

Environment sample_environment(const Dataset& data, std::size_t n, std::size_t m, Rng& rng) {
  return sample_environment(data.size(), n, m, rng);
}

void TrainConfig::validate() const {
  if (environments < 1 || n < 1 || m < 1 || samples < 1)
    throw ConfigError("train: L, n, m and S must all be at least 1");
  if (!(tau >= 0.0)) throw ConfigError("train: tau must be non-negative");
  if (!(lambda > 0.0)) throw ConfigError("train: lambda must be positive");
  if (!(lr > 0.0)) throw ConfigError("train: learning rate must be positive");
  if (!(init_log_std >= kLogStdMin && init_log_std <= kLogStdMax))
    throw ConfigError("train: init_log_std outside the clamp range");
}

SourceTable make_source_table(const EmbeddingModel& model, const Dataset& data) {
  data.validate();
  return SourceTable{embed_all(model, data.x), data.y, data.task};
}

FitStreams FitStreams::from_master(std::uint64_t seed) {
  return FitStreams{derive_seed(seed, "init"), derive_seed(seed, "envs"), derive_seed(seed, "eps"),
                    derive_seed(seed, "prior-mc")};
}

namespace {

Matrix gather_rows(const Matrix& src, std::span<const std::size_t> rows) {
  Matrix out(rows.size(), src.cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= src.rows) throw DimensionError("environment index out of range");
    auto s = src.row(rows[i]);
    std::copy(s.begin(), s.end(), out.row(i).begin());
  }
  return out;
}

ElboRngs env_rngs(const FitStreams& streams, std::size_t iter, std::size_t env) {
  return ElboRngs{Rng(derive_seed(derive_seed(streams.eps, iter), env)),
                  Rng(derive_seed(derive_seed(streams.prior, iter), env))};
}

std::string dump_trace(const std::vector<TraceRow>& trace) {
  std::ostringstream os;
  const std::size_t from = trace.size() > 5 ? trace.size() - 5 : 0;
  for (std::size_t i = from; i < trace.size(); ++i)
    os << " [iter " << trace[i].iter << " objective " << trace[i].objective << " min " << trace[i].env_loss_min
       << " max " << trace[i].env_loss_max << "]";
  return os.str();
}

}  // namespace

double env_loss(const InferenceNet& net, const Environment& env, const SourceTable& src,
                const PriorConfig& prior, const ElboOptions& opts, ElboRngs& rngs) {
  if (env.train.empty() || env.test.empty()) throw InputError("env_loss: environment has an empty part");
  const ConditioningSet cond = make_conditioning_set(src.embeds, src.y, src.task, env.train);
  const Matrix test = gather_rows(src.embeds, env.test);
  return elbo_sum(net, cond, test, prior, opts, rngs);
}

double cross_env_variance(std::span<const double> losses) {
  if (losses.empty()) throw InputError("cross-environment objective needs at least one loss");
  const double n = static_cast<double>(losses.size());
  const double mean = std::accumulate(losses.begin(), losses.end(), 0.0) / n;
  double var = 0.0;
  for (double l : losses) var += (l - mean) * (l - mean);
  return var / n;
}

double cross_env_objective(std::span<const double> losses, double tau) {
  const double var = cross_env_variance(losses);
  return std::accumulate(losses.begin(), losses.end(), 0.0) + tau * var;
}

std::vector<double> cross_env_weights(std::span<const double> losses, double tau) {
  if (losses.empty()) throw InputError("cross-environment objective needs at least one loss");
  const double n = static_cast<double>(losses.size());
  const double mean = std::accumulate(losses.begin(), losses.end(), 0.0) / n;
  std::vector<double> w(losses.size());
  for (std::size_t l = 0; l < losses.size(); ++l) w[l] = 1.0 + tau * 2.0 * (losses[l] - mean) / n;
  return w;
}

FitResult fit_with_provider(InferenceNet initial, const SourceTable& src, const PriorConfig& prior,
                            const TrainConfig& cfg, const FitStreams& streams,
                            const EnvironmentProvider& provider) {
  cfg.validate();
  prior.validate();
  if (src.size() == 0) throw InputError("fit: empty source data");
  if (initial.embed_width() != src.embeds.cols)
    throw DimensionError("fit: inference network width does not match the embeddings");

  FitResult result{std::move(initial), {}};
  const ElboOptions opts{cfg.lambda, cfg.analytic_entropy};
  Rng env_rng(streams.envs);

  for (std::size_t iter = 0; iter < cfg.iterations; ++iter) {
    const std::vector<Environment> envs = provider(iter, env_rng);
    if (envs.empty()) throw InputError("fit: environment provider returned no environments");

    std::vector<ConditioningSet> conds;
    std::vector<Matrix> tests;
    std::vector<std::vector<NoiseSample>> noise;
    std::vector<std::size_t> offsets{0};
    conds.reserve(envs.size());
    for (std::size_t l = 0; l < envs.size(); ++l) {
      const Environment& env = envs[l];
      if (env.train.empty() || env.test.empty()) throw InputError("fit: environment has an empty part");
      conds.push_back(make_conditioning_set(src.embeds, src.y, src.task, env.train));
      tests.push_back(gather_rows(src.embeds, env.test));
      ElboRngs rngs = env_rngs(streams, iter, l);
      std::vector<NoiseSample> env_noise;
      for (std::size_t j = 0; j < env.test.size(); ++j)
        env_noise.push_back(draw_noise(result.net.theta_dim(), prior, rngs.eps, rngs.prior));
      noise.push_back(std::move(env_noise));
      offsets.push_back(offsets.back() + env.test.size());
    }

    Matrix inputs(offsets.back(), 2 * src.embeds.cols);
    for (std::size_t l = 0; l < envs.size(); ++l) {
      const Matrix batch = inference_batch(conds[l].summary, tests[l]);
      std::copy(batch.data.begin(), batch.data.end(),
                inputs.data.begin() + static_cast<std::ptrdiff_t>(offsets[l] * inputs.cols));
    }

    std::vector<double> losses(envs.size());
    const OutputObjective objective = [&](const Matrix& out, Matrix* d_out) {
      for (std::size_t l = 0; l < envs.size(); ++l) {
        double loss = 0.0;
        for (std::size_t j = 0; j < tests[l].rows; ++j) {
          const std::size_t row = offsets[l] + j;
          std::span<double> d = d_out ? d_out->row(row) : std::span<double>{};
          loss += elbo_from_output(out.row(row), conds[l], tests[l].row(j), prior, opts, noise[l][j], d);
        }
        losses[l] = loss;
      }
      if (d_out) {
        const std::vector<double> w = cross_env_weights(losses, cfg.tau);
        for (std::size_t l = 0; l < envs.size(); ++l)
          for (std::size_t row = offsets[l]; row < offsets[l + 1]; ++row)
            for (double& v : d_out->row(row)) v *= w[l];
      }
      return cross_env_objective(losses, cfg.tau);
    };

    GradResult g = grad(result.net.h, inputs, objective);
    const auto [lo, hi] = std::minmax_element(losses.begin(), losses.end());
    result.trace.push_back(TraceRow{iter + 1, g.value, cfg.tau * cross_env_variance(losses), *lo, *hi});
    const double gnorm = g.tape.norm();
    if (!std::isfinite(g.value) || !std::isfinite(gnorm))
      throw FitDivergence("fit diverged at iteration " + std::to_string(iter + 1) + ":" +
                              dump_trace(result.trace),
                          result.trace);
    if (cfg.normalize_gradient) {
      double terms = 0.0;
      for (std::size_t l = 0; l < envs.size(); ++l)
        terms += static_cast<double>(tests[l].rows) * static_cast<double>(conds[l].size());
      g.tape.scale(1.0 / terms);
    }
    sgd_step(result.net.h, g.tape, cfg.lr, StepDirection::ascent);
  }
  return result;
}

InferenceNet initial_inference_net(const EmbeddingModel& embedding, const HeadParams& init_head,
                                   const TrainConfig& cfg, const FitStreams& streams) {
  Rng rng(streams.init);
  return make_inference_net(embedding.width(), cfg.inference_hidden, init_head, rng, cfg.init_log_std);
}

FitResult fit(const Dataset& data, const EmbeddingModel& embedding, const HeadParams& init_head,
              const TrainConfig& cfg, const PriorConfig& prior, const FitStreams& streams) {
  cfg.validate();
  const SourceTable src = make_source_table(embedding, data);
  std::vector<Environment> fixed;
  const EnvironmentProvider provider = [&](std::size_t, Rng& rng) {
    if (cfg.fixed_envs && !fixed.empty()) return fixed;
    std::vector<Environment> envs;
    envs.reserve(cfg.environments);
    for (std::size_t l = 0; l < cfg.environments; ++l)
      envs.push_back(sample_environment(src.size(), cfg.n, cfg.m, rng));
    if (cfg.fixed_envs) fixed = envs;
    return envs;
  };
  return fit_with_provider(initial_inference_net(embedding, init_head, cfg, streams), src, prior, cfg, streams,
                           provider);
}

FitResult fit(const Dataset& data, const EmbeddingModel& embedding, const HeadParams& init_head,
              const TrainConfig& cfg, const PriorConfig& prior) {
  return fit(data, embedding, init_head, cfg, prior, FitStreams::from_master(cfg.seed));
}

FitResult fit_transductive(const Dataset& data, const Matrix& test_x, const EmbeddingModel& embedding,
                           const HeadParams& init_head, const TrainConfig& cfg,
                           const PriorConfig& prior, const FitStreams& streams) {
  data.validate();
  if (test_x.rows == 0) throw InputError("fit: no test covariates");
  if (test_x.cols != data.width()) throw DimensionError("fit: test covariates have the wrong width");

  TrainConfig single = cfg;
  single.environments = 1;
  single.tau = 0.0;
  single.fixed_envs = true;

  const Matrix train_embeds = embed_all(embedding, data.x);
  const Matrix test_embeds = embed_all(embedding, test_x);
  SourceTable src;
  src.task = data.task;
  src.embeds = Matrix(data.size() + test_x.rows, train_embeds.cols);
  std::copy(train_embeds.data.begin(), train_embeds.data.end(), src.embeds.data.begin());
  std::copy(test_embeds.data.begin(), test_embeds.data.end(),
            src.embeds.data.begin() + static_cast<std::ptrdiff_t>(train_embeds.data.size()));
  src.y = data.y;
  src.y.resize(src.embeds.rows, 0.0);  // test outcomes are never read

  Environment env;
  env.train.resize(data.size());
  std::iota(env.train.begin(), env.train.end(), std::size_t{0});
  env.test.resize(test_x.rows);
  std::iota(env.test.begin(), env.test.end(), data.size());
  const EnvironmentProvider provider = [env](std::size_t, Rng&) { return std::vector<Environment>{env}; };
  return fit_with_provider(initial_inference_net(embedding, init_head, single, streams), src, prior, single,
                           streams, provider);
}

PredictiveSummary predict(const InferenceNet& net, const EmbeddingModel& embedding, const Dataset& train,
                          const Matrix& x_star, std::size_t samples, Rng& rng, bool keep_samples) {
  if (samples < 1) throw ConfigError("predict: S must be at least 1");
  train.validate();
  const std::vector<double> summary = aggregate(embed_all(embedding, train.x));
  const Matrix star_embeds = embed_all(embedding, x_star);
  const Matrix raw = net.h.forward(inference_batch(summary, star_embeds));
  const std::size_t d = net.theta_dim();

  PredictiveSummary out;
  out.mean.resize(x_star.rows);
  out.std.resize(x_star.rows);
  if (keep_samples) out.samples = Matrix(x_star.rows, samples);
  std::vector<double> eps(d);
  std::vector<double> values(samples);
  for (std::size_t j = 0; j < x_star.rows; ++j) {
    const VariationalParams phi = phi_from_output(raw.row(j));
    auto z = star_embeds.row(j);
    for (std::size_t s = 0; s < samples; ++s) {
      for (double& e : eps) e = rng.normal();
      const double f = head_output(sample_theta(phi, eps), z);
      values[s] = train.task == Task::classification ? stable_sigmoid(f) : f;
    }
    const double mean = kernels::sum(values) / static_cast<double>(samples);
    out.mean[j] = mean;
    out.std[j] = samples == 1 ? 0.0 : std::sqrt(kernels::sum_sq_diff(values, mean) / static_cast<double>(samples));
    if (keep_samples) std::copy(values.begin(), values.end(), out.samples.row(j).begin());
  }
  return out;
}

}  // namespace vids
