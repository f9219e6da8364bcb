#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "helpers.hpp"
#include "vids/data.hpp"
#include "vids/environments.hpp"
#include "vids/error.hpp"

using namespace vids;

namespace {

// Small classification problem with a tiny inference net; fast enough for unit runs.
struct Setup {
  DataSplit split;
  PretrainResult pre;
  TrainConfig cfg;
  PriorConfig prior;
};

Setup small_setup(std::uint64_t seed, Task task = Task::classification) {
  Setup s;
  s.split = task == Task::classification ? gen_logistic_gap(0.3, 60, 30, seed) : gen_hetero_linear(0.5, 1.0, 1.0, 60, 30, seed);
  PretrainConfig pc;
  pc.hidden = {3};
  pc.activation = Activation::identity;
  pc.epochs = 200;
  pc.seed = seed;
  s.pre = pretrain_embedding(s.split.train, pc);
  s.cfg.environments = 3;
  s.cfg.n = 20;
  s.cfg.m = 4;
  s.cfg.iterations = 4;
  s.cfg.lr = 0.05;
  s.cfg.samples = 50;
  s.cfg.inference_hidden = {6, 4};
  s.cfg.seed = seed;
  s.prior = default_prior_config(s.split.train, 16);
  s.prior.task = task;
  return s;
}

}  // namespace

TEST_CASE("environment sampling") {
  Rng rng(1);
  Environment e = sample_environment(1, 5, 3, rng);
  CHECK(e.train == std::vector<std::size_t>(5, 0));
  CHECK(e.test == std::vector<std::size_t>(3, 0));

  Rng a(9), b(9);
  CHECK(sample_environment(50, 10, 4, a) == sample_environment(50, 10, 4, b));

  Rng big(2);
  Environment f = sample_environment(10, 100000, 1, big);
  std::vector<std::size_t> counts(10, 0);
  for (auto i : f.train) ++counts[i];
  for (auto c : counts) {
    double freq = c / 100000.0;
    CHECK(freq >= 0.09);
    CHECK(freq <= 0.11);
  }
}

TEST_CASE("variance-penalized objective") {
  std::vector<double> same{1.5, 1.5, 1.5};
  CHECK(cross_env_objective(same, 3.0) == doctest::Approx(4.5));
  std::vector<double> two{0, 2};
  CHECK(cross_env_objective(two, 1.0) == doctest::Approx(3.0));
  CHECK(cross_env_objective(two, 0.0) == doctest::Approx(2.0));
  std::vector<double> single{-7};
  CHECK(cross_env_objective(single, 10.0) == doctest::Approx(-7.0));
  CHECK_THROWS_AS(cross_env_objective(std::vector<double>{}, 1.0), InputError);

  std::vector<double> losses{-3, 0.5, 2, 7, -1};
  std::vector<double> perm{7, -1, 0.5, -3, 2};
  CHECK(cross_env_objective(losses, 0.4) == doctest::Approx(cross_env_objective(perm, 0.4)).epsilon(1e-14));

  auto w = cross_env_weights(losses, 0.4);
  for (std::size_t l = 0; l < losses.size(); ++l) {
    auto up = losses, down = losses;
    up[l] += 1e-6;
    down[l] -= 1e-6;
    CHECK(w[l] == doctest::Approx((cross_env_objective(up, 0.4) - cross_env_objective(down, 0.4)) / 2e-6).epsilon(1e-6));
  }
}

TEST_CASE("environment loss with one test point is the single-point objective") {
  Setup s = small_setup(3);
  SourceTable src = make_source_table(s.pre.embedding, s.split.train);
  auto streams = FitStreams::from_master(3);
  InferenceNet net = initial_inference_net(s.pre.embedding, s.pre.head, s.cfg, streams);
  Rng rng(4);
  Environment env = sample_environment(src.size(), 20, 1, rng);
  ElboOptions opts{0.005, false};
  ElboRngs r1{Rng(5), Rng(6)}, r2{Rng(5), Rng(6)};
  double loss = env_loss(net, env, src, s.prior, opts, r1);
  auto cond = make_conditioning_set(src.embeds, src.y, src.task, env.train);
  CHECK(loss == elbo_single(net, cond, src.embeds.row(env.test[0]), s.prior, opts, r2));

  ElboRngs r3{Rng(5), Rng(6)}, r4{Rng(5), Rng(6)};
  Environment twin = env;
  CHECK(env_loss(net, env, src, s.prior, opts, r3) == env_loss(net, twin, src, s.prior, opts, r4));
}

TEST_CASE("zero iterations return the initial network") {
  Setup s = small_setup(5);
  s.cfg.iterations = 0;
  auto streams = FitStreams::from_master(5);
  auto res = fit(s.split.train, s.pre.embedding, s.pre.head, s.cfg, s.prior, streams);
  CHECK(res.trace.empty());
  CHECK(res.net.h == initial_inference_net(s.pre.embedding, s.pre.head, s.cfg, streams).h);
}

TEST_CASE("fit is bit-deterministic") {
  for (Task task : {Task::classification, Task::regression}) {
    Setup s = small_setup(6, task);
    auto streams = FitStreams::from_master(6);
    auto a = fit(s.split.train, s.pre.embedding, s.pre.head, s.cfg, s.prior, streams);
    auto b = fit(s.split.train, s.pre.embedding, s.pre.head, s.cfg, s.prior, streams);
    CHECK(a.net.h == b.net.h);
    CHECK(a.trace == b.trace);
    CHECK(a.trace.size() == s.cfg.iterations);
    CHECK(a.trace[0].iter == 1);
    CHECK(a.trace[0].env_loss_min <= a.trace[0].env_loss_max);
  }
}

TEST_CASE("noise streams and environment streams are separate") {
  Setup s = small_setup(7);
  auto base = FitStreams::from_master(7);
  auto a = fit(s.split.train, s.pre.embedding, s.pre.head, s.cfg, s.prior, base);
  auto other_eps = base;
  other_eps.eps = derive_seed(base.eps, "other");
  auto b = fit(s.split.train, s.pre.embedding, s.pre.head, s.cfg, s.prior, other_eps);
  CHECK(a.trace != b.trace);
  auto other_envs = base;
  other_envs.envs = derive_seed(base.envs, "other");
  auto c = fit(s.split.train, s.pre.embedding, s.pre.head, s.cfg, s.prior, other_envs);
  CHECK(a.trace != c.trace);
}

TEST_CASE("fixed environments reuse the first draw") {
  Setup s = small_setup(8);
  s.cfg.fixed_envs = true;
  auto streams = FitStreams::from_master(8);
  SourceTable src = make_source_table(s.pre.embedding, s.split.train);
  auto init = initial_inference_net(s.pre.embedding, s.pre.head, s.cfg, streams);
  auto res = fit(s.split.train, s.pre.embedding, s.pre.head, s.cfg, s.prior, streams);
  std::vector<Environment> cached;
  auto provider = [&](std::size_t, Rng& rng) {
    if (cached.empty())
      for (std::size_t l = 0; l < s.cfg.environments; ++l) cached.push_back(sample_environment(src.size(), s.cfg.n, s.cfg.m, rng));
    return cached;
  };
  auto same = fit_with_provider(init, src, s.prior, s.cfg, streams, provider);
  CHECK(same.net.h == res.net.h);
  CHECK(same.trace == res.trace);
}

TEST_CASE("transductive mode is the single-environment path") {
  Setup s = small_setup(9);
  s.cfg.environments = 1;
  s.cfg.tau = 0.0;
  auto streams = FitStreams::from_master(9);
  const Matrix& test_x = s.split.train.x;
  auto trans = fit_transductive(s.split.train, test_x, s.pre.embedding, s.pre.head, s.cfg, s.prior, streams);

  // The same run through the generic loop with one forced environment over the
  // training rows (train part) and the appended copies (test part).
  const std::size_t N = s.split.train.size();
  Dataset stacked = s.split.train;
  stacked.x = Matrix(2 * N, test_x.cols);
  std::copy(s.split.train.x.data.begin(), s.split.train.x.data.end(), stacked.x.data.begin());
  std::copy(test_x.data.begin(), test_x.data.end(), stacked.x.data.begin() + N * test_x.cols);
  stacked.y.assign(2 * N, 0.0);
  std::copy(s.split.train.y.begin(), s.split.train.y.end(), stacked.y.begin());
  SourceTable src = make_source_table(s.pre.embedding, stacked);
  Environment env;
  for (std::size_t i = 0; i < N; ++i) {
    env.train.push_back(i);
    env.test.push_back(N + i);
  }
  auto init = initial_inference_net(s.pre.embedding, s.pre.head, s.cfg, streams);
  auto forced = fit_with_provider(init, src, s.prior, s.cfg, streams,
                                  [&](std::size_t, Rng&) { return std::vector<Environment>{env}; });
  CHECK(forced.net.h == trans.net.h);
  CHECK(forced.trace == trans.trace);
  for (const auto& row : trans.trace) CHECK(row.var_penalty == 0.0);
}

TEST_CASE("prediction summaries") {
  Setup s = small_setup(10);
  auto streams = FitStreams::from_master(10);
  InferenceNet net = initial_inference_net(s.pre.embedding, s.pre.head, s.cfg, streams);
  Matrix xs = test::matrix(3, 1, {0.05, 0.5, 0.95});

  Rng r1(1);
  auto one = predict(net, s.pre.embedding, s.split.train, xs, 1, r1, true);
  for (double v : one.std) CHECK(v == 0.0);
  CHECK(one.samples.cols == 1);
  for (std::size_t i = 0; i < 3; ++i) CHECK(one.mean[i] == one.samples(i, 0));

  Rng r2(2);
  auto many = predict(net, s.pre.embedding, s.split.train, xs, 200, r2);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(many.mean[i] > 0.0);
    CHECK(many.mean[i] < 1.0);
    CHECK(many.std[i] > 0.0);
  }

  // Force the log std output to the clamp floor.
  InferenceNet tight = net;
  auto& out = tight.h.layers().back();
  const std::size_t d = out.out / 2;
  for (std::size_t i = d; i < out.out; ++i) out.bias[i] = -50.0;
  Rng r3(3);
  auto narrow = predict(tight, s.pre.embedding, s.split.train, xs, 1000, r3);
  for (double v : narrow.std) CHECK(v < 1e-2);

  Rng r4(4), r5(4);
  auto p1 = predict(net, s.pre.embedding, s.split.train, xs, 50, r4);
  auto p2 = predict(net, s.pre.embedding, s.split.train, xs, 50, r5);
  CHECK(p1.mean == p2.mean);
  CHECK(p1.std == p2.std);
}

TEST_CASE("training config validation") {
  TrainConfig c;
  CHECK_NOTHROW(c.validate());
  c.environments = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = TrainConfig{};
  c.tau = -1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = TrainConfig{};
  c.samples = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}
