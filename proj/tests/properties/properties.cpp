// End-to-end behavioural properties of the trained model on the logistic gap
// task, using the shipped configuration.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <vector>

#include "vids/config.hpp"
#include "vids/data.hpp"
#include "vids/environments.hpp"
#include "vids/metrics.hpp"

using namespace vids;

namespace {

struct Trained {
  DataSplit split;
  PretrainResult pre;
  PriorConfig prior;
  TrainConfig cfg;
  FitResult fit;
};

const ExperimentConfig& logistic_config() {
  static const ExperimentConfig cfg = load_config(std::string(VIDS_SOURCE_DIR) + "/configs/logistic.ini");
  return cfg;
}

// Same derivation as the CLI stages.
const std::vector<Trained>& trained_runs() {
  static const std::vector<Trained> runs = [] {
    const auto& base = logistic_config();
    std::vector<Trained> v;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      Trained t;
      t.split = gen_logistic_gap(base.task.t, base.task.n_train, base.task.n_test, seed);
      t.pre = pretrain_embedding(t.split.train, pretrain_config(base, seed));
      t.prior = prior_config(base, t.split.train);
      t.cfg = base.train;
      t.cfg.seed = seed;
      t.fit = fit(t.split.train, t.pre.embedding, t.pre.head, t.cfg, t.prior, FitStreams::from_master(seed));
      v.push_back(std::move(t));
    }
    return v;
  }();
  return runs;
}

}  // namespace

TEST_CASE("smoothed objective ends above its first value in at least 8 of 10 seeds") {
  std::size_t wins = 0;
  for (std::size_t s = 0; s < 10; ++s) {
    const auto& trace = trained_runs()[s].fit.trace;
    REQUIRE(trace.size() >= 10);
    double last = 0;
    for (std::size_t i = trace.size() - 10; i < trace.size(); ++i) last += trace[i].objective / 10.0;
    wins += last > trace.front().objective;
  }
  MESSAGE("seeds with a rising objective: " << wins << "/10");
  CHECK(wins >= 8);
}

TEST_CASE("in-support test parts score a higher per-point elbo than gap test parts") {
  std::vector<double> diffs;
  for (std::size_t s = 0; s < 20; ++s) {
    const auto& t = trained_runs()[s];
    // Source rows: training rows, then the test rows that fall in the gap.
    SourceTable src = make_source_table(t.pre.embedding, t.split.train);
    const std::size_t N = src.size();
    std::vector<std::size_t> gap;
    for (std::size_t i = 0; i < t.split.test.size(); ++i)
      if (t.split.test.x(i, 0) > 0.3 && t.split.test.x(i, 0) < 0.7) gap.push_back(i);
    REQUIRE_FALSE(gap.empty());
    Dataset gap_rows = t.split.test.subset(gap);
    Matrix ge = embed_all(t.pre.embedding, gap_rows.x);
    Matrix all(N + gap.size(), src.embeds.cols);
    std::copy(src.embeds.data.begin(), src.embeds.data.end(), all.data.begin());
    std::copy(ge.data.begin(), ge.data.end(), all.data.begin() + N * all.cols);
    src.embeds = all;
    src.y.resize(all.rows, 0.0);

    Rng rng(derive_seed(s, "envs"));
    Environment inside = sample_environment(N, t.cfg.n, t.cfg.m, rng);
    Environment outside = inside;
    for (std::size_t j = 0; j < t.cfg.m; ++j) {
      inside.test[j] = inside.train[rng.below(t.cfg.n)];
      outside.test[j] = N + rng.below(gap.size());
    }
    const ElboOptions opts{t.cfg.lambda, t.cfg.analytic_entropy};
    ElboRngs a{Rng(derive_seed(s, "eps")), Rng(derive_seed(s, "prior-mc"))};
    ElboRngs b{Rng(derive_seed(s, "eps")), Rng(derive_seed(s, "prior-mc"))};
    const double m = static_cast<double>(t.cfg.m);
    diffs.push_back(env_loss(t.fit.net, inside, src, t.prior, opts, a) / m -
                    env_loss(t.fit.net, outside, src, t.prior, opts, b) / m);
  }
  MESSAGE("median per-point elbo difference (inside - gap): " << median(diffs));
  CHECK(median(diffs) > 0.0);
}

TEST_CASE("predictive std is higher in the gap than at the edges") {
  const auto& t = trained_runs()[0];
  Rng rng(derive_seed(0, "predict"));
  const auto pred = predict(t.fit.net, t.pre.embedding, t.split.train, t.split.test.x, t.cfg.samples, rng);
  double in = 0, out = 0;
  std::size_t n_in = 0, n_out = 0;
  for (std::size_t i = 0; i < t.split.test.size(); ++i) {
    const double x = t.split.test.x(i, 0);
    if (x > 0.3 && x < 0.7) {
      in += pred.std[i];
      ++n_in;
    } else {
      out += pred.std[i];
      ++n_out;
    }
  }
  CHECK(in / n_in > out / n_out);
}

TEST_CASE("predictive std settles between 1e3 and 1e4 draws") {
  const auto& t = trained_runs()[1];
  Matrix xs(20, 1);
  for (std::size_t i = 0; i < 20; ++i) xs(i, 0) = i / 19.0;
  Rng r1(derive_seed(1, "predict")), r2(derive_seed(2, "predict"));
  const auto a = predict(t.fit.net, t.pre.embedding, t.split.train, xs, 1000, r1);
  const auto b = predict(t.fit.net, t.pre.embedding, t.split.train, xs, 10000, r2);
  std::vector<double> rel;
  for (std::size_t i = 0; i < 20; ++i) rel.push_back(std::abs(a.std[i] - b.std[i]) / b.std[i]);
  CHECK(median(rel) < 0.05);
}
