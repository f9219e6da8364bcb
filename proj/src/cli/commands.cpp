#include "vids/cli/commands.hpp"

#include <array>
#include <filesystem>
#include <functional>
#include <map>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "vids/cli/manifest.hpp"
#include "vids/csv.hpp"
#include "vids/data.hpp"
#include "vids/env_theory.hpp"
#include "vids/environments.hpp"
#include "vids/error.hpp"
#include "vids/metrics.hpp"
#include "vids/posterior.hpp"
#include "vids/prior.hpp"
#include "json.hpp"

namespace fs = std::filesystem;

namespace vids::cli {

namespace {

constexpr const char* kTrain = "train.csv";
constexpr const char* kTest = "test.csv";
constexpr const char* kEmbedding = "embedding.ckpt";
constexpr const char* kHead = "head.ckpt";
constexpr const char* kInference = "inference.ckpt";
constexpr const char* kTrace = "trace.csv";
constexpr const char* kPredictions = "predictions.csv";
constexpr const char* kPhi = "phi.csv";
constexpr const char* kMetrics = "metrics.csv";

Task task_of(const ExperimentConfig& cfg) {
  switch (cfg.task.kind) {
    case TaskKind::hetero: return Task::regression;
    case TaskKind::logistic_gap: return Task::classification;
    case TaskKind::csv: return cfg.task.csv_task;
  }
  return Task::regression;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory '" + dir + "'");
}

std::string join_path(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

// Missing prerequisite artifacts name the stage that produces them.
std::string require(const std::string& dir, const std::string& name, const std::string& stage) {
  const std::string path = join_path(dir, name);
  if (!fs::exists(path)) throw InputError("missing " + path + "; run '" + stage + "' first");
  return path;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write '" + path + "'");
  os << text;
  if (!os) throw IoError("write failed for '" + path + "'");
}

ManifestEntry entry(const std::string& dir, const std::string& name) {
  return ManifestEntry{name, git_blob_hash_file(join_path(dir, name))};
}

void finish_stage(const ExperimentConfig& cfg, std::uint64_t seed, const std::string& dir, const std::string& stage,
                  const std::vector<std::string>& inputs, const std::vector<std::string>& outputs,
                  std::vector<std::pair<std::string, std::string>> extra = {}) {
  RunManifest m;
  m.stage = stage;
  m.config_hash = config_hash(cfg);
  m.seed = seed;
  for (const auto& n : inputs) m.inputs.push_back(entry(dir, n));
  for (const auto& n : outputs) m.outputs.push_back(entry(dir, n));
  m.extra = std::move(extra);
  write_manifest(join_path(dir, stage + ".manifest.json"), m);
}

Dataset read_dataset(const std::string& path, Task task) { return load_csv(path, "y", task).data; }

HeadParams head_from_net(const DenseNet& net) {
  if (net.layers().size() != 1 || net.output_width() != 1) throw ParseError("head checkpoint must be one 1-wide layer");
  HeadParams h;
  h.values = net.layers()[0].weights;
  h.values.push_back(net.layers()[0].bias[0]);
  return h;
}

DenseNet net_from_head(const HeadParams& head) {
  Layer l;
  l.in = head.embed_width();
  l.out = 1;
  l.act = Activation::identity;
  l.weights.assign(head.values.begin(), head.values.end() - 1);
  l.bias = {head.values.back()};
  return DenseNet({l});
}

std::string csv_text(const std::function<void(std::ostream&)>& fill) {
  std::ostringstream os;
  fill(os);
  return os.str();
}

}  // namespace

ExperimentConfig resolve_config(const Options& opts) {
  ExperimentConfig cfg = opts.config_path.empty() ? ExperimentConfig{} : load_config(opts.config_path);
  if (opts.seed) cfg.seeds = {*opts.seed};
  if (opts.out) cfg.out = *opts.out;
  cfg.validate();
  return cfg;
}

std::string seed_dir(const ExperimentConfig& cfg, std::uint64_t seed) {
  return join_path(cfg.out, "seed-" + std::to_string(seed));
}

void cmd_gen_data(const ExperimentConfig& cfg, std::ostream& log) {
  for (std::uint64_t seed : cfg.seeds) {
    const std::string dir = seed_dir(cfg, seed);
    ensure_dir(dir);
    std::vector<std::string> outputs{kTrain, kTest};
    std::vector<std::pair<std::string, std::string>> extra{{"task", std::string(task_kind_name(cfg.task.kind))}};
    std::vector<std::string> covariates;
    Dataset train, test;
    std::string source_hash;
    if (cfg.task.kind == TaskKind::hetero) {
      DataSplit s = gen_hetero_linear(cfg.task.a, cfg.task.b, cfg.task.beta, cfg.task.n_train, cfg.task.n_test, seed,
                                      cfg.task.noise_scale);
      train = std::move(s.train);
      test = std::move(s.test);
    } else if (cfg.task.kind == TaskKind::logistic_gap) {
      DataSplit s = gen_logistic_gap(cfg.task.t, cfg.task.n_train, cfg.task.n_test, seed);
      train = std::move(s.train);
      test = std::move(s.test);
    } else {
      LoadedCsv loaded = load_csv(cfg.task.csv_path, cfg.task.target, cfg.task.csv_task);
      for (const auto& w : loaded.warnings) log << "warning: " << w << '\n';
      source_hash = git_blob_hash_file(cfg.task.csv_path);
      covariates = loaded.covariates;
      SplitSpec spec = cfg.task.split;
      spec.seed = seed;
      ShiftSplit split = kmeans_shift_split(loaded.data, spec);
      nlohmann::json sj;
      sj["source_hash"] = source_hash;
      sj["high_cluster"] = split.high_cluster;
      sj["spread"] = split.spread;
      sj["train_rows"] = split.train_rows;
      sj["test_rows"] = split.test_rows;
      sj["train_from_high"] = split.train_from_high;
      sj["train_from_other"] = split.train_rows.size() - split.train_from_high;
      sj["test_from_high"] = split.test_from_high;
      sj["test_from_other"] = split.test_rows.size() - split.test_from_high;
      train = std::move(split.train);
      test = std::move(split.test);
      if (cfg.task.standardize) {
        Standardized st = standardize(train, test);
        for (const auto& w : st.warnings) log << "warning: " << w << '\n';
        nlohmann::json cols = nlohmann::json::array();
        for (const auto& c : st.transform.x)
          cols.push_back({{"center", c.center}, {"scale", c.scale}, {"passthrough", c.passthrough}});
        sj["standardize"] = {{"x", cols},
                             {"y",
                              {{"center", st.transform.y.center},
                               {"scale", st.transform.y.scale},
                               {"passthrough", st.transform.y.passthrough}}}};
        train = std::move(st.train);
        test = std::move(st.test);
      }
      write_text(join_path(dir, "split.json"), sj.dump(2) + "\n");
      outputs.push_back("split.json");
      extra.push_back({"source_hash", source_hash});
    }
    write_dataset_csv(join_path(dir, kTrain), train, covariates);
    write_dataset_csv(join_path(dir, kTest), test, covariates);
    finish_stage(cfg, seed, dir, "gen-data", {}, outputs, extra);
    log << "gen-data seed " << seed << ": " << train.size() << " train rows, " << test.size() << " test rows -> "
        << dir << '\n';
  }
}

void cmd_pretrain(const ExperimentConfig& cfg, std::ostream& log) {
  for (std::uint64_t seed : cfg.seeds) {
    const std::string dir = seed_dir(cfg, seed);
    const Dataset train = read_dataset(require(dir, kTrain, "gen-data"), task_of(cfg));
    const PretrainResult r = pretrain_embedding(train, pretrain_config(cfg, seed));
    save_checkpoint(r.embedding.g, join_path(dir, kEmbedding));
    save_checkpoint(net_from_head(r.head), join_path(dir, kHead));
    write_text(join_path(dir, "pretrain_trace.csv"), csv_text([&](std::ostream& os) {
                 os << "epoch,mean_loglik\n";
                 for (std::size_t e = 0; e < r.mean_loglik.size(); ++e)
                   os << e << ',' << format_double(r.mean_loglik[e]) << '\n';
               }));
    finish_stage(cfg, seed, dir, "pretrain", {kTrain}, {kEmbedding, kHead, "pretrain_trace.csv"});
    log << "pretrain seed " << seed << ": final mean log-likelihood "
        << format_double(r.mean_loglik.empty() ? 0.0 : r.mean_loglik.back()) << '\n';
  }
}

namespace {

void write_trace(const std::string& path, const std::vector<TraceRow>& trace) {
  write_text(path, csv_text([&](std::ostream& os) {
               os << "iter,objective,var_penalty,env_loss_min,env_loss_max\n";
               for (const TraceRow& t : trace)
                 os << t.iter << ',' << format_double(t.objective) << ',' << format_double(t.var_penalty) << ','
                    << format_double(t.env_loss_min) << ',' << format_double(t.env_loss_max) << '\n';
             }));
}

}  // namespace

void cmd_fit(const ExperimentConfig& cfg, std::ostream& log) {
  for (std::uint64_t seed : cfg.seeds) {
    const std::string dir = seed_dir(cfg, seed);
    const Task task = task_of(cfg);
    const Dataset train = read_dataset(require(dir, kTrain, "gen-data"), task);
    const EmbeddingModel embedding{load_checkpoint(require(dir, kEmbedding, "pretrain"))};
    const HeadParams head = head_from_net(load_checkpoint(require(dir, kHead, "pretrain")));
    const PriorConfig prior = prior_config(cfg, train);
    TrainConfig tc = cfg.train;
    tc.seed = seed;
    const FitStreams streams = FitStreams::from_master(seed);
    std::vector<std::string> inputs{kTrain, kEmbedding, kHead};
    FitResult r;
    try {
      if (cfg.mode == FitMode::transductive) {
        const Dataset test = read_dataset(require(dir, kTest, "gen-data"), task);
        inputs.push_back(kTest);
        r = fit_transductive(train, test.x, embedding, head, tc, prior, streams);
      } else {
        r = fit(train, embedding, head, tc, prior, streams);
      }
    } catch (const FitDivergence& e) {
      write_trace(join_path(dir, kTrace), e.trace());
      throw;
    }
    save_checkpoint(r.net.h, join_path(dir, kInference));
    write_trace(join_path(dir, kTrace), r.trace);
    finish_stage(cfg, seed, dir, "fit", inputs, {kInference, kTrace},
                 {{"mode", std::string(fit_mode_name(cfg.mode))},
                  {"prior_range", format_double(prior.y_min) + "," + format_double(prior.y_max)}});
    log << "fit seed " << seed << ": " << r.trace.size() << " iterations, final objective "
        << format_double(r.trace.empty() ? 0.0 : r.trace.back().objective) << '\n';
  }
}

void cmd_predict(const ExperimentConfig& cfg, std::ostream& log) {
  for (std::uint64_t seed : cfg.seeds) {
    const std::string dir = seed_dir(cfg, seed);
    const Task task = task_of(cfg);
    const Dataset train = read_dataset(require(dir, kTrain, "gen-data"), task);
    const Dataset test = read_dataset(require(dir, kTest, "gen-data"), task);
    const EmbeddingModel embedding{load_checkpoint(require(dir, kEmbedding, "pretrain"))};
    const InferenceNet net{load_checkpoint(require(dir, kInference, "fit"))};
    Rng rng(derive_seed(seed, "predict"));
    const PredictiveSummary s = predict(net, embedding, train, test.x, cfg.train.samples, rng);

    write_text(join_path(dir, kPredictions), csv_text([&](std::ostream& os) {
                 for (std::size_t j = 0; j < test.width(); ++j) os << 'x' << j << ',';
                 os << "pred_mean,pred_std\n";
                 for (std::size_t i = 0; i < test.size(); ++i) {
                   for (std::size_t j = 0; j < test.width(); ++j) os << format_double(test.x(i, j)) << ',';
                   os << format_double(s.mean[i]) << ',' << format_double(s.std[i]) << '\n';
                 }
               }));

    const std::vector<double> summary = aggregate(embed_all(embedding, train.x));
    const Matrix star = embed_all(embedding, test.x);
    write_text(join_path(dir, kPhi), csv_text([&](std::ostream& os) {
                 const std::size_t d = net.theta_dim();
                 os << "index";
                 for (std::size_t i = 0; i < d; ++i) os << ",mu_" << i;
                 for (std::size_t i = 0; i < d; ++i) os << ",logstd_" << i;
                 os << '\n';
                 for (std::size_t r = 0; r < star.rows; ++r) {
                   const VariationalParams phi = infer_phi(net, summary, star.row(r));
                   os << r;
                   for (double v : phi.mu) os << ',' << format_double(v);
                   for (double v : phi.log_std) os << ',' << format_double(v);
                   os << '\n';
                 }
               }));
    finish_stage(cfg, seed, dir, "predict", {kTrain, kTest, kEmbedding, kInference}, {kPredictions, kPhi});
    log << "predict seed " << seed << ": " << test.size() << " test points, S = " << cfg.train.samples << '\n';
  }
}

namespace {

struct SeedMetrics {
  std::vector<std::pair<std::string, double>> values;
};

SeedMetrics score(const ExperimentConfig& cfg, const Dataset& test, const CsvTable& preds) {
  if (preds.rows.size() != test.size())
    throw DimensionError("predictions have " + std::to_string(preds.rows.size()) + " rows, test set has " +
                         std::to_string(test.size()));
  const std::size_t cm = preds.column("pred_mean"), cs = preds.column("pred_std");
  std::vector<double> mean(test.size()), sd(test.size());
  for (std::size_t i = 0; i < test.size(); ++i) {
    const auto m = parse_double(preds.rows[i][cm]);
    const auto s = parse_double(preds.rows[i][cs]);
    if (!m || !s) throw ParseError("predictions row " + std::to_string(i + 1) + ": bad number");
    mean[i] = *m;
    sd[i] = *s;
  }
  SeedMetrics out;
  const MetricsBlock& mb = cfg.metrics;
  std::vector<double> x;
  if (test.width() == 1) x.assign(test.x.data.begin(), test.x.data.end());
  auto try_add = [&](const std::string& name, auto&& f) {
    try {
      out.values.push_back({name, f()});
    } catch (const InputError&) {
      // region empty for this split: metric omitted
    }
  };
  if (test.task == Task::regression) {
    out.values.push_back({"rmse", rmse(mean, test.y)});
    if (!x.empty()) {
      const double c = mb.extrap_from;
      try_add("spread_ratio", [&] {
        return spread_profile(sd, x, [c](double v) { return v > c; }, [c](double v) { return v <= c; });
      });
      std::vector<double> xs, ss;
      for (std::size_t i = 0; i < x.size(); ++i)
        if (x[i] > c) {
          xs.push_back(x[i]);
          ss.push_back(sd[i]);
        }
      if (xs.size() >= 2) out.values.push_back({"spearman_extrap", spearman(xs, ss)});
    }
  } else {
    out.values.push_back({"accuracy", accuracy(mean, test.y)});
    out.values.push_back({"ace", ace(mean, test.y, mb.ace_bins)});
    if (!x.empty()) {
      const double lo = mb.gap_lo, hi = mb.gap_hi;
      try_add("spread_ratio", [&] {
        return spread_profile(
            sd, x, [lo, hi](double v) { return v > lo && v < hi; }, [lo, hi](double v) { return v <= lo || v >= hi; });
      });
    }
  }
  return out;
}

}  // namespace

void cmd_eval(const ExperimentConfig& cfg, std::ostream& log) {
  std::vector<std::string> order;
  std::map<std::string, std::vector<double>> per_metric;
  for (std::uint64_t seed : cfg.seeds) {
    const std::string dir = seed_dir(cfg, seed);
    const Dataset test = read_dataset(require(dir, kTest, "gen-data"), task_of(cfg));
    std::ifstream is(require(dir, kPredictions, "predict"), std::ios::binary);
    const CsvTable preds = read_csv(is);
    const SeedMetrics m = score(cfg, test, preds);
    std::vector<MetricRow> rows;
    for (const auto& [name, v] : m.values) {
      rows.push_back(MetricRow{name, v, 0.0, 1});
      if (!per_metric.count(name)) order.push_back(name);
      per_metric[name].push_back(v);
    }
    write_text(join_path(dir, kMetrics), csv_text([&](std::ostream& os) { write_metrics_csv(os, rows); }));
    finish_stage(cfg, seed, dir, "eval", {kTest, kPredictions}, {kMetrics});
    for (const auto& r : rows) log << "eval seed " << seed << ": " << r.metric << " = " << format_double(r.value) << '\n';
  }
  std::vector<MetricRow> summary;
  for (const auto& name : order) summary.push_back(summarize(name, per_metric[name]));
  ensure_dir(cfg.out);
  write_text(join_path(cfg.out, kMetrics), csv_text([&](std::ostream& os) { write_metrics_csv(os, summary); }));
  for (const auto& r : summary)
    log << "eval " << r.metric << " = " << format_double(r.value) << " (" << format_double(r.stderr_) << ", "
        << r.n_seeds << " seeds)\n";
}

void cmd_envcheck(const ExperimentConfig& cfg, std::ostream& log) {
  const EnvCheckBlock& e = cfg.envcheck;
  const std::uint64_t seed = cfg.seeds.front();
  const EnvCheckReport rep =
      envcheck(BinnedDistribution{e.p}, BinnedDistribution{e.p_star}, e.eps, e.alpha, e.trials, seed);
  std::ostringstream os;
  auto line = [&](const char* mode, const EnvCheckRow& r) {
    os << std::left << std::setw(9) << mode << std::setw(4) << r.k << std::setw(6) << r.m << std::setw(14)
       << format_double(r.kl) << std::setw(24) << format_double(r.xi) << std::setw(12) << r.L
       << format_double(r.rate) << '\n';
  };
  os << std::left << std::setw(9) << "mode" << std::setw(4) << "k" << std::setw(6) << "m" << std::setw(14) << "KL"
     << std::setw(24) << "xi" << std::setw(12) << "required_L"
     << "success_rate\n";
  line("raw", rep.raw);
  if (rep.reduced_used) {
    line("reduced", rep.reduced);
    os << "support reduced: eps' = " << format_double(rep.eps_prime) << ", tolerance left "
       << format_double(rep.reduced.eps) << '\n';
  }
  os << "alpha = " << format_double(e.alpha) << ", eps = " << format_double(e.eps) << ", trials = " << e.trials
     << ", seed = " << seed << '\n';
  ensure_dir(cfg.out);
  write_text(join_path(cfg.out, "envcheck.txt"), os.str());
  log << os.str();
}

void cmd_prior_grid(const ExperimentConfig& cfg, std::ostream& log) {
  const PriorGridBlock& g = cfg.prior_grid;
  for (std::uint64_t seed : cfg.seeds) {
    const std::string dir = seed_dir(cfg, seed);
    ensure_dir(dir);
    const PriorExample ex = prior_example_covariates(g.n_train, g.n_test, g.test_x2_sd, derive_seed(seed, "data"));
    const Matrix none(0, 2);
    const Matrix train_only = prior_grid(ex.train_x, none, g.spec);
    const Matrix shifted = prior_grid(ex.train_x, ex.test_x, g.spec);
    write_text(join_path(dir, "prior_grid_train.csv"),
               csv_text([&](std::ostream& os) { write_prior_grid_csv(os, g.spec, train_only); }));
    write_text(join_path(dir, "prior_grid_shifted.csv"),
               csv_text([&](std::ostream& os) { write_prior_grid_csv(os, g.spec, shifted); }));

    const std::vector<std::array<double, 3>> bases{{0.0, 1.0, 0.0}, {1.0, -0.5, 2.0}, {-2.0, 1.5, -1.0}};
    const std::vector<double> shifts{-1.0, -0.25, 0.5, 2.0};
    const double gap_train = exchangeability_gap(ex.train_x, none, 0.5, bases, shifts);
    const double gap_shifted = exchangeability_gap(ex.train_x, ex.test_x, 0.5, bases, shifts);
    write_text(join_path(dir, "prior_grid_check.csv"), csv_text([&](std::ostream& os) {
                 os << "grid,exchangeability_gap\n";
                 os << "train," << format_double(gap_train) << '\n';
                 os << "shifted," << format_double(gap_shifted) << '\n';
               }));
    finish_stage(cfg, seed, dir, "prior-grid", {}, {"prior_grid_train.csv", "prior_grid_shifted.csv", "prior_grid_check.csv"},
                 {{"grid", std::to_string(g.spec.a.count) + "x" + std::to_string(g.spec.b.count)}});
    log << "prior-grid seed " << seed << ": " << g.spec.a.count << "x" << g.spec.b.count
        << " grids, exchangeability gap train " << format_double(gap_train) << ", shifted "
        << format_double(gap_shifted) << '\n';
  }
}

int run_command(const std::string& name, const Options& opts, std::ostream& out, std::ostream& err) {
  try {
    const ExperimentConfig cfg = resolve_config(opts);
    if (name == "gen-data") cmd_gen_data(cfg, out);
    else if (name == "pretrain") cmd_pretrain(cfg, out);
    else if (name == "fit") cmd_fit(cfg, out);
    else if (name == "predict") cmd_predict(cfg, out);
    else if (name == "eval") cmd_eval(cfg, out);
    else if (name == "envcheck") cmd_envcheck(cfg, out);
    else if (name == "prior-grid") cmd_prior_grid(cfg, out);
    else throw InputError("unknown command '" + name + "'");
    return 0;
  } catch (const Error& e) {
    std::string msg = e.what();
    for (char& c : msg)
      if (c == '\n' || c == '\r') c = ' ';
    err << "error stage=" << name << " kind=" << e.kind() << " message=" << std::quoted(msg) << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::string msg = e.what();
    for (char& c : msg)
      if (c == '\n' || c == '\r') c = ' ';
    err << "error stage=" << name << " kind=internal message=" << std::quoted(msg) << '\n';
    return 3;
  }
}

}  // namespace vids::cli
