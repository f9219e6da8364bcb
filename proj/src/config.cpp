#include "vids/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <openssl/evp.h>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "vids/csv.hpp"
#include "vids/error.hpp"

namespace vids {

std::string_view task_kind_name(TaskKind k) {
  switch (k) {
    case TaskKind::hetero: return "hetero";
    case TaskKind::logistic_gap: return "logistic_gap";
    case TaskKind::csv: return "csv";
  }
  return "?";
}

TaskKind parse_task_kind(std::string_view name) {
  if (name == "hetero") return TaskKind::hetero;
  if (name == "logistic_gap") return TaskKind::logistic_gap;
  if (name == "csv") return TaskKind::csv;
  throw ConfigError("unknown task kind '" + std::string(name) + "' (expected hetero, logistic_gap or csv)");
}

std::string_view fit_mode_name(FitMode m) { return m == FitMode::environments ? "environments" : "transductive"; }

FitMode parse_fit_mode(std::string_view name) {
  if (name == "environments") return FitMode::environments;
  if (name == "transductive") return FitMode::transductive;
  throw ConfigError("unknown fit mode '" + std::string(name) + "'");
}

namespace {

struct Binding {
  std::string section;
  std::string key;
  std::function<void(const std::string&)> set;
  std::function<std::string()> get;
};

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t");
  const auto e = s.find_last_not_of(" \t\r");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double to_double(const std::string& where, const std::string& v) {
  const auto d = parse_double(v);
  if (!d) throw ConfigError(where + ": expected a number, got '" + v + "'");
  return *d;
}

template <class T>
T to_unsigned(const std::string& where, const std::string& v) {
  const std::string t = trim(v);
  T out{};
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size())
    throw ConfigError(where + ": expected a non-negative integer, got '" + v + "'");
  return out;
}

bool to_bool(const std::string& where, const std::string& v) {
  const std::string t = trim(v);
  if (t == "true" || t == "1" || t == "yes") return true;
  if (t == "false" || t == "0" || t == "no") return false;
  throw ConfigError(where + ": expected true or false, got '" + v + "'");
}

std::string from_bool(bool b) { return b ? "true" : "false"; }

template <class T>
std::string join(const std::vector<T>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    if constexpr (std::is_floating_point_v<T>)
      out += format_double(v[i]);
    else
      out += std::to_string(v[i]);
  }
  return out;
}

std::vector<Binding> bindings(ExperimentConfig& c) {
  std::vector<Binding> b;
  auto num = [&](std::string s, std::string k, double& ref) {
    b.push_back({s, k, [&ref, w = s + "." + k](const std::string& v) { ref = to_double(w, v); },
                 [&ref] { return format_double(ref); }});
  };
  auto count = [&](std::string s, std::string k, std::size_t& ref) {
    b.push_back({s, k, [&ref, w = s + "." + k](const std::string& v) { ref = to_unsigned<std::size_t>(w, v); },
                 [&ref] { return std::to_string(ref); }});
  };
  auto flag = [&](std::string s, std::string k, bool& ref) {
    b.push_back({s, k, [&ref, w = s + "." + k](const std::string& v) { ref = to_bool(w, v); },
                 [&ref] { return from_bool(ref); }});
  };
  auto text = [&](std::string s, std::string k, std::string& ref) {
    b.push_back({s, k, [&ref](const std::string& v) { ref = trim(v); }, [&ref] { return ref; }});
  };
  auto counts = [&](std::string s, std::string k, std::vector<std::size_t>& ref) {
    b.push_back({s, k,
                 [&ref, w = s + "." + k](const std::string& v) {
                   ref.clear();
                   for (const auto& item : split_list(v)) ref.push_back(to_unsigned<std::size_t>(w, item));
                 },
                 [&ref] { return join(ref); }});
  };
  auto reals = [&](std::string s, std::string k, std::vector<double>& ref) {
    b.push_back({s, k,
                 [&ref, w = s + "." + k](const std::string& v) {
                   ref.clear();
                   for (const auto& item : split_list(v)) ref.push_back(to_double(w, item));
                 },
                 [&ref] { return join(ref); }});
  };
  auto maybe = [&](std::string s, std::string k, std::optional<double>& ref) {
    b.push_back({s, k,
                 [&ref, w = s + "." + k](const std::string& v) {
                   if (trim(v) == "auto")
                     ref.reset();
                   else
                     ref = to_double(w, v);
                 },
                 [&ref] { return ref ? format_double(*ref) : std::string("auto"); }});
  };

  TaskBlock& t = c.task;
  b.push_back({"task", "kind", [&t](const std::string& v) { t.kind = parse_task_kind(trim(v)); },
               [&t] { return std::string(task_kind_name(t.kind)); }});
  count("task", "n_train", t.n_train);
  count("task", "n_test", t.n_test);
  num("task", "a", t.a);
  num("task", "b", t.b);
  num("task", "beta", t.beta);
  b.push_back({"task", "noise_scale", [&t](const std::string& v) { t.noise_scale = parse_noise_scale(trim(v)); },
               [&t] { return std::string(noise_scale_name(t.noise_scale)); }});
  num("task", "t", t.t);
  text("task", "csv_path", t.csv_path);
  text("task", "target", t.target);
  b.push_back({"task", "csv_task", [&t](const std::string& v) { t.csv_task = parse_task(trim(v)); },
               [&t] { return std::string(task_name(t.csv_task)); }});
  flag("task", "standardize", t.standardize);
  count("task", "split_k", t.split.K);
  num("task", "split_ratio", t.split.train_majority_ratio);
  count("task", "split_train_size", t.split.train_size);
  count("task", "split_test_size", t.split.test_size);

  ModelBlock& m = c.model;
  counts("model", "hidden", m.hidden);
  b.push_back({"model", "activation", [&m](const std::string& v) { m.activation = parse_activation(trim(v)); },
               [&m] { return std::string(activation_name(m.activation)); }});
  count("model", "pretrain_epochs", m.pretrain_epochs);
  num("model", "pretrain_lr", m.pretrain_lr);

  TrainConfig& tr = c.train;
  b.push_back({"train", "mode", [&c](const std::string& v) { c.mode = parse_fit_mode(trim(v)); },
               [&c] { return std::string(fit_mode_name(c.mode)); }});
  count("train", "environments", tr.environments);
  count("train", "n", tr.n);
  count("train", "m", tr.m);
  num("train", "tau", tr.tau);
  num("train", "lambda", tr.lambda);
  num("train", "lr", tr.lr);
  count("train", "iterations", tr.iterations);
  count("train", "samples", tr.samples);
  flag("train", "fixed_envs", tr.fixed_envs);
  flag("train", "analytic_entropy", tr.analytic_entropy);
  flag("train", "normalize_gradient", tr.normalize_gradient);
  counts("train", "inference_hidden", tr.inference_hidden);
  num("train", "init_log_std", tr.init_log_std);

  PriorBlock& p = c.prior;
  count("prior", "r", p.r);
  num("prior", "margin", p.margin);
  maybe("prior", "y_min", p.y_min);
  maybe("prior", "y_max", p.y_max);

  MetricsBlock& mt = c.metrics;
  count("metrics", "ace_bins", mt.ace_bins);
  num("metrics", "gap_lo", mt.gap_lo);
  num("metrics", "gap_hi", mt.gap_hi);
  num("metrics", "extrap_from", mt.extrap_from);

  PriorGridBlock& g = c.prior_grid;
  count("prior_grid", "a_coef", g.spec.a.coef);
  num("prior_grid", "a_lo", g.spec.a.lo);
  num("prior_grid", "a_hi", g.spec.a.hi);
  count("prior_grid", "a_count", g.spec.a.count);
  count("prior_grid", "b_coef", g.spec.b.coef);
  num("prior_grid", "b_lo", g.spec.b.lo);
  num("prior_grid", "b_hi", g.spec.b.hi);
  count("prior_grid", "b_count", g.spec.b.count);
  count("prior_grid", "fixed_coef", g.spec.fixed_coef);
  num("prior_grid", "fixed_value", g.spec.fixed_value);
  count("prior_grid", "n_train", g.n_train);
  count("prior_grid", "n_test", g.n_test);
  num("prior_grid", "test_x2_sd", g.test_x2_sd);

  EnvCheckBlock& e = c.envcheck;
  reals("envcheck", "p", e.p);
  reals("envcheck", "p_star", e.p_star);
  num("envcheck", "eps", e.eps);
  num("envcheck", "alpha", e.alpha);
  count("envcheck", "trials", e.trials);

  text("run", "out", c.out);
  b.push_back({"run", "seeds",
               [&c](const std::string& v) {
                 c.seeds.clear();
                 for (const auto& item : split_list(v)) c.seeds.push_back(to_unsigned<std::uint64_t>("run.seeds", item));
               },
               [&c] { return join(c.seeds); }});
  return b;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (task.n_train < 1 || task.n_test < 1) throw ConfigError("task: n_train and n_test must be positive");
  if (task.kind == TaskKind::hetero && !(task.a > 0.0 && task.a < task.b))
    throw ConfigError("task: need 0 < a < b");
  if (task.kind == TaskKind::logistic_gap && !(task.t > 0.0 && task.t < 0.5))
    throw ConfigError("task: need 0 < t < 0.5");
  if (task.kind == TaskKind::csv && (task.csv_path.empty() || task.target.empty()))
    throw ConfigError("task: csv needs csv_path and target");
  if (model.hidden.empty() || std::find(model.hidden.begin(), model.hidden.end(), 0) != model.hidden.end())
    throw ConfigError("model: hidden widths must be positive");
  if (model.activation == Activation::sigmoid) throw ConfigError("model: activation must be relu or identity");
  if (!(model.pretrain_lr > 0.0)) throw ConfigError("model: pretrain_lr must be positive");
  train.validate();
  if (prior.r < 1) throw ConfigError("prior: r must be at least 1");
  if (prior.y_min.has_value() != prior.y_max.has_value())
    throw ConfigError("prior: set both y_min and y_max or neither");
  if (prior.y_min && !(*prior.y_min < *prior.y_max)) throw ConfigError("prior: need y_min < y_max");
  if (metrics.ace_bins < 1) throw ConfigError("metrics: ace_bins must be at least 1");
  if (!(metrics.gap_lo < metrics.gap_hi)) throw ConfigError("metrics: need gap_lo < gap_hi");
  if (seeds.empty()) throw ConfigError("run: at least one seed is required");
  if (envcheck.trials < 1) throw ConfigError("envcheck: trials must be positive");
}

ExperimentConfig parse_config(std::istream& is) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config line ") + std::to_string(e.line()) + ": " + e.message());
  }
  ExperimentConfig cfg;
  std::vector<Binding> b = bindings(cfg);
  std::map<std::pair<std::string, std::string>, Binding*> index;
  for (Binding& x : b) index[{x.section, x.key}] = &x;
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty())
      throw ConfigError("config: key '" + section + "' outside a section");
    for (const auto& [key, value] : body) {
      const auto it = index.find({section, key});
      if (it == index.end()) throw ConfigError("config: unknown key '" + section + "." + key + "'");
      it->second->set(value.data());
    }
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config '" + path + "'");
  return parse_config(is);
}

std::string canonical_config(const ExperimentConfig& cfg) {
  ExperimentConfig copy = cfg;
  std::ostringstream os;
  std::string section;
  for (const Binding& x : bindings(copy)) {
    if (x.section != section) {
      if (!section.empty()) os << '\n';
      section = x.section;
      os << '[' << section << "]\n";
    }
    os << x.key << " = " << x.get() << '\n';
  }
  return os.str();
}

std::string config_hash(const ExperimentConfig& cfg) {
  // output location and seed list do not change what a seed computes
  ExperimentConfig c = cfg;
  c.out.clear();
  c.seeds.clear();
  const std::string text = canonical_config(c);
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(text.data(), text.size(), md, &len, EVP_sha256(), nullptr);
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

PretrainConfig pretrain_config(const ExperimentConfig& cfg, std::uint64_t seed) {
  PretrainConfig p;
  p.hidden = cfg.model.hidden;
  p.activation = cfg.model.activation;
  p.epochs = cfg.model.pretrain_epochs;
  p.lr = cfg.model.pretrain_lr;
  p.seed = derive_seed(seed, "pretrain");
  return p;
}

PriorConfig prior_config(const ExperimentConfig& cfg, const Dataset& train) {
  PriorConfig p = default_prior_config(train, cfg.prior.r);
  if (cfg.prior.y_min) {
    p.y_min = *cfg.prior.y_min;
    p.y_max = *cfg.prior.y_max;
  } else if (train.task == Task::regression) {
    const auto [lo, hi] = std::minmax_element(train.y.begin(), train.y.end());
    p.y_min = *lo - cfg.prior.margin;
    p.y_max = *hi + cfg.prior.margin;
  }
  p.validate();
  return p;
}

}  // namespace vids
