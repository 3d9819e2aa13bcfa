#include "advlab/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include "advlab/error.hpp"

namespace advlab {

using nlohmann::json;

Quantity::Quantity(double v) : decimal_(v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  text_ = buf;
}

Quantity Quantity::parse(const std::string& text) {
  Quantity q;
  q.text_ = text;
  const auto slash = text.find('/');
  try {
    if (slash != std::string::npos) {
      std::size_t p1 = 0;
      std::size_t p2 = 0;
      const std::string a = text.substr(0, slash);
      const std::string b = text.substr(slash + 1);
      q.num_ = std::stoll(a, &p1);
      q.den_ = std::stoll(b, &p2);
      if (p1 != a.size() || p2 != b.size() || q.den_ <= 0) throw std::invalid_argument(text);
      q.rational_ = true;
    } else {
      std::size_t p = 0;
      q.decimal_ = std::stod(text, &p);
      if (p != text.size()) throw std::invalid_argument(text);
    }
  } catch (const std::exception&) {
    throw ConfigError("cannot parse quantity '" + text + "' (expected decimal or p/q)");
  }
  if (!std::isfinite(q.value())) throw ConfigError("quantity '" + text + "' is not finite");
  return q;
}

double Quantity::value() const {
  return rational_ ? static_cast<double>(num_) / static_cast<double>(den_) : decimal_;
}

json Quantity::to_json() const {
  if (rational_) return text_;
  return decimal_;
}

AttackSpec AttackEntry::to_spec() const {
  AttackSpec s;
  s.epsilon = epsilon.value();
  s.alpha = alpha.value();
  s.steps = steps;
  s.init = init;
  s.gaussian_std = gamma;
  s.loss = loss;
  s.clamp = clamp;
  return s;
}

namespace {

LossKind parse_loss(const std::string& text) {
  if (text == "ce") return LossKind::ce;
  if (text == "cw" || text == "cw_margin") return LossKind::cw_margin;
  if (text == "kl" || text == "kl_vs_natural") return LossKind::kl_vs_reference;
  throw ConfigError("unknown attack loss '" + text + "'");
}

// Walks one JSON object, remembering which keys were read so that leftovers
// can be reported as unknown.
class ObjectReader {
 public:
  ObjectReader(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) throw ConfigError(where() + "expected an object");
  }

  bool has(const std::string& key) const { return obj_.contains(key); }

  const json* get(const std::string& key) {
    seen_.insert(key);
    const auto it = obj_.find(key);
    return it == obj_.end() ? nullptr : &*it;
  }

  std::string child_path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  template <typename T>
  void read(const std::string& key, T& out) {
    const json* v = get(key);
    if (!v) return;
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!v->is_boolean()) throw ConfigError("expected a boolean");
      } else if constexpr (std::is_unsigned_v<T>) {
        if (!v->is_number_integer() || v->get<long long>() < 0) throw ConfigError("expected a non-negative integer");
      } else if constexpr (std::is_integral_v<T>) {
        if (!v->is_number_integer()) throw ConfigError("expected an integer");
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!v->is_number()) throw ConfigError("expected a number");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v->is_string()) throw ConfigError("expected a string");
      }
      out = v->get<T>();
    } catch (const ConfigError& e) {
      throw ConfigError(child_path(key) + ": " + e.what());
    } catch (const json::exception& e) {
      throw ConfigError(child_path(key) + ": " + e.what());
    }
  }

  Quantity quantity(const std::string& key, const Quantity& fallback) {
    const json* v = get(key);
    if (!v) return fallback;
    try {
      if (v->is_string()) return Quantity::parse(v->get<std::string>());
      if (v->is_number()) return Quantity(v->get<double>());
    } catch (const ConfigError& e) {
      throw ConfigError(child_path(key) + ": " + e.what());
    }
    throw ConfigError(child_path(key) + ": expected a number or \"p/q\" string");
  }

  void finish() const {
    for (auto it = obj_.begin(); it != obj_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError("unknown key '" + child_path(it.key()) + "'");
    }
  }

  std::string where() const { return path_.empty() ? "" : path_ + ": "; }

 private:
  const json& obj_;
  std::string path_;
  std::set<std::string> seen_;
};

template <typename F>
void with_object(ObjectReader& parent, const std::string& key, F&& fn) {
  if (const json* v = parent.get(key)) {
    ObjectReader r(*v, parent.child_path(key));
    fn(r);
    r.finish();
  }
}

AttackEntry parse_attack_entry(const json& v, const std::string& path, AttackEntry base) {
  ObjectReader r(v, path);
  r.read("name", base.name);
  base.epsilon = r.quantity("epsilon", base.epsilon);
  base.alpha = r.quantity("alpha", base.alpha);
  r.read("steps", base.steps);
  std::string init = std::string(to_string(base.init));
  r.read("init", init);
  r.read("gamma", base.gamma);
  std::string loss = std::string(to_string(base.loss));
  r.read("loss", loss);
  r.read("clamp", base.clamp);
  r.finish();
  try {
    base.init = parse_attack_init(init);
    base.loss = parse_loss(loss);
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return base;
}

LambdaPolicy parse_lambda(const json& v, const std::string& path) {
  if (v.is_number()) return LambdaPolicy::fixed(v.get<double>());
  ObjectReader r(v, path);
  std::string mode = "fixed";
  LambdaPolicy p;
  r.read("mode", mode);
  r.read("value", p.value);
  r.read("a", p.a);
  r.read("b", p.b);
  r.finish();
  if (mode == "fixed") p.mode = LambdaPolicy::Mode::fixed;
  else if (mode == "uniform") p.mode = LambdaPolicy::Mode::uniform;
  else if (mode == "beta") p.mode = LambdaPolicy::Mode::beta;
  else throw ConfigError(path + ".mode: unknown lambda mode '" + mode + "'");
  return p;
}

json lambda_json(const LambdaPolicy& p) {
  switch (p.mode) {
    case LambdaPolicy::Mode::fixed: return {{"mode", "fixed"}, {"value", p.value}};
    case LambdaPolicy::Mode::uniform: return {{"mode", "uniform"}};
    case LambdaPolicy::Mode::beta: return {{"mode", "beta"}, {"a", p.a}, {"b", p.b}};
  }
  return {};
}

json attack_json(const AttackEntry& a) {
  json j = {{"epsilon", a.epsilon.to_json()}, {"alpha", a.alpha.to_json()},
            {"steps", a.steps},               {"init", std::string(to_string(a.init))},
            {"gamma", a.gamma},               {"loss", std::string(to_string(a.loss))},
            {"clamp", a.clamp}};
  if (!a.name.empty()) j["name"] = a.name;
  return j;
}

}  // namespace

AttackEntry attack_preset(const std::string& name, const AttackEntry& train_attack) {
  AttackEntry e;
  e.name = name;
  e.epsilon = train_attack.epsilon;
  e.alpha = train_attack.alpha;
  std::string digits;
  if (name.rfind("pgd", 0) == 0) {
    e.loss = LossKind::ce;
    digits = name.substr(3);
  } else if (name.rfind("cw", 0) == 0) {
    e.loss = LossKind::cw_margin;
    digits = name.substr(2);
  } else {
    throw ConfigError("unknown attack preset '" + name + "' (expected pgd<K> or cw<K>)");
  }
  if (digits.empty() || digits.find_first_not_of("0123456789") != std::string::npos) {
    throw ConfigError("unknown attack preset '" + name + "'");
  }
  e.steps = std::stoi(digits);
  return e;
}

void ExperimentConfig::finalize() {
  train.attack = train_attack.to_spec();
  train.seed = seed;
  if (model.layer_sizes.size() < 2) throw ConfigError("model.layer_sizes: need at least two sizes");
  for (const auto s : model.layer_sizes) {
    if (s == 0) throw ConfigError("model.layer_sizes: sizes must be positive");
  }
  const auto& k = dataset.kind;
  if (k != "two_gaussians" && k != "rings" && k != "csv") {
    throw ConfigError("dataset.kind: unknown kind '" + k + "'");
  }
  if (k == "csv" && dataset.path.empty()) throw ConfigError("dataset.path: required for csv datasets");
  if (dataset.delimiter.size() != 1) throw ConfigError("dataset.delimiter: must be one character");
  if (!(dataset.test_fraction > 0.0 && dataset.test_fraction < 1.0)) {
    throw ConfigError("dataset.test_fraction: must lie in (0,1)");
  }
  train.validate();
  for (const auto& a : eval_attacks) {
    try {
      a.to_spec().validate();
    } catch (const ConfigError& e) {
      throw ConfigError("attack.eval." + a.name + ": " + e.what());
    }
  }
  if (probe.samples_per_segment < 3) throw ConfigError("probe.samples_per_segment: must be >= 3");
}

ExperimentConfig parse_experiment_config(const json& doc) {
  ExperimentConfig cfg;
  cfg.eval_attacks = {attack_preset("pgd20", cfg.train_attack), attack_preset("cw30", cfg.train_attack)};
  ObjectReader root(doc, "");
  root.read("seed", cfg.seed);

  with_object(root, "dataset", [&](ObjectReader& r) {
    auto& d = cfg.dataset;
    r.read("kind", d.kind);
    r.read("n_per_class", d.n_per_class);
    if (const json* c = r.get("centers")) {
      try {
        d.centers = c->get<std::array<Point2, 2>>();
      } catch (const json::exception&) {
        throw ConfigError("dataset.centers: expected [[x,y],[x,y]]");
      }
    }
    r.read("sigma", d.sigma);
    if (const json* rr = r.get("radii")) {
      try {
        d.radii = rr->get<std::array<double, 2>>();
      } catch (const json::exception&) {
        throw ConfigError("dataset.radii: expected [inner, outer]");
      }
    }
    r.read("noise", d.noise);
    r.read("path", d.path);
    r.read("test_path", d.test_path);
    r.read("label_column", d.label_column);
    r.read("delimiter", d.delimiter);
    r.read("header", d.header);
    r.read("test_fraction", d.test_fraction);
    r.read("pca_dims", d.pca_dims);
    if (const json* s = r.get("seed")) {
      if (!s->is_number_unsigned()) throw ConfigError("dataset.seed: expected a non-negative integer");
      d.seed = s->get<std::uint64_t>();
    }
  });

  with_object(root, "model", [&](ObjectReader& r) {
    r.read("layer_sizes", cfg.model.layer_sizes);
    std::string act = std::string(to_string(cfg.model.activation));
    r.read("activation", act);
    try {
      cfg.model.activation = parse_activation(act);
    } catch (const ConfigError& e) {
      throw ConfigError(std::string("model.activation: ") + e.what());
    }
  });

  with_object(root, "attack", [&](ObjectReader& r) {
    if (const json* t = r.get("train")) cfg.train_attack = parse_attack_entry(*t, "attack.train", cfg.train_attack);
    // Presets follow the (possibly overridden) training eps/alpha.
    cfg.eval_attacks = {attack_preset("pgd20", cfg.train_attack), attack_preset("cw30", cfg.train_attack)};
    if (const json* e = r.get("eval")) {
      if (!e->is_array()) throw ConfigError("attack.eval: expected an array");
      cfg.eval_attacks.clear();
      for (std::size_t i = 0; i < e->size(); ++i) {
        const json& item = (*e)[i];
        const std::string path = "attack.eval[" + std::to_string(i) + "]";
        if (item.is_string()) {
          cfg.eval_attacks.push_back(attack_preset(item.get<std::string>(), cfg.train_attack));
        } else {
          AttackEntry base = cfg.train_attack;
          base.init = AttackInit::natural;
          AttackEntry a = parse_attack_entry(item, path, base);
          if (a.name.empty()) a.name = "attack" + std::to_string(i);
          cfg.eval_attacks.push_back(a);
        }
      }
    }
  });

  with_object(root, "train", [&](ObjectReader& r) {
    auto& t = cfg.train;
    std::string algo = std::string(to_string(t.algorithm));
    r.read("algorithm", algo);
    try {
      t.algorithm = parse_algorithm(algo);
    } catch (const ConfigError& e) {
      throw ConfigError(std::string("train.algorithm: ") + e.what());
    }
    r.read("epochs", t.epochs);
    r.read("m", t.m);
    r.read("m_prime", t.m_prime);
    r.read("batches_per_epoch", t.batches_per_epoch);
    if (const json* l = r.get("lambda")) {
      if (!l->is_null()) t.lambda = parse_lambda(*l, "train.lambda");
    }
    r.read("burn_in_epochs", t.burn_in_epochs);
    r.read("lr", t.schedule.initial);
    r.read("milestones", t.schedule.milestones);
    r.read("lr_decay", t.schedule.decay);
    r.read("momentum", t.momentum);
    r.read("weight_decay", t.weight_decay);
    r.read("trades_beta", t.trades_beta);
    r.read("trades_gamma", t.trades_gamma);
    r.read("cross_class_only", t.cross_class_only);
    r.read("threads", t.threads);
  });

  with_object(root, "output", [&](ObjectReader& r) {
    auto& o = cfg.output;
    r.read("dir", o.dir);
    r.read("metrics", o.metrics);
    r.read("best_checkpoint", o.best_checkpoint);
    r.read("last_checkpoint", o.last_checkpoint);
    r.read("resolved_config", o.resolved_config);
    r.read("dataset_snapshot", o.dataset_snapshot);
  });

  with_object(root, "probe", [&](ObjectReader& r) {
    r.read("segments", cfg.probe.segments);
    r.read("samples_per_segment", cfg.probe.samples_per_segment);
    r.read("grid_resolution", cfg.probe.grid_resolution);
  });

  root.finish();
  cfg.finalize();
  return cfg;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return parse_experiment_config(doc);
}

json resolved_config_json(const ExperimentConfig& c) {
  json j;
  j["seed"] = c.seed;
  const auto& d = c.dataset;
  j["dataset"] = {{"kind", d.kind},
                  {"n_per_class", d.n_per_class},
                  {"centers", d.centers},
                  {"sigma", d.sigma},
                  {"radii", d.radii},
                  {"noise", d.noise},
                  {"path", d.path},
                  {"test_path", d.test_path},
                  {"label_column", d.label_column},
                  {"delimiter", d.delimiter},
                  {"header", d.header},
                  {"test_fraction", d.test_fraction},
                  {"pca_dims", d.pca_dims}};
  if (d.seed) j["dataset"]["seed"] = *d.seed;
  j["model"] = {{"layer_sizes", c.model.layer_sizes}, {"activation", std::string(to_string(c.model.activation))}};
  json eval = json::array();
  for (const auto& a : c.eval_attacks) eval.push_back(attack_json(a));
  j["attack"] = {{"train", attack_json(c.train_attack)}, {"eval", eval}};
  const auto& t = c.train;
  j["train"] = {{"algorithm", std::string(to_string(t.algorithm))},
                {"epochs", t.epochs},
                {"m", t.m},
                {"m_prime", t.m_prime},
                {"batches_per_epoch", t.batches_per_epoch},
                {"lambda", lambda_json(t.effective_lambda())},
                {"burn_in_epochs", t.burn_in_epochs},
                {"lr", t.schedule.initial},
                {"milestones", t.schedule.milestones},
                {"lr_decay", t.schedule.decay},
                {"momentum", t.momentum},
                {"weight_decay", t.weight_decay},
                {"trades_beta", t.trades_beta},
                {"trades_gamma", t.trades_gamma},
                {"cross_class_only", t.cross_class_only},
                {"threads", t.threads}};
  const auto& o = c.output;
  j["output"] = {{"dir", o.dir},
                 {"metrics", o.metrics},
                 {"best_checkpoint", o.best_checkpoint},
                 {"last_checkpoint", o.last_checkpoint},
                 {"resolved_config", o.resolved_config},
                 {"dataset_snapshot", o.dataset_snapshot}};
  j["probe"] = {{"segments", c.probe.segments},
                {"samples_per_segment", c.probe.samples_per_segment},
                {"grid_resolution", c.probe.grid_resolution}};
  return j;
}

Materialized materialize_datasets(const ExperimentConfig& config) {
  const auto& d = config.dataset;
  const std::uint64_t seed = d.seed.value_or(config.seed);
  Materialized out;
  out.snapshot = {{"kind", d.kind}, {"seed", seed}, {"test_fraction", d.test_fraction}, {"pca_dims", d.pca_dims}};
  Dataset full;
  bool have_test = false;
  if (d.kind == "two_gaussians") {
    full = gen_two_gaussians(d.n_per_class, d.centers, d.sigma, seed);
    out.snapshot["n_per_class"] = d.n_per_class;
    out.snapshot["centers"] = d.centers;
    out.snapshot["sigma"] = d.sigma;
  } else if (d.kind == "rings") {
    full = gen_rings(d.n_per_class, d.radii, d.noise, seed);
    out.snapshot["n_per_class"] = d.n_per_class;
    out.snapshot["radii"] = d.radii;
    out.snapshot["noise"] = d.noise;
  } else {
    CsvOptions opts;
    opts.delimiter = d.delimiter[0];
    opts.header = d.header;
    // Width is unknown until the file is read; resolve negative indices after a peek.
    std::ifstream peek(d.path);
    if (!peek) throw ValidationError("cannot open CSV file " + d.path);
    std::string line;
    if (d.header) std::getline(peek, line);
    std::getline(peek, line);
    const auto width = static_cast<long long>(std::count(line.begin(), line.end(), opts.delimiter) + 1);
    const long long col = d.label_column < 0 ? width + d.label_column : d.label_column;
    if (col < 0 || col >= width) throw ConfigError("dataset.label_column: out of range");
    opts.label_column = static_cast<std::size_t>(col);
    auto train_csv = load_csv(d.path, opts);
    full = std::move(train_csv.data);
    out.snapshot["path"] = d.path;
    out.snapshot["label_column"] = col;
    out.snapshot["normalization"] = {{"min", train_csv.normalization.min}, {"max", train_csv.normalization.max}};
    if (!d.test_path.empty()) {
      auto test_csv = load_csv(d.test_path, opts, train_csv.normalization, full.num_classes);
      out.train = std::move(full);
      out.test = std::move(test_csv.data);
      out.test.split = Split::test;
      out.snapshot["test_path"] = d.test_path;
      have_test = true;
    }
  }
  if (!have_test) {
    auto [tr, te] = split(full, d.test_fraction, seed);
    out.train = std::move(tr);
    out.test = std::move(te);
  }
  if (d.pca_dims > 0) {
    // Basis fitted on the training split; the test split reuses it.
    const auto pca = pca_project(out.train, d.pca_dims);
    out.train = pca.projected;
    Dataset projected_test;
    projected_test.dim = d.pca_dims;
    projected_test.num_classes = out.test.num_classes;
    projected_test.split = Split::test;
    for (const auto& s : out.test.samples) {
      LabeledSample p = s;
      p.features.assign(d.pca_dims, 0.0);
      for (std::size_t k = 0; k < d.pca_dims; ++k) {
        double acc = 0.0;
        for (std::size_t c = 0; c < s.features.size(); ++c) acc += (s.features[c] - pca.mean[c]) * pca.basis(k, c);
        p.features[k] = pca.output_normalization.apply(k, acc);
      }
      projected_test.samples.push_back(std::move(p));
    }
    out.test = std::move(projected_test);
    out.snapshot["pca_explained_variance_ratio"] = pca.explained_variance_ratio;
  }
  out.snapshot["train_size"] = out.train.size();
  out.snapshot["test_size"] = out.test.size();
  return out;
}

}  // namespace advlab
