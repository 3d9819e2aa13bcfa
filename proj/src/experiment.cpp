#include "advlab/experiment.hpp"

#include <cstdio>
#include <fstream>
#include <mutex>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include "advlab/checkpoint.hpp"
#include "advlab/error.hpp"
#include "advlab/metrics.hpp"
#include "advlab/parallel.hpp"

namespace advlab {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string short_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

std::string real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("write failed for " + path.string());
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void check_model_shape(const ExperimentConfig& config, const MlpModel& model, std::size_t dim,
                       std::size_t classes) {
  if (model.layer_sizes != config.model.layer_sizes) {
    std::ostringstream msg;
    msg << "checkpoint layer sizes [";
    for (std::size_t i = 0; i < model.layer_sizes.size(); ++i) msg << (i ? "," : "") << model.layer_sizes[i];
    msg << "] do not match model.layer_sizes [";
    for (std::size_t i = 0; i < config.model.layer_sizes.size(); ++i) {
      msg << (i ? "," : "") << config.model.layer_sizes[i];
    }
    msg << "]";
    throw ValidationError(msg.str());
  }
  if (model.activation != config.model.activation) {
    throw ValidationError("checkpoint activation " + std::string(to_string(model.activation)) +
                          " does not match model.activation " +
                          std::string(to_string(config.model.activation)));
  }
  if (model.input_dim() != dim) {
    throw ValidationError("model input dim " + std::to_string(model.input_dim()) + " does not match data dim " +
                          std::to_string(dim));
  }
  if (model.num_classes() != classes) {
    throw ValidationError("model has " + std::to_string(model.num_classes()) + " outputs but data has " +
                          std::to_string(classes) + " classes");
  }
}

template <typename F>
int guarded(std::ostream& err, F&& fn) {
  try {
    fn();
    return 0;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace

ExperimentConfig load_with_overrides(const CommandOptions& options) {
  ExperimentConfig config = load_experiment_config(options.config);
  if (options.seed) config.seed = *options.seed;
  if (options.out) config.output.dir = *options.out;
  config.finalize();
  return config;
}

std::vector<NamedAttack> named_eval_attacks(const ExperimentConfig& config) {
  std::vector<NamedAttack> attacks;
  for (const auto& a : config.eval_attacks) attacks.push_back({a.name, a.to_spec()});
  return attacks;
}

TrainOutcome train_experiment(const ExperimentConfig& config, std::ostream& log, bool quiet) {
  TrainOutcome outcome;
  outcome.dir = config.output.dir;
  fs::create_directories(outcome.dir);
  write_text(outcome.dir / config.output.resolved_config, resolved_config_json(config).dump(2) + "\n");

  const Materialized data = materialize_datasets(config);
  write_text(outcome.dir / config.output.dataset_snapshot, data.snapshot.dump(2) + "\n");

  MlpModel initial = init_model(config.model.layer_sizes, config.model.activation, config.seed);
  check_model_shape(config, initial, data.train.dim, data.train.num_classes);

  std::ofstream csv(outcome.dir / config.output.metrics, std::ios::binary);
  if (!csv) throw Error("cannot write " + (outcome.dir / config.output.metrics).string());
  csv << kMetricsHeader << "\n" << std::flush;

  TrainingHooks hooks;
  hooks.eval_attacks = named_eval_attacks(config);
  hooks.on_epoch = [&](const EpochMetrics& m) {
    outcome.final_row = format_metrics_row(m);
    csv << outcome.final_row << "\n" << std::flush;
    if (!quiet) {
      log << "epoch " << m.epoch << "/" << config.train.epochs << "  loss " << m.mean_train_loss << "  nat "
          << m.natural_test_acc;
      for (const auto& [name, acc] : m.robust_test_acc) log << "  " << name << " " << acc;
      log << "  att_orig " << m.attackable_ratio_original << "  |A| " << m.attackable_set_size << "\n";
    }
  };

  outcome.result = run_training(config.train, initial, data.train, data.test, hooks);
  csv.close();
  save_checkpoint(outcome.dir / config.output.best_checkpoint, outcome.result.best_model);
  save_checkpoint(outcome.dir / config.output.last_checkpoint, outcome.result.final_model);
  return outcome;
}

EvalReport evaluate_model(const ExperimentConfig& config, const MlpModel& model, const Dataset& test) {
  check_model_shape(config, model, test.dim, test.num_classes);
  EvalReport report;
  report.natural = eval_natural(model, test);
  for (const auto& a : named_eval_attacks(config)) {
    report.robust.emplace_back(a.name, eval_robust(model, test, a.spec, config.train.threads));
  }
  return report;
}

std::vector<ProbeOutput> probe_models(const ExperimentConfig& config, const std::vector<fs::path>& checkpoints,
                                      const fs::path& out_dir, std::ostream& log) {
  if (checkpoints.empty()) throw ValidationError("probe needs at least one checkpoint");
  std::vector<MlpModel> models;
  for (const auto& path : checkpoints) models.push_back(load_checkpoint(path));
  for (std::size_t i = 1; i < models.size(); ++i) {
    if (models[i].input_dim() != models[0].input_dim()) {
      throw ValidationError("checkpoints disagree on input dim: " + checkpoints[0].string() + " has " +
                            std::to_string(models[0].input_dim()) + ", " + checkpoints[i].string() + " has " +
                            std::to_string(models[i].input_dim()));
    }
  }
  const Materialized data = materialize_datasets(config);
  if (models[0].input_dim() != data.test.dim) {
    throw ValidationError("checkpoint input dim " + std::to_string(models[0].input_dim()) +
                          " does not match data dim " + std::to_string(data.test.dim));
  }
  const auto segments = default_probe_segments(data.test, config.probe.segments, config.seed);
  const bool grid = models[0].input_dim() == 2;
  if (!grid) {
    log << "notice: input dim is " << models[0].input_dim() << ", confidence grids skipped\n";
  }
  fs::create_directories(out_dir);
  const GridBounds bounds;  // features live in [0,1]^2 for every model
  std::vector<ProbeOutput> outputs;
  for (std::size_t i = 0; i < models.size(); ++i) {
    ProbeOutput o;
    o.checkpoint = checkpoints[i];
    o.report = linearity_probe(models[i], segments, config.probe.samples_per_segment);
    const std::string stem = "model" + std::to_string(i) + "_" + checkpoints[i].stem().string();
    o.report_path = out_dir / (stem + ".linearity.txt");
    {
      std::ofstream f(o.report_path, std::ios::binary);
      write_linearity_report(f, o.report);
      if (!f) throw Error("cannot write " + o.report_path.string());
    }
    if (grid) {
      const auto g = confidence_grid(models[i], bounds, config.probe.grid_resolution, config.probe.grid_resolution);
      o.grid_path = out_dir / (stem + ".grid.csv");
      std::ofstream f(*o.grid_path, std::ios::binary);
      write_grid(f, g);
      if (!f) throw Error("cannot write " + o.grid_path->string());
    }
    outputs.push_back(std::move(o));
  }
  return outputs;
}

SweepPlan parse_sweep(const json& doc, const fs::path& base_dir) {
  if (!doc.is_object()) throw ConfigError("sweep: expected an object");
  static const std::set<std::string> known{"base", "base_config", "axes", "seeds", "out", "parallel_cells"};
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    if (!known.count(it.key())) throw ConfigError("unknown key '" + it.key() + "'");
  }
  SweepPlan plan;
  if (doc.contains("base") && doc.contains("base_config")) {
    throw ConfigError("sweep: give either base or base_config, not both");
  }
  if (doc.contains("base")) {
    plan.base = doc["base"];
  } else if (doc.contains("base_config")) {
    if (!doc["base_config"].is_string()) throw ConfigError("base_config: expected a path string");
    fs::path p = doc["base_config"].get<std::string>();
    if (p.is_relative()) p = base_dir / p;
    plan.base = read_json(p);
  } else {
    plan.base = json::object();
  }
  if (!plan.base.is_object()) throw ConfigError("base: expected an object");

  plan.out_dir = "runs/sweep";
  if (doc.contains("out")) {
    if (!doc["out"].is_string()) throw ConfigError("out: expected a string");
    plan.out_dir = doc["out"].get<std::string>();
  }
  if (doc.contains("parallel_cells")) {
    if (!doc["parallel_cells"].is_boolean()) throw ConfigError("parallel_cells: expected a boolean");
    plan.parallel_cells = doc["parallel_cells"].get<bool>();
  }

  // Each axis is a list of (label, overrides) choices; an absent axis has one
  // empty choice so the product degenerates to the baseline.
  using Choice = std::pair<std::string, json>;
  std::vector<std::vector<Choice>> axes;
  const json axes_doc = doc.value("axes", json::object());
  if (!axes_doc.is_object()) throw ConfigError("axes: expected an object");
  static const std::set<std::string> known_axes{"lambda", "ratio", "burn_in", "algorithm"};
  for (auto it = axes_doc.begin(); it != axes_doc.end(); ++it) {
    if (!known_axes.count(it.key())) throw ConfigError("unknown key 'axes." + it.key() + "'");
    if (!it.value().is_array()) throw ConfigError("axes." + it.key() + ": expected an array");
  }
  auto axis = [&](const std::string& key, auto make) {
    std::vector<Choice> choices;
    if (axes_doc.contains(key)) {
      const json& values = axes_doc[key];
      for (std::size_t i = 0; i < values.size(); ++i) choices.push_back(make(values[i], "axes." + key + "[" + std::to_string(i) + "]"));
    }
    if (!choices.empty()) axes.push_back(std::move(choices));
  };
  axis("algorithm", [](const json& v, const std::string& path) -> Choice {
    if (!v.is_string()) throw ConfigError(path + ": expected an algorithm name");
    parse_algorithm(v.get<std::string>());
    return {"alg-" + v.get<std::string>(), {{"train", {{"algorithm", v}}}}};
  });
  axis("lambda", [](const json& v, const std::string& path) -> Choice {
    if (!v.is_number()) throw ConfigError(path + ": expected a number");
    return {"lambda-" + short_real(v.get<double>()), {{"train", {{"lambda", v}}}}};
  });
  axis("ratio", [](const json& v, const std::string& path) -> Choice {
    if (!v.is_array() || v.size() != 2 || !v[0].is_number_unsigned() || !v[1].is_number_unsigned()) {
      throw ConfigError(path + ": expected [m, m_prime]");
    }
    return {"m-" + std::to_string(v[0].get<std::size_t>()) + "-" + std::to_string(v[1].get<std::size_t>()),
            {{"train", {{"m", v[0]}, {"m_prime", v[1]}}}}};
  });
  axis("burn_in", [](const json& v, const std::string& path) -> Choice {
    if (!v.is_number_integer() || v.get<long long>() < 0) throw ConfigError(path + ": expected epochs >= 0");
    return {"burnin-" + std::to_string(v.get<long long>()), {{"train", {{"burn_in_epochs", v}}}}};
  });

  std::vector<Choice> seeds;
  if (doc.contains("seeds")) {
    const json& s = doc["seeds"];
    if (!s.is_array()) throw ConfigError("seeds: expected an array");
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (!s[i].is_number_unsigned()) throw ConfigError("seeds[" + std::to_string(i) + "]: expected a seed");
      seeds.push_back({"seed-" + std::to_string(s[i].get<std::uint64_t>()), {{"seed", s[i]}}});
    }
  }
  if (!seeds.empty()) axes.push_back(std::move(seeds));

  std::vector<Choice> cells{{"", json::object()}};
  for (const auto& choices : axes) {
    std::vector<Choice> next;
    for (const auto& [label, patch] : cells) {
      for (const auto& [clabel, cpatch] : choices) {
        json merged = patch;
        merged.merge_patch(cpatch);
        next.push_back({label.empty() ? clabel : label + "_" + clabel, merged});
      }
    }
    cells = std::move(next);
  }
  for (std::size_t i = 0; i < cells.size(); ++i) {
    char idx[32];
    std::snprintf(idx, sizeof idx, "cell%03zu", i);
    const std::string name = cells[i].first.empty() ? std::string(idx) + "_baseline" : std::string(idx) + "_" + cells[i].first;
    plan.cells.push_back({name, cells[i].second});
  }
  return plan;
}

int cmd_train(const CommandOptions& options, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const ExperimentConfig config = load_with_overrides(options);
    const TrainOutcome o = train_experiment(config, out, options.quiet);
    if (!options.quiet) {
      out << "best epoch " << o.result.best_epoch << " (selection acc " << real(o.result.best_selection_acc)
          << "), outputs in " << o.dir.string() << "\n";
    }
  });
}

int cmd_eval(const CommandOptions& options, const fs::path& checkpoint, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const ExperimentConfig config = load_with_overrides(options);
    const MlpModel model = load_checkpoint(checkpoint);
    const Materialized data = materialize_datasets(config);
    const EvalReport report = evaluate_model(config, model, data.test);
    std::ostringstream text;
    text << "metric,value\n";
    text << "natural," << real(report.natural) << "\n";
    for (const auto& [name, acc] : report.robust) text << name << "," << real(acc) << "\n";
    out << text.str();
    if (options.out) {
      fs::create_directories(*options.out);
      write_text(fs::path(*options.out) / "eval.csv", text.str());
    }
  });
}

int cmd_probe(const CommandOptions& options, const std::vector<fs::path>& checkpoints, std::ostream& out,
              std::ostream& err) {
  return guarded(err, [&] {
    const ExperimentConfig config = load_with_overrides(options);
    const fs::path dir = fs::path(config.output.dir) / "probe";
    const auto outputs = probe_models(config, checkpoints, dir, options.quiet ? err : out);
    for (const auto& o : outputs) {
      out << o.checkpoint.string() << ": mean_deviation " << real(o.report.mean_deviation) << " max_deviation "
          << real(o.report.max_deviation) << " mean_sharpness " << real(o.report.mean_sharpness)
          << " max_sharpness " << real(o.report.max_sharpness) << "\n";
      if (!options.quiet) {
        out << "  report " << o.report_path.string();
        if (o.grid_path) out << ", grid " << o.grid_path->string();
        out << "\n";
      }
    }
  });
}

int cmd_sweep(const CommandOptions& options, bool parallel_cells, std::ostream& out, std::ostream& err) {
  SweepPlan plan;
  const int setup = guarded(err, [&] {
    plan = parse_sweep(read_json(options.config), options.config.parent_path());
    if (options.out) plan.out_dir = *options.out;
    if (parallel_cells) plan.parallel_cells = true;
  });
  if (setup != 0) return setup;

  struct CellResult {
    std::string status = "ok";
    std::string row;
    int best_epoch = 0;
    double best_acc = 0.0;
    std::string error;
  };
  std::vector<CellResult> results(plan.cells.size());
  std::mutex log_mutex;

  auto run_cell = [&](std::size_t i) {
    const SweepCell& cell = plan.cells[i];
    CellResult& r = results[i];
    std::ostringstream cell_log;
    const int code = guarded(cell_log, [&] {
      json doc = plan.base;
      doc.merge_patch(cell.overrides);
      if (options.seed && !cell.overrides.contains("seed")) doc["seed"] = *options.seed;
      doc["output"]["dir"] = (plan.out_dir / cell.name).string();
      const ExperimentConfig config = parse_experiment_config(doc);
      std::ostringstream discard;
      const TrainOutcome o = train_experiment(config, discard, true);
      r.row = o.final_row;
      r.best_epoch = o.result.best_epoch;
      r.best_acc = o.result.best_selection_acc;
    });
    std::lock_guard lock(log_mutex);
    if (code != 0) {
      r.status = "failed";
      r.error = cell_log.str();
      err << "cell " << cell.name << " failed: " << r.error;
    } else if (!options.quiet) {
      out << "cell " << cell.name << " done\n";
    }
  };

  fs::create_directories(plan.out_dir);
  if (plan.parallel_cells) {
    const std::size_t workers = std::max<std::size_t>(1, std::thread::hardware_concurrency());
    parallel_for(plan.cells.size(), workers, [&](std::size_t begin, std::size_t end) {
      for (std::size_t i = begin; i < end; ++i) run_cell(i);
    });
  } else {
    for (std::size_t i = 0; i < plan.cells.size(); ++i) run_cell(i);
  }

  std::ostringstream summary;
  summary << kSweepSummaryPrefix << kMetricsHeader << "\n";
  bool any_failed = false;
  for (std::size_t i = 0; i < plan.cells.size(); ++i) {
    const auto& r = results[i];
    any_failed = any_failed || r.status != "ok";
    summary << plan.cells[i].name << "," << r.status << ",";
    if (r.status == "ok") summary << r.best_epoch << "," << real(r.best_acc) << ",";
    else summary << ",,";
    summary << r.row << "\n";
  }
  const int written = guarded(err, [&] { write_text(plan.out_dir / "summary.csv", summary.str()); });
  if (written != 0) return written;
  if (!options.quiet) out << plan.cells.size() << " cells, summary in " << (plan.out_dir / "summary.csv").string() << "\n";
  return any_failed ? 2 : 0;
}

}  // namespace advlab
