#include "tfr_cli/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>

#include "tfr/checkpoint.hpp"
#include "tfr/datagen.hpp"
#include "tfr/error.hpp"
#include "tfr/hashing.hpp"
#include "tfr/metrics.hpp"
#include "tfr/training.hpp"
#include "tfr_cli/plot.hpp"
#include "tfr_cli/run_dir.hpp"

namespace tfr::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "1.0.0";

// Training, validation and test samples pooled over one or more datasets.
// Pairs always stay inside one dataset, so they never cross conditions.
struct DataPool {
  std::vector<Dataset> sets;
  std::vector<Sample> train, val, test;
  NormStats stats;
  std::string label;
  int resolution = 0;
  json inputs = json::array();
};

DataPool load_pool(const std::vector<fs::path>& dirs) {
  if (dirs.empty()) throw ConfigError("at least one --data directory is required");
  DataPool p;
  for (const auto& d : dirs) {
    p.sets.push_back(load_dataset(d));
    p.inputs.push_back(describe_input(d));
  }
  for (const auto& ds : p.sets) {
    const int res = ds.scenario.nx;
    if (ds.scenario.ny != res) throw ConfigError("datasets must use square grids");
    if (p.resolution != 0 && res != p.resolution) throw ConfigError("datasets have different resolutions");
    p.resolution = res;
    p.train.insert(p.train.end(), ds.train.begin(), ds.train.end());
    p.val.insert(p.val.end(), ds.val.begin(), ds.val.end());
    p.test.insert(p.test.end(), ds.test.begin(), ds.test.end());
    p.label += (p.label.empty() ? "" : "+") + ds.scenario.name;
  }
  if (!p.train.empty()) p.stats = compute_stats(p.train);
  return p;
}

std::vector<ReferencePair> pool_pairs(const DataPool& p, PairingStrategy strategy) {
  std::vector<ReferencePair> pairs;
  for (const auto& ds : p.sets) {
    const auto part = make_pairs(ds.train, strategy);
    pairs.insert(pairs.end(), part.begin(), part.end());
  }
  return pairs;
}

std::string method_name(const ModelConfig& m) {
  std::string s(to_string(m.arch));
  if (m.arch == Architecture::iptr && m.variant != Variant::full) s += "_" + std::string(to_string(m.variant));
  return s;
}

fs::path checkpoint_dir(const fs::path& p) {
  if (fs::exists(p / "params.json")) return p;
  if (fs::exists(p / "checkpoint" / "params.json")) return p / "checkpoint";
  throw DataError("no checkpoint (params.json) under " + p.string());
}

json run_record(const std::string& command, const CommonOptions& o, const RunConfig& cfg, const json& inputs) {
  return {{"command", command},
          {"version", kVersion},
          {"argv", o.argv},
          {"seed", cfg.train.seed},
          {"deterministic", deterministic_mode()},
          {"inputs", inputs}};
}

void write_per_sample(const RunDir& dir, const std::string& name, const EvalResult& r) {
  std::ostringstream s;
  s << "sample,mae_K,maxae_K\n";
  char buf[64];
  for (std::size_t i = 0; i < r.mae.size(); ++i) {
    std::snprintf(buf, sizeof buf, ",%.6f,%.6f\n", r.mae[i], r.max_ae[i]);
    s << r.sample_ids[i] << buf;
  }
  dir.write_text(name, s.str());
}

void write_rows(const RunDir& dir, const std::string& name, const std::vector<ResultRow>& rows) {
  std::ostringstream s;
  write_results_csv(s, rows);
  dir.write_text(name, s.str());
}

void print_summary(const EvalResult& r) { std::printf("MAE=%.6f MaxAE=%.6f\n", r.mae_mean, r.max_ae_max); }

// Fits the resolved model config to the data and validates everything that
// can be checked before any compute.
ModelConfig model_for(const RunConfig& cfg, int resolution) {
  ModelConfig m = cfg.model;
  m.height = m.width = resolution;
  m.validate();
  return m;
}

EpochCallback progress(const RunDir& dir, const std::string& tag, int epochs) {
  auto log = std::make_shared<std::ofstream>(dir / "history.jsonl", std::ios::binary);
  return [log, tag, epochs](const EpochRecord& r) {
    *log << to_jsonl(r) << "\n";
    log->flush();
    std::fprintf(stderr, "[%s] epoch %d/%d lr=%.3g loss=%.6f", tag.c_str(), r.epoch + 1, epochs, r.lr, r.train_loss);
    if (r.val_mae_K) std::fprintf(stderr, " val_mae=%.4f K", *r.val_mae_K);
    std::fprintf(stderr, "\n");
  };
}

struct TrainOutcome {
  std::unique_ptr<Model> model;
  std::optional<EvalResult> test;
};

// One training run into `dir`: config snapshot, history, checkpoint and, when
// the data has a test split, test metrics.
TrainOutcome train_into(const RunDir& dir, const std::string& command, const CommonOptions& o, const RunConfig& cfg,
                        const DataPool& pool) {
  if (pool.train.size() < 2) throw ConfigError("training needs at least 2 training samples");
  const ModelConfig mc = model_for(cfg, pool.resolution);
  cfg.train.validate();
  const auto pairs = pool_pairs(pool, cfg.train.pairing);

  RunConfig snapshot = cfg;
  snapshot.model = mc;
  dir.write_json("config.json", to_json(snapshot));
  dir.write_json("run.json", run_record(command, o, snapshot, pool.inputs));

  return dir.guard([&] {
    TrainOutcome out;
    out.model = std::make_unique<Model>(mc);
    out.model->set_stats(pool.stats);
    const ValidationSet val{&pool.val, &pool.train, derive_seed(cfg.eval_seed, 0x7a1)};
    const TrainHistory h =
        train(*out.model, pairs, pool.val.empty() ? nullptr : &val, cfg.train, progress(dir, method_name(mc), cfg.train.epochs));
    round_params_to_f32(*out.model);
    save_checkpoint(*out.model, dir / "checkpoint",
                    {{"command", command},
                     {"n_train", pool.train.size()},
                     {"scenario", pool.label},
                     {"best_epoch", h.best_epoch},
                     {"steps", h.steps},
                     {"train", cfg.train},
                     {"inputs", pool.inputs}});
    if (!pool.test.empty()) {
      out.test = evaluate(*out.model, pool.test, pool.train, cfg.eval_seed);
      write_rows(dir, "results.csv",
                 {{method_name(mc), pool.label, pool.train.size(), out.test->mae_mean, out.test->max_ae_max,
                   cfg.train.seed}});
      write_per_sample(dir, "per_sample.csv", *out.test);
    }
    return out;
  });
}

}  // namespace

int cmd_gen_data(const CommonOptions& o) {
  const RunConfig cfg = resolve_config(o.config);
  ScenarioSpec spec = scenario_template(cfg.data.scenario, cfg.data.resolution);
  spec.sensor_count = cfg.data.sensors;
  const SplitCounts counts{cfg.data.n_train, cfg.data.n_val, cfg.data.n_test};
  if (counts.train < 2) throw ConfigError("data.n_train must be at least 2");
  if (cfg.data.jobs < 1) throw ConfigError("data.jobs must be positive");
  deterministic_mode();
  RunDir dir(o.out, o.force);
  dir.guard([&] {
    const Dataset ds = generate(spec, counts, cfg.data.seed, cfg.data.jobs);
    save_dataset(ds, o.out);
    std::printf("wrote %zu samples (%zu train, %zu val, %zu test) of %s to %s\n",
                ds.train.size() + ds.val.size() + ds.test.size(), ds.train.size(), ds.val.size(), ds.test.size(),
                spec.name.c_str(), o.out.string().c_str());
  });
  return 0;
}

int cmd_train(const DataCommandOptions& o) {
  const RunConfig cfg = resolve_config(o.config);
  const DataPool pool = load_pool(o.data);
  model_for(cfg, pool.resolution);
  cfg.train.validate();
  RunDir dir(o.out, o.force);
  const TrainOutcome r = train_into(dir, "train", o, cfg, pool);
  if (r.test) print_summary(*r.test);
  return 0;
}

int cmd_finetune(const FinetuneOptions& o) {
  const RunConfig cfg = resolve_config(o.config);
  cfg.finetune.validate();
  const DataPool pool = load_pool(o.data);
  const fs::path ckpt = checkpoint_dir(o.checkpoint);
  std::unique_ptr<Model> model = load_checkpoint(ckpt);
  const std::optional<Architecture> expected =
      o.model ? std::optional<Architecture>(parse_architecture(*o.model)) : std::nullopt;
  if (expected && *expected != model->config().arch) {
    throw ConfigError("--model " + *o.model + " does not match the checkpoint architecture " +
                      std::string(to_string(model->config().arch)));
  }
  if (model->config().height != pool.resolution) {
    throw ConfigError("fine-tuning data resolution does not match the pretrained model");
  }
  if (pool.sets.size() != 1) throw ConfigError("fine-tuning takes exactly one --data directory");

  // The few-shot subset: the first k training samples of the new scenario.
  DataPool shot = pool;
  const std::size_t k = o.shots.value_or(pool.train.size());
  if (k < 2 || k > pool.train.size()) {
    throw ConfigError("--shots must be between 2 and the training split size (" + std::to_string(pool.train.size()) + ")");
  }
  shot.sets[0].train.resize(k);
  shot.train.assign(pool.train.begin(), pool.train.begin() + static_cast<std::ptrdiff_t>(k));
  const auto pairs = pool_pairs(shot, cfg.finetune.pairing);

  RunDir dir(o.out, o.force);
  RunConfig snapshot = cfg;
  snapshot.model = model->config();
  dir.write_json("config.json", to_json(snapshot));
  json inputs = pool.inputs;
  inputs.push_back(describe_input(ckpt));
  json rec = run_record("finetune", o, snapshot, inputs);
  rec["seed"] = cfg.finetune.seed;
  rec["shots"] = k;
  dir.write_json("run.json", rec);

  dir.guard([&] {
    const std::string method = method_name(model->config());
    std::vector<ResultRow> rows;
    std::optional<EvalResult> zero;
    if (!pool.test.empty()) {
      zero = evaluate(*model, pool.test, shot.train, cfg.eval_seed);
      rows.push_back({method + "_zeroshot", pool.label, k, zero->mae_mean, zero->max_ae_max, cfg.finetune.seed});
    }
    const ValidationSet val{&pool.val, &shot.train, derive_seed(cfg.eval_seed, 0x7a1)};
    const TrainHistory h = finetune(*model, pairs, pool.val.empty() ? nullptr : &val, cfg.finetune, expected,
                                    progress(dir, method + "/ft", cfg.finetune.epochs));
    round_params_to_f32(*model);
    save_checkpoint(*model, dir / "checkpoint",
                    {{"command", "finetune"},
                     {"n_train", k},
                     {"scenario", pool.label},
                     {"best_epoch", h.best_epoch},
                     {"steps", h.steps},
                     {"train", cfg.finetune},
                     {"inputs", inputs}});
    if (!pool.test.empty()) {
      const EvalResult r = evaluate(*model, pool.test, shot.train, cfg.eval_seed);
      rows.push_back({method, pool.label, k, r.mae_mean, r.max_ae_max, cfg.finetune.seed});
      write_per_sample(dir, "per_sample.csv", r);
      write_rows(dir, "results.csv", rows);
      std::fprintf(stderr, "zero-shot MAE=%.6f MaxAE=%.6f\n", zero->mae_mean, zero->max_ae_max);
      print_summary(r);
    }
  });
  return 0;
}

int cmd_eval(const EvalOptions& o) {
  const RunConfig cfg = resolve_config(o.config);
  const DataPool pool = load_pool(o.data);
  const std::vector<Sample>* targets = o.split == "test" ? &pool.test
                                       : o.split == "val" ? &pool.val
                                       : o.split == "train" ? &pool.train
                                                            : nullptr;
  if (!targets) throw ConfigError("--split must be train, val or test");
  if (targets->empty()) throw DataError("the " + o.split + " split of the given data is empty");

  const bool identity = o.model && *o.model == "voronoi";
  std::unique_ptr<Model> model;
  json inputs = pool.inputs;
  std::string method = "voronoi_identity";
  std::size_t n_train = pool.train.size();
  if (!identity) {
    if (!o.checkpoint) throw ConfigError("eval needs --checkpoint (or --model voronoi)");
    const fs::path ckpt = checkpoint_dir(*o.checkpoint);
    model = load_checkpoint(ckpt);
    if (o.model && parse_architecture(*o.model) != model->config().arch) {
      throw ConfigError("--model " + *o.model + " does not match the checkpoint architecture " +
                        std::string(to_string(model->config().arch)));
    }
    if (model->config().height != pool.resolution) throw ConfigError("data resolution does not match the checkpoint");
    inputs.push_back(describe_input(ckpt));
    method = method_name(model->config());
    const json meta = read_checkpoint_manifest(ckpt).value("metadata", json::object());
    n_train = meta.value("n_train", std::size_t{0});
  }

  auto run = [&] {
    const EvalResult r = identity ? evaluate_voronoi_identity(*targets) : evaluate(*model, *targets, pool.train, cfg.eval_seed);
    return r;
  };
  if (o.out.empty()) {
    print_summary(run());
    return 0;
  }
  RunDir dir(o.out, o.force);
  json rec = run_record("eval", o, cfg, inputs);
  rec["seed"] = cfg.eval_seed;
  dir.write_json("run.json", rec);
  dir.write_json("config.json", to_json(cfg));
  dir.guard([&] {
    const EvalResult r = run();
    write_rows(dir, "results.csv", {{method, pool.label, n_train, r.mae_mean, r.max_ae_max, cfg.eval_seed}});
    write_per_sample(dir, "per_sample.csv", r);
    json refs = r.reference_ids;
    dir.write_json("references.json", refs);
    print_summary(r);
  });
  return 0;
}

int cmd_ablate(const AblateOptions& o) {
  const RunConfig base = resolve_config(o.config);
  const DataPool pool = load_pool(o.data);
  if (pool.test.empty()) throw ConfigError("ablation needs data with a test split");

  struct Job {
    std::string name;
    RunConfig cfg;
  };
  std::vector<Job> jobs;
  for (const auto& v : o.variants) {
    Job j{"", base};
    j.cfg.model.arch = Architecture::iptr;
    j.cfg.model.variant = parse_variant(v);
    j.cfg.train.pairing = parse_pairing(o.pairings.empty() ? "sliding" : o.pairings.front());
    j.name = method_name(j.cfg.model);
    jobs.push_back(j);
  }
  // Further pairing strategies are compared on the full model.
  for (std::size_t i = 1; i < o.pairings.size(); ++i) {
    Job j{"", base};
    j.cfg.model.arch = Architecture::iptr;
    j.cfg.model.variant = Variant::full;
    j.cfg.train.pairing = parse_pairing(o.pairings[i]);
    j.name = "iptr_" + std::string(to_string(j.cfg.train.pairing.kind));
    jobs.push_back(j);
  }
  if (jobs.empty()) throw ConfigError("nothing to ablate");
  for (const auto& j : jobs) {
    model_for(j.cfg, pool.resolution);
    j.cfg.train.validate();
    pool_pairs(pool, j.cfg.train.pairing);
  }

  RunDir dir(o.out, o.force);
  dir.write_json("config.json", to_json(base));
  dir.write_json("run.json", run_record("ablate", o, base, pool.inputs));
  dir.guard([&] {
    std::vector<ResultRow> rows;
    json summary = json::array();
    for (const auto& j : jobs) {
      std::fprintf(stderr, "== ablation run %s\n", j.name.c_str());
      RunDir sub(dir / j.name, o.force);
      const TrainOutcome r = train_into(sub, "ablate", o, j.cfg, pool);
      rows.push_back({j.name, pool.label, pool.train.size(), r.test->mae_mean, r.test->max_ae_max, j.cfg.train.seed});
      summary.push_back({{"name", j.name},
                         {"variant", std::string(to_string(j.cfg.model.variant))},
                         {"pairing", j.cfg.train.pairing.kind == PairingKind::sliding ? "sliding" : "fixed"},
                         {"mae_K", r.test->mae_mean},
                         {"maxae_K", r.test->max_ae_max}});
    }
    write_rows(dir, "ablation.csv", rows);
    dir.write_json("ablation.json", summary);
    for (const auto& r : rows) std::printf("%s MAE=%.6f MaxAE=%.6f\n", r.method.c_str(), r.mae_K, r.maxae_K);
  });
  return 0;
}

int cmd_sweep(const SweepOptions& o) {
  const RunConfig cfg = resolve_config(o.config);
  SweepConfig sc;
  sc.scenario = scenario_template(cfg.data.scenario, cfg.data.resolution);
  sc.counts = o.counts;
  sc.split = {cfg.data.n_train, cfg.data.n_val, cfg.data.n_test};
  if (sc.split.test == 0) throw ConfigError("the sensor sweep needs data.n_test > 0");
  sc.model = model_for(cfg, cfg.data.resolution);
  sc.train = cfg.train;
  sc.train.validate();
  sc.data_seed = cfg.data.seed;
  sc.eval_seed = cfg.eval_seed;
  for (int k : sc.counts) {
    const int r = static_cast<int>(std::lround(std::sqrt(static_cast<double>(k))));
    if (k < 1 || r * r != k) throw ConfigError("sensor count " + std::to_string(k) + " is not a perfect square");
  }

  RunDir dir(o.out, o.force);
  dir.write_json("config.json", to_json(cfg));
  dir.write_json("run.json", run_record("sweep", o, cfg, json::array()));
  dir.guard([&] {
    const auto rows = sensor_sweep(sc, [](const std::string& line) { std::fprintf(stderr, "%s\n", line.c_str()); });
    std::vector<ResultRow> out;
    json summary = json::array();
    const std::string method = method_name(sc.model);
    for (const auto& r : rows) {
      const std::string k = std::to_string(r.sensors);
      out.push_back({method + "_k" + k, sc.scenario.name, sc.split.train, r.model.mae_mean, r.model.max_ae_max, cfg.train.seed});
      out.push_back({"voronoi_identity_k" + k, sc.scenario.name, sc.split.train, r.identity.mae_mean,
                     r.identity.max_ae_max, cfg.train.seed});
      summary.push_back({{"sensors", r.sensors},
                         {"mae_K", r.model.mae_mean},
                         {"maxae_K", r.model.max_ae_max},
                         {"identity_mae_K", r.identity.mae_mean},
                         {"identity_maxae_K", r.identity.max_ae_max}});
      std::printf("sensors=%d MAE=%.6f MaxAE=%.6f identity_MAE=%.6f\n", r.sensors, r.model.mae_mean,
                  r.model.max_ae_max, r.identity.mae_mean);
    }
    write_rows(dir, "sweep.csv", out);
    dir.write_json("sweep.json", summary);
  });
  return 0;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream s(line);
  std::string cell;
  while (std::getline(s, cell, ',')) out.push_back(cell);
  return out;
}

void plot_curves(const RunDir& dir, const fs::path& csv, const std::string& stem) {
  std::ifstream in(csv);
  if (!in) throw DataError("cannot read " + csv.string());
  std::string line;
  std::getline(in, line);
  if (line != kResultsHeader) throw DataError(csv.string() + " is not a results table");
  std::map<std::string, Series> mae, maxae;
  std::vector<std::string> order;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != 6) throw DataError("malformed row in " + csv.string() + ": " + line);
    const std::string& m = cells[0];
    if (!mae.count(m)) {
      order.push_back(m);
      mae[m].name = maxae[m].name = m;
    }
    try {
      const double n = std::stod(cells[2]);
      mae[m].x.push_back(n);
      mae[m].y.push_back(std::stod(cells[3]));
      maxae[m].x.push_back(n);
      maxae[m].y.push_back(std::stod(cells[4]));
    } catch (const std::exception&) {
      throw DataError("non-numeric value in " + csv.string() + ": " + line);
    }
  }
  if (order.empty()) throw DataError(csv.string() + " has no rows");
  json sidecar;
  for (const auto& [metric, table] : {std::pair{"mae", &mae}, std::pair{"maxae", &maxae}}) {
    std::vector<Series> series;
    for (const auto& m : order) {
      Series s = table->at(m);
      std::vector<std::size_t> idx(s.x.size());
      for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
      std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return s.x[a] < s.x[b]; });
      Series sorted{s.name, {}, {}};
      for (auto i : idx) {
        sorted.x.push_back(s.x[i]);
        sorted.y.push_back(s.y[i]);
      }
      series.push_back(sorted);
    }
    json axes;
    write_png(line_chart(series, axes), dir / (stem + "_" + metric + "_curve.png"));
    axes["x_label"] = "n_train";
    axes["y_label"] = std::string(metric) + "_K";
    sidecar[metric] = axes;
  }
  dir.write_json(stem + "_curve.json", sidecar);
}

}  // namespace

int cmd_plot(const PlotOptions& o) {
  const RunConfig cfg = resolve_config(o.config);
  if (!o.checkpoint && o.curves.empty()) throw ConfigError("plot needs --checkpoint with --data, or --curve");
  std::unique_ptr<Model> model;
  std::optional<DataPool> pool;
  if (o.checkpoint) {
    model = load_checkpoint(checkpoint_dir(*o.checkpoint));
    pool = load_pool(o.data);
    if (pool->test.empty()) throw DataError("the given data has no test split to plot");
    if (model->config().height != pool->resolution) throw ConfigError("data resolution does not match the checkpoint");
  }
  for (const auto& c : o.curves) {
    if (!fs::exists(c)) throw DataError("missing results table " + c.string());
  }
  RunDir dir(o.out, o.force);
  dir.guard([&] {
    if (model) {
      const std::size_t n = std::min(o.samples, pool->test.size());
      const bool needs_ref = model->config().uses_reference() && model->config().variant != Variant::no_implicit;
      std::map<std::string, const Sample*> refs;
      for (std::size_t i = 0; i < n; ++i) {
        const Sample& t = pool->test[i];
        const Sample* ref = nullptr;
        if (needs_ref) {
          auto it = refs.find(t.condition_id);
          if (it == refs.end()) it = refs.emplace(t.condition_id, &select_test_reference(pool->train, t.condition_id, cfg.eval_seed)).first;
          ref = it->second;
        }
        const ScalarField pred = predict(*model, t, ref);
        ScalarField err = pred;
        double emax = 0.0;
        for (std::size_t k = 0; k < err.values.size(); ++k) {
          err.values[k] = std::abs(pred.values[k] - t.field.values[k]);
          emax = std::max(emax, err.values[k]);
        }
        const double lo = std::min(t.field.min(), pred.min()), hi = std::max(t.field.max(), pred.max());
        const std::string stem = "sample_" + std::to_string(i);
        write_png(heatmap(t.field, lo, hi), dir / (stem + "_truth.png"));
        write_png(heatmap(pred, lo, hi), dir / (stem + "_pred.png"));
        write_png(heatmap(err, 0.0, emax), dir / (stem + "_error.png"));
        dir.write_json(stem + ".json", {{"sample", sample_id(t)},
                                        {"reference", ref ? sample_id(*ref) : ""},
                                        {"field_scale_K", {lo, hi}},
                                        {"error_scale_K", {0.0, emax}},
                                        {"mae_K", mae(t.field, pred)},
                                        {"maxae_K", max_ae(t.field, pred)},
                                        {"origin", "lower"}});
      }
      std::printf("wrote %zu sample panels to %s\n", n, o.out.string().c_str());
    }
    for (std::size_t c = 0; c < o.curves.size(); ++c) {
      plot_curves(dir, o.curves[c], o.curves[c].stem().string() + (o.curves.size() > 1 ? std::to_string(c) : ""));
    }
  });
  return 0;
}

}  // namespace tfr::cli
