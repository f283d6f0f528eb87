#include "tfr/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <ostream>

#include <nlohmann/json.hpp>

#include "tfr/error.hpp"

namespace tfr {

void TrainConfig::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError("train config: " + m); };
  if (epochs < 1) fail("epochs must be at least 1");
  if (batch_size < 1) fail("batch size must be at least 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) fail("learning rate must be positive");
  if (!(decay > 0.0) || decay > 1.0) fail("decay factor must lie in (0, 1]");
  for (std::size_t i = 0; i < milestones.size(); ++i) {
    if (milestones[i] < 1 || milestones[i] >= epochs) fail("milestones must lie in [1, epochs)");
    if (i > 0 && milestones[i] <= milestones[i - 1]) fail("milestones must be strictly increasing");
  }
  if (loss != "l1") fail("unsupported loss '" + loss + "' (only l1)");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0) || !(eps > 0.0)) fail("invalid Adam constants");
}

double TrainConfig::lr_at(int epoch) const {
  double lr = learning_rate;
  for (int m : milestones) {
    if (epoch >= m) lr *= decay;
  }
  return lr;
}

TrainConfig TrainConfig::desk() { return TrainConfig{}; }

TrainConfig TrainConfig::paper() {
  TrainConfig c;
  c.epochs = 150;
  c.batch_size = 16;
  c.learning_rate = 1.5e-4;
  c.milestones = {100};
  return c;
}

TrainConfig TrainConfig::finetune_desk() {
  TrainConfig c;
  c.epochs = 30;
  c.batch_size = 1;
  c.learning_rate = 3e-4;
  c.milestones = {20};
  return c;
}

TrainConfig TrainConfig::finetune_paper() {
  TrainConfig c;
  c.epochs = 100;
  c.batch_size = 1;
  c.learning_rate = 1.5e-4;
  c.milestones = {70};
  return c;
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  std::string pairing(to_string(c.pairing.kind));
  if (c.pairing.kind == PairingKind::fixed) pairing += ":" + std::to_string(c.pairing.fixed_index);
  j = nlohmann::json{{"epochs", c.epochs},         {"batch_size", c.batch_size}, {"learning_rate", c.learning_rate},
                     {"milestones", c.milestones}, {"decay", c.decay},           {"seed", c.seed},
                     {"pairing", pairing},         {"loss", c.loss},             {"clip_norm", c.clip_norm},
                     {"beta1", c.beta1},           {"beta2", c.beta2},           {"eps", c.eps}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  if (j.contains("milestones")) c.milestones = j.at("milestones").get<std::vector<int>>();
  c.decay = j.value("decay", c.decay);
  c.seed = j.value("seed", c.seed);
  if (j.contains("pairing")) c.pairing = parse_pairing(j.at("pairing").get<std::string>());
  c.loss = j.value("loss", c.loss);
  c.clip_norm = j.value("clip_norm", c.clip_norm);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.eps = j.value("eps", c.eps);
}

std::string to_jsonl(const EpochRecord& r) {
  nlohmann::json j{{"epoch", r.epoch}, {"lr", r.lr}, {"train_loss", r.train_loss}};
  j["val_mae_K"] = r.val_mae_K ? nlohmann::json(*r.val_mae_K) : nlohmann::json(nullptr);
  j["val_maxae_K"] = r.val_maxae_K ? nlohmann::json(*r.val_maxae_K) : nlohmann::json(nullptr);
  return j.dump();
}

Adam::Adam(const nn::ParamStore& params, double beta1, double beta2, double eps)
    : beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (std::size_t i = 0; i < params.count(); ++i) {
    m_.emplace_back(params[i].size(), 0.0);
    v_.emplace_back(params[i].size(), 0.0);
  }
}

void Adam::step(nn::ParamStore& params, double lr) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.count(); ++i) {
    auto& p = params[i];
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t k = 0; k < p.size(); ++k) {
      const double g = p.grad[k];
      m[k] = beta1_ * m[k] + (1.0 - beta1_) * g;
      v[k] = beta2_ * v[k] + (1.0 - beta2_) * g * g;
      p.value[k] -= lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + eps_);
    }
  }
}

namespace {

struct Prepared {
  ModelInput input;
  nn::Tensor target;
};

std::vector<Prepared> prepare(const Model& model, const std::vector<ReferencePair>& pairs) {
  std::vector<Prepared> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) {
    if (!p.target || !p.reference) throw ConfigError("reference pair with a missing sample");
    out.push_back({make_input(model.config(), *p.target, p.reference, model.stats()),
                   field_tensor(p.target->field, model.stats())});
  }
  return out;
}

// L1 loss and its gradient scaled by `scale`.
double l1(const nn::Tensor& pred, const nn::Tensor& target, double scale, nn::Tensor* grad) {
  const double n = static_cast<double>(pred.size());
  double s = 0.0;
  if (grad) *grad = nn::Tensor(pred.c, pred.h, pred.w);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred.data[i] - target.data[i];
    s += std::abs(d);
    if (grad) grad->data[i] = (d > 0.0 ? 1.0 : d < 0.0 ? -1.0 : 0.0) * scale / n;
  }
  return s / n;
}

}  // namespace

double pair_loss(const Model& model, const std::vector<ReferencePair>& pairs) {
  if (pairs.empty()) throw ConfigError("no pairs to score");
  double s = 0.0;
  for (const auto& p : prepare(model, pairs)) s += l1(model.forward(p.input), p.target, 1.0, nullptr);
  return s / static_cast<double>(pairs.size());
}

TrainHistory train(Model& model, const std::vector<ReferencePair>& pairs, const ValidationSet* val,
                   const TrainConfig& cfg, const EpochCallback& on_epoch) {
  cfg.validate();
  if (pairs.empty()) throw ConfigError("training needs at least one pair");
  if (val && (!val->targets || !val->reference_pool)) throw ConfigError("incomplete validation set");
  const bool use_val = val && !val->targets->empty();

  const std::vector<Prepared> data = prepare(model, pairs);
  Rng rng(derive_seed(cfg.seed, 0x5417));
  Adam adam(model.params(), cfg.beta1, cfg.beta2, cfg.eps);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainHistory hist;
  std::vector<nn::Buffer> best;
  double best_mae = 0.0;
  ForwardCache cache;
  nn::Tensor grad;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = cfg.lr_at(epoch);
    rng.shuffle(std::span(order));
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      const double scale = 1.0 / static_cast<double>(end - start);
      model.params().zero_grad();
      for (std::size_t b = start; b < end; ++b) {
        const Prepared& p = data[order[b]];
        const nn::Tensor pred = model.forward(p.input, cache);
        const double loss = l1(pred, p.target, scale, &grad);
        if (!std::isfinite(loss)) {
          throw NumericError("non-finite training loss at epoch " + std::to_string(epoch) + ", step " +
                             std::to_string(hist.steps) + ", pair " + std::to_string(order[b]) + " (" +
                             sample_id(*pairs[order[b]].target) + ")");
        }
        loss_sum += loss;
        model.backward(cache, grad);
      }
      const double norm = model.params().grad_norm();
      if (!std::isfinite(norm)) {
        throw NumericError("non-finite gradient norm at epoch " + std::to_string(epoch) + ", step " +
                           std::to_string(hist.steps));
      }
      if (cfg.clip_norm > 0.0 && norm > cfg.clip_norm) model.params().scale_grad(cfg.clip_norm / norm);
      adam.step(model.params(), lr);
      ++hist.steps;
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = lr;
    rec.train_loss = loss_sum / static_cast<double>(data.size());
    if (use_val) {
      const EvalResult r = evaluate(model, *val->targets, *val->reference_pool, val->seed);
      rec.val_mae_K = r.mae_mean;
      rec.val_maxae_K = r.max_ae_max;
      if (hist.best_epoch < 0 || r.mae_mean < best_mae) {
        best_mae = r.mae_mean;
        hist.best_epoch = epoch;
        best = model.params().snapshot();
      }
    } else {
      hist.best_epoch = epoch;
    }
    hist.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  if (use_val) model.params().restore(best);
  return hist;
}

TrainHistory finetune(Model& model, const std::vector<ReferencePair>& pairs, const ValidationSet* val,
                      const TrainConfig& cfg, std::optional<Architecture> expected, const EpochCallback& on_epoch) {
  if (expected && *expected != model.config().arch) {
    throw ConfigError("fine-tuning expects a " + std::string(to_string(*expected)) + " model, checkpoint holds " +
                      std::string(to_string(model.config().arch)));
  }
  for (const auto& p : pairs) {
    if (p.target && (p.target->field.grid.ny != model.config().height || p.target->field.grid.nx != model.config().width)) {
      throw ConfigError("fine-tuning data resolution does not match the pretrained model");
    }
  }
  return train(model, pairs, val, cfg, on_epoch);
}

EvalResult evaluate(const Predictor& predictor, bool needs_reference, const std::vector<Sample>& targets,
                    const std::vector<Sample>& reference_pool, std::uint64_t seed) {
  if (targets.empty()) throw ConfigError("evaluation needs at least one target");
  EvalResult r;
  std::map<std::string, const Sample*> refs;
  for (const Sample& t : targets) {
    const Sample* ref = nullptr;
    if (needs_reference) {
      auto it = refs.find(t.condition_id);
      if (it == refs.end()) {
        ref = &select_test_reference(reference_pool, t.condition_id, seed);
        refs.emplace(t.condition_id, ref);
        r.reference_ids.push_back(sample_id(*ref));
      } else {
        ref = it->second;
      }
    }
    r.add(t.field, predictor(t, ref), sample_id(t));
  }
  r.finalize();
  return r;
}

EvalResult evaluate(const Model& model, const std::vector<Sample>& targets, const std::vector<Sample>& reference_pool,
                    std::uint64_t seed) {
  const bool needs = model.config().uses_reference() && model.config().variant != Variant::no_implicit;
  return evaluate([&model](const Sample& t, const Sample* ref) { return predict(model, t, ref); }, needs, targets,
                  reference_pool, seed);
}

EvalResult evaluate_voronoi_identity(const std::vector<Sample>& targets) {
  static const std::vector<Sample> kNoPool;
  return evaluate(
      [](const Sample& t, const Sample*) {
        const PseudoField v = voronoi_encode(t.readings, t.field.grid);
        return ScalarField(t.field.grid, v.values);
      },
      false, targets, kNoPool, 0);
}

std::vector<SweepRow> sensor_sweep(const SweepConfig& cfg, const std::function<void(const std::string&)>& log) {
  if (cfg.counts.empty()) throw ConfigError("sensor sweep needs at least one count");
  for (int k : cfg.counts) {
    const int r = static_cast<int>(std::lround(std::sqrt(static_cast<double>(k))));
    if (k < 1 || r * r != k) throw ConfigError("sensor count " + std::to_string(k) + " is not a perfect square");
  }
  cfg.train.validate();
  std::vector<SweepRow> rows;
  for (int k : cfg.counts) {
    ScenarioSpec spec = cfg.scenario;
    spec.sensor_count = k;
    const Dataset ds = generate(spec, cfg.split, cfg.data_seed);
    Model model(cfg.model);
    model.set_stats(ds.stats);
    const auto pairs = make_pairs(ds.train, cfg.train.pairing);
    ValidationSet val{&ds.val, &ds.train, derive_seed(cfg.eval_seed, 1)};
    train(model, pairs, ds.val.empty() ? nullptr : &val, cfg.train);
    SweepRow row;
    row.sensors = k;
    row.model = evaluate(model, ds.test, ds.train, cfg.eval_seed);
    row.identity = evaluate_voronoi_identity(ds.test);
    if (log) {
      log("sensors=" + std::to_string(k) + " mae=" + std::to_string(row.model.mae_mean) +
          " identity_mae=" + std::to_string(row.identity.mae_mean));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string to_csv_line(const ResultRow& r) {
  char buf[64];
  std::string s = r.method + "," + r.scenario + "," + std::to_string(r.n_train) + ",";
  std::snprintf(buf, sizeof buf, "%.6f,%.6f,", r.mae_K, r.maxae_K);
  return s + buf + std::to_string(r.seed);
}

void write_results_csv(std::ostream& out, const std::vector<ResultRow>& rows) {
  out << kResultsHeader << "\n";
  for (const auto& r : rows) out << to_csv_line(r) << "\n";
}

}  // namespace tfr
