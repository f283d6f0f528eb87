#include "tfr_cli/config.hpp"

#include <fstream>

#include "tfr/error.hpp"

namespace tfr::cli {

using nlohmann::json;

RunConfig default_config(bool paper_scale) {
  RunConfig c;
  if (paper_scale) {
    c.data.resolution = 200;
    c.data.n_train = 1000;
    c.model.height = c.model.width = 200;
    c.train = TrainConfig::paper();
    c.finetune = TrainConfig::finetune_paper();
  } else {
    c.train = TrainConfig::desk();
    c.finetune = TrainConfig::finetune_desk();
  }
  return c;
}

json to_json(const RunConfig& c) {
  json data{{"scenario", c.data.scenario}, {"resolution", c.data.resolution}, {"n_train", c.data.n_train},
            {"n_val", c.data.n_val},       {"n_test", c.data.n_test},         {"seed", c.data.seed},
            {"sensors", c.data.sensors},   {"jobs", c.data.jobs}};
  return json{{"data", data}, {"model", c.model}, {"train", c.train}, {"finetune", c.finetune},
              {"eval", {{"seed", c.eval_seed}}}};
}

namespace {

void merge_strict(json& base, const json& patch, const std::string& prefix) {
  if (!patch.is_object()) throw ConfigError("config section '" + prefix + "' must be an object");
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (!base.contains(it.key())) throw ConfigError("unknown config key '" + key + "'");
    json& slot = base[it.key()];
    if (slot.is_object()) {
      merge_strict(slot, it.value(), key);
    } else {
      slot = it.value();
    }
  }
}

template <class T>
T get(const json& j, const char* section) {
  try {
    return j.at(section).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid '") + section + "' config: " + e.what());
  }
}

}  // namespace

RunConfig run_config_from_json(const json& j) {
  json tree = to_json(default_config(false));
  merge_strict(tree, j, "");
  RunConfig c;
  try {
    const json& d = tree.at("data");
    c.data.scenario = d.at("scenario").get<std::string>();
    c.data.resolution = d.at("resolution").get<int>();
    c.data.n_train = d.at("n_train").get<std::size_t>();
    c.data.n_val = d.at("n_val").get<std::size_t>();
    c.data.n_test = d.at("n_test").get<std::size_t>();
    c.data.seed = d.at("seed").get<std::uint64_t>();
    c.data.sensors = d.at("sensors").get<int>();
    c.data.jobs = d.at("jobs").get<int>();
    c.eval_seed = tree.at("eval").at("seed").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid config value: ") + e.what());
  }
  c.model = get<ModelConfig>(tree, "model");
  c.train = get<TrainConfig>(tree, "train");
  c.finetune = get<TrainConfig>(tree, "finetune");
  return c;
}

void apply_override(json& tree, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw ConfigError("override '" + std::string(assignment) + "' is not of the form key=value");
  }
  const std::string key(assignment.substr(0, eq));
  const std::string text(assignment.substr(eq + 1));
  json* node = &tree;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (!node->is_object() || !node->contains(part)) throw ConfigError("unknown config key '" + key + "'");
    node = &(*node)[part];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  if (node->is_object()) throw ConfigError("config key '" + key + "' names a section, not a value");
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  *node = std::move(value);
}

RunConfig resolve_config(const ConfigSources& src) {
  json tree = to_json(default_config(src.paper_scale));
  if (src.file) {
    std::ifstream in(*src.file);
    if (!in) throw ConfigError("cannot read config file " + src.file->string());
    json file = json::parse(in, nullptr, false);
    if (file.is_discarded()) throw ConfigError("config file " + src.file->string() + " is not valid JSON");
    merge_strict(tree, file, "");
  }
  for (const auto& o : src.overrides) apply_override(tree, o);
  RunConfig c = run_config_from_json(tree);
  if (src.seed) {
    c.model.init_seed = *src.seed;
    c.train.seed = *src.seed;
    c.finetune.seed = *src.seed;
    c.eval_seed = *src.seed;
  }
  return c;
}

}  // namespace tfr::cli
