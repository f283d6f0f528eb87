#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "tfr/error.hpp"
#include "tfr_cli/commands.hpp"

namespace {

using namespace tfr::cli;

void add_common(CLI::App* app, CommonOptions& o, bool needs_out = true) {
  app->add_option("--config", o.config.file, "JSON config file");
  app->add_option("--set", o.config.overrides, "dotted override, e.g. train.epochs=5 (repeatable)");
  app->add_flag("--paper-scale", o.config.paper_scale, "200x200 grids, 1000 samples, 150 epochs");
  app->add_option("--seed", o.config.seed, "seed for initialisation, shuffling and evaluation");
  auto* out = app->add_option("--out", o.out, "output directory");
  if (needs_out) out->required();
  app->add_flag("--force", o.force, "clear a non-empty output directory");
}

// Options that are sugar for a --set override, kept in argument order.
void add_alias(CLI::App* app, CommonOptions& o, const std::string& flag, const std::string& key,
               const std::string& help) {
  app->add_option_function<std::string>(
      flag, [&o, key](const std::string& v) { o.config.overrides.push_back(key + "=" + v); }, help);
}

void add_string_alias(CLI::App* app, CommonOptions& o, const std::string& flag, const std::string& key,
                      const std::string& help) {
  // Quoted so that values such as "1e3" stay strings.
  app->add_option_function<std::string>(
      flag, [&o, key](const std::string& v) { o.config.overrides.push_back(key + "=\"" + v + "\""); }, help);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Temperature-field reconstruction from sparse sensors"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "tfr 1.0.0");

  CommonOptions gen;
  auto* g = app.add_subcommand("gen-data", "simulate a dataset");
  add_common(g, gen);
  add_string_alias(g, gen, "--scenario", "data.scenario", "HSink, ADlet, DSine or NewScenario");
  add_alias(g, gen, "--n", "data.n_train", "training samples");
  add_alias(g, gen, "--val", "data.n_val", "validation samples");
  add_alias(g, gen, "--test", "data.n_test", "test samples");
  add_alias(g, gen, "--res", "data.resolution", "grid nodes per side");
  add_alias(g, gen, "--sensors", "data.sensors", "sensor count (a perfect square)");
  add_alias(g, gen, "--jobs", "data.jobs", "worker threads");
  // gen-data's --seed is the dataset's master seed rather than the run seed.
  g->get_option("--seed")->description("master seed of the dataset");

  DataCommandOptions tr;
  auto* t = app.add_subcommand("train", "train a model");
  add_common(t, tr);
  t->add_option("--data", tr.data, "dataset directory (repeatable, pooled)")->required();
  add_string_alias(t, tr, "--model", "model.architecture", "iptr, vor_unet, vor_fno, mask_unet or mask_fno");
  add_string_alias(t, tr, "--variant", "model.variant", "full, no_aux, no_implicit or unet_aux");
  add_string_alias(t, tr, "--pairs", "train.pairing", "sliding or fixed[:index]");
  add_alias(t, tr, "--epochs", "train.epochs", "training epochs");

  FinetuneOptions ft;
  auto* f = app.add_subcommand("finetune", "adapt a pretrained model with a few samples");
  add_common(f, ft);
  f->add_option("--data", ft.data, "dataset of the new scenario")->required();
  f->add_option("--checkpoint", ft.checkpoint, "pretrained run or checkpoint directory")->required();
  f->add_option("--model", ft.model, "expected architecture");
  f->add_option("--shots", ft.shots, "number of training samples to adapt on");
  add_string_alias(f, ft, "--pairs", "finetune.pairing", "sliding or fixed[:index]");
  add_alias(f, ft, "--epochs", "finetune.epochs", "fine-tuning epochs");

  EvalOptions ev;
  auto* e = app.add_subcommand("eval", "score a checkpoint or the Voronoi identity baseline");
  add_common(e, ev, false);
  e->add_option("--data", ev.data, "dataset directory (repeatable)")->required();
  e->add_option("--checkpoint", ev.checkpoint, "run or checkpoint directory");
  e->add_option("--model", ev.model, "expected architecture, or 'voronoi' for the identity baseline");
  e->add_option("--split", ev.split, "train, val or test")->capture_default_str();

  AblateOptions ab;
  std::vector<std::string> variants, pairings;
  auto* a = app.add_subcommand("ablate", "train branch variants and pairing strategies");
  add_common(a, ab);
  a->add_option("--data", ab.data, "dataset directory (repeatable)")->required();
  a->add_option("--variant", variants, "variants to train (default: all four)");
  a->add_option("--pairs", pairings, "pairings; the first is used for every variant (default: sliding fixed)");

  SweepOptions sw;
  auto* s = app.add_subcommand("sweep", "retrain and evaluate over sensor counts");
  add_common(s, sw);
  s->add_option("--counts", sw.counts, "sensor counts")->capture_default_str();
  add_string_alias(s, sw, "--scenario", "data.scenario", "scenario");
  add_alias(s, sw, "--n", "data.n_train", "training samples");
  add_alias(s, sw, "--test", "data.n_test", "test samples");
  add_alias(s, sw, "--res", "data.resolution", "grid nodes per side");
  add_string_alias(s, sw, "--model", "model.architecture", "architecture");

  PlotOptions pl;
  auto* p = app.add_subcommand("plot", "render field and error maps or metric curves");
  add_common(p, pl);
  p->add_option("--checkpoint", pl.checkpoint, "run or checkpoint directory");
  p->add_option("--data", pl.data, "dataset with a test split");
  p->add_option("--samples", pl.samples, "test samples to render")->capture_default_str();
  p->add_option("--curve", pl.curves, "results CSV to plot against n_train (repeatable)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : 2;
  }

  const std::vector<std::string> args(argv + 1, argv + argc);
  try {
    if (*g) {
      gen.argv = args;
      // The run seed is the dataset seed here.
      if (gen.config.seed) gen.config.overrides.push_back("data.seed=" + std::to_string(*gen.config.seed));
      return cmd_gen_data(gen);
    }
    if (*t) return tr.argv = args, cmd_train(tr);
    if (*f) return ft.argv = args, cmd_finetune(ft);
    if (*e) return ev.argv = args, cmd_eval(ev);
    if (*a) {
      ab.argv = args;
      if (!variants.empty()) ab.variants = variants;
      if (!pairings.empty()) ab.pairings = pairings;
      return cmd_ablate(ab);
    }
    if (*s) return sw.argv = args, cmd_sweep(sw);
    if (*p) return pl.argv = args, cmd_plot(pl);
  } catch (const tfr::Error& err) {
    std::fprintf(stderr, "error: %s\n", err.what());
    return err.exit_code();
  } catch (const std::exception& err) {
    std::fprintf(stderr, "error: %s\n", err.what());
    return 1;
  }
  return 1;
}
