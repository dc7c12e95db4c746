#include <cstdio>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "mcse/common.hpp"
#include "mcse/harness.hpp"

namespace {

void report(const mcse::RunManifest& m, const std::string& out_dir) {
  std::printf("%s: %zu outputs under %s (%.1f s)\n", m.command.c_str(),
              m.outputs.size() + m.timing_outputs.size(), out_dir.c_str(),
              m.wall_seconds);
}

std::vector<std::pair<std::string, std::string>> parse_variants(
    const std::vector<std::string>& raw) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const std::string& v : raw) {
    const std::size_t eq = v.find('=');
    mcse::require(eq != std::string::npos && eq > 0 && eq + 1 < v.size(),
                  "--variant expects label=mode, got '" + v + "'");
    out.emplace_back(v.substr(0, eq), v.substr(eq + 1));
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multi-channel speech enhancement harness"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path, preset = "desk", out;
  std::uint64_t seed = 0;
  auto* seed_opt = app.add_option("--seed", seed, "master seed override");
  app.add_option("--config", config_path, "JSON config file");
  app.add_option("--preset", preset, "configuration preset")
      ->check(CLI::IsMember({"desk", "paper"}));
  app.add_option("--out", out, "output directory");

  std::string dataset, mode, split = "test", enhanced, checkpoint, manifest;
  std::string corpus_override;
  std::vector<std::string> variant_args;

  auto* c_corpus =
      app.add_subcommand("corpus", "synthesize a dry speech corpus");
  auto* c_simulate =
      app.add_subcommand("simulate", "render a reverberant scene dataset");
  c_simulate->add_option("--corpus", corpus_override,
                         "corpus directory (overrides the config)");
  auto* c_train =
      app.add_subcommand("train", "train the configured filter network");
  c_train->add_option("--dataset", dataset, "dataset directory")->required();
  auto* c_enhance = app.add_subcommand("enhance", "enhance a dataset split");
  c_enhance->add_option("--dataset", dataset, "dataset directory")
      ->required();
  c_enhance
      ->add_option("--mode", mode,
                   "oracle-cirm | oracle-mvdr | mvdr+pf | ckpt:<path> | "
                   "nsf+pf:<path>")
      ->required();
  c_enhance->add_option("--split", split, "dataset split (default test)");
  auto* c_evaluate =
      app.add_subcommand("evaluate", "score enhanced scenes against targets");
  c_evaluate->add_option("--dataset", dataset, "dataset directory")
      ->required();
  c_evaluate->add_option("--enhanced", enhanced, "enhance output directory")
      ->required();
  auto* c_ablation = app.add_subcommand(
      "ablation", "enhance and score several variants side by side");
  c_ablation->add_option("--dataset", dataset, "dataset directory")
      ->required();
  c_ablation
      ->add_option("--variant", variant_args,
                   "label=mode (repeat per variant)")
      ->required();
  auto* c_sweep = app.add_subcommand(
      "sweep-angle", "probe spatial selectivity across incidence angles");
  c_sweep
      ->add_option("--checkpoint", checkpoint,
                   "checkpoint path, or zero-mask / identity-mask")
      ->required();
  auto* c_pattern = app.add_subcommand(
      "noise-pattern", "per-bin response to white noise across angles");
  c_pattern
      ->add_option("--checkpoint", checkpoint,
                   "checkpoint path, or zero-mask / identity-mask")
      ->required();
  auto* c_rerun =
      app.add_subcommand("rerun", "re-execute a recorded manifest");
  c_rerun->add_option("--manifest", manifest, "manifest.json path")
      ->required();

  CLI11_PARSE(app, argc, argv);

  try {
    mcse::require(!out.empty(), "--out is required");
    if (app.got_subcommand(c_rerun)) {
      report(mcse::rerun_manifest(manifest, out), out);
      return 0;
    }
    mcse::HarnessConfig config = config_path.empty()
                                     ? mcse::preset_config(preset)
                                     : mcse::load_config_file(config_path);
    if (seed_opt->count() > 0) mcse::apply_seed(config, seed);
    if (!corpus_override.empty()) config.dataset.corpus_dir = corpus_override;

    mcse::RunManifest m;
    if (app.got_subcommand(c_corpus)) {
      m = mcse::cmd_corpus(config, out);
    } else if (app.got_subcommand(c_simulate)) {
      m = mcse::cmd_simulate(config, out);
    } else if (app.got_subcommand(c_train)) {
      m = mcse::cmd_train(config, dataset, out);
    } else if (app.got_subcommand(c_enhance)) {
      m = mcse::cmd_enhance(config, dataset, mode, split, out);
    } else if (app.got_subcommand(c_evaluate)) {
      m = mcse::cmd_evaluate(config, dataset, enhanced, out);
    } else if (app.got_subcommand(c_ablation)) {
      m = mcse::cmd_ablation(config, dataset, parse_variants(variant_args),
                             out);
    } else if (app.got_subcommand(c_sweep)) {
      m = mcse::cmd_sweep_angle(config, checkpoint, out);
    } else if (app.got_subcommand(c_pattern)) {
      m = mcse::cmd_noise_pattern(config, checkpoint, out);
    }
    report(m, out);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
