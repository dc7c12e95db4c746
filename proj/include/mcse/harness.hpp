#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "mcse/corpus.hpp"
#include "mcse/jnf_net.hpp"
#include "mcse/roomsim.hpp"
#include "mcse/training.hpp"

namespace mcse {

// 64-bit FNV-1a over a file's bytes, rendered as 16 hex digits.
std::string fnv1a_file(const std::string& path);

struct DatasetConfig {
  std::string corpus_dir;
  int train_scenes = 300;
  int val_scenes = 50;
  int test_scenes = 50;
  int channels_min = 3;
  int channels_max = 3;
  int order_cap = 12;
  double min_utterance_seconds = 3.2;  // dry signals are looped up to this
  // Explicit per-split corpus files; when empty the corpus is split
  // 60/20/20 by filename order. The three lists must be disjoint.
  std::vector<std::string> train_files, val_files, test_files;
};

struct SweepConfig {
  double angle_start = -180.0;
  double angle_stop = 180.0;
  double angle_step = 5.0;
  double distance = 1.0;
  int probe_count = 15;
  double probe_seconds = 1.0;
  int noise_draws = 8;
};

// One configuration object shared by every command. `seed` is the master:
// the corpus, scenario, training, and probe streams are all derived from it,
// so a config plus a command name pins every artifact byte.
struct HarnessConfig {
  std::string preset = "desk";
  std::uint64_t seed = 0;
  CorpusConfig corpus;
  DatasetConfig dataset;
  NetSpec net;
  NetSpec pf_net;
  TrainConfig train;
  TrainConfig pf_train;
  SweepConfig sweep;
  int train_scene_limit = 0;  // 0 keeps the whole split
  int val_scene_limit = 0;
  int eval_scene_limit = 0;
  double cov_lambda = 0.95;
  bool steer_with_noise_cov = false;
};

// "desk" (runs on one CPU core) or "paper" (full-scale protocol).
HarnessConfig preset_config(const std::string& name);
std::string config_to_json(const HarnessConfig& config);
// Parses a possibly partial JSON object: the named preset supplies defaults,
// the object's fields override them, and derived seeds are recomputed.
HarnessConfig config_from_json(const std::string& text);
HarnessConfig load_config_file(const std::string& path);
// Re-derives the per-component seeds after changing the master seed.
void apply_seed(HarnessConfig& config, std::uint64_t seed);

// One line of dataset.jsonl.
struct SceneRecord {
  int id = 0;
  std::string split;
  std::uint64_t seed = 0;
  int channels = 0;
  double snr_db = 0.0;
  std::string dir;  // scene directory, relative to the dataset root
  std::string target_utt;
  std::vector<std::string> interferer_utts;
  Room room;
  Vec3 array_center{0, 0, 0};
  double array_rotation = 0.0;
  Vec3 target{0, 0, 0};
};

std::vector<SceneRecord> read_dataset(const std::string& dataset_dir);

struct RunManifest {
  std::string command;
  std::map<std::string, std::string> args;
  std::string config_json;
  std::uint64_t seed = 0;
  // Deterministic artifacts (relative paths); rerunning the manifest must
  // reproduce these byte for byte.
  std::vector<std::string> outputs;
  // Artifacts that legitimately embed wall-clock readings (training logs).
  std::vector<std::string> timing_outputs;
  std::map<std::string, std::string> output_hashes;
  double wall_seconds = 0.0;
};

void write_manifest(const std::string& out_dir, const RunManifest& manifest);
RunManifest read_manifest(const std::string& path);

RunManifest cmd_corpus(const HarnessConfig& config, const std::string& out_dir);
RunManifest cmd_simulate(const HarnessConfig& config,
                         const std::string& out_dir);
RunManifest cmd_train(const HarnessConfig& config,
                      const std::string& dataset_dir,
                      const std::string& out_dir);
// mode: oracle-cirm | oracle-mvdr | mvdr+pf | ckpt:<path> | nsf+pf:<path>.
// Two-stage modes train the post-filter on the train split's first-stage
// outputs before enhancing `split`.
RunManifest cmd_enhance(const HarnessConfig& config,
                        const std::string& dataset_dir,
                        const std::string& mode, const std::string& split,
                        const std::string& out_dir);
RunManifest cmd_evaluate(const HarnessConfig& config,
                         const std::string& dataset_dir,
                         const std::string& enhanced_dir,
                         const std::string& out_dir);
// variants: (label, enhance mode) pairs, one ablation.csv row each.
RunManifest cmd_ablation(
    const HarnessConfig& config, const std::string& dataset_dir,
    const std::vector<std::pair<std::string, std::string>>& variants,
    const std::string& out_dir);
// checkpoint: a .ckpt path, or the stubs "zero-mask" / "identity-mask".
RunManifest cmd_sweep_angle(const HarnessConfig& config,
                            const std::string& checkpoint,
                            const std::string& out_dir);
RunManifest cmd_noise_pattern(const HarnessConfig& config,
                              const std::string& checkpoint,
                              const std::string& out_dir);

// Re-dispatches the stored command with its stored config and arguments.
RunManifest rerun_manifest(const std::string& manifest_path,
                           const std::string& new_out_dir);

}  // namespace mcse
