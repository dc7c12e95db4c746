#include "mcse/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <json.hpp>

#include "mcse/common.hpp"
#include "mcse/linear_spatial.hpp"
#include "mcse/mask.hpp"
#include "mcse/metrics.hpp"

namespace mcse {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Stream tags separating the sub-seeds derived from the master seed. Scene
// and probe streams add their index to the tag.
constexpr std::uint64_t kCorpusTag = 1;
constexpr std::uint64_t kTrainTag = 2;
constexpr std::uint64_t kPfTrainTag = 3;
constexpr std::uint64_t kScenarioTag = 0x1000;
constexpr std::uint64_t kSceneDrawTag = 0x200000;
constexpr std::uint64_t kNsfSceneTag = 0x400000;
constexpr std::uint64_t kNsfProbeTag = 0x500000;
constexpr std::uint64_t kNsfNoiseTag = 0x600000;
constexpr std::uint64_t kProbeTag = 0x700000;
constexpr std::uint64_t kNoiseDrawTag = 0x800000;

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t tag) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (tag + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

struct Timer {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double elapsed() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
        .count();
  }
};

std::ofstream open_text(const std::string& path) {
  std::ofstream out(path);
  require(out.good(), "cannot open " + path + " for writing");
  return out;
}

void close_checked(std::ofstream& out, const std::string& path) {
  out.flush();
  require(out.good(), "write failed: " + path);
}

json parse_json(const std::string& text, const std::string& where) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    fail(where + ": " + e.what());
  }
}

void check_keys(const json& j, const std::string& where,
                std::initializer_list<const char*> allowed) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* a : allowed)
      if (it.key() == a) known = true;
    require(known, "config: unknown key '" + it.key() + "' in " + where);
  }
}

json train_to_json(const TrainConfig& t) {
  json j;
  j["batch_size"] = t.batch_size;
  j["max_epochs"] = t.max_epochs;
  j["learning_rate"] = t.learning_rate;
  j["crop_seconds"] = t.crop_seconds;
  j["alpha"] = t.alpha;
  j["patience"] = t.patience;
  j["use_noise_terms"] = t.use_noise_terms;
  return j;
}

TrainConfig train_from_json(const json& j, const std::string& where) {
  check_keys(j, where,
             {"batch_size", "max_epochs", "learning_rate", "crop_seconds",
              "alpha", "patience", "use_noise_terms"});
  TrainConfig t;
  j.at("batch_size").get_to(t.batch_size);
  j.at("max_epochs").get_to(t.max_epochs);
  j.at("learning_rate").get_to(t.learning_rate);
  j.at("crop_seconds").get_to(t.crop_seconds);
  j.at("alpha").get_to(t.alpha);
  j.at("patience").get_to(t.patience);
  j.at("use_noise_terms").get_to(t.use_noise_terms);
  return t;
}

HarnessConfig read_config(const json& j) {
  check_keys(j, "top level",
             {"preset", "seed", "corpus", "dataset", "net", "pf_net", "train",
              "pf_train", "sweep", "train_scene_limit", "val_scene_limit",
              "eval_scene_limit", "cov_lambda", "steer_with_noise_cov"});
  HarnessConfig c;
  j.at("preset").get_to(c.preset);
  c.seed = j.at("seed").get<std::uint64_t>();

  const json& co = j.at("corpus");
  check_keys(co, "corpus", {"count", "seconds_min", "seconds_max", "sample_rate"});
  co.at("count").get_to(c.corpus.count);
  co.at("seconds_min").get_to(c.corpus.seconds_min);
  co.at("seconds_max").get_to(c.corpus.seconds_max);
  co.at("sample_rate").get_to(c.corpus.sample_rate);

  const json& da = j.at("dataset");
  check_keys(da, "dataset",
             {"corpus_dir", "train_scenes", "val_scenes", "test_scenes",
              "channels_min", "channels_max", "order_cap",
              "min_utterance_seconds", "train_files", "val_files",
              "test_files"});
  da.at("corpus_dir").get_to(c.dataset.corpus_dir);
  da.at("train_scenes").get_to(c.dataset.train_scenes);
  da.at("val_scenes").get_to(c.dataset.val_scenes);
  da.at("test_scenes").get_to(c.dataset.test_scenes);
  da.at("channels_min").get_to(c.dataset.channels_min);
  da.at("channels_max").get_to(c.dataset.channels_max);
  da.at("order_cap").get_to(c.dataset.order_cap);
  da.at("min_utterance_seconds").get_to(c.dataset.min_utterance_seconds);
  da.at("train_files").get_to(c.dataset.train_files);
  da.at("val_files").get_to(c.dataset.val_files);
  da.at("test_files").get_to(c.dataset.test_files);

  c.net = netspec_from_json_string(j.at("net").dump());
  c.pf_net = netspec_from_json_string(j.at("pf_net").dump());
  c.train = train_from_json(j.at("train"), "train");
  c.pf_train = train_from_json(j.at("pf_train"), "pf_train");

  const json& sw = j.at("sweep");
  check_keys(sw, "sweep",
             {"angle_start", "angle_stop", "angle_step", "distance",
              "probe_count", "probe_seconds", "noise_draws"});
  sw.at("angle_start").get_to(c.sweep.angle_start);
  sw.at("angle_stop").get_to(c.sweep.angle_stop);
  sw.at("angle_step").get_to(c.sweep.angle_step);
  sw.at("distance").get_to(c.sweep.distance);
  sw.at("probe_count").get_to(c.sweep.probe_count);
  sw.at("probe_seconds").get_to(c.sweep.probe_seconds);
  sw.at("noise_draws").get_to(c.sweep.noise_draws);

  j.at("train_scene_limit").get_to(c.train_scene_limit);
  j.at("val_scene_limit").get_to(c.val_scene_limit);
  j.at("eval_scene_limit").get_to(c.eval_scene_limit);
  j.at("cov_lambda").get_to(c.cov_lambda);
  j.at("steer_with_noise_cov").get_to(c.steer_with_noise_cov);
  return c;
}

// Forces the derived-seed invariant so that a manifest's master seed alone
// pins every random stream.
HarnessConfig normalized(const HarnessConfig& config) {
  HarnessConfig c = config;
  apply_seed(c, config.seed);
  return c;
}

json scene_to_json(const SceneRecord& r) {
  json j;
  j["id"] = r.id;
  j["split"] = r.split;
  j["seed"] = r.seed;
  j["channels"] = r.channels;
  j["snr_db"] = r.snr_db;
  j["dir"] = r.dir;
  j["target_utt"] = r.target_utt;
  j["interferer_utts"] = r.interferer_utts;
  j["room"] = {{"width", r.room.width},
               {"length", r.room.length},
               {"height", r.room.height},
               {"t60", r.room.t60}};
  j["array_center"] = r.array_center;
  j["array_rotation"] = r.array_rotation;
  j["target"] = r.target;
  return j;
}

SceneRecord scene_from_json(const json& j) {
  SceneRecord r;
  j.at("id").get_to(r.id);
  j.at("split").get_to(r.split);
  r.seed = j.at("seed").get<std::uint64_t>();
  j.at("channels").get_to(r.channels);
  j.at("snr_db").get_to(r.snr_db);
  j.at("dir").get_to(r.dir);
  j.at("target_utt").get_to(r.target_utt);
  j.at("interferer_utts").get_to(r.interferer_utts);
  const json& room = j.at("room");
  room.at("width").get_to(r.room.width);
  room.at("length").get_to(r.room.length);
  room.at("height").get_to(r.room.height);
  room.at("t60").get_to(r.room.t60);
  r.array_center = j.at("array_center").get<Vec3>();
  j.at("array_rotation").get_to(r.array_rotation);
  r.target = j.at("target").get<Vec3>();
  return r;
}

RunManifest make_manifest(const HarnessConfig& config, std::string command,
                          std::map<std::string, std::string> args) {
  RunManifest m;
  m.command = std::move(command);
  m.args = std::move(args);
  m.config_json = config_to_json(config);
  m.seed = config.seed;
  return m;
}

void finish_manifest(RunManifest& m, const std::string& out_dir,
                     const Timer& timer) {
  for (const std::string& rel : m.outputs)
    m.output_hashes[rel] = fnv1a_file(out_dir + "/" + rel);
  m.wall_seconds = timer.elapsed();
  write_manifest(out_dir, m);
}

std::string scene_dir_name(int id) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "scenes/scene_%06d", id);
  return buf;
}

std::string enhanced_wav_name(int id) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "enhanced/scene_%06d.wav", id);
  return buf;
}

std::vector<SceneRecord> pick_split(const std::vector<SceneRecord>& records,
                                    const std::string& split, int limit) {
  std::vector<SceneRecord> out;
  for (const SceneRecord& r : records)
    if (r.split == split) out.push_back(r);
  if (limit > 0 && static_cast<int>(out.size()) > limit) out.resize(limit);
  return out;
}

int split_limit(const HarnessConfig& config, const std::string& split) {
  if (split == "train") return config.train_scene_limit;
  if (split == "val") return config.val_scene_limit;
  if (split == "test") return config.eval_scene_limit;
  fail("unknown split '" + split + "'");
}

MultiWave read_scene_wav(const std::string& dataset_dir, const SceneRecord& r,
                         const char* name) {
  return read_wav(dataset_dir + "/" + r.dir + "/" + name);
}

Spectrogram channel_slice(const Spectrogram& spec, int c) {
  require(c >= 0 && c < spec.channels, "channel_slice: channel out of range");
  Spectrogram out;
  out.params = spec.params;
  out.channels = 1;
  out.bins = spec.bins;
  out.frames = spec.frames;
  const std::size_t plane =
      static_cast<std::size_t>(spec.bins) * spec.frames;
  out.data.assign(spec.data.begin() + c * plane,
                  spec.data.begin() + (c + 1) * plane);
  return out;
}

// Zero-pads or truncates every channel to the requested length; synthesis
// output never matches the input sample count exactly.
MultiWave fit_wave(MultiWave wave, std::int64_t length) {
  for (auto& ch : wave.channels) ch.resize(length, 0.0);
  return wave;
}

ComplexMask constant_mask(int bins, int frames, cdouble value) {
  ComplexMask m;
  m.bins = bins;
  m.frames = frames;
  m.compressed = false;
  m.data.assign(static_cast<std::size_t>(bins) * frames, value);
  return m;
}

MultiWave run_cirm(const MultiWave& mixture, const MultiWave& target_ref) {
  const FrameParams fp;
  Spectrogram y0 = channel_slice(analyze(mixture, fp), 0);
  Spectrogram s = analyze(target_ref, fp);
  ComplexMask m = ideal_cirm(s, y0);
  return fit_wave(synthesize(apply_mask(m, y0)), mixture.length());
}

MultiWave run_mvdr(const HarnessConfig& config, const MultiWave& mixture,
                   const MultiWave& noise_ref, double* max_err) {
  const FrameParams fp;
  MultiWave reverberant = mixture;
  for (int c = 0; c < mixture.channel_count(); ++c)
    for (std::int64_t i = 0; i < mixture.length(); ++i)
      reverberant.channels[c][i] -= noise_ref.channels[c][i];
  Spectrogram y = analyze(mixture, fp);
  CovarianceField phi_s =
      recursive_cov(analyze(reverberant, fp), config.cov_lambda);
  CovarianceField phi_v =
      recursive_cov(analyze(noise_ref, fp), config.cov_lambda);
  SteeringField d =
      estimate_steering(phi_s, phi_v, config.steer_with_noise_cov);
  VecField h = mvdr_field(phi_v, d);
  if (max_err != nullptr) {
    double worst = 0.0;
    for (int f = 0; f < h.bins; ++f)
      for (int t = 0; t < h.frames; ++t)
        worst = std::max(worst, std::abs(dot(h.at(f, t), d.at(f, t)) - 1.0));
    *max_err = worst;
  }
  return fit_wave(synthesize(apply_filter(h, y)), mixture.length());
}

MultiWave run_checkpoint(const HarnessConfig& config, const NetParams& params,
                         const MultiWave& input, std::uint64_t perm_tag) {
  require(params.spec.channels == input.channel_count(),
          "enhance: checkpoint expects " +
              std::to_string(params.spec.channels) + " channels, input has " +
              std::to_string(input.channel_count()));
  const FrameParams fp;
  Spectrogram y = analyze(input, fp);
  NsfPerms perms;
  if (params.spec.nsf) {
    Rng rng(mix_seed(config.seed, perm_tag));
    perms = draw_nsf_perms(params.spec, y.frames, rng);
  }
  ComplexMask mask = decompress(infer_mask(params, y, perms));
  Spectrogram y0 = channel_slice(y, 0);
  return fit_wave(synthesize(apply_mask(mask, y0)), input.length());
}

constexpr std::int64_t kEdgeTrim = 512;  // analysis window of settling

std::vector<double> edge_trim(const std::vector<double>& x) {
  require(static_cast<std::int64_t>(x.size()) > 2 * kEdgeTrim,
          "signal too short for edge trimming");
  return std::vector<double>(x.begin() + kEdgeTrim, x.end() - kEdgeTrim);
}

std::vector<double> angle_grid(const SweepConfig& sweep) {
  require(sweep.angle_step > 0.0, "sweep: angle_step must be positive");
  require(sweep.angle_stop >= sweep.angle_start,
          "sweep: angle_stop below angle_start");
  const int n = static_cast<int>(std::llround(
                    (sweep.angle_stop - sweep.angle_start) /
                    sweep.angle_step)) +
                1;
  std::vector<double> out(n);
  for (int i = 0; i < n; ++i)
    out[i] = sweep.angle_start + i * sweep.angle_step;
  return out;
}

// A checkpoint path, or one of the harness mask stubs.
struct MaskSource {
  enum class Kind { Net, Zero, Identity };
  Kind kind = Kind::Net;
  NetParams params;

  int channels(const HarnessConfig& config) const {
    return kind == Kind::Net ? params.spec.channels : config.net.channels;
  }
};

MaskSource load_mask_source(const std::string& checkpoint) {
  MaskSource src;
  if (checkpoint == "zero-mask") {
    src.kind = MaskSource::Kind::Zero;
  } else if (checkpoint == "identity-mask") {
    src.kind = MaskSource::Kind::Identity;
  } else {
    src.params = load_checkpoint(checkpoint);
    require(src.params.spec.mode != NetMode::PF,
            "probe commands take a spatial filter checkpoint, not a "
            "post-filter");
  }
  return src;
}

ComplexMask probe_mask(const MaskSource& src, const HarnessConfig& config,
                       const Spectrogram& y, std::uint64_t perm_tag) {
  if (src.kind == MaskSource::Kind::Zero)
    return constant_mask(y.bins, y.frames, 0.0);
  if (src.kind == MaskSource::Kind::Identity)
    return constant_mask(y.bins, y.frames, 1.0);
  NsfPerms perms;
  if (src.params.spec.nsf) {
    Rng rng(mix_seed(config.seed, perm_tag));
    perms = draw_nsf_perms(src.params.spec, y.frames, rng);
  }
  return decompress(infer_mask(src.params, y, perms));
}

void write_sweep_svg(const std::string& path,
                     const std::vector<double>& angles,
                     const std::vector<double>& retention) {
  const int w = 640, h = 360, ml = 60, mr = 15, mt = 15, mb = 40;
  const double a0 = angles.front(), a1 = angles.back();
  const double span = std::max(a1 - a0, 1e-9);
  double rmax = 1e-12;
  for (double r : retention) rmax = std::max(rmax, r);
  auto px = [&](double a) { return ml + (a - a0) / span * (w - ml - mr); };
  auto py = [&](double r) { return h - mb - r / rmax * (h - mt - mb); };

  std::ofstream out = open_text(path);
  char buf[256];
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w
      << "\" height=\"" << h << "\">\n";
  std::snprintf(buf, sizeof buf,
                "<line x1=\"%d\" y1=\"%d\" x2=\"%d\" y2=\"%d\" "
                "stroke=\"black\"/>\n",
                ml, h - mb, w - mr, h - mb);
  out << buf;
  std::snprintf(buf, sizeof buf,
                "<line x1=\"%d\" y1=\"%d\" x2=\"%d\" y2=\"%d\" "
                "stroke=\"black\"/>\n",
                ml, mt, ml, h - mb);
  out << buf;
  out << "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"1.5\" "
         "points=\"";
  for (std::size_t i = 0; i < angles.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.2f,%.2f ", px(angles[i]),
                  py(retention[i]));
    out << buf;
  }
  out << "\"/>\n";
  std::snprintf(buf, sizeof buf,
                "<text x=\"%d\" y=\"%d\" font-size=\"12\">%g</text>\n", ml - 4,
                h - mb + 16, a0);
  out << buf;
  std::snprintf(buf, sizeof buf,
                "<text x=\"%d\" y=\"%d\" font-size=\"12\">%g</text>\n",
                w - mr - 24, h - mb + 16, a1);
  out << buf;
  std::snprintf(buf, sizeof buf,
                "<text x=\"%d\" y=\"%d\" font-size=\"12\">%.3g</text>\n", 8,
                mt + 10, rmax);
  out << buf;
  std::snprintf(buf, sizeof buf,
                "<text x=\"%d\" y=\"%d\" font-size=\"12\">angle (deg)</text>\n",
                (ml + w - mr) / 2 - 30, h - 8);
  out << buf;
  std::snprintf(
      buf, sizeof buf,
      "<text x=\"8\" y=\"%d\" font-size=\"12\">energy retention</text>\n",
      (mt + h - mb) / 2);
  out << buf;
  out << "</svg>\n";
  close_checked(out, path);
}

void write_pgm(const std::string& path, int width, int height,
               const std::vector<std::uint8_t>& pixels) {
  require(static_cast<std::size_t>(width) * height == pixels.size(),
          "write_pgm: size mismatch");
  std::ofstream out(path, std::ios::binary);
  require(out.good(), "cannot open " + path + " for writing");
  out << "P5\n" << width << " " << height << "\n255\n";
  out.write(reinterpret_cast<const char*>(pixels.data()),
            static_cast<std::streamsize>(pixels.size()));
  close_checked(out, path);
}

std::map<std::string, std::array<double, 3>> read_summary_csv(
    const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "cannot open " + path);
  std::string line;
  require(static_cast<bool>(std::getline(in, line)) &&
              line == "metric,count,mean,ci95",
          "unexpected summary header in " + path);
  std::map<std::string, std::array<double, 3>> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    char name[64];
    std::size_t count = 0;
    double mean = 0.0, ci = 0.0;
    require(std::sscanf(line.c_str(), "%63[^,],%zu,%lf,%lf", name, &count,
                        &mean, &ci) == 4,
            "unparseable summary row in " + path);
    out[name] = {static_cast<double>(count), mean, ci};
  }
  return out;
}

}  // namespace

std::string fnv1a_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "fnv1a_file: cannot open " + path);
  std::uint64_t h = 1469598103934665603ull;
  char buf[65536];
  while (true) {
    in.read(buf, sizeof buf);
    const std::streamsize got = in.gcount();
    for (std::streamsize i = 0; i < got; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ull;
    }
    if (got < static_cast<std::streamsize>(sizeof buf)) break;
  }
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx",
                static_cast<unsigned long long>(h));
  return hex;
}

void apply_seed(HarnessConfig& config, std::uint64_t seed) {
  config.seed = seed;
  config.corpus.seed = mix_seed(seed, kCorpusTag);
  config.train.seed = mix_seed(seed, kTrainTag);
  config.pf_train.seed = mix_seed(seed, kPfTrainTag);
}

HarnessConfig preset_config(const std::string& name) {
  HarnessConfig c;
  c.preset = name;
  if (name == "desk") {
    c.corpus.count = 40;
    c.dataset.train_scenes = 300;
    c.dataset.val_scenes = 50;
    c.dataset.test_scenes = 50;
    c.dataset.channels_min = 3;
    c.dataset.channels_max = 3;
    c.dataset.order_cap = 12;
    c.net = NetSpec{NetMode::FT, false, 64, 32, true, 3, 257, false};
    c.pf_net = NetSpec{NetMode::PF, false, 64, 32, true, 1, 257, false};
    c.train.batch_size = 3;
    c.train.max_epochs = 12;
    c.train.crop_seconds = 2.0;
    c.train.patience = 12;
    c.pf_train.batch_size = 3;
    c.pf_train.max_epochs = 6;
    c.pf_train.crop_seconds = 2.0;
    c.pf_train.patience = 6;
    c.pf_train.use_noise_terms = false;
    c.sweep.angle_step = 5.0;
    c.train_scene_limit = 24;
    c.val_scene_limit = 6;
    c.eval_scene_limit = 20;
  } else if (name == "paper") {
    c.corpus.count = 400;
    c.dataset.train_scenes = 6000;
    c.dataset.val_scenes = 1000;
    c.dataset.test_scenes = 600;
    c.dataset.channels_min = 2;
    c.dataset.channels_max = 5;
    c.dataset.order_cap = 100;
    c.net = NetSpec{NetMode::FT, false, 256, 128, true, 3, 257, false};
    c.pf_net = NetSpec{NetMode::PF, false, 256, 256, true, 1, 257, false};
    c.train.batch_size = 6;
    c.train.max_epochs = 250;
    c.train.crop_seconds = 3.0;
    c.train.patience = 25;
    c.pf_train.batch_size = 6;
    c.pf_train.max_epochs = 250;
    c.pf_train.crop_seconds = 3.0;
    c.pf_train.patience = 25;
    c.pf_train.use_noise_terms = false;
    c.sweep.angle_step = 1.0;
  } else {
    fail("unknown preset '" + name + "'");
  }
  apply_seed(c, 0);
  return c;
}

std::string config_to_json(const HarnessConfig& config) {
  json j;
  j["preset"] = config.preset;
  j["seed"] = config.seed;
  j["corpus"] = {{"count", config.corpus.count},
                 {"seconds_min", config.corpus.seconds_min},
                 {"seconds_max", config.corpus.seconds_max},
                 {"sample_rate", config.corpus.sample_rate}};
  j["dataset"] = {{"corpus_dir", config.dataset.corpus_dir},
                  {"train_scenes", config.dataset.train_scenes},
                  {"val_scenes", config.dataset.val_scenes},
                  {"test_scenes", config.dataset.test_scenes},
                  {"channels_min", config.dataset.channels_min},
                  {"channels_max", config.dataset.channels_max},
                  {"order_cap", config.dataset.order_cap},
                  {"min_utterance_seconds",
                   config.dataset.min_utterance_seconds},
                  {"train_files", config.dataset.train_files},
                  {"val_files", config.dataset.val_files},
                  {"test_files", config.dataset.test_files}};
  j["net"] = parse_json(netspec_to_json_string(config.net), "netspec");
  j["pf_net"] = parse_json(netspec_to_json_string(config.pf_net), "netspec");
  j["train"] = train_to_json(config.train);
  j["pf_train"] = train_to_json(config.pf_train);
  j["sweep"] = {{"angle_start", config.sweep.angle_start},
                {"angle_stop", config.sweep.angle_stop},
                {"angle_step", config.sweep.angle_step},
                {"distance", config.sweep.distance},
                {"probe_count", config.sweep.probe_count},
                {"probe_seconds", config.sweep.probe_seconds},
                {"noise_draws", config.sweep.noise_draws}};
  j["train_scene_limit"] = config.train_scene_limit;
  j["val_scene_limit"] = config.val_scene_limit;
  j["eval_scene_limit"] = config.eval_scene_limit;
  j["cov_lambda"] = config.cov_lambda;
  j["steer_with_noise_cov"] = config.steer_with_noise_cov;
  return j.dump(2);
}

HarnessConfig config_from_json(const std::string& text) {
  json patch = parse_json(text, "config");
  require(patch.is_object(), "config: top level must be a JSON object");
  std::string preset = "desk";
  if (patch.contains("preset")) patch.at("preset").get_to(preset);
  json merged = parse_json(config_to_json(preset_config(preset)), "preset");
  merged.merge_patch(patch);
  HarnessConfig c;
  try {
    c = read_config(merged);
  } catch (const json::exception& e) {
    fail(std::string("config: ") + e.what());
  }
  apply_seed(c, c.seed);
  return c;
}

HarnessConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "cannot open config file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return config_from_json(buf.str());
}

std::vector<SceneRecord> read_dataset(const std::string& dataset_dir) {
  const std::string path = dataset_dir + "/dataset.jsonl";
  std::ifstream in(path);
  require(in.good(), "cannot open " + path);
  std::vector<SceneRecord> records;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      records.push_back(scene_from_json(parse_json(line, path)));
    } catch (const json::exception& e) {
      fail(path + ": " + e.what());
    }
  }
  require(!records.empty(), path + " holds no scenes");
  return records;
}

void write_manifest(const std::string& out_dir, const RunManifest& manifest) {
  json j;
  j["command"] = manifest.command;
  j["args"] = manifest.args;
  j["seed"] = manifest.seed;
  j["config"] = parse_json(manifest.config_json, "manifest config");
  j["outputs"] = manifest.outputs;
  j["timing_outputs"] = manifest.timing_outputs;
  j["output_hashes"] = manifest.output_hashes;
  j["wall_seconds"] = manifest.wall_seconds;
  const std::string path = out_dir + "/manifest.json";
  std::ofstream out = open_text(path);
  out << j.dump(2) << "\n";
  close_checked(out, path);
}

RunManifest read_manifest(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "cannot open manifest " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  json j = parse_json(buf.str(), path);
  RunManifest m;
  try {
    j.at("command").get_to(m.command);
    m.args = j.at("args").get<std::map<std::string, std::string>>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.config_json = j.at("config").dump();
    j.at("outputs").get_to(m.outputs);
    j.at("timing_outputs").get_to(m.timing_outputs);
    m.output_hashes =
        j.at("output_hashes").get<std::map<std::string, std::string>>();
    j.at("wall_seconds").get_to(m.wall_seconds);
  } catch (const json::exception& e) {
    fail(path + ": " + e.what());
  }
  return m;
}

RunManifest cmd_corpus(const HarnessConfig& raw_config,
                       const std::string& out_dir) {
  Timer timer;
  const HarnessConfig config = normalized(raw_config);
  RunManifest m = make_manifest(config, "corpus", {});
  m.outputs = write_corpus(out_dir, config.corpus);
  finish_manifest(m, out_dir, timer);
  return m;
}

RunManifest cmd_simulate(const HarnessConfig& raw_config,
                         const std::string& out_dir) {
  Timer timer;
  const HarnessConfig config = normalized(raw_config);
  const DatasetConfig& d = config.dataset;
  require(!d.corpus_dir.empty(), "simulate: dataset.corpus_dir is not set");
  DryCorpus corpus(d.corpus_dir);

  std::map<std::string, std::size_t> by_name;
  for (std::size_t i = 0; i < corpus.size(); ++i) by_name[corpus.name(i)] = i;
  auto lookup = [&](const std::vector<std::string>& names) {
    std::vector<std::size_t> out;
    for (const std::string& n : names) {
      auto it = by_name.find(n);
      require(it != by_name.end(), "simulate: '" + n + "' not in corpus");
      out.push_back(it->second);
    }
    return out;
  };

  std::array<std::vector<std::size_t>, 3> splits;
  if (!d.train_files.empty() || !d.val_files.empty() ||
      !d.test_files.empty()) {
    splits = {lookup(d.train_files), lookup(d.val_files),
              lookup(d.test_files)};
    std::set<std::size_t> seen;
    std::size_t total = 0;
    for (const auto& s : splits) {
      require(!s.empty(), "simulate: every explicit split needs files");
      seen.insert(s.begin(), s.end());
      total += s.size();
    }
    require(seen.size() == total, "simulate: splits share corpus files");
  } else {
    const std::size_t n = corpus.size();
    require(n >= 3, "simulate: corpus too small to split three ways");
    std::size_t n_train = std::max<std::size_t>(1, std::llround(0.6 * n));
    std::size_t n_val = std::max<std::size_t>(1, std::llround(0.2 * n));
    while (n_train + n_val + 1 > n) (n_train > n_val ? n_train : n_val) -= 1;
    for (std::size_t i = 0; i < n; ++i) {
      const int s = i < n_train ? 0 : (i < n_train + n_val ? 1 : 2);
      splits[s].push_back(i);
    }
  }

  SamplerConfig sampler;
  sampler.channels_min = d.channels_min;
  sampler.channels_max = d.channels_max;
  RenderConfig render;
  render.max_order_cap = d.order_cap;
  const std::int64_t min_len =
      std::llround(d.min_utterance_seconds * corpus.sample_rate());

  RunManifest m = make_manifest(config, "simulate", {});
  std::vector<SceneRecord> records;
  const std::array<std::pair<const char*, int>, 3> plan{
      {{"train", d.train_scenes}, {"val", d.val_scenes},
       {"test", d.test_scenes}}};
  int id = 0;
  for (std::size_t si = 0; si < plan.size(); ++si) {
    const auto& [split, count] = plan[si];
    require(count >= 1, std::string("simulate: ") + split +
                            " needs at least one scene");
    const std::vector<std::size_t>& files = splits[si];
    for (int k = 0; k < count; ++k, ++id) {
      const std::uint64_t scenario_seed =
          mix_seed(config.seed, kScenarioTag + id);
      Scenario scenario = sample_scenario(scenario_seed, sampler);
      Rng draw(mix_seed(config.seed, kSceneDrawTag + id));
      const std::size_t target_idx =
          files[draw.uniform_int(static_cast<int>(files.size()))];
      std::vector<std::size_t> interferer_idx;
      for (std::size_t j = 0; j < scenario.interferers.size(); ++j) {
        std::size_t pick;
        do {
          pick = files[draw.uniform_int(static_cast<int>(files.size()))];
        } while (files.size() > 1 && pick == target_idx);
        interferer_idx.push_back(pick);
      }
      MultiWave target = corpus.utterance(target_idx, min_len);
      std::vector<MultiWave> interferers;
      for (std::size_t idx : interferer_idx)
        interferers.push_back(corpus.utterance(idx, target.length()));
      Scene scene = render_scene(scenario, target, interferers, render);

      const std::string rel = scene_dir_name(id);
      fs::create_directories(out_dir + "/" + rel);
      write_wav(out_dir + "/" + rel + "/mixture.wav", scene.mixture);
      write_wav(out_dir + "/" + rel + "/target_ref.wav", scene.target_ref);
      write_wav(out_dir + "/" + rel + "/noise_ref.wav", scene.noise_ref);
      m.outputs.push_back(rel + "/mixture.wav");
      m.outputs.push_back(rel + "/target_ref.wav");
      m.outputs.push_back(rel + "/noise_ref.wav");

      SceneRecord rec;
      rec.id = id;
      rec.split = split;
      rec.seed = scenario_seed;
      rec.channels = scenario.array.channel_count;
      rec.snr_db = scene.snr_db;
      rec.dir = rel;
      rec.target_utt = corpus.name(target_idx);
      for (std::size_t idx : interferer_idx)
        rec.interferer_utts.push_back(corpus.name(idx));
      rec.room = scenario.room;
      rec.array_center = scenario.array.center;
      rec.array_rotation = scenario.array.rotation;
      rec.target = scenario.target;
      records.push_back(rec);
    }
  }

  const std::string jsonl = out_dir + "/dataset.jsonl";
  std::ofstream out = open_text(jsonl);
  for (const SceneRecord& r : records) out << scene_to_json(r).dump() << "\n";
  close_checked(out, jsonl);
  m.outputs.insert(m.outputs.begin(), "dataset.jsonl");
  finish_manifest(m, out_dir, timer);
  return m;
}

namespace {

TrainScene load_train_scene(const std::string& dataset_dir,
                            const SceneRecord& rec) {
  TrainScene s;
  s.mixture = read_scene_wav(dataset_dir, rec, "mixture.wav");
  s.target_ref = read_scene_wav(dataset_dir, rec, "target_ref.wav");
  MultiWave noise = read_scene_wav(dataset_dir, rec, "noise_ref.wav");
  s.noise_ref = MultiWave(1, noise.length(), noise.sample_rate);
  s.noise_ref.channels[0] = noise.channels[0];
  return s;
}

std::vector<SceneRecord> pick_channel_split(
    const std::vector<SceneRecord>& records, const std::string& split,
    int channels, int limit) {
  std::vector<SceneRecord> out;
  for (const SceneRecord& r : records)
    if (r.split == split && r.channels == channels) out.push_back(r);
  if (limit > 0 && static_cast<int>(out.size()) > limit) out.resize(limit);
  return out;
}

}  // namespace

RunManifest cmd_train(const HarnessConfig& raw_config,
                      const std::string& dataset_dir,
                      const std::string& out_dir) {
  Timer timer;
  const HarnessConfig config = normalized(raw_config);
  RunManifest m =
      make_manifest(config, "train", {{"dataset_dir", dataset_dir}});
  const std::vector<SceneRecord> records = read_dataset(dataset_dir);
  const std::vector<SceneRecord> train_recs = pick_channel_split(
      records, "train", config.net.channels, config.train_scene_limit);
  const std::vector<SceneRecord> val_recs = pick_channel_split(
      records, "val", config.net.channels, config.val_scene_limit);
  require(!train_recs.empty() && !val_recs.empty(),
          "train: dataset has no train/val scenes with " +
              std::to_string(config.net.channels) + " channels");

  std::vector<TrainScene> train_scenes, val_scenes;
  for (const SceneRecord& r : train_recs)
    train_scenes.push_back(load_train_scene(dataset_dir, r));
  for (const SceneRecord& r : val_recs)
    val_scenes.push_back(load_train_scene(dataset_dir, r));

  fs::create_directories(out_dir);
  TrainResult result =
      train(config.net, train_scenes, val_scenes, config.train);
  save_checkpoint(out_dir + "/checkpoint.ckpt", result.best);
  write_training_log(out_dir + "/training_log.csv", result.log);
  m.outputs = {"checkpoint.ckpt"};
  m.timing_outputs = {"training_log.csv"};
  finish_manifest(m, out_dir, timer);
  return m;
}

namespace {

struct EnhancePlan {
  enum class Stage1 { Cirm, Mvdr, Net };
  Stage1 stage1 = Stage1::Mvdr;
  bool post_filter = false;
  bool log_distortionless = false;
  NetParams net;
};

EnhancePlan make_plan(const std::string& mode) {
  EnhancePlan plan;
  if (mode == "oracle-cirm") {
    plan.stage1 = EnhancePlan::Stage1::Cirm;
  } else if (mode == "oracle-mvdr") {
    plan.stage1 = EnhancePlan::Stage1::Mvdr;
    plan.log_distortionless = true;
  } else if (mode == "mvdr+pf") {
    plan.stage1 = EnhancePlan::Stage1::Mvdr;
    plan.post_filter = true;
  } else if (mode.starts_with("ckpt:")) {
    plan.stage1 = EnhancePlan::Stage1::Net;
    plan.net = load_checkpoint(mode.substr(5));
  } else if (mode.starts_with("nsf+pf:")) {
    plan.stage1 = EnhancePlan::Stage1::Net;
    plan.net = load_checkpoint(mode.substr(7));
    plan.post_filter = true;
  } else {
    fail("enhance: unknown mode '" + mode + "'");
  }
  if (plan.stage1 == EnhancePlan::Stage1::Net)
    require(plan.net.spec.mode != NetMode::PF,
            "enhance: a post-filter checkpoint cannot run as the first "
            "stage; use mvdr+pf or nsf+pf");
  return plan;
}

MultiWave run_stage1(const EnhancePlan& plan, const HarnessConfig& config,
                     const std::string& dataset_dir, const SceneRecord& rec,
                     double* max_err) {
  const MultiWave mixture = read_scene_wav(dataset_dir, rec, "mixture.wav");
  switch (plan.stage1) {
    case EnhancePlan::Stage1::Cirm:
      return run_cirm(mixture,
                      read_scene_wav(dataset_dir, rec, "target_ref.wav"));
    case EnhancePlan::Stage1::Mvdr:
      return run_mvdr(config, mixture,
                      read_scene_wav(dataset_dir, rec, "noise_ref.wav"),
                      max_err);
    case EnhancePlan::Stage1::Net:
      return run_checkpoint(config, plan.net, mixture,
                            kNsfSceneTag + rec.id);
  }
  fail("enhance: unhandled stage");
}

}  // namespace

RunManifest cmd_enhance(const HarnessConfig& raw_config,
                        const std::string& dataset_dir,
                        const std::string& mode, const std::string& split,
                        const std::string& out_dir) {
  Timer timer;
  const HarnessConfig config = normalized(raw_config);
  RunManifest m = make_manifest(
      config, "enhance",
      {{"dataset_dir", dataset_dir}, {"mode", mode}, {"split", split}});
  EnhancePlan plan = make_plan(mode);

  const std::vector<SceneRecord> records = read_dataset(dataset_dir);
  auto select = [&](const std::string& s, int limit) {
    return plan.stage1 == EnhancePlan::Stage1::Net
               ? pick_channel_split(records, s, plan.net.spec.channels, limit)
               : pick_split(records, s, limit);
  };
  const std::vector<SceneRecord> recs =
      select(split, split_limit(config, split));
  require(!recs.empty(), "enhance: no usable scenes in split '" + split + "'");
  fs::create_directories(out_dir + "/enhanced");

  NetParams pf;
  if (plan.post_filter) {
    const std::vector<SceneRecord> pf_train_recs =
        select("train", config.train_scene_limit);
    const std::vector<SceneRecord> pf_val_recs =
        select("val", config.val_scene_limit);
    require(!pf_train_recs.empty() && !pf_val_recs.empty(),
            "enhance: post-filter training needs train and val scenes");
    auto stage1_scene = [&](const SceneRecord& r) {
      TrainScene s;
      s.mixture = run_stage1(plan, config, dataset_dir, r, nullptr);
      s.target_ref = read_scene_wav(dataset_dir, r, "target_ref.wav");
      // The speech-only loss ignores the noise branch; a zero wave keeps the
      // scene layout uniform.
      s.noise_ref = MultiWave(1, s.mixture.length(), s.mixture.sample_rate);
      return s;
    };
    std::vector<TrainScene> pf_train_scenes, pf_val_scenes;
    for (const SceneRecord& r : pf_train_recs)
      pf_train_scenes.push_back(stage1_scene(r));
    for (const SceneRecord& r : pf_val_recs)
      pf_val_scenes.push_back(stage1_scene(r));
    TrainConfig pf_cfg = config.pf_train;
    pf_cfg.use_noise_terms = false;
    TrainResult result =
        train(config.pf_net, pf_train_scenes, pf_val_scenes, pf_cfg);
    pf = result.best;
    save_checkpoint(out_dir + "/pf_checkpoint.ckpt", pf);
    write_training_log(out_dir + "/pf_training_log.csv", result.log);
    m.outputs.push_back("pf_checkpoint.ckpt");
    m.timing_outputs.push_back("pf_training_log.csv");
  }

  std::vector<std::pair<int, double>> distortionless;
  for (const SceneRecord& rec : recs) {
    double max_err = 0.0;
    MultiWave wave = run_stage1(plan, config, dataset_dir, rec,
                                plan.log_distortionless ? &max_err : nullptr);
    if (plan.log_distortionless) distortionless.emplace_back(rec.id, max_err);
    if (plan.post_filter)
      wave = run_checkpoint(config, pf, wave, kNsfSceneTag + rec.id);
    const std::string rel = enhanced_wav_name(rec.id);
    write_wav(out_dir + "/" + rel, wave);
    m.outputs.push_back(rel);
  }

  if (plan.log_distortionless) {
    const std::string path = out_dir + "/enhance_log.csv";
    std::ofstream out = open_text(path);
    out << "scene_id,distortionless_max_err\n";
    char buf[64];
    for (const auto& [id, err] : distortionless) {
      std::snprintf(buf, sizeof buf, "%d,%.12g\n", id, err);
      out << buf;
    }
    close_checked(out, path);
    m.outputs.push_back("enhance_log.csv");
  }
  finish_manifest(m, out_dir, timer);
  return m;
}

RunManifest cmd_evaluate(const HarnessConfig& raw_config,
                         const std::string& dataset_dir,
                         const std::string& enhanced_dir,
                         const std::string& out_dir) {
  Timer timer;
  const HarnessConfig config = normalized(raw_config);
  RunManifest m = make_manifest(
      config, "evaluate",
      {{"dataset_dir", dataset_dir}, {"enhanced_dir", enhanced_dir}});
  const std::vector<SceneRecord> records = read_dataset(dataset_dir);

  struct Row {
    const SceneRecord* rec;
    double si_noisy, si_enh, estoi_noisy, estoi_enh;
  };
  std::vector<Row> rows;
  for (const SceneRecord& rec : records) {
    const std::string path = enhanced_dir + "/" + enhanced_wav_name(rec.id);
    if (!fs::exists(path)) continue;
    const MultiWave mixture = read_scene_wav(dataset_dir, rec, "mixture.wav");
    const MultiWave target =
        read_scene_wav(dataset_dir, rec, "target_ref.wav");
    const MultiWave enhanced = read_wav(path);
    require(enhanced.channel_count() == 1,
            "evaluate: enhanced scenes must be single channel");
    require(enhanced.length() == mixture.length(),
            "evaluate: enhanced length differs from the mixture");
    const std::vector<double> ref = edge_trim(target.channels[0]);
    const std::vector<double> noisy = edge_trim(mixture.channels[0]);
    const std::vector<double> enh = edge_trim(enhanced.channels[0]);
    Row row{&rec, si_sdr(noisy, ref), si_sdr(enh, ref),
            estoi(noisy, ref, mixture.sample_rate),
            estoi(enh, ref, mixture.sample_rate)};
    rows.push_back(row);
  }
  require(!rows.empty(),
          "evaluate: no enhanced scenes found under " + enhanced_dir);

  fs::create_directories(out_dir);
  const std::string per_scene = out_dir + "/per_scene.csv";
  std::ofstream out = open_text(per_scene);
  out << "scene_id,split,snr_db,si_sdr_noisy,si_sdr_enhanced,delta_si_sdr,"
         "estoi_noisy,estoi_enhanced\n";
  char buf[256];
  for (const Row& r : rows) {
    std::snprintf(buf, sizeof buf,
                  "%d,%s,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g\n", r.rec->id,
                  r.rec->split.c_str(), r.rec->snr_db, r.si_noisy, r.si_enh,
                  r.si_enh - r.si_noisy, r.estoi_noisy, r.estoi_enh);
    out << buf;
  }
  close_checked(out, per_scene);

  auto column = [&](auto getter) {
    std::vector<double> v;
    for (const Row& r : rows) v.push_back(getter(r));
    return MetricReport::from_values(v);
  };
  const std::vector<std::string> names = {"si_sdr_noisy", "si_sdr_enhanced",
                                          "delta_si_sdr", "estoi_noisy",
                                          "estoi_enhanced"};
  const std::vector<MetricReport> reports = {
      column([](const Row& r) { return r.si_noisy; }),
      column([](const Row& r) { return r.si_enh; }),
      column([](const Row& r) { return r.si_enh - r.si_noisy; }),
      column([](const Row& r) { return r.estoi_noisy; }),
      column([](const Row& r) { return r.estoi_enh; })};
  write_metric_csv(out_dir + "/summary.csv", names, reports);

  m.outputs = {"per_scene.csv", "summary.csv"};
  finish_manifest(m, out_dir, timer);
  return m;
}

RunManifest cmd_ablation(
    const HarnessConfig& raw_config, const std::string& dataset_dir,
    const std::vector<std::pair<std::string, std::string>>& variants,
    const std::string& out_dir) {
  Timer timer;
  const HarnessConfig config = normalized(raw_config);
  require(!variants.empty(), "ablation: no variants given");
  json encoded = json::array();
  for (const auto& [label, mode] : variants)
    encoded.push_back({label, mode});
  RunManifest m = make_manifest(
      config, "ablation",
      {{"dataset_dir", dataset_dir}, {"variants", encoded.dump()}});

  struct Row {
    std::string label;
    std::size_t n;
    double delta, delta_ci, estoi, estoi_ci;
  };
  std::vector<Row> rows;
  for (const auto& [label, mode] : variants) {
    require(!label.empty() &&
                label.find_first_not_of(
                    "abcdefghijklmnopqrstuvwxyz"
                    "ABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_.-") ==
                    std::string::npos,
            "ablation: label '" + label + "' is not filesystem-safe");
    const std::string base = out_dir + "/" + label;
    cmd_enhance(config, dataset_dir, mode, "test", base + "/enhance");
    cmd_evaluate(config, dataset_dir, base + "/enhance", base + "/eval");
    const auto summary = read_summary_csv(base + "/eval/summary.csv");
    const auto& delta = summary.at("delta_si_sdr");
    const auto& estoi_row = summary.at("estoi_enhanced");
    rows.push_back(Row{label, static_cast<std::size_t>(delta[0]), delta[1],
                       delta[2], estoi_row[1], estoi_row[2]});
  }

  const std::string path = out_dir + "/ablation.csv";
  std::ofstream out = open_text(path);
  out << "label,n,delta_si_sdr,delta_si_sdr_ci95,estoi,estoi_ci95\n";
  char buf[256];
  for (const Row& r : rows) {
    std::snprintf(buf, sizeof buf, "%s,%zu,%.12g,%.12g,%.12g,%.12g\n",
                  r.label.c_str(), r.n, r.delta, r.delta_ci, r.estoi,
                  r.estoi_ci);
    out << buf;
  }
  close_checked(out, path);
  m.outputs = {"ablation.csv"};
  finish_manifest(m, out_dir, timer);
  return m;
}

RunManifest cmd_sweep_angle(const HarnessConfig& raw_config,
                            const std::string& checkpoint,
                            const std::string& out_dir) {
  Timer timer;
  const HarnessConfig config = normalized(raw_config);
  RunManifest m =
      make_manifest(config, "sweep-angle", {{"checkpoint", checkpoint}});
  const MaskSource src = load_mask_source(checkpoint);
  const SweepConfig& sweep = config.sweep;
  require(sweep.probe_count >= 1, "sweep: probe_count must be positive");

  std::vector<MultiWave> probes;
  for (int p = 0; p < sweep.probe_count; ++p) {
    Rng rng(mix_seed(config.seed, kProbeTag + p));
    probes.push_back(synth_utterance(rng, sweep.probe_seconds));
  }
  ArrayPose array;
  array.center = {0.0, 0.0, 1.5};
  array.rotation = 0.0;
  array.channel_count = src.channels(config);

  const std::vector<double> angles = angle_grid(sweep);
  std::vector<double> mean_si(angles.size()), mean_ret(angles.size());
  const FrameParams fp;
  for (std::size_t ai = 0; ai < angles.size(); ++ai) {
    double si_sum = 0.0, ret_sum = 0.0;
    for (int p = 0; p < sweep.probe_count; ++p) {
      const MultiWave x =
          anechoic_probe(array, angles[ai], sweep.distance, probes[p]);
      const Spectrogram y = analyze(x, fp);
      const ComplexMask mask = probe_mask(src, config, y, kNsfProbeTag + p);
      const MultiWave enhanced =
          fit_wave(synthesize(apply_mask(mask, channel_slice(y, 0))),
                   x.length());
      const std::vector<double> unprocessed = edge_trim(x.channels[0]);
      const std::vector<double> enh = edge_trim(enhanced.channels[0]);
      si_sum += si_sdr(enh, unprocessed);
      ret_sum += energy_retention(enh, unprocessed);
    }
    mean_si[ai] = si_sum / sweep.probe_count;
    mean_ret[ai] = ret_sum / sweep.probe_count;
  }

  fs::create_directories(out_dir);
  const std::string path = out_dir + "/sweep.csv";
  std::ofstream out = open_text(path);
  out << "angle_deg,mean_si_sdr,mean_energy_retention,suppressed\n";
  char buf[128];
  for (std::size_t ai = 0; ai < angles.size(); ++ai) {
    std::snprintf(buf, sizeof buf, "%.6g,%.12g,%.12g,%d\n", angles[ai],
                  mean_si[ai], mean_ret[ai], mean_ret[ai] < 1e-3 ? 1 : 0);
    out << buf;
  }
  close_checked(out, path);
  write_sweep_svg(out_dir + "/sweep.svg", angles, mean_ret);
  m.outputs = {"sweep.csv", "sweep.svg"};
  finish_manifest(m, out_dir, timer);
  return m;
}

RunManifest cmd_noise_pattern(const HarnessConfig& raw_config,
                              const std::string& checkpoint,
                              const std::string& out_dir) {
  Timer timer;
  const HarnessConfig config = normalized(raw_config);
  RunManifest m =
      make_manifest(config, "noise-pattern", {{"checkpoint", checkpoint}});
  const MaskSource src = load_mask_source(checkpoint);
  const SweepConfig& sweep = config.sweep;
  require(sweep.noise_draws >= 1, "noise-pattern: noise_draws must be positive");

  const std::int64_t probe_len = std::llround(sweep.probe_seconds * 16000);
  std::vector<MultiWave> draws;
  for (int dr = 0; dr < sweep.noise_draws; ++dr) {
    Rng rng(mix_seed(config.seed, kNoiseDrawTag + dr));
    MultiWave n(1, probe_len);
    for (auto& v : n.channels[0]) v = rng.normal(0.0, 1.0);
    draws.push_back(std::move(n));
  }
  ArrayPose array;
  array.center = {0.0, 0.0, 1.5};
  array.rotation = 0.0;
  array.channel_count = src.channels(config);

  const std::vector<double> angles = angle_grid(sweep);
  std::size_t zero_row = angles.size();
  for (std::size_t ai = 0; ai < angles.size(); ++ai)
    if (std::abs(angles[ai]) < 1e-9) zero_row = ai;
  require(zero_row < angles.size(),
          "noise-pattern: the angle grid must contain 0");

  const FrameParams fp;
  const int bins = fp.bins();
  const double neg_inf = -std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> level(angles.size(),
                                         std::vector<double>(bins, neg_inf));
  for (std::size_t ai = 0; ai < angles.size(); ++ai) {
    std::vector<double> sum(bins, 0.0);
    std::int64_t count = 0;
    for (int dr = 0; dr < sweep.noise_draws; ++dr) {
      const MultiWave x =
          anechoic_probe(array, angles[ai], sweep.distance, draws[dr]);
      const Spectrogram y = analyze(x, fp);
      const ComplexMask mask = probe_mask(src, config, y, kNsfNoiseTag + dr);
      const Spectrogram enhanced = apply_mask(mask, channel_slice(y, 0));
      for (int f = 0; f < enhanced.bins; ++f)
        for (int t = 0; t < enhanced.frames; ++t)
          sum[f] += std::abs(enhanced.at(0, f, t));
      count += y.frames;
    }
    for (int f = 0; f < bins; ++f) {
      const double mean = sum[f] / static_cast<double>(count);
      if (mean > 0.0) level[ai][f] = 20.0 * std::log10(mean);
    }
  }

  double ref = neg_inf;
  for (int f = 0; f < bins; ++f) ref = std::max(ref, level[zero_row][f]);
  if (std::isfinite(ref))
    for (auto& row : level)
      for (double& v : row)
        if (std::isfinite(v)) v -= ref;

  fs::create_directories(out_dir);
  const std::string path = out_dir + "/noise_pattern.csv";
  std::ofstream out = open_text(path);
  out << "angle_deg";
  char buf[64];
  for (int f = 0; f < bins; ++f) {
    std::snprintf(buf, sizeof buf, ",bin_%03d", f);
    out << buf;
  }
  out << "\n";
  for (std::size_t ai = 0; ai < angles.size(); ++ai) {
    std::snprintf(buf, sizeof buf, "%.6g", angles[ai]);
    out << buf;
    for (int f = 0; f < bins; ++f) {
      if (std::isfinite(level[ai][f])) {
        std::snprintf(buf, sizeof buf, ",%.6f", level[ai][f]);
        out << buf;
      } else {
        out << ",-inf";
      }
    }
    out << "\n";
  }
  close_checked(out, path);

  std::vector<std::uint8_t> pixels;
  pixels.reserve(angles.size() * bins);
  for (const auto& row : level)
    for (double v : row) {
      const double clamped = std::isfinite(v) ? std::clamp(v, -60.0, 0.0)
                                              : -60.0;
      pixels.push_back(
          static_cast<std::uint8_t>(std::lround((clamped + 60.0) / 60.0 *
                                                255.0)));
    }
  write_pgm(out_dir + "/noise_pattern.pgm", bins,
            static_cast<int>(angles.size()), pixels);
  m.outputs = {"noise_pattern.csv", "noise_pattern.pgm"};
  finish_manifest(m, out_dir, timer);
  return m;
}

RunManifest rerun_manifest(const std::string& manifest_path,
                           const std::string& new_out_dir) {
  const RunManifest m = read_manifest(manifest_path);
  const HarnessConfig config = config_from_json(m.config_json);
  auto arg = [&](const char* key) {
    auto it = m.args.find(key);
    require(it != m.args.end(),
            std::string("rerun: manifest lacks argument '") + key + "'");
    return it->second;
  };
  if (m.command == "corpus") return cmd_corpus(config, new_out_dir);
  if (m.command == "simulate") return cmd_simulate(config, new_out_dir);
  if (m.command == "train")
    return cmd_train(config, arg("dataset_dir"), new_out_dir);
  if (m.command == "enhance")
    return cmd_enhance(config, arg("dataset_dir"), arg("mode"), arg("split"),
                       new_out_dir);
  if (m.command == "evaluate")
    return cmd_evaluate(config, arg("dataset_dir"), arg("enhanced_dir"),
                        new_out_dir);
  if (m.command == "ablation") {
    json encoded = parse_json(arg("variants"), "rerun variants");
    std::vector<std::pair<std::string, std::string>> variants;
    for (const auto& pair : encoded)
      variants.emplace_back(pair.at(0).get<std::string>(),
                            pair.at(1).get<std::string>());
    return cmd_ablation(config, arg("dataset_dir"), variants, new_out_dir);
  }
  if (m.command == "sweep-angle")
    return cmd_sweep_angle(config, arg("checkpoint"), new_out_dir);
  if (m.command == "noise-pattern")
    return cmd_noise_pattern(config, arg("checkpoint"), new_out_dir);
  fail("rerun: unknown command '" + m.command + "'");
}

}  // namespace mcse
