#include "mcse/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <tuple>

#include "mcse/common.hpp"

namespace mcse {

void TrainConfig::validate() const {
  require(batch_size >= 1, "TrainConfig: batch_size must be positive");
  require(max_epochs >= 1, "TrainConfig: max_epochs must be positive");
  require(learning_rate >= 0.0, "TrainConfig: learning_rate must not be negative");
  require(crop_seconds > 0.0, "TrainConfig: crop_seconds must be positive");
  require(alpha > 0.0, "TrainConfig: alpha must be positive");
  require(patience >= 1, "TrainConfig: patience must be positive");
  require(crop_samples() >= frame.window_len,
          "TrainConfig: crop shorter than one analysis window");
}

std::int64_t TrainConfig::crop_samples() const {
  return std::llround(crop_seconds * frame.sample_rate);
}

Adam::Adam(const std::vector<std::vector<int>>& shapes, AdamConfig config)
    : config_(config) {
  require(config_.learning_rate >= 0.0, "Adam: negative learning rate");
  require(config_.beta1 >= 0.0 && config_.beta1 < 1.0 &&
              config_.beta2 >= 0.0 && config_.beta2 < 1.0,
          "Adam: moment decays must lie in [0, 1)");
  require(config_.epsilon > 0.0, "Adam: epsilon must be positive");
  for (const auto& s : shapes) {
    m_.emplace_back(s);
    v_.emplace_back(s);
  }
}

void Adam::step(std::vector<Tensor>& params, const std::vector<Tensor>& grads) {
  require(params.size() == m_.size() && grads.size() == m_.size(),
          "Adam: parameter list does not match the optimizer state");
  ++t_;
  const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    require(params[i].shape == m_[i].shape && grads[i].shape == m_[i].shape,
            "Adam: tensor shape does not match the optimizer state");
    for (std::int64_t e = 0; e < params[i].numel(); ++e) {
      const double g = grads[i][e];
      m_[i][e] = config_.beta1 * m_[i][e] + (1.0 - config_.beta1) * g;
      v_[i][e] = config_.beta2 * v_[i][e] + (1.0 - config_.beta2) * g * g;
      const double mhat = m_[i][e] / c1;
      const double vhat = v_[i][e] / c2;
      params[i][e] -=
          config_.learning_rate * mhat / (std::sqrt(vhat) + config_.epsilon);
    }
  }
}

namespace {

void check_scene(const TrainScene& scene) {
  require(scene.mixture.channel_count() >= 1, "TrainScene: empty mixture");
  require(scene.target_ref.channel_count() == 1 &&
              scene.noise_ref.channel_count() == 1,
          "TrainScene: targets must be single-channel");
  require(scene.mixture.sample_rate == scene.target_ref.sample_rate &&
              scene.mixture.sample_rate == scene.noise_ref.sample_rate,
          "TrainScene: sample-rate mismatch");
  require(scene.mixture.length() == scene.target_ref.length() &&
              scene.mixture.length() == scene.noise_ref.length(),
          "TrainScene: length mismatch");
}

}  // namespace

TrainScene crop_at(const TrainScene& scene, std::int64_t offset,
                   std::int64_t length) {
  check_scene(scene);
  require(length >= 1 && offset >= 0 &&
              offset + length <= scene.mixture.length(),
          "crop_at: window outside the scene");
  auto cut = [&](const MultiWave& w) {
    MultiWave out(w.channel_count(), length, w.sample_rate);
    for (int c = 0; c < w.channel_count(); ++c)
      std::copy_n(w.channels[static_cast<std::size_t>(c)].begin() + offset,
                  length, out.channels[static_cast<std::size_t>(c)].begin());
    return out;
  };
  return TrainScene{cut(scene.mixture), cut(scene.target_ref),
                    cut(scene.noise_ref)};
}

TrainScene crop_sample(const TrainScene& scene, double seconds, Rng& rng) {
  check_scene(scene);
  const std::int64_t length =
      std::llround(seconds * scene.mixture.sample_rate);
  require(length >= 1, "crop_sample: empty crop");
  require(scene.mixture.length() >= length,
          "crop_sample: scene shorter than the crop");
  const std::int64_t slack = scene.mixture.length() - length;
  const std::int64_t offset =
      slack == 0
          ? 0
          : static_cast<std::int64_t>(
                rng.uniform_int(static_cast<std::uint64_t>(slack + 1)));
  return crop_at(scene, offset, length);
}

LossNodes build_loss(Tape& tape, const MaskNodes& mask,
                     const Spectrogram& noisy_ref,
                     const std::vector<double>& target_time,
                     const std::vector<double>& noise_time, double alpha,
                     bool use_noise_terms) {
  require(alpha > 0.0, "build_loss: alpha must be positive");
  require(noisy_ref.channels == 1, "build_loss: reference must be one channel");
  const int F = noisy_ref.bins, T = noisy_ref.frames;
  require(F >= 1 && T >= 1, "build_loss: empty spectrogram");
  require(tape.value(mask.re).shape == std::vector<int>{F, T} &&
              tape.value(mask.im).shape == std::vector<int>{F, T},
          "build_loss: mask does not match the spectrogram");
  const FrameParams& fp = noisy_ref.params;
  const std::int64_t synth_len =
      static_cast<std::int64_t>(fp.hop) * (T - 1) + fp.window_len;
  require(static_cast<std::int64_t>(target_time.size()) == synth_len,
          "build_loss: target length does not match the synthesis length");
  if (use_noise_terms)
    require(static_cast<std::int64_t>(noise_time.size()) == synth_len,
            "build_loss: noise length does not match the synthesis length");

  Tensor re_y({F, T}), im_y({F, T});
  for (int f = 0; f < F; ++f)
    for (int t = 0; t < T; ++t) {
      re_y[static_cast<std::int64_t>(f) * T + t] = noisy_ref.at(0, f, t).real();
      im_y[static_cast<std::int64_t>(f) * T + t] = noisy_ref.at(0, f, t).imag();
    }

  auto branch_terms = [&](Tape::NodeId re_m, Tape::NodeId im_m,
                          const std::vector<double>& time_target) {
    const Tape::NodeId re =
        tape.sub(tape.mul_const(re_m, re_y), tape.mul_const(im_m, im_y));
    const Tape::NodeId im =
        tape.add(tape.mul_const(re_m, im_y), tape.mul_const(im_m, re_y));

    MultiWave target(1, synth_len, fp.sample_rate);
    target.channels[0] = time_target;
    const Spectrogram target_spec = analyze(target, fp);
    Tensor target_mag({F, T});
    for (int f = 0; f < F; ++f)
      for (int t = 0; t < T; ++t)
        target_mag[static_cast<std::int64_t>(f) * T + t] =
            std::abs(target_spec.at(0, f, t));

    const Tape::NodeId mag =
        tape.l1_to_const(tape.magnitude(re, im), std::move(target_mag));
    const Tape::NodeId wave = tape.istft(re, im, fp.window(), fp.hop);
    const Tape::NodeId time = tape.l1_to_const(
        wave, Tensor({static_cast<int>(synth_len)}, time_target));
    return std::tuple{time, mag, wave};
  };

  LossNodes out;
  const Tape::NodeId re_s = tape.decompress(mask.re);
  const Tape::NodeId im_s = tape.decompress(mask.im);
  std::tie(out.time_s, out.mag_s, out.wave_s) =
      branch_terms(re_s, im_s, target_time);

  if (use_noise_terms) {
    const Tape::NodeId re_v = tape.affine(re_s, -1.0, 1.0);
    const Tape::NodeId im_v = tape.affine(im_s, -1.0, 0.0);
    std::tie(out.time_v, out.mag_v, out.wave_v) =
        branch_terms(re_v, im_v, noise_time);
    out.total = tape.weighted_sum(
        {out.time_s, out.mag_s, out.time_v, out.mag_v}, {alpha, 1.0, alpha, 1.0});
  } else {
    out.total = tape.weighted_sum({out.time_s, out.mag_s}, {alpha, 1.0});
  }
  return out;
}

namespace {

struct PreparedSample {
  Spectrogram input;              // what the network sees
  Spectrogram reference;          // channel 0 of the input
  std::vector<double> target;     // trimmed to the synthesis length
  std::vector<double> noise;
};

PreparedSample prepare(const TrainScene& crop, const FrameParams& fp,
                       bool use_noise_terms) {
  PreparedSample s;
  s.input = analyze(crop.mixture, fp);
  require(s.input.frames >= 1, "train: crop yields no frames");
  s.reference = s.input;
  if (s.input.channels > 1) {
    s.reference.channels = 1;
    s.reference.data.assign(
        s.input.data.begin(),
        s.input.data.begin() +
            static_cast<std::size_t>(s.input.bins) * s.input.frames);
  }
  const std::int64_t synth_len =
      static_cast<std::int64_t>(fp.hop) * (s.input.frames - 1) + fp.window_len;
  s.target.assign(crop.target_ref.channels[0].begin(),
                  crop.target_ref.channels[0].begin() + synth_len);
  if (use_noise_terms)
    s.noise.assign(crop.noise_ref.channels[0].begin(),
                   crop.noise_ref.channels[0].begin() + synth_len);
  return s;
}

// Loss of one sample; fills grads with d(loss)/d(params) when asked.
double sample_loss(const NetSpec& spec, const std::vector<Tensor>& params,
                   const PreparedSample& s, const NsfPerms& perms,
                   double alpha, bool use_noise_terms,
                   std::vector<Tensor>* grads) {
  Tape tape;
  std::vector<Tape::NodeId> ids;
  ids.reserve(params.size());
  for (const auto& t : params) ids.push_back(tape.input(t));
  const MaskNodes mask = forward(tape, ids, spec, s.input, perms);
  const LossNodes loss = build_loss(tape, mask, s.reference, s.target, s.noise,
                                    alpha, use_noise_terms);
  const double value = tape.value(loss.total)[0];
  if (grads != nullptr) {
    tape.backward(loss.total);
    for (std::size_t i = 0; i < ids.size(); ++i) {
      const Tensor& g = tape.grad(ids[i]);
      for (std::int64_t e = 0; e < g.numel(); ++e) (*grads)[i][e] += g[e];
    }
  }
  return value;
}

}  // namespace

TrainResult train(const NetSpec& spec,
                  const std::vector<TrainScene>& train_scenes,
                  const std::vector<TrainScene>& val_scenes,
                  const TrainConfig& config) {
  spec.validate();
  config.validate();
  require(!train_scenes.empty() && !val_scenes.empty(),
          "train: empty scene list");
  const std::int64_t crop_len = config.crop_samples();
  const int expected_c = spec.mode == NetMode::PF ? 1 : spec.channels;
  auto check_set = [&](const std::vector<TrainScene>& scenes) {
    for (const auto& scene : scenes) {
      check_scene(scene);
      require(scene.mixture.channel_count() == expected_c,
              "train: scene channel count does not match the network");
      require(scene.mixture.sample_rate == config.frame.sample_rate,
              "train: scene sample rate does not match the frame parameters");
      require(scene.mixture.length() >= crop_len,
              "train: scene shorter than the crop");
    }
  };
  check_set(train_scenes);
  check_set(val_scenes);
  require(spec.bins == config.frame.bins(),
          "train: network bins do not match the frame parameters");

  Rng rng(config.seed);
  NetParams params = NetParams::init(spec, rng);
  const int frames = config.frame.frame_count(crop_len);

  // Per-scene fixed validation permutations keep epochs comparable.
  Rng val_rng = rng.fork(0x76616c);
  std::vector<NsfPerms> val_perms;
  val_perms.reserve(val_scenes.size());
  for (std::size_t i = 0; i < val_scenes.size(); ++i)
    val_perms.push_back(draw_nsf_perms(spec, frames, val_rng));
  std::vector<PreparedSample> val_samples;
  val_samples.reserve(val_scenes.size());
  for (const auto& scene : val_scenes)
    val_samples.push_back(prepare(crop_at(scene, 0, crop_len), config.frame,
                                  config.use_noise_terms));

  Adam adam(NetParams::tensor_shapes(spec),
            AdamConfig{config.learning_rate, 0.9, 0.999, 1e-8});
  std::vector<Tensor> grads;
  for (const auto& s : NetParams::tensor_shapes(spec)) grads.emplace_back(s);

  TrainResult result;
  result.best = params;
  double best_val = std::numeric_limits<double>::infinity();
  int stall = 0;

  std::vector<std::size_t> order(train_scenes.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    rng.shuffle(order);

    double train_loss = std::nan("");
    double val_loss = std::nan("");
    bool finite = true;
    // Every structural property was validated above, so an Error past this
    // point means the numerics left the finite range (the tape refuses to
    // record non-finite values): divergence, not misuse.
    try {
      double train_loss_sum = 0.0;
      for (std::size_t begin = 0; begin < order.size();
           begin += static_cast<std::size_t>(config.batch_size)) {
        const std::size_t end = std::min(
            order.size(), begin + static_cast<std::size_t>(config.batch_size));
        for (auto& g : grads) std::fill(g.data.begin(), g.data.end(), 0.0);
        for (std::size_t b = begin; b < end; ++b) {
          const TrainScene crop = crop_sample(train_scenes[order[b]],
                                              config.crop_seconds, rng);
          const PreparedSample sample =
              prepare(crop, config.frame, config.use_noise_terms);
          const NsfPerms perms = draw_nsf_perms(spec, frames, rng);
          train_loss_sum +=
              sample_loss(spec, params.tensors, sample, perms, config.alpha,
                          config.use_noise_terms, &grads);
        }
        const double inv_batch = 1.0 / static_cast<double>(end - begin);
        for (auto& g : grads)
          for (auto& v : g.data) v *= inv_batch;
        adam.step(params.tensors, grads);
        for (const auto& t : params.tensors)
          if (!t.all_finite()) fail("train: parameters left the finite range");
      }
      train_loss = train_loss_sum / static_cast<double>(order.size());

      double val_loss_sum = 0.0;
      for (std::size_t i = 0; i < val_samples.size(); ++i)
        val_loss_sum +=
            sample_loss(spec, params.tensors, val_samples[i], val_perms[i],
                        config.alpha, config.use_noise_terms, nullptr);
      val_loss = val_loss_sum / static_cast<double>(val_samples.size());
    } catch (const Error&) {
      finite = false;
    }
    finite = finite && std::isfinite(train_loss) && std::isfinite(val_loss);

    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    result.log.push_back(EpochLog{epoch, train_loss, val_loss, wall});

    if (!finite) {
      result.aborted_nan = true;
      break;
    }
    if (val_loss < best_val) {
      best_val = val_loss;
      result.best = params;
      result.best_epoch = epoch;
      stall = 0;
    } else if (++stall >= config.patience) {
      break;
    }
  }
  return result;
}

void write_training_log(const std::string& path,
                        const std::vector<EpochLog>& log) {
  std::ofstream os(path, std::ios::trunc);
  require(os.good(), "write_training_log: cannot open " + path);
  os << "epoch,train_loss,val_loss,wall_seconds\n";
  char line[128];
  for (const auto& e : log) {
    std::snprintf(line, sizeof(line), "%d,%.12g,%.12g,%.3f\n", e.epoch,
                  e.train_loss, e.val_loss, e.wall_seconds);
    os << line;
  }
  require(os.good(), "write_training_log: write failed for " + path);
}

}  // namespace mcse
