#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <vector>

#include "mcse/common.hpp"
#include "mcse/training.hpp"

using namespace mcse;

namespace {

// Deterministic speech-ish content: a few partials under a slow envelope
// plus weak broadband noise, so spectra are neither sparse nor flat.
MultiWave toy_wave(Rng& rng, int channels, std::int64_t length, int rate) {
  MultiWave w(channels, length, rate);
  for (int c = 0; c < channels; ++c) {
    const double f0 = 120.0 + 40.0 * rng.uniform();
    const double phase = 2.0 * M_PI * rng.uniform();
    for (std::int64_t n = 0; n < length; ++n) {
      const double t = static_cast<double>(n) / rate;
      const double env = 0.6 + 0.4 * std::sin(2.0 * M_PI * 3.0 * t + phase);
      double v = 0.0;
      for (int h = 1; h <= 3; ++h)
        v += std::sin(2.0 * M_PI * f0 * h * t + phase * h) / h;
      w.channels[static_cast<std::size_t>(c)][static_cast<std::size_t>(n)] =
          env * (0.2 * v + 0.02 * rng.normal());
    }
  }
  return w;
}

// mixture = target + noise on every channel, so crops must stay additive.
TrainScene toy_scene(Rng& rng, int channels, std::int64_t length, int rate) {
  TrainScene scene;
  const MultiWave target = toy_wave(rng, 1, length, rate);
  const MultiWave noise = toy_wave(rng, channels, length, rate);
  scene.mixture = MultiWave(channels, length, rate);
  for (int c = 0; c < channels; ++c)
    for (std::int64_t n = 0; n < length; ++n)
      scene.mixture.channels[static_cast<std::size_t>(c)]
                            [static_cast<std::size_t>(n)] =
          target.channels[0][static_cast<std::size_t>(n)] +
          noise.channels[static_cast<std::size_t>(c)]
                        [static_cast<std::size_t>(n)];
  scene.target_ref = target;
  scene.noise_ref = MultiWave(1, length, rate);
  scene.noise_ref.channels[0] = noise.channels[0];
  return scene;
}

FrameParams tiny_frames() {
  FrameParams fp;
  fp.window_len = 64;
  fp.hop = 32;
  fp.sample_rate = 16000;
  return fp;
}

struct LossSetup {
  Spectrogram noisy_ref;
  std::vector<double> target;
  std::vector<double> noise;
  Tensor mask_re;
  Tensor mask_im;
};

// Reference-channel spectrogram plus matching-length targets and a constant
// compressed mask filled with the given components.
LossSetup make_loss_setup(Rng& rng, double mask_re, double mask_im) {
  LossSetup s;
  const FrameParams fp = tiny_frames();
  const MultiWave y = toy_wave(rng, 1, 2000, fp.sample_rate);
  s.noisy_ref = analyze(y, fp);
  const std::int64_t synth_len =
      static_cast<std::int64_t>(fp.hop) * (s.noisy_ref.frames - 1) +
      fp.window_len;
  const MultiWave u = toy_wave(rng, 1, synth_len, fp.sample_rate);
  const MultiWave v = toy_wave(rng, 1, synth_len, fp.sample_rate);
  s.target = u.channels[0];
  s.noise = v.channels[0];
  s.mask_re = Tensor({s.noisy_ref.bins, s.noisy_ref.frames});
  s.mask_im = Tensor({s.noisy_ref.bins, s.noisy_ref.frames});
  for (auto& e : s.mask_re.data) e = mask_re;
  for (auto& e : s.mask_im.data) e = mask_im;
  return s;
}

LossNodes run_loss(Tape& tape, const LossSetup& s, double alpha,
                   bool use_noise_terms) {
  MaskNodes mask;
  mask.re = tape.input(s.mask_re);
  mask.im = tape.input(s.mask_im);
  return build_loss(tape, mask, s.noisy_ref, s.target, s.noise, alpha,
                    use_noise_terms);
}

}  // namespace

TEST_CASE("adam follows the published update on a constant gradient") {
  const double lr = 0.001, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  Adam adam({{1}}, AdamConfig{lr, b1, b2, eps});
  std::vector<Tensor> params{Tensor({1}, {0.5})};
  const std::vector<Tensor> grads{Tensor({1}, {1.0})};

  double m = 0.0, v = 0.0, theta = 0.5;
  for (int t = 1; t <= 3; ++t) {
    adam.step(params, grads);
    m = b1 * m + (1.0 - b1) * 1.0;
    v = b2 * v + (1.0 - b2) * 1.0;
    const double mhat = m / (1.0 - std::pow(b1, t));
    const double vhat = v / (1.0 - std::pow(b2, t));
    theta -= lr * mhat / (std::sqrt(vhat) + eps);
    CHECK(params[0][0] == doctest::Approx(theta).epsilon(1e-15));
  }
  CHECK(adam.steps() == 3);
  // Constant gradient keeps both bias-corrected moments at exactly 1, so
  // every step moves by lr/(1+eps).
  CHECK(params[0][0] ==
        doctest::Approx(0.5 - 3.0 * lr / (1.0 + eps)).epsilon(1e-12));

  std::vector<Tensor> wrong{Tensor({2})};
  CHECK_THROWS_AS(adam.step(wrong, grads), Error);
  CHECK_THROWS_AS(Adam({{1}}, AdamConfig{-0.1, b1, b2, eps}), Error);
  CHECK_THROWS_AS(Adam({{1}}, AdamConfig{lr, 1.0, b2, eps}), Error);

  Adam frozen({{3}}, AdamConfig{0.0, b1, b2, eps});
  std::vector<Tensor> p2{Tensor({3}, {0.25, -1.5, 3.0})};
  const std::vector<Tensor> p2_copy = p2;
  const std::vector<Tensor> g2{Tensor({3}, {4.0, -2.0, 0.5})};
  for (int t = 0; t < 5; ++t) frozen.step(p2, g2);
  for (std::int64_t i = 0; i < 3; ++i) CHECK(p2[0][i] == p2_copy[0][i]);
}

TEST_CASE("crop_sample keeps the three signals aligned") {
  Rng rng(601);
  const TrainScene scene = toy_scene(rng, 3, 1000, 16000);

  Rng crop_rng(7);
  const TrainScene crop = crop_sample(scene, 0.02, crop_rng);
  const std::int64_t len = 320;
  REQUIRE(crop.mixture.length() == len);
  REQUIRE(crop.target_ref.length() == len);
  REQUIRE(crop.noise_ref.length() == len);

  // Additivity survives because one shared offset cuts all three signals;
  // the mixture was built as target + noise on channel 0.
  for (std::int64_t n = 0; n < len; ++n)
    CHECK(crop.mixture.channels[0][static_cast<std::size_t>(n)] ==
          crop.target_ref.channels[0][static_cast<std::size_t>(n)] +
              crop.noise_ref.channels[0][static_cast<std::size_t>(n)]);

  Rng again(7);
  const TrainScene crop2 = crop_sample(scene, 0.02, again);
  for (std::int64_t n = 0; n < len; ++n)
    CHECK(crop.mixture.channels[1][static_cast<std::size_t>(n)] ==
          crop2.mixture.channels[1][static_cast<std::size_t>(n)]);

  // A scene of exactly the crop length forces offset zero.
  Rng r3(99);
  const TrainScene exact = crop_sample(scene, 1000.0 / 16000.0, r3);
  for (std::int64_t n = 0; n < 1000; ++n)
    CHECK(exact.mixture.channels[2][static_cast<std::size_t>(n)] ==
          scene.mixture.channels[2][static_cast<std::size_t>(n)]);

  Rng r4(100);
  CHECK_THROWS_AS(crop_sample(scene, 0.5, r4), Error);
  CHECK_THROWS_AS(crop_at(scene, 900, 320), Error);
  CHECK_THROWS_AS(crop_at(scene, -1, 320), Error);
}

TEST_CASE("loss vanishes when the masked estimate reproduces the targets") {
  // A unit speech mask turns the estimate into the resynthesized input and
  // the complementary noise mask into silence; with those as targets every
  // term collapses to rounding noise. The signal is zeroed over the first
  // and last window so the frames without an overlap partner carry nothing.
  Rng rng(602);
  const FrameParams fp = tiny_frames();
  MultiWave y = toy_wave(rng, 1, 2000, fp.sample_rate);
  for (int n = 0; n < fp.window_len; ++n) {
    y.channels[0][static_cast<std::size_t>(n)] = 0.0;
    y.channels[0][y.channels[0].size() - 1 - static_cast<std::size_t>(n)] = 0.0;
  }
  const Spectrogram spec = analyze(y, fp);
  const std::int64_t synth_len =
      static_cast<std::int64_t>(fp.hop) * (spec.frames - 1) + fp.window_len;

  const MultiWave resynth = synthesize(spec);
  REQUIRE(resynth.length() == synth_len);

  LossSetup s;
  s.noisy_ref = spec;
  s.target = resynth.channels[0];
  s.noise.assign(static_cast<std::size_t>(synth_len), 0.0);
  s.mask_re = Tensor({spec.bins, spec.frames});
  s.mask_im = Tensor({spec.bins, spec.frames});
  for (auto& e : s.mask_re.data) e = std::tanh(0.5);  // compress(1 + 0i)

  Tape tape;
  const LossNodes loss = run_loss(tape, s, 10.0, true);
  CHECK(tape.value(loss.total)[0] >= 0.0);
  CHECK(tape.value(loss.total)[0] < 1e-9);
}

TEST_CASE("a zero mask exposes the loss terms in closed form") {
  // decompress(0) is exactly 0, so the speech estimate is silence and the
  // noise estimate is the unmasked input; every term reduces to a plain sum
  // over known values.
  Rng rng(603);
  const LossSetup s = make_loss_setup(rng, 0.0, 0.0);
  const double alpha = 10.0;

  Tape tape;
  const LossNodes loss = run_loss(tape, s, alpha, true);

  double l1_target = 0.0;
  for (double v : s.target) l1_target += std::abs(v);
  CHECK(tape.value(loss.time_s)[0] == l1_target);

  double mag_sum = 0.0;
  for (int f = 0; f < s.noisy_ref.bins; ++f)
    for (int t = 0; t < s.noisy_ref.frames; ++t)
      mag_sum += std::abs(s.noisy_ref.at(0, f, t));
  // Target magnitudes come from the analyzed target wave, estimate is zero.
  MultiWave u(1, static_cast<std::int64_t>(s.target.size()),
              s.noisy_ref.params.sample_rate);
  u.channels[0] = s.target;
  const Spectrogram u_spec = analyze(u, s.noisy_ref.params);
  double u_mag = 0.0;
  for (const auto& z : u_spec.data) u_mag += std::abs(z);
  CHECK(tape.value(loss.mag_s)[0] == doctest::Approx(u_mag).epsilon(1e-14));

  // Noise branch sees the identity mask.
  const double total = tape.value(loss.total)[0];
  const double expected = alpha * tape.value(loss.time_s)[0] +
                          tape.value(loss.mag_s)[0] +
                          alpha * tape.value(loss.time_v)[0] +
                          tape.value(loss.mag_v)[0];
  CHECK(total == doctest::Approx(expected).epsilon(1e-14));
  CHECK(total > 0.0);
}

TEST_CASE("sign-flipped targets change only the time-domain terms") {
  Rng rng(604);
  LossSetup s = make_loss_setup(rng, 0.3, -0.2);

  Tape tape_a;
  const LossNodes a = run_loss(tape_a, s, 10.0, true);

  LossSetup flipped = s;
  for (auto& v : flipped.target) v = -v;
  Tape tape_b;
  const LossNodes b = run_loss(tape_b, flipped, 10.0, true);

  // Negation leaves every STFT magnitude bit-identical, so the spectral term
  // cannot move; the time term follows the l1 distance to the new target.
  CHECK(tape_b.value(b.mag_s)[0] == tape_a.value(a.mag_s)[0]);
  CHECK(tape_b.value(b.time_v)[0] == tape_a.value(a.time_v)[0]);
  CHECK(tape_b.value(b.mag_v)[0] == tape_a.value(a.mag_v)[0]);

  const Tensor& wave = tape_a.value(a.wave_s);
  double expect_a = 0.0, expect_b = 0.0;
  for (std::size_t i = 0; i < s.target.size(); ++i) {
    expect_a += std::abs(wave[static_cast<std::int64_t>(i)] - s.target[i]);
    expect_b += std::abs(wave[static_cast<std::int64_t>(i)] + s.target[i]);
  }
  CHECK(tape_a.value(a.time_s)[0] == doctest::Approx(expect_a).epsilon(1e-13));
  CHECK(tape_b.value(b.time_s)[0] == doctest::Approx(expect_b).epsilon(1e-13));
  CHECK(tape_b.value(b.time_s)[0] != tape_a.value(a.time_s)[0]);

  const double delta = tape_b.value(b.total)[0] - tape_a.value(a.total)[0];
  CHECK(delta == doctest::Approx(10.0 * (expect_b - expect_a)).epsilon(1e-10));
}

TEST_CASE("alpha scales only the time-domain contribution") {
  Rng rng(605);
  const LossSetup s = make_loss_setup(rng, 0.4, 0.1);

  Tape t1, t2;
  const LossNodes l1 = run_loss(t1, s, 10.0, true);
  const LossNodes l2 = run_loss(t2, s, 20.0, true);
  CHECK(t1.value(l1.time_s)[0] == t2.value(l2.time_s)[0]);
  CHECK(t1.value(l1.mag_s)[0] == t2.value(l2.mag_s)[0]);
  const double time_part =
      t1.value(l1.time_s)[0] + t1.value(l1.time_v)[0];
  CHECK(t2.value(l2.total)[0] - t1.value(l1.total)[0] ==
        doctest::Approx(10.0 * time_part).epsilon(1e-12));

  // Without ground-truth noise only the speech terms remain.
  Tape t3;
  const LossNodes l3 = run_loss(t3, s, 10.0, false);
  CHECK(l3.time_v == -1);
  CHECK(l3.mag_v == -1);
  CHECK(l3.wave_v == -1);
  CHECK(t3.value(l3.total)[0] ==
        doctest::Approx(10.0 * t3.value(l3.time_s)[0] + t3.value(l3.mag_s)[0])
            .epsilon(1e-14));
}

TEST_CASE("build_loss rejects mismatched inputs") {
  Rng rng(606);
  LossSetup s = make_loss_setup(rng, 0.0, 0.0);

  {
    Tape tape;
    LossSetup bad = s;
    bad.target.pop_back();
    CHECK_THROWS_AS(run_loss(tape, bad, 10.0, true), Error);
  }
  {
    Tape tape;
    LossSetup bad = s;
    bad.noise.push_back(0.0);
    CHECK_THROWS_AS(run_loss(tape, bad, 10.0, true), Error);
  }
  {
    Tape tape;
    LossSetup bad = s;
    bad.mask_re = Tensor({s.noisy_ref.bins, s.noisy_ref.frames + 1});
    CHECK_THROWS_AS(run_loss(tape, bad, 10.0, true), Error);
  }
  {
    Tape tape;
    CHECK_THROWS_AS(run_loss(tape, s, 0.0, true), Error);
  }
}

TEST_CASE("train config validation") {
  TrainConfig good;
  good.frame = tiny_frames();
  good.crop_seconds = 0.05;
  good.validate();

  auto reject = [&](auto&& tweak) {
    TrainConfig bad = good;
    tweak(bad);
    CHECK_THROWS_AS(bad.validate(), Error);
  };
  reject([](TrainConfig& c) { c.batch_size = 0; });
  reject([](TrainConfig& c) { c.max_epochs = 0; });
  reject([](TrainConfig& c) { c.learning_rate = -1e-4; });
  reject([](TrainConfig& c) { c.crop_seconds = 0.0; });
  reject([](TrainConfig& c) { c.alpha = 0.0; });
  reject([](TrainConfig& c) { c.patience = 0; });
  reject([](TrainConfig& c) { c.crop_seconds = 0.003; });  // under one window
}

namespace {

TrainConfig overfit_config() {
  TrainConfig config;
  config.frame = tiny_frames();
  config.crop_seconds = 0.05;  // 800 samples, 24 frames
  config.batch_size = 1;
  config.max_epochs = 200;
  config.patience = 200;
  config.seed = 11;
  return config;
}

NetSpec tiny_spec() {
  NetSpec spec;
  spec.mode = NetMode::T;
  spec.channels = 2;
  spec.bins = 33;
  spec.hidden1 = 4;
  spec.hidden2 = 3;
  return spec;
}

}  // namespace

TEST_CASE("training overfits a single scene") {
  Rng rng(607);
  const std::vector<TrainScene> scenes{toy_scene(rng, 2, 1600, 16000)};
  const TrainConfig config = overfit_config();
  const NetSpec spec = tiny_spec();

  const TrainResult result = train(spec, scenes, scenes, config);
  REQUIRE(!result.log.empty());
  CHECK(!result.aborted_nan);
  CHECK(result.best_epoch >= 1);

  double min_train = result.log.front().train_loss;
  for (const auto& e : result.log) min_train = std::min(min_train, e.train_loss);
  CHECK(min_train <= 0.5 * result.log.front().train_loss);

  // The returned checkpoint is the argmin of the logged validation losses.
  double min_val = result.log.front().val_loss;
  for (const auto& e : result.log) min_val = std::min(min_val, e.val_loss);
  CHECK(result.log[static_cast<std::size_t>(result.best_epoch - 1)].val_loss ==
        min_val);
}

TEST_CASE("zero learning rate leaves the parameters untouched") {
  Rng rng(608);
  const std::vector<TrainScene> scenes{toy_scene(rng, 2, 1600, 16000)};
  TrainConfig config = overfit_config();
  config.learning_rate = 0.0;
  config.max_epochs = 3;
  const NetSpec spec = tiny_spec();

  const TrainResult result = train(spec, scenes, scenes, config);
  Rng init_rng(config.seed);
  const NetParams init = NetParams::init(spec, init_rng);
  REQUIRE(result.best.tensors.size() == init.tensors.size());
  for (std::size_t i = 0; i < init.tensors.size(); ++i)
    for (std::int64_t e = 0; e < init.tensors[i].numel(); ++e)
      CHECK(result.best.tensors[i][e] == init.tensors[i][e]);
}

TEST_CASE("same seed reproduces the whole training run") {
  Rng rng(609);
  std::vector<TrainScene> train_set;
  for (int i = 0; i < 3; ++i) train_set.push_back(toy_scene(rng, 2, 1600, 16000));
  const std::vector<TrainScene> val_set{toy_scene(rng, 2, 1600, 16000)};

  TrainConfig config = overfit_config();
  config.max_epochs = 3;
  config.batch_size = 2;

  NetSpec spec = tiny_spec();
  spec.nsf = true;  // exercises the per-sample permutation draws too

  const TrainResult a = train(spec, train_set, val_set, config);
  const TrainResult b = train(spec, train_set, val_set, config);
  REQUIRE(a.log.size() == b.log.size());
  for (std::size_t i = 0; i < a.log.size(); ++i) {
    CHECK(a.log[i].epoch == b.log[i].epoch);
    CHECK(a.log[i].train_loss == b.log[i].train_loss);
    CHECK(a.log[i].val_loss == b.log[i].val_loss);
  }
  CHECK(a.best_epoch == b.best_epoch);
  for (std::size_t i = 0; i < a.best.tensors.size(); ++i)
    for (std::int64_t e = 0; e < a.best.tensors[i].numel(); ++e)
      CHECK(a.best.tensors[i][e] == b.best.tensors[i][e]);
}

TEST_CASE("divergence aborts with the last finite checkpoint") {
  Rng rng(610);
  std::vector<TrainScene> scenes{toy_scene(rng, 2, 1600, 16000)};
  scenes[0].mixture.channels[0][100] = std::nan("");

  TrainConfig config = overfit_config();
  config.max_epochs = 5;
  const NetSpec spec = tiny_spec();

  const TrainResult result = train(spec, scenes, scenes, config);
  CHECK(result.aborted_nan);
  CHECK(result.log.size() == 1);
  // The offset-0 validation crop always covers the poisoned sample; the
  // random training crop may or may not.
  CHECK(!std::isfinite(result.log[0].val_loss));
  CHECK(result.best_epoch == 0);

  // No finite epoch completed, so the initial parameters come back.
  Rng init_rng(config.seed);
  const NetParams init = NetParams::init(spec, init_rng);
  for (std::size_t i = 0; i < init.tensors.size(); ++i)
    for (std::int64_t e = 0; e < init.tensors[i].numel(); ++e)
      CHECK(result.best.tensors[i][e] == init.tensors[i][e]);
}

TEST_CASE("train rejects inconsistent inputs") {
  Rng rng(611);
  const std::vector<TrainScene> scenes{toy_scene(rng, 2, 1600, 16000)};
  const TrainConfig config = overfit_config();
  const NetSpec spec = tiny_spec();

  CHECK_THROWS_AS(train(spec, {}, scenes, config), Error);
  CHECK_THROWS_AS(train(spec, scenes, {}, config), Error);

  const std::vector<TrainScene> wrong_c{toy_scene(rng, 3, 1600, 16000)};
  CHECK_THROWS_AS(train(spec, wrong_c, wrong_c, config), Error);

  const std::vector<TrainScene> short_scene{toy_scene(rng, 2, 700, 16000)};
  CHECK_THROWS_AS(train(spec, short_scene, short_scene, config), Error);

  const std::vector<TrainScene> wrong_rate{toy_scene(rng, 2, 1600, 8000)};
  CHECK_THROWS_AS(train(spec, wrong_rate, wrong_rate, config), Error);
}

TEST_CASE("training log serializes as CSV") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "mcse_training_log_test";
  fs::create_directories(dir);
  const std::string path = (dir / "log.csv").string();

  std::vector<EpochLog> log;
  log.push_back(EpochLog{1, 3.25, 4.5, 0.125});
  log.push_back(EpochLog{2, 1.0 / 3.0, 0.25, 1.5});
  write_training_log(path, log);

  std::ifstream is(path);
  std::string line;
  std::getline(is, line);
  CHECK(line == "epoch,train_loss,val_loss,wall_seconds");
  std::getline(is, line);
  CHECK(line == "1,3.25,4.5,0.125");
  std::getline(is, line);
  CHECK(line == "2,0.333333333333,0.25,1.500");
  CHECK(!std::getline(is, line));

  CHECK_THROWS_AS(write_training_log("/nonexistent_dir/log.csv", log), Error);
  fs::remove_all(dir);
}
