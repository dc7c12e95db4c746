#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <vector>

#include <doctest.h>

#include "mcse/common.hpp"
#include "mcse/numerics/fft.hpp"
#include "mcse/rng.hpp"
#include "mcse/roomsim.hpp"
#include "mcse/wave.hpp"

using namespace mcse;

namespace {

double dc_sum(const std::vector<double>& x) {
  double s = 0.0;
  for (double v : x) s += v;
  return s;
}

// Group delay from the low-frequency phase slope; robust to the aliasing
// that biases sample-domain moment estimates of critically sampled pulses.
double phase_delay(const std::vector<double>& x) {
  std::size_t n = 2048;
  while (n < 2 * x.size()) n <<= 1;
  std::vector<double> pad(n, 0.0);
  std::copy(x.begin(), x.end(), pad.begin());
  const auto spec = rfft(pad.data(), static_cast<int>(n));
  double acc = 0.0;
  const std::size_t k_hi = n / 8;
  for (std::size_t k = 1; k <= k_hi; ++k)
    acc += std::arg(spec[k] * std::conj(spec[k - 1]));
  return -acc / static_cast<double>(k_hi) * static_cast<double>(n) /
         (2.0 * std::numbers::pi);
}

double wrap_deg(double deg) {
  double d = std::fmod(deg, 360.0);
  if (d < 0.0) d += 360.0;
  return d;
}

MultiWave mono_wave(std::vector<double> samples, int rate = 16000) {
  MultiWave w(1, 0, rate);
  w.channels[0] = std::move(samples);
  return w;
}

std::vector<double> random_signal(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> x(n);
  for (auto& v : x) v = rng.normal();
  return x;
}

}  // namespace

TEST_CASE("sabine reflection coefficient") {
  const Room room{4.0, 6.0, 3.0, 0.5};
  // alpha = 0.161*72/(108*0.5), beta = sqrt(1 - alpha)
  CHECK(sabine_beta(room) == doctest::Approx(0.8861921).epsilon(1e-6));
  CHECK(sabine_beta({4.0, 6.0, 3.0, 1e-4}) == 0.0);
  CHECK_THROWS_AS(sabine_beta({4.0, 6.0, 3.0, 0.0}), Error);
  CHECK_THROWS_AS(sabine_beta({0.0, 6.0, 3.0, 0.5}), Error);
}

TEST_CASE("direct path lands at distance/c with unit spectral gain") {
  const Room room{10.0, 10.0, 3.0, 0.3};
  const Vec3 src{5.0, 5.0, 1.5};
  const Vec3 mic{6.0, 5.0, 1.5};
  const auto rir = image_source_rir(room, src, mic, 0);

  const double delay = 16000.0 / 343.0;  // 46.65 samples at 1 m
  CHECK(phase_delay(rir) == doctest::Approx(delay).epsilon(1e-4));
  CHECK(dc_sum(rir) == doctest::Approx(1.0).epsilon(1e-3));
  const auto peak = std::max_element(rir.begin(), rir.end());
  CHECK(peak - rir.begin() == std::lround(delay));
}

TEST_CASE("zero reflection coefficient reduces to the direct path") {
  const Room room{4.0, 5.0, 2.5, 1e-4};  // absorption saturates, beta = 0
  const Vec3 src{1.0, 2.0, 1.2};
  const Vec3 mic{2.5, 3.0, 1.6};
  const auto direct = image_source_rir(room, src, mic, 0);
  const auto full = image_source_rir(room, src, mic, 6);
  REQUIRE(full.size() >= direct.size());
  for (std::size_t i = 0; i < direct.size(); ++i) CHECK(full[i] == direct[i]);
  for (std::size_t i = direct.size(); i < full.size(); ++i)
    CHECK(full[i] == 0.0);
}

TEST_CASE("cube room first-order reflections arrive together") {
  const double side = 3.0;
  const Room room{side, side, side, 0.4};
  const Vec3 src{1.5, 1.5, 1.5};
  const Vec3 mic{1.501, 1.5, 1.5};  // 1 mm off so the direct path is finite
  const auto r0 = image_source_rir(room, src, mic, 0);
  const auto r1 = image_source_rir(room, src, mic, 1);
  REQUIRE(r1.size() > r0.size());

  // The direct contribution is identical; reflections only start at ~3 m.
  for (std::size_t i = 0; i < 95; ++i)
    CHECK(r1[i] == (i < r0.size() ? r0[i] : 0.0));

  std::vector<double> refl(r1.begin() + 95, r1.end());
  const double beta = sabine_beta(room);
  const double expected_delay = side / kSpeedOfSound * 16000.0;
  CHECK(phase_delay(refl) + 95.0 ==
        doctest::Approx(expected_delay).epsilon(5e-4));
  // Six equal arrivals of amplitude beta/side.
  CHECK(dc_sum(refl) ==
        doctest::Approx(6.0 * beta / side).epsilon(2e-3));
}

TEST_CASE("reciprocity: swapping source and microphone") {
  const Room room{4.2, 5.7, 2.9, 0.37};
  const Vec3 a{1.2, 2.3, 1.1};
  const Vec3 b{3.1, 4.0, 1.9};
  const auto r_ab = image_source_rir(room, a, b, 17);
  const auto r_ba = image_source_rir(room, b, a, 17);
  REQUIRE(r_ab.size() == r_ba.size());
  double peak = 0.0;
  for (double v : r_ab) peak = std::max(peak, std::abs(v));
  for (std::size_t i = 0; i < r_ab.size(); ++i)
    CHECK(std::abs(r_ab[i] - r_ba[i]) <= 1e-9 * peak);
}

TEST_CASE("image_source_rir rejects bad geometry") {
  const Room room{4.0, 5.0, 2.5, 0.3};
  CHECK_THROWS_WITH_AS(
      image_source_rir(room, {4.5, 1.0, 1.0}, {1.0, 1.0, 1.0}, 2),
      doctest::Contains("source outside room"), Error);
  CHECK_THROWS_WITH_AS(
      image_source_rir(room, {1.0, 1.0, 1.0}, {1.0, 5.5, 1.0}, 2),
      doctest::Contains("microphone outside room"), Error);
  CHECK_THROWS_WITH_AS(
      image_source_rir(room, {1.0, 1.0, 1.0}, {1.0, 1.0, 1.0}, 2),
      doctest::Contains("coincide"), Error);
}

TEST_CASE("schroeder decay of t60 = 0.5 rooms reaches -60 dB on time") {
  // Sabine inversion is exact only for diffuse fields; compact rooms stay
  // well within the +/-30% band, elongated ones drift slow along the long
  // axis (a property the standard simulators share).
  const Room rooms[] = {{3.0, 3.0, 3.0, 0.5},
                        {3.5, 4.0, 3.0, 0.5},
                        {2.5, 3.0, 2.2, 0.5}};
  const Vec3 srcs[] = {{0.8, 1.0, 1.3}, {0.9, 1.1, 1.4}, {0.6, 0.8, 1.0}};
  const Vec3 mics[] = {{2.1, 2.2, 1.7}, {2.6, 3.0, 1.6}, {1.9, 2.2, 1.3}};
  for (int r = 0; r < 3; ++r) {
    const Room& room = rooms[r];
    const int max_order = static_cast<int>(
        std::ceil(kSpeedOfSound * room.t60 * 1.1 /
                  std::min({room.width, room.length, room.height})));
    const auto rir = image_source_rir(room, srcs[r], mics[r], max_order);

    std::vector<double> edc(rir.size() + 1, 0.0);
    for (std::size_t i = rir.size(); i-- > 0;)
      edc[i] = edc[i + 1] + rir[i] * rir[i];
    const double total = edc[0];
    REQUIRE(total > 0.0);
    std::size_t crossing = rir.size();
    for (std::size_t i = 0; i < rir.size(); ++i) {
      if (edc[i] <= 1e-6 * total) {
        crossing = i;
        break;
      }
    }
    const double t = static_cast<double>(crossing) / 16000.0;
    CHECK(t >= 0.35);
    CHECK(t <= 0.65);
  }
}

TEST_CASE("scenario sampling respects every geometric constraint") {
  const SamplerConfig cfg;
  double dim_lo[4] = {1e9, 1e9, 1e9, 1e9};
  double dim_hi[4] = {-1e9, -1e9, -1e9, -1e9};
  double height_sum = 0.0, height_sq = 0.0;
  int height_n = 0;
  bool channel_seen[6] = {false, false, false, false, false, false};

  for (std::uint64_t seed = 0; seed < 10000; ++seed) {
    const auto sc = sample_scenario(seed, cfg);
    const double dims[4] = {sc.room.width, sc.room.length, sc.room.height,
                            sc.room.t60};
    const double lo[4] = {cfg.width_min, cfg.length_min, cfg.height_min,
                          cfg.t60_min};
    const double hi[4] = {cfg.width_max, cfg.length_max, cfg.height_max,
                          cfg.t60_max};
    for (int k = 0; k < 4; ++k) {
      REQUIRE(dims[k] >= lo[k]);
      REQUIRE(dims[k] <= hi[k]);
      dim_lo[k] = std::min(dim_lo[k], dims[k]);
      dim_hi[k] = std::max(dim_hi[k], dims[k]);
    }

    REQUIRE(sc.array.channel_count >= 2);
    REQUIRE(sc.array.channel_count <= 5);
    channel_seen[sc.array.channel_count] = true;
    REQUIRE(sc.array.center[0] >= 1.0);
    REQUIRE(sc.array.center[0] <= sc.room.width - 1.0);
    REQUIRE(sc.array.center[1] >= 1.0);
    REQUIRE(sc.array.center[1] <= sc.room.length - 1.0);
    REQUIRE(sc.array.center[2] == 1.5);
    REQUIRE(sc.array.rotation >= 0.0);
    REQUIRE(sc.array.rotation < 2.0 * std::numbers::pi);

    const double tdx = sc.target[0] - sc.array.center[0];
    const double tdy = sc.target[1] - sc.array.center[1];
    const double tdist = std::hypot(tdx, tdy);
    REQUIRE(tdist >= cfg.target_dist_min - 1e-12);
    REQUIRE(tdist <= cfg.target_dist_max + 1e-12);
    REQUIRE(sc.target[2] == sc.array.center[2]);
    const double bearing_err = std::abs(wrap_deg(
        (std::atan2(tdy, tdx) - sc.array.rotation) * 180.0 / std::numbers::pi +
        180.0) - 180.0);
    REQUIRE(bearing_err < 1e-9);

    REQUIRE(sc.interferers.size() == 5);
    for (std::size_t j = 0; j < sc.interferers.size(); ++j) {
      const auto& p = sc.interferers[j];
      REQUIRE(p[0] > cfg.source_wall_margin);
      REQUIRE(p[0] < sc.room.width - cfg.source_wall_margin);
      REQUIRE(p[1] > cfg.source_wall_margin);
      REQUIRE(p[1] < sc.room.length - cfg.source_wall_margin);
      REQUIRE(p[2] > cfg.source_wall_margin);
      REQUIRE(p[2] < sc.room.height - cfg.source_wall_margin);
      const double dx = p[0] - sc.array.center[0];
      const double dy = p[1] - sc.array.center[1];
      REQUIRE(std::hypot(dx, dy) >= cfg.interferer_min_dist - 1e-12);
      const double rel = wrap_deg(
          (std::atan2(dy, dx) - sc.array.rotation) * 180.0 /
          std::numbers::pi);
      // One interferer per 64 degree segment, none inside the +/-20 sector.
      REQUIRE(rel >= 20.0 + 64.0 * static_cast<double>(j) - 1e-9);
      REQUIRE(rel <= 20.0 + 64.0 * static_cast<double>(j + 1) + 1e-9);
      height_sum += p[2];
      height_sq += p[2] * p[2];
      ++height_n;
    }
  }

  // Empirical extremes hug the Table I bounds.
  const double lo[4] = {2.5, 3.0, 2.2, 0.2};
  const double hi[4] = {5.0, 9.0, 3.5, 0.5};
  for (int k = 0; k < 4; ++k) {
    CHECK(dim_lo[k] < lo[k] + 0.01 * (hi[k] - lo[k]));
    CHECK(dim_hi[k] > hi[k] - 0.01 * (hi[k] - lo[k]));
  }
  for (int c = 2; c <= 5; ++c) CHECK(channel_seen[c]);
  const double mean = height_sum / height_n;
  const double stddev = std::sqrt(height_sq / height_n - mean * mean);
  CHECK(mean == doctest::Approx(1.6).epsilon(0.005));
  CHECK(stddev == doctest::Approx(0.08).epsilon(0.05));
}

TEST_CASE("scenario sampling is bit-identical per seed") {
  const SamplerConfig cfg;
  for (std::uint64_t seed = 1; seed <= 40; ++seed) {
    const auto a = sample_scenario(seed, cfg);
    const auto b = sample_scenario(seed, cfg);
    CHECK(a.room.width == b.room.width);
    CHECK(a.room.length == b.room.length);
    CHECK(a.room.height == b.room.height);
    CHECK(a.room.t60 == b.room.t60);
    CHECK(a.array.center == b.array.center);
    CHECK(a.array.rotation == b.array.rotation);
    CHECK(a.array.channel_count == b.array.channel_count);
    CHECK(a.target == b.target);
    REQUIRE(a.interferers.size() == b.interferers.size());
    for (std::size_t j = 0; j < a.interferers.size(); ++j)
      CHECK(a.interferers[j] == b.interferers[j]);
  }
}

TEST_CASE("infeasible sampling config errors out") {
  SamplerConfig cfg;
  cfg.interferer_min_dist = 50.0;  // no room in Table I can satisfy this
  CHECK_THROWS_WITH_AS(sample_scenario(0, cfg),
                       doctest::Contains("rejection sampling failed"), Error);
}

TEST_CASE("rendered scenes satisfy the construction identities") {
  const auto sc = sample_scenario(7, SamplerConfig{});
  const RenderConfig cfg{8, 1.1};  // low order keeps the test fast
  const std::size_t n = 48000;

  const auto target = mono_wave(random_signal(n, 100));
  std::vector<MultiWave> interf;
  for (std::uint64_t j = 0; j < 5; ++j)
    interf.push_back(mono_wave(random_signal(n, 200 + j)));
  std::vector<MultiWave> silent;
  for (int j = 0; j < 5; ++j)
    silent.push_back(mono_wave(std::vector<double>(n, 0.0)));

  const auto full = render_scene(sc, target, interf, cfg);
  const auto clean = render_scene(sc, target, silent, cfg);
  const int C = sc.array.channel_count;
  REQUIRE(full.mixture.channel_count() == C);
  REQUIRE(full.noise_ref.channel_count() == C);
  REQUIRE(full.target_ref.channel_count() == 1);
  REQUIRE(full.mixture.length() == static_cast<std::int64_t>(n));

  // Silent interferers: no noise, +inf sentinel.
  CHECK(std::isinf(clean.snr_db));
  CHECK(clean.snr_db > 0.0);
  for (int c = 0; c < C; ++c)
    for (std::size_t i = 0; i < n; ++i) REQUIRE(clean.noise_ref.channels[c][i] == 0.0);

  // mixture = reverberant target + noise_ref, sample-exact.
  for (int c = 0; c < C; ++c)
    for (std::size_t i = 0; i < n; ++i)
      REQUIRE(full.mixture.channels[c][i] ==
              clean.mixture.channels[c][i] + full.noise_ref.channels[c][i]);

  // snr_db is the channel-0 energy ratio of exactly those two parts.
  CHECK(full.snr_db ==
        doctest::Approx(10.0 * std::log10(energy(clean.mixture.channels[0]) /
                                          energy(full.noise_ref.channels[0])))
            .epsilon(1e-9));
  CHECK(std::isfinite(full.snr_db));

  // target_ref: unit-gain dry target delayed by the direct path to mic 0.
  const auto mics = sc.array.mic_positions();
  const double dx = sc.target[0] - mics[0][0];
  const double dy = sc.target[1] - mics[0][1];
  const double dz = sc.target[2] - mics[0][2];
  const double delay =
      std::sqrt(dx * dx + dy * dy + dz * dz) / kSpeedOfSound * 16000.0;
  auto dry = target.channels[0];
  const double scale = rms(dry);
  for (double& v : dry) v /= scale;
  const int lag0 = static_cast<int>(std::lround(delay));
  double best = -1e300;
  int best_lag = -1;
  for (int lag = std::max(0, lag0 - 8); lag <= lag0 + 8; ++lag) {
    double acc = 0.0;
    for (std::size_t i = lag; i < n; ++i)
      acc += full.target_ref.channels[0][i] * dry[i - lag];
    if (acc > best) {
      best = acc;
      best_lag = lag;
    }
  }
  CHECK(best_lag == lag0);
  // Unit gain up to the interpolator's band-edge loss on a white signal.
  CHECK(energy(full.target_ref.channels[0]) ==
        doctest::Approx(static_cast<double>(n)).epsilon(0.03));

  // Swapping interferer signals moves noise but leaves the target side alone.
  auto swapped = interf;
  std::swap(swapped[1], swapped[3]);
  const auto perm = render_scene(sc, target, swapped, cfg);
  for (std::size_t i = 0; i < n; ++i)
    REQUIRE(perm.target_ref.channels[0][i] == full.target_ref.channels[0][i]);
  double diff = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    diff = std::max(diff, std::abs(perm.mixture.channels[0][i] -
                                   full.mixture.channels[0][i]));
  CHECK(diff > 1e-6);

  auto bad = interf;
  bad[2].sample_rate = 8000;
  CHECK_THROWS_WITH_AS(render_scene(sc, target, bad, cfg),
                       doctest::Contains("sample-rate mismatch"), Error);
}

TEST_CASE("render is bit-identical across repeated calls") {
  const auto sc = sample_scenario(11, SamplerConfig{});
  const RenderConfig cfg{6, 1.1};
  const std::size_t n = 48000;
  const auto target = mono_wave(random_signal(n, 1));
  std::vector<MultiWave> interf;
  for (std::uint64_t j = 0; j < 5; ++j)
    interf.push_back(mono_wave(random_signal(n, 10 + j)));
  const auto a = render_scene(sc, target, interf, cfg);
  const auto b = render_scene(sc, target, interf, cfg);
  CHECK(a.snr_db == b.snr_db);
  for (int c = 0; c < a.mixture.channel_count(); ++c)
    for (std::size_t i = 0; i < n; ++i)
      REQUIRE(a.mixture.channels[c][i] == b.mixture.channels[c][i]);
}

TEST_CASE("anechoic probe geometry") {
  ArrayPose array;
  array.center = {0.0, 0.0, 1.5};
  array.rotation = 0.0;
  array.channel_count = 2;

  std::vector<double> pulse(4096, 0.0);
  pulse[100] = 1.0;
  const auto sig = mono_wave(pulse);

  // Broadside: both mics equidistant, channels identical.
  const auto broadside = anechoic_probe(array, 90.0, 1.0, sig);
  REQUIRE(broadside.channel_count() == 2);
  for (std::size_t i = 0; i < pulse.size(); ++i)
    REQUIRE(broadside.channels[0][i] == broadside.channels[1][i]);

  // Endfire: inter-channel delay = diameter / c, channel 0 at unit gain.
  const auto endfire = anechoic_probe(array, 0.0, 1.0, sig);
  const double delay_diff =
      phase_delay(endfire.channels[1]) - phase_delay(endfire.channels[0]);
  CHECK(delay_diff == doctest::Approx(0.10 / 343.0 * 16000.0).epsilon(1e-3));
  CHECK(dc_sum(endfire.channels[0]) == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(dc_sum(endfire.channels[1]) / dc_sum(endfire.channels[0]) ==
        doctest::Approx(0.95 / 1.05).epsilon(1e-3));
  CHECK(phase_delay(endfire.channels[0]) ==
        doctest::Approx(100.0 + 0.95 / 343.0 * 16000.0).epsilon(1e-4));

  // At 0 degrees the probe source sits exactly where a sampled target sits.
  const auto sc = sample_scenario(3, SamplerConfig{});
  const double td = std::hypot(sc.target[0] - sc.array.center[0],
                               sc.target[1] - sc.array.center[1]);
  const auto probe_src = sc.array.point_at(0.0, td);
  CHECK(std::abs(probe_src[0] - sc.target[0]) < 1e-12);
  CHECK(std::abs(probe_src[1] - sc.target[1]) < 1e-12);
  CHECK(std::abs(probe_src[2] - sc.target[2]) < 1e-12);

  CHECK_THROWS_AS(anechoic_probe(array, 181.0, 1.0, sig), Error);
  CHECK_THROWS_AS(anechoic_probe(array, 0.0, 0.0, sig), Error);
}

TEST_CASE("dry corpus loads, orders, and loops utterances") {
  namespace fs = std::filesystem;
  const auto dir = fs::temp_directory_path() / "mcse_corpus_test";
  fs::remove_all(dir);
  fs::create_directories(dir);

  MultiWave shorter(1, 8000, 16000);
  for (std::size_t i = 0; i < 8000; ++i)
    shorter.channels[0][i] = std::sin(0.01 * static_cast<double>(i));
  MultiWave longer(1, 56000, 16000);
  for (std::size_t i = 0; i < 56000; ++i)
    longer.channels[0][i] = std::cos(0.003 * static_cast<double>(i));
  write_wav((dir / "b_long.wav").string(), longer);
  write_wav((dir / "a_short.wav").string(), shorter);

  const DryCorpus corpus(dir.string());
  REQUIRE(corpus.size() == 2);
  CHECK(corpus.name(0) == "a_short.wav");
  CHECK(corpus.name(1) == "b_long.wav");
  CHECK(corpus.sample_rate() == 16000);

  const auto looped = corpus.utterance(0, 48000);
  REQUIRE(looped.length() == 48000);
  const auto ref = read_wav((dir / "a_short.wav").string());
  for (std::size_t i = 0; i < 48000; ++i)
    REQUIRE(looped.channels[0][i] == ref.channels[0][i % 8000]);

  const auto untouched = corpus.utterance(1, 48000);
  CHECK(untouched.length() == 56000);

  CHECK_THROWS_AS(corpus.utterance(2, 0), Error);
  CHECK_THROWS_AS(DryCorpus((dir / "missing").string()), Error);
  fs::remove_all(dir);
}
