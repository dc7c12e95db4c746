#include "mcse/roomsim.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <numbers>

#include "mcse/common.hpp"
#include "mcse/numerics/fft.hpp"

namespace mcse {

namespace {

constexpr int kSincHalf = 40;
constexpr int kSincOversample = 64;

double vec_dist(const Vec3& a, const Vec3& b) {
  const double dx = a[0] - b[0];
  const double dy = a[1] - b[1];
  const double dz = a[2] - b[2];
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

// Hann-windowed sinc over |x| <= 40.5, oversampled for linear interpolation.
const std::vector<double>& sinc_table() {
  static const std::vector<double> table = [] {
    const int half_span = kSincHalf + 1;
    std::vector<double> t(2 * half_span * kSincOversample + 1, 0.0);
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double x =
          static_cast<double>(i) / kSincOversample - half_span;
      if (std::abs(x) > kSincHalf + 0.5) continue;
      const double s =
          x == 0.0 ? 1.0
                   : std::sin(std::numbers::pi * x) / (std::numbers::pi * x);
      const double w =
          0.5 + 0.5 * std::cos(std::numbers::pi * x / (kSincHalf + 0.5));
      t[i] = s * w;
    }
    return t;
  }();
  return table;
}

// Adds an 81-tap fractionally delayed impulse; taps falling outside the
// buffer are dropped.
void deposit_impulse(std::vector<double>& rir, double delay_samples,
                     double amp) {
  const auto& table = sinc_table();
  const int size = static_cast<int>(rir.size());
  const int first =
      static_cast<int>(std::ceil(delay_samples - (kSincHalf + 0.5)));
  const int k_lo = std::max(0, -first);
  const int k_hi = std::min(2 * kSincHalf, size - 1 - first);
  double pos = (first + k_lo - delay_samples + kSincHalf + 1) * kSincOversample;
  for (int k = k_lo; k <= k_hi; ++k, pos += kSincOversample) {
    const int i0 = static_cast<int>(pos);
    const double f = pos - i0;
    rir[first + k] += amp * ((1.0 - f) * table[i0] + f * table[i0 + 1]);
  }
}

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

std::vector<cdouble> padded_rfft(const std::vector<double>& x,
                                 std::size_t n_fft) {
  std::vector<double> pad(n_fft, 0.0);
  std::copy(x.begin(), x.end(), pad.begin());
  return rfft(pad.data(), static_cast<int>(n_fft));
}

// irfft(x_spec .* rfft(h)), cropped. n_fft must cover the linear convolution.
std::vector<double> spectral_convolve(const std::vector<cdouble>& x_spec,
                                      const std::vector<double>& h,
                                      std::size_t n_fft, std::size_t out_len) {
  auto hs = padded_rfft(h, n_fft);
  for (std::size_t i = 0; i < hs.size(); ++i) hs[i] *= x_spec[i];
  auto full = irfft(hs.data(), static_cast<int>(n_fft));
  full.resize(out_len);
  return full;
}

void check_room(const Room& room, const char* who) {
  require(room.width > 0.0 && room.length > 0.0 && room.height > 0.0,
          std::string(who) + ": room dimensions must be positive");
  require(room.t60 > 0.0, std::string(who) + ": t60 must be positive");
}

}  // namespace

double sabine_beta(const Room& room) {
  check_room(room, "sabine_beta");
  const double volume = room.width * room.length * room.height;
  const double surface = 2.0 * (room.width * room.length +
                                room.width * room.height +
                                room.length * room.height);
  const double alpha = std::min(1.0, 0.161 * volume / (surface * room.t60));
  return std::sqrt(1.0 - alpha);
}

std::vector<Vec3> ArrayPose::mic_positions() const {
  require(channel_count >= 1, "ArrayPose: channel_count must be positive");
  require(diameter > 0.0, "ArrayPose: diameter must be positive");
  const double radius = diameter / 2.0;
  std::vector<Vec3> mics(channel_count);
  for (int c = 0; c < channel_count; ++c) {
    const double a =
        rotation + 2.0 * std::numbers::pi * c / channel_count;
    mics[c] = {center[0] + radius * std::cos(a),
               center[1] + radius * std::sin(a), center[2]};
  }
  return mics;
}

Vec3 ArrayPose::point_at(double bearing_deg, double distance) const {
  const double a = rotation + bearing_deg * std::numbers::pi / 180.0;
  return {center[0] + distance * std::cos(a),
          center[1] + distance * std::sin(a), center[2]};
}

std::vector<double> image_source_rir(const Room& room, const Vec3& src,
                                     const Vec3& mic, int max_order,
                                     int sample_rate) {
  check_room(room, "image_source_rir");
  require(max_order >= 0, "image_source_rir: max_order must be non-negative");
  require(sample_rate > 0, "image_source_rir: sample rate must be positive");
  const double dims[3] = {room.width, room.length, room.height};
  for (int a = 0; a < 3; ++a) {
    require(src[a] > 0.0 && src[a] < dims[a],
            "image_source_rir: source outside room");
    require(mic[a] > 0.0 && mic[a] < dims[a],
            "image_source_rir: microphone outside room");
  }
  require(vec_dist(src, mic) > 1e-9,
          "image_source_rir: source and microphone coincide");

  const double beta = sabine_beta(room);
  std::vector<double> beta_pow(max_order + 1, 1.0);
  for (int k = 1; k <= max_order; ++k) beta_pow[k] = beta_pow[k - 1] * beta;

  // Image coordinates per axis: (1-2q)*src + 2n*dim, with |n-q| + |n|
  // reflections; the total reflection count of an image is the sum over axes.
  struct AxisImage {
    double coord;
    int refl;
  };
  std::array<std::vector<AxisImage>, 3> axis;
  const int n_max = (max_order + 1) / 2;
  for (int a = 0; a < 3; ++a) {
    for (int n = -n_max; n <= n_max; ++n) {
      for (int q = 0; q <= 1; ++q) {
        const int refl = std::abs(n - q) + std::abs(n);
        if (refl > max_order) continue;
        axis[a].push_back({(1 - 2 * q) * src[a] + 2.0 * n * dims[a], refl});
      }
    }
  }

  double span[3];
  for (int a = 0; a < 3; ++a) {
    double m = 0.0;
    for (const auto& img : axis[a]) m = std::max(m, std::abs(img.coord - mic[a]));
    span[a] = m;
  }
  const double max_dist =
      std::sqrt(span[0] * span[0] + span[1] * span[1] + span[2] * span[2]);
  const double samples_per_meter = sample_rate / kSpeedOfSound;
  std::vector<double> rir(
      static_cast<std::size_t>(std::ceil(max_dist * samples_per_meter)) +
          kSincHalf + 2,
      0.0);

  for (const auto& ix : axis[0]) {
    const double dx = ix.coord - mic[0];
    for (const auto& iy : axis[1]) {
      const int rxy = ix.refl + iy.refl;
      if (rxy > max_order) continue;
      const double dy = iy.coord - mic[1];
      const double dxy2 = dx * dx + dy * dy;
      for (const auto& iz : axis[2]) {
        const int refl = rxy + iz.refl;
        if (refl > max_order) continue;
        const double dz = iz.coord - mic[2];
        const double dist = std::sqrt(dxy2 + dz * dz);
        if (dist <= 1e-9) continue;  // only the direct term can degenerate
        deposit_impulse(rir, dist * samples_per_meter, beta_pow[refl] / dist);
      }
    }
  }
  return rir;
}

Scenario sample_scenario(std::uint64_t seed, const SamplerConfig& cfg) {
  require(cfg.width_min > 0.0 && cfg.width_min <= cfg.width_max,
          "sample_scenario: invalid width range");
  require(cfg.length_min > 0.0 && cfg.length_min <= cfg.length_max,
          "sample_scenario: invalid length range");
  require(cfg.height_min > 0.0 && cfg.height_min <= cfg.height_max,
          "sample_scenario: invalid height range");
  require(cfg.t60_min > 0.0 && cfg.t60_min <= cfg.t60_max,
          "sample_scenario: invalid t60 range");
  require(cfg.channels_min >= 1 && cfg.channels_min <= cfg.channels_max,
          "sample_scenario: invalid channel range");
  require(cfg.array_wall_margin > 0.0 && cfg.array_height > 0.0 &&
              cfg.array_diameter > 0.0,
          "sample_scenario: invalid array geometry");
  require(cfg.target_dist_min > 0.0 &&
              cfg.target_dist_min <= cfg.target_dist_max,
          "sample_scenario: invalid target distance range");
  require(cfg.interferer_count >= 0, "sample_scenario: invalid interferer count");
  require(cfg.clear_sector_deg >= 0.0 && cfg.clear_sector_deg < 180.0,
          "sample_scenario: invalid clear sector");
  require(cfg.interferer_min_dist > 0.0 &&
              cfg.interferer_height_std >= 0.0 &&
              cfg.source_wall_margin > 0.0,
          "sample_scenario: invalid interferer config");

  Rng rng(seed);
  const double segment =
      cfg.interferer_count > 0
          ? (360.0 - 2.0 * cfg.clear_sector_deg) / cfg.interferer_count
          : 0.0;

  for (int attempt = 0; attempt < 10000; ++attempt) {
    Scenario sc;
    sc.rng_seed = seed;
    sc.room.width = rng.uniform(cfg.width_min, cfg.width_max);
    sc.room.length = rng.uniform(cfg.length_min, cfg.length_max);
    sc.room.height = rng.uniform(cfg.height_min, cfg.height_max);
    sc.room.t60 = rng.uniform(cfg.t60_min, cfg.t60_max);

    const double m = cfg.array_wall_margin;
    if (sc.room.width <= 2.0 * m || sc.room.length <= 2.0 * m) continue;
    if (cfg.array_height >= sc.room.height) continue;
    sc.array.diameter = cfg.array_diameter;
    sc.array.channel_count =
        cfg.channels_min + static_cast<int>(rng.uniform_int(
                               cfg.channels_max - cfg.channels_min + 1));
    sc.array.center = {rng.uniform(m, sc.room.width - m),
                       rng.uniform(m, sc.room.length - m), cfg.array_height};
    sc.array.rotation = rng.uniform(0.0, 2.0 * std::numbers::pi);

    const double sm = cfg.source_wall_margin;
    auto inside = [&](const Vec3& p) {
      return p[0] > sm && p[0] < sc.room.width - sm && p[1] > sm &&
             p[1] < sc.room.length - sm && p[2] > sm &&
             p[2] < sc.room.height - sm;
    };

    sc.target = sc.array.point_at(
        0.0, rng.uniform(cfg.target_dist_min, cfg.target_dist_max));
    bool ok = inside(sc.target);

    for (int j = 0; ok && j < cfg.interferer_count; ++j) {
      const double bearing =
          cfg.clear_sector_deg + segment * j + rng.uniform(0.0, segment);
      const double a =
          sc.array.rotation + bearing * std::numbers::pi / 180.0;
      const double ux = std::cos(a);
      const double uy = std::sin(a);
      double t_max = std::numeric_limits<double>::infinity();
      if (ux > 0.0)
        t_max = std::min(t_max, (sc.room.width - sm - sc.array.center[0]) / ux);
      if (ux < 0.0) t_max = std::min(t_max, (sm - sc.array.center[0]) / ux);
      if (uy > 0.0)
        t_max =
            std::min(t_max, (sc.room.length - sm - sc.array.center[1]) / uy);
      if (uy < 0.0) t_max = std::min(t_max, (sm - sc.array.center[1]) / uy);

      const double z =
          rng.normal(cfg.interferer_height_mean, cfg.interferer_height_std);
      if (t_max <= cfg.interferer_min_dist || z <= sm ||
          z >= sc.room.height - sm) {
        ok = false;
        break;
      }
      const double d = rng.uniform(cfg.interferer_min_dist, t_max);
      sc.interferers.push_back(
          {sc.array.center[0] + d * ux, sc.array.center[1] + d * uy, z});
    }
    if (ok) return sc;
  }
  fail("sample_scenario: rejection sampling failed after 10000 attempts");
}

Scene render_scene(const Scenario& sc, const MultiWave& target_speech,
                   const std::vector<MultiWave>& interferer_speech,
                   const RenderConfig& cfg) {
  const int C = sc.array.channel_count;
  require(C >= 1, "render_scene: scenario has no channels");
  require(target_speech.channel_count() == 1,
          "render_scene: target signal must be mono");
  const int rate = target_speech.sample_rate;
  const auto n = static_cast<std::size_t>(target_speech.length());
  require(static_cast<double>(n) >= 3.0 * rate,
          "render_scene: dry signals must be at least 3 s");
  require(interferer_speech.size() == sc.interferers.size(),
          "render_scene: one dry signal per interferer required");
  for (const auto& w : interferer_speech) {
    require(w.channel_count() == 1, "render_scene: interferers must be mono");
    require(w.sample_rate == rate, "render_scene: sample-rate mismatch");
    require(static_cast<std::size_t>(w.length()) >= n,
            "render_scene: interferer signal shorter than target; loop it "
            "to cover the target length");
  }

  auto unit_rms = [n](const std::vector<double>& x) {
    std::vector<double> out(x.begin(), x.begin() + n);
    const double r = rms(out);
    if (r > 0.0)
      for (double& v : out) v /= r;
    return out;
  };

  const auto mics = sc.array.mic_positions();
  const double min_dim =
      std::min({sc.room.width, sc.room.length, sc.room.height});
  const double horizon = kSpeedOfSound * sc.room.t60 * cfg.horizon_factor;
  const int max_order = std::min(
      cfg.max_order_cap, static_cast<int>(std::ceil(horizon / min_dim)));

  std::vector<std::vector<double>> target_rir(C);
  for (int c = 0; c < C; ++c)
    target_rir[c] = image_source_rir(sc.room, sc.target, mics[c], max_order, rate);
  std::vector<std::vector<std::vector<double>>> noise_rir(sc.interferers.size());
  for (std::size_t j = 0; j < sc.interferers.size(); ++j) {
    noise_rir[j].resize(C);
    for (int c = 0; c < C; ++c)
      noise_rir[j][c] =
          image_source_rir(sc.room, sc.interferers[j], mics[c], max_order, rate);
  }

  // All paths share the scene scale that puts the target's direct path at
  // channel 0 at unit gain.
  const double direct_dist = vec_dist(sc.target, mics[0]);
  const double scene_gain = direct_dist;

  std::size_t max_rir = 0;
  for (int c = 0; c < C; ++c) max_rir = std::max(max_rir, target_rir[c].size());
  for (const auto& per_mic : noise_rir)
    for (const auto& r : per_mic) max_rir = std::max(max_rir, r.size());
  const double direct_delay = direct_dist / kSpeedOfSound * rate;
  max_rir = std::max(
      max_rir, static_cast<std::size_t>(std::ceil(direct_delay)) + kSincHalf + 2);
  const std::size_t n_fft = next_pow2(n + max_rir);

  const auto target_dry = unit_rms(target_speech.channels[0]);
  const auto target_spec = padded_rfft(target_dry, n_fft);

  Scene scene;
  scene.mixture = MultiWave(C, n, rate);
  scene.noise_ref = MultiWave(C, n, rate);
  scene.target_ref = MultiWave(1, n, rate);

  std::vector<std::vector<double>> reverb(C);
  for (int c = 0; c < C; ++c) {
    reverb[c] = spectral_convolve(target_spec, target_rir[c], n_fft, n);
    for (double& v : reverb[c]) v *= scene_gain;
  }
  for (std::size_t j = 0; j < interferer_speech.size(); ++j) {
    const auto dry = unit_rms(interferer_speech[j].channels[0]);
    const auto spec = padded_rfft(dry, n_fft);
    for (int c = 0; c < C; ++c) {
      const auto y = spectral_convolve(spec, noise_rir[j][c], n_fft, n);
      auto& acc = scene.noise_ref.channels[c];
      for (std::size_t i = 0; i < n; ++i) acc[i] += scene_gain * y[i];
    }
  }
  for (int c = 0; c < C; ++c)
    for (std::size_t i = 0; i < n; ++i)
      scene.mixture.channels[c][i] = reverb[c][i] + scene.noise_ref.channels[c][i];

  std::vector<double> direct(
      static_cast<std::size_t>(std::ceil(direct_delay)) + kSincHalf + 2, 0.0);
  deposit_impulse(direct, direct_delay, 1.0);
  scene.target_ref.channels[0] = spectral_convolve(target_spec, direct, n_fft, n);

  const double target_energy = energy(reverb[0]);
  const double noise_energy = energy(scene.noise_ref.channels[0]);
  scene.snr_db = noise_energy > 0.0
                     ? 10.0 * std::log10(target_energy / noise_energy)
                     : std::numeric_limits<double>::infinity();
  return scene;
}

MultiWave anechoic_probe(const ArrayPose& array, double angle_deg,
                         double distance, const MultiWave& signal) {
  require(std::abs(angle_deg) <= 180.0,
          "anechoic_probe: angle must be within +/-180 degrees");
  require(distance > 0.0, "anechoic_probe: distance must be positive");
  require(signal.channel_count() == 1, "anechoic_probe: signal must be mono");
  const auto n = static_cast<std::size_t>(signal.length());
  require(n > 0, "anechoic_probe: empty signal");
  const int rate = signal.sample_rate;

  const auto mics = array.mic_positions();
  const Vec3 src = array.point_at(angle_deg, distance);
  const double ref_dist = vec_dist(src, mics[0]);
  require(ref_dist > 1e-9, "anechoic_probe: source coincides with channel 0");

  double max_delay = 0.0;
  for (const auto& mic : mics) {
    const double d = vec_dist(src, mic);
    require(d > 1e-9, "anechoic_probe: source coincides with a microphone");
    max_delay = std::max(max_delay, d / kSpeedOfSound * rate);
  }
  const std::size_t rir_len =
      static_cast<std::size_t>(std::ceil(max_delay)) + kSincHalf + 2;
  const std::size_t n_fft = next_pow2(n + rir_len);
  const auto spec = padded_rfft(signal.channels[0], n_fft);

  MultiWave out(array.channel_count, n, rate);
  for (int c = 0; c < array.channel_count; ++c) {
    const double d = vec_dist(src, mics[c]);
    std::vector<double> rir(rir_len, 0.0);
    deposit_impulse(rir, d / kSpeedOfSound * rate, ref_dist / d);
    out.channels[c] = spectral_convolve(spec, rir, n_fft, n);
  }
  return out;
}

DryCorpus::DryCorpus(const std::string& directory) {
  namespace fs = std::filesystem;
  require(fs::is_directory(directory),
          "DryCorpus: not a directory: " + directory);
  std::vector<fs::path> paths;
  for (const auto& entry : fs::directory_iterator(directory))
    if (entry.is_regular_file() && entry.path().extension() == ".wav")
      paths.push_back(entry.path());
  std::sort(paths.begin(), paths.end());
  require(!paths.empty(), "DryCorpus: no .wav files in " + directory);
  for (const auto& path : paths) {
    MultiWave w = read_wav(path.string());
    require(w.channel_count() == 1,
            "DryCorpus: expected mono WAV: " + path.string());
    require(w.length() > 0, "DryCorpus: empty WAV: " + path.string());
    if (signals_.empty()) sample_rate_ = w.sample_rate;
    require(w.sample_rate == sample_rate_,
            "DryCorpus: sample-rate mismatch: " + path.string());
    names_.push_back(path.filename().string());
    signals_.push_back(std::move(w.channels[0]));
  }
}

MultiWave DryCorpus::utterance(std::size_t i, std::int64_t min_len) const {
  require(i < signals_.size(), "DryCorpus: utterance index out of range");
  const auto& s = signals_[i];
  MultiWave w(1, 0, sample_rate_);
  auto& out = w.channels[0];
  out = s;
  while (static_cast<std::int64_t>(out.size()) < min_len) {
    const std::size_t need = static_cast<std::size_t>(min_len) - out.size();
    out.insert(out.end(), s.begin(), s.begin() + std::min(need, s.size()));
  }
  return w;
}

}  // namespace mcse
