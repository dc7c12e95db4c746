#include "mcse/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>

#include "mcse/common.hpp"

namespace mcse {
namespace {

enum class SegKind { Voiced, Fricative, Pause };

struct Segment {
  SegKind kind;
  std::int64_t length;
  double f0_start = 0.0, f0_end = 0.0;
  double formants_start[3] = {0, 0, 0};
  double formants_end[3] = {0, 0, 0};
};

// Two-pole resonator with coefficients recomputed every sample; the glide
// rates are slow enough that the filter stays effectively stationary.
struct Resonator {
  double y1 = 0.0, y2 = 0.0;

  double step(double x, double freq, double bandwidth, int rate) {
    const double r = std::exp(-std::numbers::pi * bandwidth / rate);
    const double c = 2.0 * r * std::cos(2.0 * std::numbers::pi * freq / rate);
    const double y = (1.0 - r * r) * x + c * y1 - r * r * y2;
    y2 = y1;
    y1 = y;
    return y;
  }
};

void draw_formants(Rng& rng, double out[3]) {
  out[0] = rng.uniform(280.0, 680.0);
  out[1] = rng.uniform(950.0, 2300.0);
  out[2] = rng.uniform(2400.0, 3200.0);
}

// Butterworth high-pass biquad. Recording chains high-pass real speech
// corpora; without the same rolloff the image method's coherent
// low-frequency buildup dominates every rendered mixture.
struct HighPass {
  double b0, b1, b2, a1, a2;
  double x1 = 0.0, x2 = 0.0, y1 = 0.0, y2 = 0.0;

  HighPass(double cutoff, int rate) {
    const double w = std::tan(std::numbers::pi * cutoff / rate);
    const double k = 1.0 / (1.0 + std::numbers::sqrt2 * w + w * w);
    b0 = k;
    b1 = -2.0 * k;
    b2 = k;
    a1 = 2.0 * k * (w * w - 1.0);
    a2 = k * (1.0 - std::numbers::sqrt2 * w + w * w);
  }

  double step(double x) {
    const double y = b0 * x + b1 * x1 + b2 * x2 - a1 * y1 - a2 * y2;
    x2 = x1;
    x1 = x;
    y2 = y1;
    y1 = y;
    return y;
  }
};

}  // namespace

MultiWave synth_utterance(Rng& rng, double seconds, int sample_rate) {
  require(seconds > 0.0, "synth_utterance: duration must be positive");
  require(sample_rate >= 8000, "synth_utterance: sample rate too low");
  const std::int64_t total =
      static_cast<std::int64_t>(std::llround(seconds * sample_rate));

  const double f0_base = rng.uniform(95.0, 210.0);
  double f0_walk = f0_base;
  double formants[3];
  draw_formants(rng, formants);

  // Segment plan: mostly voiced syllables, occasional fricatives, pauses
  // between phrases so the silence appears at realistic rates.
  std::vector<Segment> plan;
  std::int64_t planned = 0;
  int since_pause = 0;
  while (planned < total) {
    Segment seg;
    const double dice = rng.uniform();
    if (dice < 0.12 || since_pause > 9) {
      seg.kind = SegKind::Pause;
      seg.length = static_cast<std::int64_t>(rng.uniform(0.06, 0.30) * sample_rate);
      since_pause = 0;
    } else if (dice < 0.27) {
      seg.kind = SegKind::Fricative;
      seg.length = static_cast<std::int64_t>(rng.uniform(0.06, 0.15) * sample_rate);
      ++since_pause;
    } else {
      seg.kind = SegKind::Voiced;
      seg.length = static_cast<std::int64_t>(rng.uniform(0.12, 0.30) * sample_rate);
      ++since_pause;
    }
    f0_walk = std::clamp(f0_walk * (1.0 + 0.08 * rng.normal()), 0.7 * f0_base,
                         1.4 * f0_base);
    seg.f0_start = f0_walk;
    f0_walk = std::clamp(f0_walk * (1.0 + 0.05 * rng.normal()), 0.7 * f0_base,
                         1.4 * f0_base);
    seg.f0_end = f0_walk;
    std::copy(formants, formants + 3, seg.formants_start);
    draw_formants(rng, seg.formants_end);
    std::copy(seg.formants_end, seg.formants_end + 3, formants);
    plan.push_back(seg);
    planned += seg.length;
  }

  MultiWave wave(1, total, sample_rate);
  std::vector<double>& out = wave.channels[0];
  Resonator res[3];
  const double bandwidths[3] = {70.0, 110.0, 150.0};
  double phase = 1.0;  // emit a pulse on the first voiced sample
  double tilt = 0.0;   // leaky integrator giving the source its -6 dB/oct
  std::int64_t n = 0;
  for (const Segment& seg : plan) {
    for (std::int64_t i = 0; i < seg.length && n < total; ++i, ++n) {
      const double u = static_cast<double>(i) / static_cast<double>(seg.length);
      // Raised-cosine syllable envelope; declination lowers pitch over time.
      const double env = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi *
                                              std::min(1.0, u * 1.15));
      const double decl = 1.0 - 0.1 * static_cast<double>(n) / total;

      double src = 0.0;
      if (seg.kind == SegKind::Voiced) {
        const double f0 = decl * (seg.f0_start + u * (seg.f0_end - seg.f0_start));
        phase += f0 / sample_rate;
        if (phase >= 1.0) {
          phase -= 1.0;
          src = 1.0 + 0.1 * rng.normal();  // shimmer
        }
        tilt = 0.96 * tilt + src;
        // Aspiration joins after the tilt integrator; inside it the noise
        // picks up a 1/f^2 rumble that no recorded corpus carries.
        src = tilt + 0.015 * rng.normal();
      } else if (seg.kind == SegKind::Fricative) {
        src = 0.25 * rng.normal();
        tilt *= 0.96;
      } else {
        tilt *= 0.96;
        continue;  // exact silence
      }

      double v = src;
      for (int f = 0; f < 3; ++f) {
        const double freq = seg.formants_start[f] +
                            u * (seg.formants_end[f] - seg.formants_start[f]);
        v = res[f].step(v, freq, bandwidths[f], sample_rate);
      }
      out[static_cast<std::size_t>(n)] = env * v;
    }
  }

  HighPass block(70.0, sample_rate);
  for (double& v : out) v = block.step(v);

  // Unit RMS over the full utterance, then a peak guard.
  const double level = rms(out);
  require(level > 0.0, "synth_utterance: produced silence");
  for (double& v : out) v /= level;
  double peak = 0.0;
  for (double v : out) peak = std::max(peak, std::abs(v));
  if (peak > 8.0)
    for (double& v : out) v *= 8.0 / peak;
  return wave;
}

std::vector<std::string> write_corpus(const std::string& directory,
                                      const CorpusConfig& config) {
  require(config.count >= 1, "write_corpus: count must be positive");
  require(config.seconds_min > 0.0 && config.seconds_min <= config.seconds_max,
          "write_corpus: bad duration range");
  namespace fs = std::filesystem;
  fs::create_directories(directory);

  Rng master(config.seed);
  std::vector<std::string> names;
  for (int i = 0; i < config.count; ++i) {
    Rng utt_rng = master.fork(static_cast<std::uint64_t>(i));
    const double seconds =
        utt_rng.uniform(config.seconds_min, config.seconds_max);
    const MultiWave wave =
        synth_utterance(utt_rng, seconds, config.sample_rate);
    char name[32];
    std::snprintf(name, sizeof(name), "utt_%04d.wav", i);
    write_wav((fs::path(directory) / name).string(), wave);
    names.emplace_back(name);
  }
  return names;
}

}  // namespace mcse
