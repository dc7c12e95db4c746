#include "mcse/stft.hpp"

#include <cmath>

#include "mcse/common.hpp"

namespace mcse {

std::vector<double> FrameParams::window() const {
  std::vector<double> w(static_cast<std::size_t>(window_len));
  for (int n = 0; n < window_len; ++n)
    w[static_cast<std::size_t>(n)] =
        std::sqrt(0.5 - 0.5 * std::cos(2.0 * M_PI * n / window_len));
  return w;
}

int FrameParams::frame_count(std::int64_t samples) const {
  require(samples >= window_len, "stft: signal shorter than one window");
  return static_cast<int>((samples - window_len) / hop) + 1;
}

Spectrogram analyze(const MultiWave& wave, const FrameParams& params) {
  require(params.hop * 2 == params.window_len,
          "stft: hop must be half the window");
  require(wave.channel_count() > 0, "stft: no channels");

  const int t_count = params.frame_count(wave.length());
  const int f_count = params.bins();
  const std::vector<double> win = params.window();

  Spectrogram spec;
  spec.params = params;
  spec.channels = wave.channel_count();
  spec.bins = f_count;
  spec.frames = t_count;
  spec.data.assign(
      static_cast<std::size_t>(spec.channels) * f_count * t_count, 0.0);

  std::vector<double> seg(static_cast<std::size_t>(params.window_len));
  for (int c = 0; c < spec.channels; ++c) {
    const auto& x = wave.channels[static_cast<std::size_t>(c)];
    for (int t = 0; t < t_count; ++t) {
      const std::int64_t base = static_cast<std::int64_t>(t) * params.hop;
      for (int n = 0; n < params.window_len; ++n)
        seg[static_cast<std::size_t>(n)] =
            x[static_cast<std::size_t>(base + n)] *
            win[static_cast<std::size_t>(n)];
      const std::vector<cdouble> bins_t = rfft(seg.data(), params.window_len);
      for (int f = 0; f < f_count; ++f)
        spec.at(c, f, t) = bins_t[static_cast<std::size_t>(f)];
    }
  }
  return spec;
}

MultiWave synthesize(const Spectrogram& spec) {
  require(spec.channels > 0 && spec.frames > 0, "synthesize: empty input");
  require(spec.bins == spec.params.bins(), "synthesize: bin count mismatch");
  const int L = spec.params.window_len;
  const int hop = spec.params.hop;
  const std::vector<double> win = spec.params.window();
  const std::int64_t n =
      static_cast<std::int64_t>(hop) * (spec.frames - 1) + L;

  MultiWave out;
  out.sample_rate = spec.params.sample_rate;
  out.channels.assign(static_cast<std::size_t>(spec.channels),
                      std::vector<double>(static_cast<std::size_t>(n), 0.0));

  std::vector<cdouble> frame_spec(static_cast<std::size_t>(spec.bins));
  for (int c = 0; c < spec.channels; ++c) {
    auto& x = out.channels[static_cast<std::size_t>(c)];
    for (int t = 0; t < spec.frames; ++t) {
      for (int f = 0; f < spec.bins; ++f)
        frame_spec[static_cast<std::size_t>(f)] = spec.at(c, f, t);
      const std::vector<double> frame = irfft(frame_spec.data(), L);
      const std::int64_t base = static_cast<std::int64_t>(t) * hop;
      for (int j = 0; j < L; ++j)
        x[static_cast<std::size_t>(base + j)] +=
            win[static_cast<std::size_t>(j)] *
            frame[static_cast<std::size_t>(j)];
    }
  }
  return out;
}

}  // namespace mcse
