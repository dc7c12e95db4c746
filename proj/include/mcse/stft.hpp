#pragma once

#include <vector>

#include "mcse/numerics/fft.hpp"
#include "mcse/wave.hpp"

namespace mcse {

// Analysis/synthesis framing. The same sqrt-Hann window is used on both
// sides; at 50% overlap the squared window sums to exactly 1, so overlap-add
// reconstruction needs no further normalization.
struct FrameParams {
  int window_len = 512;  // 32 ms at 16 kHz
  int hop = 256;
  int sample_rate = 16000;

  std::vector<double> window() const;
  int bins() const { return window_len / 2 + 1; }
  // Frames start at sample 0, no centering; trailing samples that do not
  // fill a window are dropped.
  int frame_count(std::int64_t samples) const;
};

struct Spectrogram {
  FrameParams params;
  int channels = 0;
  int bins = 0;
  int frames = 0;
  std::vector<cdouble> data;  // [c][f][t] row-major

  cdouble& at(int c, int f, int t) {
    return data[(static_cast<std::size_t>(c) * bins + f) * frames + t];
  }
  cdouble at(int c, int f, int t) const {
    return data[(static_cast<std::size_t>(c) * bins + f) * frames + t];
  }
};

Spectrogram analyze(const MultiWave& wave, const FrameParams& params);
MultiWave synthesize(const Spectrogram& spec);

}  // namespace mcse
