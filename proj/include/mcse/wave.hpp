#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace mcse {

// Multi-channel time-domain audio. Samples are kept in double precision
// internally; files are written as 32-bit float WAV.
struct MultiWave {
  int sample_rate = 16000;
  std::vector<std::vector<double>> channels;  // [C][N], equal lengths

  MultiWave() = default;
  MultiWave(int channel_count, std::int64_t length, int rate = 16000)
      : sample_rate(rate),
        channels(channel_count, std::vector<double>(length, 0.0)) {}

  int channel_count() const { return static_cast<int>(channels.size()); }
  std::int64_t length() const {
    return channels.empty() ? 0 : static_cast<std::int64_t>(channels[0].size());
  }
};

double rms(const std::vector<double>& x);
double energy(const std::vector<double>& x);

// RIFF/WAVE with IEEE float (format 3) output; reads format 1 (PCM16) and
// format 3 (float32) input.
MultiWave read_wav(const std::string& path);
void write_wav(const std::string& path, const MultiWave& wave);

}  // namespace mcse
