#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mcse/rng.hpp"
#include "mcse/wave.hpp"

namespace mcse {

// Synthetic speech-like utterances: an impulse-train or noise source with a
// wandering pitch contour, shaped by three gliding formant resonators and a
// syllabic envelope with real pauses. Stands in for a recorded dry corpus.
MultiWave synth_utterance(Rng& rng, double seconds, int sample_rate = 16000);

struct CorpusConfig {
  int count = 40;
  double seconds_min = 3.2;
  double seconds_max = 5.0;
  int sample_rate = 16000;
  std::uint64_t seed = 0;
};

// Writes utt_0000.wav ... into `directory` (created if missing) and returns
// the filenames in order. Deterministic in config.seed.
std::vector<std::string> write_corpus(const std::string& directory,
                                      const CorpusConfig& config);

}  // namespace mcse
