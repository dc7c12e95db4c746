#pragma once

#include <string>
#include <vector>

namespace mcse {

// Per-utterance metric values with their normal-approximation aggregate.
struct MetricReport {
  std::vector<double> values;
  double mean = 0.0;
  double ci95 = 0.0;  // half-width, 1.96 * sample stddev / sqrt(n)

  static MetricReport from_values(std::vector<double> values);
};

void write_metric_csv(const std::string& path,
                      const std::vector<std::string>& names,
                      const std::vector<MetricReport>& reports);

// Scale-invariant SDR in dB, clamped to +-60. The reference is projected
// out of the estimate: 10 log10(|b s|^2 / |b s - s_hat|^2), b = <s_hat,s>/|s|^2.
double si_sdr(const std::vector<double>& estimate,
              const std::vector<double>& reference);

// Rational-ratio polyphase resampler, windowed-sinc prototype with 64 taps
// per phase. Samples outside the input are treated as zero.
std::vector<double> resample_polyphase(const std::vector<double>& x, int up,
                                       int down);

// Extended short-time objective intelligibility. Both signals are brought to
// 10 kHz, frames 40 dB below the loudest reference frame are removed from
// both, and 15 one-third-octave band envelopes from 150 Hz are compared over
// 30-frame segments after row and column mean-variance normalization. The
// result is the averaged inner product, in [-1, 1].
double estoi(const std::vector<double>& estimate,
             const std::vector<double>& reference, int sample_rate);

// |filtered|^2 / |input|^2.
double energy_retention(const std::vector<double>& filtered,
                        const std::vector<double>& input);

}  // namespace mcse
