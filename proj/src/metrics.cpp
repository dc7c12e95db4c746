#include "mcse/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <numbers>
#include <numeric>

#include "mcse/common.hpp"
#include "mcse/numerics/fft.hpp"

namespace mcse {
namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

double sinc(double x) {
  if (x == 0.0) return 1.0;
  return std::sin(std::numbers::pi * x) / (std::numbers::pi * x);
}

constexpr int kEstoiRate = 10000;
constexpr int kEstoiFrame = 256;
constexpr int kEstoiHop = 128;
constexpr int kEstoiFft = 512;
constexpr int kEstoiBands = 15;
constexpr int kEstoiSegment = 30;
constexpr double kEstoiDynRangeDb = 40.0;
constexpr double kEstoiMinSeconds = 0.5;

std::vector<double> hann_periodic(int n) {
  std::vector<double> w(n);
  for (int i = 0; i < n; ++i)
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / n);
  return w;
}

// Drops every frame whose reference energy sits more than 40 dB below the
// loudest reference frame, then rebuilds both signals by overlap-adding the
// surviving windowed frames. The periodic Hann sums to one at half overlap,
// so regions where all frames survive come back unchanged.
void remove_silent_frames(std::vector<double>& est, std::vector<double>& ref) {
  const std::vector<double> w = hann_periodic(kEstoiFrame);
  const std::int64_t n = static_cast<std::int64_t>(ref.size());
  const std::int64_t frames =
      n < kEstoiFrame ? 0 : (n - kEstoiFrame) / kEstoiHop + 1;

  std::vector<double> energy(frames, 0.0);
  double peak = 0.0;
  for (std::int64_t m = 0; m < frames; ++m) {
    for (int i = 0; i < kEstoiFrame; ++i) {
      const double v = w[i] * ref[m * kEstoiHop + i];
      energy[m] += v * v;
    }
    peak = std::max(peak, energy[m]);
  }

  const double floor_energy = peak * std::pow(10.0, -kEstoiDynRangeDb / 10.0);
  std::vector<std::int64_t> kept;
  for (std::int64_t m = 0; m < frames; ++m)
    if (energy[m] > floor_energy) kept.push_back(m);

  const std::int64_t out_len =
      kept.empty() ? 0
                   : (static_cast<std::int64_t>(kept.size()) - 1) * kEstoiHop +
                         kEstoiFrame;
  std::vector<double> est_out(out_len, 0.0);
  std::vector<double> ref_out(out_len, 0.0);
  for (std::size_t q = 0; q < kept.size(); ++q) {
    const std::int64_t src = kept[q] * kEstoiHop;
    const std::int64_t dst = static_cast<std::int64_t>(q) * kEstoiHop;
    for (int i = 0; i < kEstoiFrame; ++i) {
      est_out[dst + i] += w[i] * est[src + i];
      ref_out[dst + i] += w[i] * ref[src + i];
    }
  }
  est = std::move(est_out);
  ref = std::move(ref_out);
}

// One-third-octave band envelopes: rows are the 15 bands with centers
// 150 * 2^(j/3), columns are STFT frames (256-sample Hann, hop 128, 512 FFT).
std::vector<std::vector<double>> band_envelopes(const std::vector<double>& x) {
  const std::vector<double> w = hann_periodic(kEstoiFrame);
  const std::int64_t n = static_cast<std::int64_t>(x.size());
  const std::int64_t frames =
      n < kEstoiFrame ? 0 : (n - kEstoiFrame) / kEstoiHop + 1;
  const int bins = kEstoiFft / 2 + 1;

  std::vector<std::pair<int, int>> band_bins(kEstoiBands);
  for (int j = 0; j < kEstoiBands; ++j) {
    const double cf = 150.0 * std::pow(2.0, j / 3.0);
    const double lo = cf * std::pow(2.0, -1.0 / 6.0);
    const double hi = cf * std::pow(2.0, 1.0 / 6.0);
    int k_lo = static_cast<int>(std::ceil(lo * kEstoiFft / kEstoiRate));
    int k_hi = static_cast<int>(std::ceil(hi * kEstoiFft / kEstoiRate));
    band_bins[j] = {std::min(k_lo, bins), std::min(k_hi, bins)};
  }

  std::vector<std::vector<double>> env(
      kEstoiBands, std::vector<double>(static_cast<std::size_t>(frames)));
  std::vector<double> buf(kEstoiFft, 0.0);
  for (std::int64_t m = 0; m < frames; ++m) {
    for (int i = 0; i < kEstoiFrame; ++i) buf[i] = w[i] * x[m * kEstoiHop + i];
    const std::vector<cdouble> spec = rfft(buf.data(), kEstoiFft);
    for (int j = 0; j < kEstoiBands; ++j) {
      double acc = 0.0;
      for (int k = band_bins[j].first; k < band_bins[j].second; ++k)
        acc += std::norm(spec[k]);
      env[j][static_cast<std::size_t>(m)] = std::sqrt(acc);
    }
  }
  return env;
}

// Subtracts the mean and scales to unit norm; an all-constant vector has
// nothing to normalize and is left at zero.
void normalize_inplace(double* v, int n) {
  double mean = 0.0;
  for (int i = 0; i < n; ++i) mean += v[i];
  mean /= n;
  double nrm = 0.0;
  for (int i = 0; i < n; ++i) {
    v[i] -= mean;
    nrm += v[i] * v[i];
  }
  nrm = std::sqrt(nrm);
  if (nrm > 0.0)
    for (int i = 0; i < n; ++i) v[i] /= nrm;
}

}  // namespace

MetricReport MetricReport::from_values(std::vector<double> values) {
  require(!values.empty(), "metric report: no values");
  MetricReport r;
  r.values = std::move(values);
  const std::size_t n = r.values.size();
  r.mean = std::accumulate(r.values.begin(), r.values.end(), 0.0) /
           static_cast<double>(n);
  if (n > 1) {
    double ss = 0.0;
    for (double v : r.values) ss += (v - r.mean) * (v - r.mean);
    const double stddev = std::sqrt(ss / static_cast<double>(n - 1));
    r.ci95 = 1.96 * stddev / std::sqrt(static_cast<double>(n));
  }
  return r;
}

void write_metric_csv(const std::string& path,
                      const std::vector<std::string>& names,
                      const std::vector<MetricReport>& reports) {
  require(names.size() == reports.size(),
          "metric csv: names and reports differ in count");
  std::FILE* f = std::fopen(path.c_str(), "w");
  require(f != nullptr, "metric csv: cannot open " + path);
  std::fputs("metric,count,mean,ci95\n", f);
  for (std::size_t i = 0; i < names.size(); ++i)
    std::fprintf(f, "%s,%zu,%.12g,%.12g\n", names[i].c_str(),
                 reports[i].values.size(), reports[i].mean, reports[i].ci95);
  std::fclose(f);
}

double si_sdr(const std::vector<double>& estimate,
              const std::vector<double>& reference) {
  require(estimate.size() == reference.size(),
          "si_sdr: signals differ in length");
  require(!reference.empty(), "si_sdr: empty signals");
  const double ref_energy = dot(reference, reference);
  require(ref_energy > 0.0, "si_sdr: reference is silent");

  const double beta = dot(estimate, reference) / ref_energy;
  double err_energy = 0.0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    const double e = beta * reference[i] - estimate[i];
    err_energy += e * e;
  }
  const double target_energy = beta * beta * ref_energy;
  if (err_energy == 0.0) return 60.0;
  if (target_energy == 0.0) return -60.0;
  const double db = 10.0 * std::log10(target_energy / err_energy);
  return std::clamp(db, -60.0, 60.0);
}

std::vector<double> resample_polyphase(const std::vector<double>& x, int up,
                                       int down) {
  require(up >= 1 && down >= 1, "resample: factors must be positive");
  const int g = std::gcd(up, down);
  up /= g;
  down /= g;
  if (up == down) return x;

  // Windowed-sinc prototype at the upsampled rate, 64 taps per phase. The
  // Blackman window runs over [0, taps] so the center lands on the integer
  // taps/2 and the compensated delay is exact.
  const int taps = 64 * up;
  const double cutoff = 0.5 / std::max(up, down);
  std::vector<double> h(taps);
  double sum = 0.0;
  for (int i = 0; i < taps; ++i) {
    const double win = 0.42 -
                       0.5 * std::cos(2.0 * std::numbers::pi * i / taps) +
                       0.08 * std::cos(4.0 * std::numbers::pi * i / taps);
    h[i] = win * 2.0 * cutoff * sinc(2.0 * cutoff * (i - taps / 2));
    sum += h[i];
  }
  for (double& v : h) v *= up / sum;

  const std::int64_t n = static_cast<std::int64_t>(x.size());
  const std::int64_t out_len = (n * up + down - 1) / down;
  std::vector<double> y(static_cast<std::size_t>(out_len), 0.0);
  for (std::int64_t m = 0; m < out_len; ++m) {
    const std::int64_t start = m * down + taps / 2;
    const int phase = static_cast<int>(start % up);
    const std::int64_t j0 = (start - phase) / up;
    double acc = 0.0;
    for (int k = 0; k < 64; ++k) {
      const std::int64_t j = j0 - k;
      if (j < 0) break;
      if (j >= n) continue;
      acc += h[phase + k * up] * x[static_cast<std::size_t>(j)];
    }
    y[static_cast<std::size_t>(m)] = acc;
  }
  return y;
}

double estoi(const std::vector<double>& estimate,
             const std::vector<double>& reference, int sample_rate) {
  require(estimate.size() == reference.size(),
          "estoi: signals differ in length");
  require(sample_rate >= 1, "estoi: bad sample rate");

  std::vector<double> est = estimate;
  std::vector<double> ref = reference;
  if (sample_rate != kEstoiRate) {
    const int g = std::gcd(sample_rate, kEstoiRate);
    est = resample_polyphase(est, kEstoiRate / g, sample_rate / g);
    ref = resample_polyphase(ref, kEstoiRate / g, sample_rate / g);
  }
  remove_silent_frames(est, ref);
  require(ref.size() >= static_cast<std::size_t>(kEstoiMinSeconds * kEstoiRate),
          "estoi: need at least 0.5 s of speech-active signal");

  const auto env_est = band_envelopes(est);
  const auto env_ref = band_envelopes(ref);
  const std::int64_t frames = static_cast<std::int64_t>(env_ref[0].size());
  const std::int64_t segments = frames - kEstoiSegment + 1;

  double score = 0.0;
  std::vector<double> a(kEstoiBands * kEstoiSegment);
  std::vector<double> b(kEstoiBands * kEstoiSegment);
  std::vector<double> col_a(kEstoiBands), col_b(kEstoiBands);
  for (std::int64_t m0 = 0; m0 < segments; ++m0) {
    for (int j = 0; j < kEstoiBands; ++j) {
      for (int t = 0; t < kEstoiSegment; ++t) {
        a[j * kEstoiSegment + t] =
            env_est[j][static_cast<std::size_t>(m0 + t)];
        b[j * kEstoiSegment + t] =
            env_ref[j][static_cast<std::size_t>(m0 + t)];
      }
      normalize_inplace(&a[j * kEstoiSegment], kEstoiSegment);
      normalize_inplace(&b[j * kEstoiSegment], kEstoiSegment);
    }
    double d = 0.0;
    for (int t = 0; t < kEstoiSegment; ++t) {
      for (int j = 0; j < kEstoiBands; ++j) {
        col_a[j] = a[j * kEstoiSegment + t];
        col_b[j] = b[j * kEstoiSegment + t];
      }
      normalize_inplace(col_a.data(), kEstoiBands);
      normalize_inplace(col_b.data(), kEstoiBands);
      d += dot(col_a, col_b);
    }
    score += d / kEstoiSegment;
  }
  return score / static_cast<double>(segments);
}

double energy_retention(const std::vector<double>& filtered,
                        const std::vector<double>& input) {
  require(filtered.size() == input.size(),
          "energy_retention: signals differ in length");
  const double in_energy = dot(input, input);
  require(in_energy > 0.0, "energy_retention: input is silent");
  return dot(filtered, filtered) / in_energy;
}

}  // namespace mcse
