#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include "mcse/common.hpp"
#include "mcse/metrics.hpp"
#include "mcse/rng.hpp"

using namespace mcse;

namespace {

// Pitched partials under a syllabic envelope with a weak noise floor, so
// band envelopes modulate the way speech does without ever going silent.
std::vector<double> speechy(Rng& rng, double seconds, int rate) {
  const std::int64_t n = static_cast<std::int64_t>(seconds * rate);
  std::vector<double> x(static_cast<std::size_t>(n));
  const double f0 = 110.0 + 50.0 * rng.uniform();
  const double phase = 2.0 * M_PI * rng.uniform();
  for (std::int64_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / rate;
    const double env = 0.575 + 0.425 * std::sin(2.0 * M_PI * 3.5 * t + phase);
    double v = 0.0;
    for (int h = 1; h <= 8; ++h)
      v += std::sin(2.0 * M_PI * f0 * h * (1.0 + 0.01 * std::sin(
                        2.0 * M_PI * 2.0 * t)) * t + 0.7 * h) / h;
    x[static_cast<std::size_t>(i)] = env * (0.3 * v + 0.01 * rng.normal());
  }
  return x;
}

std::vector<double> white(Rng& rng, std::size_t n, double scale) {
  std::vector<double> x(n);
  for (double& v : x) v = scale * rng.normal();
  return x;
}

double rms_of(const std::vector<double>& x) {
  double e = std::inner_product(x.begin(), x.end(), x.begin(), 0.0);
  return std::sqrt(e / static_cast<double>(x.size()));
}

// Component of `noise` orthogonal to `ref`, rescaled to the reference's norm.
std::vector<double> orthogonal_like(const std::vector<double>& noise,
                                    const std::vector<double>& ref) {
  const double rr = std::inner_product(ref.begin(), ref.end(), ref.begin(), 0.0);
  const double nr = std::inner_product(noise.begin(), noise.end(), ref.begin(), 0.0);
  std::vector<double> w(noise.size());
  for (std::size_t i = 0; i < w.size(); ++i)
    w[i] = noise[i] - (nr / rr) * ref[i];
  const double ww = std::inner_product(w.begin(), w.end(), w.begin(), 0.0);
  const double gain = std::sqrt(rr / ww);
  for (double& v : w) v *= gain;
  return w;
}

}  // namespace

TEST_CASE("si_sdr clamps perfect estimates and scaled copies at +60") {
  Rng rng(41);
  const std::vector<double> s = white(rng, 4096, 1.0);
  CHECK(si_sdr(s, s) == 60.0);

  std::vector<double> twice(s);
  for (double& v : twice) v *= 2.0;
  CHECK(si_sdr(twice, s) == 60.0);
}

TEST_CASE("si_sdr follows the projection algebra") {
  Rng rng(42);
  const std::vector<double> s = white(rng, 4096, 1.0);
  const std::vector<double> noise = white(rng, 4096, 1.0);
  const std::vector<double> w = orthogonal_like(noise, s);

  // Equal-power orthogonal error leaves exactly 0 dB.
  std::vector<double> est(s);
  for (std::size_t i = 0; i < est.size(); ++i) est[i] += w[i];
  CHECK(si_sdr(est, s) == doctest::Approx(0.0).epsilon(1e-9));

  // A tenth of that error is 20 dB.
  for (std::size_t i = 0; i < est.size(); ++i) est[i] = s[i] + 0.1 * w[i];
  CHECK(si_sdr(est, s) == doctest::Approx(20.0).epsilon(1e-9));

  // Pure orthogonal content has no target component at all.
  CHECK(si_sdr(w, s) == -60.0);
}

TEST_CASE("si_sdr is invariant under positive scaling of the estimate") {
  Rng rng(43);
  const std::vector<double> s = white(rng, 2048, 1.0);
  std::vector<double> est = white(rng, 2048, 0.3);
  for (std::size_t i = 0; i < est.size(); ++i) est[i] += s[i];

  const double base = si_sdr(est, s);
  std::vector<double> scaled(est);
  for (double& v : scaled) v *= 7.3;
  CHECK(si_sdr(scaled, s) == doctest::Approx(base).epsilon(1e-12));
  CHECK(si_sdr(est, s) == base);  // deterministic
}

TEST_CASE("si_sdr rejects unusable input") {
  const std::vector<double> a(16, 0.5);
  CHECK_THROWS_AS(si_sdr(a, std::vector<double>(15, 0.5)), Error);
  CHECK_THROWS_AS(si_sdr(a, std::vector<double>(16, 0.0)), Error);
  CHECK_THROWS_AS(si_sdr({}, {}), Error);
}

TEST_CASE("resampling preserves the passband and removes the stopband") {
  const int n = 16000;
  std::vector<double> dc(n, 1.0);
  const std::vector<double> y_dc = resample_polyphase(dc, 5, 8);
  REQUIRE(static_cast<int>(y_dc.size()) == 10000);
  for (int m = 500; m < 9500; ++m)
    CHECK(std::abs(y_dc[static_cast<std::size_t>(m)] - 1.0) < 5e-3);

  std::vector<double> tone(n), high(n);
  for (int i = 0; i < n; ++i) {
    tone[static_cast<std::size_t>(i)] = std::sin(2.0 * M_PI * 1000.0 * i / 16000.0);
    high[static_cast<std::size_t>(i)] = std::sin(2.0 * M_PI * 6800.0 * i / 16000.0);
  }
  const std::vector<double> y_tone = resample_polyphase(tone, 5, 8);
  double max_err = 0.0;
  for (int m = 500; m < 9500; ++m) {
    const double want = std::sin(2.0 * M_PI * 1000.0 * m / 10000.0);
    max_err = std::max(max_err,
                       std::abs(y_tone[static_cast<std::size_t>(m)] - want));
  }
  CHECK(max_err < 1e-3);

  // 6.8 kHz sits above the 5 kHz target Nyquist and must vanish.
  const std::vector<double> y_high = resample_polyphase(high, 5, 8);
  double e_out = 0.0;
  for (int m = 500; m < 9500; ++m)
    e_out += y_high[static_cast<std::size_t>(m)] * y_high[static_cast<std::size_t>(m)];
  CHECK(e_out / 9000.0 < 1e-6);
}

TEST_CASE("resampling also runs upward and degenerates to a copy") {
  const int n = 8000;
  std::vector<double> tone(n);
  for (int i = 0; i < n; ++i)
    tone[static_cast<std::size_t>(i)] = std::sin(2.0 * M_PI * 440.0 * i / 8000.0);
  const std::vector<double> up = resample_polyphase(tone, 10000, 8000);
  REQUIRE(static_cast<int>(up.size()) == 10000);
  double max_err = 0.0;
  for (int m = 500; m < 9500; ++m) {
    const double want = std::sin(2.0 * M_PI * 440.0 * m / 10000.0);
    max_err = std::max(max_err, std::abs(up[static_cast<std::size_t>(m)] - want));
  }
  CHECK(max_err < 1e-3);

  const std::vector<double> same = resample_polyphase(tone, 3, 3);
  CHECK(same == tone);
  CHECK_THROWS_AS(resample_polyphase(tone, 0, 5), Error);
  CHECK_THROWS_AS(resample_polyphase(tone, 5, 0), Error);
}

TEST_CASE("estoi scores a clean match as one") {
  Rng rng(7);
  const std::vector<double> x = speechy(rng, 1.2, 16000);
  CHECK(estoi(x, x, 16000) == doctest::Approx(1.0).epsilon(1e-9));

  // Native-rate input skips the resampler and must behave the same.
  Rng rng10(8);
  const std::vector<double> x10 = speechy(rng10, 1.0, 10000);
  CHECK(estoi(x10, x10, 10000) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("estoi scores independent white noise near zero") {
  for (int trial = 0; trial < 10; ++trial) {
    Rng ref_rng(100 + trial);
    Rng est_rng(900 + trial);
    const std::vector<double> ref = speechy(ref_rng, 1.2, 16000);
    const std::vector<double> est = white(est_rng, ref.size(), 0.1);
    CHECK(std::abs(estoi(est, ref, 16000)) < 0.1);
  }
}

TEST_CASE("estoi degrades as the noise grows") {
  Rng rng(11);
  const std::vector<double> ref = speechy(rng, 1.5, 16000);
  const double level = rms_of(ref);
  std::vector<double> light(ref), heavy(ref);
  Rng noise_rng(12);
  const std::vector<double> noise = white(noise_rng, ref.size(), 1.0);
  for (std::size_t i = 0; i < ref.size(); ++i) {
    light[i] += 0.1 * level * noise[i];
    heavy[i] += 1.0 * level * noise[i];
  }
  const double s_clean = estoi(ref, ref, 16000);
  const double s_light = estoi(light, ref, 16000);
  const double s_heavy = estoi(heavy, ref, 16000);
  CHECK(s_clean > s_light);
  CHECK(s_light > s_heavy + 0.02);
}

TEST_CASE("estoi is invariant to scaling of either signal") {
  Rng rng(13);
  const std::vector<double> ref = speechy(rng, 1.2, 16000);
  std::vector<double> est(ref);
  Rng noise_rng(14);
  const std::vector<double> noise = white(noise_rng, ref.size(), 1.0);
  for (std::size_t i = 0; i < est.size(); ++i)
    est[i] += 0.3 * rms_of(ref) * noise[i];

  const double base = estoi(est, ref, 16000);
  std::vector<double> est8(est), ref4(ref);
  for (double& v : est8) v *= 8.0;
  for (double& v : ref4) v *= 0.25;
  CHECK(estoi(est8, ref, 16000) == doctest::Approx(base).epsilon(1e-12));
  CHECK(estoi(est, ref4, 16000) == doctest::Approx(base).epsilon(1e-12));
  CHECK(estoi(est, ref, 16000) == base);  // deterministic
}

TEST_CASE("estoi rejects unusable input") {
  Rng rng(15);
  const std::vector<double> shorty = speechy(rng, 0.3, 16000);
  CHECK_THROWS_AS(estoi(shorty, shorty, 16000), Error);

  const std::vector<double> ok = speechy(rng, 1.0, 16000);
  std::vector<double> off(ok);
  off.pop_back();
  CHECK_THROWS_AS(estoi(off, ok, 16000), Error);
  CHECK_THROWS_AS(estoi(ok, ok, 0), Error);

  // An all-silent reference keeps no frames at all.
  const std::vector<double> silence(16000, 0.0);
  CHECK_THROWS_AS(estoi(silence, silence, 16000), Error);
}

TEST_CASE("energy retention reports the plain ratio") {
  Rng rng(16);
  const std::vector<double> x = white(rng, 2048, 0.7);
  CHECK(energy_retention(x, x) == 1.0);
  CHECK(energy_retention(std::vector<double>(x.size(), 0.0), x) == 0.0);

  std::vector<double> half(x);
  for (double& v : half) v *= 0.5;
  CHECK(energy_retention(half, x) == 0.25);

  CHECK_THROWS_AS(energy_retention(x, std::vector<double>(x.size(), 0.0)), Error);
  CHECK_THROWS_AS(energy_retention(x, std::vector<double>(7, 1.0)), Error);
}

TEST_CASE("metric report aggregates mean and confidence interval") {
  const MetricReport r = MetricReport::from_values({1.0, 2.0, 3.0, 4.0});
  CHECK(r.values.size() == 4);
  CHECK(r.mean == 2.5);
  CHECK(r.ci95 == doctest::Approx(1.96 * std::sqrt(5.0 / 3.0) / 2.0).epsilon(1e-12));

  const MetricReport single = MetricReport::from_values({7.0});
  CHECK(single.mean == 7.0);
  CHECK(single.ci95 == 0.0);

  CHECK_THROWS_AS(MetricReport::from_values({}), Error);
}

TEST_CASE("metric csv lists one row per metric") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "mcse_metrics_test";
  fs::create_directories(dir);
  const std::string path = (dir / "report.csv").string();

  const std::vector<std::string> names{"si_sdr", "estoi"};
  const std::vector<MetricReport> reports{
      MetricReport::from_values({1.0, 2.0}),
      MetricReport::from_values({0.5}),
  };
  write_metric_csv(path, names, reports);

  std::ifstream in(path);
  std::string header, row1, row2;
  REQUIRE(std::getline(in, header));
  REQUIRE(std::getline(in, row1));
  REQUIRE(std::getline(in, row2));
  CHECK(header == "metric,count,mean,ci95");

  char name[32];
  std::size_t count = 0;
  double mean = 0.0, ci = 0.0;
  REQUIRE(std::sscanf(row1.c_str(), "%31[^,],%zu,%lf,%lf", name, &count, &mean,
                      &ci) == 4);
  CHECK(std::string(name) == "si_sdr");
  CHECK(count == 2);
  CHECK(mean == doctest::Approx(1.5).epsilon(1e-12));
  CHECK(ci == doctest::Approx(0.98).epsilon(1e-12));
  REQUIRE(std::sscanf(row2.c_str(), "%31[^,],%zu,%lf,%lf", name, &count, &mean,
                      &ci) == 4);
  CHECK(std::string(name) == "estoi");
  CHECK(count == 1);
  CHECK(mean == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(ci == 0.0);

  CHECK_THROWS_AS(write_metric_csv(path, {"a"}, reports), Error);
  CHECK_THROWS_AS(
      write_metric_csv((dir / "no_dir" / "x.csv").string(), names, reports),
      Error);
  fs::remove_all(dir);
}
