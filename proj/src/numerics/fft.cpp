#include "mcse/numerics/fft.hpp"

#include <cmath>

#include "mcse/common.hpp"

namespace mcse {

namespace {

bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

// Twiddles for the largest size seen so far; W[j] = exp(-i*2*pi*j/n).
const std::vector<cdouble>& twiddles(int n) {
  thread_local std::vector<cdouble> cache;
  thread_local int cache_n = 0;
  if (cache_n < n) {
    cache.resize(static_cast<std::size_t>(n) / 2);
    for (int j = 0; j < n / 2; ++j)
      cache[static_cast<std::size_t>(j)] =
          std::polar(1.0, -2.0 * M_PI * j / n);
    cache_n = n;
  }
  return cache;
}

}  // namespace

void fft_inplace(std::vector<cdouble>& a, bool inverse) {
  const int n = static_cast<int>(a.size());
  require(is_pow2(n), "fft: size must be a power of two");
  if (n == 1) return;

  for (int i = 1, j = 0; i < n; ++i) {
    int bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[static_cast<std::size_t>(i)],
                         a[static_cast<std::size_t>(j)]);
  }

  // The cached table may belong to a larger transform; stride it relative to
  // its own denominator, which divides evenly for any power-of-two stage.
  const auto& w = twiddles(n);
  const int table_n = static_cast<int>(w.size()) * 2;
  for (int len = 2; len <= n; len <<= 1) {
    const int stride = table_n / len;
    for (int i = 0; i < n; i += len) {
      for (int j = 0; j < len / 2; ++j) {
        cdouble tw = w[static_cast<std::size_t>(j * stride)];
        if (inverse) tw = std::conj(tw);
        cdouble u = a[static_cast<std::size_t>(i + j)];
        cdouble v = a[static_cast<std::size_t>(i + j + len / 2)] * tw;
        a[static_cast<std::size_t>(i + j)] = u + v;
        a[static_cast<std::size_t>(i + j + len / 2)] = u - v;
      }
    }
  }

  if (inverse) {
    const double inv = 1.0 / n;
    for (auto& z : a) z *= inv;
  }
}

std::vector<cdouble> rfft(const double* x, int n) {
  std::vector<cdouble> a(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) a[static_cast<std::size_t>(i)] = x[i];
  fft_inplace(a, false);
  a.resize(static_cast<std::size_t>(n) / 2 + 1);
  return a;
}

std::vector<double> irfft(const cdouble* spec, int n) {
  std::vector<cdouble> a(static_cast<std::size_t>(n));
  const int f = n / 2 + 1;
  for (int k = 0; k < f; ++k) a[static_cast<std::size_t>(k)] = spec[k];
  for (int k = f; k < n; ++k)
    a[static_cast<std::size_t>(k)] = std::conj(spec[n - k]);
  fft_inplace(a, true);
  std::vector<double> out(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] =
      a[static_cast<std::size_t>(i)].real();
  return out;
}

}  // namespace mcse
