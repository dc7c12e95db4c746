#pragma once

#include <cstdint>
#include <vector>

#include "mcse/stft.hpp"

namespace mcse {

// Complex time-frequency mask over a single reference channel. Compressed
// masks live in (-1,1) per component and must be decompressed before use.
struct ComplexMask {
  int bins = 0;
  int frames = 0;
  bool compressed = false;
  std::vector<cdouble> data;  // [f][t] row-major

  cdouble& at(int f, int t) {
    return data[static_cast<std::size_t>(f) * frames + t];
  }
  cdouble at(int f, int t) const {
    return data[static_cast<std::size_t>(f) * frames + t];
  }
};

// M = S·conj(Y) / (|Y|² + ε) with ε = 1e-12; single-channel inputs.
ComplexMask ideal_cirm(const Spectrogram& s_ref, const Spectrogram& y_ref);

// Per-component K(1−e^{−Cx})/(1+e^{−Cx}) with K = C = 1 (equals tanh(x/2)).
ComplexMask compress(const ComplexMask& m);

// Exact inverse of compress; components at or beyond ±1 are clamped to
// ±(1−1e-7) and counted into *clamp_count when given.
ComplexMask decompress(const ComplexMask& m,
                       std::int64_t* clamp_count = nullptr);

// Eqs. Re(M_V) = 1 − Re(M_S), Im(M_V) = −Im(M_S); uncompressed masks only.
ComplexMask noise_mask(const ComplexMask& m_s);

// Elementwise Ŝ = M ∘ Y on the reference channel; rejects compressed masks.
Spectrogram apply_mask(const ComplexMask& m, const Spectrogram& y_ref);

}  // namespace mcse
