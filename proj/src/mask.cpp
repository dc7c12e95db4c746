#include "mcse/mask.hpp"

#include <cmath>

#include "mcse/common.hpp"

namespace mcse {

namespace {

constexpr double kEps = 1e-12;
constexpr double kClampLimit = 1.0 - 1e-7;

void require_single_channel(const Spectrogram& s, const char* who) {
  require(s.channels == 1, std::string(who) + ": expected a single channel");
}

ComplexMask like(const Spectrogram& s) {
  ComplexMask m;
  m.bins = s.bins;
  m.frames = s.frames;
  m.data.resize(static_cast<std::size_t>(s.bins) * s.frames);
  return m;
}

}  // namespace

ComplexMask ideal_cirm(const Spectrogram& s_ref, const Spectrogram& y_ref) {
  require_single_channel(s_ref, "ideal_cirm");
  require_single_channel(y_ref, "ideal_cirm");
  require(s_ref.bins == y_ref.bins && s_ref.frames == y_ref.frames,
          "ideal_cirm: shape mismatch");
  ComplexMask m = like(y_ref);
  for (std::size_t i = 0; i < m.data.size(); ++i)
    m.data[i] = s_ref.data[i] * std::conj(y_ref.data[i]) /
                (std::norm(y_ref.data[i]) + kEps);
  return m;
}

ComplexMask compress(const ComplexMask& m) {
  require(!m.compressed, "compress: mask already compressed");
  ComplexMask out = m;
  out.compressed = true;
  // K = C = 1
  auto squash = [](double x) {
    const double e = std::exp(-x);
    return (1.0 - e) / (1.0 + e);
  };
  for (auto& z : out.data) z = cdouble(squash(z.real()), squash(z.imag()));
  return out;
}

ComplexMask decompress(const ComplexMask& m, std::int64_t* clamp_count) {
  require(m.compressed, "decompress: mask is not compressed");
  ComplexMask out = m;
  out.compressed = false;
  std::int64_t clamps = 0;
  auto unsquash = [&clamps](double y) {
    if (y > kClampLimit) {
      y = kClampLimit;
      ++clamps;
    } else if (y < -kClampLimit) {
      y = -kClampLimit;
      ++clamps;
    }
    return std::log((1.0 + y) / (1.0 - y));
  };
  for (auto& z : out.data) z = cdouble(unsquash(z.real()), unsquash(z.imag()));
  if (clamp_count) *clamp_count += clamps;
  return out;
}

ComplexMask noise_mask(const ComplexMask& m_s) {
  require(!m_s.compressed, "noise_mask: mask must be uncompressed");
  ComplexMask out = m_s;
  for (auto& z : out.data) z = cdouble(1.0 - z.real(), -z.imag());
  return out;
}

Spectrogram apply_mask(const ComplexMask& m, const Spectrogram& y_ref) {
  require(!m.compressed, "apply_mask: decompress the mask first");
  require_single_channel(y_ref, "apply_mask");
  require(m.bins == y_ref.bins && m.frames == y_ref.frames,
          "apply_mask: shape mismatch");
  Spectrogram out = y_ref;
  for (std::size_t i = 0; i < out.data.size(); ++i)
    out.data[i] = m.data[i] * y_ref.data[i];
  return out;
}

}  // namespace mcse
