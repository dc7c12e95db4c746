#include "mcse/wave.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "mcse/common.hpp"

namespace mcse {

double energy(const std::vector<double>& x) {
  double e = 0.0;
  for (double v : x) e += v * v;
  return e;
}

double rms(const std::vector<double>& x) {
  return x.empty() ? 0.0 : std::sqrt(energy(x) / static_cast<double>(x.size()));
}

namespace {

struct Reader {
  const std::string& path;
  std::ifstream f;
  explicit Reader(const std::string& p) : path(p), f(p, std::ios::binary) {
    require(f.good(), "cannot open wav file: " + p);
  }
  void bytes(void* dst, std::size_t n) {
    f.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n));
    require(static_cast<std::size_t>(f.gcount()) == n,
            "truncated wav file: " + path);
  }
  std::uint32_t u32() {
    std::uint8_t b[4];
    bytes(b, 4);
    return b[0] | (b[1] << 8) | (b[2] << 16) | (std::uint32_t(b[3]) << 24);
  }
  std::uint16_t u16() {
    std::uint8_t b[2];
    bytes(b, 2);
    return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
  }
  std::string tag() {
    char t[5] = {0};
    bytes(t, 4);
    return t;
  }
};

void put_u32(std::ofstream& f, std::uint32_t v) {
  std::uint8_t b[4] = {std::uint8_t(v), std::uint8_t(v >> 8),
                       std::uint8_t(v >> 16), std::uint8_t(v >> 24)};
  f.write(reinterpret_cast<char*>(b), 4);
}
void put_u16(std::ofstream& f, std::uint16_t v) {
  std::uint8_t b[2] = {std::uint8_t(v), std::uint8_t(v >> 8)};
  f.write(reinterpret_cast<char*>(b), 2);
}

}  // namespace

MultiWave read_wav(const std::string& path) {
  Reader r(path);
  require(r.tag() == "RIFF", "not a RIFF file: " + path);
  r.u32();
  require(r.tag() == "WAVE", "not a WAVE file: " + path);

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  std::vector<std::uint8_t> data;
  while (r.f.peek() != EOF) {
    std::string chunk = r.tag();
    std::uint32_t size = r.u32();
    if (chunk == "fmt ") {
      format = r.u16();
      channels = r.u16();
      rate = r.u32();
      r.u32();  // byte rate
      r.u16();  // block align
      bits = r.u16();
      if (size > 16) r.f.seekg(size - 16, std::ios::cur);
    } else if (chunk == "data") {
      data.resize(size);
      r.bytes(data.data(), size);
    } else {
      r.f.seekg(size + (size & 1), std::ios::cur);
    }
  }
  require(channels > 0 && rate > 0, "malformed wav header: " + path);
  require((format == 1 && bits == 16) || (format == 3 && bits == 32),
          "unsupported wav encoding (want pcm16 or float32): " + path);

  const std::size_t bytes_per = bits / 8;
  const std::size_t frames = data.size() / (bytes_per * channels);
  MultiWave wave(channels, static_cast<std::int64_t>(frames),
                 static_cast<int>(rate));
  const std::uint8_t* p = data.data();
  for (std::size_t n = 0; n < frames; ++n) {
    for (int c = 0; c < channels; ++c) {
      if (format == 1) {
        std::int16_t s;
        std::memcpy(&s, p, 2);
        wave.channels[c][n] = static_cast<double>(s) / 32768.0;
        p += 2;
      } else {
        float s;
        std::memcpy(&s, p, 4);
        wave.channels[c][n] = static_cast<double>(s);
        p += 4;
      }
    }
  }
  return wave;
}

void write_wav(const std::string& path, const MultiWave& wave) {
  const int channels = wave.channel_count();
  require(channels > 0, "write_wav: empty wave");
  const std::int64_t frames = wave.length();
  std::ofstream f(path, std::ios::binary);
  require(f.good(), "cannot create wav file: " + path);

  const std::uint32_t data_size =
      static_cast<std::uint32_t>(frames * channels * 4);
  f.write("RIFF", 4);
  put_u32(f, 36 + data_size);
  f.write("WAVE", 4);
  f.write("fmt ", 4);
  put_u32(f, 16);
  put_u16(f, 3);  // IEEE float
  put_u16(f, static_cast<std::uint16_t>(channels));
  put_u32(f, static_cast<std::uint32_t>(wave.sample_rate));
  put_u32(f, static_cast<std::uint32_t>(wave.sample_rate * channels * 4));
  put_u16(f, static_cast<std::uint16_t>(channels * 4));
  put_u16(f, 32);
  f.write("data", 4);
  put_u32(f, data_size);
  for (std::int64_t n = 0; n < frames; ++n) {
    for (int c = 0; c < channels; ++c) {
      float s = static_cast<float>(wave.channels[c][n]);
      f.write(reinterpret_cast<char*>(&s), 4);
    }
  }
  require(f.good(), "write failed: " + path);
}

}  // namespace mcse
