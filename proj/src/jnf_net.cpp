#include "mcse/jnf_net.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "mcse/common.hpp"

namespace mcse {

namespace {

using nlohmann::json;

void check_permutation(const std::vector<int>& sigma, int n, const char* who) {
  require(static_cast<int>(sigma.size()) == n,
          std::string(who) + ": permutation length mismatch");
  std::vector<char> seen(static_cast<std::size_t>(n), 0);
  for (int v : sigma) {
    require(v >= 0 && v < n && !seen[static_cast<std::size_t>(v)],
            std::string(who) + ": invalid permutation");
    seen[static_cast<std::size_t>(v)] = 1;
  }
}

// (B, S, F) -> (S, B, F) on the tape.
Tape::NodeId tape_transpose01(Tape& tape, Tape::NodeId x) {
  const auto& shape = tape.value(x).shape;
  require(shape.size() == 3, "ft_switch: rank-3 batch expected");
  const std::int64_t b = shape[0], s = shape[1], f = shape[2];
  std::vector<std::int64_t> map(static_cast<std::size_t>(b * s * f));
  std::int64_t o = 0;
  for (std::int64_t j = 0; j < s; ++j)
    for (std::int64_t i = 0; i < b; ++i)
      for (std::int64_t k = 0; k < f; ++k)
        map[static_cast<std::size_t>(o++)] = (i * s + j) * f + k;
  return tape.gather(x, std::move(map),
                     {static_cast<int>(s), static_cast<int>(b),
                      static_cast<int>(f)});
}

// Permutes the sequence axis; inverse=true applies sigma^{-1}.
Tape::NodeId tape_shuffle(Tape& tape, Tape::NodeId x,
                          const std::vector<int>& sigma, bool inverse) {
  const auto& shape = tape.value(x).shape;
  require(shape.size() == 3, "shuffle: rank-3 batch expected");
  const std::int64_t b = shape[0], s = shape[1], f = shape[2];
  check_permutation(sigma, static_cast<int>(s), "shuffle");
  std::vector<int> src(sigma.size());
  if (inverse) {
    for (std::size_t i = 0; i < sigma.size(); ++i)
      src[static_cast<std::size_t>(sigma[i])] = static_cast<int>(i);
  } else {
    src = sigma;
  }
  std::vector<std::int64_t> map(static_cast<std::size_t>(b * s * f));
  std::int64_t o = 0;
  for (std::int64_t i = 0; i < b; ++i)
    for (std::int64_t j = 0; j < s; ++j) {
      const std::int64_t pick = src[static_cast<std::size_t>(j)];
      for (std::int64_t k = 0; k < f; ++k)
        map[static_cast<std::size_t>(o++)] = (i * s + pick) * f + k;
    }
  return tape.gather(x, std::move(map), tape.value(x).shape);
}

}  // namespace

std::string mode_name(NetMode mode) {
  switch (mode) {
    case NetMode::T: return "T";
    case NetMode::F: return "F";
    case NetMode::FT: return "FT";
    case NetMode::PF: return "PF";
  }
  fail("mode_name: unknown mode");
}

NetMode mode_from_name(const std::string& name) {
  if (name == "T") return NetMode::T;
  if (name == "F") return NetMode::F;
  if (name == "FT") return NetMode::FT;
  if (name == "PF") return NetMode::PF;
  fail("mode_from_name: unknown mode \"" + name + "\"");
}

void NetSpec::validate() const {
  require(hidden1 >= 1 && hidden2 >= 1, "NetSpec: hidden sizes must be positive");
  require(bins >= 2, "NetSpec: at least two frequency bins required");
  require(channels >= 1, "NetSpec: channels must be positive");
  if (mode == NetMode::PF) {
    require(channels == 1, "NetSpec: PF takes a single pre-selected channel");
    require(!nsf, "NetSpec: PF has no shuffle axes; nsf is undefined for it");
    require(!freq_index_augment,
            "NetSpec: PF stacks the spectrum; bin augmentation is undefined");
  }
}

int NetSpec::input_features() const {
  if (mode == NetMode::PF) return 2 * bins;
  return 2 * channels + (augmented() ? 1 : 0);
}

int NetSpec::ff_out() const { return mode == NetMode::PF ? 2 * bins : 2; }

std::string netspec_to_json_string(const NetSpec& spec) {
  json j;
  j["mode"] = mode_name(spec.mode);
  j["nsf"] = spec.nsf;
  j["hidden1"] = spec.hidden1;
  j["hidden2"] = spec.hidden2;
  j["bidirectional"] = spec.bidirectional;
  j["channels"] = spec.channels;
  j["bins"] = spec.bins;
  j["freq_index_augment"] = spec.freq_index_augment;
  return j.dump();
}

NetSpec netspec_from_json_string(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    fail(std::string("netspec: invalid JSON: ") + e.what());
  }
  NetSpec spec;
  try {
    spec.mode = mode_from_name(j.at("mode").get<std::string>());
    spec.nsf = j.at("nsf").get<bool>();
    spec.hidden1 = j.at("hidden1").get<int>();
    spec.hidden2 = j.at("hidden2").get<int>();
    spec.bidirectional = j.at("bidirectional").get<bool>();
    spec.channels = j.at("channels").get<int>();
    spec.bins = j.at("bins").get<int>();
    spec.freq_index_augment = j.at("freq_index_augment").get<bool>();
  } catch (const json::exception& e) {
    fail(std::string("netspec: missing or mistyped field: ") + e.what());
  }
  spec.validate();
  return spec;
}

SeqBatch arrange(const Spectrogram& spec, NetMode mode) {
  const int C = spec.channels, F = spec.bins, T = spec.frames;
  require(C >= 1 && F >= 1 && T >= 1, "arrange: empty spectrogram");
  SeqBatch out;
  if (mode == NetMode::T) {
    out.seq_axis = SeqAxis::Time;
    out.data = Tensor({F, T, 2 * C});
    std::int64_t o = 0;
    for (int f = 0; f < F; ++f)
      for (int t = 0; t < T; ++t)
        for (int c = 0; c < C; ++c) {
          const cdouble v = spec.at(c, f, t);
          out.data[o++] = v.real();
          out.data[o++] = v.imag();
        }
  } else if (mode == NetMode::F || mode == NetMode::FT) {
    out.seq_axis = SeqAxis::Frequency;
    out.data = Tensor({T, F, 2 * C});
    std::int64_t o = 0;
    for (int t = 0; t < T; ++t)
      for (int f = 0; f < F; ++f)
        for (int c = 0; c < C; ++c) {
          const cdouble v = spec.at(c, f, t);
          out.data[o++] = v.real();
          out.data[o++] = v.imag();
        }
  } else {
    require(C == 1, "arrange: PF requires a single pre-selected channel");
    out.seq_axis = SeqAxis::Time;
    out.data = Tensor({1, T, 2 * F});
    std::int64_t o = 0;
    for (int t = 0; t < T; ++t)
      for (int f = 0; f < F; ++f) {
        const cdouble v = spec.at(0, f, t);
        out.data[o++] = v.real();
        out.data[o++] = v.imag();
      }
  }
  return out;
}

Spectrogram inverse_arrange(const SeqBatch& batch, NetMode mode,
                            const FrameParams& params, int channels) {
  const auto& d = batch.data;
  require(d.rank() == 3, "inverse_arrange: rank-3 batch expected");
  Spectrogram spec;
  spec.params = params;
  int C, F, T;
  if (mode == NetMode::T) {
    F = d.dim(0); T = d.dim(1); C = d.dim(2) / 2;
    require(d.dim(2) == 2 * channels, "inverse_arrange: feature width mismatch");
  } else if (mode == NetMode::F || mode == NetMode::FT) {
    T = d.dim(0); F = d.dim(1); C = d.dim(2) / 2;
    require(d.dim(2) == 2 * channels, "inverse_arrange: feature width mismatch");
  } else {
    require(channels == 1 && d.dim(0) == 1,
            "inverse_arrange: PF holds one stacked channel");
    C = 1; T = d.dim(1); F = d.dim(2) / 2;
    require(d.dim(2) % 2 == 0, "inverse_arrange: feature width mismatch");
  }
  require(C == channels, "inverse_arrange: channel mismatch");
  spec.channels = C;
  spec.bins = F;
  spec.frames = T;
  spec.data.assign(static_cast<std::size_t>(C) * F * T, cdouble{});
  std::int64_t o = 0;
  if (mode == NetMode::T) {
    for (int f = 0; f < F; ++f)
      for (int t = 0; t < T; ++t)
        for (int c = 0; c < C; ++c) {
          spec.at(c, f, t) = cdouble(d[o], d[o + 1]);
          o += 2;
        }
  } else if (mode == NetMode::F || mode == NetMode::FT) {
    for (int t = 0; t < T; ++t)
      for (int f = 0; f < F; ++f)
        for (int c = 0; c < C; ++c) {
          spec.at(c, f, t) = cdouble(d[o], d[o + 1]);
          o += 2;
        }
  } else {
    for (int t = 0; t < T; ++t)
      for (int f = 0; f < F; ++f) {
        spec.at(0, f, t) = cdouble(d[o], d[o + 1]);
        o += 2;
      }
  }
  return spec;
}

SeqBatch ft_switch(const SeqBatch& x) {
  const auto& d = x.data;
  require(d.rank() == 3, "ft_switch: rank-3 batch expected");
  const int B = d.dim(0), S = d.dim(1), F = d.dim(2);
  SeqBatch out;
  out.seq_axis =
      x.seq_axis == SeqAxis::Frequency ? SeqAxis::Time : SeqAxis::Frequency;
  out.data = Tensor({S, B, F});
  std::int64_t o = 0;
  for (int j = 0; j < S; ++j)
    for (int i = 0; i < B; ++i)
      for (int k = 0; k < F; ++k)
        out.data[o++] = d[(static_cast<std::int64_t>(i) * S + j) * F + k];
  return out;
}

SeqBatch shuffle_wrap(const SeqBatch& x, const std::vector<int>& sigma) {
  const auto& d = x.data;
  require(d.rank() == 3, "shuffle_wrap: rank-3 batch expected");
  const int B = d.dim(0), S = d.dim(1), F = d.dim(2);
  check_permutation(sigma, S, "shuffle_wrap");
  SeqBatch out;
  out.seq_axis = x.seq_axis;
  out.data = Tensor(d.shape);
  for (int i = 0; i < B; ++i)
    for (int j = 0; j < S; ++j) {
      const std::int64_t dst = (static_cast<std::int64_t>(i) * S + j) * F;
      const std::int64_t src =
          (static_cast<std::int64_t>(i) * S + sigma[static_cast<std::size_t>(j)]) * F;
      for (int k = 0; k < F; ++k) out.data[dst + k] = d[src + k];
    }
  return out;
}

SeqBatch unshuffle(const SeqBatch& y, const std::vector<int>& sigma) {
  const auto& d = y.data;
  require(d.rank() == 3, "unshuffle: rank-3 batch expected");
  const int B = d.dim(0), S = d.dim(1), F = d.dim(2);
  check_permutation(sigma, S, "unshuffle");
  SeqBatch out;
  out.seq_axis = y.seq_axis;
  out.data = Tensor(d.shape);
  for (int i = 0; i < B; ++i)
    for (int j = 0; j < S; ++j) {
      const std::int64_t dst =
          (static_cast<std::int64_t>(i) * S + sigma[static_cast<std::size_t>(j)]) * F;
      const std::int64_t src = (static_cast<std::int64_t>(i) * S + j) * F;
      for (int k = 0; k < F; ++k) out.data[dst + k] = d[src + k];
    }
  return out;
}

SeqBatch freq_index_augment(const SeqBatch& x, NetMode mode) {
  require(mode != NetMode::PF,
          "freq_index_augment: PF has no per-element bin index");
  const auto& d = x.data;
  require(d.rank() == 3, "freq_index_augment: rank-3 batch expected");
  const int B = d.dim(0), S = d.dim(1), F = d.dim(2);
  const int bins = mode == NetMode::T ? B : S;
  require(bins >= 2, "freq_index_augment: needs at least two bins");
  SeqBatch out;
  out.seq_axis = x.seq_axis;
  out.data = Tensor({B, S, F + 1});
  std::int64_t o = 0, in = 0;
  for (int i = 0; i < B; ++i)
    for (int j = 0; j < S; ++j) {
      for (int k = 0; k < F; ++k) out.data[o++] = d[in++];
      const int bin = mode == NetMode::T ? i : j;
      out.data[o++] = static_cast<double>(bin) / (bins - 1);
    }
  return out;
}

std::vector<std::string> NetParams::tensor_names(const NetSpec& spec) {
  std::vector<std::string> names;
  for (int layer = 1; layer <= 2; ++layer) {
    const std::string base = "l" + std::to_string(layer);
    names.push_back(base + ".fwd.wx");
    names.push_back(base + ".fwd.wh");
    names.push_back(base + ".fwd.b");
    if (spec.bidirectional) {
      names.push_back(base + ".bwd.wx");
      names.push_back(base + ".bwd.wh");
      names.push_back(base + ".bwd.b");
    }
  }
  names.push_back("ff.w");
  names.push_back("ff.b");
  return names;
}

std::vector<std::vector<int>> NetParams::tensor_shapes(const NetSpec& spec) {
  spec.validate();
  std::vector<std::vector<int>> shapes;
  const int in1 = spec.input_features();
  const int in2 = spec.l1_out();
  const int dirs = spec.bidirectional ? 2 : 1;
  for (int layer = 1; layer <= 2; ++layer) {
    const int in = layer == 1 ? in1 : in2;
    const int h = layer == 1 ? spec.hidden1 : spec.hidden2;
    for (int d = 0; d < dirs; ++d) {
      shapes.push_back({in, 4 * h});
      shapes.push_back({h, 4 * h});
      shapes.push_back({4 * h});
    }
  }
  shapes.push_back({spec.l2_out(), spec.ff_out()});
  shapes.push_back({spec.ff_out()});
  return shapes;
}

NetParams NetParams::init(const NetSpec& spec, Rng& rng) {
  spec.validate();
  NetParams params;
  params.spec = spec;
  const auto names = tensor_names(spec);
  const auto shapes = tensor_shapes(spec);
  for (std::size_t i = 0; i < names.size(); ++i) {
    int h;  // fan used for the init scale
    if (names[i].rfind("l1.", 0) == 0) {
      h = spec.hidden1;
    } else if (names[i].rfind("l2.", 0) == 0) {
      h = spec.hidden2;
    } else {
      h = spec.l2_out();
    }
    const double scale = 1.0 / std::sqrt(static_cast<double>(h));
    Tensor t(shapes[i]);
    for (auto& v : t.data) v = rng.uniform(-scale, scale);
    const bool lstm_bias = names[i] != "ff.b" &&
                           names[i].substr(names[i].size() - 2) == ".b";
    if (lstm_bias) {
      const int gates = t.dim(0);  // (4H); forget gates live in [H, 2H)
      for (int g = gates / 4; g < gates / 2; ++g) t.data[g] += 1.0;
    }
    params.tensors.push_back(std::move(t));
  }
  return params;
}

namespace {

void put_u32(std::ofstream& os, std::uint32_t v) {
  char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
               static_cast<char>((v >> 16) & 0xff),
               static_cast<char>((v >> 24) & 0xff)};
  os.write(b, 4);
}

std::uint32_t get_u32(std::ifstream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  require(is.good(), "checkpoint: truncated file");
  return static_cast<std::uint32_t>(b[0]) |
         (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

constexpr char kMagic[9] = "MCSECKP1";

}  // namespace

void save_checkpoint(const std::string& path, const NetParams& params) {
  params.spec.validate();
  const auto names = NetParams::tensor_names(params.spec);
  const auto shapes = NetParams::tensor_shapes(params.spec);
  require(params.tensors.size() == names.size(),
          "save_checkpoint: parameter count mismatch");
  json header;
  header["format_version"] = 1;
  header["netspec"] = json::parse(netspec_to_json_string(params.spec));
  auto& tensors = header["tensors"];
  tensors = json::array();
  for (std::size_t i = 0; i < names.size(); ++i) {
    require(params.tensors[i].shape == shapes[i],
            "save_checkpoint: tensor " + names[i] + " has a wrong shape");
    require(params.tensors[i].all_finite(),
            "save_checkpoint: tensor " + names[i] + " is not finite");
    tensors.push_back({{"name", names[i]}, {"shape", shapes[i]}});
  }
  const std::string head = header.dump();

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  require(os.good(), "save_checkpoint: cannot open " + path);
  os.write(kMagic, 8);
  put_u32(os, static_cast<std::uint32_t>(head.size()));
  os.write(head.data(), static_cast<std::streamsize>(head.size()));
  for (const auto& t : params.tensors) {
    for (double v : t.data) {
      const float f = static_cast<float>(v);
      std::uint32_t u;
      std::memcpy(&u, &f, 4);
      put_u32(os, u);
    }
  }
  require(os.good(), "save_checkpoint: write failed for " + path);
}

NetParams load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  require(is.good(), "load_checkpoint: cannot open " + path);
  char magic[8];
  is.read(magic, 8);
  require(is.good() && std::memcmp(magic, kMagic, 8) == 0,
          "load_checkpoint: bad magic in " + path);
  const std::uint32_t head_len = get_u32(is);
  std::string head(head_len, '\0');
  is.read(head.data(), head_len);
  require(is.good(), "load_checkpoint: truncated header in " + path);

  json header;
  try {
    header = json::parse(head);
  } catch (const json::exception& e) {
    fail("load_checkpoint: invalid header JSON: " + std::string(e.what()));
  }
  require(header.value("format_version", 0) == 1,
          "load_checkpoint: unsupported format version");
  NetParams params;
  params.spec = netspec_from_json_string(header.at("netspec").dump());
  const auto names = NetParams::tensor_names(params.spec);
  const auto shapes = NetParams::tensor_shapes(params.spec);
  const auto& tensors = header.at("tensors");
  require(tensors.is_array() && tensors.size() == names.size(),
          "load_checkpoint: tensor list mismatch");
  for (std::size_t i = 0; i < names.size(); ++i) {
    require(tensors[i].at("name").get<std::string>() == names[i],
            "load_checkpoint: unexpected tensor order");
    require(tensors[i].at("shape").get<std::vector<int>>() == shapes[i],
            "load_checkpoint: tensor " + names[i] + " has a wrong shape");
    Tensor t(shapes[i]);
    for (auto& v : t.data) {
      const std::uint32_t u = get_u32(is);
      float f;
      std::memcpy(&f, &u, 4);
      v = static_cast<double>(f);
    }
    require(t.all_finite(), "load_checkpoint: tensor " + names[i] +
                                " is not finite");
    params.tensors.push_back(std::move(t));
  }
  return params;
}

NsfPerms draw_nsf_perms(const NetSpec& spec, int frames, Rng& rng) {
  spec.validate();
  NsfPerms perms;
  if (!spec.nsf) return perms;
  auto draw = [&rng](int n) {
    const auto p = rng.permutation(static_cast<std::size_t>(n));
    return std::vector<int>(p.begin(), p.end());
  };
  switch (spec.mode) {
    case NetMode::T: perms.l1 = draw(frames); break;
    case NetMode::F: perms.l1 = draw(spec.bins); break;
    case NetMode::FT:
      perms.l1 = draw(spec.bins);
      perms.l2 = draw(frames);
      break;
    case NetMode::PF: fail("draw_nsf_perms: PF has no NSF variant");
  }
  return perms;
}

MaskNodes forward(Tape& tape, const std::vector<Tape::NodeId>& param_ids,
                  const NetSpec& spec, const Spectrogram& input,
                  const NsfPerms& perms) {
  spec.validate();
  const int expected_c = spec.mode == NetMode::PF ? 1 : spec.channels;
  require(input.channels == expected_c, "forward: channel-count mismatch");
  require(input.bins == spec.bins, "forward: bin-count mismatch");
  require(param_ids.size() == NetParams::tensor_names(spec).size(),
          "forward: parameter count mismatch");
  const int F = spec.bins, T = input.frames;
  require(T >= 1, "forward: empty spectrogram");

  if (spec.nsf) {
    const int l1_len = spec.mode == NetMode::T ? T : F;
    check_permutation(perms.l1, l1_len, "forward: layer-1 permutation");
    if (spec.mode == NetMode::FT)
      check_permutation(perms.l2, T, "forward: layer-2 permutation");
    else
      require(perms.l2.empty(), "forward: unexpected layer-2 permutation");
  } else {
    require(perms.l1.empty() && perms.l2.empty(),
            "forward: permutations supplied for a non-NSF network");
  }

  const NetMode arr_mode = spec.mode == NetMode::FT ? NetMode::F : spec.mode;
  SeqBatch sb = arrange(input, arr_mode);
  if (spec.augmented()) sb = freq_index_augment(sb, arr_mode);
  Tape::NodeId x = tape.input(std::move(sb.data));

  std::size_t next = 0;
  auto take = [&] { return param_ids[next++]; };
  auto lstm_layer = [&](Tape::NodeId in) {
    const Tape::NodeId wx = take(), wh = take(), b = take();
    const Tape::NodeId fwd = tape.lstm(in, wx, wh, b, false);
    if (!spec.bidirectional) return fwd;
    const Tape::NodeId wxr = take(), whr = take(), br = take();
    const Tape::NodeId bwd = tape.lstm(in, wxr, whr, br, true);
    return tape.concat_last(fwd, bwd);
  };

  if (spec.mode == NetMode::FT) {
    if (spec.nsf) x = tape_shuffle(tape, x, perms.l1, false);
    x = lstm_layer(x);
    if (spec.nsf) x = tape_shuffle(tape, x, perms.l1, true);
    x = tape_transpose01(tape, x);
    if (spec.nsf) x = tape_shuffle(tape, x, perms.l2, false);
    x = lstm_layer(x);
    if (spec.nsf) x = tape_shuffle(tape, x, perms.l2, true);
  } else {
    if (spec.nsf) x = tape_shuffle(tape, x, perms.l1, false);
    x = lstm_layer(x);
    x = lstm_layer(x);
    if (spec.nsf) x = tape_shuffle(tape, x, perms.l1, true);
  }

  const Tape::NodeId ff_w = take(), ff_b = take();
  require(next == param_ids.size(), "forward: parameter order mismatch");
  x = tape.tanh(tape.bias_add(tape.matmul(x, ff_w), ff_b));

  // Assemble the (F, T) compressed mask from the head output.
  const std::int64_t n = static_cast<std::int64_t>(F) * T;
  std::vector<std::int64_t> re_map(static_cast<std::size_t>(n));
  std::vector<std::int64_t> im_map(static_cast<std::size_t>(n));
  for (int f = 0; f < F; ++f)
    for (int t = 0; t < T; ++t) {
      const std::size_t o = static_cast<std::size_t>(f) * T + t;
      std::int64_t base = 0;
      switch (spec.mode) {
        case NetMode::T:
        case NetMode::FT:
          base = (static_cast<std::int64_t>(f) * T + t) * 2;
          break;
        case NetMode::F:
          base = (static_cast<std::int64_t>(t) * F + f) * 2;
          break;
        case NetMode::PF:
          base = static_cast<std::int64_t>(t) * (2 * F) + 2 * f;
          break;
      }
      re_map[o] = base;
      im_map[o] = base + 1;
    }
  MaskNodes out;
  out.re = tape.gather(x, std::move(re_map), {F, T});
  out.im = tape.gather(x, std::move(im_map), {F, T});
  return out;
}

ComplexMask infer_mask(const NetParams& params, const Spectrogram& input,
                       const NsfPerms& perms) {
  Tape tape;
  std::vector<Tape::NodeId> ids;
  ids.reserve(params.tensors.size());
  for (const auto& t : params.tensors) ids.push_back(tape.input(t));
  const MaskNodes nodes = forward(tape, ids, params.spec, input, perms);
  const Tensor& re = tape.value(nodes.re);
  const Tensor& im = tape.value(nodes.im);
  ComplexMask mask;
  mask.bins = input.bins;
  mask.frames = input.frames;
  mask.compressed = true;
  mask.data.resize(static_cast<std::size_t>(mask.bins) * mask.frames);
  for (std::int64_t i = 0; i < re.numel(); ++i)
    mask.data[static_cast<std::size_t>(i)] = cdouble(re[i], im[i]);
  return mask;
}

}  // namespace mcse
