#include "mcse/numerics/tape.hpp"

#include <cmath>
#include <memory>
#include <utility>

#include "mcse/numerics/fft.hpp"
#include "mcse/numerics/gemm.hpp"

namespace mcse {

namespace {

void accum(Tensor& dst, const Tensor& src) {
  for (std::int64_t i = 0; i < dst.numel(); ++i) dst[i] += src[i];
}

}  // namespace

Tape::NodeId Tape::record(Tensor value, std::function<void(Tape&)> back) {
  require(value.all_finite(), "tape: non-finite value produced");
  nodes_.push_back(Node{std::move(value), Tensor{}, std::move(back)});
  return static_cast<NodeId>(nodes_.size() - 1);
}

Tape::NodeId Tape::input(Tensor value) {
  return record(std::move(value), nullptr);
}

Tape::NodeId Tape::matmul(NodeId x, NodeId w) {
  const Tensor& xv = value(x);
  const Tensor& wv = value(w);
  require(wv.rank() == 2, "matmul: weight must be rank 2");
  const std::int64_t k = wv.dim(0), n = wv.dim(1);
  require(xv.rank() >= 2 && xv.shape.back() == k, "matmul: inner dims differ");
  const std::int64_t m = xv.lead();

  std::vector<int> out_shape = xv.shape;
  out_shape.back() = static_cast<int>(n);
  Tensor out(out_shape);
  gemm_nn(m, n, k, 1.0, xv.data.data(), wv.data.data(), 0.0, out.data.data());

  NodeId self = record(std::move(out), nullptr);
  nodes_[static_cast<std::size_t>(self)].back = [x, w, self, m, n, k](Tape& t) {
    const Tensor& g = t.grad(self);
    // dX = dY · Wᵀ, dW = Xᵀ · dY
    gemm_nt(m, k, n, 1.0, g.data.data(), t.value(w).data.data(), 1.0,
            t.grad_mut(x).data.data());
    gemm_tn(k, n, m, 1.0, t.value(x).data.data(), g.data.data(), 1.0,
            t.grad_mut(w).data.data());
  };
  return self;
}

Tape::NodeId Tape::add(NodeId a, NodeId b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  require(av.shape == bv.shape, "add: shape mismatch");
  Tensor out = av;
  accum(out, bv);
  NodeId self = record(std::move(out), nullptr);
  nodes_[static_cast<std::size_t>(self)].back = [a, b, self](Tape& t) {
    accum(t.grad_mut(a), t.grad(self));
    accum(t.grad_mut(b), t.grad(self));
  };
  return self;
}

Tape::NodeId Tape::sub(NodeId a, NodeId b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  require(av.shape == bv.shape, "sub: shape mismatch");
  Tensor out = av;
  for (std::int64_t i = 0; i < out.numel(); ++i) out[i] -= bv[i];
  NodeId self = record(std::move(out), nullptr);
  nodes_[static_cast<std::size_t>(self)].back = [a, b, self](Tape& t) {
    const Tensor& g = t.grad(self);
    accum(t.grad_mut(a), g);
    Tensor& gb = t.grad_mut(b);
    for (std::int64_t i = 0; i < gb.numel(); ++i) gb[i] -= g[i];
  };
  return self;
}

Tape::NodeId Tape::mul(NodeId a, NodeId b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  require(av.shape == bv.shape, "mul: shape mismatch");
  Tensor out = av;
  for (std::int64_t i = 0; i < out.numel(); ++i) out[i] *= bv[i];
  NodeId self = record(std::move(out), nullptr);
  nodes_[static_cast<std::size_t>(self)].back = [a, b, self](Tape& t) {
    const Tensor& g = t.grad(self);
    const Tensor& av2 = t.value(a);
    const Tensor& bv2 = t.value(b);
    Tensor& ga = t.grad_mut(a);
    Tensor& gb = t.grad_mut(b);
    for (std::int64_t i = 0; i < g.numel(); ++i) {
      ga[i] += g[i] * bv2[i];
      gb[i] += g[i] * av2[i];
    }
  };
  return self;
}

Tape::NodeId Tape::mul_const(NodeId x, Tensor c) {
  const Tensor& xv = value(x);
  require(xv.shape == c.shape, "mul_const: shape mismatch");
  Tensor out = xv;
  for (std::int64_t i = 0; i < out.numel(); ++i) out[i] *= c[i];
  auto cp = std::make_shared<Tensor>(std::move(c));
  NodeId self = record(std::move(out), nullptr);
  nodes_[static_cast<std::size_t>(self)].back = [x, self, cp](Tape& t) {
    const Tensor& g = t.grad(self);
    Tensor& gx = t.grad_mut(x);
    for (std::int64_t i = 0; i < g.numel(); ++i) gx[i] += g[i] * (*cp)[i];
  };
  return self;
}

Tape::NodeId Tape::bias_add(NodeId x, NodeId b) {
  const Tensor& xv = value(x);
  const Tensor& bv = value(b);
  require(bv.rank() == 1 && bv.dim(0) == xv.shape.back(),
          "bias_add: bias must match last dim");
  const std::int64_t m = xv.lead(), n = bv.numel();
  Tensor out = xv;
  for (std::int64_t i = 0; i < m; ++i)
    for (std::int64_t j = 0; j < n; ++j) out[i * n + j] += bv[j];
  NodeId self = record(std::move(out), nullptr);
  nodes_[static_cast<std::size_t>(self)].back = [x, b, self, m, n](Tape& t) {
    const Tensor& g = t.grad(self);
    accum(t.grad_mut(x), g);
    Tensor& gb = t.grad_mut(b);
    for (std::int64_t i = 0; i < m; ++i)
      for (std::int64_t j = 0; j < n; ++j) gb[j] += g[i * n + j];
  };
  return self;
}

Tape::NodeId Tape::affine(NodeId x, double alpha, double beta) {
  const Tensor& xv = value(x);
  Tensor out = xv;
  for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = alpha * out[i] + beta;
  NodeId self = record(std::move(out), nullptr);
  nodes_[static_cast<std::size_t>(self)].back = [x, self, alpha](Tape& t) {
    const Tensor& g = t.grad(self);
    Tensor& gx = t.grad_mut(x);
    for (std::int64_t i = 0; i < g.numel(); ++i) gx[i] += alpha * g[i];
  };
  return self;
}

Tape::NodeId Tape::tanh(NodeId x) {
  Tensor out = value(x);
  for (auto& v : out.data) v = std::tanh(v);
  NodeId self = record(std::move(out), nullptr);
  nodes_[static_cast<std::size_t>(self)].back = [x, self](Tape& t) {
    const Tensor& g = t.grad(self);
    const Tensor& y = t.value(self);
    Tensor& gx = t.grad_mut(x);
    for (std::int64_t i = 0; i < g.numel(); ++i)
      gx[i] += g[i] * (1.0 - y[i] * y[i]);
  };
  return self;
}

Tape::NodeId Tape::sigmoid(NodeId x) {
  Tensor out = value(x);
  for (auto& v : out.data) v = 1.0 / (1.0 + std::exp(-v));
  NodeId self = record(std::move(out), nullptr);
  nodes_[static_cast<std::size_t>(self)].back = [x, self](Tape& t) {
    const Tensor& g = t.grad(self);
    const Tensor& y = t.value(self);
    Tensor& gx = t.grad_mut(x);
    for (std::int64_t i = 0; i < g.numel(); ++i)
      gx[i] += g[i] * y[i] * (1.0 - y[i]);
  };
  return self;
}

Tape::NodeId Tape::decompress(NodeId x) {
  constexpr double kLimit = 1.0 - 1e-7;
  const Tensor& xv = value(x);
  Tensor out = xv;
  for (std::int64_t i = 0; i < out.numel(); ++i) {
    double v = out[i];
    if (v > kLimit) {
      v = kLimit;
      ++clamp_count_;
    } else if (v < -kLimit) {
      v = -kLimit;
      ++clamp_count_;
    }
    out[i] = 2.0 * std::atanh(v);
  }
  NodeId self = record(std::move(out), nullptr);
  nodes_[static_cast<std::size_t>(self)].back = [x, self](Tape& t) {
    const Tensor& g = t.grad(self);
    const Tensor& xv2 = t.value(x);
    Tensor& gx = t.grad_mut(x);
    for (std::int64_t i = 0; i < g.numel(); ++i) {
      const double v = xv2[i];
      if (v > kLimit || v < -kLimit) continue;  // clamped: zero gradient
      gx[i] += g[i] * 2.0 / (1.0 - v * v);
    }
  };
  return self;
}

Tape::NodeId Tape::magnitude(NodeId re, NodeId im) {
  const Tensor& rv = value(re);
  const Tensor& iv = value(im);
  require(rv.shape == iv.shape, "magnitude: shape mismatch");
  Tensor out = rv;
  for (std::int64_t i = 0; i < out.numel(); ++i)
    out[i] = std::hypot(rv[i], iv[i]);
  NodeId self = record(std::move(out), nullptr);
  nodes_[static_cast<std::size_t>(self)].back = [re, im, self](Tape& t) {
    const Tensor& g = t.grad(self);
    const Tensor& y = t.value(self);
    const Tensor& rv2 = t.value(re);
    const Tensor& iv2 = t.value(im);
    Tensor& gr = t.grad_mut(re);
    Tensor& gi = t.grad_mut(im);
    for (std::int64_t i = 0; i < g.numel(); ++i) {
      if (y[i] == 0.0) continue;  // subgradient 0 at the origin
      gr[i] += g[i] * rv2[i] / y[i];
      gi[i] += g[i] * iv2[i] / y[i];
    }
  };
  return self;
}

Tape::NodeId Tape::gather(NodeId x, std::vector<std::int64_t> map,
                          std::vector<int> shape) {
  const Tensor& xv = value(x);
  require(static_cast<std::int64_t>(map.size()) == Tensor::numel_of(shape),
          "gather: map size does not match output shape");
  Tensor out(shape);
  for (std::size_t j = 0; j < map.size(); ++j) {
    require(map[j] >= 0 && map[j] < xv.numel(), "gather: index out of range");
    out[static_cast<std::int64_t>(j)] = xv[map[j]];
  }
  auto mp = std::make_shared<std::vector<std::int64_t>>(std::move(map));
  NodeId self = record(std::move(out), nullptr);
  nodes_[static_cast<std::size_t>(self)].back = [x, self, mp](Tape& t) {
    const Tensor& g = t.grad(self);
    Tensor& gx = t.grad_mut(x);
    for (std::size_t j = 0; j < mp->size(); ++j)
      gx[(*mp)[j]] += g[static_cast<std::int64_t>(j)];
  };
  return self;
}

Tape::NodeId Tape::concat_last(NodeId a, NodeId b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  require(av.rank() == bv.rank() && av.rank() >= 1,
          "concat_last: rank mismatch");
  for (int i = 0; i + 1 < av.rank(); ++i)
    require(av.dim(i) == bv.dim(i), "concat_last: leading dims differ");
  const std::int64_t m = av.lead();
  const std::int64_t na = av.shape.back(), nb = bv.shape.back();
  std::vector<int> shape = av.shape;
  shape.back() = static_cast<int>(na + nb);
  Tensor out(shape);
  for (std::int64_t i = 0; i < m; ++i) {
    for (std::int64_t j = 0; j < na; ++j)
      out[i * (na + nb) + j] = av[i * na + j];
    for (std::int64_t j = 0; j < nb; ++j)
      out[i * (na + nb) + na + j] = bv[i * nb + j];
  }
  NodeId self = record(std::move(out), nullptr);
  nodes_[static_cast<std::size_t>(self)].back = [a, b, self, m, na,
                                                 nb](Tape& t) {
    const Tensor& g = t.grad(self);
    Tensor& ga = t.grad_mut(a);
    Tensor& gb = t.grad_mut(b);
    for (std::int64_t i = 0; i < m; ++i) {
      for (std::int64_t j = 0; j < na; ++j)
        ga[i * na + j] += g[i * (na + nb) + j];
      for (std::int64_t j = 0; j < nb; ++j)
        gb[i * nb + j] += g[i * (na + nb) + na + j];
    }
  };
  return self;
}

namespace {

struct LstmAux {
  std::int64_t batch, seq, in_dim, hid;
  bool reverse;
  Tensor xt;     // (S, B, I) time-major input copy
  Tensor gates;  // (S, B, 4H) post-activation [i, f, g, o]
  Tensor cell;   // (S, B, H)
  Tensor htm;    // (S, B, H) time-major hidden states
};

}  // namespace

Tape::NodeId Tape::lstm(NodeId x, NodeId wx, NodeId wh, NodeId bias,
                        bool reverse) {
  const Tensor& xv = value(x);
  const Tensor& wxv = value(wx);
  const Tensor& whv = value(wh);
  const Tensor& bv = value(bias);
  require(xv.rank() == 3, "lstm: input must be (B, S, I)");
  const std::int64_t B = xv.dim(0), S = xv.dim(1), I = xv.dim(2);
  require(whv.rank() == 2 && wxv.rank() == 2, "lstm: weights must be rank 2");
  const std::int64_t H = whv.dim(0);
  require(wxv.dim(0) == I && wxv.dim(1) == 4 * H && whv.dim(1) == 4 * H &&
              bv.numel() == 4 * H,
          "lstm: weight shapes inconsistent");
  require(S >= 1, "lstm: empty sequence");

  auto aux = std::make_shared<LstmAux>();
  aux->batch = B;
  aux->seq = S;
  aux->in_dim = I;
  aux->hid = H;
  aux->reverse = reverse;
  aux->xt = Tensor({static_cast<int>(S), static_cast<int>(B),
                    static_cast<int>(I)});
  aux->gates = Tensor({static_cast<int>(S), static_cast<int>(B),
                       static_cast<int>(4 * H)});
  aux->cell = Tensor({static_cast<int>(S), static_cast<int>(B),
                      static_cast<int>(H)});
  aux->htm = Tensor({static_cast<int>(S), static_cast<int>(B),
                     static_cast<int>(H)});

  for (std::int64_t b = 0; b < B; ++b)
    for (std::int64_t t = 0; t < S; ++t)
      for (std::int64_t i = 0; i < I; ++i)
        aux->xt[(t * B + b) * I + i] = xv[(b * S + t) * I + i];

  // Input contribution for the whole sequence in one GEMM, bias folded in.
  Tensor z({static_cast<int>(S), static_cast<int>(B),
            static_cast<int>(4 * H)});
  gemm_nn(S * B, 4 * H, I, 1.0, aux->xt.data.data(), wxv.data.data(), 0.0,
          z.data.data());
  for (std::int64_t r = 0; r < S * B; ++r)
    for (std::int64_t j = 0; j < 4 * H; ++j) z[r * 4 * H + j] += bv[j];

  const std::int64_t t0 = reverse ? S - 1 : 0;
  const std::int64_t dir = reverse ? -1 : 1;
  for (std::int64_t step = 0; step < S; ++step) {
    const std::int64_t t = t0 + dir * step;
    double* zt = z.data.data() + t * B * 4 * H;
    if (step > 0) {
      const double* hprev = aux->htm.data.data() + (t - dir) * B * H;
      gemm_nn(B, 4 * H, H, 1.0, hprev, whv.data.data(), 1.0, zt);
    }
    const double* cprev =
        step > 0 ? aux->cell.data.data() + (t - dir) * B * H : nullptr;
    double* gt = aux->gates.data.data() + t * B * 4 * H;
    double* ct = aux->cell.data.data() + t * B * H;
    double* ht = aux->htm.data.data() + t * B * H;
    for (std::int64_t b = 0; b < B; ++b) {
      const double* zb = zt + b * 4 * H;
      double* gb = gt + b * 4 * H;
      for (std::int64_t j = 0; j < H; ++j) {
        const double ig = 1.0 / (1.0 + std::exp(-zb[j]));
        const double fg = 1.0 / (1.0 + std::exp(-zb[H + j]));
        const double gg = std::tanh(zb[2 * H + j]);
        const double og = 1.0 / (1.0 + std::exp(-zb[3 * H + j]));
        gb[j] = ig;
        gb[H + j] = fg;
        gb[2 * H + j] = gg;
        gb[3 * H + j] = og;
        const double cp = cprev ? cprev[b * H + j] : 0.0;
        const double c = fg * cp + ig * gg;
        ct[b * H + j] = c;
        ht[b * H + j] = og * std::tanh(c);
      }
    }
  }

  Tensor out({static_cast<int>(B), static_cast<int>(S), static_cast<int>(H)});
  for (std::int64_t b = 0; b < B; ++b)
    for (std::int64_t t = 0; t < S; ++t)
      for (std::int64_t j = 0; j < H; ++j)
        out[(b * S + t) * H + j] = aux->htm[(t * B + b) * H + j];

  NodeId self = record(std::move(out), nullptr);
  nodes_[static_cast<std::size_t>(self)].back = [x, wx, wh, bias, self,
                                                 aux](Tape& t) {
    const std::int64_t B2 = aux->batch, S2 = aux->seq, I2 = aux->in_dim,
                       H2 = aux->hid;
    const Tensor& g = t.grad(self);
    const Tensor& whv2 = t.value(wh);
    const Tensor& wxv2 = t.value(wx);

    Tensor dH({static_cast<int>(S2), static_cast<int>(B2),
               static_cast<int>(H2)});
    for (std::int64_t b = 0; b < B2; ++b)
      for (std::int64_t s = 0; s < S2; ++s)
        for (std::int64_t j = 0; j < H2; ++j)
          dH[(s * B2 + b) * H2 + j] = g[(b * S2 + s) * H2 + j];

    Tensor dZ({static_cast<int>(S2), static_cast<int>(B2),
               static_cast<int>(4 * H2)});
    std::vector<double> dc(static_cast<std::size_t>(B2 * H2), 0.0);

    const std::int64_t t0b = aux->reverse ? aux->seq - 1 : 0;
    const std::int64_t dirb = aux->reverse ? -1 : 1;
    for (std::int64_t step = S2 - 1; step >= 0; --step) {
      const std::int64_t tt = t0b + dirb * step;
      const double* gt = aux->gates.data.data() + tt * B2 * 4 * H2;
      const double* ct = aux->cell.data.data() + tt * B2 * H2;
      const double* cprev =
          step > 0 ? aux->cell.data.data() + (tt - dirb) * B2 * H2 : nullptr;
      const double* dht = dH.data.data() + tt * B2 * H2;
      double* dzt = dZ.data.data() + tt * B2 * 4 * H2;
      for (std::int64_t b = 0; b < B2; ++b) {
        const double* gb = gt + b * 4 * H2;
        double* dzb = dzt + b * 4 * H2;
        for (std::int64_t j = 0; j < H2; ++j) {
          const double ig = gb[j], fg = gb[H2 + j], gg = gb[2 * H2 + j],
                       og = gb[3 * H2 + j];
          const double tc = std::tanh(ct[b * H2 + j]);
          const double dh = dht[b * H2 + j];
          double dcv = dc[static_cast<std::size_t>(b * H2 + j)] +
                       dh * og * (1.0 - tc * tc);
          const double cp = cprev ? cprev[b * H2 + j] : 0.0;
          dzb[j] = dcv * gg * ig * (1.0 - ig);
          dzb[H2 + j] = dcv * cp * fg * (1.0 - fg);
          dzb[2 * H2 + j] = dcv * ig * (1.0 - gg * gg);
          dzb[3 * H2 + j] = dh * tc * og * (1.0 - og);
          dc[static_cast<std::size_t>(b * H2 + j)] = dcv * fg;
        }
      }
      if (step > 0) {
        // dh_{t-1} += dz_t · Whᵀ
        gemm_nt(B2, H2, 4 * H2, 1.0, dzt, whv2.data.data(), 1.0,
                dH.data.data() + (tt - dirb) * B2 * H2);
      }
    }

    // dWx = Xᵀ dZ over the whole sequence.
    gemm_tn(I2, 4 * H2, S2 * B2, 1.0, aux->xt.data.data(), dZ.data.data(),
            1.0, t.grad_mut(wx).data.data());
    // dWh pairs h_{t-1} with dz_t; boundary step has zero h and drops out.
    if (S2 > 1) {
      if (!aux->reverse) {
        gemm_tn(H2, 4 * H2, (S2 - 1) * B2, 1.0, aux->htm.data.data(),
                dZ.data.data() + B2 * 4 * H2, 1.0,
                t.grad_mut(wh).data.data());
      } else {
        gemm_tn(H2, 4 * H2, (S2 - 1) * B2, 1.0,
                aux->htm.data.data() + B2 * H2, dZ.data.data(), 1.0,
                t.grad_mut(wh).data.data());
      }
    }
    Tensor& gb2 = t.grad_mut(bias);
    for (std::int64_t r = 0; r < S2 * B2; ++r)
      for (std::int64_t j = 0; j < 4 * H2; ++j)
        gb2[j] += dZ[r * 4 * H2 + j];

    // dX = dZ · Wxᵀ, back to (B, S, I) layout.
    Tensor dXt({static_cast<int>(S2), static_cast<int>(B2),
                static_cast<int>(I2)});
    gemm_nt(S2 * B2, I2, 4 * H2, 1.0, dZ.data.data(), wxv2.data.data(), 0.0,
            dXt.data.data());
    Tensor& gx = t.grad_mut(x);
    for (std::int64_t b = 0; b < B2; ++b)
      for (std::int64_t s = 0; s < S2; ++s)
        for (std::int64_t i = 0; i < I2; ++i)
          gx[(b * S2 + s) * I2 + i] += dXt[(s * B2 + b) * I2 + i];
  };
  return self;
}

Tape::NodeId Tape::istft(NodeId re, NodeId im, std::vector<double> window,
                         int hop) {
  const Tensor& rv = value(re);
  const Tensor& iv = value(im);
  require(rv.rank() == 2 && rv.shape == iv.shape, "istft: want (F, T) pairs");
  const int L = static_cast<int>(window.size());
  const int F = rv.dim(0), T = rv.dim(1);
  require(F == L / 2 + 1, "istft: bin count does not match window");
  require(hop > 0, "istft: hop must be positive");

  const std::int64_t n = static_cast<std::int64_t>(hop) * (T - 1) + L;
  Tensor out({static_cast<int>(n)});
  std::vector<cdouble> spec(static_cast<std::size_t>(F));
  for (int t = 0; t < T; ++t) {
    for (int f = 0; f < F; ++f)
      spec[static_cast<std::size_t>(f)] =
          cdouble(rv[static_cast<std::int64_t>(f) * T + t],
                  iv[static_cast<std::int64_t>(f) * T + t]);
    std::vector<double> frame = irfft(spec.data(), L);
    const std::int64_t base = static_cast<std::int64_t>(t) * hop;
    for (int j = 0; j < L; ++j)
      out[base + j] += window[static_cast<std::size_t>(j)] *
                       frame[static_cast<std::size_t>(j)];
  }

  auto win = std::make_shared<std::vector<double>>(std::move(window));
  NodeId self = record(std::move(out), nullptr);
  nodes_[static_cast<std::size_t>(self)].back = [re, im, self, win, hop, F,
                                                 T](Tape& t) {
    const int L2 = static_cast<int>(win->size());
    const Tensor& g = t.grad(self);
    Tensor& gr = t.grad_mut(re);
    Tensor& gi = t.grad_mut(im);
    std::vector<double> seg(static_cast<std::size_t>(L2));
    for (int tt = 0; tt < T; ++tt) {
      const std::int64_t base = static_cast<std::int64_t>(tt) * hop;
      for (int j = 0; j < L2; ++j)
        seg[static_cast<std::size_t>(j)] =
            g[base + j] * (*win)[static_cast<std::size_t>(j)];
      std::vector<cdouble> spec2 = rfft(seg.data(), L2);
      for (int f = 0; f < F; ++f) {
        const bool edge = (f == 0 || f == F - 1);
        const double wre = edge ? 1.0 / L2 : 2.0 / L2;
        gr[static_cast<std::int64_t>(f) * T + tt] +=
            wre * spec2[static_cast<std::size_t>(f)].real();
        if (!edge)
          gi[static_cast<std::int64_t>(f) * T + tt] +=
              (2.0 / L2) * spec2[static_cast<std::size_t>(f)].imag();
      }
    }
  };
  return self;
}

Tape::NodeId Tape::l1_to_const(NodeId x, Tensor target) {
  const Tensor& xv = value(x);
  require(xv.shape == target.shape, "l1_to_const: shape mismatch");
  double s = 0.0;
  for (std::int64_t i = 0; i < xv.numel(); ++i)
    s += std::abs(xv[i] - target[i]);
  auto tp = std::make_shared<Tensor>(std::move(target));
  NodeId self = record(scalar_tensor(s), nullptr);
  nodes_[static_cast<std::size_t>(self)].back = [x, self, tp](Tape& t) {
    const double g = t.grad(self)[0];
    const Tensor& xv2 = t.value(x);
    Tensor& gx = t.grad_mut(x);
    for (std::int64_t i = 0; i < xv2.numel(); ++i) {
      const double d = xv2[i] - (*tp)[i];
      if (d > 0.0)
        gx[i] += g;
      else if (d < 0.0)
        gx[i] -= g;
      // subgradient 0 at d == 0
    }
  };
  return self;
}

Tape::NodeId Tape::weighted_sum(std::vector<NodeId> xs,
                                std::vector<double> ws) {
  require(xs.size() == ws.size() && !xs.empty(),
          "weighted_sum: mismatched terms");
  double s = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    require(value(xs[i]).numel() == 1, "weighted_sum: terms must be scalar");
    s += ws[i] * value(xs[i])[0];
  }
  auto xsp = std::make_shared<std::vector<NodeId>>(std::move(xs));
  auto wsp = std::make_shared<std::vector<double>>(std::move(ws));
  NodeId self = record(scalar_tensor(s), nullptr);
  nodes_[static_cast<std::size_t>(self)].back = [xsp, wsp, self](Tape& t) {
    const double g = t.grad(self)[0];
    for (std::size_t i = 0; i < xsp->size(); ++i)
      t.grad_mut((*xsp)[i])[0] += g * (*wsp)[i];
  };
  return self;
}

void Tape::backward(NodeId loss) {
  require(loss >= 0 && static_cast<std::size_t>(loss) < nodes_.size(),
          "backward: bad node id");
  require(value(loss).numel() == 1, "backward: loss must be scalar");
  for (auto& n : nodes_) n.grad = Tensor(n.value.shape);
  grad_mut(loss)[0] = 1.0;
  for (std::size_t i = nodes_.size(); i-- > 0;)
    if (nodes_[i].back) nodes_[i].back(*this);
}

}  // namespace mcse
