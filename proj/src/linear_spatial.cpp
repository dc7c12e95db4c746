#include "mcse/linear_spatial.hpp"

#include <cmath>
#include <string>

#include "mcse/common.hpp"

namespace mcse {

namespace {

std::string loc(int f, int t) {
  return " at (k=" + std::to_string(f) + ", i=" + std::to_string(t) + ")";
}

}  // namespace

CovarianceField recursive_cov(const Spectrogram& spec, double lambda) {
  require(lambda > 0.0 && lambda < 1.0, "recursive_cov: lambda must be in (0,1)");
  const int C = spec.channels, F = spec.bins, T = spec.frames;
  CovarianceField field;
  field.bins = F;
  field.frames = T;
  field.channels = C;
  field.lambda = lambda;
  field.mats.assign(static_cast<std::size_t>(F) * T, CMat(C, C));

  CVec y(static_cast<std::size_t>(C));
  for (int f = 0; f < F; ++f) {
    for (int t = 0; t < T; ++t) {
      for (int c = 0; c < C; ++c) y[static_cast<std::size_t>(c)] = spec.at(c, f, t);
      CMat yy = outer(y);
      CMat& phi = field.at(f, t);
      if (t == 0) {
        phi = yy;
      } else {
        phi = field.at(f, t - 1);
        phi *= lambda;
        yy *= (1.0 - lambda);
        phi += yy;
      }
    }
  }
  return field;
}

SteeringField estimate_steering(const CovarianceField& phi_s,
                                const CovarianceField& phi_v,
                                bool multiply_noise_cov) {
  require(phi_s.bins == phi_v.bins && phi_s.frames == phi_v.frames &&
              phi_s.channels == phi_v.channels,
          "estimate_steering: field shapes differ");
  const int C = phi_s.channels, F = phi_s.bins, T = phi_s.frames;
  SteeringField field;
  field.bins = F;
  field.frames = T;
  field.channels = C;
  field.vecs.assign(static_cast<std::size_t>(F) * T, CVec());
  field.degenerate.assign(static_cast<std::size_t>(F) * T, 0);

  for (int f = 0; f < F; ++f) {
    for (int t = 0; t < T; ++t) {
      const CMat& s = phi_s.at(f, t);
      const CMat& v = phi_v.at(f, t);
      double gap = 0.0;
      CVec w;
      try {
        w = gevd_principal(s, v, &gap);
      } catch (const Error&) {
        try {
          w = gevd_principal(s, diag_loaded(v), &gap);
        } catch (const Error& e2) {
          fail(std::string(e2.what()) + loc(f, t));
        }
      }
      CVec d = multiply_noise_cov ? v * w : s * w;
      const double nrm = vec_norm(d);
      bool degenerate = gap < 1e-9;
      if (nrm < 1e-300) {
        // Phi_S annihilates the principal direction (e.g. all-zero speech);
        // keep a deterministic unit vector and flag it.
        d.assign(static_cast<std::size_t>(C), 0.0);
        d[0] = 1.0;
        degenerate = true;
      } else {
        for (auto& z : d) z /= nrm;
        // Phase anchor on channel 0; fall back to the first usable entry.
        for (std::size_t c = 0; c < d.size(); ++c) {
          const double mag = std::abs(d[c]);
          if (mag > 1e-12) {
            const cdouble rot = std::conj(d[c]) / mag;
            for (auto& z : d) z *= rot;
            break;
          }
        }
      }
      field.at(f, t) = std::move(d);
      field.degenerate[static_cast<std::size_t>(f) * T + t] =
          degenerate ? 1 : 0;
    }
  }
  return field;
}

CVec mvdr_weights(const CMat& phi_v, const CVec& d) {
  require(vec_norm(d) > 0.0, "mvdr_weights: zero steering vector");
  CVec x;
  try {
    x = solve_hpd(phi_v, d);
  } catch (const Error&) {
    x = solve_hpd(diag_loaded(phi_v), d);
  }
  const cdouble denom = dot(d, x);
  require(std::abs(denom) > 0.0, "mvdr_weights: degenerate denominator");
  CVec h = x;
  for (auto& z : h) z /= denom;
  return h;
}

VecField mvdr_field(const CovarianceField& phi_v, const SteeringField& d) {
  require(phi_v.bins == d.bins && phi_v.frames == d.frames &&
              phi_v.channels == d.channels,
          "mvdr_field: field shapes differ");
  VecField h;
  h.bins = d.bins;
  h.frames = d.frames;
  h.channels = d.channels;
  h.vecs.resize(d.vecs.size());
  for (int f = 0; f < d.bins; ++f)
    for (int t = 0; t < d.frames; ++t) {
      try {
        h.at(f, t) = mvdr_weights(phi_v.at(f, t), d.at(f, t));
      } catch (const Error& e) {
        fail(std::string(e.what()) + loc(f, t));
      }
    }
  return h;
}

CVec delay_and_sum_weights(const CVec& d) {
  const double nrm = vec_norm(d);
  require(nrm > 0.0, "delay_and_sum_weights: zero steering vector");
  CVec h = d;
  for (auto& z : h) z /= nrm * nrm;
  return h;
}

VecField delay_and_sum_field(const SteeringField& d) {
  VecField h;
  h.bins = d.bins;
  h.frames = d.frames;
  h.channels = d.channels;
  h.vecs.resize(d.vecs.size());
  for (std::size_t i = 0; i < d.vecs.size(); ++i)
    h.vecs[i] = delay_and_sum_weights(d.vecs[i]);
  return h;
}

Spectrogram apply_filter(const VecField& h, const Spectrogram& spec) {
  require(h.bins == spec.bins && h.frames == spec.frames &&
              h.channels == spec.channels,
          "apply_filter: shape mismatch");
  Spectrogram out;
  out.params = spec.params;
  out.channels = 1;
  out.bins = spec.bins;
  out.frames = spec.frames;
  out.data.assign(static_cast<std::size_t>(spec.bins) * spec.frames, 0.0);
  for (int f = 0; f < spec.bins; ++f)
    for (int t = 0; t < spec.frames; ++t) {
      const CVec& w = h.at(f, t);
      cdouble acc = 0.0;
      for (int c = 0; c < spec.channels; ++c)
        acc += std::conj(w[static_cast<std::size_t>(c)]) * spec.at(c, f, t);
      out.at(0, f, t) = acc;
    }
  return out;
}

}  // namespace mcse
