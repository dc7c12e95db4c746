#pragma once

#include <cstdint>
#include <vector>

#include "mcse/numerics/eig.hpp"
#include "mcse/stft.hpp"

namespace mcse {

// Per-(bin, frame) Hermitian C-by-C covariance matrices produced by
// recursive averaging with smoothing constant lambda.
struct CovarianceField {
  int bins = 0;
  int frames = 0;
  int channels = 0;
  double lambda = 0.95;
  std::vector<CMat> mats;  // [f * frames + t]

  CMat& at(int f, int t) {
    return mats[static_cast<std::size_t>(f) * frames + t];
  }
  const CMat& at(int f, int t) const {
    return mats[static_cast<std::size_t>(f) * frames + t];
  }
};

// Per-(bin, frame) complex C-vectors (steering vectors or filter weights).
struct VecField {
  int bins = 0;
  int frames = 0;
  int channels = 0;
  std::vector<CVec> vecs;

  CVec& at(int f, int t) {
    return vecs[static_cast<std::size_t>(f) * frames + t];
  }
  const CVec& at(int f, int t) const {
    return vecs[static_cast<std::size_t>(f) * frames + t];
  }
};

// Unit-norm steering vectors, phase-anchored to channel 0. Entries whose
// generalized eigenvalue spectrum has no usable gap are flagged degenerate
// (the returned vector is still deterministic).
struct SteeringField : VecField {
  std::vector<std::uint8_t> degenerate;
};

// Phi(k,0) = Y(k,0)Y(k,0)^H; Phi(k,i) = lambda*Phi(k,i-1) + (1-lambda)*YY^H.
CovarianceField recursive_cov(const Spectrogram& spec, double lambda);

// d(k,i) = normalize(Phi_S(k,i) · gevd_principal(Phi_S(k,i), Phi_V(k,i))).
// A failed Cholesky on Phi_V is retried once with diagonal loading, then the
// error is rethrown naming the (k,i) location. multiply_noise_cov switches
// the final multiplication to Phi_V (the other common convention); for
// exactly rank-1 speech covariances both agree.
SteeringField estimate_steering(const CovarianceField& phi_s,
                                const CovarianceField& phi_v,
                                bool multiply_noise_cov = false);

// h = Phi_V^{-1} d / (d^H Phi_V^{-1} d); distortionless h^H d = 1 exactly.
CVec mvdr_weights(const CMat& phi_v, const CVec& d);
VecField mvdr_field(const CovarianceField& phi_v, const SteeringField& d);

// h = d / (d^H d).
CVec delay_and_sum_weights(const CVec& d);
VecField delay_and_sum_field(const SteeringField& d);

// Filter-and-sum: out(k,i) = h(k,i)^H Y(k,i); single-channel result.
Spectrogram apply_filter(const VecField& h, const Spectrogram& spec);

}  // namespace mcse
