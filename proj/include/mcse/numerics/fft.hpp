#pragma once

#include <complex>
#include <vector>

namespace mcse {

using cdouble = std::complex<double>;

// Iterative radix-2 FFT; size must be a power of two. inverse=true applies
// the 1/n scale.
void fft_inplace(std::vector<cdouble>& a, bool inverse);

// Real-input FFT returning the n/2+1 non-redundant bins.
std::vector<cdouble> rfft(const double* x, int n);

// Inverse of rfft; spec holds n/2+1 bins, output is n real samples.
std::vector<double> irfft(const cdouble* spec, int n);

}  // namespace mcse
