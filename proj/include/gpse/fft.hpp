#pragma once

#include <complex>
#include <cstddef>

namespace gpse::fft {

// One-sided real FFT: n real inputs -> n/2+1 complex bins (n even).
void rfft(const double* in, size_t n, std::complex<double>* out);

// Inverse of rfft, normalized by 1/n.
void irfft(const std::complex<double>* in, size_t n, double* out);

}  // namespace gpse::fft
