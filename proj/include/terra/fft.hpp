#pragma once

#include <complex>
#include <span>
#include <vector>

namespace terra::detail {

/// Real-to-complex FFT; out holds n/2 + 1 bins. Thread-safe.
void real_fft(std::span<const double> in, std::complex<double>* out);

/// Inverse of real_fft including the 1/n scale; spec holds n/2 + 1 bins.
void real_ifft(std::span<const std::complex<double>> spec, std::vector<double>& out, int n);

}  // namespace terra::detail
