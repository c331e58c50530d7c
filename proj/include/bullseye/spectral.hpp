#pragma once

#include <complex>
#include <span>
#include <vector>

// Thin FFTW wrappers. Planning is serialized internally; execution is
// reentrant.
namespace bullseye::spectral {

std::size_t next_pow2(std::size_t n);

/// Real-to-complex transform of `x` zero-padded to `nfft`; returns nfft/2 + 1 bins.
std::vector<std::complex<double>> rfft(std::span<const double> x, std::size_t nfft);

/// Complex transform, forward (sign -1) or inverse (sign +1, unnormalized).
std::vector<std::complex<double>> cfft(std::span<const std::complex<double>> x, int sign);

/// Median of a copy of `v`.
double median(std::vector<double> v);

}  // namespace bullseye::spectral
