#pragma once

#include <complex>

namespace metrol {

/// Faddeeva function w(z) = exp(-z^2) erfc(-i z), valid on the whole complex plane.
///
/// Upper half-plane values come from Weideman's rational expansion (N = 40
/// terms, relative error below 1e-12); the lower half-plane uses the
/// reflection w(z) = 2 exp(-z^2) - w(-z).
std::complex<double> faddeeva_w(std::complex<double> z);

/// exp(z^2) erfc(z), the scaled complementary error function.
std::complex<double> erfcx(std::complex<double> z);

/// erf(z) for complex z; loses relative accuracy where erf(z) is near 1.
std::complex<double> erf(std::complex<double> z);

}  // namespace metrol
