#pragma once

#include <complex>
#include <cstddef>
#include <vector>

namespace metrol::detail {

/// Moments of s^{-1/2} on [m, m+1] against the two linear hat functions:
/// near = int (m + 1 - s) s^{-1/2} ds, far = int (s - m) s^{-1/2} ds.
/// Written in a cancellation-free form so they stay accurate for large m.
struct HatMoments {
    double near;
    double far;
};

HatMoments hat_moments(std::size_t m) noexcept;

/// Same moments with the oscillatory factor exp(i theta s) included in the weight,
/// by 20-point Gauss-Legendre (after s = u^2 on the singular first interval).
struct OscillatoryHatMoments {
    std::complex<double> near;
    std::complex<double> far;
};

OscillatoryHatMoments hat_moments(std::size_t m, double theta);

/// Weights w_m, m = 0..n, with int_0^n s^{-1/2} g(s) ds = sum_m w_m g(m) exactly
/// for g piecewise linear between the integers.
std::vector<double> product_weights(std::size_t n);

}  // namespace metrol::detail
