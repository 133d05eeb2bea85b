#include "metrol/faddeeva.hpp"

#include <array>
#include <cmath>
#include <numbers>

namespace metrol {
namespace {

constexpr int kTerms = 40;

struct WeidemanTable {
    std::array<double, kTerms> coeff{};
    double scale = 0.0;

    WeidemanTable() {
        constexpr int m = 2 * kTerms;
        scale = std::sqrt(kTerms / std::numbers::sqrt2);
        for (int n = 1; n <= kTerms; ++n) {
            double sum = 0.0;
            for (int k = -m + 1; k < m; ++k) {
                const double theta = k * std::numbers::pi / m;
                const double t = scale * std::tan(theta / 2.0);
                sum += std::exp(-t * t) * (scale * scale + t * t) * std::cos(n * theta);
            }
            coeff[n - 1] = sum / (2.0 * m);
        }
    }
};

const WeidemanTable& table() {
    static const WeidemanTable t;
    return t;
}

std::complex<double> w_upper(std::complex<double> z) {
    const auto& tab = table();
    const std::complex<double> iz{-z.imag(), z.real()};
    const std::complex<double> denom = tab.scale - iz;
    const std::complex<double> zz = (tab.scale + iz) / denom;
    std::complex<double> p = tab.coeff[kTerms - 1];
    for (int n = kTerms - 2; n >= 0; --n) p = p * zz + tab.coeff[n];
    return 2.0 * p / (denom * denom) + std::numbers::inv_sqrtpi / denom;
}

}  // namespace

std::complex<double> faddeeva_w(std::complex<double> z) {
    if (z.imag() >= 0.0) return w_upper(z);
    return 2.0 * std::exp(-z * z) - w_upper(-z);
}

std::complex<double> erfcx(std::complex<double> z) {
    // erfcx(z) = w(i z)
    return faddeeva_w({-z.imag(), z.real()});
}

std::complex<double> erf(std::complex<double> z) {
    if (std::abs(z) < 0.5) {
        // Maclaurin series; the complement form cancels badly near the origin.
        const std::complex<double> z2 = z * z;
        std::complex<double> term = z;
        std::complex<double> sum = z;
        for (int n = 1; n < 30; ++n) {
            term *= -z2 / static_cast<double>(n);
            const std::complex<double> next = term / static_cast<double>(2 * n + 1);
            sum += next;
            if (std::abs(next) < 1e-17 * std::abs(sum)) break;
        }
        return 2.0 * std::numbers::inv_sqrtpi * sum;
    }
    return 1.0 - std::exp(-z * z) * erfcx(z);
}

}  // namespace metrol
