#include <doctest.h>

#include <array>
#include <complex>

#include "metrol/faddeeva.hpp"

using cplx = std::complex<double>;

namespace {

struct Reference {
    cplx z;
    cplx w;
};

// w(z) = exp(-z^2) erfc(-i z) from tests/oracles/reference_values.py (mpmath, 40 digits).
constexpr std::array<Reference, 12> kReference{{
    {{0.5, 0.5}, {0.53315670791217491, 0.23048823138445841}},
    {{2.0, 1.0}, {0.14023958136627794, 0.2222134401798991}},
    {{-3.0, 0.1}, {0.0079426809987699907, -0.20074234309867737}},
    {{10.0, 10.0}, {0.028279467454232457, 0.028138433276336896}},
    {{0.01, 0.01}, {0.98871769295495463, 0.011085296057477265}},
    {{5.0, -0.2}, {-0.0048070373479948166, 0.11504012015742785}},
    {{-1.0, -1.0}, {-1.1370378783511974, -2.026813791854195}},
    {{0.0, 0.0}, {1.0, 0.0}},
    {{30.0, 0.5}, {0.00031387498369284792, 0.01881154486772567}},
    {{0.0, 0.001}, {0.99887262008115141, 0.0}},
    {{0.2, -3.0}, {5641.9909278591882, 14512.525744675553}},
    {{6.0, 0.001}, {1.6375340027605325e-5, 0.095396206113276621}},
}};

}  // namespace

TEST_CASE("faddeeva matches high-precision reference values") {
    for (const auto& r : kReference) {
        CAPTURE(r.z);
        const cplx w = metrol::faddeeva_w(r.z);
        CHECK(std::abs(w - r.w) <= 1e-12 * std::abs(r.w) + 1e-15);
    }
}

TEST_CASE("faddeeva symmetries") {
    for (const cplx z : {cplx{0.3, 0.7}, cplx{-4.0, 2.0}, cplx{1.5, -0.4}}) {
        CAPTURE(z);
        // w(-conj z) = conj w(z)
        CHECK(std::abs(metrol::faddeeva_w(-std::conj(z)) - std::conj(metrol::faddeeva_w(z))) < 1e-13 * std::abs(metrol::faddeeva_w(z)));
        // w(z) + w(-z) = 2 exp(-z^2)
        CHECK(std::abs(metrol::faddeeva_w(z) + metrol::faddeeva_w(-z) - 2.0 * std::exp(-z * z)) <
              1e-12 * std::abs(std::exp(-z * z)) + 1e-14);
    }
}

TEST_CASE("erf and erfcx agree with the real-axis library functions") {
    for (const double x : {-2.5, -0.3, 0.0, 0.1, 0.49, 0.51, 1.0, 3.0}) {
        CAPTURE(x);
        CHECK(metrol::erf(cplx{x, 0.0}).real() == doctest::Approx(std::erf(x)).epsilon(1e-13));
        CHECK(std::abs(metrol::erf(cplx{x, 0.0}).imag()) < 1e-15);
        CHECK(metrol::erfcx(cplx{x, 0.0}).real() == doctest::Approx(std::exp(x * x) * std::erfc(x)).epsilon(1e-12));
    }
}
