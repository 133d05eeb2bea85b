#include <doctest.h>

#include <cmath>
#include <complex>
#include <numbers>

#include "metrol/detail/product_weights.hpp"
#include "metrol/errors.hpp"
#include "metrol/spectral_models.hpp"

using namespace metrol;
using cplx = std::complex<double>;

// Reference numbers below come from tests/oracles/reference_values.py, which
// recomputes each quantity from its defining integral with mpmath.

namespace {
const double kBeta80 = pbg_beta(80.0, 100.0);
const SpectralModel kModel = SpectralModel::photonic_band_gap(100.0, kBeta80);
}  // namespace

TEST_CASE("pbg_beta") {
    CHECK(kBeta80 == doctest::Approx(7.2781319795401494).epsilon(1e-14));
    CHECK(kBeta80 == doctest::Approx(7.277).epsilon(2e-4));
    CHECK(pbg_beta(100.0, 100.0) == doctest::Approx(100.0 * std::pow(std::numbers::pi / 200.0, 2.0 / 3.0)).epsilon(1e-15));
    CHECK_THROWS_AS(pbg_beta(0.0, 100.0), DomainError);
    CHECK_THROWS_AS(pbg_beta(80.0, -1.0), DomainError);
}

TEST_CASE("model construction validates its parameters") {
    CHECK_THROWS_AS(SpectralModel::photonic_band_gap(0.0, 1.0), DomainError);
    CHECK_THROWS_AS(SpectralModel::photonic_band_gap(100.0, 0.0), DomainError);
    CHECK_THROWS_AS(SpectralModel::flat_markovian(-1.0), DomainError);
    const auto flat = SpectralModel::flat_markovian(1.0, 0.2);
    CHECK(flat.is_markovian());
    CHECK_THROWS_AS((void)flat.band_gap(), std::invalid_argument);
    CHECK(kModel.is_band_gap());
}

TEST_CASE("spectral density vanishes inside the gap") {
    CHECK(spectral_density(kModel, 99.0) == 0.0);
    CHECK(spectral_density(kModel, 100.0) == 0.0);
    CHECK(spectral_density(kModel, 101.0) == doctest::Approx(std::pow(kBeta80, 1.5) / std::numbers::pi));
    CHECK(band_edge(kModel) == 100.0);
}

TEST_CASE("correlation kernel against quadrature of its defining integral") {
    const cplx f1 = correlation_kernel(kModel, 1.0);
    CHECK(std::abs(f1 - cplx{10.721197813536257, -2.788257605365163}) < 1e-12 * std::abs(f1));
    CHECK(std::abs(f1) == doctest::Approx(11.08).epsilon(1e-3));
    const cplx f25 = correlation_kernel(kModel, 2.5);
    CHECK(std::abs(f25 - cplx{6.0020446521030174, 3.6142558302508261}) < 1e-12 * std::abs(f25));
    // |f| falls off as tau^{-1/2}
    CHECK(std::abs(correlation_kernel(kModel, 400.0)) == doctest::Approx(std::abs(f1) / 20.0).epsilon(1e-12));
}

TEST_CASE("correlation kernel singular and markovian cases") {
    CHECK_THROWS_AS(correlation_kernel(kModel, 0.0), SingularPointError);
    CHECK_THROWS_AS(correlation_kernel(kModel, -1.0), DomainError);
    const auto flat = SpectralModel::flat_markovian(1.0);
    CHECK(correlation_kernel(flat, 0.5) == cplx{0.0, 0.0});
    CHECK_THROWS_AS(correlation_kernel(flat, 0.0), SingularPointError);
}

TEST_CASE("product-integrated kernel matches quadrature of the closed form") {
    // int_0^t f(s) ds = beta^{3/2} e^{-i pi/4} / sqrt(pi) * int_0^t s^{-1/2} e^{-i omega_c s} ds
    const cplx prefactor = std::pow(kBeta80, 1.5) * std::polar(1.0, -0.25 * std::numbers::pi) / std::sqrt(std::numbers::pi);
    const struct {
        double t;
        cplx value;
    } refs[] = {{0.5, {0.07645103204680195, -1.8267960801056816}},
                {1.0, {0.027344627502031376, -1.8561521035556753}},
                {3.0, {-0.046286660637455307, -1.9193580810569115}}};
    const double h = 1e-3;
    for (const auto& r : refs) {
        CAPTURE(r.t);
        const auto n = static_cast<std::size_t>(std::lround(r.t / h));
        cplx sum{0.0, 0.0};
        for (std::size_t m = 0; m < n; ++m) {
            const auto mom = detail::hat_moments(m, -100.0 * h);
            sum += mom.near + mom.far;
        }
        const cplx integral = prefactor * std::sqrt(h) * sum;
        CHECK(std::abs(integral - r.value) < 1e-6);
    }
}

TEST_CASE("hat moments") {
    // near + far = int_m^{m+1} s^{-1/2} ds
    for (const std::size_t m : {0u, 1u, 10u, 100000u}) {
        const auto mom = detail::hat_moments(m);
        const double exact = 2.0 * (std::sqrt(m + 1.0) - std::sqrt(double(m)));
        CHECK(mom.near + mom.far == doctest::Approx(exact).epsilon(1e-14));
        const auto osc = detail::hat_moments(m, 0.0);
        CHECK(std::abs(osc.near - mom.near) < 1e-14);
        CHECK(std::abs(osc.far - mom.far) < 1e-14);
    }
    const auto w = detail::product_weights(4);
    double total = 0.0;
    for (const double x : w) total += x;
    CHECK(total == doctest::Approx(4.0).epsilon(1e-14));  // int_0^4 s^{-1/2} ds
}

TEST_CASE("self-energy y(E)") {
    CHECK(self_energy_y(kModel, 76.0, 80.0) == doctest::Approx(75.992031780744175).epsilon(1e-13));
    CHECK(self_energy_y(kModel, 50.0, 80.0) == doctest::Approx(77.223198163651021).epsilon(1e-13));
    CHECK(self_energy_y(kModel, 76.0, 80.0) == doctest::Approx(75.993).epsilon(1e-4));
    // decreasing in E and divergent at the edge
    double previous = self_energy_y(kModel, 0.0, 80.0);
    for (double e = 1.0; e < 100.0; e += 1.0) {
        const double y = self_energy_y(kModel, e, 80.0);
        CHECK(y < previous);
        previous = y;
    }
    CHECK(self_energy_y(kModel, 100.0 - 1e-12, 80.0) < -1e6);
    CHECK_THROWS_AS(self_energy_y(kModel, 100.0, 80.0), DomainError);
}

TEST_CASE("residue integral") {
    CHECK(residue_integral(kModel, 76.0) == doctest::Approx(0.083499337901163027).epsilon(1e-13));
    CHECK(residue_integral(kModel, 99.0) == doctest::Approx(9.8174770424681039).epsilon(1e-13));
    CHECK(residue_integral(kModel, 75.993) == doctest::Approx(0.0835).epsilon(1e-3));
    CHECK(1.0 / (1.0 + residue_integral(kModel, 75.993)) == doctest::Approx(0.923).epsilon(1e-3));
    CHECK(residue_integral(kModel, -1e12) < 1e-15);
    CHECK(residue_integral(kModel, 100.0 - 1e-12) > 1e15);
    CHECK_THROWS_AS(residue_integral(kModel, 100.0), DomainError);
}
