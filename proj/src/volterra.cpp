#include <algorithm>
#include <cmath>
#include <limits>
#include <complex>
#include <numbers>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>

#include "metrol/amplitude_dynamics.hpp"
#include "metrol/detail/product_weights.hpp"
#include "metrol/errors.hpp"

namespace metrol {

namespace detail {

HatMoments hat_moments(std::size_t m) noexcept {
    const double b = std::sqrt(static_cast<double>(m));
    const double a = std::sqrt(static_cast<double>(m) + 1.0);
    const double d = 1.0 / (a + b);  // sqrt(m+1) - sqrt(m)
    return {2.0 / 3.0 * d * (2.0 - b * d), 2.0 / 3.0 * d * (1.0 + b * d)};
}

OscillatoryHatMoments hat_moments(std::size_t m, double theta) {
    using Rule = boost::math::quadrature::gauss<double, 20>;
    const double base = static_cast<double>(m);
    const std::complex<double> shift = std::polar(1.0, theta * base);
    if (m == 0) {
        const auto near = Rule::integrate(
            [&](double u) { return 2.0 * (1.0 - u * u) * std::polar(1.0, theta * u * u); }, 0.0, 1.0);
        const auto far =
            Rule::integrate([&](double u) { return 2.0 * u * u * std::polar(1.0, theta * u * u); }, 0.0, 1.0);
        return {near, far};
    }
    const auto near = Rule::integrate(
        [&](double u) { return (1.0 - u) * std::polar(1.0, theta * u) / std::sqrt(base + u); }, 0.0, 1.0);
    const auto far =
        Rule::integrate([&](double u) { return u * std::polar(1.0, theta * u) / std::sqrt(base + u); }, 0.0, 1.0);
    return {shift * near, shift * far};
}

std::vector<double> product_weights(std::size_t n) {
    std::vector<double> w(n + 1, 0.0);
    for (std::size_t m = 0; m < n; ++m) {
        const auto mom = hat_moments(m);
        w[m] += mom.near;
        w[m + 1] += mom.far;
    }
    return w;
}

}  // namespace detail

namespace {

// Amplitude a(t) = exp(i omega0 t) c(t) in the rotating frame:
//   a'(t) = -int_0^t kappa (t - s)^{-1/2} exp(i delta (t - s)) a(s) ds.
std::vector<std::complex<double>> integrate_rotating(const PhotonicBandGap& pbg, double delta,
                                                     const TimeGrid& grid) {
    const std::size_t steps = grid.intervals;
    const double h = grid.step;
    const std::complex<double> kappa = std::pow(pbg.beta, 1.5) * std::sqrt(h / std::numbers::pi) *
                                       std::polar(1.0, -std::numbers::pi / 4.0);

    // The factor exp(i delta (t - s)) is part of the product-integration weight, so
    // only the slowly varying a(s) is interpolated.
    const double theta = delta * h;

    // History weights stored reversed so the convolution runs forward in memory:
    // rev[steps - m] holds the interior weight of the node m steps back.
    std::vector<double> rev_re(steps + 1, 0.0), rev_im(steps + 1, 0.0);
    std::vector<std::complex<double>> endpoint(steps + 1);
    const auto first = detail::hat_moments(0, theta);
    auto prev = first;
    for (std::size_t m = 1; m <= steps; ++m) {
        const auto cur = detail::hat_moments(m, theta);
        const std::complex<double> interior = kappa * (cur.near + prev.far);
        rev_re[steps - m] = interior.real();
        rev_im[steps - m] = interior.imag();
        endpoint[m] = kappa * prev.far;
        prev = cur;
    }
    const std::complex<double> self = kappa * first.near;
    const std::complex<double> denom = 1.0 + 0.5 * h * self;

    std::vector<double> a_re(steps + 1), a_im(steps + 1);
    a_re[0] = 1.0;
    a_im[0] = 0.0;
    std::complex<double> memory_prev{0.0, 0.0};
    for (std::size_t n = 0; n < steps; ++n) {
        // History of node n+1 excluding itself: interior nodes 1..n plus the t = 0 endpoint.
        const double* wr = rev_re.data() + (steps - n - 1);
        const double* wi = rev_im.data() + (steps - n - 1);
        double hr = 0.0, hi = 0.0;
        for (std::size_t j = 1; j <= n; ++j) {
            hr += wr[j] * a_re[j] - wi[j] * a_im[j];
            hi += wr[j] * a_im[j] + wi[j] * a_re[j];
        }
        const std::complex<double> history = std::complex<double>{hr, hi} + endpoint[n + 1];
        const std::complex<double> a_n{a_re[n], a_im[n]};
        const std::complex<double> a_next = (a_n - 0.5 * h * (memory_prev + history)) / denom;
        a_re[n + 1] = a_next.real();
        a_im[n + 1] = a_next.imag();
        memory_prev = self * a_next + history;
    }

    std::vector<std::complex<double>> a(steps + 1);
    for (std::size_t k = 0; k <= steps; ++k) a[k] = {a_re[k], a_im[k]};
    return a;
}

AmplitudeTrajectory solve_unchecked(const SpectralModel& model, const AtomParams& atom, double t_max,
                                    double step) {
    const auto& pbg = model.band_gap();
    const TimeGrid grid = TimeGrid::uniform(t_max, step);
    const auto a = integrate_rotating(pbg, detuning(atom, pbg), grid);
    std::vector<std::complex<double>> c(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k) c[k] = std::polar(1.0, -atom.omega0 * grid.at(k)) * a[k];
    c[0] = 1.0;
    return {grid, std::move(c), AmplitudeMethod::Volterra, atom, model, std::nullopt};
}

}  // namespace

AmplitudeTrajectory solve_volterra(const SpectralModel& model, const AtomParams& atom, double t_max,
                                   double step, const VolterraOptions& options) {
    if (!model.is_band_gap())
        throw std::invalid_argument("solve_volterra: the markovian model has no memory kernel; use markovian_c");
    auto traj = solve_unchecked(model, atom, t_max, step);
    if (options.verify_convergence) {
        const double ratio = volterra_convergence_ratio(model, atom, t_max, step);
        if (ratio < options.min_ratio)
            throw ResolutionError("solve_volterra: resolution insufficient (step-halving ratio " +
                                      std::to_string(ratio) + "); try step " +
                                      std::to_string(step / 4.0),
                                  step / 4.0);
    }
    return traj;
}

double volterra_convergence_ratio(const SpectralModel& model, const AtomParams& atom, double t_max,
                                  double step) {
    const auto coarse = solve_unchecked(model, atom, t_max, step);
    const auto half = solve_unchecked(model, atom, t_max, step / 2.0);
    const auto quarter = solve_unchecked(model, atom, t_max, step / 4.0);
    double e1 = 0.0, e2 = 0.0;
    for (std::size_t k = 0; k < coarse.grid.size(); ++k) {
        e1 = std::max(e1, std::abs(coarse.c[k] - half.c[2 * k]));
        e2 = std::max(e2, std::abs(half.c[2 * k] - quarter.c[4 * k]));
    }
    if (e2 < 1e-13) return std::numeric_limits<double>::infinity();
    return e1 / e2;
}

}  // namespace metrol
