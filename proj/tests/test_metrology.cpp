#include <doctest.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>
#include <random>
#include <thread>
#include <vector>

#include "metrol/errors.hpp"
#include "metrol/metrology.hpp"

using namespace metrol;
using cplx = std::complex<double>;

namespace {

SpectralModel model_at(double delta) { return SpectralModel::photonic_band_gap(100.0, pbg_beta(100.0 + delta, 100.0)); }

SolverSpec ideal_solver(double t_max, double step) {
    return {"ideal", [=](double w) {
                return markovian_c(AtomParams{w}, SpectralModel::flat_markovian(0.0), TimeGrid::uniform(t_max, step));
            }};
}

SolverSpec analytic_solver(const SpectralModel& model, double t_max, double step) {
    return {"analytic", [=](double w) { return analytic_pbg(AtomParams{w}, model, TimeGrid::uniform(t_max, step)); }};
}

SolverSpec volterra_solver(const SpectralModel& model, double t_max, double step) {
    return {"volterra", [=](double w) { return solve_volterra(model, AtomParams{w}, t_max, step); }};
}

}  // namespace

TEST_CASE("fisher information") {
    const double omega = 1.3;
    const double t = 2.0;
    const std::vector<double> p{std::pow(std::cos(omega * t / 2), 2), std::pow(std::sin(omega * t / 2), 2)};
    const double s = std::sin(omega * t);
    const std::vector<double> dp{-0.5 * t * s, 0.5 * t * s};
    CHECK(fisher_information(p, dp) == doctest::Approx(t * t).epsilon(1e-14));

    const int n = 6;  // GHZ parity outcomes
    const std::vector<double> pg{std::pow(std::cos(n * omega * t / 2), 2), std::pow(std::sin(n * omega * t / 2), 2)};
    const double sg = std::sin(n * omega * t);
    const std::vector<double> dpg{-0.5 * n * t * sg, 0.5 * n * t * sg};
    CHECK(fisher_information(pg, dpg) == doctest::Approx(n * n * t * t).epsilon(1e-12));

    const std::vector<double> flat{0.25, 0.75}, zero{0.0, 0.0};
    CHECK(fisher_information(flat, zero) == 0.0);

    const std::vector<double> edge{1.0, 0.0}, kick{0.0, 0.5};
    CHECK_THROWS_AS(fisher_information(edge, kick), SingularOutcomeError);
    const std::vector<double> bad{0.5, 0.6};
    CHECK_THROWS_AS(fisher_information(bad, zero), std::invalid_argument);

    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.05, 1.0), d(-3.0, 3.0);
    for (int k = 0; k < 200; ++k) {
        std::vector<double> q(4), dq(4);
        double total = 0.0;
        for (auto& x : q) total += (x = u(rng));
        for (auto& x : q) x /= total;
        for (std::size_t i = 0; i + 1 < dq.size(); ++i) dq[i] = d(rng);
        dq.back() = -(dq[0] + dq[1] + dq[2]);
        CHECK(fisher_information(q, dq) >= 0.0);
    }
}

TEST_CASE("ideal precision references") {
    CHECK(ideal_precision({1, 1.0, InputState::GHZ}, 1.0) == 1.0);
    CHECK(ideal_precision({1, 1.0, InputState::Uncorrelated}, 1.0) == 1.0);
    CHECK(ideal_precision({10, 1.0, InputState::GHZ}, 1.0) == doctest::Approx(0.1));
    CHECK(ideal_precision({10, 1.0, InputState::Uncorrelated}, 1.0) == doctest::Approx(0.31622776601683794));
    for (const int n : {2, 7, 30})
        CHECK(ideal_precision({n, 2.0, InputState::GHZ}, 3.0) / ideal_precision({n, 2.0, InputState::Uncorrelated}, 3.0) ==
              doctest::Approx(1.0 / std::sqrt(n)));
}

TEST_CASE("probe validation and atom cap") {
    CHECK_NOTHROW((ProbeConfig{40, 1.0}.validate()));
    CHECK_THROWS_AS((ProbeConfig{41, 1.0}.validate()), DomainError);
    CHECK_NOTHROW((ProbeConfig{41, 1.0}.validate(60)));
    CHECK_THROWS_AS((ProbeConfig{0, 1.0}.validate()), DomainError);
    CHECK_THROWS_AS((ProbeConfig{2, 0.0}.validate()), DomainError);
}

TEST_CASE("scaling bound and Heisenberg window") {
    BoundStateResult bs{.exists = true, .E0 = 76.0, .Z = 0.923, .residual = 0.0, .atom = {80.0}, .model = model_at(-20.0)};
    CHECK(scaling_bound(bs, {10, 1.0}, 1.0) == doctest::Approx(0.241).epsilon(2e-3));
    bs.Z = 1.0;
    CHECK(scaling_bound(bs, {10, 1.0}, 1.0) == doctest::Approx(ideal_precision({10, 1.0}, 1.0)).epsilon(1e-15));
    CHECK(heisenberg_window(0.923) == 12);
    CHECK(heisenberg_window(0.864395) == 6);
    bs.exists = false;
    CHECK_THROWS_AS(scaling_bound(bs, {10, 1.0}, 1.0), DomainError);
}

TEST_CASE("coupling-free precision reproduces the standard and Heisenberg limits") {
    const auto sens = differentiate(ideal_solver(2.0, 0.5), 2.3);
    for (const int n : {1, 5, 10})
        for (const double T : {0.5, 1.0, 4.0})
            for (const double t : {0.5, 1.0, 2.0}) {
                CAPTURE(n);
                CAPTURE(T);
                CAPTURE(t);
                const ProbeConfig u{n, T, InputState::Uncorrelated}, g{n, T, InputState::GHZ};
                CHECK(precision_uncorrelated(sens, u, t) == doctest::Approx(ideal_precision(u, t)).epsilon(1e-10));
                CHECK(precision_entangled(sens, g, t) == doctest::Approx(ideal_precision(g, t)).epsilon(1e-10));
            }
}

TEST_CASE("derivative against a nine-point stencil of the closed form") {
    const auto model = model_at(-20.0);
    const double omega0 = 80.0, t = 5.0;
    const auto sens = differentiate(analytic_solver(model, 5.0, 1e-3), omega0);

    const double h = 1e-3;
    constexpr double kStencil[] = {1.0 / 280, -4.0 / 105, 1.0 / 5, -4.0 / 5, 0.0, 4.0 / 5, -1.0 / 5, 4.0 / 105, -1.0 / 280};
    cplx dc{0.0, 0.0};
    for (int j = -4; j <= 4; ++j) dc += kStencil[j + 4] * PbgClosedForm(AtomParams{omega0 + j * h}, model)(t);
    dc /= h;
    const cplx c = PbgClosedForm(AtomParams{omega0}, model)(t);
    const AmplitudeSample oracle{t, c, dc};

    for (const auto& config : {ProbeConfig{1, 1.0, InputState::Uncorrelated}, ProbeConfig{4, 1.0, InputState::Uncorrelated},
                               ProbeConfig{10, 1.0, InputState::GHZ}, ProbeConfig{3, 2.0, InputState::GHZ}}) {
        CAPTURE(config.n);
        const double value = precision(sample_at(sens, t), config);
        CHECK(std::isfinite(value));
        CHECK(value == doctest::Approx(precision(oracle, config)).epsilon(1e-4));
    }
}

TEST_CASE("derivative consistency check rejects a non-smooth solver") {
    const SolverSpec step{"step", [](double w) {
                              auto traj = markovian_c(AtomParams{1.0}, SpectralModel::flat_markovian(0.0), TimeGrid::uniform(1.0, 0.5));
                              if (w > 1.0) traj.c[1] *= 0.5;
                              return traj;
                          }};
    CHECK_THROWS_AS(differentiate(step, 1.0), NumericalError);
    CHECK_THROWS_AS(differentiate(step, 1.0, {.h_omega = 0.0}), DomainError);
}

TEST_CASE("precision edge cases") {
    const SolverSpec frozen{"frozen", [](double) {
                                return markovian_c(AtomParams{0.0}, SpectralModel::flat_markovian(1.0), TimeGrid::uniform(1.0, 0.5));
                            }};
    const auto sens = differentiate(frozen, 3.0);
    CHECK(std::isinf(precision_uncorrelated(sens, {1, 1.0}, 1.0)));
    CHECK(std::isinf(precision_entangled(sens, {3, 1.0}, 1.0)));
    CHECK_THROWS_AS(precision_uncorrelated(AmplitudeSample{1.0, 1.0, 1.0}, {1, 1.0}), DomainError);
    CHECK_THROWS_AS(precision_uncorrelated(sens, {1, 1.0}, 0.7), DomainError);  // not a grid node
}

TEST_CASE("sample_at interpolation") {
    const auto sens = differentiate(volterra_solver(model_at(-20.0), 2.0, 1e-3), 80.0);
    const auto node = sample_at(sens, 1.0);
    CHECK(node.c == sens.traj.c[1000]);
    // between nodes the demodulated interpolant is smooth; compare with a finer solve
    const auto fine = solve_volterra(model_at(-20.0), AtomParams{80.0}, 2.0, 2.5e-4);
    for (const double t : {0.10025, 1.00075, 1.99975}) {
        CAPTURE(t);
        CHECK(std::abs(sample_at(sens, t).c - fine.c[*fine.grid.index_of(t)]) < 2e-4);
    }
    CHECK_THROWS_AS(sample_at(sens, 2.5), DomainError);
}

TEST_CASE("local minima") {
    const double inf = std::numeric_limits<double>::infinity();
    const std::vector<double> v{3, 1, 2, 2, 2, 0.5, 4, inf, inf, 5, 4, 6};
    CHECK(local_minima(v) == std::vector<std::size_t>{1, 5, 10});
    const std::vector<double> plateau{2, 1, 1, 2};
    CHECK(local_minima(plateau).empty());
}

TEST_CASE("precision curves inside and above the gap") {
    const ProbeConfig ghz{10, 1.0, InputState::GHZ};
    const auto window_min = [](const PrecisionCurve& c, double lo, double hi) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto i : c.envelope)
            if (c.t[i] >= lo && c.t[i] <= hi) best = std::min(best, c.delta_omega[i]);
        return best;
    };

    const auto inside = precision_curve(volterra_solver(model_at(-20.0), 10.0, 1e-3), 80.0, ghz);
    for (const auto i : inside.envelope) {
        CHECK(inside.delta_omega[i] < inside.delta_omega[i - 1]);
        CHECK(inside.delta_omega[i] < inside.delta_omega[i + 1]);
    }
    CHECK(window_min(inside, 8.0, 10.0) < window_min(inside, 1.0, 2.0));
    CHECK(window_min(inside, 1.0, 2.0) < window_min(inside, 0.2, 0.4));

    const ProbeConfig pair{2, 1.0, InputState::GHZ};
    const auto above = precision_curve(volterra_solver(model_at(20.0), 10.0, 1e-3), 120.0, pair);
    CHECK(window_min(above, 8.0, 10.0) > window_min(above, 1.0, 2.0));

    const auto sens = differentiate(volterra_solver(model_at(-20.0), 1.0, 0.05), 80.0);
    CHECK_THROWS_AS(precision_curve(sens, ghz, {.refine = 1}), UnderResolvedError);
}

TEST_CASE("minimal precision versus n") {
    const auto model = model_at(-20.0);
    const auto sens = differentiate(volterra_solver(model, 10.0, 1e-3), 80.0);
    const auto bs = find_bound_state(model, AtomParams{80.0});
    const int n_grid[] = {1, 2, 5, 10};
    const auto rows = min_precision_vs_n(sens, bs, 10.0, n_grid, 1.0);
    REQUIRE(rows.size() == 4);
    for (const auto& r : rows) {
        CAPTURE(r.n);
        CHECK(r.min_delta_omega >= r.hl_reference);
        CHECK(std::abs(r.min_delta_omega / r.residue_bound - 1.0) < 0.1);
    }
    // a single atom has no entanglement to exploit
    CurveOptions window{.t_begin = 9.0, .t_end = 10.0};
    const auto one_ghz = precision_curve(sens, {1, 1.0, InputState::GHZ}, window);
    const auto one_unc = precision_curve(sens, {1, 1.0, InputState::Uncorrelated}, window);
    CHECK(one_ghz.delta_omega == one_unc.delta_omega);
    CHECK(min_envelope_near(one_ghz, 10.0) == rows[0].min_delta_omega);
}

TEST_CASE("markovian optimum") {
    for (const auto state : {InputState::Uncorrelated, InputState::GHZ}) {
        const ProbeConfig config{5, 1.0, state};
        const auto opt = optimize_markovian({1.0, 0.0}, config);
        CHECK(opt.delta_omega == doctest::Approx(std::sqrt(std::exp(1.0) / 5.0)).epsilon(1e-6));
        CHECK(opt.t == doctest::Approx(state == InputState::GHZ ? 0.2 : 1.0).epsilon(1e-4));
    }
}

TEST_CASE("trajectory cache under concurrent readers") {
    std::atomic<int> solves{0};
    const SolverSpec spec{"counting", [&](double w) {
                              ++solves;
                              return markovian_c(AtomParams{w}, SpectralModel::flat_markovian(1.0), TimeGrid::uniform(1.0, 0.01));
                          }};
    TrajectoryCache cache;
    std::vector<std::vector<std::shared_ptr<const AmplitudeTrajectory>>> seen(8);
    {
        std::vector<std::jthread> threads;
        for (int k = 0; k < 8; ++k)
            threads.emplace_back([&, k] {
                for (int rep = 0; rep < 20; ++rep)
                    for (const double w : {1.0, 2.0, 3.0}) seen[k].push_back(cache.get_or_solve(spec, w));
            });
    }
    CHECK(cache.size() == 3);
    CHECK(solves.load() >= 3);
    CHECK(solves.load() <= 3 * 8);
    // every caller ends up with the one stored entry for each key
    for (const auto& s : seen)
        for (std::size_t i = 0; i < s.size(); ++i) CHECK(s[i] == cache.get_or_solve(spec, 1.0 + static_cast<double>(i % 3)));

    const auto a = differentiate(spec, 2.0, {}, &cache);
    const auto b = differentiate(spec, 2.0);
    CHECK(a.dc_domega0 == b.dc_domega0);
    CHECK(cache.size() == 7);
}
