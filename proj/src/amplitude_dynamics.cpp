#include "metrol/amplitude_dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>
#include <string>

#include <Eigen/Eigenvalues>
#include <fmt/format.h>

#include "metrol/errors.hpp"
#include "metrol/faddeeva.hpp"
#include "metrol/log.hpp"

namespace metrol {

using cplx = std::complex<double>;

TimeGrid TimeGrid::uniform(double t_max, double step) {
    if (!(t_max > 0.0)) throw DomainError("time grid: t_max must be positive");
    if (!(step > 0.0)) throw DomainError("time grid: step must be positive");
    const double ratio = t_max / step;
    const double n = std::round(ratio);
    if (n < 1.0 || std::abs(ratio - n) > 1e-9 * std::max(1.0, ratio))
        throw DomainError(fmt::format("time grid: t_max/step = {} is not an integer", ratio));
    return {step, static_cast<std::size_t>(n)};
}

std::optional<std::size_t> TimeGrid::index_of(double t) const noexcept {
    if (!(t >= 0.0) || step <= 0.0) return std::nullopt;
    const double r = t / step;
    const double k = std::round(r);
    if (std::abs(r - k) > 1e-9 * std::max(1.0, r) || k > static_cast<double>(intervals)) return std::nullopt;
    return static_cast<std::size_t>(k);
}

std::string_view to_string(AmplitudeMethod method) noexcept {
    switch (method) {
        case AmplitudeMethod::Volterra: return "volterra";
        case AmplitudeMethod::AnalyticPBG: return "analytic_pbg";
        case AmplitudeMethod::Markovian: return "markovian";
        case AmplitudeMethod::BoundStateAsymptotic: return "bound_state_asymptotic";
    }
    return "unknown";
}

// ---------------------------------------------------------------------------
// Closed form

std::array<cplx, 3> pbg_cubic_roots(double beta, double delta) {
    if (!(beta > 0.0)) throw DomainError("pbg_cubic_roots: beta must be positive");
    const cplx p{0.0, delta / beta};
    const cplx q = -std::polar(1.0, 0.75 * std::numbers::pi);

    Eigen::Matrix3cd companion = Eigen::Matrix3cd::Zero();
    companion(1, 0) = 1.0;
    companion(2, 1) = 1.0;
    companion(0, 2) = -q;
    companion(1, 2) = -p;
    Eigen::ComplexEigenSolver<Eigen::Matrix3cd> solver(companion, false);
    if (solver.info() != Eigen::Success) throw NumericalError("pbg_cubic_roots: eigenvalue solve failed");

    std::array<cplx, 3> roots;
    for (int j = 0; j < 3; ++j) {
        cplx x = solver.eigenvalues()(j);
        for (int it = 0; it < 3; ++it) {
            const cplx f = x * x * x + p * x + q;
            const cplx df = 3.0 * x * x + p;
            if (std::abs(df) < 1e-8) break;  // near a double root Newton does not help
            x -= f / df;
        }
        roots[static_cast<std::size_t>(j)] = x;
    }
    std::sort(roots.begin(), roots.end(), [](cplx a, cplx b) {
        return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag();
    });
    return roots;
}

PbgClosedForm::PbgClosedForm(const AtomParams& atom, const SpectralModel& model, const BranchSet& branches)
    : omega_c_(model.band_gap().omega_c),
      sqrt_beta_(std::sqrt(model.band_gap().beta)),
      branches_(branches),
      roots_(pbg_cubic_roots(model.band_gap().beta, detuning(atom, model.band_gap()))) {
    for (std::size_t j = 0; j < 3; ++j) {
        if (branches.sign[j] != 1 && branches.sign[j] != -1)
            throw std::invalid_argument("PbgClosedForm: branch signs must be +1 or -1");
        for (std::size_t k = j + 1; k < 3; ++k)
            if (std::abs(roots_[j] - roots_[k]) < 1e-10)
                throw DegenerateRootsError("analytic_pbg: degenerate cubic roots; use solve_volterra");
    }
    for (std::size_t j = 0; j < 3; ++j) {
        const cplx xi = roots_[(j + 1) % 3];
        const cplx xk = roots_[(j + 2) % 3];
        weights_[j] = roots_[j] * roots_[j] / ((roots_[j] - xi) * (roots_[j] - xk));
    }
}

cplx PbgClosedForm::operator()(double t) const {
    if (t < 0.0) throw DomainError("analytic_pbg: t must be non-negative");
    const double scale = sqrt_beta_ * std::sqrt(t);
    cplx sum{0.0, 0.0};
    for (std::size_t j = 0; j < 3; ++j) {
        // exp(beta x^2 t) erfc(-s x sqrt(beta t)) = w(-i s x sqrt(beta t))
        const cplx z = cplx{0.0, -static_cast<double>(branches_.sign[j])} * roots_[j] * scale;
        sum += weights_[j] * faddeeva_w(z);
    }
    return std::polar(1.0, -omega_c_ * t) * sum;
}

AmplitudeTrajectory analytic_pbg(const AtomParams& atom, const SpectralModel& model, const TimeGrid& grid,
                                 const BranchSet& branches) {
    const PbgClosedForm form(atom, model, branches);
    std::vector<cplx> c(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k) c[k] = form(grid.at(k));
    c[0] = 1.0;
    return {grid, std::move(c), AmplitudeMethod::AnalyticPBG, atom, model, branches};
}

BranchSet select_branches(const AtomParams& atom, const SpectralModel& model, const AmplitudeTrajectory& oracle,
                          std::span<const double> probe_times) {
    std::vector<std::size_t> nodes;
    for (const double t : probe_times) {
        const auto k = oracle.grid.index_of(t);
        if (!k) throw std::invalid_argument(fmt::format("select_branches: t = {} is not an oracle grid node", t));
        nodes.push_back(*k);
    }
    BranchSet best;
    double best_err = std::numeric_limits<double>::infinity();
    for (int mask = 0; mask < 8; ++mask) {
        BranchSet candidate;
        for (std::size_t j = 0; j < 3; ++j) candidate.sign[j] = (mask >> j) & 1 ? -1 : 1;
        const PbgClosedForm form(atom, model, candidate);
        double err = 0.0;
        for (const auto k : nodes) err = std::max(err, std::abs(form(oracle.grid.at(k)) - oracle.c[k]));
        if (!(err >= best_err)) {
            best_err = err;
            best = candidate;
        }
    }
    return best;
}

// ---------------------------------------------------------------------------
// Markovian and asymptotic forms

MarkovianRates markovian_rates(const AtomParams& atom, const SpectralModel& model) {
    if (const auto* flat = std::get_if<FlatMarkovian>(&model.variant()))
        return {flat->gamma_tilde, flat->delta_omega};
    const auto& pbg = model.band_gap();
    const double delta = detuning(atom, pbg);
    if (!(delta > 0.0))
        throw DomainError("markovian_c: no markovian decay rate inside the band gap (delta <= 0)");
    if (delta < 10.0 * pbg.beta)
        log::warn(fmt::format("markovian_c: delta = {} is not large compared with beta = {}", delta, pbg.beta));
    // 2 pi J(omega0); the principal-value shift of the band-gap density vanishes above the edge.
    return {2.0 * std::pow(pbg.beta, 1.5) / std::sqrt(delta), 0.0};
}

AmplitudeTrajectory markovian_c(const AtomParams& atom, const SpectralModel& model, const TimeGrid& grid) {
    const auto rates = markovian_rates(atom, model);
    std::vector<cplx> c(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const double t = grid.at(k);
        c[k] = std::polar(std::exp(-0.5 * rates.gamma_tilde * t), -(atom.omega0 + rates.delta_omega) * t);
    }
    return {grid, std::move(c), AmplitudeMethod::Markovian, atom, model, std::nullopt};
}

AmplitudeTrajectory bound_state_asymptote(const BoundStateResult& bs, const TimeGrid& grid) {
    if (!bs.exists) throw DomainError("bound_state_asymptote: no bound state");
    std::vector<cplx> c(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k) c[k] = std::polar(bs.Z, -bs.E0 * grid.at(k));
    return {grid, std::move(c), AmplitudeMethod::BoundStateAsymptotic, bs.atom, bs.model, std::nullopt};
}

double large_detuning_asymptote(const AtomParams& atom, const SpectralModel& model, double t) {
    const auto& pbg = model.band_gap();
    const double delta = detuning(atom, pbg);
    if (delta == 0.0) throw DomainError("large_detuning_asymptote: delta = 0");
    if (std::abs(delta) < 10.0 * pbg.beta)
        log::warn(fmt::format("large_detuning_asymptote: |delta| = {} < 10 beta = {}", std::abs(delta),
                              10.0 * pbg.beta));
    const cplx ratio{-pbg.beta / delta, 0.0};
    const cplx prefactor = 1.0 / (1.0 + 0.5 * std::pow(ratio, 1.5));
    const cplx rate = std::sqrt(cplx{pbg.beta * pbg.beta * pbg.beta / delta, 0.0});
    return std::abs(prefactor * std::exp(-rate * t));
}

// ---------------------------------------------------------------------------
// Rates, Kraus channel, output

RateSeries decoherence_rates(const AmplitudeTrajectory& traj) {
    const std::size_t n = traj.c.size();
    if (n < 3) throw std::invalid_argument("decoherence_rates: need at least three samples");
    for (std::size_t k = 0; k < n; ++k)
        if (!(std::abs(traj.c[k]) > 1e-8))
            throw AmplitudeVanishesError(
                fmt::format("decoherence_rates: amplitude vanishes; rates undefined beyond t = {}", traj.grid.at(k)),
                k);

    const double omega0 = traj.atom.omega0;
    const double h = traj.grid.step;
    std::vector<cplx> a(n);
    for (std::size_t k = 0; k < n; ++k) a[k] = std::polar(1.0, omega0 * traj.grid.at(k)) * traj.c[k];

    RateSeries out;
    out.gamma.resize(n);
    out.omega.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        cplx da;
        if (k == 0)
            da = (-3.0 * a[0] + 4.0 * a[1] - a[2]) / (2.0 * h);
        else if (k == n - 1)
            da = (3.0 * a[k] - 4.0 * a[k - 1] + a[k - 2]) / (2.0 * h);
        else
            da = (a[k + 1] - a[k - 1]) / (2.0 * h);
        const cplx r = -2.0 * da / a[k];
        out.gamma[k] = r.real();
        out.omega[k] = 2.0 * omega0 + r.imag();
    }
    return out;
}

KrausPair kraus_channel(cplx c) {
    const double mod = std::abs(c);
    if (!(mod <= 1.0 + 1e-9)) throw DomainError("kraus_channel: |c| exceeds 1");
    KrausPair k{Eigen::Matrix2cd::Zero(), Eigen::Matrix2cd::Zero()};
    k.k0(kExcited, kExcited) = c;
    k.k0(kGround, kGround) = 1.0;
    k.k1(kGround, kExcited) = std::sqrt(std::max(0.0, 1.0 - mod * mod));
    return k;
}

Eigen::Matrix2cd apply_channel(const KrausPair& kraus, const Eigen::Matrix2cd& rho) {
    return kraus.k0 * rho * kraus.k0.adjoint() + kraus.k1 * rho * kraus.k1.adjoint();
}

void write_trajectory_csv(const AmplitudeTrajectory& traj, std::ostream& out) {
    out << "t,re_c,im_c,abs_c\n";
    for (std::size_t k = 0; k < traj.c.size(); ++k) {
        const cplx c = traj.c[k];
        out << fmt::format("{:.17g},{:.17g},{:.17g},{:.17g}\n", traj.grid.at(k), c.real() + 0.0, c.imag() + 0.0,
                          std::abs(c));
    }
}

}  // namespace metrol
