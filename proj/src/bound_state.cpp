#include "metrol/bound_state.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "metrol/errors.hpp"

namespace metrol {

BoundStateResult find_bound_state(const SpectralModel& model, const AtomParams& atom,
                                  const BoundStateOptions& options) {
    const double edge = band_edge(model);
    const auto g = [&](double e) { return self_energy_y(model, e, atom.omega0) - e; };

    BoundStateResult result{.atom = atom, .model = model};

    double hi = edge - options.edge_offset;
    if (g(hi) >= 0.0) return result;  // y(omega_c) >= omega_c: no discrete root

    double lo = options.initial_lower.value_or(std::min(atom.omega0, edge) - 1.0);
    if (!(lo < hi)) lo = hi - 1.0;
    double step = std::max(1.0, hi - lo);
    while (g(lo) <= 0.0) {
        lo = hi - step;
        step *= 2.0;
        if (edge - lo > options.max_bracket)
            throw NoBracketError("find_bound_state: no bracket found within " +
                                 std::to_string(options.max_bracket) + " of the band edge");
    }

    // Bisect until the bracket is below tolerance or cannot be split further.
    while (hi - lo > options.tolerance) {
        const double mid = lo + 0.5 * (hi - lo);
        if (mid <= lo || mid >= hi) break;
        if (g(mid) > 0.0)
            lo = mid;
        else
            hi = mid;
    }
    // Finish on representable neighbours: g is steep near the edge, so pick the
    // point with the smallest residual rather than the midpoint.
    for (int i = 0; i < 64; ++i) {
        const double mid = lo + 0.5 * (hi - lo);
        if (mid <= lo || mid >= hi) break;
        if (g(mid) > 0.0)
            lo = mid;
        else
            hi = mid;
    }
    const double g_lo = std::abs(g(lo));
    const double g_hi = std::abs(g(hi));
    result.E0 = g_lo <= g_hi ? lo : hi;
    result.residual = std::min(g_lo, g_hi);
    result.Z = 1.0 / (1.0 + residue_integral(model, result.E0));
    result.exists = true;
    return result;
}

double bound_energy_derivative(const SpectralModel& model, const AtomParams& atom, double h) {
    if (!(h > 0.0)) throw DomainError("bound_energy_derivative: h must be positive");
    const auto up = find_bound_state(model, AtomParams{atom.omega0 + h, atom.gamma0});
    const auto down = find_bound_state(model, AtomParams{atom.omega0 - h, atom.gamma0});
    if (!up.exists || !down.exists) throw DomainError("bound_energy_derivative: no bound state");
    return (up.E0 - down.E0) / (2.0 * h);
}

std::vector<SpectrumSlice> spectrum_sweep(double omega_c, std::span<const double> omega0_grid) {
    if (omega0_grid.empty()) throw std::invalid_argument("spectrum_sweep: omega0 grid is empty");
    if (!std::is_sorted(omega0_grid.begin(), omega0_grid.end()))
        throw std::invalid_argument("spectrum_sweep: omega0 grid must be ascending");

    std::vector<SpectrumSlice> slices;
    slices.reserve(omega0_grid.size());
    for (const double omega0 : omega0_grid) {
        SpectrumSlice slice;
        slice.omega0 = omega0;
        slice.band_edge = omega_c;
        try {
            slice.beta = pbg_beta(omega0, omega_c);
            const auto model = SpectralModel::photonic_band_gap(omega_c, slice.beta);
            const auto bs = find_bound_state(model, AtomParams{omega0});
            if (bs.exists) {
                slice.bound_energy = bs.E0;
                slice.residue = bs.Z;
            }
        } catch (const std::exception& e) {
            slice.error = e.what();
        }
        slices.push_back(std::move(slice));
    }
    return slices;
}

}  // namespace metrol
