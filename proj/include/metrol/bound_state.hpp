#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "metrol/spectral_models.hpp"

namespace metrol {

/// Discrete eigenstate of one atom plus its reservoir below the band edge.
struct BoundStateResult {
    bool exists = false;
    double E0 = std::numeric_limits<double>::quiet_NaN();
    double Z = std::numeric_limits<double>::quiet_NaN();
    /// |y(E0) - E0|
    double residual = std::numeric_limits<double>::quiet_NaN();
    AtomParams atom;
    SpectralModel model;
};

struct BoundStateOptions {
    /// Starting lower end of the bracket; defaults to min(omega0, omega_c) - 1.
    std::optional<double> initial_lower;
    /// Upper end of the bracket is band_edge - edge_offset.
    double edge_offset = 1e-9;
    double tolerance = 1e-12;
    /// Maximum distance below the band edge the bracket may grow to.
    double max_bracket = 1e6;
};

/// Solves y(E) = E below the band edge by bisection on the decreasing g(E) = y(E) - E.
/// Throws NoBracketError when no sign change is found within max_bracket.
BoundStateResult find_bound_state(const SpectralModel& model, const AtomParams& atom,
                                  const BoundStateOptions& options = {});

/// dE0/domega0 by central difference of two bound-state solves with the model
/// (and so beta) held fixed. Equals Z under that convention.
double bound_energy_derivative(const SpectralModel& model, const AtomParams& atom, double h = 1e-4);

struct SpectrumSlice {
    double omega0 = 0.0;
    double band_edge = 0.0;
    double beta = 0.0;
    std::optional<double> bound_energy;
    std::optional<double> residue;
    /// Empty when the point was solved; otherwise the failure message.
    std::string error;

    bool valid() const noexcept { return error.empty(); }
    double delta() const noexcept { return omega0 - band_edge; }
};

/// One slice per omega0 with beta recomputed via pbg_beta. Per-point failures are
/// recorded in the slice and do not abort the sweep. Grid must be nonempty and ascending.
std::vector<SpectrumSlice> spectrum_sweep(double omega_c, std::span<const double> omega0_grid);

}  // namespace metrol
