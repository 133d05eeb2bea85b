#pragma once

#include <complex>
#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "metrol/amplitude_dynamics.hpp"
#include "metrol/bound_state.hpp"

namespace metrol {

enum class InputState { Uncorrelated, GHZ };

std::string_view to_string(InputState state) noexcept;

inline constexpr int kDefaultMaxAtoms = 40;

/// n probe atoms, total experiment duration T, and how they are prepared.
struct ProbeConfig {
    int n = 1;
    double T = 1.0;
    InputState input_state = InputState::GHZ;

    /// Throws DomainError unless 1 <= n <= max_atoms and T > 0.
    void validate(int max_atoms = kDefaultMaxAtoms) const;

    friend bool operator==(const ProbeConfig&, const ProbeConfig&) = default;
};

/// F = sum_i (dp_i)^2 / p_i. Outcomes with p_i = 0 and dp_i = 0 contribute nothing;
/// p_i = 0 with nonzero derivative throws SingularOutcomeError.
double fisher_information(std::span<const double> p, std::span<const double> dp);

/// (n T t)^{-1/2} for uncorrelated atoms, (n^2 T t)^{-1/2} for GHZ.
double ideal_precision(const ProbeConfig& config, double t);

/// Z^{-(n+1)} (n^2 T t)^{-1/2}: long-time GHZ precision carried by the bound state.
double scaling_bound(const BoundStateResult& bs, const ProbeConfig& config, double t);

/// floor(-1/ln Z); the Heisenberg scaling survives only for n well below this.
int heisenberg_window(double Z);

// ---------------------------------------------------------------------------
// omega0 sensitivity

/// Produces a trajectory for a given atomic frequency; everything else is bound in.
using AmplitudeSolver = std::function<AmplitudeTrajectory(double omega0)>;

/// A solver plus a key identifying its bound parameters, used for caching.
struct SolverSpec {
    std::string key;
    AmplitudeSolver solve;
};

/// Memoises trajectories per (solver key, omega0). Reads take a shared lock;
/// a miss is solved outside the lock and inserted under an exclusive one.
class TrajectoryCache {
public:
    std::shared_ptr<const AmplitudeTrajectory> get_or_solve(const SolverSpec& spec, double omega0);
    std::size_t size() const;

private:
    mutable std::shared_mutex mutex_;
    std::map<std::pair<std::string, double>, std::shared_ptr<const AmplitudeTrajectory>> entries_;
};

struct DerivativeOptions {
    double h_omega = 1e-4;
    /// Maximum relative disagreement between the h and h/2 central differences.
    double consistency_tolerance = 1e-3;
};

/// c(t; omega0) together with dc/domega0 on the same grid.
struct SensitivityTrajectory {
    AmplitudeTrajectory traj;
    std::vector<std::complex<double>> dc_domega0;
};

/// Central differences over re-solves at omega0 +- h and omega0 +- h/2. The two
/// estimates must agree within consistency_tolerance (max-norm, relative) or a
/// NumericalError is thrown; the returned derivative is their Richardson
/// combination (4 D(h/2) - D(h)) / 3.
SensitivityTrajectory differentiate(const SolverSpec& solver, double omega0, const DerivativeOptions& options = {},
                                    TrajectoryCache* cache = nullptr);

struct AmplitudeSample {
    double t;
    std::complex<double> c;
    std::complex<double> dc;
};

/// Sample at an arbitrary t in [0, t_max]: the carrier exp(-i omega0 t) is removed,
/// the remainder interpolated with four-point Lagrange, and the carrier restored.
/// Exact at grid nodes.
AmplitudeSample sample_at(const SensitivityTrajectory& sens, double t);

/// {n T [d Re c]^2 / (t [1 - Re^2 c])}^{-1/2}. Returns +infinity when |d Re c| < 1e-12
/// (no information at this t); throws DomainError if |Re c| >= 1 with nonzero slope.
double precision_uncorrelated(const AmplitudeSample& s, const ProbeConfig& config);
/// Same with c^n in place of c and without the factor n.
double precision_entangled(const AmplitudeSample& s, const ProbeConfig& config);
/// Dispatches on config.input_state.
double precision(const AmplitudeSample& s, const ProbeConfig& config);

/// Grid-node versions; t must be a node of the trajectory grid.
double precision_uncorrelated(const SensitivityTrajectory& sens, const ProbeConfig& config, double t);
double precision_entangled(const SensitivityTrajectory& sens, const ProbeConfig& config, double t);

// ---------------------------------------------------------------------------
// Curves and envelopes

struct PrecisionCurve {
    std::vector<double> t;
    std::vector<double> delta_omega;
    /// Strict local minima of delta_omega.
    std::vector<std::size_t> envelope;
    ProbeConfig config;
    /// Trailing-window fraction used for "minimal precision at t".
    double window_fraction = 0.1;
};

struct CurveOptions {
    /// Evaluation points per solver step.
    std::size_t refine = 8;
    /// Minimum evaluation points per fringe period 2 pi / (n omega0).
    double min_samples_per_fringe = 8.0;
    double window_fraction = 0.1;
    /// Evaluation window; defaults to (0, t_max].
    double t_begin = 0.0;
    double t_end = -1.0;
};

/// Indices of strict three-point local minima; +infinity entries never qualify.
std::vector<std::size_t> local_minima(std::span<const double> values);

/// Precision on the refined grid inside [t_begin, t_end] (t > 0) with its local minima.
/// Throws UnderResolvedError when the refined step does not resolve the fringes.
PrecisionCurve precision_curve(const SensitivityTrajectory& sens, const ProbeConfig& config,
                               const CurveOptions& options = {});

/// Convenience: differentiate the solver at omega0, then build the curve.
PrecisionCurve precision_curve(const SolverSpec& solver, double omega0, const ProbeConfig& config,
                               const CurveOptions& options = {}, const DerivativeOptions& derivative = {},
                               TrajectoryCache* cache = nullptr);

/// Smallest envelope value with t in [(1 - window_fraction) t_fixed, t_fixed];
/// NaN when no local minimum lies in the window.
double min_envelope_near(const PrecisionCurve& curve, double t_fixed);

struct ScalingRow {
    int n;
    double min_delta_omega;
    double residue_bound;
    double hl_reference;
};

/// GHZ minimal precision near t_fixed for every n in n_grid, next to the bound-state
/// scaling and the Heisenberg limit at t_fixed. bs may lack a bound state, in which
/// case residue_bound is NaN.
std::vector<ScalingRow> min_precision_vs_n(const SensitivityTrajectory& sens, const BoundStateResult& bs,
                                           double t_fixed, std::span<const int> n_grid, double T,
                                           const CurveOptions& options = {});

// ---------------------------------------------------------------------------
// Markovian optimum

struct PrecisionOptimum {
    double delta_omega;
    double t;
    double omega0;
};

/// Minimises the precision of the Markovian amplitude over encoding time and over
/// omega0 within one fringe above omega0_ref. Derivatives go through differentiate().
PrecisionOptimum optimize_markovian(const MarkovianRates& rates, const ProbeConfig& config,
                                    double omega0_ref = 10.0);

}  // namespace metrol
