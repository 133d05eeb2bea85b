#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "metrol/bound_state.hpp"
#include "metrol/spectral_models.hpp"

namespace metrol {

/// Uniform grid t_k = k * step, k = 0..intervals.
struct TimeGrid {
    double step = 0.0;
    std::size_t intervals = 0;

    /// Throws DomainError unless t_max > 0, step > 0 and t_max/step is an integer
    /// within rounding.
    static TimeGrid uniform(double t_max, double step);

    std::size_t size() const noexcept { return intervals + 1; }
    double at(std::size_t k) const noexcept { return static_cast<double>(k) * step; }
    double t_max() const noexcept { return at(intervals); }
    /// Index of the node at time t, if t is a node within rounding.
    std::optional<std::size_t> index_of(double t) const noexcept;

    friend bool operator==(const TimeGrid&, const TimeGrid&) = default;
};

enum class AmplitudeMethod { Volterra, AnalyticPBG, Markovian, BoundStateAsymptotic };

std::string_view to_string(AmplitudeMethod method) noexcept;

/// Per-root sign choice in the three-root closed form.
///
/// sign[j] = +1 selects x_j [1 + erf(x_j sqrt(beta t))]; -1 selects
/// x_j [1 - erf(x_j sqrt(beta t))].
struct BranchSet {
    std::array<int, 3> sign{1, 1, 1};

    friend bool operator==(const BranchSet&, const BranchSet&) = default;
};

/// Decoherence amplitude c(t) sampled on a uniform grid, with provenance.
struct AmplitudeTrajectory {
    TimeGrid grid;
    std::vector<std::complex<double>> c;
    AmplitudeMethod method;
    AtomParams atom;
    SpectralModel model;
    /// Set for AnalyticPBG trajectories.
    std::optional<BranchSet> branches;
};

/// c(t) from c' + i omega0 c + int_0^t f(t - s) c(s) ds = 0, c(0) = 1.
///
/// The equation is integrated in the frame rotating at omega0, where the kernel
/// becomes kappa s^{-1/2} exp(i delta s). Memory integrals use product-integration
/// weights (exact moments of s^{-1/2} against the piecewise-linear interpolant) and
/// the time step is the trapezoidal rule, solved implicitly for the new node.
/// Cost is O(N^2) in the number of steps.
struct VolterraOptions {
    /// Re-solve at h/2 and h/4 and throw ResolutionError if the error ratio is below min_ratio.
    bool verify_convergence = false;
    double min_ratio = 2.5;
};

AmplitudeTrajectory solve_volterra(const SpectralModel& model, const AtomParams& atom, double t_max,
                                   double step, const VolterraOptions& options = {});

/// max|c_h - c_{h/2}| / max|c_{h/2} - c_{h/4}| over the coarse nodes. Returns
/// +infinity when both solutions already agree to round-off.
double volterra_convergence_ratio(const SpectralModel& model, const AtomParams& atom, double t_max,
                                  double step);

/// Roots of x^3 + i (delta/beta) x - exp(3 i pi/4), the monic form of
/// (beta x^2 + i delta) sqrt(beta) x - (i beta)^{3/2} = 0, via companion-matrix
/// eigenvalues polished by Newton steps.
std::array<std::complex<double>, 3> pbg_cubic_roots(double beta, double delta);

/// Closed-form band-gap amplitude
///   c(t) = exp(-i omega_c t) sum_j a_j x_j exp(beta x_j^2 t) erfc(-x_j sqrt(beta t)),
///   a_j = x_j / prod_{k != j}(x_j - x_k),
/// each term evaluated through the Faddeeva function. Throws DegenerateRootsError
/// when two roots coincide within 1e-10.
AmplitudeTrajectory analytic_pbg(const AtomParams& atom, const SpectralModel& model,
                                 const TimeGrid& grid, const BranchSet& branches = {});

/// The closed form above with roots and coefficients computed once, for evaluation
/// at arbitrary times.
class PbgClosedForm {
public:
    PbgClosedForm(const AtomParams& atom, const SpectralModel& model, const BranchSet& branches = {});

    std::complex<double> operator()(double t) const;

    const std::array<std::complex<double>, 3>& roots() const noexcept { return roots_; }
    const BranchSet& branches() const noexcept { return branches_; }

private:
    double omega_c_;
    double sqrt_beta_;
    BranchSet branches_;
    std::array<std::complex<double>, 3> roots_;
    std::array<std::complex<double>, 3> weights_;  // a_j x_j
};

inline constexpr std::array<double, 3> kDefaultBranchProbeTimes{0.1, 1.0, 5.0};

/// Picks the branch set minimising max |c_analytic - c_oracle| over probe_times, which
/// must be nodes of the oracle grid.
BranchSet select_branches(const AtomParams& atom, const SpectralModel& model,
                          const AmplitudeTrajectory& oracle,
                          std::span<const double> probe_times = kDefaultBranchProbeTimes);

/// Markovian decay rate gamma_tilde and Lamb shift of the model at the atom frequency.
/// For the band gap this is 2 pi J(omega0) = 2 (beta^3/delta)^{1/2} with zero shift,
/// which requires delta > 0.
struct MarkovianRates {
    double gamma_tilde;
    double delta_omega;
};
MarkovianRates markovian_rates(const AtomParams& atom, const SpectralModel& model);

/// c(t) = exp[-(gamma_tilde/2 + i(omega0 + delta_omega)) t].
AmplitudeTrajectory markovian_c(const AtomParams& atom, const SpectralModel& model,
                                const TimeGrid& grid);

/// c(t) = Z exp(-i E0 t). Throws DomainError when the bound state does not exist.
AmplitudeTrajectory bound_state_asymptote(const BoundStateResult& bs, const TimeGrid& grid);

/// |[1 + (-beta/delta)^{3/2}/2]^{-1} exp(-(beta^3/delta)^{1/2} t)| with principal
/// branches. For delta < 0 the exponent is imaginary and the plateau remains.
/// Warns when |delta| < 10 beta; throws DomainError for delta = 0.
double large_detuning_asymptote(const AtomParams& atom, const SpectralModel& model, double t);

struct RateSeries {
    std::vector<double> gamma;
    std::vector<double> omega;
};

/// gamma(t) + i omega(t) = -2 c'(t)/c(t). The derivative is taken on the
/// demodulated amplitude exp(i omega0 t) c(t) with second-order differences
/// (central inside, three-point one-sided at the ends). Throws
/// AmplitudeVanishesError if |c| <= 1e-8 anywhere.
RateSeries decoherence_rates(const AmplitudeTrajectory& traj);

/// Kraus operators in the basis ordered (|e>, |g>):
/// K0 = diag(c, 1), K1 = sqrt(1 - |c|^2) |g><e|.
struct KrausPair {
    Eigen::Matrix2cd k0;
    Eigen::Matrix2cd k1;
};

inline constexpr int kExcited = 0;
inline constexpr int kGround = 1;

/// Throws DomainError when |c| > 1 + 1e-9.
KrausPair kraus_channel(std::complex<double> c);

Eigen::Matrix2cd apply_channel(const KrausPair& kraus, const Eigen::Matrix2cd& rho);

/// CSV with header "t,re_c,im_c,abs_c" and 17 significant digits.
void write_trajectory_csv(const AmplitudeTrajectory& traj, std::ostream& out);

}  // namespace metrol
