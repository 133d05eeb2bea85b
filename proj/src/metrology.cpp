#include "metrol/metrology.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include <boost/math/tools/minima.hpp>
#include <fmt/format.h>

#include "metrol/errors.hpp"

namespace metrol {

using cplx = std::complex<double>;

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

int fringe_multiplicity(const ProbeConfig& config) {
    return config.input_state == InputState::GHZ ? config.n : 1;
}
}  // namespace

std::string_view to_string(InputState state) noexcept {
    return state == InputState::GHZ ? "ghz" : "uncorrelated";
}

void ProbeConfig::validate(int max_atoms) const {
    if (n < 1) throw DomainError("probe: n must be at least 1");
    if (n > max_atoms)
        throw DomainError(fmt::format("probe: n = {} exceeds the atom cap {}", n, max_atoms));
    if (!(T > 0.0) || !std::isfinite(T)) throw DomainError("probe: T must be positive");
}

double fisher_information(std::span<const double> p, std::span<const double> dp) {
    if (p.size() != dp.size()) throw std::invalid_argument("fisher_information: size mismatch");
    const double total = std::accumulate(p.begin(), p.end(), 0.0);
    if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("fisher_information: probabilities must sum to 1");
    double f = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] < 0.0) throw std::invalid_argument("fisher_information: negative probability");
        if (p[i] == 0.0) {
            if (dp[i] != 0.0) throw SingularOutcomeError("fisher_information: singular outcome (p = 0, dp != 0)");
            continue;
        }
        f += dp[i] * dp[i] / p[i];
    }
    return f;
}

double ideal_precision(const ProbeConfig& config, double t) {
    if (!(t > 0.0)) throw DomainError("ideal_precision: t must be positive");
    const double n = config.n;
    const double resource = config.input_state == InputState::GHZ ? n * n : n;
    return 1.0 / std::sqrt(resource * config.T * t);
}

double scaling_bound(const BoundStateResult& bs, const ProbeConfig& config, double t) {
    if (!bs.exists) throw DomainError("scaling_bound: no bound state");
    if (!(t > 0.0)) throw DomainError("scaling_bound: t must be positive");
    const double n = config.n;
    return std::pow(bs.Z, -(n + 1.0)) / std::sqrt(n * n * config.T * t);
}

int heisenberg_window(double Z) {
    if (!(Z > 0.0 && Z <= 1.0)) throw DomainError("heisenberg_window: Z must lie in (0, 1]");
    if (Z == 1.0) return std::numeric_limits<int>::max();
    const double w = std::floor(-1.0 / std::log(Z));
    return w > std::numeric_limits<int>::max() ? std::numeric_limits<int>::max() : static_cast<int>(w);
}

// ---------------------------------------------------------------------------

std::shared_ptr<const AmplitudeTrajectory> TrajectoryCache::get_or_solve(const SolverSpec& spec, double omega0) {
    const auto key = std::make_pair(spec.key, omega0);
    {
        std::shared_lock lock(mutex_);
        if (auto it = entries_.find(key); it != entries_.end()) return it->second;
    }
    auto solved = std::make_shared<const AmplitudeTrajectory>(spec.solve(omega0));
    std::unique_lock lock(mutex_);
    auto [it, inserted] = entries_.emplace(key, std::move(solved));
    return it->second;
}

std::size_t TrajectoryCache::size() const {
    std::shared_lock lock(mutex_);
    return entries_.size();
}

SensitivityTrajectory differentiate(const SolverSpec& solver, double omega0, const DerivativeOptions& options,
                                    TrajectoryCache* cache) {
    const double h = options.h_omega;
    if (!(h > 0.0)) throw DomainError("differentiate: h_omega must be positive");
    const auto solve = [&](double w) -> AmplitudeTrajectory {
        if (cache) return *cache->get_or_solve(solver, w);
        return solver.solve(w);
    };
    AmplitudeTrajectory base = solve(omega0);
    const auto plus = solve(omega0 + h);
    const auto minus = solve(omega0 - h);
    const auto plus_half = solve(omega0 + 0.5 * h);
    const auto minus_half = solve(omega0 - 0.5 * h);
    for (const auto* t : {&plus, &minus, &plus_half, &minus_half})
        if (!(t->grid == base.grid)) throw std::logic_error("differentiate: solver returned mismatched grids");

    const std::size_t n = base.c.size();
    std::vector<cplx> d(n);
    double gap = 0.0, scale = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const cplx coarse = (plus.c[k] - minus.c[k]) / (2.0 * h);
        const cplx fine = (plus_half.c[k] - minus_half.c[k]) / h;
        gap = std::max(gap, std::abs(coarse - fine));
        scale = std::max(scale, std::abs(fine));
        d[k] = (4.0 * fine - coarse) / 3.0;
    }
    if (scale > 0.0 && gap > options.consistency_tolerance * scale)
        throw NumericalError(fmt::format(
            "differentiate: omega0 derivative inconsistent between h and h/2 (relative gap {:.3e})", gap / scale));
    return {std::move(base), std::move(d)};
}

AmplitudeSample sample_at(const SensitivityTrajectory& sens, double t) {
    const auto& grid = sens.traj.grid;
    if (!(t >= 0.0) || t > grid.t_max() * (1.0 + 1e-12))
        throw DomainError(fmt::format("sample_at: t = {} outside [0, {}]", t, grid.t_max()));
    if (const auto k = grid.index_of(t)) return {t, sens.traj.c[*k], sens.dc_domega0[*k]};

    const double omega0 = sens.traj.atom.omega0;
    const std::size_t last = grid.intervals;
    const double x = t / grid.step;
    std::size_t lo = static_cast<std::size_t>(std::floor(x));
    const std::size_t points = std::min<std::size_t>(4, last + 1);
    lo = lo >= 1 ? lo - 1 : 0;
    lo = std::min(lo, last + 1 - points);

    cplx c{0.0, 0.0}, dc{0.0, 0.0};
    for (std::size_t i = 0; i < points; ++i) {
        double weight = 1.0;
        const double xi = static_cast<double>(lo + i);
        for (std::size_t j = 0; j < points; ++j)
            if (j != i) weight *= (x - static_cast<double>(lo + j)) / (xi - static_cast<double>(lo + j));
        const cplx demod = std::polar(1.0, omega0 * grid.at(lo + i));
        c += weight * demod * sens.traj.c[lo + i];
        dc += weight * demod * sens.dc_domega0[lo + i];
    }
    const cplx carrier = std::polar(1.0, -omega0 * t);
    return {t, carrier * c, carrier * dc};
}

namespace {
double precision_from(double t, double re, double dre, double resource_T) {
    if (!(t > 0.0)) throw DomainError("precision: t must be positive");
    if (std::abs(dre) < 1e-12) return kInf;
    if (std::abs(re) >= 1.0) throw DomainError("precision: |Re c| >= 1, measurement outcome is deterministic");
    return std::sqrt(t * (1.0 - re * re) / resource_T) / std::abs(dre);
}
}  // namespace

double precision_uncorrelated(const AmplitudeSample& s, const ProbeConfig& config) {
    return precision_from(s.t, s.c.real(), s.dc.real(), config.n * config.T);
}

double precision_entangled(const AmplitudeSample& s, const ProbeConfig& config) {
    cplx power{1.0, 0.0};
    for (int i = 1; i < config.n; ++i) power *= s.c;  // c^{n-1}
    const cplx cn = power * s.c;
    const cplx dcn = static_cast<double>(config.n) * power * s.dc;
    return precision_from(s.t, cn.real(), dcn.real(), config.T);
}

double precision(const AmplitudeSample& s, const ProbeConfig& config) {
    return config.input_state == InputState::GHZ ? precision_entangled(s, config) : precision_uncorrelated(s, config);
}

namespace {
AmplitudeSample node_sample(const SensitivityTrajectory& sens, double t) {
    const auto k = sens.traj.grid.index_of(t);
    if (!k) throw DomainError(fmt::format("precision: t = {} is not a trajectory grid node", t));
    return {t, sens.traj.c[*k], sens.dc_domega0[*k]};
}
}  // namespace

double precision_uncorrelated(const SensitivityTrajectory& sens, const ProbeConfig& config, double t) {
    return precision_uncorrelated(node_sample(sens, t), config);
}

double precision_entangled(const SensitivityTrajectory& sens, const ProbeConfig& config, double t) {
    return precision_entangled(node_sample(sens, t), config);
}

// ---------------------------------------------------------------------------

std::vector<std::size_t> local_minima(std::span<const double> values) {
    std::vector<std::size_t> out;
    for (std::size_t i = 1; i + 1 < values.size(); ++i) {
        const double v = values[i];
        if (std::isfinite(v) && v < values[i - 1] && v < values[i + 1]) out.push_back(i);
    }
    return out;
}

PrecisionCurve precision_curve(const SensitivityTrajectory& sens, const ProbeConfig& config,
                               const CurveOptions& options) {
    if (options.refine == 0) throw std::invalid_argument("precision_curve: refine must be positive");
    const auto& grid = sens.traj.grid;
    const double h_eval = grid.step / static_cast<double>(options.refine);
    const double carrier = std::abs(sens.traj.atom.omega0) * fringe_multiplicity(config);
    if (carrier > 0.0) {
        const double samples = 2.0 * std::numbers::pi / carrier / h_eval;
        if (samples < options.min_samples_per_fringe)
            throw UnderResolvedError(fmt::format(
                "precision_curve: grid under-resolves fringes ({:.2f} samples per period, need {})", samples,
                options.min_samples_per_fringe));
    }

    const double t_end = options.t_end > 0.0 ? std::min(options.t_end, grid.t_max()) : grid.t_max();
    const auto first = std::max<long long>(1, static_cast<long long>(std::ceil(options.t_begin / h_eval - 1e-9)));
    const auto last = static_cast<long long>(std::floor(t_end / h_eval + 1e-9));

    PrecisionCurve curve;
    curve.config = config;
    curve.window_fraction = options.window_fraction;
    for (long long j = first; j <= last; ++j) {
        const double t = static_cast<double>(j) * h_eval;
        curve.t.push_back(t);
        curve.delta_omega.push_back(precision(sample_at(sens, std::min(t, grid.t_max())), config));
    }
    curve.envelope = local_minima(curve.delta_omega);
    return curve;
}

PrecisionCurve precision_curve(const SolverSpec& solver, double omega0, const ProbeConfig& config,
                               const CurveOptions& options, const DerivativeOptions& derivative,
                               TrajectoryCache* cache) {
    return precision_curve(differentiate(solver, omega0, derivative, cache), config, options);
}

double min_envelope_near(const PrecisionCurve& curve, double t_fixed) {
    const double lo = (1.0 - curve.window_fraction) * t_fixed;
    double best = kNaN;
    for (const auto i : curve.envelope) {
        const double t = curve.t[i];
        if (t < lo - 1e-12 || t > t_fixed + 1e-12) continue;
        if (std::isnan(best) || curve.delta_omega[i] < best) best = curve.delta_omega[i];
    }
    return best;
}

std::vector<ScalingRow> min_precision_vs_n(const SensitivityTrajectory& sens, const BoundStateResult& bs,
                                           double t_fixed, std::span<const int> n_grid, double T,
                                           const CurveOptions& options) {
    if (!(t_fixed > 0.0) || t_fixed > sens.traj.grid.t_max() * (1.0 + 1e-12))
        throw DomainError("min_precision_vs_n: t_fixed outside the solved range");
    if (!std::is_sorted(n_grid.begin(), n_grid.end()))
        throw std::invalid_argument("min_precision_vs_n: n grid must be ascending");
    std::vector<ScalingRow> rows;
    for (const int n : n_grid) {
        const ProbeConfig config{n, T, InputState::GHZ};
        config.validate(std::max(kDefaultMaxAtoms, n));
        CurveOptions window = options;
        const double h_eval = sens.traj.grid.step / static_cast<double>(options.refine);
        window.t_begin = std::max(0.0, (1.0 - options.window_fraction) * t_fixed - 2.0 * h_eval);
        window.t_end = t_fixed + 2.0 * h_eval;
        const auto curve = precision_curve(sens, config, window);
        rows.push_back({n, min_envelope_near(curve, t_fixed), bs.exists ? scaling_bound(bs, config, t_fixed) : kNaN,
                        ideal_precision(config, t_fixed)});
    }
    return rows;
}

// ---------------------------------------------------------------------------

PrecisionOptimum optimize_markovian(const MarkovianRates& rates, const ProbeConfig& config, double omega0_ref) {
    config.validate(std::max(kDefaultMaxAtoms, config.n));
    if (!(rates.gamma_tilde > 0.0)) throw DomainError("optimize_markovian: gamma_tilde must be positive");
    const auto model = SpectralModel::flat_markovian(rates.gamma_tilde, rates.delta_omega);
    const int fringes = fringe_multiplicity(config);

    const auto precision_at = [&](double t, double omega0) {
        const TimeGrid grid = TimeGrid::uniform(t, t);
        const SolverSpec spec{"", [&](double w) { return markovian_c(AtomParams{w}, model, grid); }};
        const auto sens = differentiate(spec, omega0);
        return precision(AmplitudeSample{t, sens.traj.c[1], sens.dc_domega0[1]}, config);
    };

    constexpr int kScan = 48;
    constexpr int kBits = 40;
    struct Inner {
        double value;
        double omega0;
    };
    const auto best_over_omega = [&](double t) -> Inner {
        // |sin(n omega0 t)| repeats with period pi / (n t) in omega0.
        const double period = std::numbers::pi / (fringes * t);
        int best_i = 0;
        double best_v = kInf;
        for (int i = 0; i < kScan; ++i) {
            const double v = precision_at(t, omega0_ref + period * i / kScan);
            if (v < best_v) {
                best_v = v;
                best_i = i;
            }
        }
        const double lo = omega0_ref + period * (best_i - 1) / kScan;
        const double hi = omega0_ref + period * (best_i + 1) / kScan;
        const auto r = boost::math::tools::brent_find_minima([&](double w) { return precision_at(t, w); }, lo, hi,
                                                             kBits);
        return r.second < best_v ? Inner{r.second, r.first} : Inner{best_v, omega0_ref + period * best_i / kScan};
    };

    const double log_lo = std::log(1e-3 / (fringes * rates.gamma_tilde));
    const double log_hi = std::log(20.0 / rates.gamma_tilde);
    const auto outer = boost::math::tools::brent_find_minima(
        [&](double log_t) { return best_over_omega(std::exp(log_t)).value; }, log_lo, log_hi, kBits);
    const double t_opt = std::exp(outer.first);
    const auto inner = best_over_omega(t_opt);
    return {inner.value, t_opt, inner.omega0};
}

}  // namespace metrol
