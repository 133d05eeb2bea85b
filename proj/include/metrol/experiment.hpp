#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "metrol/metrology.hpp"
#include "metrol/spectral_models.hpp"
#include "metrol/table.hpp"

namespace metrol {

inline constexpr std::string_view kVersion = "0.1.0";

enum class Scenario {
    SteadyState,         // long-time |c| and residue Z versus detuning
    Spectrum,            // bound-state energy versus omega0
    PrecisionEvolution,  // GHZ precision and its envelope versus t
    Scaling,             // minimal precision versus n at fixed t
    MarkovianCheck,      // optimum of the memoryless model
    AsymptoteCheck,      // large-|delta| plateau and decay rate
};

std::string_view to_string(Scenario scenario) noexcept;
std::optional<Scenario> parse_scenario(std::string_view name) noexcept;

enum class SolverMethod { Volterra, Analytic };

struct PhysicalConfig {
    double omega_c = 100.0;
    /// Detunings delta = omega0 - omega_c; ascending.
    std::vector<double> delta_grid;
    /// Coupling strength; derived per point from omega0 and omega_c when unset.
    std::optional<double> beta;
    /// Decay rates for the Markovian check.
    std::vector<double> gamma_tilde_grid{0.5, 1.0, 2.0};
    double delta_omega = 0.0;
};

struct ProbeSection {
    int n = 10;
    double T = 1.0;
    InputState input_state = InputState::GHZ;
    /// Atom numbers for the scaling and Markovian scenarios; empty means {n}.
    std::vector<int> n_grid;
    double t_fixed = 10.0;
};

struct NumericsConfig {
    double h = 1e-3;
    double t_max = 10.0;
    double h_omega = 1e-4;
    /// Unset: METROL_WORKERS, else 1.
    std::optional<int> parallel_workers;
    int refine = 8;
    int max_atoms = kDefaultMaxAtoms;
    SolverMethod method = SolverMethod::Volterra;
    double window_fraction = 0.1;
    /// Time window over which the long-time |c| is averaged.
    double average_begin = 8.0;
    double average_end = 10.0;
    /// Time window of the exponential fit in the asymptote check.
    double fit_begin = 0.0;
    double fit_end = 5.0;
};

struct OutputConfig {
    std::string directory = "metrol-out";
    OutputFormat format = OutputFormat::Csv;
    /// Detunings (members of delta_grid) whose full trajectories are written.
    std::vector<double> trajectory_deltas;
};

struct ExperimentConfig {
    Scenario scenario = Scenario::SteadyState;
    PhysicalConfig physical;
    ProbeSection probe;
    NumericsConfig numerics;
    OutputConfig output;
};

/// Parses and validates; throws ConfigError naming the offending field, e.g.
/// "physical.delta_grid: empty". delta_grid may be a list or {start, stop, step}.
ExperimentConfig config_from_json(const nlohmann::json& doc);
/// Every field, with defaults filled in and grids expanded.
nlohmann::json config_to_json(const ExperimentConfig& config);
/// Reads a JSON file; throws ConfigError on I/O or syntax errors.
nlohmann::json load_config_document(const std::filesystem::path& file);
/// Applies "a.b.c=value" to doc. The value is parsed as JSON when possible and
/// kept as a string otherwise.
void apply_override(nlohmann::json& doc, std::string_view assignment);
void set_path(nlohmann::json& doc, std::string_view path, nlohmann::json value);

/// Explicit setting, else METROL_WORKERS, else 1.
int resolve_workers(const ExperimentConfig& config);

struct PointFailure {
    std::string point;
    std::string message;
};

struct RunReport {
    int exit_code = 0;
    std::vector<std::string> outputs;
    std::vector<PointFailure> failures;
    double wall_seconds = 0.0;
    std::filesystem::path manifest;
};

/// Executes the scenario, writes one dataset per sub-curve and manifest.json.
/// exit_code is 0 on success and 2 when some points failed. Throws on an
/// unwritable output directory.
RunReport run(const ExperimentConfig& config);

struct SiParameters {
    double omega_c_ghz;
    double gamma0_mhz;
    double omega0_ghz;
};

struct UnitConversion {
    AtomParams atom;
    SpectralModel model;
    double delta;
};

/// Frequencies in units of gamma0, with beta derived from omega0 and omega_c.
UnitConversion convert_units(const SiParameters& si);

}  // namespace metrol
