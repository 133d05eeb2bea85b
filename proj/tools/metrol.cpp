// metrol: batch front-end for the frequency-estimation simulations.

#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "metrol/errors.hpp"
#include "metrol/experiment.hpp"
#include "metrol/log.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;

constexpr const char* kScenarioHelp =
    "Scenario: steady-state (long-time |c| and Z vs detuning), spectrum (bound-state energy), "
    "precision-evolution (precision vs encoding time), scaling (minimal precision vs n), "
    "markovian-check, asymptote-check";

struct RunArgs {
    std::string config;
    std::string scenario;
    std::string out;
    int workers = 0;
    std::vector<std::string> sets;
};

metrol::ExperimentConfig load(const std::string& file, const RunArgs* overrides) {
    auto doc = metrol::load_config_document(file);
    if (overrides) {
        if (!overrides->scenario.empty()) metrol::set_path(doc, "scenario", overrides->scenario);
        if (!overrides->out.empty()) metrol::set_path(doc, "output.directory", overrides->out);
        if (overrides->workers > 0) metrol::set_path(doc, "numerics.parallel_workers", overrides->workers);
        for (const auto& s : overrides->sets) metrol::apply_override(doc, s);
    }
    return metrol::config_from_json(doc);
}

int cmd_run(const RunArgs& args) {
    metrol::ExperimentConfig config;
    try {
        config = load(args.config, &args);
    } catch (const metrol::ConfigError& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return kExitConfig;
    }
    try {
        const auto report = metrol::run(config);
        for (const auto& f : report.failures) fmt::print(stderr, "failed: {}: {}\n", f.point, f.message);
        fmt::print("{} datasets written to {} ({:.2f} s); manifest: {}\n", report.outputs.size(),
                   config.output.directory, report.wall_seconds, report.manifest.string());
        return report.exit_code;
    } catch (const std::exception& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return kExitConfig;
    }
}

int cmd_validate(const std::string& file) {
    try {
        const auto config = load(file, nullptr);
        fmt::print("{}\n", metrol::config_to_json(config).dump(2));
        return kExitOk;
    } catch (const metrol::ConfigError& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return kExitConfig;
    }
}

int cmd_units(const metrol::SiParameters& si) {
    try {
        const auto u = metrol::convert_units(si);
        const auto& pbg = u.model.band_gap();
        fmt::print("omega_c = {:.17g}\nomega0 = {:.17g}\ndelta = {:.17g}\nbeta = {:.17g}\n", pbg.omega_c,
                   u.atom.omega0, u.delta, pbg.beta);
        return kExitOk;
    } catch (const std::exception& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return kExitConfig;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Ramsey frequency estimation under band-gap reservoirs"};
    app.set_version_flag("--version", std::string(metrol::kVersion));
    app.require_subcommand(1);
    bool quiet = false;
    bool verbose = false;
    app.add_flag("-q,--quiet", quiet, "Suppress warnings");
    app.add_flag("-v,--verbose", verbose, "Print progress information");

    RunArgs run_args;
    auto* run = app.add_subcommand("run", "Run a scenario and write its datasets and manifest");
    run->add_option("--config", run_args.config, "JSON configuration file")->required()->check(CLI::ExistingFile);
    run->add_option("--scenario", run_args.scenario, kScenarioHelp);
    run->add_option("--out", run_args.out, "Output directory (output.directory)");
    run->add_option("--workers", run_args.workers, "Worker threads (numerics.parallel_workers)")
        ->check(CLI::PositiveNumber);
    run->add_option("--set", run_args.sets, "Override a config field, e.g. --set numerics.h=5e-4");

    std::string validate_file;
    auto* validate = app.add_subcommand("validate", "Check a configuration and print it fully resolved");
    validate->add_option("--config", validate_file, "JSON configuration file")->required()->check(CLI::ExistingFile);

    metrol::SiParameters si{};
    auto* units = app.add_subcommand("units", "Convert lab frequencies to units of gamma0");
    units->add_option("--omega-c-ghz", si.omega_c_ghz, "Band edge frequency in GHz")->required();
    units->add_option("--gamma0-mhz", si.gamma0_mhz, "Vacuum emission rate in MHz")->required();
    units->add_option("--omega0-ghz", si.omega0_ghz, "Atomic frequency in GHz")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }
    metrol::log::set_level(quiet ? metrol::log::Level::Quiet
                                 : verbose ? metrol::log::Level::Info : metrol::log::Level::Warn);

    if (*run) return cmd_run(run_args);
    if (*validate) return cmd_validate(validate_file);
    return cmd_units(si);
}
