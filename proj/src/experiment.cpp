#include "metrol/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <set>

#include <fmt/format.h>

#include "metrol/amplitude_dynamics.hpp"
#include "metrol/bound_state.hpp"
#include "metrol/errors.hpp"
#include "metrol/log.hpp"
#include "metrol/parallel.hpp"

namespace metrol {

using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

constexpr std::pair<Scenario, std::string_view> kScenarioNames[] = {
    {Scenario::SteadyState, "steady-state"},
    {Scenario::Spectrum, "spectrum"},
    {Scenario::PrecisionEvolution, "precision-evolution"},
    {Scenario::Scaling, "scaling"},
    {Scenario::MarkovianCheck, "markovian-check"},
    {Scenario::AsymptoteCheck, "asymptote-check"},
};

}  // namespace

std::string_view to_string(Scenario scenario) noexcept {
    for (const auto& [s, name] : kScenarioNames)
        if (s == scenario) return name;
    return "unknown";
}

std::optional<Scenario> parse_scenario(std::string_view name) noexcept {
    for (const auto& [s, n] : kScenarioNames)
        if (n == name) return s;
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Config parsing

namespace {

[[noreturn]] void fail(std::string_view path, std::string_view message) {
    throw ConfigError(fmt::format("{}: {}", path, message));
}

/// Reads fields from one JSON object and rejects keys nobody asked for.
class Section {
public:
    Section(const json& doc, std::string path) : path_(std::move(path)) {
        if (doc.is_null()) return;
        if (!doc.is_object()) fail(path_, "expected an object");
        doc_ = &doc;
    }

    std::string field(std::string_view key) const { return path_.empty() ? std::string(key) : path_ + "." + std::string(key); }

    const json* find(std::string_view key) {
        seen_.insert(std::string(key));
        if (!doc_) return nullptr;
        const auto it = doc_->find(std::string(key));
        return it == doc_->end() || it->is_null() ? nullptr : &*it;
    }

    double number(std::string_view key, double fallback) {
        const json* v = find(key);
        if (!v) return fallback;
        if (!v->is_number()) fail(field(key), "expected a number");
        return v->get<double>();
    }

    std::optional<double> optional_number(std::string_view key) {
        const json* v = find(key);
        if (!v) return std::nullopt;
        if (v->is_string() && v->get<std::string>() == "auto") return std::nullopt;
        if (!v->is_number()) fail(field(key), "expected a number or \"auto\"");
        return v->get<double>();
    }

    int integer(std::string_view key, int fallback) {
        const json* v = find(key);
        if (!v) return fallback;
        if (!v->is_number_integer()) fail(field(key), "expected an integer");
        return v->get<int>();
    }

    std::optional<int> optional_integer(std::string_view key) {
        const json* v = find(key);
        if (!v) return std::nullopt;
        if (!v->is_number_integer()) fail(field(key), "expected an integer");
        return v->get<int>();
    }

    std::string text(std::string_view key, std::string fallback) {
        const json* v = find(key);
        if (!v) return fallback;
        if (!v->is_string()) fail(field(key), "expected a string");
        return v->get<std::string>();
    }

    /// A list of numbers or a {start, stop, step} range (stop inclusive).
    std::vector<double> grid(std::string_view key, std::vector<double> fallback) {
        const json* v = find(key);
        if (!v) return fallback;
        const std::string name = field(key);
        if (v->is_array()) {
            std::vector<double> out;
            for (const auto& x : *v) {
                if (!x.is_number()) fail(name, "expected a list of numbers");
                out.push_back(x.get<double>());
            }
            return out;
        }
        if (v->is_number()) return {v->get<double>()};
        if (!v->is_object()) fail(name, "expected a list or {start, stop, step}");
        Section range(*v, name);
        const double start = range.number("start", kNaN);
        const double stop = range.number("stop", kNaN);
        const double step = range.number("step", kNaN);
        range.finish();
        if (!std::isfinite(start) || !std::isfinite(stop)) fail(name, "range needs start and stop");
        if (!(step > 0.0)) fail(name, "range step must be positive");
        if (stop < start) fail(name, "range stop is below start");
        const auto count = static_cast<std::size_t>(std::floor((stop - start) / step + 1e-9)) + 1;
        if (count > 1000000) fail(name, "range has too many points");
        std::vector<double> out(count);
        for (std::size_t i = 0; i < count; ++i) out[i] = start + static_cast<double>(i) * step;
        return out;
    }

    std::vector<int> int_grid(std::string_view key) {
        const json* v = find(key);
        if (!v) return {};
        const std::string name = field(key);
        std::vector<int> out;
        if (v->is_object()) {
            Section range(*v, name);
            const int start = range.integer("start", 0);
            const int stop = range.integer("stop", -1);
            const int step = range.integer("step", 1);
            range.finish();
            if (step <= 0) fail(name, "range step must be positive");
            for (int n = start; n <= stop; n += step) out.push_back(n);
            return out;
        }
        if (!v->is_array()) fail(name, "expected a list of integers or {start, stop, step}");
        for (const auto& x : *v) {
            if (!x.is_number_integer()) fail(name, "expected a list of integers");
            out.push_back(x.get<int>());
        }
        return out;
    }

    Section child(std::string_view key) {
        const json* v = find(key);
        static const json null_doc;
        return Section(v ? *v : null_doc, field(key));
    }

    void finish() const {
        if (!doc_) return;
        for (const auto& [key, value] : doc_->items())
            if (!seen_.count(key)) fail(field(key), "unknown field");
    }

private:
    const json* doc_ = nullptr;
    std::string path_;
    std::set<std::string> seen_;
};

bool ascending(const std::vector<double>& v) {
    return std::adjacent_find(v.begin(), v.end(), [](double a, double b) { return !(a < b); }) == v.end();
}

bool contains(const std::vector<double>& grid, double x) {
    return std::any_of(grid.begin(), grid.end(), [&](double g) { return std::abs(g - x) <= 1e-9 * std::max(1.0, std::abs(x)); });
}

bool uses_delta_grid(Scenario s) { return s != Scenario::MarkovianCheck; }

void validate(const ExperimentConfig& c) {
    const auto& ph = c.physical;
    const auto& nu = c.numerics;
    const auto& pr = c.probe;
    if (!(ph.omega_c > 0.0) || !std::isfinite(ph.omega_c)) fail("physical.omega_c", "must be positive");
    if (ph.beta && !(*ph.beta > 0.0)) fail("physical.beta", "must be positive");
    if (uses_delta_grid(c.scenario)) {
        if (ph.delta_grid.empty()) fail("physical.delta_grid", "empty");
        if (!ascending(ph.delta_grid)) fail("physical.delta_grid", "must be strictly ascending");
        for (const double d : ph.delta_grid) {
            if (!std::isfinite(d)) fail("physical.delta_grid", "non-finite entry");
            if (!ph.beta && !(ph.omega_c + d > 0.0))
                fail("physical.delta_grid",
                     fmt::format("omega0 = omega_c + delta = {} must be positive when beta is derived", ph.omega_c + d));
        }
    }
    if (c.scenario == Scenario::MarkovianCheck) {
        if (ph.gamma_tilde_grid.empty()) fail("physical.gamma_tilde_grid", "empty");
        for (const double g : ph.gamma_tilde_grid)
            if (!(g > 0.0)) fail("physical.gamma_tilde_grid", "entries must be positive");
    }

    if (!(nu.h > 0.0)) fail("numerics.h", "must be positive");
    if (!(nu.t_max > 0.0)) fail("numerics.t_max", "must be positive");
    try {
        (void)TimeGrid::uniform(nu.t_max, nu.h);
    } catch (const DomainError&) {
        fail("numerics.t_max", "must be an integer multiple of numerics.h");
    }
    if (!(nu.h_omega > 0.0)) fail("numerics.h_omega", "must be positive");
    if (nu.parallel_workers && *nu.parallel_workers < 1) fail("numerics.parallel_workers", "must be at least 1");
    if (nu.refine < 1) fail("numerics.refine", "must be at least 1");
    if (nu.max_atoms < 1) fail("numerics.max_atoms", "must be at least 1");
    if (!(nu.window_fraction > 0.0 && nu.window_fraction < 1.0)) fail("numerics.window_fraction", "must lie in (0, 1)");
    if (!(nu.average_begin >= 0.0 && nu.average_begin < nu.average_end && nu.average_end <= nu.t_max))
        fail("numerics.average_begin", "need 0 <= average_begin < average_end <= t_max");
    if (!(nu.fit_begin >= 0.0 && nu.fit_begin < nu.fit_end && nu.fit_end <= nu.t_max))
        fail("numerics.fit_begin", "need 0 <= fit_begin < fit_end <= t_max");

    const auto check_n = [&](int n, std::string_view path) {
        if (n < 1) fail(path, "atom number must be at least 1");
        if (n > nu.max_atoms) fail(path, fmt::format("n = {} exceeds numerics.max_atoms = {}", n, nu.max_atoms));
    };
    check_n(pr.n, "probe.n");
    for (const int n : pr.n_grid) check_n(n, "probe.n_grid");
    if (!std::is_sorted(pr.n_grid.begin(), pr.n_grid.end()) ||
        std::adjacent_find(pr.n_grid.begin(), pr.n_grid.end()) != pr.n_grid.end())
        fail("probe.n_grid", "must be strictly ascending");
    if (!(pr.T > 0.0)) fail("probe.T", "must be positive");
    if (!(pr.t_fixed > 0.0)) fail("probe.t_fixed", "must be positive");
    if (c.scenario == Scenario::Scaling && pr.t_fixed > nu.t_max) fail("probe.t_fixed", "must not exceed numerics.t_max");

    if (c.output.directory.empty()) fail("output.directory", "empty");
    for (const double d : c.output.trajectory_deltas)
        if (!contains(ph.delta_grid, d)) fail("output.trajectory_deltas", fmt::format("{} is not in physical.delta_grid", d));
}

}  // namespace

ExperimentConfig config_from_json(const json& doc) {
    ExperimentConfig c;
    Section root(doc, "");

    const std::string scenario = root.text("scenario", std::string(to_string(c.scenario)));
    const auto parsed = parse_scenario(scenario);
    if (!parsed) fail("scenario", fmt::format("unknown scenario '{}'", scenario));
    c.scenario = *parsed;

    {
        Section s = root.child("physical");
        c.physical.omega_c = s.number("omega_c", c.physical.omega_c);
        c.physical.delta_grid = s.grid("delta_grid", {});
        c.physical.beta = s.optional_number("beta");
        c.physical.gamma_tilde_grid = s.grid("gamma_tilde_grid", c.physical.gamma_tilde_grid);
        c.physical.delta_omega = s.number("delta_omega", c.physical.delta_omega);
        s.finish();
    }
    {
        Section s = root.child("probe");
        c.probe.n = s.integer("n", c.probe.n);
        c.probe.T = s.number("T", c.probe.T);
        const std::string state = s.text("input_state", std::string(to_string(c.probe.input_state)));
        if (state == "ghz")
            c.probe.input_state = InputState::GHZ;
        else if (state == "uncorrelated")
            c.probe.input_state = InputState::Uncorrelated;
        else
            fail("probe.input_state", fmt::format("expected 'ghz' or 'uncorrelated', got '{}'", state));
        c.probe.n_grid = s.int_grid("n_grid");
        c.probe.t_fixed = s.number("t_fixed", c.probe.t_fixed);
        s.finish();
    }
    {
        Section s = root.child("numerics");
        auto& nu = c.numerics;
        nu.h = s.number("h", nu.h);
        nu.t_max = s.number("t_max", nu.t_max);
        nu.h_omega = s.number("h_omega", nu.h_omega);
        nu.parallel_workers = s.optional_integer("parallel_workers");
        nu.refine = s.integer("refine", nu.refine);
        nu.max_atoms = s.integer("max_atoms", nu.max_atoms);
        const std::string method = s.text("method", "volterra");
        if (method == "volterra")
            nu.method = SolverMethod::Volterra;
        else if (method == "analytic")
            nu.method = SolverMethod::Analytic;
        else
            fail("numerics.method", fmt::format("expected 'volterra' or 'analytic', got '{}'", method));
        nu.window_fraction = s.number("window_fraction", nu.window_fraction);
        // The averaging window follows t_max unless given explicitly.
        nu.average_begin = s.number("average_begin", 0.8 * nu.t_max);
        nu.average_end = s.number("average_end", nu.t_max);
        nu.fit_begin = s.number("fit_begin", nu.fit_begin);
        nu.fit_end = s.number("fit_end", std::min(nu.fit_end, nu.t_max));
        s.finish();
    }
    {
        Section s = root.child("output");
        c.output.directory = s.text("directory", c.output.directory);
        const std::string format = s.text("format", "csv");
        if (format == "csv")
            c.output.format = OutputFormat::Csv;
        else if (format == "json")
            c.output.format = OutputFormat::Json;
        else
            fail("output.format", fmt::format("expected 'csv' or 'json', got '{}'", format));
        c.output.trajectory_deltas = s.grid("trajectory_deltas", {});
        s.finish();
    }
    root.finish();

    validate(c);
    if (c.numerics.max_atoms > kDefaultMaxAtoms)
        log::warn(fmt::format("numerics.max_atoms = {} is above {}; c^n may underflow and Z^-(n+1) overflow",
                              c.numerics.max_atoms, kDefaultMaxAtoms));
    return c;
}

json config_to_json(const ExperimentConfig& c) {
    json doc;
    doc["scenario"] = to_string(c.scenario);
    doc["physical"] = {
        {"omega_c", c.physical.omega_c},
        {"delta_grid", c.physical.delta_grid},
        {"beta", c.physical.beta ? json(*c.physical.beta) : json("auto")},
        {"gamma_tilde_grid", c.physical.gamma_tilde_grid},
        {"delta_omega", c.physical.delta_omega},
    };
    doc["probe"] = {
        {"n", c.probe.n},
        {"T", c.probe.T},
        {"input_state", to_string(c.probe.input_state)},
        {"n_grid", c.probe.n_grid},
        {"t_fixed", c.probe.t_fixed},
    };
    const auto& nu = c.numerics;
    doc["numerics"] = {
        {"h", nu.h},
        {"t_max", nu.t_max},
        {"h_omega", nu.h_omega},
        {"parallel_workers", resolve_workers(c)},
        {"refine", nu.refine},
        {"max_atoms", nu.max_atoms},
        {"method", nu.method == SolverMethod::Volterra ? "volterra" : "analytic"},
        {"window_fraction", nu.window_fraction},
        {"average_begin", nu.average_begin},
        {"average_end", nu.average_end},
        {"fit_begin", nu.fit_begin},
        {"fit_end", nu.fit_end},
    };
    doc["output"] = {
        {"directory", c.output.directory},
        {"format", c.output.format == OutputFormat::Csv ? "csv" : "json"},
        {"trajectory_deltas", c.output.trajectory_deltas},
    };
    return doc;
}

json load_config_document(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw ConfigError(fmt::format("config: cannot open {}", file.string()));
    try {
        return json::parse(in, nullptr, true, /*ignore_comments=*/true);
    } catch (const json::parse_error& e) {
        throw ConfigError(fmt::format("config: {}: {}", file.string(), e.what()));
    }
}

void set_path(json& doc, std::string_view path, json value) {
    if (path.empty()) throw ConfigError("override: empty path");
    json* node = &doc;
    std::size_t pos = 0;
    while (true) {
        const auto dot = path.find('.', pos);
        const std::string key(path.substr(pos, dot == std::string_view::npos ? std::string_view::npos : dot - pos));
        if (key.empty()) throw ConfigError(fmt::format("override: malformed path '{}'", path));
        if (!node->is_object()) {
            if (!node->is_null()) throw ConfigError(fmt::format("override: '{}' crosses a non-object", path));
            *node = json::object();
        }
        if (dot == std::string_view::npos) {
            (*node)[key] = std::move(value);
            return;
        }
        node = &(*node)[key];
        pos = dot + 1;
    }
}

void apply_override(json& doc, std::string_view assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string_view::npos) throw ConfigError(fmt::format("override: expected path=value, got '{}'", assignment));
    const std::string text(assignment.substr(eq + 1));
    json value = json::parse(text, nullptr, /*allow_exceptions=*/false);
    if (value.is_discarded()) value = text;
    set_path(doc, assignment.substr(0, eq), std::move(value));
}

int resolve_workers(const ExperimentConfig& config) {
    if (config.numerics.parallel_workers) return *config.numerics.parallel_workers;
    if (const char* env = std::getenv("METROL_WORKERS")) {
        char* end = nullptr;
        const long k = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && k >= 1 && k <= 1024) return static_cast<int>(k);
        log::warn(fmt::format("ignoring METROL_WORKERS='{}'", env));
    }
    return 1;
}

// ---------------------------------------------------------------------------
// Scenarios

namespace {

std::string delta_label(double delta) { return fmt::format("{:g}", delta); }

std::string branch_label(const BranchSet& b) {
    std::string s;
    for (const int x : b.sign) s += x > 0 ? '+' : '-';
    return s;
}

/// Everything a worker needs for one detuning.
struct DeltaPoint {
    double delta;
    AtomParams atom;
    SpectralModel model;
};

DeltaPoint make_point(const ExperimentConfig& c, double delta) {
    const double omega0 = c.physical.omega_c + delta;
    const double beta = c.physical.beta ? *c.physical.beta : pbg_beta(omega0, c.physical.omega_c);
    return {delta, AtomParams{omega0}, SpectralModel::photonic_band_gap(c.physical.omega_c, beta)};
}

std::vector<double> probe_times(double t_max) {
    std::vector<double> out;
    for (const double t : kDefaultBranchProbeTimes)
        if (t <= t_max) out.push_back(t);
    if (out.empty()) out.push_back(t_max);
    return out;
}

/// Picks the closed-form branch set against a Volterra solution up to the last probe time.
BranchSet branches_for(const DeltaPoint& p, const NumericsConfig& nu) {
    const auto times = probe_times(nu.t_max);
    const double last = times.back();
    const double t_end = TimeGrid::uniform(nu.t_max, nu.h).index_of(last) ? last : nu.t_max;
    const auto oracle = solve_volterra(p.model, p.atom, t_end, nu.h);
    return select_branches(p.atom, p.model, oracle, probe_times(t_end));
}

SolverSpec solver_for(const DeltaPoint& p, const NumericsConfig& nu, std::optional<BranchSet> branches) {
    const auto& pbg = p.model.band_gap();
    const SpectralModel model = p.model;
    const double t_max = nu.t_max;
    const double h = nu.h;
    if (nu.method == SolverMethod::Analytic) {
        const BranchSet b = branches.value_or(BranchSet{});
        return {fmt::format("analytic:{:.17g}:{:.17g}:{:.17g}:{:.17g}:{}", pbg.omega_c, pbg.beta, t_max, h, branch_label(b)),
                [model, t_max, h, b](double omega0) {
                    return analytic_pbg(AtomParams{omega0}, model, TimeGrid::uniform(t_max, h), b);
                }};
    }
    return {fmt::format("volterra:{:.17g}:{:.17g}:{:.17g}:{:.17g}", pbg.omega_c, pbg.beta, t_max, h),
            [model, t_max, h](double omega0) { return solve_volterra(model, AtomParams{omega0}, t_max, h); }};
}

Table trajectory_table(const AmplitudeTrajectory& traj) {
    Table t{{"t", "re_c", "im_c", "abs_c"}, {}};
    t.rows.reserve(traj.c.size());
    for (std::size_t k = 0; k < traj.c.size(); ++k)
        t.add_row({traj.grid.at(k), traj.c[k].real(), traj.c[k].imag(), std::abs(traj.c[k])});
    return t;
}

double mean_abs(const AmplitudeTrajectory& traj, double begin, double end) {
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t k = 0; k < traj.c.size(); ++k) {
        const double t = traj.grid.at(k);
        if (t >= begin - 1e-12 && t <= end + 1e-12) {
            sum += std::abs(traj.c[k]);
            ++count;
        }
    }
    return count ? sum / static_cast<double>(count) : kNaN;
}

/// Collects datasets, failures and metadata while a scenario runs.
class RunContext {
public:
    RunContext(const ExperimentConfig& config, std::filesystem::path dir)
        : config(config), workers(resolve_workers(config)), dir_(std::move(dir)) {}

    const ExperimentConfig& config;
    const int workers;
    json metadata = json::object();

    void write(const Table& table, const std::string& stem) {
        outputs.push_back(write_table(table, dir_, stem, config.output.format));
    }

    /// Runs fn over every index; exceptions become per-point failures labelled by label(i).
    template <class Fn, class Label>
    std::vector<bool> for_each_point(std::size_t count, Fn&& fn, Label&& label) {
        const auto errors = parallel_for(count, workers, fn);
        std::vector<bool> ok(count, true);
        for (std::size_t i = 0; i < count; ++i) {
            if (!errors[i]) continue;
            ok[i] = false;
            std::string message;
            try {
                std::rethrow_exception(errors[i]);
            } catch (const std::exception& e) {
                message = e.what();
            } catch (...) {
                message = "unknown error";
            }
            failures.push_back({label(i), message});
        }
        return ok;
    }

    std::vector<std::string> outputs;
    std::vector<PointFailure> failures;

private:
    std::filesystem::path dir_;
};

std::string delta_point_label(const std::vector<double>& grid, std::size_t i) {
    return "delta=" + delta_label(grid[i]);
}

void run_steady_state(RunContext& ctx) {
    const auto& c = ctx.config;
    const auto& grid = c.physical.delta_grid;
    struct Row {
        DeltaPoint point;
        BoundStateResult bs;
        double mean_volterra = kNaN;
        double mean_analytic = kNaN;
        double linf = kNaN;
        double max_abs = kNaN;
        std::optional<BranchSet> branches;
        std::string analytic_note;
        std::optional<AmplitudeTrajectory> traj;
    };
    std::vector<std::optional<Row>> rows(grid.size());

    const auto ok = ctx.for_each_point(
        grid.size(),
        [&](std::size_t i) {
            const auto point = make_point(c, grid[i]);
            Row& r = rows[i].emplace(Row{point, find_bound_state(point.model, point.atom)});
            auto traj = solve_volterra(r.point.model, r.point.atom, c.numerics.t_max, c.numerics.h);
            r.mean_volterra = mean_abs(traj, c.numerics.average_begin, c.numerics.average_end);
            r.max_abs = 0.0;
            for (const auto& x : traj.c) r.max_abs = std::max(r.max_abs, std::abs(x));
            try {
                r.branches = select_branches(r.point.atom, r.point.model, traj, probe_times(c.numerics.t_max));
                const auto analytic = analytic_pbg(r.point.atom, r.point.model, traj.grid, *r.branches);
                r.mean_analytic = mean_abs(analytic, c.numerics.average_begin, c.numerics.average_end);
                r.linf = 0.0;
                for (std::size_t k = 0; k < traj.c.size(); ++k)
                    r.linf = std::max(r.linf, std::abs(analytic.c[k] - traj.c[k]));
            } catch (const DegenerateRootsError& e) {
                r.branches.reset();
                r.analytic_note = e.what();
            }
            if (contains(c.output.trajectory_deltas, grid[i])) r.traj = std::move(traj);
        },
        [&](std::size_t i) { return delta_point_label(grid, i); });

    Table table{{"delta", "omega0", "beta", "E0", "Z", "abs_c_long_time", "abs_c_long_time_analytic",
                 "linf_analytic_vs_volterra", "max_abs_c"},
                {}};
    json branches = json::array();
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (!ok[i]) continue;
        const Row& r = *rows[i];
        table.add_row({r.point.delta, r.point.atom.omega0, r.point.model.band_gap().beta, r.bs.E0, r.bs.Z,
                       r.mean_volterra, r.mean_analytic, r.linf, r.max_abs});
        json b = {{"delta", r.point.delta}};
        if (r.branches)
            b["signs"] = branch_label(*r.branches);
        else
            b["note"] = r.analytic_note;
        branches.push_back(std::move(b));
        if (r.traj) ctx.write(trajectory_table(*r.traj), "trajectory_delta_" + delta_label(r.point.delta));
    }
    ctx.write(table, "steady_state");
    ctx.metadata["branch_choices"] = std::move(branches);
    ctx.metadata["average_window"] = {c.numerics.average_begin, c.numerics.average_end};
}

void run_spectrum(RunContext& ctx) {
    const auto& c = ctx.config;
    const auto& grid = c.physical.delta_grid;
    std::vector<std::optional<BoundStateResult>> results(grid.size());
    const auto ok = ctx.for_each_point(
        grid.size(),
        [&](std::size_t i) {
            const auto p = make_point(c, grid[i]);
            results[i] = find_bound_state(p.model, p.atom);
        },
        [&](std::size_t i) { return delta_point_label(grid, i); });

    Table table{{"omega0", "delta", "E0", "Z"}, {}};
    for (std::size_t i = 0; i < grid.size(); ++i)
        if (ok[i]) table.add_row({results[i]->atom.omega0, grid[i], results[i]->E0, results[i]->Z});
    ctx.write(table, "spectrum");
    ctx.metadata["band_edge"] = c.physical.omega_c;
}

/// Differentiated trajectory for one detuning, plus the branch set when the
/// closed form is used.
struct SensitivityPoint {
    DeltaPoint point;
    BoundStateResult bs;
    std::optional<BranchSet> branches;
    std::optional<SensitivityTrajectory> sens;
};

SensitivityPoint sensitivity_point(const ExperimentConfig& c, double delta, TrajectoryCache& cache) {
    const auto point = make_point(c, delta);
    SensitivityPoint s{point, find_bound_state(point.model, point.atom), std::nullopt, std::nullopt};
    if (c.numerics.method == SolverMethod::Analytic) s.branches = branches_for(s.point, c.numerics);
    const auto solver = solver_for(s.point, c.numerics, s.branches);
    s.sens = differentiate(solver, s.point.atom.omega0, DerivativeOptions{.h_omega = c.numerics.h_omega}, &cache);
    return s;
}

json branch_metadata(const std::vector<std::optional<SensitivityPoint>>& points, const std::vector<bool>& ok) {
    json out = json::array();
    for (std::size_t i = 0; i < points.size(); ++i)
        if (ok[i] && points[i]->branches)
            out.push_back({{"delta", points[i]->point.delta}, {"signs", branch_label(*points[i]->branches)}});
    return out;
}

void run_precision_evolution(RunContext& ctx) {
    const auto& c = ctx.config;
    const auto& grid = c.physical.delta_grid;
    const ProbeConfig probe{c.probe.n, c.probe.T, c.probe.input_state};
    const CurveOptions options{.refine = static_cast<std::size_t>(c.numerics.refine),
                               .window_fraction = c.numerics.window_fraction};
    TrajectoryCache cache;
    std::vector<std::optional<SensitivityPoint>> points(grid.size());
    std::vector<PrecisionCurve> curves(grid.size());

    const auto ok = ctx.for_each_point(
        grid.size(),
        [&](std::size_t i) {
            points[i] = sensitivity_point(c, grid[i], cache);
            curves[i] = precision_curve(*points[i]->sens, probe, options);
        },
        [&](std::size_t i) { return delta_point_label(grid, i); });

    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (!ok[i]) continue;
        const auto& curve = curves[i];
        std::vector<char> is_min(curve.t.size(), 0);
        for (const auto k : curve.envelope) is_min[k] = 1;

        Table full{{"t", "delta_omega", "is_envelope_min"}, {}};
        full.rows.reserve(curve.t.size());
        for (std::size_t k = 0; k < curve.t.size(); ++k)
            full.add_row({curve.t[k], curve.delta_omega[k], static_cast<long long>(is_min[k])});

        Table env{{"t", "delta_omega", "residue_bound", "hl_reference"}, {}};
        const auto& bs = points[i]->bs;
        for (const auto k : curve.envelope) {
            const double t = curve.t[k];
            const ProbeConfig ghz{probe.n, probe.T, InputState::GHZ};
            env.add_row({t, curve.delta_omega[k], bs.exists ? scaling_bound(bs, ghz, t) : kNaN, ideal_precision(ghz, t)});
        }
        const std::string label = delta_label(grid[i]);
        ctx.write(full, "precision_delta_" + label);
        ctx.write(env, "envelope_delta_" + label);
    }
    ctx.metadata["window_fraction"] = c.numerics.window_fraction;
    ctx.metadata["branch_choices"] = branch_metadata(points, ok);
}

void run_scaling(RunContext& ctx) {
    const auto& c = ctx.config;
    const auto& grid = c.physical.delta_grid;
    const std::vector<int> n_grid = c.probe.n_grid.empty() ? std::vector<int>{c.probe.n} : c.probe.n_grid;
    const CurveOptions options{.refine = static_cast<std::size_t>(c.numerics.refine),
                               .window_fraction = c.numerics.window_fraction,
                               .t_begin = (1.0 - c.numerics.window_fraction) * c.probe.t_fixed,
                               .t_end = c.probe.t_fixed};
    TrajectoryCache cache;
    std::vector<std::optional<SensitivityPoint>> points(grid.size());
    std::vector<std::vector<ScalingRow>> rows(grid.size());

    const auto ok = ctx.for_each_point(
        grid.size(),
        [&](std::size_t i) {
            points[i] = sensitivity_point(c, grid[i], cache);
            rows[i] = min_precision_vs_n(*points[i]->sens, points[i]->bs, c.probe.t_fixed, n_grid, c.probe.T, options);
        },
        [&](std::size_t i) { return delta_point_label(grid, i); });

    json windows = json::array();
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (!ok[i]) continue;
        Table table{{"n", "min_delta_omega", "residue_bound", "hl_reference"}, {}};
        for (const auto& r : rows[i])
            table.add_row({static_cast<long long>(r.n), r.min_delta_omega, r.residue_bound, r.hl_reference});
        ctx.write(table, "scaling_delta_" + delta_label(grid[i]));
        const auto& bs = points[i]->bs;
        windows.push_back({{"delta", grid[i]}, {"Z", bs.Z}, {"heisenberg_window", heisenberg_window(bs.Z)}});
    }
    ctx.metadata["t_fixed"] = c.probe.t_fixed;
    ctx.metadata["window_fraction"] = c.numerics.window_fraction;
    ctx.metadata["heisenberg_windows"] = std::move(windows);
    ctx.metadata["branch_choices"] = branch_metadata(points, ok);
}

void run_markovian_check(RunContext& ctx) {
    const auto& c = ctx.config;
    const std::vector<int> n_grid = c.probe.n_grid.empty() ? std::vector<int>{c.probe.n} : c.probe.n_grid;
    struct Job {
        double gamma;
        int n;
        InputState state;
        PrecisionOptimum result{kNaN, kNaN, kNaN};
    };
    std::vector<Job> jobs;
    for (const double g : c.physical.gamma_tilde_grid)
        for (const int n : n_grid)
            for (const auto state : {InputState::Uncorrelated, InputState::GHZ}) jobs.push_back({g, n, state});

    const auto ok = ctx.for_each_point(
        jobs.size(),
        [&](std::size_t i) {
            auto& j = jobs[i];
            j.result = optimize_markovian({j.gamma, c.physical.delta_omega}, ProbeConfig{j.n, c.probe.T, j.state});
        },
        [&](std::size_t i) {
            return fmt::format("gamma_tilde={:g},n={},input_state={}", jobs[i].gamma, jobs[i].n, to_string(jobs[i].state));
        });

    Table table{{"gamma_tilde", "n", "input_state", "min_delta_omega", "t_opt", "omega0_opt", "predicted_min",
                 "predicted_t"},
                {}};
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        if (!ok[i]) continue;
        const auto& j = jobs[i];
        const double predicted = std::sqrt(j.gamma * std::exp(1.0) / (j.n * c.probe.T));
        const double t_pred = j.state == InputState::GHZ ? 1.0 / (j.n * j.gamma) : 1.0 / j.gamma;
        table.add_row({j.gamma, static_cast<long long>(j.n), std::string(to_string(j.state)), j.result.delta_omega,
                       j.result.t, j.result.omega0, predicted, t_pred});
    }
    ctx.write(table, "markovian");
}

void run_asymptote_check(RunContext& ctx) {
    const auto& c = ctx.config;
    const auto& grid = c.physical.delta_grid;
    struct Row {
        DeltaPoint point;
        double Z = kNaN, plateau = kNaN, long_time = kNaN, rate_asymptote = kNaN, fitted = kNaN;
        BranchSet branches;
    };
    std::vector<std::optional<Row>> rows(grid.size());
    const auto ok = ctx.for_each_point(
        grid.size(),
        [&](std::size_t i) {
            Row& r = rows[i].emplace(Row{make_point(c, grid[i])});
            const auto bs = find_bound_state(r.point.model, r.point.atom);
            r.Z = bs.Z;
            r.branches = branches_for(r.point, c.numerics);
            const auto traj = analytic_pbg(r.point.atom, r.point.model, TimeGrid::uniform(c.numerics.t_max, c.numerics.h),
                                           r.branches);
            r.long_time = mean_abs(traj, c.numerics.average_begin, c.numerics.average_end);
            r.plateau = large_detuning_asymptote(r.point.atom, r.point.model, c.numerics.t_max);
            if (grid[i] > 0.0) {
                const double beta = r.point.model.band_gap().beta;
                r.rate_asymptote = std::sqrt(beta * beta * beta / grid[i]);
                // Least-squares slope of ln|c| over the fit window.
                double st = 0, sy = 0, stt = 0, sty = 0, m = 0;
                for (std::size_t k = 0; k < traj.c.size(); ++k) {
                    const double t = traj.grid.at(k);
                    if (t < c.numerics.fit_begin - 1e-12 || t > c.numerics.fit_end + 1e-12) continue;
                    const double y = std::log(std::abs(traj.c[k]));
                    st += t;
                    sy += y;
                    stt += t * t;
                    sty += t * y;
                    m += 1;
                }
                r.fitted = -(m * sty - st * sy) / (m * stt - st * st);
            }
        },
        [&](std::size_t i) { return delta_point_label(grid, i); });

    Table table{{"delta", "omega0", "beta", "Z", "plateau_asymptote", "abs_c_long_time", "decay_rate_asymptote",
                 "fitted_decay_rate"},
                {}};
    json branches = json::array();
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (!ok[i]) continue;
        const Row& r = *rows[i];
        table.add_row({r.point.delta, r.point.atom.omega0, r.point.model.band_gap().beta, r.Z, r.plateau, r.long_time,
                       r.rate_asymptote, r.fitted});
        branches.push_back({{"delta", r.point.delta}, {"signs", branch_label(r.branches)}});
    }
    ctx.write(table, "asymptote");
    ctx.metadata["branch_choices"] = std::move(branches);
    ctx.metadata["fit_window"] = {c.numerics.fit_begin, c.numerics.fit_end};
}

}  // namespace

RunReport run(const ExperimentConfig& config) {
    const auto start = std::chrono::steady_clock::now();
    const std::filesystem::path dir(config.output.directory);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec || !std::filesystem::is_directory(dir))
        throw std::runtime_error(fmt::format("output.directory: cannot create '{}': {}", dir.string(), ec.message()));

    RunContext ctx(config, dir);
    log::info(fmt::format("running {} with {} worker(s)", to_string(config.scenario), ctx.workers));
    switch (config.scenario) {
        case Scenario::SteadyState: run_steady_state(ctx); break;
        case Scenario::Spectrum: run_spectrum(ctx); break;
        case Scenario::PrecisionEvolution: run_precision_evolution(ctx); break;
        case Scenario::Scaling: run_scaling(ctx); break;
        case Scenario::MarkovianCheck: run_markovian_check(ctx); break;
        case Scenario::AsymptoteCheck: run_asymptote_check(ctx); break;
    }

    RunReport report;
    report.outputs = std::move(ctx.outputs);
    report.failures = std::move(ctx.failures);
    report.exit_code = report.failures.empty() ? 0 : 2;
    report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    json manifest;
    manifest["tool"] = "metrol";
    manifest["version"] = kVersion;
    manifest["scenario"] = to_string(config.scenario);
    manifest["config"] = config_to_json(config);
    manifest["wall_time_seconds"] = report.wall_seconds;
    manifest["outputs"] = report.outputs;
    manifest["failures"] = json::array();
    for (const auto& f : report.failures) manifest["failures"].push_back({{"point", f.point}, {"message", f.message}});
    manifest["metadata"] = std::move(ctx.metadata);
    manifest["exit_code"] = report.exit_code;

    report.manifest = dir / "manifest.json";
    std::ofstream out(report.manifest);
    if (!out) throw std::runtime_error(fmt::format("output.directory: cannot write {}", report.manifest.string()));
    out << manifest.dump(2) << '\n';
    return report;
}

UnitConversion convert_units(const SiParameters& si) {
    if (!(si.omega_c_ghz > 0.0)) throw DomainError("convert_units: omega_c must be positive");
    if (!(si.gamma0_mhz > 0.0)) throw DomainError("convert_units: gamma0 must be positive");
    if (!(si.omega0_ghz > 0.0)) throw DomainError("convert_units: omega0 must be positive");
    const double scale = 1000.0 / si.gamma0_mhz;  // GHz -> units of gamma0
    const double omega_c = si.omega_c_ghz * scale;
    const double omega0 = si.omega0_ghz * scale;
    return {AtomParams{omega0}, SpectralModel::photonic_band_gap(omega_c, pbg_beta(omega0, omega_c)), omega0 - omega_c};
}

}  // namespace metrol
