#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "diagnostics.hpp"
#include "driver.hpp"
#include "dynamics.hpp"
#include "problems.hpp"
#include "solvers.hpp"

namespace monosplit {

/// Itemized configuration errors.
class ConfigError : public std::invalid_argument {
public:
    explicit ConfigError(std::vector<std::string> errors)
        : std::invalid_argument(join(errors)), errors_(std::move(errors)) {}
    const std::vector<std::string>& errors() const { return errors_; }

private:
    static std::string join(const std::vector<std::string>& errs) {
        std::string out;
        for (const auto& e : errs) out += (out.empty() ? "" : "; ") + e;
        return out;
    }
    std::vector<std::string> errors_;
};

enum class FlowSystem { shadow, dr, dyn4, forward };

/// A fully resolved experiment. Problem-dependent defaults (lambda, epsilon,
/// tau, sigma, h) are filled from the generated instance.
struct ExperimentConfig {
    std::string problem;
    Method method = Method::shadow_dr;
    std::uint64_t seed = 0;

    // skew-vi
    std::size_t dim = 2;
    double scale = 1.0;
    ViConstraint constraint = ViConstraint::none;
    double box_lo = -1.0;
    double box_hi = 1.0;
    ViOperator op = ViOperator::skew;
    // composite-l1 (design rows x cols) and bilinear-saddle (K is rows x cols)
    std::size_t rows = 20;
    std::size_t cols = 50;
    double sparsity = 0.1;
    double mu = 0.1;

    SolverConfig solver;
    std::optional<std::vector<double>> x0;
    std::string out = "out";
    bool timing = false;

    bool emit_trajectory = false;
    FlowSystem system = FlowSystem::shadow;
    Scheme integrator = Scheme::euler;
    double h = 0.0;
    double horizon = 10.0;

    /// Declared Lipschitz constant of B for the generated instance.
    double lipschitz = 0.0;
    /// Cached ||K|| bound for saddle problems.
    double k_norm = 0.0;
    /// Key/value pairs as given, used to rebuild variants in sweeps.
    std::map<std::string, std::string> raw;
};

inline const std::set<std::string>& config_keys() {
    static const std::set<std::string> keys{
        "problem", "method", "seed", "dim", "scale", "constraint", "box_lo", "box_hi", "operator",
        "rows", "cols", "sparsity", "mu", "lambda", "tau", "sigma", "epsilon", "max_iters", "tol",
        "unsafe_stepsize", "x0", "out", "timing", "emit_trajectory", "system", "integrator", "h", "T"};
    return keys;
}

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

/// Parses `key = value` lines; `#` starts a comment.
inline std::map<std::string, std::string> parse_key_values(const std::string& text, std::vector<std::string>& errs) {
    std::map<std::string, std::string> kv;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            errs.push_back("line " + std::to_string(lineno) + ": expected 'key = value'");
            continue;
        }
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty()) {
            errs.push_back("line " + std::to_string(lineno) + ": empty key");
            continue;
        }
        if (kv.count(key)) errs.push_back("duplicate key '" + key + "'");
        kv[key] = value;
    }
    return kv;
}

class ValueReader {
public:
    ValueReader(const std::map<std::string, std::string>& kv, std::vector<std::string>& errs) : kv_(kv), errs_(errs) {}

    bool has(const std::string& key) const { return kv_.count(key) != 0; }

    std::optional<double> real(const std::string& key) const {
        auto it = kv_.find(key);
        if (it == kv_.end()) return std::nullopt;
        try {
            std::size_t used = 0;
            const double v = std::stod(it->second, &used);
            if (used != it->second.size() || !std::isfinite(v)) throw std::invalid_argument("");
            return v;
        } catch (const std::exception&) {
            errs_.push_back("key '" + key + "': expected a real number, got '" + it->second + "'");
            return std::nullopt;
        }
    }

    std::optional<std::uint64_t> integer(const std::string& key) const {
        auto it = kv_.find(key);
        if (it == kv_.end()) return std::nullopt;
        const std::string& s = it->second;
        if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos) {
            errs_.push_back("key '" + key + "': expected a nonnegative integer, got '" + s + "'");
            return std::nullopt;
        }
        try {
            return std::stoull(s);
        } catch (const std::exception&) {
            errs_.push_back("key '" + key + "': integer out of range");
            return std::nullopt;
        }
    }

    std::optional<bool> boolean(const std::string& key) const {
        auto it = kv_.find(key);
        if (it == kv_.end()) return std::nullopt;
        if (it->second == "true" || it->second == "1") return true;
        if (it->second == "false" || it->second == "0") return false;
        errs_.push_back("key '" + key + "': expected true/false, got '" + it->second + "'");
        return std::nullopt;
    }

    std::optional<std::string> text(const std::string& key) const {
        auto it = kv_.find(key);
        if (it == kv_.end()) return std::nullopt;
        return it->second;
    }

    std::optional<std::vector<double>> real_list(const std::string& key) const {
        auto it = kv_.find(key);
        if (it == kv_.end()) return std::nullopt;
        std::vector<double> out;
        std::istringstream in(it->second);
        std::string item;
        while (std::getline(in, item, ',')) {
            item = trim(item);
            try {
                std::size_t used = 0;
                const double v = std::stod(item, &used);
                if (used != item.size() || !std::isfinite(v)) throw std::invalid_argument("");
                out.push_back(v);
            } catch (const std::exception&) {
                errs_.push_back("key '" + key + "': expected a comma-separated list of reals");
                return std::nullopt;
            }
        }
        return out;
    }

private:
    const std::map<std::string, std::string>& kv_;
    std::vector<std::string>& errs_;
};

} // namespace detail

/// Generates the problem instance an experiment describes.
inline ProblemInstance make_problem(const ExperimentConfig& c) {
    if (c.problem == "skew-vi")
        return make_skew_vi(c.dim, c.scale, c.seed, SkewViOptions{c.constraint, c.box_lo, c.box_hi, c.op});
    if (c.problem == "composite-l1") return make_composite(c.rows, c.cols, c.sparsity, c.mu, c.seed);
    if (c.problem == "bilinear-saddle") return make_saddle(c.cols, c.rows, c.seed);
    if (c.problem == "feasibility") return make_feasibility(c.dim, c.seed);
    throw ConfigError({"unknown problem '" + c.problem + "'"});
}

/// Builds and validates a configuration from key/value pairs.
inline ExperimentConfig resolve_config(const std::map<std::string, std::string>& kv) {
    std::vector<std::string> errs;
    for (const auto& [key, value] : kv)
        if (!config_keys().count(key)) errs.push_back("unknown key '" + key + "'");
    detail::ValueReader r(kv, errs);
    ExperimentConfig c;
    c.raw = kv;

    if (auto v = r.text("problem")) c.problem = *v;
    else errs.emplace_back("missing key 'problem'");
    if (!c.problem.empty() && c.problem != "skew-vi" && c.problem != "composite-l1" &&
        c.problem != "bilinear-saddle" && c.problem != "feasibility")
        errs.push_back("unknown problem '" + c.problem + "'");
    if (auto v = r.text("method")) {
        if (auto m = parse_method(*v)) c.method = *m;
        else errs.push_back("unknown method '" + *v + "'");
    } else {
        errs.emplace_back("missing key 'method'");
    }
    if (auto v = r.integer("seed")) c.seed = *v;
    if (auto v = r.integer("dim")) c.dim = *v;
    if (auto v = r.real("scale")) c.scale = *v;
    if (auto v = r.text("constraint")) {
        if (*v == "none") c.constraint = ViConstraint::none;
        else if (*v == "box") c.constraint = ViConstraint::box;
        else if (*v == "hyperplane") c.constraint = ViConstraint::hyperplane;
        else errs.push_back("key 'constraint': expected none, box or hyperplane");
    }
    if (auto v = r.real("box_lo")) c.box_lo = *v;
    if (auto v = r.real("box_hi")) c.box_hi = *v;
    if (auto v = r.text("operator")) {
        if (*v == "skew") c.op = ViOperator::skew;
        else if (*v == "linear-monotone") c.op = ViOperator::linear_monotone;
        else errs.push_back("key 'operator': expected skew or linear-monotone");
    }
    if (auto v = r.integer("rows")) c.rows = *v;
    if (auto v = r.integer("cols")) c.cols = *v;
    if (auto v = r.real("sparsity")) c.sparsity = *v;
    if (auto v = r.real("mu")) c.mu = *v;
    const auto lambda = r.real("lambda");
    const auto tau = r.real("tau");
    const auto sigma = r.real("sigma");
    const auto epsilon = r.real("epsilon");
    if (auto v = r.integer("max_iters")) c.solver.max_iters = *v;
    if (auto v = r.real("tol")) c.solver.tol = *v;
    if (auto v = r.boolean("unsafe_stepsize")) c.solver.unsafe_stepsize = *v;
    if (auto v = r.real_list("x0")) c.x0 = *v;
    if (auto v = r.text("out")) c.out = *v;
    if (auto v = r.boolean("timing")) c.timing = *v;
    if (auto v = r.boolean("emit_trajectory")) c.emit_trajectory = *v;
    if (auto v = r.text("system")) {
        if (*v == "shadow") c.system = FlowSystem::shadow;
        else if (*v == "dr") c.system = FlowSystem::dr;
        else if (*v == "dyn4") c.system = FlowSystem::dyn4;
        else if (*v == "forward") c.system = FlowSystem::forward;
        else errs.push_back("key 'system': expected shadow, dr, dyn4 or forward");
    } else if (c.method == Method::dr) {
        c.system = FlowSystem::dr;
    }
    if (auto v = r.text("integrator")) {
        if (*v == "euler") c.integrator = Scheme::euler;
        else if (*v == "rk4") c.integrator = Scheme::rk4;
        else errs.push_back("key 'integrator': expected euler or rk4");
    }
    const auto h = r.real("h");
    if (auto v = r.real("T")) c.horizon = *v;

    if (lambda && !(*lambda > 0.0)) errs.emplace_back("lambda must be positive");
    if (tau && !(*tau > 0.0)) errs.emplace_back("tau must be positive");
    if (sigma && !(*sigma > 0.0)) errs.emplace_back("sigma must be positive");
    if (epsilon && !(*epsilon > 0.0)) errs.emplace_back("epsilon must be positive");
    if (!(c.solver.tol > 0.0)) errs.emplace_back("tol must be positive");
    if (h && !(*h > 0.0)) errs.emplace_back("h must be positive");
    if (!(c.horizon > 0.0)) errs.emplace_back("T must be positive");
    if (c.scale < 0.0) errs.emplace_back("scale must be nonnegative");
    if (c.problem == "skew-vi" && (c.dim == 0 || c.dim % 2 != 0)) errs.emplace_back("dim must be a positive even integer");
    if (c.problem == "feasibility" && c.dim < 2) errs.emplace_back("dim must be >= 2");
    if (c.box_lo > c.box_hi) errs.emplace_back("box_lo must be <= box_hi");
    if (c.rows == 0 || c.cols == 0) errs.emplace_back("rows and cols must be >= 1");
    if (c.sparsity < 0.0 || c.sparsity > 1.0) errs.emplace_back("sparsity must be in [0, 1]");
    if (c.mu < 0.0) errs.emplace_back("mu must be nonnegative");
    if (!errs.empty()) throw ConfigError(errs);

    const ProblemInstance p = make_problem(c);
    if (auto err = compatibility_error(c.method, p); !err.empty()) throw ConfigError({err});
    if (c.x0 && c.x0->size() != p.dim())
        throw ConfigError({"x0 has dimension " + std::to_string(c.x0->size()) + ", problem has " +
                           std::to_string(p.dim())});

    c.lipschitz = p.lipschitz();
    c.solver.epsilon = epsilon ? *epsilon : default_epsilon(c.lipschitz);
    c.solver.lambda = lambda ? *lambda : default_lambda(c.lipschitz, c.solver.epsilon);
    if (p.saddle) {
        c.k_norm = p.saddle->k.norm_bound();
        const double step = c.k_norm > 0.0 ? std::sqrt(0.9) / c.k_norm : 1.0;
        c.solver.tau = tau ? *tau : step;
        c.solver.sigma = sigma ? *sigma : step;
    }
    c.h = h ? *h : c.solver.lambda / 100.0;
    if (auto step_errs = step_size_errors(c.method, p, c.solver); !step_errs.empty()) throw ConfigError(step_errs);
    return c;
}

inline ExperimentConfig parse_config(const std::string& text) {
    std::vector<std::string> errs;
    auto kv = detail::parse_key_values(text, errs);
    if (!errs.empty()) throw ConfigError(errs);
    return resolve_config(kv);
}

inline int exit_code_for(Termination t) {
    switch (t) {
    case Termination::converged: return 0;
    case Termination::diverged: return 2;
    case Termination::max_iters: return 3;
    }
    return 1;
}

struct ExperimentOutcome {
    RunResult result;
    int exit_code = 0;
    std::optional<double> inclusion_residual;
};

/// Integrates the continuous-time system selected by `system`.
inline Trajectory integrate_experiment(const ExperimentConfig& c) {
    const ProblemInstance p = make_problem(c);
    const Vector x0 = c.x0 ? Vector(*c.x0) : p.x0;
    IntegratorOptions o;
    o.h = c.h;
    o.horizon = c.horizon;
    o.scheme = c.integrator;
    o.enforce_step_guard = !c.solver.unsafe_stepsize;
    const double lambda = c.solver.lambda;
    switch (c.system) {
    case FlowSystem::dr: {
        if (!p.b_resolvent) throw ConfigError({"dr flow needs a resolvent for B"});
        const Vector z0 = p.b_resolvent_matches_forward && p.b ? axpy(lambda, (*p.b)(x0), x0) : x0;
        return integrate_dr_flow(p.a, *p.b_resolvent, lambda, z0, o);
    }
    case FlowSystem::shadow:
        if (!p.b) throw ConfigError({"shadow flow needs a forward operator B"});
        return integrate_shadow_flow(p.a, *p.b, lambda, x0, o);
    case FlowSystem::dyn4:
        if (!p.b) throw ConfigError({"dyn4 flow needs a forward operator B"});
        return integrate_dyn4_flow(p.a, *p.b, lambda, x0, o);
    case FlowSystem::forward:
        if (!p.b) throw ConfigError({"forward flow needs a forward operator B"});
        return integrate_forward_flow(*p.b, x0, o);
    }
    throw std::logic_error("unknown flow system");
}

namespace detail {

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    f << text;
    if (!f) throw std::runtime_error("write failed for " + path.string());
}

inline nlohmann::json number_or_null(std::optional<double> v) {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

} // namespace detail

/// Runs the experiment and writes trace.csv, summary.json and (optionally)
/// trajectory.csv into c.out. Exit code: 0 converged, 2 diverged, 3 max-iters.
inline ExperimentOutcome run_experiment(const ExperimentConfig& c) {
    const ProblemInstance p = make_problem(c);
    RunOptions opt;
    if (c.x0) opt.x0 = Vector(*c.x0);
    opt.timing = c.timing;
    ExperimentOutcome outcome{run(c.method, p, c.solver, opt), 0, std::nullopt};
    outcome.exit_code = exit_code_for(outcome.result.termination);
    if (p.b && !is_primal_dual(c.method))
        outcome.inclusion_residual = inclusion_residual(outcome.result.final_state.x_curr, p, c.solver.lambda);
    else if (p.b)
        outcome.inclusion_residual = inclusion_residual(outcome.result.final_state.x_curr, p, 1.0);

    std::filesystem::create_directories(c.out);
    std::ostringstream trace;
    write_trace_csv(trace, outcome.result.trace);
    detail::write_text(std::filesystem::path(c.out) / "trace.csv", trace.str());

    nlohmann::json summary;
    summary["problem"] = c.problem;
    summary["method"] = std::string(method_name(c.method));
    summary["termination"] = std::string(termination_name(outcome.result.termination));
    summary["exit_code"] = outcome.exit_code;
    summary["iterations"] = outcome.result.iterations;
    summary["final_residual"] = detail::number_or_null(outcome.result.final_residual);
    summary["inclusion_residual"] = detail::number_or_null(outcome.inclusion_residual);
    summary["lambda"] = c.solver.lambda;
    summary["epsilon"] = c.solver.epsilon;
    summary["L"] = c.lipschitz;
    summary["seed"] = c.seed;
    if (p.saddle) {
        summary["tau"] = c.solver.tau;
        summary["sigma"] = c.solver.sigma;
        summary["K_norm_bound"] = c.k_norm;
    }
    if (p.solution) summary["dist_to_solution"] = distance(outcome.result.final_state.x_curr, *p.solution);
    detail::write_text(std::filesystem::path(c.out) / "summary.json", summary.dump(2) + "\n");

    if (c.emit_trajectory) {
        std::ostringstream traj;
        write_trajectory_csv(traj, integrate_experiment(c));
        detail::write_text(std::filesystem::path(c.out) / "trajectory.csv", traj.str());
    }
    return outcome;
}

struct SweepRow {
    double value = 0.0;
    std::string termination;
    std::size_t iterations = 0;
    std::optional<double> final_residual;
    std::string note;

    bool converged() const { return termination == "converged"; }
};

inline const std::set<std::string>& sweep_parameters() {
    static const std::set<std::string> params{"lambda", "lambda_over_L", "tau", "sigma", "dim", "seed"};
    return params;
}

namespace detail {

inline std::string format_value(double v) {
    std::ostringstream s;
    s << std::setprecision(17) << v;
    return s.str();
}

} // namespace detail

/// Runs one experiment per value of `param`, each in its own subdirectory
/// `<out>/<param>=<value>`, and writes `<out>/sweep.csv`. Rejected values
/// (step-size or configuration errors) are reported as rows, not thrown.
/// `lambda_over_L` sets lambda = value / L.
inline std::vector<SweepRow> sweep(const ExperimentConfig& base, const std::string& param,
                                   const std::vector<double>& values) {
    if (!sweep_parameters().count(param)) throw ConfigError({"parameter '" + param + "' is not sweepable"});
    std::vector<SweepRow> rows;
    for (double value : values) {
        auto kv = base.raw;
        if (param == "lambda_over_L") {
            if (!(base.lipschitz > 0.0)) throw ConfigError({"lambda_over_L needs L > 0"});
            kv["lambda"] = detail::format_value(value / base.lipschitz);
        } else if (param == "dim" || param == "seed") {
            if (value < 0.0 || std::floor(value) != value) throw ConfigError({param + " values must be integers"});
            kv[param] = std::to_string(static_cast<std::uint64_t>(value));
        } else {
            kv[param] = detail::format_value(value);
        }
        std::ostringstream label;
        label << param << '=' << std::setprecision(10) << value;
        kv["out"] = (std::filesystem::path(base.out) / label.str()).string();
        SweepRow row;
        row.value = value;
        try {
            const ExperimentConfig c = resolve_config(kv);
            const ExperimentOutcome o = run_experiment(c);
            row.termination = std::string(termination_name(o.result.termination));
            row.iterations = o.result.iterations;
            row.final_residual = o.result.final_residual;
        } catch (const ConfigError& e) {
            row.termination = "rejected";
            row.note = e.what();
        }
        rows.push_back(std::move(row));
    }
    std::filesystem::create_directories(base.out);
    std::ostringstream csv;
    csv << param << ",termination,converged,iterations,final_residual,note\n";
    for (const auto& r : rows) {
        csv << detail::format_value(r.value) << ',' << r.termination << ',' << (r.converged() ? 1 : 0) << ','
            << r.iterations << ',';
        if (r.final_residual) csv << detail::format_value(*r.final_residual);
        std::string note = r.note;
        for (auto& ch : note)
            if (ch == ',' || ch == '\n') ch = ';';
        csv << ',' << note << '\n';
    }
    detail::write_text(std::filesystem::path(base.out) / "sweep.csv", csv.str());
    return rows;
}

} // namespace monosplit
