#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "monosplit/experiment.hpp"

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::vector<double> parse_values(const std::string& csv) {
    std::vector<double> values;
    std::istringstream in(csv);
    std::string item;
    while (std::getline(in, item, ',')) {
        item = monosplit::detail::trim(item);
        if (item.empty()) continue;
        std::size_t used = 0;
        const double v = std::stod(item, &used);
        if (used != item.size()) throw std::invalid_argument("bad value '" + item + "'");
        values.push_back(v);
    }
    return values;
}

struct CommonFlags {
    std::string config_path;
    std::string out;
    std::string seed;
    bool unsafe = false;
};

monosplit::ExperimentConfig load(const CommonFlags& f) {
    std::vector<std::string> errs;
    auto kv = monosplit::detail::parse_key_values(read_file(f.config_path), errs);
    if (!errs.empty()) throw monosplit::ConfigError(errs);
    if (!f.out.empty()) kv["out"] = f.out;
    if (!f.seed.empty()) kv["seed"] = f.seed;
    if (f.unsafe) kv["unsafe_stepsize"] = "true";
    return monosplit::resolve_config(kv);
}

void add_common(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("config", f.config_path, "Experiment config file")->required();
    cmd->add_option("--out", f.out, "Output directory (overrides config)");
    cmd->add_option("--seed", f.seed, "Seed (overrides config)");
    cmd->add_flag("--unsafe-stepsize", f.unsafe, "Skip step-size range checks");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Monotone operator splitting benchmark runner"};
    app.require_subcommand(1);

    CommonFlags run_flags, sweep_flags, integrate_flags;
    std::string param, values_csv;
    auto* run_cmd = app.add_subcommand("run", "Run one experiment");
    add_common(run_cmd, run_flags);
    auto* sweep_cmd = app.add_subcommand("sweep", "Run an experiment for each value of a parameter");
    add_common(sweep_cmd, sweep_flags);
    sweep_cmd->add_option("--param", param, "lambda, lambda_over_L, tau, sigma, dim or seed")->required();
    sweep_cmd->add_option("--values", values_csv, "Comma-separated values")->required();
    auto* integrate_cmd = app.add_subcommand("integrate", "Integrate a continuous-time system");
    add_common(integrate_cmd, integrate_flags);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run_cmd) {
            const auto cfg = load(run_flags);
            const auto outcome = monosplit::run_experiment(cfg);
            std::cout << monosplit::termination_name(outcome.result.termination) << " after "
                      << outcome.result.iterations << " iterations; output in " << cfg.out << '\n';
            return outcome.exit_code;
        }
        if (*sweep_cmd) {
            const auto cfg = load(sweep_flags);
            const auto rows = monosplit::sweep(cfg, param, parse_values(values_csv));
            for (const auto& r : rows)
                std::cout << param << '=' << r.value << ": " << r.termination << " (" << r.iterations
                          << " iterations)\n";
            std::cout << "table written to " << cfg.out << "/sweep.csv\n";
            return 0;
        }
        if (*integrate_cmd) {
            const auto cfg = load(integrate_flags);
            const auto traj = monosplit::integrate_experiment(cfg);
            std::filesystem::create_directories(cfg.out);
            std::ofstream out(std::filesystem::path(cfg.out) / "trajectory.csv", std::ios::binary);
            monosplit::write_trajectory_csv(out, traj);
            if (!out) throw std::runtime_error("failed to write trajectory.csv");
            std::cout << traj.system << (traj.experimental ? " (experimental)" : "") << ": " << traj.points.size()
                      << " points written to " << cfg.out << "/trajectory.csv\n";
            return 0;
        }
    } catch (const monosplit::ConfigError& e) {
        for (const auto& err : e.errors()) std::cerr << "config error: " << err << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
