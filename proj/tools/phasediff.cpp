// phasediff — command-line driver for the phase-diffusion estimation toolkit
//
// Exit codes: 0 success, 1 computation error, 2 usage/config error.
// Standard output carries data only (with --output -); progress goes to stderr.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <phasediff/cli.hpp>

namespace {

using phasediff::JobConfig;
using phasediff::UsageError;

struct GridFlags {
    std::string list;
    std::string lin;
    std::string log;
};

std::vector<double> parse_list(const std::string& text, const std::string& name) {
    std::vector<double> out;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t next = text.find(',', pos);
        const std::string tok = text.substr(pos, next == std::string::npos ? next : next - pos);
        if (tok.empty()) throw UsageError("empty value in grid '" + name + "'");
        char* end = nullptr;
        const double v = std::strtod(tok.c_str(), &end);
        if (end == tok.c_str() || *end != '\0')
            throw UsageError("cannot parse '" + tok + "' in grid '" + name + "'");
        out.push_back(v);
        if (next == std::string::npos) break;
        pos = next + 1;
    }
    return out;
}

std::vector<double> parse_range(const std::string& text, const std::string& name, bool log_spaced) {
    double lo = 0, hi = 0;
    int count = 0;
    if (std::sscanf(text.c_str(), "%lf:%lf:%d", &lo, &hi, &count) != 3 || count < 1)
        throw UsageError("range for '" + name + "' must be lo:hi:count");
    if (log_spaced && (lo <= 0.0 || hi <= 0.0))
        throw UsageError("log-spaced range for '" + name + "' needs positive endpoints");
    std::vector<double> out(count);
    if (count == 1) {
        out[0] = lo;
        return out;
    }
    for (int i = 0; i < count; ++i) {
        const double t = double(i) / (count - 1);
        out[i] = log_spaced ? std::exp(std::log(lo) + t * (std::log(hi) - std::log(lo)))
                            : lo + t * (hi - lo);
    }
    return out;
}

std::vector<double> resolve_grid(const GridFlags& flags, const std::string& name) {
    int given = 0;
    given += !flags.list.empty();
    given += !flags.lin.empty();
    given += !flags.log.empty();
    if (given > 1)
        throw UsageError("grid '" + name + "' given more than once (list/lin/log are exclusive)");
    if (!flags.list.empty()) return parse_list(flags.list, name);
    if (!flags.lin.empty()) return parse_range(flags.lin, name, false);
    if (!flags.log.empty()) return parse_range(flags.log, name, true);
    return {};
}

void add_grid_flags(CLI::App* cmd, const std::string& name, GridFlags& flags,
                    const std::string& help) {
    cmd->add_option("--" + name, flags.list, help + " (comma-separated values)");
    cmd->add_option("--" + name + "-lin", flags.lin, help + " (linear range lo:hi:count)");
    cmd->add_option("--" + name + "-log", flags.log, help + " (log range lo:hi:count)");
}

struct CommandFlags {
    GridFlags N, beta, delta, theta, phi0;
    JobConfig cfg;
};

void add_common_flags(CLI::App* cmd, CommandFlags& f) {
    cmd->add_option("--output", f.cfg.output_path, "output path, or - for stdout")
        ->capture_default_str();
    cmd->add_option("--format", f.cfg.format, "output format: csv or json")
        ->check(CLI::IsMember({"csv", "json"}))
        ->capture_default_str();
    cmd->add_option("--workers", f.cfg.workers, "worker threads (0 = PHASEDIFF_WORKERS or hardware)")
        ->capture_default_str();
    cmd->add_option("--seed", f.cfg.seed, "random seed")->capture_default_str();
    cmd->add_option("--cutoff-limit", f.cfg.cutoff_limit, "hard limit for the Fock cutoff")
        ->capture_default_str();
    cmd->add_option("--tail-tol", f.cfg.tail_tol, "Fock tail tolerance")->capture_default_str();
    cmd->add_option("--beta-tol", f.cfg.beta_tol, "squeezing-fraction search tolerance")
        ->capture_default_str();
}

void write_output(const phasediff::ResultTable& table, const JobConfig& cfg) {
    const std::string text =
        (cfg.format == "json") ? phasediff::to_json(table) : phasediff::to_csv(table);
    if (cfg.output_path == "-") {
        std::fwrite(text.data(), 1, text.size(), stdout);
    } else {
        std::ofstream out(cfg.output_path, std::ios::binary);
        if (!out) throw UsageError("cannot open output path '" + cfg.output_path + "'");
        out << text;
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Fisher-information limits for optical phase estimation under phase diffusion"};
    app.require_subcommand(0, 1);
    app.set_config("--config", "", "config file (key = value, one section per command)");
    bool print_config = false;
    app.add_flag("--print-config", print_config, "print the effective merged config and exit");

    std::map<std::string, CommandFlags> flags;
    const std::vector<std::pair<std::string, std::string>> commands = {
        {"qfi", "QFI of dephased Gaussian probes over an (N, beta, Delta) grid"},
        {"sweep", "beta-optimized QFI records over an (N, Delta) grid"},
        {"homodyne", "homodyne Fisher information against the QFI"},
        {"variance-map", "quadrature variance over (beta, theta), or the noise threshold curve"},
        {"fit", "log-quadratic fit of gamma(xi) from a sweep table"},
        {"crb-mc", "Monte Carlo maximum-likelihood check of the Cramer-Rao bound"},
    };
    for (const auto& [name, help] : commands) {
        CLI::App* cmd = app.add_subcommand(name, help);
        CommandFlags& f = flags[name];
        f.cfg.command = name;
        add_common_flags(cmd, f);
        if (name != "fit") {
            add_grid_flags(cmd, "N", f.N, "mean photon numbers");
            add_grid_flags(cmd, "Delta", f.delta, "noise amplitudes");
        }
        if (name == "qfi" || name == "homodyne" || name == "crb-mc")
            add_grid_flags(cmd, "beta", f.beta, "squeezing fractions");
        if (name == "homodyne" || name == "crb-mc")
            add_grid_flags(cmd, "theta", f.theta, "local-oscillator phases");
        if (name == "homodyne")
            add_grid_flags(cmd, "phi0", f.phi0, "evaluation phases (default: maximize)");
        if (name == "sweep")
            cmd->add_flag("--with-homodyne", f.cfg.with_homodyne,
                          "also report homodyne F at theta=0 for each record");
        if (name == "variance-map") {
            cmd->add_flag("--threshold", f.cfg.threshold_mode,
                          "emit the Delta*(N) threshold curve instead of the map");
            cmd->add_option("--beta-cells", f.cfg.map_beta_cells, "beta grid cells");
            cmd->add_option("--theta-cells", f.cfg.map_theta_cells, "theta grid cells");
            cmd->add_option("--threshold-lo", f.cfg.threshold_lo, "bisection interval start");
            cmd->add_option("--threshold-hi", f.cfg.threshold_hi, "bisection interval end");
            cmd->add_option("--threshold-tol", f.cfg.threshold_tol, "bisection tolerance");
        }
        if (name == "crb-mc") {
            cmd->add_option("--samples", f.cfg.samples, "homodyne samples per batch");
            cmd->add_option("--batches", f.cfg.batches, "estimator batches");
            cmd->add_option("--phi-true", f.cfg.phi_true, "true phase shift");
        }
        if (name == "fit") cmd->add_option("--input", f.cfg.fit_input, "sweep table (CSV)");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    if (print_config) {
        std::fputs(app.config_to_str(true, false).c_str(), stdout);
        return 0;
    }
    if (app.get_subcommands().empty()) {
        std::fputs(app.help().c_str(), stderr);
        return 2;
    }

    const std::string name = app.get_subcommands().front()->get_name();
    CommandFlags& f = flags[name];
    try {
        f.cfg.N_grid = resolve_grid(f.N, "N");
        f.cfg.beta_grid = resolve_grid(f.beta, "beta");
        f.cfg.delta_grid = resolve_grid(f.delta, "Delta");
        f.cfg.theta_grid = resolve_grid(f.theta, "theta");
        f.cfg.phi0_grid = resolve_grid(f.phi0, "phi0");

        // command defaults for grids left empty
        if (name == "sweep") {
            if (f.cfg.N_grid.empty())
                for (int i = 1; i <= 10; ++i) f.cfg.N_grid.push_back(i);
            if (f.cfg.delta_grid.empty())
                for (double d2 : {4.5e-5, 4.5e-4, 4.5e-3, 4.5e-2})
                    f.cfg.delta_grid.push_back(std::sqrt(d2));
        }
        if (name == "homodyne" && f.cfg.theta_grid.empty()) f.cfg.theta_grid = {0.0};
        if (name == "crb-mc") {
            if (f.cfg.theta_grid.empty()) f.cfg.theta_grid = {M_PI / 2.0};
            if (f.cfg.beta_grid.empty()) f.cfg.beta_grid = {0.0};
        }
        if (name == "variance-map" && f.cfg.threshold_mode && f.cfg.delta_grid.empty())
            f.cfg.delta_grid = {0.0}; // unused in threshold mode

        std::fprintf(stderr, "phasediff %s: running '%s' with %d worker(s)\n", phasediff::kVersion,
                     name.c_str(), phasediff::resolve_workers(f.cfg.workers));
        const phasediff::ResultTable table = phasediff::run_command(f.cfg);
        write_output(table, f.cfg);
        if (table.has_row_errors()) {
            std::fprintf(stderr, "phasediff: some rows failed; see the error column\n");
            return 1;
        }
        return 0;
    } catch (const UsageError& e) {
        std::fprintf(stderr, "phasediff: usage error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "phasediff: error: %s\n", e.what());
        return 1;
    }
}
