// cli.hpp — batch-job layer behind the command-line driver
//
// Every command validates its config up front, computes one table, and stamps
// it with a config echo so a rerun can be reproduced bitwise from the output
// alone (wall clock lives in provenance, outside the compared body).

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "phasediff/errors.hpp"
#include "phasediff/fock.hpp"
#include "phasediff/homodyne.hpp"
#include "phasediff/parallel.hpp"
#include "phasediff/qfi.hpp"
#include "phasediff/sweep.hpp"
#include "phasediff/table.hpp"
#include "phasediff/version.hpp"

namespace phasediff {

struct JobConfig {
    std::string command;

    // parameter grids
    std::vector<double> N_grid;
    std::vector<double> beta_grid;
    std::vector<double> delta_grid;
    std::vector<double> theta_grid;
    std::vector<double> phi0_grid; // empty: maximize F over phi0

    // tolerances and limits
    double tail_tol{kDefaultTailTol};
    double beta_tol{kDefaultBetaTol};
    int cutoff_limit{kDefaultCutoffLimit};

    // concurrency / reproducibility
    int workers{0};
    std::uint64_t seed{20120822};

    // sweep
    bool with_homodyne{false};

    // variance-map / threshold
    bool threshold_mode{false};
    int map_beta_cells{21};
    int map_theta_cells{24};
    double threshold_lo{0.02};
    double threshold_hi{0.6};
    double threshold_tol{1e-3};

    // crb-mc
    std::int64_t samples{100000};
    int batches{200};
    double phi_true{0.0};

    // fit input
    std::string fit_input;

    // output
    std::string output_path{"-"};
    std::string format{"csv"};
};

namespace detail {

inline std::string grid_to_string(const std::vector<double>& grid) {
    std::string out;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (i) out += ",";
        out += format_double(grid[i]);
    }
    return out;
}

inline void stamp_provenance(ResultTable& table, const JobConfig& cfg) {
    table.add_provenance("command", cfg.command);
    table.add_provenance("version", kVersion);
    table.add_provenance("N", grid_to_string(cfg.N_grid));
    table.add_provenance("beta", grid_to_string(cfg.beta_grid));
    table.add_provenance("Delta", grid_to_string(cfg.delta_grid));
    table.add_provenance("theta", grid_to_string(cfg.theta_grid));
    table.add_provenance("phi0", grid_to_string(cfg.phi0_grid));
    table.add_provenance("tail_tol", format_double(cfg.tail_tol));
    table.add_provenance("beta_tol", format_double(cfg.beta_tol));
    table.add_provenance("cutoff_limit", std::to_string(cfg.cutoff_limit));
    table.add_provenance("seed", std::to_string(cfg.seed));
    table.add_provenance("workers", std::to_string(resolve_workers(cfg.workers)));
    if (cfg.command == "sweep")
        table.add_provenance("with_homodyne", cfg.with_homodyne ? "true" : "false");
    if (cfg.command == "variance-map") {
        table.add_provenance("threshold_mode", cfg.threshold_mode ? "true" : "false");
        table.add_provenance("map_beta_cells", std::to_string(cfg.map_beta_cells));
        table.add_provenance("map_theta_cells", std::to_string(cfg.map_theta_cells));
        table.add_provenance("threshold_lo", format_double(cfg.threshold_lo));
        table.add_provenance("threshold_hi", format_double(cfg.threshold_hi));
        table.add_provenance("threshold_tol", format_double(cfg.threshold_tol));
    }
    if (cfg.command == "crb-mc") {
        table.add_provenance("samples", std::to_string(cfg.samples));
        table.add_provenance("batches", std::to_string(cfg.batches));
        table.add_provenance("phi_true", format_double(cfg.phi_true));
    }
    if (cfg.command == "fit") table.add_provenance("input", cfg.fit_input);
    table.add_provenance("wall_clock_utc", utc_timestamp());
}

inline void require_grid(const std::vector<double>& grid, const std::string& name, double lo,
                         double hi) {
    if (grid.empty()) throw UsageError("grid '" + name + "' must not be empty");
    for (double v : grid) {
        if (!std::isfinite(v) || v < lo || v > hi)
            throw UsageError("grid '" + name + "' value " + format_double(v) +
                             " outside [" + format_double(lo) + ", " + format_double(hi) + "]");
    }
}

inline void require_tolerances(const JobConfig& cfg) {
    if (!(cfg.tail_tol > 0.0) || cfg.tail_tol >= 1.0)
        throw UsageError("tail tolerance must lie in (0, 1)");
    if (!(cfg.beta_tol > 0.0) || cfg.beta_tol > 0.5)
        throw UsageError("beta tolerance must lie in (0, 0.5]");
    if (cfg.cutoff_limit < kMinCutoff)
        throw UsageError("cutoff limit must be at least " + std::to_string(kMinCutoff));
    if (cfg.workers < 0) throw UsageError("worker count must be >= 0");
}

struct ProbeKey {
    double N, beta, delta;
    bool operator<(const ProbeKey& o) const {
        if (N != o.N) return N < o.N;
        if (beta != o.beta) return beta < o.beta;
        return delta < o.delta;
    }
};

} // namespace detail

// qfi: one row per (N, beta, Delta) with the doubling-verified QFI
inline ResultTable run_qfi(const JobConfig& cfg) {
    detail::require_tolerances(cfg);
    detail::require_grid(cfg.N_grid, "N", 0.0, 1e6);
    detail::require_grid(cfg.beta_grid, "beta", 0.0, 1.0);
    detail::require_grid(cfg.delta_grid, "Delta", 0.0, 1e3);

    ResultTable table;
    table.columns = {"N",      "beta",   "Delta",     "H",    "n_terms",
                     "degeneracy_skipped", "cutoff", "tail_mass", "error"};
    detail::stamp_provenance(table, cfg);

    const std::size_t count =
        cfg.N_grid.size() * cfg.beta_grid.size() * cfg.delta_grid.size();
    auto rows = parallel_map<std::vector<std::string>>(
        count, resolve_workers(cfg.workers), [&](std::size_t idx) {
            const std::size_t nb = cfg.beta_grid.size() * cfg.delta_grid.size();
            const double N = cfg.N_grid[idx / nb];
            const double beta = cfg.beta_grid[(idx % nb) / cfg.delta_grid.size()];
            const double delta = cfg.delta_grid[idx % cfg.delta_grid.size()];
            std::vector<std::string> row(table.columns.size());
            row[0] = format_double(N);
            row[1] = format_double(beta);
            row[2] = format_double(delta);
            try {
                QfiResult q = qfi_of_probe({N, beta, delta, cfg.tail_tol, cfg.cutoff_limit});
                row[3] = format_double(q.H);
                row[4] = std::to_string(q.n_terms_used);
                row[5] = std::to_string(q.degeneracy_skipped);
                row[6] = std::to_string(q.cutoff);
                row[7] = format_double(q.tail_mass);
            } catch (const std::exception& e) {
                row[8] = e.what();
            }
            return row;
        });
    table.rows = std::move(rows);
    return table;
}

// sweep: beta-optimized records over the (N, Delta) grid
inline ResultTable run_sweep(const JobConfig& cfg) {
    detail::require_tolerances(cfg);
    detail::require_grid(cfg.N_grid, "N", 1e-9, 1e6);
    detail::require_grid(cfg.delta_grid, "Delta", 0.0, 1e3);

    ResultTable table;
    table.columns = {"N",     "Delta",      "beta_opt", "H_opt",     "xi",
                     "gamma", "F_homodyne", "cutoff",   "tail_mass", "error"};
    detail::stamp_provenance(table, cfg);

    Eigen::VectorXd N = Eigen::Map<const Eigen::VectorXd>(cfg.N_grid.data(), cfg.N_grid.size());
    Eigen::VectorXd D =
        Eigen::Map<const Eigen::VectorXd>(cfg.delta_grid.data(), cfg.delta_grid.size());
    SweepOptions opt;
    opt.beta_tol = cfg.beta_tol;
    opt.tail_tol = cfg.tail_tol;
    opt.cutoff_limit = cfg.cutoff_limit;
    opt.workers = cfg.workers;
    opt.with_homodyne = cfg.with_homodyne;
    const std::vector<SweepRecord> records = qfi_surface(N, D, opt);

    for (const auto& r : records) {
        std::vector<std::string> row(table.columns.size());
        row[0] = format_double(r.mean_photons);
        row[1] = format_double(r.delta);
        if (r.error.empty()) {
            row[2] = format_double(r.beta_opt);
            row[3] = format_double(r.H_opt);
            row[4] = format_double(r.xi);
            row[5] = format_double(r.gamma);
            if (r.F_homodyne) row[6] = format_double(*r.F_homodyne);
            row[7] = std::to_string(r.cutoff);
            row[8] = format_double(r.tail_mass);
        } else {
            row[9] = r.error;
        }
        table.rows.push_back(std::move(row));
    }
    return table;
}

// homodyne: F (at given phi0 values, or maximized over phi0) against H
inline ResultTable run_homodyne(const JobConfig& cfg) {
    detail::require_tolerances(cfg);
    detail::require_grid(cfg.N_grid, "N", 1e-9, 1e6);
    detail::require_grid(cfg.beta_grid, "beta", 0.0, 1.0);
    detail::require_grid(cfg.delta_grid, "Delta", 0.0, 1e3);
    detail::require_grid(cfg.theta_grid, "theta", -10.0, 10.0);
    if (!cfg.phi0_grid.empty()) detail::require_grid(cfg.phi0_grid, "phi0", -100.0, 100.0);

    ResultTable table;
    table.columns = {"N",    "beta", "Delta",    "theta",  "phi0",      "F",
                     "H",    "F_over_H",         "cutoff", "tail_mass", "error"};
    detail::stamp_provenance(table, cfg);

    struct Item {
        double N, beta, delta, theta;
        std::optional<double> phi0;
    };
    std::vector<Item> items;
    for (double N : cfg.N_grid)
        for (double beta : cfg.beta_grid)
            for (double delta : cfg.delta_grid)
                for (double theta : cfg.theta_grid) {
                    if (cfg.phi0_grid.empty()) {
                        items.push_back({N, beta, delta, theta, std::nullopt});
                    } else {
                        for (double phi0 : cfg.phi0_grid)
                            items.push_back({N, beta, delta, theta, phi0});
                    }
                }

    auto rows = parallel_map<std::vector<std::string>>(
        items.size(), resolve_workers(cfg.workers), [&](std::size_t idx) {
            const Item& it = items[idx];
            std::vector<std::string> row(table.columns.size());
            row[0] = format_double(it.N);
            row[1] = format_double(it.beta);
            row[2] = format_double(it.delta);
            row[3] = format_double(it.theta);
            try {
                ProbeSpec spec{it.N, it.beta, it.delta, cfg.tail_tol, cfg.cutoff_limit};
                FisherResult fr = it.phi0 ? homodyne_fisher(spec, *it.phi0, it.theta)
                                          : max_fisher_over_phase(spec, it.theta);
                QfiResult q = qfi_of_probe(spec);
                row[4] = format_double(fr.phi0);
                row[5] = format_double(fr.F);
                row[6] = format_double(q.H);
                row[7] = format_double(q.H > 0.0 ? fr.F / q.H : 0.0);
                row[8] = std::to_string(q.cutoff);
                row[9] = format_double(q.tail_mass);
            } catch (const std::exception& e) {
                row[10] = e.what();
            }
            return row;
        });
    table.rows = std::move(rows);
    return table;
}

// variance-map: Var X_theta over (beta, theta) per (N, Delta), or the
// threshold curve Delta*(N) in threshold mode
inline ResultTable run_variance_map(const JobConfig& cfg) {
    detail::require_tolerances(cfg);
    detail::require_grid(cfg.N_grid, "N", 1e-9, 1e6);

    ResultTable table;
    if (cfg.threshold_mode) {
        if (!(cfg.threshold_lo >= 0.0) || !(cfg.threshold_hi > cfg.threshold_lo))
            throw UsageError("threshold interval must satisfy 0 <= lo < hi");
        if (!(cfg.threshold_tol > 0.0)) throw UsageError("threshold tolerance must be positive");
        table.columns = {"N", "Delta_star", "interval_lo", "interval_hi", "tol", "error"};
        detail::stamp_provenance(table, cfg);
        auto rows = parallel_map<std::vector<std::string>>(
            cfg.N_grid.size(), resolve_workers(cfg.workers), [&](std::size_t idx) {
                const double N = cfg.N_grid[idx];
                std::vector<std::string> row(table.columns.size());
                row[0] = format_double(N);
                row[2] = format_double(cfg.threshold_lo);
                row[3] = format_double(cfg.threshold_hi);
                row[4] = format_double(cfg.threshold_tol);
                try {
                    row[1] = format_double(noise_threshold(N, cfg.threshold_lo, cfg.threshold_hi,
                                                           cfg.threshold_tol, cfg.tail_tol));
                } catch (const std::exception& e) {
                    row[5] = e.what();
                }
                return row;
            });
        table.rows = std::move(rows);
        return table;
    }

    detail::require_grid(cfg.delta_grid, "Delta", 0.0, 1e3);
    if (cfg.map_beta_cells < 2 || cfg.map_theta_cells < 2)
        throw UsageError("variance map needs at least 2 cells per axis");
    table.columns = {"N", "Delta", "beta", "theta", "variance", "is_argmin"};
    detail::stamp_provenance(table, cfg);

    const Eigen::VectorXd betas = Eigen::VectorXd::LinSpaced(cfg.map_beta_cells, 0.0, 1.0);
    Eigen::VectorXd thetas(cfg.map_theta_cells);
    for (int i = 0; i < cfg.map_theta_cells; ++i) thetas(i) = M_PI * i / cfg.map_theta_cells;

    for (double N : cfg.N_grid) {
        for (double delta : cfg.delta_grid) {
            const VarianceMap map = variance_map(N, delta, betas, thetas, cfg.tail_tol);
            for (Eigen::Index i = 0; i < betas.size(); ++i) {
                for (Eigen::Index j = 0; j < thetas.size(); ++j) {
                    std::vector<std::string> row(table.columns.size());
                    row[0] = format_double(N);
                    row[1] = format_double(delta);
                    row[2] = format_double(betas(i));
                    row[3] = format_double(thetas(j));
                    row[4] = format_double(map.variance(i, j));
                    row[5] = (i == map.argmin_beta && j == map.argmin_theta) ? "1" : "0";
                    table.rows.push_back(std::move(row));
                }
            }
        }
    }
    return table;
}

// fit: log-quadratic fit of gamma(xi) from a sweep table (CSV)
inline ResultTable run_fit(const JobConfig& cfg, const ResultTable& input) {
    const int xi_col = input.column_index("xi");
    const int gamma_col = input.column_index("gamma");
    if (xi_col < 0 || gamma_col < 0)
        throw UsageError("fit input table must have 'xi' and 'gamma' columns");

    std::vector<SweepRecord> records;
    for (const auto& row : input.rows) {
        const std::string& xs = row[static_cast<std::size_t>(xi_col)];
        const std::string& gs = row[static_cast<std::size_t>(gamma_col)];
        if (xs.empty() || gs.empty()) continue;
        SweepRecord r;
        r.xi = std::strtod(xs.c_str(), nullptr);
        r.gamma = std::strtod(gs.c_str(), nullptr);
        records.push_back(r);
    }
    const FitResult fit = fit_gamma(records);

    ResultTable table;
    table.columns = {"a", "b", "c", "residual_rms", "n_records"};
    detail::stamp_provenance(table, cfg);
    table.rows.push_back({format_double(fit.a), format_double(fit.b), format_double(fit.c),
                          format_double(fit.residual_rms), std::to_string(records.size())});
    return table;
}

inline ResultTable run_fit(const JobConfig& cfg) {
    if (cfg.fit_input.empty()) throw UsageError("fit requires an input table (--input)");
    std::ifstream in(cfg.fit_input);
    if (!in) throw UsageError("cannot open fit input '" + cfg.fit_input + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return run_fit(cfg, parse_csv(ss.str()));
}

// crb-mc: Monte Carlo check of the Cramer-Rao bound for homodyne estimation
inline ResultTable run_crb_mc(const JobConfig& cfg) {
    detail::require_tolerances(cfg);
    detail::require_grid(cfg.N_grid, "N", 1e-9, 1e6);
    detail::require_grid(cfg.beta_grid, "beta", 0.0, 1.0);
    detail::require_grid(cfg.delta_grid, "Delta", 0.0, 1e3);
    detail::require_grid(cfg.theta_grid, "theta", -10.0, 10.0);
    if (cfg.N_grid.size() != 1 || cfg.beta_grid.size() != 1 || cfg.delta_grid.size() != 1 ||
        cfg.theta_grid.size() != 1)
        throw UsageError("crb-mc runs one configuration at a time (single-value grids)");
    if (cfg.samples < 100) throw UsageError("crb-mc needs at least 100 samples per batch");
    if (cfg.batches < 2) throw UsageError("crb-mc needs at least 2 batches");

    const double N = cfg.N_grid[0];
    const double beta = cfg.beta_grid[0];
    const double delta = cfg.delta_grid[0];
    const double theta = cfg.theta_grid[0];

    ResultTable table;
    table.columns = {"kind",  "batch", "N",       "beta",          "Delta", "theta",
                     "phi_true",       "M",       "phi_hat",       "batch_variance",
                     "F",              "crb",     "variance_over_crb"};
    detail::stamp_provenance(table, cfg);

    ProbeSpec spec{N, beta, delta, cfg.tail_tol, cfg.cutoff_limit};
    const FisherResult fr = homodyne_fisher(spec, cfg.phi_true, theta);
    const double crb = 1.0 / (double(cfg.samples) * fr.F);

    const EstimationSummary summary = sample_and_estimate(spec, cfg.phi_true, theta, cfg.samples,
                                                          cfg.seed, cfg.batches, cfg.workers);

    const auto common = [&](std::vector<std::string>& row) {
        row[2] = format_double(N);
        row[3] = format_double(beta);
        row[4] = format_double(delta);
        row[5] = format_double(theta);
        row[6] = format_double(cfg.phi_true);
        row[7] = std::to_string(cfg.samples);
        row[10] = format_double(fr.F);
        row[11] = format_double(crb);
    };
    for (int b = 0; b < cfg.batches; ++b) {
        std::vector<std::string> row(table.columns.size());
        row[0] = "batch";
        row[1] = std::to_string(b);
        common(row);
        row[8] = format_double(summary.batch_estimates[static_cast<std::size_t>(b)]);
        table.rows.push_back(std::move(row));
    }
    std::vector<std::string> row(table.columns.size());
    row[0] = "summary";
    row[1] = std::to_string(cfg.batches);
    common(row);
    row[8] = format_double(summary.phi_hat_mean);
    row[9] = format_double(summary.batch_variance);
    row[12] = format_double(summary.batch_variance / crb);
    table.rows.push_back(std::move(row));
    return table;
}

inline ResultTable run_command(const JobConfig& cfg) {
    if (cfg.command == "qfi") return run_qfi(cfg);
    if (cfg.command == "sweep") return run_sweep(cfg);
    if (cfg.command == "homodyne") return run_homodyne(cfg);
    if (cfg.command == "variance-map") return run_variance_map(cfg);
    if (cfg.command == "fit") return run_fit(cfg);
    if (cfg.command == "crb-mc") return run_crb_mc(cfg);
    throw UsageError("unknown command '" + cfg.command + "'");
}

} // namespace phasediff
