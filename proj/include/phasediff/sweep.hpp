// sweep.hpp — squeezing-fraction optimization, (N, Delta) sweeps, scaling
// checks, and the log-quadratic fit of the collapse function gamma(xi) = H Delta / N

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "phasediff/errors.hpp"
#include "phasediff/fock.hpp"
#include "phasediff/homodyne.hpp"
#include "phasediff/parallel.hpp"
#include "phasediff/qfi.hpp"

namespace phasediff {

inline constexpr double kDefaultBetaTol = 1e-3;

struct SweepRecord {
    double mean_photons{0.0};
    double delta{0.0};
    double beta_opt{0.0};
    double H_opt{0.0};
    double xi{0.0};    // N * Delta
    double gamma{0.0}; // H * Delta / N
    std::optional<double> F_homodyne;
    int cutoff{-1};
    double tail_mass{0.0};
    std::string error; // empty on success
};

struct FitResult {
    double a{0.0};
    double b{0.0};
    double c{0.0};
    double residual_rms{0.0};
};

struct BetaOptimum {
    double beta_opt{0.0};
    double H_opt{0.0};
    int cutoff{-1};
    double tail_mass{0.0};
};

struct CrbBound {
    double qcrb{0.0};       // 1 / (M H)
    double gamma_form{0.0}; // Delta / (gamma N) / M
};

namespace detail {

// H(beta) at fixed (N, Delta); probes are trimmed to their own tail so the
// search does not pay the beta = 1 worst-case cutoff at every point
inline double qfi_at_beta(double mean_photons, double delta, double beta, int cutoff_cap,
                          double tail_tol) {
    const GaussianParams params = params_from_energy(mean_photons, beta);
    const Eigen::VectorXd c = probe_amplitudes(params, cutoff_cap);
    const int m = trim_cutoff(c, tail_tol);
    return qfi_at_cutoff(params, delta, m).H;
}

// doubling-verified QFI starting from a trimmed cutoff
inline QfiResult verified_qfi_trimmed(const GaussianParams& params, double delta, int start,
                                      int cutoff_limit) {
    int n = start;
    QfiResult cur = qfi_at_cutoff(params, delta, n);
    for (;;) {
        if (2 * n > cutoff_limit)
            throw ResourceError("cutoff verification exceeded hard limit " +
                                std::to_string(cutoff_limit));
        QfiResult next = qfi_at_cutoff(params, delta, 2 * n);
        const double scale = std::max(std::abs(next.H), std::abs(cur.H));
        if (std::abs(next.H - cur.H) <= kQfiConvergenceRel * scale + 1e-12) return next;
        n *= 2;
        cur = next;
    }
}

} // namespace detail

// Maximize the QFI over the squeezing fraction: 11-point coarse grid followed
// by golden-section refinement; ties break toward larger beta. A multimodal
// coarse profile falls back to a fine scan before refining.
inline BetaOptimum optimize_beta(double mean_photons, double delta, double beta_tol = kDefaultBetaTol,
                                 double tail_tol = kDefaultTailTol,
                                 int cutoff_limit = kDefaultCutoffLimit) {
    if (!(mean_photons > 0.0)) throw DomainError("mean photon number must be > 0");
    validate_noise(delta);
    if (!(beta_tol > 0.0)) throw DomainError("beta tolerance must be positive");

    BetaOptimum out;
    if (delta == 0.0) {
        // noiseless case: the squeezed vacuum is optimal
        QfiResult q = qfi_of_probe({mean_photons, 1.0, 0.0, tail_tol, cutoff_limit});
        out.beta_opt = 1.0;
        out.H_opt = q.H;
        out.cutoff = q.cutoff;
        out.tail_mass = q.tail_mass;
        return out;
    }

    const int cap = choose_cutoff(mean_photons, delta, tail_tol, cutoff_limit);
    const auto H_of = [&](double beta) {
        return detail::qfi_at_beta(mean_photons, delta, beta, cap, tail_tol);
    };

    const int coarse_n = 11;
    Eigen::VectorXd grid = Eigen::VectorXd::LinSpaced(coarse_n, 0.0, 1.0);
    std::vector<double> H(coarse_n);
    for (int i = 0; i < coarse_n; ++i) H[i] = H_of(grid(i));

    int best = 0;
    for (int i = 1; i < coarse_n; ++i)
        if (H[i] >= H[best]) best = i; // >= ties toward larger beta

    // multimodality guard: a non-adjacent grid point within 0.1% of the peak
    // means the coarse profile cannot be trusted to bracket a single maximum
    bool suspicious = false;
    if (H[best] > 1e-12) {
        for (int i = 0; i < coarse_n; ++i)
            if (std::abs(i - best) >= 2 && H[i] >= H[best] * (1.0 - 1e-3)) suspicious = true;
    }

    double lo = grid(std::max(0, best - 1));
    double hi = grid(std::min(coarse_n - 1, best + 1));
    if (suspicious) {
        Eigen::VectorXd fine = Eigen::VectorXd::LinSpaced(101, 0.0, 1.0);
        double bestH = -1.0, bestB = 0.0;
        for (int i = 0; i < fine.size(); ++i) {
            const double h = H_of(fine(i));
            if (h >= bestH) {
                bestH = h;
                bestB = fine(i);
            }
        }
        lo = std::max(0.0, bestB - 0.01);
        hi = std::min(1.0, bestB + 0.01);
    }

    const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = lo, b = hi;
    double c = b - gr * (b - a), d = a + gr * (b - a);
    double fc = H_of(c), fd = H_of(d);
    while (b - a > beta_tol) {
        if (fc > fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - gr * (b - a);
            fc = H_of(c);
        } else { // ties move the window toward larger beta
            a = c;
            c = d;
            fc = fd;
            d = a + gr * (b - a);
            fd = H_of(d);
        }
    }
    double beta_star = 0.5 * (a + b);
    if (1.0 - beta_star < beta_tol) beta_star = 1.0;
    if (beta_star < beta_tol) beta_star = 0.0;

    // doubling-verified value at the optimum, from its own trimmed cutoff
    const GaussianParams params = params_from_energy(mean_photons, beta_star);
    const Eigen::VectorXd c = probe_amplitudes(params, cap);
    QfiResult q = detail::verified_qfi_trimmed(params, delta, detail::trim_cutoff(c, tail_tol),
                                               cutoff_limit);
    out.beta_opt = beta_star;
    out.H_opt = q.H;
    out.cutoff = q.cutoff;
    out.tail_mass = q.tail_mass;
    return out;
}

struct SweepOptions {
    double beta_tol{kDefaultBetaTol};
    double tail_tol{kDefaultTailTol};
    int cutoff_limit{kDefaultCutoffLimit};
    int workers{0};              // 0 = resolve from env / hardware
    bool with_homodyne{false};   // also report F at theta = 0, maximized over phi0
};

// One record per (N, Delta) grid point, each optimized over beta. Points run
// on a worker pool; output order is the row-major grid order regardless of
// scheduling. Per-point failures land in the record's error field.
inline std::vector<SweepRecord> qfi_surface(const Eigen::VectorXd& N_grid,
                                            const Eigen::VectorXd& Delta_grid,
                                            const SweepOptions& opt = {}) {
    if (N_grid.size() == 0 || Delta_grid.size() == 0) throw DomainError("grids must be non-empty");
    const std::size_t count = static_cast<std::size_t>(N_grid.size()) * Delta_grid.size();
    const int workers = resolve_workers(opt.workers);

    return parallel_map<SweepRecord>(count, workers, [&](std::size_t idx) {
        const double N = N_grid(static_cast<Eigen::Index>(idx) / Delta_grid.size());
        const double delta = Delta_grid(static_cast<Eigen::Index>(idx) % Delta_grid.size());
        SweepRecord rec;
        rec.mean_photons = N;
        rec.delta = delta;
        rec.xi = N * delta;
        try {
            BetaOptimum b = optimize_beta(N, delta, opt.beta_tol, opt.tail_tol, opt.cutoff_limit);
            rec.beta_opt = b.beta_opt;
            rec.H_opt = b.H_opt;
            rec.gamma = b.H_opt * delta / N;
            rec.cutoff = b.cutoff;
            rec.tail_mass = b.tail_mass;
            if (opt.with_homodyne) {
                ProbeSpec spec{N, b.beta_opt, delta, opt.tail_tol, opt.cutoff_limit};
                rec.F_homodyne = max_fisher_over_phase(spec, 0.0).F;
            }
        } catch (const std::exception& e) {
            rec.error = e.what();
        }
        return rec;
    });
}

// Relative deviation of Eq.-style rescaling: |H(N,D) - k^2 H(N/k, kD)| / H(N,D)
inline double check_qfi_scaling(double mean_photons, double delta, double k,
                                const SweepOptions& opt = {}) {
    if (!(k > 0.0)) throw DomainError("scale factor must be positive");
    if (mean_photons / k < 1.0) throw DomainError("rescaled energy N/k must stay >= 1");
    const double H1 = optimize_beta(mean_photons, delta, opt.beta_tol, opt.tail_tol,
                                    opt.cutoff_limit)
                          .H_opt;
    const double H2 = optimize_beta(mean_photons / k, k * delta, opt.beta_tol, opt.tail_tol,
                                    opt.cutoff_limit)
                          .H_opt;
    return std::abs(H1 - k * k * H2) / H1;
}

// Absolute deviation of the optimal squeezing fraction under the same rescaling
inline double check_beta_scaling(double mean_photons, double delta, double k,
                                 const SweepOptions& opt = {}) {
    if (!(k > 0.0)) throw DomainError("scale factor must be positive");
    if (mean_photons / k < 1.0) throw DomainError("rescaled energy N/k must stay >= 1");
    const double b1 = optimize_beta(mean_photons, delta, opt.beta_tol, opt.tail_tol,
                                    opt.cutoff_limit)
                          .beta_opt;
    const double b2 = optimize_beta(mean_photons / k, k * delta, opt.beta_tol, opt.tail_tol,
                                    opt.cutoff_limit)
                          .beta_opt;
    return std::abs(b1 - b2);
}

// Ordinary least squares of ln gamma against {1, ln xi, ln^2 xi}:
//   ln gamma = c - b ln xi - a ln^2 xi
inline FitResult fit_gamma(const std::vector<SweepRecord>& records) {
    std::vector<double> x, y;
    for (const auto& r : records) {
        if (!r.error.empty()) continue;
        if (r.gamma > 0.0 && r.xi > 0.0) {
            x.push_back(std::log(r.xi));
            y.push_back(std::log(r.gamma));
        }
    }
    const int n = static_cast<int>(x.size());
    if (n < 10) throw FitError("need at least 10 records with positive gamma");

    Eigen::MatrixXd A(n, 3);
    Eigen::VectorXd rhs(n);
    for (int i = 0; i < n; ++i) {
        A(i, 0) = 1.0;
        A(i, 1) = x[i];
        A(i, 2) = x[i] * x[i];
        rhs(i) = y[i];
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
    qr.setThreshold(1e-10);
    if (qr.rank() < 3) throw FitError("degenerate design matrix (xi values do not spread)");
    Eigen::Vector3d coef = qr.solve(rhs);

    FitResult fit;
    fit.c = coef(0);
    fit.b = -coef(1);
    fit.a = -coef(2);
    fit.residual_rms = std::sqrt((A * coef - rhs).squaredNorm() / n);
    return fit;
}

// Cramer-Rao variance lower bound after M repetitions, in both algebraic forms
inline CrbBound crb_bound(const SweepRecord& rec, std::int64_t repetitions) {
    if (repetitions < 1) throw DomainError("repetition count must be >= 1");
    CrbBound out;
    if (rec.H_opt <= 0.0) {
        out.qcrb = std::numeric_limits<double>::infinity();
        out.gamma_form = std::numeric_limits<double>::infinity();
        return out;
    }
    out.qcrb = 1.0 / (double(repetitions) * rec.H_opt);
    out.gamma_form = rec.delta / (rec.gamma * rec.mean_photons) / double(repetitions);
    return out;
}

} // namespace phasediff
