// homodyne.hpp — quadrature statistics of dephased, phase-shifted probes
//
// Convention: X_theta = (a e^{-i theta} + a^dag e^{i theta}) / 2, vacuum
// variance 1/4. The local-oscillator phase is absorbed into the state as
// elementwise band phases e^{i theta (n-m)}, so the measured distribution
// depends on phi0 and theta only through chi = theta - phi0.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "phasediff/channel.hpp"
#include "phasediff/errors.hpp"
#include "phasediff/fock.hpp"
#include "phasediff/parallel.hpp"

namespace phasediff {

inline constexpr double kPdfFloorRel = 1e-14;     // exclude p < rel*max(p) from the FI sum
inline constexpr double kPdfCoverageTol = 1e-6;   // normalization deficit triggering an error

struct QuadratureGrid {
    Eigen::VectorXd points;
    Eigen::VectorXd weights;
    double theta{0.0};
};

struct FisherResult {
    double F{0.0};
    double phi0{0.0};
    double theta{0.0};
};

struct VarianceMap {
    Eigen::VectorXd betas;
    Eigen::VectorXd thetas;
    Eigen::MatrixXd variance; // (beta index, theta index)
    int argmin_beta{0};
    int argmin_theta{0};
};

struct EstimationSummary {
    double phi_hat_mean{0.0};
    double batch_variance{0.0};
    int batches{0};
    std::int64_t samples_per_batch{0};
    std::vector<double> batch_estimates;
};

namespace detail {

// Gauss-Legendre nodes/weights on [-1, 1] by Newton iteration on P_n
inline void gauss_legendre(int order, std::vector<double>& x, std::vector<double>& w) {
    x.assign(order, 0.0);
    w.assign(order, 0.0);
    const int half = (order + 1) / 2;
    for (int i = 0; i < half; ++i) {
        double z = std::cos(M_PI * (i + 0.75) / (order + 0.5));
        double pp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = 0.0;
            for (int j = 0; j < order; ++j) {
                const double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j + 1.0) * z * p1 - j * p2) / (j + 1.0);
            }
            pp = order * (z * p0 - p1) / (z * z - 1.0);
            const double dz = p0 / pp;
            z -= dz;
            if (std::abs(dz) < 1e-15) break;
        }
        x[i] = -z;
        x[order - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
        w[order - 1 - i] = w[i];
    }
}

} // namespace detail

// Half-width of the quadrature window for probes of energy N
inline double quadrature_halfwidth(double mean_photons) {
    return std::max(6.0, 4.0 * std::sqrt(std::max(mean_photons, 0.0)) + 6.0);
}

// Composite Gauss-Legendre grid on [-L, L]. Panel width shrinks with the
// cutoff so the fastest oscillation of psi_n psi_m stays resolved.
inline QuadratureGrid make_quadrature_grid(double half_width, int n_max) {
    if (!(half_width > 0.0)) throw DomainError("grid half-width must be positive");
    if (n_max < 0) throw DomainError("cutoff must be >= 0");
    constexpr int order = 16;
    const double k_max = 2.0 * std::sqrt(4.0 * n_max + 2.0);
    const double width = std::min(1.0, 20.0 / k_max);
    const int panels = std::max(2, static_cast<int>(std::ceil(2.0 * half_width / width)));

    std::vector<double> gx, gw;
    detail::gauss_legendre(order, gx, gw);

    QuadratureGrid grid;
    grid.points.resize(static_cast<Eigen::Index>(panels) * order);
    grid.weights.resize(static_cast<Eigen::Index>(panels) * order);
    const double h = 2.0 * half_width / panels;
    Eigen::Index k = 0;
    for (int p = 0; p < panels; ++p) {
        const double a = -half_width + p * h;
        for (int j = 0; j < order; ++j, ++k) {
            grid.points(k) = a + 0.5 * h * (gx[j] + 1.0);
            grid.weights(k) = 0.5 * h * gw[j];
        }
    }
    return grid;
}

inline QuadratureGrid make_quadrature_grid_for(double mean_photons, int n_max) {
    return make_quadrature_grid(quadrature_halfwidth(mean_photons), n_max);
}

// Harmonic-oscillator position eigenfunctions psi_n(x_k), scaled so the vacuum
// quadrature variance is 1/4. Upward recurrence
//   psi_{n+1} = (2x/sqrt(n+1)) psi_n - sqrt(n/(n+1)) psi_{n-1}
// run on Gaussian-free prefactors with a power-of-two rescale guard, so the
// seed exp(-x^2) can underflow without losing the large-n values.
inline Eigen::MatrixXd oscillator_wavefunctions(const QuadratureGrid& grid, int n_max) {
    if (n_max < 0) throw DomainError("cutoff must be >= 0");
    const Eigen::Index K = grid.points.size();
    Eigen::MatrixXd psi(K, n_max + 1);
    const double seed = std::pow(2.0 / M_PI, 0.25);
    constexpr double rescale = 0x1p-512;
    constexpr double rescale_log = 512.0 * M_LN2;
    constexpr double big = 0x1p+500;

    for (Eigen::Index k = 0; k < K; ++k) {
        const double x = grid.points(k);
        double carried_log = -x * x;
        double factor = std::exp(carried_log);
        double t_prev = 0.0;
        double t_cur = seed;
        psi(k, 0) = t_cur * factor;
        for (int n = 0; n < n_max; ++n) {
            double t_next = (2.0 * x / std::sqrt(n + 1.0)) * t_cur -
                            std::sqrt(n / (n + 1.0)) * t_prev;
            if (std::abs(t_next) > big) {
                t_next *= rescale;
                t_cur *= rescale;
                carried_log += rescale_log;
                factor = std::exp(carried_log);
            }
            t_prev = t_cur;
            t_cur = t_next;
            if (!std::isfinite(t_cur))
                throw RangeError("wavefunction recurrence overflow at n=" + std::to_string(n + 1) +
                                 ", x=" + std::to_string(x));
            psi(k, n + 1) = t_cur * factor;
        }
    }
    return psi;
}

namespace detail {

// Band contractions T_d(x_k) = sum_n rho_{n+d,n} psi_n(x_k) psi_{n+d}(x_k)
// for a real symmetric state; column d of the result holds T_d.
inline Eigen::MatrixXd quadrature_band_table(const Eigen::MatrixXd& rho,
                                             const Eigen::MatrixXd& psi) {
    const int d_max = static_cast<int>(rho.rows()) - 1;
    const Eigen::Index K = psi.rows();
    Eigen::MatrixXd table = Eigen::MatrixXd::Zero(K, d_max + 1);
    for (int d = 0; d <= d_max; ++d) {
        double band_mass = 0.0;
        for (int n = 0; n + d <= d_max; ++n) band_mass += std::abs(rho(n + d, n));
        if (band_mass == 0.0) continue;
        for (int n = 0; n + d <= d_max; ++n) {
            const double r = rho(n + d, n);
            if (r == 0.0) continue;
            table.col(d).noalias() += r * (psi.col(n).cwiseProduct(psi.col(n + d)));
        }
    }
    return table;
}

// p(x_k | chi) = T_0 + 2 sum_d T_d cos(d chi)
inline Eigen::VectorXd pdf_from_bands(const Eigen::MatrixXd& table, double chi) {
    const int d_max = static_cast<int>(table.cols()) - 1;
    Eigen::VectorXd p = table.col(0);
    for (int d = 1; d <= d_max; ++d) {
        const double c = std::cos(d * chi);
        if (c != 0.0) p.noalias() += (2.0 * c) * table.col(d);
    }
    return p;
}

// d/d phi0 of the pdf at chi = theta - phi0: 2 sum_d d T_d sin(d chi)
inline Eigen::VectorXd pdf_phase_derivative_from_bands(const Eigen::MatrixXd& table, double chi) {
    const int d_max = static_cast<int>(table.cols()) - 1;
    Eigen::VectorXd dp = Eigen::VectorXd::Zero(table.rows());
    for (int d = 1; d <= d_max; ++d) {
        const double s = std::sin(d * chi);
        if (s != 0.0) dp.noalias() += (2.0 * d * s) * table.col(d);
    }
    return dp;
}

inline void check_coverage(const Eigen::VectorXd& p, const Eigen::VectorXd& w) {
    const double mass = w.dot(p);
    if (1.0 - mass > kPdfCoverageTol)
        throw GridCoverageError("quadrature grid captures only " + std::to_string(mass) +
                                " of the probability mass");
}

inline Eigen::VectorXd clamp_pdf(Eigen::VectorXd p) {
    const double lo = p.minCoeff();
    if (lo < -1e-12)
        throw Error("homodyne pdf has negative value " + std::to_string(lo));
    for (Eigen::Index i = 0; i < p.size(); ++i)
        if (p(i) < 0.0) p(i) = 0.0;
    return p;
}

// Dephased probe as a real symmetric matrix, trimmed to its own tail
inline Eigen::MatrixXd dephased_probe_matrix(const ProbeSpec& spec, int* cutoff_out = nullptr,
                                             double* tail_out = nullptr) {
    validate_probe_spec(spec);
    const GaussianParams params = params_from_energy(spec.mean_photons, spec.beta);
    const int cap = choose_cutoff(spec.mean_photons, spec.delta, spec.tail_tol, spec.cutoff_limit);
    Eigen::VectorXd c = probe_amplitudes(params, cap);
    const int m = trim_cutoff(c, spec.tail_tol);
    c.conservativeResize(m + 1);
    if (cutoff_out) *cutoff_out = m;
    if (tail_out) *tail_out = 1.0 - c.squaredNorm();
    Eigen::MatrixXd rho = c * c.transpose();
    return dephase(rho, spec.delta);
}

} // namespace detail

// Quadrature distribution of a (generally complex) state at LO phase theta
inline Eigen::VectorXd homodyne_pdf(const DensityMatrix& rho, double theta,
                                    const QuadratureGrid& grid, const Eigen::MatrixXd& psi) {
    const int d_max = static_cast<int>(rho.rows()) - 1;
    if (psi.cols() != d_max + 1 || psi.rows() != grid.points.size())
        throw DomainError("wavefunction table does not match state/grid");
    const Eigen::Index K = grid.points.size();
    Eigen::VectorXd p = Eigen::VectorXd::Zero(K);
    for (int n = 0; n <= d_max; ++n) p += rho(n, n).real() * psi.col(n).cwiseAbs2();
    for (int d = 1; d <= d_max; ++d) {
        const std::complex<double> phase(std::cos(d * theta), std::sin(d * theta));
        Eigen::VectorXd band = Eigen::VectorXd::Zero(K);
        double band_mass = 0.0;
        for (int n = 0; n + d <= d_max; ++n) {
            const double re = std::real(rho(n + d, n) * phase);
            band_mass += std::abs(re);
            if (re != 0.0) band.noalias() += re * psi.col(n).cwiseProduct(psi.col(n + d));
        }
        if (band_mass != 0.0) p.noalias() += 2.0 * band;
    }
    p = detail::clamp_pdf(std::move(p));
    detail::check_coverage(p, grid.weights);
    return p;
}

inline Eigen::VectorXd homodyne_pdf(const DensityMatrix& rho, double theta,
                                    const QuadratureGrid& grid) {
    const int n_max = static_cast<int>(rho.rows()) - 1;
    return homodyne_pdf(rho, theta, grid, oscillator_wavefunctions(grid, n_max));
}

namespace detail {

inline double fisher_from_band_table(const Eigen::MatrixXd& table, const Eigen::VectorXd& weights,
                                     double chi) {
    Eigen::VectorXd p = pdf_from_bands(table, chi);
    p = clamp_pdf(std::move(p));
    check_coverage(p, weights);
    const Eigen::VectorXd dp = pdf_phase_derivative_from_bands(table, chi);
    const double floor = kPdfFloorRel * p.maxCoeff();
    double F = 0.0;
    for (Eigen::Index k = 0; k < p.size(); ++k) {
        if (p(k) < floor) continue;
        F += weights(k) * dp(k) * dp(k) / p(k);
    }
    return F;
}

} // namespace detail

// Classical Fisher information of homodyne detection at evaluation point phi0.
// The pdf derivative comes from the commutator band formula, not finite
// differences.
inline FisherResult homodyne_fisher(const ProbeSpec& spec, double phi0, double theta,
                                    const QuadratureGrid& grid) {
    Eigen::MatrixXd rho = detail::dephased_probe_matrix(spec);
    const int n_max = static_cast<int>(rho.rows()) - 1;
    const Eigen::MatrixXd psi = oscillator_wavefunctions(grid, n_max);
    const Eigen::MatrixXd table = detail::quadrature_band_table(rho, psi);
    FisherResult res;
    res.F = detail::fisher_from_band_table(table, grid.weights, theta - phi0);
    res.phi0 = phi0;
    res.theta = theta;
    return res;
}

inline FisherResult homodyne_fisher(const ProbeSpec& spec, double phi0, double theta) {
    const int n_max = choose_cutoff(spec.mean_photons, spec.delta, spec.tail_tol,
                                    spec.cutoff_limit);
    return homodyne_fisher(spec, phi0, theta,
                           make_quadrature_grid_for(spec.mean_photons, n_max));
}

// F maximized over the evaluation point phi0 (coarse scan + golden refinement);
// the comparison against the phi-independent QFI uses this value.
inline FisherResult max_fisher_over_phase(const ProbeSpec& spec, double theta,
                                          const QuadratureGrid& grid) {
    Eigen::MatrixXd rho = detail::dephased_probe_matrix(spec);
    const int n_max = static_cast<int>(rho.rows()) - 1;
    const Eigen::MatrixXd psi = oscillator_wavefunctions(grid, n_max);
    const Eigen::MatrixXd table = detail::quadrature_band_table(rho, psi);

    const auto F_of_chi = [&](double chi) {
        return detail::fisher_from_band_table(table, grid.weights, chi);
    };

    // F is pi-periodic in chi for these real symmetric states
    constexpr int coarse = 48;
    double best_chi = 0.0, best_F = -1.0;
    for (int i = 0; i < coarse; ++i) {
        const double chi = M_PI * i / coarse;
        const double F = F_of_chi(chi);
        if (F > best_F) {
            best_F = F;
            best_chi = chi;
        }
    }
    double a = best_chi - M_PI / coarse;
    double b = best_chi + M_PI / coarse;
    const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - gr * (b - a), d = a + gr * (b - a);
    double fc = F_of_chi(c), fd = F_of_chi(d);
    while (b - a > 1e-5) {
        if (fc > fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - gr * (b - a);
            fc = F_of_chi(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + gr * (b - a);
            fd = F_of_chi(d);
        }
    }
    const double chi_star = 0.5 * (a + b);
    const double F_star = F_of_chi(chi_star);
    FisherResult res;
    if (F_star >= best_F) {
        res.F = F_star;
        res.phi0 = theta - chi_star;
    } else {
        res.F = best_F;
        res.phi0 = theta - best_chi;
    }
    res.theta = theta;
    return res;
}

inline FisherResult max_fisher_over_phase(const ProbeSpec& spec, double theta = 0.0) {
    const int n_max = choose_cutoff(spec.mean_photons, spec.delta, spec.tail_tol,
                                    spec.cutoff_limit);
    return max_fisher_over_phase(spec, theta, make_quadrature_grid_for(spec.mean_photons, n_max));
}

// Var X_theta from ladder-operator moments; no quadrature grid involved
inline double quadrature_variance(const DensityMatrix& rho, double theta) {
    std::complex<double> a1, a2;
    double n1;
    ladder_moments(rho, a1, a2, n1);
    const std::complex<double> e1(std::cos(theta), -std::sin(theta));
    const double mean = std::real(a1 * e1);
    const double second = 0.25 * (1.0 + 2.0 * n1 + 2.0 * std::real(a2 * e1 * e1));
    return second - mean * mean;
}

inline double quadrature_variance(const Eigen::MatrixXd& rho, double theta) {
    std::complex<double> a1, a2;
    double n1;
    ladder_moments(rho, a1, a2, n1);
    const std::complex<double> e1(std::cos(theta), -std::sin(theta));
    const double mean = std::real(a1 * e1);
    const double second = 0.25 * (1.0 + 2.0 * n1 + 2.0 * std::real(a2 * e1 * e1));
    return second - mean * mean;
}

// Map of Var X_theta over (beta, theta) for dephased probes of energy N
inline VarianceMap variance_map(double mean_photons, double delta, const Eigen::VectorXd& betas,
                                const Eigen::VectorXd& thetas,
                                double tail_tol = kDefaultTailTol) {
    if (betas.size() == 0 || thetas.size() == 0) throw DomainError("grids must be non-empty");
    VarianceMap map;
    map.betas = betas;
    map.thetas = thetas;
    map.variance.resize(betas.size(), thetas.size());
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < betas.size(); ++i) {
        ProbeSpec spec{mean_photons, betas(i), delta, tail_tol};
        const Eigen::MatrixXd rho = detail::dephased_probe_matrix(spec);
        for (Eigen::Index j = 0; j < thetas.size(); ++j) {
            const double v = quadrature_variance(rho, thetas(j));
            map.variance(i, j) = v;
            if (v < best) {
                best = v;
                map.argmin_beta = static_cast<int>(i);
                map.argmin_theta = static_cast<int>(j);
            }
        }
    }
    return map;
}

namespace detail {

inline Eigen::VectorXd default_beta_grid() { return Eigen::VectorXd::LinSpaced(21, 0.0, 1.0); }

inline Eigen::VectorXd default_theta_grid() {
    // [0, pi) in steps of pi/24; contains both 0 and pi/2 exactly
    Eigen::VectorXd t(24);
    for (int i = 0; i < 24; ++i) t(i) = M_PI * i / 24.0;
    return t;
}

// true when the variance argmin sits in the squeezed-probe regime
inline bool squeezed_regime(double mean_photons, double delta, double tail_tol) {
    const VarianceMap map = variance_map(mean_photons, delta, default_beta_grid(),
                                         default_theta_grid(), tail_tol);
    return map.betas(map.argmin_beta) > 0.5;
}

} // namespace detail

// Noise level where the minimum-variance strategy jumps from squeezed-vacuum
// probes to coherent probes; bisection on the regime indicator.
inline double noise_threshold(double mean_photons, double delta_lo, double delta_hi, double tol,
                              double tail_tol = kDefaultTailTol) {
    if (!(delta_lo >= 0.0) || !(delta_hi > delta_lo)) throw DomainError("invalid search interval");
    if (!(tol > 0.0)) throw DomainError("tolerance must be positive");
    const bool lo_regime = detail::squeezed_regime(mean_photons, delta_lo, tail_tol);
    const bool hi_regime = detail::squeezed_regime(mean_photons, delta_hi, tail_tol);
    if (lo_regime == hi_regime)
        throw NoCrossingError("variance argmin regime is identical at both interval endpoints");
    double lo = delta_lo, hi = delta_hi;
    while (hi - lo > tol) {
        const double mid = 0.5 * (lo + hi);
        if (detail::squeezed_regime(mean_photons, mid, tail_tol) == lo_regime)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// engine-independent uniform in [0, 1)
inline double uniform01(std::mt19937_64& rng) { return (rng() >> 11) * 0x1.0p-53; }

} // namespace detail

// Draw M homodyne outcomes per batch by inverse-CDF sampling and run a
// maximum-likelihood search for the phase on each batch. The search window is
// chi = theta - phi in (0, pi), the identifiable range of these even-in-chi
// distributions; phi_true must lie inside it. Deterministic for a given seed.
inline EstimationSummary sample_and_estimate(const ProbeSpec& spec, double phi_true, double theta,
                                             std::int64_t samples, std::uint64_t seed,
                                             int batches = 200, int workers = 0) {
    if (samples < 100) throw DomainError("at least 100 samples per batch required");
    if (batches < 2) throw DomainError("at least 2 batches required");
    const double chi_true = theta - phi_true;
    if (!(chi_true > 0.0) || !(chi_true < M_PI))
        throw EstimationError("phi_true outside the identifiable window (theta - pi, theta)");

    Eigen::MatrixXd rho = detail::dephased_probe_matrix(spec);
    const int n_max = static_cast<int>(rho.rows()) - 1;

    // phase information lives in the off-diagonal bands
    double coherence = 0.0;
    for (int d = 1; d <= n_max; ++d)
        for (int n = 0; n + d <= n_max; ++n) coherence += std::abs(rho(n + d, n));
    if (coherence < 1e-12)
        throw EstimationError("distribution carries no phase information (fully dephased state)");

    // sampling CDF on a fine uniform grid, piecewise-linear density
    const double L = quadrature_halfwidth(spec.mean_photons);
    const int n_cells = 8192;
    Eigen::VectorXd xs(n_cells + 1);
    for (int i = 0; i <= n_cells; ++i) xs(i) = -L + 2.0 * L * i / n_cells;
    QuadratureGrid fine;
    fine.points = xs;
    fine.weights = Eigen::VectorXd::Constant(n_cells + 1, 2.0 * L / n_cells); // unused
    const Eigen::MatrixXd psi_fine = oscillator_wavefunctions(fine, n_max);
    const Eigen::MatrixXd table_fine = detail::quadrature_band_table(rho, psi_fine);
    Eigen::VectorXd pdf = detail::pdf_from_bands(table_fine, chi_true);
    pdf = detail::clamp_pdf(std::move(pdf));
    const double h = 2.0 * L / n_cells;
    Eigen::VectorXd cdf(n_cells + 1);
    cdf(0) = 0.0;
    for (int i = 0; i < n_cells; ++i) cdf(i + 1) = cdf(i) + 0.5 * h * (pdf(i) + pdf(i + 1));
    const double total = cdf(n_cells);
    if (1.0 - total > kPdfCoverageTol)
        throw GridCoverageError("sampling grid captures only " + std::to_string(total) +
                                " of the probability mass");

    const auto sample_one = [&](double u) {
        const double target = u * total;
        int lo = 0, hi = n_cells;
        while (lo + 1 < hi) {
            const int mid = (lo + hi) / 2;
            if (cdf(mid) <= target)
                lo = mid;
            else
                hi = mid;
        }
        // invert the quadratic CDF of the linear density on the cell
        const double rest = target - cdf(lo);
        const double p0 = pdf(lo), p1 = pdf(lo + 1);
        double t;
        const double slope = (p1 - p0) / h;
        if (std::abs(slope) * h < 1e-12 * std::max(p0, 1e-300)) {
            t = (p0 > 0.0) ? rest / p0 : 0.5 * h;
        } else {
            const double disc = p0 * p0 + 2.0 * slope * rest;
            t = (std::sqrt(std::max(disc, 0.0)) - p0) / slope;
        }
        t = std::clamp(t, 0.0, h);
        return xs(lo) + t;
    };

    const auto run_batch = [&](std::size_t b) {
        std::mt19937_64 rng(detail::splitmix64(seed ^ (0x1000 + std::uint64_t(b))));
        Eigen::MatrixXd bands(samples, n_max + 1);
        Eigen::VectorXd psi_x(n_max + 1);
        for (std::int64_t i = 0; i < samples; ++i) {
            const double x = sample_one(detail::uniform01(rng));
            // psi_n(x) by the same guarded recurrence
            double carried_log = -x * x;
            double factor = std::exp(carried_log);
            double t_prev = 0.0, t_cur = std::pow(2.0 / M_PI, 0.25);
            psi_x(0) = t_cur * factor;
            for (int n = 0; n < n_max; ++n) {
                double t_next = (2.0 * x / std::sqrt(n + 1.0)) * t_cur -
                                std::sqrt(n / (n + 1.0)) * t_prev;
                if (std::abs(t_next) > 0x1p+500) {
                    t_next *= 0x1p-512;
                    t_cur *= 0x1p-512;
                    carried_log += 512.0 * M_LN2;
                    factor = std::exp(carried_log);
                }
                t_prev = t_cur;
                t_cur = t_next;
                psi_x(n + 1) = t_cur * factor;
            }
            for (int d = 0; d <= n_max; ++d) {
                double acc = 0.0;
                for (int n = 0; n + d <= n_max; ++n) acc += rho(n + d, n) * psi_x(n) * psi_x(n + d);
                bands(i, d) = acc;
            }
        }

        const auto neg_loglik = [&](double chi) {
            double acc = 0.0;
            Eigen::VectorXd cosd(n_max + 1);
            for (int d = 0; d <= n_max; ++d) cosd(d) = (d == 0) ? 1.0 : 2.0 * std::cos(d * chi);
            Eigen::VectorXd p = bands * cosd;
            for (std::int64_t i = 0; i < samples; ++i) acc -= std::log(std::max(p(i), 1e-300));
            return acc;
        };

        // coarse scan of chi over (0, pi), then golden refinement
        constexpr int coarse = 64;
        double best_chi = chi_true, best_nll = std::numeric_limits<double>::infinity();
        for (int i = 1; i < coarse; ++i) {
            const double chi = M_PI * i / coarse;
            const double nll = neg_loglik(chi);
            if (nll < best_nll) {
                best_nll = nll;
                best_chi = chi;
            }
        }
        double a = std::max(1e-9, best_chi - M_PI / coarse);
        double bb = std::min(M_PI - 1e-9, best_chi + M_PI / coarse);
        const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
        double c = bb - gr * (bb - a), d = a + gr * (bb - a);
        double fc = neg_loglik(c), fd = neg_loglik(d);
        while (bb - a > 1e-7) {
            if (fc < fd) {
                bb = d;
                d = c;
                fd = fc;
                c = bb - gr * (bb - a);
                fc = neg_loglik(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + gr * (bb - a);
                fd = neg_loglik(d);
            }
        }
        return theta - 0.5 * (a + bb);
    };

    EstimationSummary out;
    out.batch_estimates =
        parallel_map<double>(static_cast<std::size_t>(batches), resolve_workers(workers), run_batch);
    out.batches = batches;
    out.samples_per_batch = samples;
    double mean = 0.0;
    for (double v : out.batch_estimates) mean += v;
    mean /= batches;
    double var = 0.0;
    for (double v : out.batch_estimates) var += (v - mean) * (v - mean);
    var /= (batches - 1);
    out.phi_hat_mean = mean;
    out.batch_variance = var;
    return out;
}

} // namespace phasediff
