// fock.hpp — truncated Fock-space representation of pure Gaussian probes
//
// Probe family: |psi> = D(alpha) S(r) |0> with alpha, r real and non-negative,
// D(alpha) = exp{alpha (a^dag - a)} and S(r) = exp{(r/2)(a^dag^2 - a^2)}.
// The displacement points along the theta = 0 quadrature; the squeezing reduces
// fluctuations of the orthogonal theta = pi/2 quadrature.

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <string>

#include "phasediff/errors.hpp"

namespace phasediff {

inline constexpr double kDefaultTailTol = 1e-10;
inline constexpr int kDefaultCutoffLimit = 8192;
inline constexpr int kMinCutoff = 8;

struct GaussianParams {
    double alpha{0.0}; // displacement amplitude
    double r{0.0};     // squeezing parameter
};

// Probe description in energy coordinates: N = sinh^2 r + alpha^2, beta = sinh^2 r / N.
struct ProbeSpec {
    double mean_photons{0.0};
    double beta{0.0};
    double delta{0.0};
    double tail_tol{kDefaultTailTol};
    int cutoff_limit{kDefaultCutoffLimit};
};

struct FockVector {
    Eigen::VectorXcd amplitudes;

    int n_max() const { return static_cast<int>(amplitudes.size()) - 1; }
    double norm_sq() const { return amplitudes.squaredNorm(); }
    // Mass missing from the truncated expansion of a normalized state
    double tail_deficit() const { return 1.0 - norm_sq(); }
};

inline void validate_probe_spec(const ProbeSpec& spec) {
    if (!std::isfinite(spec.mean_photons) || spec.mean_photons < 0.0)
        throw DomainError("mean photon number must be finite and >= 0");
    if (!std::isfinite(spec.beta) || spec.beta < 0.0 || spec.beta > 1.0)
        throw DomainError("squeezing fraction must lie in [0, 1]");
    if (!std::isfinite(spec.delta) || spec.delta < 0.0)
        throw DomainError("noise amplitude must be finite and >= 0");
    if (!(spec.tail_tol > 0.0) || spec.tail_tol >= 1.0)
        throw DomainError("tail tolerance must lie in (0, 1)");
}

// Split the probe energy N into displacement and squeezing:
// r = asinh(sqrt(beta N)), alpha = sqrt((1 - beta) N).
inline GaussianParams params_from_energy(double mean_photons, double beta) {
    if (!std::isfinite(mean_photons) || mean_photons < 0.0)
        throw DomainError("mean photon number must be finite and >= 0");
    if (!std::isfinite(beta) || beta < 0.0 || beta > 1.0)
        throw DomainError("squeezing fraction must lie in [0, 1]");
    GaussianParams p;
    p.r = std::asinh(std::sqrt(beta * mean_photons));
    p.alpha = std::sqrt((1.0 - beta) * mean_photons);
    return p;
}

inline double mean_photon_closed_form(const GaussianParams& p) {
    const double sh = std::sinh(p.r);
    return sh * sh + p.alpha * p.alpha;
}

// Probe amplitudes <n|D(alpha)S(r)|0>, which are real for real (alpha, r).
// Three-term recurrence from the Bogoliubov relation
//   (a cosh r - a^dag sinh r)|psi> = alpha e^{-r} |psi>,
// seeded with <0|psi> = exp{-(alpha^2/2)(1 - tanh r)} / sqrt(cosh r).
inline Eigen::VectorXd probe_amplitudes(const GaussianParams& params, int n_max) {
    if (n_max < 0) throw DomainError("cutoff must be >= 0");
    if (!std::isfinite(params.alpha) || !std::isfinite(params.r))
        throw DomainError("probe parameters must be finite");

    const double alpha = params.alpha;
    const double r = params.r;
    const double ch = std::cosh(r);
    const double sh = std::sinh(r);
    const double drive = alpha * std::exp(-r);

    Eigen::VectorXd c(n_max + 1);
    c(0) = std::exp(-0.5 * alpha * alpha * (1.0 - std::tanh(r))) / std::sqrt(ch);
    if (n_max == 0) return c;
    c(1) = drive * c(0) / ch;
    for (int n = 1; n < n_max; ++n) {
        c(n + 1) = (drive * c(n) + sh * std::sqrt(double(n)) * c(n - 1)) /
                   (ch * std::sqrt(double(n + 1)));
    }
    return c;
}

inline FockVector build_probe(const GaussianParams& params, int n_max,
                              double tail_tol = kDefaultTailTol) {
    Eigen::VectorXd c = probe_amplitudes(params, n_max);
    const double deficit = 1.0 - c.squaredNorm();
    if (deficit > tail_tol)
        throw TruncationError("probe tail mass " + std::to_string(deficit) +
                                  " exceeds tolerance at cutoff " + std::to_string(n_max),
                              deficit);
    FockVector psi;
    psi.amplitudes = c.cast<std::complex<double>>();
    return psi;
}

inline double mean_photon(const FockVector& psi) {
    double acc = 0.0;
    for (int n = 0; n <= psi.n_max(); ++n) acc += double(n) * std::norm(psi.amplitudes(n));
    return acc;
}

// First and second moments of the photon number, <n> and <n^2>
inline std::pair<double, double> photon_number_moments(const Eigen::VectorXd& amplitudes) {
    double m1 = 0.0, m2 = 0.0;
    for (int n = 0; n < amplitudes.size(); ++n) {
        const double p = amplitudes(n) * amplitudes(n);
        m1 += double(n) * p;
        m2 += double(n) * double(n) * p;
    }
    return {m1, m2};
}

namespace detail {

// Tail mass of the squeezed vacuum beyond n_max. Among probes of energy N the
// squeezed vacuum (beta = 1) has the slowest-decaying number distribution, so
// its tail bounds the whole beta family.
inline double squeezed_vacuum_tail(double mean_photons, int n_max) {
    if (mean_photons <= 0.0) return 0.0;
    const double t = mean_photons / (mean_photons + 1.0); // tanh^2 r
    double term = 1.0 / std::sqrt(mean_photons + 1.0);    // P(0) = 1/cosh r
    double cum = term;
    for (int k = 1; 2 * k <= n_max; ++k) {
        term *= t * (2.0 * k - 1.0) / (2.0 * k);
        cum += term;
        if (term < 1e-320) break;
    }
    return 1.0 - cum;
}

} // namespace detail

// Smallest cutoff keeping the Fock tail of any probe with this energy below
// tail_tol. Starts from n = ceil(N + 10 sqrt(N+1) + 20), doubles until the
// tail test passes, then bisects down to the smallest passing value.
inline int choose_cutoff(double mean_photons, double /*delta*/, double tail_tol = kDefaultTailTol,
                         int hard_limit = kDefaultCutoffLimit) {
    if (!std::isfinite(mean_photons) || mean_photons < 0.0)
        throw DomainError("mean photon number must be finite and >= 0");
    if (!(tail_tol > 0.0) || tail_tol >= 1.0)
        throw DomainError("tail tolerance must lie in (0, 1)");

    int n = static_cast<int>(std::ceil(mean_photons + 10.0 * std::sqrt(mean_photons + 1.0) + 20.0));
    n = std::max(n, kMinCutoff);
    while (detail::squeezed_vacuum_tail(mean_photons, n) > tail_tol) {
        if (n > hard_limit / 2)
            throw ResourceError("cutoff search exceeded hard limit " + std::to_string(hard_limit));
        n *= 2;
    }
    int lo = kMinCutoff, hi = n; // smallest passing cutoff lies in (lo, hi]
    while (lo + 1 < hi) {
        const int mid = lo + (hi - lo) / 2;
        if (detail::squeezed_vacuum_tail(mean_photons, mid) > tail_tol)
            lo = mid;
        else
            hi = mid;
    }
    return detail::squeezed_vacuum_tail(mean_photons, lo) <= tail_tol ? lo : hi;
}

namespace detail {

// Smallest cutoff (>= kMinCutoff) at which this amplitude vector keeps its
// deficit from exact normalization below tail_tol.
inline int trim_cutoff(const Eigen::VectorXd& amplitudes, double tail_tol) {
    const int n_max = static_cast<int>(amplitudes.size()) - 1;
    double deficit = 1.0 - amplitudes.squaredNorm();
    int m = n_max;
    while (m > kMinCutoff) {
        const double next = deficit + amplitudes(m) * amplitudes(m);
        if (next > tail_tol) break;
        deficit = next;
        --m;
    }
    return m;
}

} // namespace detail

} // namespace phasediff
