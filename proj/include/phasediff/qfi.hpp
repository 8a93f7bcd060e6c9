// qfi.hpp — quantum Fisher information of dephased Gaussian probes
//
// H = 2 sum_{n != m} (l_n - l_m)^2 / (l_n + l_m) |<l_n| a^dag a |l_m>|^2
// evaluated on the spectrum of the dephased (unshifted) state. Probes built
// from real parameters give real symmetric matrices; that fast path is the
// default, with a complex-Hermitian route for phase-shifted inputs.

#pragma once

#include <complex>
#define lapack_complex_float std::complex<float>
#define lapack_complex_double std::complex<double>
#include <lapacke.h>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "phasediff/channel.hpp"
#include "phasediff/errors.hpp"
#include "phasediff/fock.hpp"

namespace phasediff {

inline constexpr double kDegeneracyFloor = 1e-12; // skip pairs with l_n + l_m below this
inline constexpr double kEigenvalueFloor = -1e-10; // clamp [floor, 0) to 0, error below
inline constexpr double kImagStripTol = 1e-13;     // largest imaginary part stripped silently
inline constexpr double kQfiConvergenceRel = 1e-3; // cutoff-doubling acceptance (0.1%)

// Eigenvalues (descending) and eigenvectors of a dephased probe state.
// Row n of `vectors` holds the Fock-basis coefficients r_{nk} of |l_n>.
struct SpectralData {
    Eigen::VectorXd eigenvalues;
    Eigen::MatrixXd vectors;

    int n_max() const { return static_cast<int>(eigenvalues.size()) - 1; }
};

struct QfiResult {
    double H{0.0};
    std::int64_t n_terms_used{0};
    std::int64_t degeneracy_skipped{0};
    int cutoff{-1};
    double tail_mass{0.0};
};

namespace detail {

inline void clamp_eigenvalues(Eigen::VectorXd& w) {
    const double lo = w.minCoeff();
    if (lo < kEigenvalueFloor)
        throw PositivityError("eigenvalue " + std::to_string(lo) + " below positivity floor");
    for (Eigen::Index i = 0; i < w.size(); ++i)
        if (w(i) < 0.0) w(i) = 0.0;
}

// LAPACK dsyevd on a real symmetric matrix; rows of the result are eigenvectors
inline SpectralData eigh_real(const Eigen::MatrixXd& sym) {
    const int d = static_cast<int>(sym.rows());
    Eigen::MatrixXd a = sym; // column-major storage, overwritten with eigenvectors
    Eigen::VectorXd w(d);
    const int info = LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'V', 'L', d, a.data(), d, w.data());
    if (info != 0) throw Error("dsyevd failed with info=" + std::to_string(info));

    SpectralData out;
    out.eigenvalues.resize(d);
    out.vectors.resize(d, d);
    for (int i = 0; i < d; ++i) { // ascending -> descending
        out.eigenvalues(i) = w(d - 1 - i);
        out.vectors.row(i) = a.col(d - 1 - i).transpose();
    }
    clamp_eigenvalues(out.eigenvalues);
    return out;
}

// Compensated sum in ascending magnitude; the eigenvalue tail spreads the
// terms across many orders of magnitude.
inline double sorted_kahan_sum(std::vector<double>& terms) {
    std::sort(terms.begin(), terms.end(),
              [](double x, double y) { return std::abs(x) < std::abs(y); });
    double sum = 0.0, comp = 0.0;
    for (double t : terms) {
        const double y = t - comp;
        const double s = sum + y;
        comp = (s - sum) - y;
        sum = s;
    }
    return sum;
}

} // namespace detail

// Diagonalize a dephased probe state. The matrix must be Hermitian with
// imaginary parts below kImagStripTol (phase-shifted inputs belong on the
// complex-Hermitian path instead, see qfi_hermitian).
inline SpectralData eigendecompose(const DensityMatrix& rho) {
    if (rho.rows() != rho.cols() || rho.rows() < 1)
        throw DomainError("density matrix must be square and non-empty");
    const double herm = (rho - rho.adjoint()).cwiseAbs().maxCoeff();
    if (herm > 1e-12) throw DomainError("density matrix is not Hermitian");
    const double imag = rho.imag().cwiseAbs().maxCoeff();
    if (imag > kImagStripTol)
        throw ConventionError(
            "density matrix has imaginary parts " + std::to_string(imag) +
            "; the QFI of a phase-shifted state should use the complex-Hermitian path");
    Eigen::MatrixXd sym = 0.5 * (rho.real() + rho.real().transpose());
    return detail::eigh_real(sym);
}

// QFI with generator eigenvalues g_k attached to basis index k (g_k = k for
// the photon-number generator on the full Fock basis).
inline QfiResult qfi_phase(const SpectralData& spec, const Eigen::VectorXd& g_values) {
    const int d = static_cast<int>(spec.eigenvalues.size());
    if (g_values.size() != d) throw DomainError("generator values do not match spectrum size");

    // <l_n|G|l_m> = sum_k r_{nk} g_k r_{mk}
    Eigen::MatrixXd gmat = spec.vectors * g_values.asDiagonal() * spec.vectors.transpose();

    QfiResult res;
    std::vector<double> terms;
    terms.reserve(static_cast<std::size_t>(d) * (d - 1) / 2);
    for (int n = 0; n < d; ++n) {
        for (int m = n + 1; m < d; ++m) {
            const double ln = spec.eigenvalues(n), lm = spec.eigenvalues(m);
            const double denom = ln + lm;
            if (denom < kDegeneracyFloor) {
                res.degeneracy_skipped += 2; // both ordered pairs
                continue;
            }
            const double diff = ln - lm;
            // 2x for the symmetric ordered pair, 2x from the QFI prefactor
            terms.push_back(4.0 * diff * diff / denom * gmat(n, m) * gmat(n, m));
            res.n_terms_used += 2;
        }
    }
    res.H = detail::sorted_kahan_sum(terms);
    if (res.H < 0.0) res.H = 0.0; // roundoff guard; every term is >= 0
    return res;
}

inline QfiResult qfi_phase(const SpectralData& spec) {
    const int d = static_cast<int>(spec.eigenvalues.size());
    return qfi_phase(spec, Eigen::VectorXd::LinSpaced(d, 0.0, double(d - 1)));
}

// Complex-Hermitian path (zheevd); valid for phase-shifted inputs
inline QfiResult qfi_hermitian(const DensityMatrix& rho) {
    if (rho.rows() != rho.cols() || rho.rows() < 1)
        throw DomainError("density matrix must be square and non-empty");
    const double herm = (rho - rho.adjoint()).cwiseAbs().maxCoeff();
    if (herm > 1e-12) throw DomainError("density matrix is not Hermitian");

    const int d = static_cast<int>(rho.rows());
    DensityMatrix a = rho;
    Eigen::VectorXd w(d);
    const int info = LAPACKE_zheevd(LAPACK_COL_MAJOR, 'V', 'L', d, a.data(), d, w.data());
    if (info != 0) throw Error("zheevd failed with info=" + std::to_string(info));
    detail::clamp_eigenvalues(w);

    // columns of `a` are eigenvectors, eigenvalues ascending
    Eigen::VectorXd g = Eigen::VectorXd::LinSpaced(d, 0.0, double(d - 1));
    DensityMatrix gmat = a.adjoint() * g.asDiagonal() * a;

    QfiResult res;
    std::vector<double> terms;
    terms.reserve(static_cast<std::size_t>(d) * (d - 1) / 2);
    for (int n = 0; n < d; ++n) {
        for (int m = n + 1; m < d; ++m) {
            const double denom = w(n) + w(m);
            if (denom < kDegeneracyFloor) {
                res.degeneracy_skipped += 2;
                continue;
            }
            const double diff = w(n) - w(m);
            terms.push_back(4.0 * diff * diff / denom * std::norm(gmat(n, m)));
            res.n_terms_used += 2;
        }
    }
    res.H = detail::sorted_kahan_sum(terms);
    if (res.H < 0.0) res.H = 0.0;
    return res;
}

// Noiseless oracle: H = 4 (<n^2> - <n>^2) for a pure probe
inline double pure_qfi(const FockVector& psi) {
    double m1 = 0.0, m2 = 0.0;
    for (int n = 0; n <= psi.n_max(); ++n) {
        const double p = std::norm(psi.amplitudes(n));
        m1 += double(n) * p;
        m2 += double(n) * double(n) * p;
    }
    return 4.0 * (m2 - m1 * m1);
}

namespace detail {

// QFI of the dephased probe at a fixed cutoff. Probes without displacement
// live on the even Fock sector only; the computation then runs on the
// compressed even block with generator values 2k.
inline QfiResult qfi_at_cutoff(const GaussianParams& params, double delta, int n_max) {
    QfiResult res;
    res.cutoff = n_max;
    const Eigen::VectorXd c = probe_amplitudes(params, n_max);
    res.tail_mass = 1.0 - c.squaredNorm();

    if (params.alpha == 0.0) {
        const int half = n_max / 2;
        Eigen::VectorXd even(half + 1);
        Eigen::VectorXd g(half + 1);
        for (int k = 0; k <= half; ++k) {
            even(k) = c(2 * k);
            g(k) = 2.0 * k;
        }
        Eigen::MatrixXd rho = even * even.transpose();
        // compressed index distance k-l maps to Fock distance 2(k-l), so the
        // dephasing amplitude doubles on the even block
        rho = dephase(rho, 2.0 * delta);
        SpectralData spec = eigh_real(rho);
        QfiResult q = qfi_phase(spec, g);
        q.cutoff = res.cutoff;
        q.tail_mass = res.tail_mass;
        return q;
    }

    Eigen::MatrixXd rho = c * c.transpose();
    rho = dephase(rho, delta);
    SpectralData spec = eigh_real(rho);
    QfiResult q = qfi_phase(spec);
    q.cutoff = res.cutoff;
    q.tail_mass = res.tail_mass;
    return q;
}

} // namespace detail

// Full pipeline: energy split -> probe -> dephase -> diagonalize -> QFI.
// The cutoff from choose_cutoff is verified by doubling until H moves by
// less than kQfiConvergenceRel.
inline QfiResult qfi_of_probe(const ProbeSpec& spec) {
    validate_probe_spec(spec);
    const GaussianParams params = params_from_energy(spec.mean_photons, spec.beta);

    int n = choose_cutoff(spec.mean_photons, spec.delta, spec.tail_tol, spec.cutoff_limit);
    QfiResult cur = detail::qfi_at_cutoff(params, spec.delta, n);
    for (;;) {
        if (2 * n > spec.cutoff_limit)
            throw ResourceError("cutoff verification exceeded hard limit " +
                                std::to_string(spec.cutoff_limit));
        QfiResult next = detail::qfi_at_cutoff(params, spec.delta, 2 * n);
        const double scale = std::max(std::abs(next.H), std::abs(cur.H));
        if (std::abs(next.H - cur.H) <= kQfiConvergenceRel * scale + 1e-12) return next;
        n *= 2;
        cur = next;
    }
}

} // namespace phasediff
