// channel.hpp — phase-shift unitary and phase-diffusion dephasing map
//
// Both channels act elementwise on Fock-basis density matrices:
//   phase shift   rho_{n,m} -> e^{-i phi (n-m)} rho_{n,m}
//   dephasing     rho_{n,m} -> e^{-Delta^2 (n-m)^2} rho_{n,m}
// Diagonals (and hence energy) are conserved exactly by both.

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <complex>

#include "phasediff/errors.hpp"
#include "phasediff/fock.hpp"

namespace phasediff {

using DensityMatrix = Eigen::MatrixXcd;

inline void validate_noise(double delta) {
    if (!std::isfinite(delta) || delta < 0.0)
        throw DomainError("noise amplitude must be finite and >= 0");
}

inline DensityMatrix outer_product(const FockVector& psi) {
    return psi.amplitudes * psi.amplitudes.adjoint();
}

inline Eigen::MatrixXd outer_product_real(const Eigen::VectorXd& amplitudes) {
    return amplitudes * amplitudes.transpose();
}

// Band factors e^{-Delta^2 d^2}, d = 0..n_max; values below 1e-300 clamp to 0
inline Eigen::VectorXd dephasing_factors(int n_max, double delta) {
    validate_noise(delta);
    Eigen::VectorXd f(n_max + 1);
    const double d2 = delta * delta;
    for (int d = 0; d <= n_max; ++d) {
        const double v = std::exp(-d2 * double(d) * double(d));
        f(d) = (v < 1e-300) ? 0.0 : v;
    }
    return f;
}

template <typename Matrix>
inline Matrix dephase(const Matrix& rho, double delta) {
    const int n_max = static_cast<int>(rho.rows()) - 1;
    const Eigen::VectorXd f = dephasing_factors(n_max, delta);
    Matrix out(rho.rows(), rho.cols());
    for (int n = 0; n <= n_max; ++n)
        for (int m = 0; m <= n_max; ++m) out(n, m) = rho(n, m) * f(std::abs(n - m));
    return out;
}

inline DensityMatrix phase_shift(const DensityMatrix& rho, double phi) {
    if (!std::isfinite(phi)) throw DomainError("phase must be finite");
    const int n_max = static_cast<int>(rho.rows()) - 1;
    DensityMatrix out(rho.rows(), rho.cols());
    for (int n = 0; n <= n_max; ++n) {
        for (int m = 0; m <= n_max; ++m) {
            const int d = n - m;
            if (d == 0) {
                out(n, m) = rho(n, m); // diagonal unchanged bit-for-bit
            } else {
                const double arg = -phi * double(d);
                out(n, m) = rho(n, m) * std::complex<double>(std::cos(arg), std::sin(arg));
            }
        }
    }
    return out;
}

// Hermiticity / trace / positivity witness used by tests and entry points.
// Positivity is checked against the -1e-10 floor only when requested (it costs
// an eigendecomposition).
inline void validate_density(const DensityMatrix& rho, double trace_tol = 1e-8,
                             bool check_positivity = false) {
    if (rho.rows() != rho.cols() || rho.rows() < 1)
        throw DomainError("density matrix must be square and non-empty");
    const double herm = (rho - rho.adjoint()).cwiseAbs().maxCoeff();
    if (herm > 1e-12) throw DomainError("density matrix is not Hermitian");
    const double tr = rho.trace().real();
    if (std::abs(tr - 1.0) > trace_tol) throw DomainError("density matrix trace is not 1");
    if (check_positivity) {
        Eigen::SelfAdjointEigenSolver<DensityMatrix> es(rho, Eigen::EigenvaluesOnly);
        if (es.eigenvalues().minCoeff() < -1e-10)
            throw PositivityError("density matrix has eigenvalue below -1e-10");
    }
}

// Ladder-operator moments <a>, <a^2>, <a^dag a>, read off the first three bands
template <typename Matrix>
inline void ladder_moments(const Matrix& rho, std::complex<double>& a1, std::complex<double>& a2,
                           double& n1) {
    const int n_max = static_cast<int>(rho.rows()) - 1;
    a1 = {0.0, 0.0};
    a2 = {0.0, 0.0};
    n1 = 0.0;
    for (int n = 0; n <= n_max; ++n) {
        n1 += double(n) * std::real(std::complex<double>(rho(n, n)));
        // Tr[a rho] picks up rho_{n+1,n}, Tr[a^2 rho] picks up rho_{n+2,n}
        if (n + 1 <= n_max) a1 += std::sqrt(double(n + 1)) * std::complex<double>(rho(n + 1, n));
        if (n + 2 <= n_max)
            a2 += std::sqrt(double(n + 1) * double(n + 2)) * std::complex<double>(rho(n + 2, n));
    }
}

} // namespace phasediff
