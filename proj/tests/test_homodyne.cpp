#include <catch2/catch_amalgamated.hpp>

#include <phasediff/homodyne.hpp>
#include <phasediff/qfi.hpp>

#include "support/oracles.hpp"

using namespace phasediff;

namespace {

double grid_moment(const QuadratureGrid& grid, const Eigen::VectorXd& p, int power) {
    double acc = 0.0;
    for (Eigen::Index k = 0; k < p.size(); ++k)
        acc += grid.weights(k) * std::pow(grid.points(k), power) * p(k);
    return acc;
}

// moment-scaling route to the variance-map regime indicator, independent of
// variance_map / quadrature_variance internals: moments of the pure probe are
// computed once per beta, then scaled analytically per Delta
struct MomentScan {
    std::vector<double> a1, a2, n1; // per beta, pure-probe moments (all real)
    Eigen::VectorXd betas;

    explicit MomentScan(double N, int cells = 21) {
        betas = Eigen::VectorXd::LinSpaced(cells, 0.0, 1.0);
        const int n_max = choose_cutoff(N, 0.0);
        for (Eigen::Index i = 0; i < betas.size(); ++i) {
            const Eigen::VectorXd c = probe_amplitudes(params_from_energy(N, betas(i)), n_max);
            double m_a = 0.0, m_a2 = 0.0, m_n = 0.0;
            for (int n = 0; n < n_max; ++n) m_a += std::sqrt(n + 1.0) * c(n + 1) * c(n);
            for (int n = 0; n + 2 <= n_max; ++n)
                m_a2 += std::sqrt((n + 1.0) * (n + 2.0)) * c(n + 2) * c(n);
            for (int n = 0; n <= n_max; ++n) m_n += double(n) * c(n) * c(n);
            a1.push_back(m_a);
            a2.push_back(m_a2);
            n1.push_back(m_n);
        }
    }

    // true if the (beta, theta) variance argmin is in the squeezed regime
    bool squeezed_regime(double delta) const {
        const double f1 = std::exp(-delta * delta);
        const double f2 = std::exp(-4.0 * delta * delta);
        double best = std::numeric_limits<double>::infinity();
        double best_beta = 0.0;
        for (Eigen::Index i = 0; i < betas.size(); ++i) {
            for (double theta : {0.0, M_PI / 2.0}) {
                const double cos2 = std::cos(2.0 * theta);
                const double mean = f1 * a1[i] * std::cos(theta);
                const double var =
                    0.25 * (1.0 + 2.0 * n1[i] + 2.0 * f2 * a2[i] * cos2) - mean * mean;
                if (var < best) {
                    best = var;
                    best_beta = betas(i);
                }
            }
        }
        return best_beta > 0.5;
    }
};

} // namespace

TEST_CASE("oscillator wavefunctions: vacuum normalization and variance") {
    auto grid = make_quadrature_grid(8.0, 40);
    auto psi = oscillator_wavefunctions(grid, 40);
    const Eigen::VectorXd p0 = psi.col(0).cwiseAbs2();
    CHECK(grid.weights.dot(p0) == Catch::Approx(1.0).margin(1e-10));
    CHECK(grid.weights.dot(Eigen::VectorXd(p0.cwiseProduct(grid.points.cwiseAbs2()))) ==
          Catch::Approx(0.25).margin(1e-10));
}

TEST_CASE("oscillator wavefunctions: orthonormality up to n = 30") {
    auto grid = make_quadrature_grid(28.0, 30);
    auto psi = oscillator_wavefunctions(grid, 30);
    double worst = 0.0;
    for (int n = 0; n <= 30; ++n) {
        for (int m = n; m <= 30; ++m) {
            const double overlap =
                grid.weights.dot(Eigen::VectorXd(psi.col(n).cwiseProduct(psi.col(m))));
            worst = std::max(worst, std::abs(overlap - (n == m ? 1.0 : 0.0)));
        }
    }
    CHECK(worst < 1e-8);
}

TEST_CASE("oscillator wavefunctions: first excited state second moment") {
    auto grid = make_quadrature_grid(9.0, 8);
    auto psi = oscillator_wavefunctions(grid, 8);
    const double x2 = grid.weights.dot(
        Eigen::VectorXd(psi.col(1).cwiseAbs2().cwiseProduct(grid.points.cwiseAbs2())));
    CHECK(x2 == Catch::Approx(0.75).margin(1e-8));
}

TEST_CASE("homodyne pdf of the vacuum is the 1/4-variance Gaussian") {
    auto psi = build_probe({0.0, 0.0}, 16);
    auto rho = outer_product(psi);
    auto grid = make_quadrature_grid(8.0, 16);
    for (double theta : {0.0, 0.9}) {
        auto p = homodyne_pdf(rho, theta, grid);
        CHECK(grid.weights.dot(p) == Catch::Approx(1.0).margin(1e-8));
        CHECK(grid_moment(grid, p, 1) == Catch::Approx(0.0).margin(1e-10));
        CHECK(grid_moment(grid, p, 2) == Catch::Approx(0.25).margin(1e-8));
    }
}

TEST_CASE("homodyne pdf of a coherent probe is a displaced vacuum") {
    const double N = 2.0;
    const int n_max = choose_cutoff(N, 0.0);
    auto rho = outer_product(build_probe(params_from_energy(N, 0.0), n_max));
    auto grid = make_quadrature_grid_for(N, n_max);
    auto p = homodyne_pdf(rho, 0.0, grid);
    CHECK(grid_moment(grid, p, 1) == Catch::Approx(std::sqrt(2.0)).margin(1e-8));
    CHECK(grid_moment(grid, p, 2) - 2.0 == Catch::Approx(0.25).margin(1e-8));
}

TEST_CASE("fully dephased states give rotation-invariant pdfs") {
    const double N = 2.0;
    const int n_max = choose_cutoff(N, 6.0);
    auto rho = outer_product(build_probe(params_from_energy(N, 0.0), n_max));
    auto dep = dephase(rho, 6.0);
    auto grid = make_quadrature_grid_for(N, n_max);
    auto psi = oscillator_wavefunctions(grid, n_max);
    auto p0 = homodyne_pdf(dep, 0.3, grid, psi);
    auto p1 = homodyne_pdf(dep, 0.3 + M_PI / 2.0, grid, psi);
    CHECK((p0 - p1).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("pdf phase derivative matches central finite differences") {
    ProbeSpec spec{2.0, 0.5, 0.2};
    Eigen::MatrixXd rho = detail::dephased_probe_matrix(spec);
    const int n_max = static_cast<int>(rho.rows()) - 1;
    auto grid = make_quadrature_grid_for(2.0, n_max);
    auto psi = oscillator_wavefunctions(grid, n_max);
    auto table = detail::quadrature_band_table(rho, psi);

    const double chi = 0.4, h = 1e-5;
    const Eigen::VectorXd dp = detail::pdf_phase_derivative_from_bands(table, chi);
    // chi = theta - phi0, so d p / d phi0 = -d p / d chi
    const Eigen::VectorXd fd = (detail::pdf_from_bands(table, chi - h) -
                                detail::pdf_from_bands(table, chi + h)) /
                               (2.0 * h);
    CHECK((dp - fd).cwiseAbs().maxCoeff() < 1e-7);
}

TEST_CASE("homodyne saturates the QFI for noiseless squeezed vacua") {
    for (double N : {1.0, 2.0}) {
        ProbeSpec spec{N, 1.0, 0.0};
        auto fr = max_fisher_over_phase(spec, 0.0);
        const double H = 8.0 * (N * N + N);
        INFO("N=" << N);
        CHECK(fr.F == Catch::Approx(H).epsilon(0.01));
        CHECK(fr.F <= H * (1.0 + 1e-6));
    }
}

TEST_CASE("fully dephased states carry no Fisher information") {
    ProbeSpec spec{2.0, 1.0, 6.0};
    auto fr = homodyne_fisher(spec, 0.4, 0.0);
    CHECK(fr.F <= 1e-6);
}

TEST_CASE("coherent-probe F/H ratio approaches one with growing noise") {
    double prev_ratio = 0.0;
    for (double delta : {0.7, 1.0, 1.4, 2.2}) {
        ProbeSpec spec{5.0, 0.0, delta};
        const double F = max_fisher_over_phase(spec, 0.0).F;
        const double H = qfi_of_probe(spec).H;
        const double ratio = F / H;
        INFO("delta=" << delta << " F=" << F << " H=" << H);
        CHECK(ratio <= 1.0 + 1e-6);
        CHECK(ratio > prev_ratio);
        prev_ratio = ratio;
    }
    CHECK(prev_ratio > 0.9); // nearly optimal in the large-noise regime
}

TEST_CASE("Fisher information depends only on theta - phi0") {
    ProbeSpec spec{3.0, 0.5, 0.3};
    const int n_max = choose_cutoff(3.0, 0.3);
    auto grid = make_quadrature_grid_for(3.0, n_max);
    const double f0 = homodyne_fisher(spec, 0.2, 0.5, grid).F;
    const double f1 = homodyne_fisher(spec, 0.2 + 0.3, 0.5 + 0.3, grid).F;
    CHECK(f1 == Catch::Approx(f0).epsilon(1e-3));
}

TEST_CASE("quadrature variance: vacuum and squeezed vacuum") {
    auto vac = outer_product(build_probe({0.0, 0.0}, 10));
    CHECK(quadrature_variance(vac, 0.0) == Catch::Approx(0.25).margin(1e-12));
    CHECK(quadrature_variance(vac, 1.1) == Catch::Approx(0.25).margin(1e-12));

    const double N = 3.0;
    const double r = params_from_energy(N, 1.0).r;
    ProbeSpec spec{N, 1.0, 0.0};
    Eigen::MatrixXd rho = detail::dephased_probe_matrix(spec);
    double vmin = std::numeric_limits<double>::infinity();
    double tmin = 0.0;
    for (int i = 0; i < 180; ++i) {
        const double theta = M_PI * i / 180.0;
        const double v = quadrature_variance(rho, theta);
        if (v < vmin) {
            vmin = v;
            tmin = theta;
        }
    }
    CHECK(vmin == Catch::Approx(std::exp(-2.0 * r) / 4.0).margin(1e-8));
    CHECK(tmin == Catch::Approx(M_PI / 2.0).margin(M_PI / 180.0)); // measured squeezed angle
}

TEST_CASE("dephased coherent probes match the closed-form variance") {
    const double alpha2 = 2.0;
    for (double delta : {0.0, 0.3, 1.0, 2.0, 3.0}) {
        ProbeSpec spec{alpha2, 0.0, delta};
        Eigen::MatrixXd rho = detail::dephased_probe_matrix(spec);
        const double expect =
            0.25 + 0.5 * alpha2 * std::pow(1.0 - std::exp(-2.0 * delta * delta), 2);
        INFO("delta=" << delta);
        CHECK(quadrature_variance(rho, 0.0) == Catch::Approx(expect).margin(1e-8));
    }
}

TEST_CASE("grid-based and ladder-based moments agree") {
    ProbeSpec spec{4.0, 0.7, 0.4};
    Eigen::MatrixXd rho = detail::dephased_probe_matrix(spec);
    const int n_max = static_cast<int>(rho.rows()) - 1;
    auto grid = make_quadrature_grid_for(4.0, n_max);
    auto psi = oscillator_wavefunctions(grid, n_max);
    for (double theta : {0.0, 0.7}) {
        auto p = homodyne_pdf(rho.cast<std::complex<double>>(), theta, grid, psi);
        const double m1 = grid_moment(grid, p, 1);
        const double m2 = grid_moment(grid, p, 2);
        INFO("theta=" << theta);
        CHECK(quadrature_variance(rho, theta) == Catch::Approx(m2 - m1 * m1).margin(1e-7));
    }
}

TEST_CASE("variance map regimes at N = 10") {
    auto betas = detail::default_beta_grid();
    auto thetas = detail::default_theta_grid();

    auto noiseless = variance_map(10.0, 0.0, betas, thetas);
    CHECK(noiseless.betas(noiseless.argmin_beta) == 1.0);
    CHECK(noiseless.thetas(noiseless.argmin_theta) == Catch::Approx(M_PI / 2.0).margin(1e-12));

    auto low = variance_map(10.0, 0.1, betas, thetas);
    CHECK(low.betas(low.argmin_beta) == 1.0);
    CHECK(low.thetas(low.argmin_theta) == Catch::Approx(M_PI / 2.0).margin(1e-12));

    auto high = variance_map(10.0, 0.6, betas, thetas);
    CHECK(high.betas(high.argmin_beta) == 0.0);
    CHECK(high.thetas(high.argmin_theta) == 0.0);
}

TEST_CASE("noise threshold: bisection bracket and contract") {
    const double d_star = noise_threshold(10.0, 0.1, 0.6, 1e-3);
    CHECK(d_star > 0.1);
    CHECK(d_star < 0.6);

    // same regime at both endpoints
    CHECK_THROWS_AS(noise_threshold(10.0, 0.3, 0.6, 1e-3), NoCrossingError);
}

TEST_CASE("noise threshold against a dense scan, monotone in N") {
    double prev = std::numeric_limits<double>::infinity();
    const struct {
        double N, lo, hi;
    } cases[] = {{1.0, 0.1, 0.6}, {5.0, 0.05, 0.6}, {10.0, 0.05, 0.6}, {20.0, 0.02, 0.6}};
    for (const auto& c : cases) {
        const double bisect = noise_threshold(c.N, c.lo, c.hi, 1e-3);

        MomentScan scan(c.N);
        double dense = 0.0;
        bool prev_regime = scan.squeezed_regime(c.lo);
        for (double d = c.lo; d <= c.hi; d += 1e-3) {
            const bool regime = scan.squeezed_regime(d);
            if (regime != prev_regime) {
                dense = d - 0.5e-3;
                break;
            }
            prev_regime = regime;
        }
        INFO("N=" << c.N << " bisect=" << bisect << " dense=" << dense);
        CHECK(std::abs(bisect - dense) <= 2e-3);
        CHECK(bisect < prev);
        prev = bisect;
    }
}

TEST_CASE("sample_and_estimate rejects uninformative settings") {
    CHECK_THROWS_AS(sample_and_estimate({2.0, 0.0, 6.0}, 0.0, M_PI / 2.0, 1000, 1, 4),
                    EstimationError);
    CHECK_THROWS_AS(sample_and_estimate({2.0, 0.0, 0.1}, 0.5, 0.5, 1000, 1, 4), EstimationError);
    CHECK_THROWS_AS(sample_and_estimate({2.0, 0.0, 0.1}, 0.0, M_PI / 2.0, 50, 1, 4), DomainError);
}

TEST_CASE("maximum-likelihood batches respect the Cramer-Rao bound") {
    ProbeSpec spec{4.0, 0.0, 0.1};
    const double theta = M_PI / 2.0, phi_true = 0.0;
    const std::int64_t M = 10000;
    const int batches = 200;
    const double F = homodyne_fisher(spec, phi_true, theta).F;
    auto est = sample_and_estimate(spec, phi_true, theta, M, 424242, batches);
    const double crb = 1.0 / (double(M) * F);
    const double rel_sd = std::sqrt(2.0 / (batches - 1));
    INFO("F=" << F << " var=" << est.batch_variance << " crb=" << crb);
    CHECK(est.batch_variance >= crb * (1.0 - 3.0 * rel_sd));
    CHECK(est.batch_variance <= crb * (1.0 + 5.0 * rel_sd)); // efficiency sanity band
    CHECK(std::abs(est.phi_hat_mean - phi_true) <
          5.0 * std::sqrt(est.batch_variance / batches));
    // determinism for a fixed seed
    auto once = sample_and_estimate(spec, phi_true, theta, 1000, 77, 4);
    auto twice = sample_and_estimate(spec, phi_true, theta, 1000, 77, 4);
    CHECK(once.phi_hat_mean == twice.phi_hat_mean);
    CHECK(once.batch_variance == twice.batch_variance);
}

TEST_CASE("grid coverage errors surface") {
    ProbeSpec spec{10.0, 0.0, 0.0};
    const int n_max = choose_cutoff(10.0, 0.0);
    auto rho = outer_product(build_probe(params_from_energy(10.0, 0.0), n_max));
    auto tiny = make_quadrature_grid(1.5, n_max);
    CHECK_THROWS_AS(homodyne_pdf(rho, 0.0, tiny), GridCoverageError);
}
