#include <catch2/catch_amalgamated.hpp>

#include <phasediff/fock.hpp>

#include "support/oracles.hpp"

using namespace phasediff;

TEST_CASE("params_from_energy splits the probe energy") {
    auto vac = params_from_energy(0.0, 0.0);
    CHECK(vac.alpha == 0.0);
    CHECK(vac.r == 0.0);

    auto sq = params_from_energy(5.0, 1.0);
    CHECK(sq.alpha == 0.0);
    CHECK(sq.r == Catch::Approx(std::asinh(std::sqrt(5.0))).epsilon(1e-14));

    auto mixed = params_from_energy(10.0, 0.5);
    CHECK(mixed.alpha == Catch::Approx(std::sqrt(5.0)).epsilon(1e-14));
    CHECK(mixed.r == Catch::Approx(std::asinh(std::sqrt(5.0))).epsilon(1e-14));
}

TEST_CASE("params_from_energy rejects out-of-range input") {
    CHECK_THROWS_AS(params_from_energy(-1.0, 0.5), DomainError);
    CHECK_THROWS_AS(params_from_energy(5.0, -0.1), DomainError);
    CHECK_THROWS_AS(params_from_energy(5.0, 1.1), DomainError);
    CHECK_THROWS_AS(params_from_energy(std::nan(""), 0.5), DomainError);
}

TEST_CASE("vacuum probe is the Fock ground state") {
    auto psi = build_probe({0.0, 0.0}, 12);
    CHECK(psi.amplitudes(0) == std::complex<double>(1.0, 0.0));
    for (int n = 1; n <= 12; ++n) CHECK(psi.amplitudes(n) == std::complex<double>(0.0, 0.0));
}

TEST_CASE("squeezed vacuum has exact odd-sector zeros") {
    auto psi = build_probe({0.0, 0.5}, 40);
    for (int n = 1; n <= 40; n += 2) CHECK(std::abs(psi.amplitudes(n)) == 0.0);
    // round trip through the energy parametrization
    const double N = std::sinh(0.5) * std::sinh(0.5);
    CHECK(mean_photon(psi) == Catch::Approx(N).margin(1e-10));
}

TEST_CASE("probe amplitudes match the matrix-exponential oracle") {
    // displaced squeezed state; oracle exponentiates the truncated generators
    // at four times the working cutoff
    const GaussianParams params{1.0, 0.5};
    const int n_max = choose_cutoff(mean_photon_closed_form(params), 0.0);
    const Eigen::VectorXd mine = probe_amplitudes(params, n_max);
    const Eigen::VectorXd ref = oracles::probe_amplitudes_expm(params.alpha, params.r, 4 * n_max);
    for (int n = 0; n <= n_max; ++n) CHECK(std::abs(mine(n) - ref(n)) < 1e-10);
}

TEST_CASE("oracle equivalence holds across the energy range") {
    for (double N : {0.5, 3.0, 10.0}) {
        for (double beta : {0.0, 0.4, 1.0}) {
            const GaussianParams params = params_from_energy(N, beta);
            const int n_max = choose_cutoff(N, 0.0);
            // doubled padding keeps the exponential's boundary error orders of
            // magnitude below the comparison tolerance
            const Eigen::VectorXd mine = probe_amplitudes(params, n_max);
            const Eigen::VectorXd ref =
                oracles::probe_amplitudes_expm(params.alpha, params.r, 2 * n_max);
            double worst = 0.0;
            for (int n = 0; n <= n_max; ++n) worst = std::max(worst, std::abs(mine(n) - ref(n)));
            INFO("N=" << N << " beta=" << beta << " worst=" << worst);
            CHECK(worst < 1e-10);
        }
    }
}

TEST_CASE("mean photon number recovers the energy parameter") {
    auto p5 = build_probe(params_from_energy(5.0, 1.0), choose_cutoff(5.0, 0.0));
    CHECK(mean_photon(p5) == Catch::Approx(5.0).margin(1e-6));

    auto p10 = build_probe(params_from_energy(10.0, 0.3), choose_cutoff(10.0, 0.0));
    CHECK(mean_photon(p10) == Catch::Approx(10.0).margin(1e-6));
    // cross-check against the closed form sinh^2 r + alpha^2
    CHECK(mean_photon_closed_form(params_from_energy(10.0, 0.3)) ==
          Catch::Approx(10.0).epsilon(1e-12));
}

TEST_CASE("normalization and energy consistency across the probe family") {
    for (double N : {0.0, 0.5, 2.0, 7.0}) {
        for (double beta : {0.0, 0.25, 0.5, 0.75, 1.0}) {
            const int n_max = choose_cutoff(N, 0.0);
            auto psi = build_probe(params_from_energy(N, beta), n_max);
            INFO("N=" << N << " beta=" << beta);
            CHECK(std::abs(1.0 - psi.norm_sq()) <= kDefaultTailTol);
            CHECK(std::abs(mean_photon(psi) - N) <= 1e-6 * (N + 1.0));
        }
    }
}

TEST_CASE("build_probe reports excess tail mass") {
    // a cutoff far below the support of an N=10 squeezed vacuum
    try {
        build_probe(params_from_energy(10.0, 1.0), 10);
        FAIL("expected TruncationError");
    } catch (const TruncationError& e) {
        CHECK(e.tail_mass > kDefaultTailTol);
        CHECK(e.tail_mass <= 1.0);
    }
}

TEST_CASE("choose_cutoff yields verified tails") {
    // vacuum needs only the floor
    CHECK(choose_cutoff(0.0, 0.0) <= 20);

    // verified post-hoc: the worst-case (squeezed vacuum) tail at the returned
    // cutoff is below tolerance
    const int n10 = choose_cutoff(10.0, 0.0, 1e-10);
    auto worst = build_probe(params_from_energy(10.0, 1.0), n10, 1e-10);
    CHECK(1.0 - worst.norm_sq() < 1e-10);

    // monotone in energy at fixed tolerance
    CHECK(choose_cutoff(30.0, 0.0, 1e-12) > choose_cutoff(10.0, 0.0, 1e-12));
}

TEST_CASE("choose_cutoff enforces the hard limit") {
    CHECK_THROWS_AS(choose_cutoff(1000.0, 0.0, 1e-12, 64), ResourceError);
}

TEST_CASE("probe spec validation") {
    CHECK_THROWS_AS(validate_probe_spec({-1.0, 0.5, 0.1}), DomainError);
    CHECK_THROWS_AS(validate_probe_spec({1.0, 1.5, 0.1}), DomainError);
    CHECK_THROWS_AS(validate_probe_spec({1.0, 0.5, -0.1}), DomainError);
    CHECK_NOTHROW(validate_probe_spec({1.0, 0.5, 0.1}));
}
