#include "rydbohm/errors.hpp"
#include "rydbohm/units.hpp"

#include <doctest.h>

#include <cmath>

using namespace rydbohm;
using namespace rydbohm::units;

TEST_CASE("atomic field unit maps to gamma = 1") {
    CHECK(gamma_from_tesla(2.350518e5) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(gamma_from_tesla(3.0) == doctest::Approx(1.27631e-5).epsilon(1e-5));
    CHECK(tesla_from_gamma(gamma_from_tesla(4.7)) == doctest::Approx(4.7).epsilon(1e-15));
}

TEST_CASE("non-positive or non-finite fields are rejected") {
    CHECK_THROWS_AS(gamma_from_tesla(0.0), InvalidInput);
    CHECK_THROWS_AS(gamma_from_tesla(-1.0), InvalidInput);
    CHECK_THROWS_AS(gamma_from_tesla(std::nan("")), InvalidInput);
    CHECK_THROWS_AS(scaled_energy(-0.1, 0.0), InvalidInput);
    CHECK_THROWS_AS(cyclotron_period_ps(-2.0), InvalidInput);
    CHECK_THROWS_AS(FieldConfig::from_tesla_and_n_eff(0.0, 40.0), InvalidInput);
    CHECK_THROWS_AS(gamma_for_scaled_energy(0.1, 24.0), InvalidInput);
}

TEST_CASE("scaled energy at n_eff = 55 and 3 T is close to -0.3") {
    const auto cfg = FieldConfig::from_tesla_and_n_eff(3.0, 55.0);
    CHECK(std::abs(cfg.epsilon + 0.30) <= 0.01);
    CHECK(cfg.E_au == doctest::Approx(-0.5 / (55.0 * 55.0)));
}

TEST_CASE("desk field strength at epsilon = -0.3, n_eff = 24") {
    const double gamma = gamma_for_scaled_energy(-0.3, 24.0);
    CHECK(gamma == doctest::Approx(1.56e-4).epsilon(0.01));
    // the inverse relation recovers epsilon exactly
    CHECK(scaled_energy(energy_from_n_eff(24.0), gamma) == doctest::Approx(-0.3).epsilon(1e-13));
    const auto cfg = FieldConfig::from_epsilon_and_n_eff(-0.3, 24.0);
    CHECK(cfg.gamma == doctest::Approx(gamma).epsilon(1e-15));
}

TEST_CASE("cyclotron period") {
    CHECK(std::abs(cyclotron_period_ps(gamma_from_tesla(3.0)) / 11.8 - 1.0) <= 0.015);
    CHECK(cyclotron_period_au(2.0 * pi) == doctest::Approx(1.0).epsilon(1e-15));
    const double t3 = cyclotron_period_ps(gamma_from_tesla(3.0));
    const double t6 = cyclotron_period_ps(gamma_from_tesla(6.0));
    CHECK(t6 == doctest::Approx(0.5 * t3).epsilon(1e-14));
}

TEST_CASE("time conversion") {
    CHECK(au_time_to_ps(1.0) == doctest::Approx(2.418884e-5).epsilon(1e-15));
    CHECK(ps_to_au_time(au_time_to_ps(12345.0)) == doctest::Approx(12345.0).epsilon(1e-15));
}

TEST_CASE("phase-space scaling round trip and launch radius") {
    const double gamma = gamma_from_tesla(3.0);
    PhasePoint p;
    p.r = {12.5, -3.25};
    p.p = {0.125, 0.0625};
    p.t = 1.0e5;
    const PhasePoint back = unscale_phase_point(scale_phase_point(p, gamma), gamma);
    for (int i = 0; i < 2; ++i) {
        CHECK(std::abs(back.r[i] - p.r[i]) <= 1e-12 * std::abs(p.r[i]));
        CHECK(std::abs(back.p[i] - p.p[i]) <= 1e-12 * std::abs(p.p[i]));
    }
    CHECK(std::abs(back.t - p.t) <= 1e-12 * p.t);

    PhasePoint launch;
    launch.r = {0.0, 10.0};
    CHECK(scale_phase_point(launch, gamma).r[1] == doctest::Approx(5.46e-3).epsilon(0.002));
}

TEST_CASE("scaled energy is invariant under E -> E/lambda^2, gamma -> gamma/lambda^3") {
    const double e = -0.5 / (30.0 * 30.0);
    const double gamma = 2.0e-5;
    for (double lambda : {0.5, 1.7, 3.0}) {
        const double scaled = scaled_energy(e / (lambda * lambda), gamma / (lambda * lambda * lambda));
        CHECK(scaled == doctest::Approx(scaled_energy(e, gamma)).epsilon(1e-13));
    }
}
