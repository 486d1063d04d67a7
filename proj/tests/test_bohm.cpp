#include "rydbohm/bohm.hpp"
#include "rydbohm/errors.hpp"

#include "support/fixtures.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace rydbohm;
using namespace rydbohm::bohm;
using wavepacket::complex;

namespace {

double potential(double rho, double z, double gamma) { return -1.0 / std::hypot(rho, z) + gamma * gamma * rho * rho / 8.0; }

// Points drawn from the initial density, away from the axis so finite-difference stencils fit.
std::vector<Point> interior_points(const Wavepacket& wp, int n, std::uint64_t seed) {
    std::vector<Point> out;
    for (const Point& p : sample_initial(wp, 2 * n, seed).initial) {
        if (p.rho > 5.0 && static_cast<int>(out.size()) < n) {
            out.push_back(p);
        }
    }
    return out;
}

// Bisection on a sign change of Re psi(t = 0) along the ray at angle theta.
Point node_on_ray(const Wavepacket& wp, double theta, double r_lo, double r_hi) {
    auto re = [&](double r) { return wavepacket::psi_at(wp, r * std::sin(theta), r * std::cos(theta), 0.0).value.real(); };
    double f_lo = re(r_lo);
    REQUIRE(f_lo * re(r_hi) < 0.0);
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (r_lo + r_hi);
        const double f_mid = re(mid);
        if ((f_mid < 0.0) == (f_lo < 0.0)) {
            r_lo = mid;
            f_lo = f_mid;
        } else {
            r_hi = mid;
        }
    }
    const double r = 0.5 * (r_lo + r_hi);
    return {r * std::sin(theta), r * std::cos(theta)};
}

} // namespace

TEST_CASE("pointwise formulas on a Gaussian with a plane-wave phase") {
    const double s = 1.7;
    const double k = 0.8;
    for (auto [rho, z] : {std::pair{0.3, -0.4}, {1.2, 2.0}, {2.5, 0.1}}) {
        const double r2 = rho * rho + z * z;
        quantum::PointValue<complex> pv;
        pv.value = std::exp(complex(-r2 / (2 * s * s), k * z));
        pv.d_rho = -rho / (s * s) * pv.value;
        pv.d_z = complex(-z / (s * s), k) * pv.value;
        pv.laplacian = pv.value * complex(-3.0 / (s * s) + r2 / std::pow(s, 4) - k * k, -2.0 * k * z / (s * s));
        const VelocitySample v = velocity_from(pv);
        CHECK(std::abs(v.v_rho) < 1e-15);
        CHECK(v.v_z == doctest::Approx(k).epsilon(1e-14));
        const double q = -0.5 * (r2 / std::pow(s, 4) - 3.0 / (s * s));
        CHECK(quantum_potential_from(pv) == doctest::Approx(q).epsilon(1e-8));
    }
}

TEST_CASE("real stationary state: zero velocity, Q + V = E, fixed point") {
    const Wavepacket ws = fixtures::desk_eigenstate(9);
    const double e = ws.spectrum().energies[0];
    const double gamma = fixtures::desk_gamma();
    const NodeThresholds thr = NodeThresholds::relative_to(ws);
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    int checked = 0;
    for (const Point& p : interior_points(ws, 40, 5)) {
        const double t = uni(rng) * 5.0;
        try {
            const VelocitySample v = velocity(ws, p.rho, p.z, t, thr);
            CHECK(std::abs(v.v_rho) < 1e-12);
            CHECK(std::abs(v.v_z) < 1e-12);
            const double q = quantum_potential(ws, p.rho, p.z, t, thr);
            CHECK(std::abs(q + potential(p.rho, p.z, gamma) - e) < 1e-6 * std::abs(e));
            ++checked;
        } catch (const NodeSingularity&) {
        }
    }
    CHECK(checked >= 35);

    TrajectoryOptions opt;
    opt.thresholds = thr;
    const Point start = interior_points(ws, 1, 9).front();
    const BohmTrajectory tr = integrate_trajectory(ws, start, 0.0, 3.0, opt);
    CHECK(tr.status == TrajectoryStatus::completed);
    CHECK(tr.points.back().rho == doctest::Approx(start.rho).epsilon(1e-12));
    CHECK(tr.points.back().z == doctest::Approx(start.z).epsilon(1e-12));
}

TEST_CASE("velocity parity on the axis and the symmetry plane") {
    const auto& wp = fixtures::desk_wavepacket();
    const double t = 0.4 * fixtures::desk_cyclotron_ps();
    CHECK(velocity(wp, 0.0, 37.0, t).v_rho == 0.0);
    CHECK(std::abs(velocity(wp, 52.0, 0.0, t).v_z) < 1e-14);
}

TEST_CASE("current |psi|^2 v agrees with finite-difference gradients") {
    const auto& wp = fixtures::desk_wavepacket();
    const NodeThresholds thr = NodeThresholds::relative_to(wp);
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    const double tc = fixtures::desk_cyclotron_ps();
    double worst = 0.0;
    for (const Point& p : interior_points(wp, 30, 3)) {
        const double t = uni(rng) * 1.4 * tc;
        VelocitySample v;
        try {
            v = velocity(wp, p.rho, p.z, t, thr);
        } catch (const NodeSingularity&) {
            continue;
        }
        auto psi = [&](double rho, double z) { return wavepacket::psi_at(wp, rho, z, t).value; };
        auto deriv = [&](double h, bool along_rho) {
            const double dr = along_rho ? h : 0.0;
            const double dz = along_rho ? 0.0 : h;
            return (psi(p.rho + dr, p.z + dz) - psi(p.rho - dr, p.z - dz)) / (2.0 * h);
        };
        const double h = 0.05;
        const complex g_rho = (4.0 * deriv(0.5 * h, true) - deriv(h, true)) / 3.0;
        const complex g_z = (4.0 * deriv(0.5 * h, false) - deriv(h, false)) / 3.0;
        const complex value = psi(p.rho, p.z);
        const double j_rho = (std::conj(value) * g_rho).imag();
        const double j_z = (std::conj(value) * g_z).imag();
        const double amp2 = v.amp * v.amp;
        const double scale = std::abs(j_rho) + std::abs(j_z);
        worst = std::max({worst, std::abs(amp2 * v.v_rho - j_rho) / scale, std::abs(amp2 * v.v_z - j_z) / scale});
    }
    CHECK(worst < 1e-6);
}

TEST_CASE("continuity equation holds for the wavepacket") {
    const auto& wp = fixtures::desk_wavepacket();
    const NodeThresholds thr = NodeThresholds::relative_to(wp);
    std::mt19937_64 rng(29);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    const double tc = fixtures::desk_cyclotron_ps();
    int checked = 0;
    for (const Point& p : interior_points(wp, 30, 4)) {
        try {
            const ContinuityResidual c = continuity_residual(wp, p.rho, p.z, uni(rng) * 1.4 * tc, thr);
            CHECK(c.residual < 1e-5);
            ++checked;
        } catch (const NodeSingularity&) {
        }
    }
    CHECK(checked >= 25);
    CHECK_THROWS_AS(continuity_residual(wp, 0.01, 30.0, 0.0, thr), InvalidInput);
}

TEST_CASE("stationary state has no density change and no current divergence") {
    const Wavepacket ws = fixtures::desk_eigenstate(4);
    const ContinuityResidual c = continuity_residual(ws, 80.0, 60.0, 2.0);
    const double scale = std::norm(wavepacket::psi_at(ws, 80.0, 60.0, 2.0).value);
    CHECK(std::abs(c.density_rate) < 1e-14 * scale);
    CHECK(std::abs(c.divergence) < 1e-12 * scale);
}

TEST_CASE("threshold and position validation") {
    const auto& wp = fixtures::desk_wavepacket();
    CHECK_THROWS_AS(NodeThresholds::relative_to(wp, 1e-9, 1e-3), InvalidInput);
    CHECK_THROWS_AS(velocity(wp, -1.0, 3.0, 0.0), InvalidInput);
    CHECK_THROWS_AS(integrate_trajectory(wp, {10.0, 10.0}, 1.0, 0.5), InvalidInput);
    const NodeThresholds thr = NodeThresholds::relative_to(wp);
    CHECK(thr.hard > 0.0);
    CHECK(thr.hard < thr.node);
}

TEST_CASE("evaluation at a node") {
    const auto& wp = fixtures::desk_wavepacket();
    // Re psi(0) changes sign between these radii along theta = 0.7
    double lo = 0.0;
    double hi = 0.0;
    double previous = wavepacket::psi_at(wp, 20.0 * std::sin(0.7), 20.0 * std::cos(0.7), 0.0).value.real();
    for (double r = 21.0; r < 400.0; r += 1.0) {
        const double f = wavepacket::psi_at(wp, r * std::sin(0.7), r * std::cos(0.7), 0.0).value.real();
        if (f * previous < 0.0) {
            lo = r - 1.0;
            hi = r;
            break;
        }
        previous = f;
    }
    REQUIRE(hi > 0.0);
    const Point node = node_on_ray(wp, 0.7, lo, hi);
    const NodeThresholds thr = NodeThresholds::relative_to(wp);
    CHECK_THROWS_AS(velocity(wp, node.rho, node.z, 0.0, thr), NodeSingularity);
    CHECK_THROWS_AS(quantum_potential(wp, node.rho, node.z, 0.0, thr), NodeSingularity);

    TrajectoryOptions opt;
    opt.thresholds = thr;
    const BohmTrajectory tr = integrate_trajectory(wp, node, 0.0, 0.5, opt);
    CHECK(tr.status == TrajectoryStatus::node_stalled);
    CHECK(tr.min_amp_seen <= thr.hard);
}

TEST_CASE("trajectories stay in the quadrant and are reproducible") {
    const auto& wp = fixtures::desk_wavepacket();
    const double tc = fixtures::desk_cyclotron_ps();
    TrajectoryOptions opt;
    opt.thresholds = NodeThresholds::relative_to(wp);
    for (int i = 1; i < 20; ++i) {
        opt.sample_times_ps.push_back(0.05 * i * tc);
    }
    const Point start{10.0 * std::sin(1.1), 10.0 * std::cos(1.1)};
    const BohmTrajectory a = integrate_trajectory(wp, start, 0.0, tc, opt);
    REQUIRE(a.status == TrajectoryStatus::completed);
    CHECK(a.points.size() == 21);
    for (const Point& p : a.points) {
        CHECK(p.rho >= 0.0);
        CHECK(p.z >= -1e-9);
    }
    for (std::size_t i = 0; i < a.points.size(); ++i) {
        const VelocitySample v = velocity(wp, a.points[i].rho, a.points[i].z, a.times_ps[i], opt.thresholds);
        CHECK(a.velocities[i].v_rho == doctest::Approx(v.v_rho).epsilon(1e-12));
        CHECK(a.velocities[i].v_z == doctest::Approx(v.v_z).epsilon(1e-12));
    }

    // halved tolerances over a short span
    TrajectoryOptions tight = opt;
    tight.sample_times_ps.clear();
    TrajectoryOptions loose = tight;
    tight.tolerances.rtol *= 0.5;
    tight.tolerances.atol *= 0.5;
    const Point pa = integrate_trajectory(wp, start, 0.0, 0.3 * tc, loose).points.back();
    const Point pb = integrate_trajectory(wp, start, 0.0, 0.3 * tc, tight).points.back();
    CHECK(std::hypot(pa.rho - pb.rho, pa.z - pb.z) < 1e-4 * std::hypot(pa.rho, pa.z));

    // distinct starts never meet
    const Point other{10.0 * std::sin(1.0), 10.0 * std::cos(1.0)};
    const BohmTrajectory b = integrate_trajectory(wp, other, 0.0, tc, opt);
    REQUIRE(b.points.size() == a.points.size());
    for (std::size_t i = 0; i < a.points.size(); ++i) {
        CHECK(std::hypot(a.points[i].rho - b.points[i].rho, a.points[i].z - b.points[i].z) > 1e-6);
    }
}

TEST_CASE("cell masses partition the probability") {
    const auto& wp = fixtures::desk_wavepacket();
    const Box box = default_box(wp);
    for (double t : {0.0, 0.7 * fixtures::desk_cyclotron_ps()}) {
        const auto m = cell_masses(wp, t, box, 8);
        REQUIRE(m.size() == 65);
        double total = 0.0;
        for (double x : m) {
            CHECK(x >= -1e-12);
            total += x;
        }
        CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(m.back() < 1e-3);
    }
    CHECK_THROWS_AS(cell_masses(wp, 0.0, box, 0), InvalidInput);
}

TEST_CASE("initial sampling: determinism, quadrant and chi-square against the density") {
    const auto& wp = fixtures::desk_wavepacket();
    const Ensemble a = sample_initial(wp, 10000, 42);
    const Ensemble c = sample_initial(wp, 50, 43);
    REQUIRE(a.initial.size() == 10000);
    CHECK(a.acceptance_rate > 0.0);
    // the generator of sample i depends only on (seed, i), so a shorter run is a prefix
    const Ensemble prefix = sample_initial(wp, 300, 42);
    for (std::size_t i = 0; i < prefix.initial.size(); ++i) {
        CHECK(prefix.initial[i].rho == a.initial[i].rho);
        CHECK(prefix.initial[i].z == a.initial[i].z);
    }
    CHECK(c.initial[0].rho != a.initial[0].rho);

    const int grid = 16;
    const auto masses = cell_masses(wp, 0.0, a.box, grid);
    const double inside = 1.0 - masses.back();
    std::vector<int> counts(grid * grid, 0);
    for (const Point& p : a.initial) {
        REQUIRE(p.rho >= 0.0);
        REQUIRE(p.z >= 0.0);
        REQUIRE(a.box.contains(p));
        const int i = std::min(grid - 1, static_cast<int>(p.rho / a.box.rho_max * grid));
        const int j = std::min(grid - 1, static_cast<int>(p.z / a.box.z_max * grid));
        ++counts[static_cast<std::size_t>(i * grid + j)];
    }
    // pool sparse cells so every expected count is at least 5
    double chi2 = 0.0;
    int bins = 0;
    double pooled_expected = 0.0;
    double pooled_observed = 0.0;
    for (int k = 0; k < grid * grid; ++k) {
        const double expected = 10000.0 * masses[static_cast<std::size_t>(k)] / inside;
        if (expected < 5.0) {
            pooled_expected += expected;
            pooled_observed += counts[static_cast<std::size_t>(k)];
            continue;
        }
        chi2 += std::pow(counts[static_cast<std::size_t>(k)] - expected, 2) / expected;
        ++bins;
    }
    if (pooled_expected >= 5.0) {
        chi2 += std::pow(pooled_observed - pooled_expected, 2) / pooled_expected;
        ++bins;
    }
    REQUIRE(bins >= 10);
    // 99.9% point of chi-square with bins - 1 degrees of freedom (Wilson-Hilferty)
    const double dof = bins - 1;
    const double critical = dof * std::pow(1.0 - 2.0 / (9.0 * dof) + 3.09 * std::sqrt(2.0 / (9.0 * dof)), 3);
    CHECK(chi2 < critical);

    CHECK_THROWS_AS(sample_initial(wp, 0, 1), InvalidInput);
}

TEST_CASE("equivariance statistics") {
    SUBCASE("stationary ensemble: distance is unchanged in time") {
        const Wavepacket ws = fixtures::desk_eigenstate(9);
        const Ensemble ens = sample_initial(ws, 400, 8);
        TrajectoryOptions opt = ensemble_trajectory_options();
        opt.thresholds = NodeThresholds::relative_to(ws);
        const EnsembleRun run = propagate_ensemble(ws, ens, {0.0, 2.0}, opt);
        CHECK(run.failures() == 0);
        EquivarianceOptions eo;
        eo.grid = 8;
        const auto r0 = equivariance_distance(ws, run.positions[0], run.valid_at(0), 0.0, ens.box, eo);
        const auto r1 = equivariance_distance(ws, run.positions[1], run.valid_at(1), 2.0, ens.box, eo);
        CHECK(r1.distance == doctest::Approx(r0.distance).epsilon(1e-9));
        CHECK(r0.distance <= 3.0 * r0.bootstrap_noise);
    }
    SUBCASE("initial ensemble sits at the sampling-noise level") {
        const auto& wp = fixtures::desk_wavepacket();
        const Ensemble ens = sample_initial(wp, 2000, 12);
        const std::vector<bool> valid(ens.initial.size(), true);
        EquivarianceOptions eo;
        eo.grid = 12;
        const auto r = equivariance_distance(wp, ens.initial, valid, 0.0, ens.box, eo);
        CHECK(r.used == 2000);
        CHECK(r.failed == 0);
        CHECK(r.bootstrap_noise > 0.0);
        CHECK(r.distance <= 3.0 * r.bootstrap_noise);
    }
    SUBCASE("too many failed trajectories is a numerical failure") {
        const auto& wp = fixtures::desk_wavepacket();
        const Ensemble ens = sample_initial(wp, 200, 12);
        std::vector<bool> valid(ens.initial.size(), true);
        for (int i = 0; i < 10; ++i) {
            valid[static_cast<std::size_t>(i)] = false;
        }
        CHECK_THROWS_AS(equivariance_distance(wp, ens.initial, valid, 0.0, ens.box), ConvergenceFailure);
    }
    SUBCASE("checkpoints must increase") {
        const auto& wp = fixtures::desk_wavepacket();
        const Ensemble ens = sample_initial(wp, 5, 12);
        CHECK_THROWS_AS(propagate_ensemble(wp, ens, {1.0, 0.5}), InvalidInput);
    }
}
