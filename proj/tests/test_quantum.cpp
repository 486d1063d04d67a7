#include "rydbohm/errors.hpp"
#include "rydbohm/quadrature.hpp"
#include "rydbohm/spectrum.hpp"
#include "rydbohm/units.hpp"

#include "support/fixtures.hpp"

#include <doctest.h>

#include <Eigen/Dense>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <fstream>
#include <random>

using namespace rydbohm;
using namespace rydbohm::quantum;

namespace {

// Gauss-Laguerre rule (weight e^-x) from the eigen-decomposition of the Jacobi matrix.
struct LaguerreRule {
    Eigen::VectorXd x;
    Eigen::VectorXd w;
};

LaguerreRule gauss_laguerre(int n) {
    Eigen::MatrixXd j = Eigen::MatrixXd::Zero(n, n);
    for (int k = 0; k < n; ++k) {
        j(k, k) = 2.0 * k + 1.0;
        if (k + 1 < n) {
            j(k, k + 1) = j(k + 1, k) = k + 1.0;
        }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(j);
    return {eig.eigenvalues(), eig.eigenvectors().row(0).transpose().array().square().matrix()};
}

// Explicit power-series Laguerre polynomial and its derivative.
double laguerre(int k, double x, bool derivative) {
    double sum = 0.0;
    double binom = 1.0;  // C(k, m)
    double fact = 1.0;   // m!
    for (int m = 0; m <= k; ++m) {
        if (m > 0) {
            binom *= static_cast<double>(k - m + 1) / m;
            fact *= m;
        }
        const double sign = m % 2 ? -1.0 : 1.0;
        if (derivative) {
            sum += m > 0 ? sign * binom * m * std::pow(x, m - 1) / fact : 0.0;
        } else {
            sum += sign * binom * std::pow(x, m) / fact;
        }
    }
    return sum;
}

// Full operator matrices over the symmetric pair basis by 2D quadrature in (u, v).
// Exponential factors are absorbed into the Laguerre weight.
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> quadrature_operators(const BasisSpec& basis, double gamma) {
    const int k_count = basis.radial_count();
    const PairIndex index(k_count);
    const double b = basis.b;
    const double b2 = b * b;
    const LaguerreRule rule = gauss_laguerre(k_count + 6);
    const int q = static_cast<int>(rule.x.size());

    // polynomial parts of f_k and df_k/du at the nodes
    Eigen::MatrixXd f(k_count, q);
    Eigen::MatrixXd df(k_count, q);
    for (int k = 0; k < k_count; ++k) {
        for (int i = 0; i < q; ++i) {
            const double l = laguerre(k, rule.x[i], false);
            f(k, i) = std::sqrt(2.0) / b * l;
            df(k, i) = std::sqrt(2.0) / b * (laguerre(k, rule.x[i], true) - 0.5 * l) / b2;
        }
    }
    auto phi = [&](int flat, int iu, int iv, int du, int dv) {
        const auto [a, c] = index.pair(flat);
        const Eigen::MatrixXd& fu = du ? df : f;
        const Eigen::MatrixXd& fv = dv ? df : f;
        if (a == c) {
            return fu(a, iu) * fv(a, iv);
        }
        return (fu(a, iu) * fv(c, iv) + fu(c, iu) * fv(a, iv)) / std::sqrt(2.0);
    };

    const int n = index.size();
    Eigen::MatrixXd a_mat = Eigen::MatrixXd::Zero(n, n);
    Eigen::MatrixXd s_mat = Eigen::MatrixXd::Zero(n, n);
    for (int iu = 0; iu < q; ++iu) {
        for (int iv = 0; iv < q; ++iv) {
            const double u = b2 * rule.x[iu];
            const double v = b2 * rule.x[iv];
            const double w = rule.w[iu] * rule.w[iv] * b2 * b2;
            const double potential = gamma * gamma / 8.0 * u * v * (u + v) - 2.0;
            for (int p = 0; p < n; ++p) {
                const double p0 = phi(p, iu, iv, 0, 0);
                const double pu = phi(p, iu, iv, 1, 0);
                const double pv = phi(p, iu, iv, 0, 1);
                for (int r = 0; r < n; ++r) {
                    const double r0 = phi(r, iu, iv, 0, 0);
                    const double kinetic = 0.5 * (u * pu * phi(r, iu, iv, 1, 0) + v * pv * phi(r, iu, iv, 0, 1));
                    a_mat(p, r) += w * (kinetic + 0.25 * potential * p0 * r0);
                    s_mat(p, r) += w * 0.25 * (u + v) * p0 * r0;
                }
            }
        }
    }
    return {a_mat, s_mat};
}

double hydrogen_level(double e) { return std::sqrt(-0.5 / e); }

} // namespace

TEST_CASE("basis specification is validated") {
    CHECK_THROWS_AS(BasisSpec({7, 2.0}).validate(), InvalidInput);
    CHECK_THROWS_AS(BasisSpec({0, 2.0}).validate(), InvalidInput);
    CHECK_THROWS_AS(BasisSpec({8, 0.0}).validate(), InvalidInput);
    CHECK(BasisSpec{12, 1.0}.dimension() == 28);
    CHECK_THROWS_AS(assemble_operators({8, 1.0}, -1.0), InvalidInput);
}

TEST_CASE("pair index is a bijection onto i <= j") {
    const PairIndex index(9);
    CHECK(index.size() == 45);
    for (int f = 0; f < index.size(); ++f) {
        const auto [i, j] = index.pair(f);
        CHECK(i <= j);
        CHECK(index.flat(i, j) == f);
    }
}

TEST_CASE("operator matrices agree with direct quadrature of the Schroedinger form") {
    const BasisSpec basis{12, 1.3};
    const double gamma = 0.02;
    const Operators ops = assemble_operators(basis, gamma);
    const auto [a_ref, s_ref] = quadrature_operators(basis, gamma);
    const Eigen::MatrixXd a = ops.A;
    const Eigen::MatrixXd s = ops.S;
    CHECK((a - a_ref).cwiseAbs().maxCoeff() <= 1e-10 * a_ref.cwiseAbs().maxCoeff());
    CHECK((s - s_ref).cwiseAbs().maxCoeff() <= 1e-12 * s_ref.cwiseAbs().maxCoeff());
}

TEST_CASE("overlap matrix is symmetric positive definite") {
    const Operators ops = assemble_operators({40, 2.0}, 0.0);
    const Eigen::MatrixXd s = ops.S;
    const Eigen::MatrixXd a = ops.A;
    CHECK((s - s.transpose()).norm() <= 1e-14 * s.norm());
    CHECK((a - a.transpose()).norm() <= 1e-14 * a.norm());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(s);
    CHECK(eig.eigenvalues().minCoeff() > 0.0);
}

TEST_CASE("diamagnetic block scales as gamma^2 and vanishes without field") {
    const BasisSpec basis{16, 2.0};
    const Eigen::MatrixXd a0 = assemble_operators(basis, 0.0).A;
    const Eigen::MatrixXd a1 = assemble_operators(basis, 1e-3).A;
    const Eigen::MatrixXd a2 = assemble_operators(basis, 2e-3).A;
    const Eigen::MatrixXd d1 = a1 - a0;
    const Eigen::MatrixXd d2 = a2 - a0;
    CHECK(d1.norm() > 0.0);
    CHECK((d2 - 4.0 * d1).norm() <= 1e-9 * d2.norm());
}

TEST_CASE("field-free spectrum: hydrogen levels with even-l multiplicity") {
    const Operators ops = assemble_operators({40, 2.0}, 0.0);
    const Operators bigger = assemble_operators({48, 2.0}, 0.0);
    const Spectrum s = solve_dense(ops);
    const Spectrum ref = solve_dense(bigger);
    std::map<int, int> multiplicity;
    int converged = 0;
    for (int k = 0; k < s.size(); ++k) {
        // converged: unchanged under basis enlargement
        if (std::abs(s.energies[k] - ref.energies[k]) > 1e-10 * std::abs(s.energies[k])) {
            continue;
        }
        const int n = static_cast<int>(std::lround(hydrogen_level(s.energies[k])));
        CHECK(s.energies[k] == doctest::Approx(-0.5 / (n * n)).epsilon(1e-8));
        ++multiplicity[n];
        ++converged;
    }
    REQUIRE(multiplicity.size() >= 3);
    // the outermost levels reached may be partly converged
    const int bottom = multiplicity.begin()->first;
    const int top = multiplicity.rbegin()->first;
    CHECK(top >= 6);
    for (int n = bottom + 1; n < top; ++n) {
        CHECK_MESSAGE(multiplicity[n] == (n + 1) / 2, "level n=" << n);
    }
    CHECK(converged >= 10);
}

TEST_CASE("ground state is the hydrogen 1s function e^-r / sqrt(pi)") {
    const Operators ops = assemble_operators({40, 1.0}, 0.0);
    const Spectrum s = solve_window(ops, {-0.6, -0.4});
    REQUIRE(s.size() == 1);
    CHECK(s.energies[0] == doctest::Approx(-0.5).epsilon(1e-12));
    for (double r : {0.0, 0.3, 1.0, 2.5, 6.0}) {
        for (double theta : {0.0, 0.7, 1.57079632679, 2.5}) {
            const double rho = r * std::sin(theta);
            const double z = r * std::cos(theta);
            const double expected = std::exp(-r) / std::sqrt(units::pi);
            CHECK(std::abs(eigenfunction_value(s, 0, rho, z).value) ==
                  doctest::Approx(expected).epsilon(1e-8).scale(1e-3));
        }
    }
}

TEST_CASE("windowed shift-invert solver matches the dense oracle") {
    // dimension 190 at a diamagnetic field
    const double gamma = units::gamma_for_scaled_energy(-0.3, 8.0);
    const Operators ops = assemble_operators({36, std::sqrt(8.0)}, gamma);
    REQUIRE(ops.A.rows() <= 200);
    const Spectrum all = solve_dense(ops);
    const EnergyWindow window{units::energy_from_n_eff(5.0), units::energy_from_n_eff(9.0)};
    SolveOptions opt;
    opt.method = SolveOptions::Method::shift_invert;
    opt.block_size = 4;
    const Spectrum windowed = solve_window(ops, window, opt);
    REQUIRE(windowed.size() > 5);
    int offset = 0;
    while (all.energies[offset] < window.lower) {
        ++offset;
    }
    for (int k = 0; k < windowed.size(); ++k) {
        CHECK(std::abs(windowed.energies[k] - all.energies[offset + k]) <= 1e-10 * std::abs(all.energies[offset + k]));
    }
    CHECK(offset + windowed.size() < all.size());
    CHECK(all.energies[offset + windowed.size()] > window.upper);

    const auto diag = diagnose(ops, windowed);
    CHECK(diag.max_residual < 1e-9);
    CHECK(diag.max_orthonormality_error < 1e-10);
}

TEST_CASE("inertia count agrees with the dense spectrum") {
    const Operators ops = assemble_operators({24, 2.0}, 0.01);
    const Spectrum all = solve_dense(ops);
    for (double e : {-0.45, -0.1, -0.05, -0.01}) {
        int below = 0;
        while (below < all.size() && all.energies[below] < e) {
            ++below;
        }
        CHECK(count_below(ops, e) == below);
    }
}

TEST_CASE("desk spectrum: residuals, orthonormality and window contents") {
    const auto s = fixtures::desk_spectrum();
    const Operators ops = assemble_operators(fixtures::desk_basis(), fixtures::desk_gamma());
    const auto diag = diagnose(ops, *s);
    CHECK(diag.max_residual < 1e-8);
    CHECK(diag.max_orthonormality_error < 1e-10);
    const EnergyWindow w = fixtures::desk_window();
    CHECK(s->size() == count_below(ops, w.upper) - count_below(ops, w.lower));
    for (int k = 0; k < s->size(); ++k) {
        CHECK(w.contains(s->energies[k]));
        if (k > 0) {
            CHECK(s->energies[k] > s->energies[k - 1]);
        }
    }
}

TEST_CASE("desk energies are converged in the basis size") {
    const auto s = fixtures::desk_spectrum(96);
    const auto smaller = fixtures::desk_spectrum(88);
    REQUIRE(s->size() == smaller->size());
    CHECK((s->energies - smaller->energies).cwiseAbs().maxCoeff() < 1e-7);
}

TEST_CASE("solver is deterministic for a fixed seed") {
    const Operators ops = assemble_operators(fixtures::desk_basis(80), fixtures::desk_gamma());
    SolveOptions opt;
    opt.method = SolveOptions::Method::shift_invert;
    const Spectrum a = solve_window(ops, fixtures::desk_window(), opt);
    const Spectrum b = solve_window(ops, fixtures::desk_window(), opt);
    CHECK(a.energies == b.energies);
    CHECK(a.vectors == b.vectors);
}

TEST_CASE("exhausted Krylov budget raises a convergence failure naming the window") {
    const Operators ops = assemble_operators(fixtures::desk_basis(80), fixtures::desk_gamma());
    SolveOptions opt;
    opt.method = SolveOptions::Method::shift_invert;
    opt.max_krylov = 24;
    try {
        solve_window(ops, fixtures::desk_window(), opt);
        FAIL("expected ConvergenceFailure");
    } catch (const ConvergenceFailure& e) {
        CHECK(std::string(e.what()).find("window") != std::string::npos);
    }
}

TEST_CASE("windows without bound states give an empty spectrum") {
    const Operators ops = assemble_operators({20, 2.0}, 0.0);
    CHECK(solve_window(ops, {-0.12, -0.06}).size() == 0);
    CHECK(solve_window(ops, {0.0, 1.0}).size() == 0);
    CHECK_THROWS_AS(solve_window(ops, {-0.1, -0.2}), InvalidInput);
}

TEST_CASE("ground-state energy decreases monotonically with basis size") {
    double previous = 1.0;
    for (int n_max = 4; n_max <= 24; n_max += 2) {
        const Spectrum s = solve_dense(assemble_operators({n_max, 1.5}, 0.05));
        CHECK(s.energies[0] <= previous + 1e-13);
        previous = s.energies[0];
    }
}

TEST_CASE("eigenfunction gradients: parity and finite differences") {
    const auto s = fixtures::desk_spectrum();
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    for (int k : {0, 7, 20}) {
        CHECK(eigenfunction_value(*s, k, 0.0, 123.0).d_rho == 0.0);
        CHECK(std::abs(eigenfunction_value(*s, k, 77.0, 0.0).d_z) < 1e-18);
        for (int trial = 0; trial < 20; ++trial) {
            const double r = 20.0 + 600.0 * uni(rng);
            const double th = 0.05 + 1.45 * uni(rng);
            const double rho = r * std::sin(th);
            const double z = r * std::cos(th);
            const auto pv = eigenfunction_value(*s, k, rho, z);
            const double h = 1e-3;
            const double fd_rho = (eigenfunction_value(*s, k, rho + h, z).value -
                                   eigenfunction_value(*s, k, rho - h, z).value) / (2 * h);
            const double fd_z = (eigenfunction_value(*s, k, rho, z + h).value -
                                 eigenfunction_value(*s, k, rho, z - h).value) / (2 * h);
            const double scale = std::abs(pv.d_rho) + std::abs(pv.d_z) + 1e-12;
            CHECK(std::abs(fd_rho - pv.d_rho) < 1e-6 * scale);
            CHECK(std::abs(fd_z - pv.d_z) < 1e-6 * scale);
        }
    }
}

TEST_CASE("eigenfunctions satisfy the Schroedinger equation pointwise") {
    const auto s = fixtures::desk_spectrum();
    const double gamma = s->gamma;
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    for (int k : {2, 10}) {
        const double e = s->energies[k];
        double worst = 0.0;
        for (int trial = 0; trial < 30; ++trial) {
            const double r = 5.0 + 800.0 * uni(rng);
            const double th = 1.5 * uni(rng);
            const double rho = r * std::sin(th);
            const double z = r * std::cos(th);
            const auto pv = eigenfunction_value(*s, k, rho, z, true);
            const double v = -1.0 / r + gamma * gamma * rho * rho / 8.0;
            const double lhs = -0.5 * pv.laplacian + v * pv.value;
            worst = std::max(worst, std::abs(lhs - e * pv.value) /
                                        (std::abs(e * pv.value) + std::abs(v * pv.value)));
        }
        CHECK(worst < 1e-6);
    }
}

TEST_CASE("eigenfunctions are normalized over 3D space") {
    const auto s = fixtures::desk_spectrum();
    // spherical quadrature over the upper half space, doubled by z-parity
    const auto radial = rydbohm::quadrature::composite_gauss_legendre(16, 60, 0.0, 3000.0);
    const auto angular = rydbohm::quadrature::composite_gauss_legendre(16, 4, 0.0, 0.5 * units::pi);
    for (int k : {0, 12}) {
        double sum = 0.0;
        for (std::size_t i = 0; i < radial.nodes.size(); ++i) {
            const double r = radial.nodes[i];
            for (std::size_t j = 0; j < angular.nodes.size(); ++j) {
                const double th = angular.nodes[j];
                const double psi = eigenfunction_value(*s, k, r * std::sin(th), r * std::cos(th)).value;
                sum += radial.weights[i] * angular.weights[j] * r * r * std::sin(th) * psi * psi;
            }
        }
        CHECK(2.0 * 2.0 * units::pi * sum == doctest::Approx(1.0).epsilon(1e-8));
    }
}

TEST_CASE("spectrum cache round trip and format checks") {
    const auto s = fixtures::desk_spectrum();
    const auto dir = std::filesystem::temp_directory_path() / "rydbohm_test_cache";
    std::filesystem::create_directories(dir);
    const std::string path = (dir / "s.bin").string();
    save_spectrum(*s, path);
    const Spectrum back = load_spectrum(path);
    CHECK(back.gamma == s->gamma);
    CHECK(back.basis == s->basis);
    CHECK(back.energies == s->energies);
    CHECK(back.vectors == s->vectors);

    {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(8);
        const std::uint32_t bogus = spectrum_format_version + 1;
        f.write(reinterpret_cast<const char*>(&bogus), sizeof(bogus));
    }
    CHECK_THROWS(load_spectrum(path));
    std::ofstream(path, std::ios::trunc) << "not a cache";
    CHECK_THROWS(load_spectrum(path));
    std::filesystem::remove_all(dir);

    const EnergyWindow w = fixtures::desk_window();
    CHECK(spectrum_cache_key(1e-4, {96, 4.0}, w) != spectrum_cache_key(1e-4, {98, 4.0}, w));
    CHECK(spectrum_cache_key(1e-4, {96, 4.0}, w) != spectrum_cache_key(1.0001e-4, {96, 4.0}, w));
    CHECK(spectrum_cache_key(1e-4, {96, 4.0}, w) == spectrum_cache_key(1e-4, {96, 4.0}, w));
}
