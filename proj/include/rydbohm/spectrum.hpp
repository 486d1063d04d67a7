#pragma once

#include "rydbohm/basis.hpp"

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <cstdint>
#include <string>

namespace rydbohm::quantum {

// Symmetric sparse matrix, both triangles stored.
using SparseSymmetricOperator = Eigen::SparseMatrix<double>;

/// Generalized eigenproblem A x = E S x of the semiparabolic Schroedinger equation
///   A = T_mu + T_nu + (gamma^2/8) mu^2 nu^2 (mu^2 + nu^2) - 2,   S = mu^2 + nu^2.
struct Operators {
    BasisSpec basis;
    double gamma = 0.0;
    SparseSymmetricOperator A;
    SparseSymmetricOperator S;
};

Operators assemble_operators(const BasisSpec& basis, double gamma);

struct EnergyWindow {
    double lower = 0.0;
    double upper = 0.0;

    bool contains(double e) const { return e >= lower && e <= upper; }
};

struct SolveOptions {
    enum class Method { automatic, shift_invert, dense };
    Method method = Method::automatic;
    int dense_threshold = 500;     // automatic uses the dense solver below this dimension
    std::uint64_t seed = 20070415;  // start block of the Krylov iteration
    int block_size = 8;
    double residual_tol = 1e-9;    // ||A x - E S x|| / ||x||
    int max_krylov = 4000;
};

struct Spectrum {
    double gamma = 0.0;
    BasisSpec basis;
    Eigen::VectorXd energies;  // ascending
    Eigen::MatrixXd vectors;   // one S-orthonormal column per energy

    int size() const { return static_cast<int>(energies.size()); }
    // Sub-spectrum with the given state indices, in the given order.
    Spectrum subset(int first, int count) const;
};

// Number of generalized eigenvalues below `energy` (Sylvester inertia of A - E S).
int count_below(const Operators& ops, double energy);

Spectrum solve_window(const Operators& ops, EnergyWindow window, const SolveOptions& options = {});

// The `count` eigenpairs closest to `center`.
Spectrum solve_nearest(const Operators& ops, double center, int count, const SolveOptions& options = {});

// Dense reference solver over the whole basis (small dimensions only).
Spectrum solve_dense(const Operators& ops);

// Largest residual ||A x - E S x|| / ||x|| and deviation from S-orthonormality.
struct SpectrumDiagnostics {
    double max_residual = 0.0;
    double max_orthonormality_error = 0.0;
};
SpectrumDiagnostics diagnose(const Operators& ops, const Spectrum& spectrum);

/// Value, cylindrical gradient and 3D Laplacian at one point of the (rho, z) half plane.
template <typename Scalar>
struct PointValue {
    Scalar value{};
    Scalar d_rho{};
    Scalar d_z{};
    Scalar laplacian{};
};

// Eigenfunction k, normalized to one over all of 3D space.
PointValue<double> eigenfunction_value(const Spectrum& spectrum, int k, double rho, double z,
                                       bool with_laplacian = false);

// Cache persistence. The key identifies (gamma, basis); the file carries a format version.
inline constexpr std::uint32_t spectrum_format_version = 1;
std::string spectrum_cache_key(double gamma, const BasisSpec& basis, const EnergyWindow& window);
void save_spectrum(const Spectrum& spectrum, const std::string& path);
Spectrum load_spectrum(const std::string& path);

} // namespace rydbohm::quantum
