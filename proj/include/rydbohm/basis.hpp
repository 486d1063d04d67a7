#pragma once

// Semiparabolic oscillator basis for the m = 0 diamagnetic hydrogen atom.
//
// With mu^2 = r + z and nu^2 = r - z every basis function is a product
// f_i(mu^2) f_j(nu^2) of two-dimensional radial oscillator functions
//
//     f_k(u) = sqrt(2)/b * L_k(u/b^2) * exp(-u/(2 b^2)),
//
// orthonormal under mu dmu. The oscillator quantum number of f_k is 2k, so
// the cutoff n_max counts even indices only. Only combinations symmetric
// under mu <-> nu (even z-parity) are kept.

#include <Eigen/Core>

#include <cstddef>
#include <utility>
#include <vector>

namespace rydbohm::quantum {

struct BasisSpec {
    int n_max = 40;  // largest (even) oscillator index per coordinate
    double b = 2.0;  // oscillator length in semiparabolic units (au^(1/2))

    // Radial functions per coordinate: indices 0, 2, ..., n_max.
    int radial_count() const { return n_max / 2 + 1; }
    // Symmetric pairs (i <= j).
    int dimension() const {
        const int k = radial_count();
        return k * (k + 1) / 2;
    }
    void validate() const;

    bool operator==(const BasisSpec&) const = default;
};

// Maps symmetric pairs (i <= j) to a flat index and back.
class PairIndex {
public:
    explicit PairIndex(int radial_count);

    int size() const { return static_cast<int>(pairs_.size()); }
    int radial_count() const { return radial_count_; }
    int flat(int i, int j) const;
    std::pair<int, int> pair(int flat) const { return pairs_[static_cast<std::size_t>(flat)]; }

private:
    int radial_count_;
    std::vector<std::pair<int, int>> pairs_;
};

// Radial functions and their first two derivatives with respect to u = mu^2.
struct RadialValues {
    Eigen::VectorXd f;
    Eigen::VectorXd df;
    Eigen::VectorXd d2f;
};

void evaluate_radial(int radial_count, double b, double u, RadialValues& out, bool second = true);

// One-coordinate matrices over f_0..f_{K-1} with measure mu dmu.
struct RadialMatrices {
    Eigen::MatrixXd kinetic;  // -1/2 (1/mu) d/dmu mu d/dmu
    Eigen::MatrixXd mu2;      // mu^2
    Eigen::MatrixXd mu4;      // mu^4
};

RadialMatrices radial_matrices(int radial_count, double b);

// Symmetric K x K coefficient matrix of one basis vector: psi = f(u)^T C f(v).
Eigen::MatrixXd coefficient_matrix(const PairIndex& index, const Eigen::Ref<const Eigen::VectorXd>& x);

} // namespace rydbohm::quantum
