#include "rydbohm/spectrum.hpp"

#include "rydbohm/errors.hpp"

#include <Eigen/SparseCore>

#include <algorithm>
#include <cmath>
#include <vector>

namespace rydbohm::quantum {

namespace {

// c * (left (x) right) acting on the ordered product basis f_i(mu) f_j(nu).
struct TensorTerm {
    double c;
    const Eigen::MatrixXd* left;
    const Eigen::MatrixXd* right;
};

constexpr int band = 2;  // mu^4 is pentadiagonal, everything else tridiagonal

SparseSymmetricOperator assemble(const PairIndex& index, const std::vector<TensorTerm>& terms) {
    const int k = index.radial_count();
    const double sqrt2 = std::sqrt(2.0);
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(static_cast<std::size_t>(index.size()) * 30);
    for (int row = 0; row < index.size(); ++row) {
        const auto [i, j] = index.pair(row);
        const double row_factor = (i == j) ? 1.0 : sqrt2;
        for (int a = std::max(0, i - band); a <= std::min(k - 1, i + band); ++a) {
            for (int c = std::max(0, j - band); c <= std::min(k - 1, j + band); ++c) {
                double element = 0.0;
                for (const TensorTerm& t : terms) {
                    element += t.c * (*t.left)(i, a) * (*t.right)(j, c);
                }
                if (element == 0.0) {
                    continue;
                }
                const double col_factor = (a == c) ? 1.0 : 1.0 / sqrt2;
                triplets.emplace_back(row, index.flat(a, c), row_factor * col_factor * element);
            }
        }
    }
    SparseSymmetricOperator m(index.size(), index.size());
    m.setFromTriplets(triplets.begin(), triplets.end());
    m.prune(0.0);
    m.makeCompressed();
    return m;
}

} // namespace

Operators assemble_operators(const BasisSpec& basis, double gamma) {
    basis.validate();
    if (!(gamma >= 0.0) || !std::isfinite(gamma)) {
        throw InvalidInput("assemble_operators: gamma must be finite and non-negative");
    }
    const int k = basis.radial_count();
    const RadialMatrices rm = radial_matrices(k, basis.b);
    const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(k, k);
    const PairIndex index(k);

    std::vector<TensorTerm> a_terms{{1.0, &rm.kinetic, &id}, {1.0, &id, &rm.kinetic}, {-2.0, &id, &id}};
    if (gamma > 0.0) {
        const double dia = gamma * gamma / 8.0;
        a_terms.push_back({dia, &rm.mu4, &rm.mu2});
        a_terms.push_back({dia, &rm.mu2, &rm.mu4});
    }
    const std::vector<TensorTerm> s_terms{{1.0, &rm.mu2, &id}, {1.0, &id, &rm.mu2}};

    Operators ops;
    ops.basis = basis;
    ops.gamma = gamma;
    ops.A = assemble(index, a_terms);
    ops.S = assemble(index, s_terms);
    return ops;
}

} // namespace rydbohm::quantum
