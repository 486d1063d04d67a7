#include "rydbohm/basis.hpp"

#include "rydbohm/errors.hpp"

#include <cmath>
#include <string>

namespace rydbohm::quantum {

void BasisSpec::validate() const {
    if (n_max < 2 || n_max % 2 != 0) {
        throw InvalidInput("BasisSpec: n_max must be even and >= 2, got " + std::to_string(n_max));
    }
    if (!(b > 0.0) || !std::isfinite(b)) {
        throw InvalidInput("BasisSpec: oscillator length b must be positive");
    }
}

PairIndex::PairIndex(int radial_count) : radial_count_(radial_count) {
    pairs_.reserve(static_cast<std::size_t>(radial_count * (radial_count + 1) / 2));
    for (int i = 0; i < radial_count; ++i) {
        for (int j = i; j < radial_count; ++j) {
            pairs_.emplace_back(i, j);
        }
    }
}

int PairIndex::flat(int i, int j) const {
    if (i > j) {
        std::swap(i, j);
    }
    // rows i' < i contribute (K - i') entries each
    return i * radial_count_ - i * (i - 1) / 2 + (j - i);
}

void evaluate_radial(int radial_count, double b, double u, RadialValues& out, bool second) {
    const int n = radial_count;
    out.f.resize(n);
    out.df.resize(n);
    if (second) {
        out.d2f.resize(n);
    }
    const double b2 = b * b;
    const double x = u / b2;
    const double norm = std::sqrt(2.0) / b;
    // g_k = L_k(x) e^{-x/2}, dg_k = L_k'(x) e^{-x/2}, d2g_k = L_k''(x) e^{-x/2}
    double g_prev = 0.0;
    double g = std::exp(-0.5 * x);
    double dg = 0.0;
    double d2g = 0.0;
    for (int k = 0; k < n; ++k) {
        // d/dx [L e^{-x/2}] = (L' - L/2) e^{-x/2}
        out.f[k] = norm * g;
        out.df[k] = norm * (dg - 0.5 * g) / b2;
        if (second) {
            out.d2f[k] = norm * (d2g - dg + 0.25 * g) / (b2 * b2);
        }
        // advance: L_{k+1} = ((2k+1-x) L_k - k L_{k-1})/(k+1), L'_{k+1} = L'_k - L_k, L''_{k+1} = L''_k - L'_k
        const double g_next = ((2.0 * k + 1.0 - x) * g - k * g_prev) / (k + 1.0);
        const double dg_next = dg - g;
        const double d2g_next = d2g - dg;
        g_prev = g;
        g = g_next;
        dg = dg_next;
        d2g = d2g_next;
    }
}

RadialMatrices radial_matrices(int radial_count, double b) {
    const int n = radial_count;
    // X = matrix of x = u/b^2 over orthonormal Laguerre functions, one size larger so
    // that X^2 is exact on the retained block.
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(n + 1, n + 1);
    for (int k = 0; k <= n; ++k) {
        x(k, k) = 2.0 * k + 1.0;
        if (k < n) {
            x(k, k + 1) = -(k + 1.0);
            x(k + 1, k) = -(k + 1.0);
        }
    }
    const double b2 = b * b;
    RadialMatrices m;
    m.mu2 = b2 * x.topLeftCorner(n, n);
    m.mu4 = (b2 * b2) * (x * x).topLeftCorner(n, n);
    // -1/2 Delta f_k = ((2k+1)/b^2 - u/(2 b^4)) f_k
    m.kinetic = -0.5 / b2 * x.topLeftCorner(n, n);
    for (int k = 0; k < n; ++k) {
        m.kinetic(k, k) += (2.0 * k + 1.0) / b2;
    }
    return m;
}

Eigen::MatrixXd coefficient_matrix(const PairIndex& index, const Eigen::Ref<const Eigen::VectorXd>& x) {
    const int n = index.radial_count();
    Eigen::MatrixXd c = Eigen::MatrixXd::Zero(n, n);
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    for (int f = 0; f < index.size(); ++f) {
        const auto [i, j] = index.pair(f);
        if (i == j) {
            c(i, i) = x[f];
        } else {
            c(i, j) = x[f] * inv_sqrt2;
            c(j, i) = c(i, j);
        }
    }
    return c;
}

} // namespace rydbohm::quantum
