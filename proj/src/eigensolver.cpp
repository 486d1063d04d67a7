#include "rydbohm/spectrum.hpp"

#include "rydbohm/errors.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>
#include <vector>

namespace rydbohm::quantum {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using Factorization = Eigen::SimplicialLDLT<SparseSymmetricOperator, Eigen::Lower, Eigen::AMDOrdering<int>>;

SparseSymmetricOperator shifted(const Operators& ops, double sigma) {
    SparseSymmetricOperator m = ops.A - sigma * ops.S;
    m.makeCompressed();
    return m;
}

Spectrum make_spectrum(const Operators& ops, std::vector<std::pair<double, VectorXd>> pairs) {
    std::sort(pairs.begin(), pairs.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    Spectrum s;
    s.gamma = ops.gamma;
    s.basis = ops.basis;
    s.energies.resize(static_cast<Eigen::Index>(pairs.size()));
    s.vectors.resize(ops.A.rows(), static_cast<Eigen::Index>(pairs.size()));
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        s.energies[static_cast<Eigen::Index>(i)] = pairs[i].first;
        s.vectors.col(static_cast<Eigen::Index>(i)) = pairs[i].second;
    }
    return s;
}

// Block Krylov iteration on (A - sigma S)^{-1} S with full S-orthogonalization,
// followed by Rayleigh-Ritz on A itself. Stops once every eigenvalue counted in the
// window by inertia has a converged Ritz pair.
class ShiftInvertSolver {
public:
    ShiftInvertSolver(const Operators& ops, EnergyWindow window, int wanted, const SolveOptions& opt)
        : ops_(ops), window_(window), wanted_(wanted), opt_(opt), rng_(opt.seed) {}

    Spectrum run() {
        const int n = static_cast<int>(ops_.A.rows());
        double sigma = 0.5 * (window_.lower + window_.upper);
        factor(sigma);

        const int max_dim = std::min(n, opt_.max_krylov);
        basis_.resize(n, 0);
        a_basis_.resize(n, 0);
        MatrixXd block = random_block(n);
        int last_converged = -1;
        int stall = 0;
        while (true) {
            const int added = append(block);
            if (basis_.cols() >= max_dim || (added == 0 && basis_.cols() >= n)) {
                break;
            }
            if (added == 0) {
                block = random_block(n);
                continue;
            }
            // next block: solve (A - sigma S) Y = S Q_new
            const MatrixXd fresh = basis_.rightCols(added);
            const MatrixXd rhs = ops_.S * fresh;
            block.resize(n, added);
            for (int c = 0; c < added; ++c) {
                block.col(c) = ldlt_.solve(rhs.col(c));
            }
            if (basis_.cols() < wanted_ + opt_.block_size) {
                continue;
            }
            const int converged = rayleigh_ritz();
            if (converged == wanted_ && ritz_in_window_ == wanted_) {
                return make_spectrum(ops_, std::move(result_));
            }
            // degenerate clusters larger than the block need fresh directions
            if (converged > 0 && converged == last_converged) {
                if (++stall >= 4) {
                    const Eigen::Index cols = block.cols();
                    block.conservativeResize(Eigen::NoChange, cols + opt_.block_size);
                    block.rightCols(opt_.block_size) = random_block(n);
                    stall = 0;
                }
            } else {
                stall = 0;
            }
            last_converged = converged;
        }
        const int converged = rayleigh_ritz();
        if (converged == wanted_ && ritz_in_window_ == wanted_) {
            return make_spectrum(ops_, std::move(result_));
        }
        std::ostringstream msg;
        msg << "solve_window: no convergence in window [" << window_.lower << ", " << window_.upper
            << "]: " << converged << " of " << wanted_ << " eigenpairs converged, " << ritz_in_window_
            << " Ritz values in window, Krylov dimension " << basis_.cols() << ", worst residual "
            << worst_residual_;
        throw ConvergenceFailure(msg.str());
    }

private:
    void factor(double sigma) {
        for (int attempt = 0; attempt < 5; ++attempt) {
            ldlt_.compute(shifted(ops_, sigma));
            if (ldlt_.info() == Eigen::Success) {
                return;
            }
            sigma += 1e-7 * (window_.upper - window_.lower + 1e-12);
        }
        throw ConvergenceFailure("solve_window: shifted factorization failed near the window centre");
    }

    MatrixXd random_block(int n) {
        std::normal_distribution<double> dist;
        MatrixXd b(n, opt_.block_size);
        for (Eigen::Index j = 0; j < b.cols(); ++j) {
            for (Eigen::Index i = 0; i < b.rows(); ++i) {
                b(i, j) = dist(rng_);
            }
        }
        return b;
    }

    // S-orthonormalize the block against the basis (classical Gram-Schmidt, twice)
    // and append the surviving columns. Returns the number appended.
    int append(MatrixXd block) {
        int added = 0;
        for (Eigen::Index c = 0; c < block.cols(); ++c) {
            VectorXd v = block.col(c);
            const double initial = std::sqrt(std::max(0.0, v.dot(ops_.S * v)));
            if (initial == 0.0) {
                continue;
            }
            for (int pass = 0; pass < 2; ++pass) {
                if (basis_.cols() > 0) {
                    const VectorXd sv = ops_.S * v;
                    v -= basis_ * (basis_.transpose() * sv);
                }
            }
            const double norm = std::sqrt(std::max(0.0, v.dot(ops_.S * v)));
            if (norm < 1e-10 * initial) {
                continue;
            }
            v /= norm;
            const Eigen::Index m = basis_.cols();
            basis_.conservativeResize(Eigen::NoChange, m + 1);
            basis_.col(m) = v;
            a_basis_.conservativeResize(Eigen::NoChange, m + 1);
            a_basis_.col(m) = ops_.A * v;
            ++added;
        }
        return added;
    }

    int rayleigh_ritz() {
        MatrixXd h = basis_.transpose() * a_basis_;
        h = 0.5 * (h + h.transpose()).eval();
        Eigen::SelfAdjointEigenSolver<MatrixXd> eig(h);
        result_.clear();
        ritz_in_window_ = 0;
        worst_residual_ = 0.0;
        int converged = 0;
        for (Eigen::Index i = 0; i < eig.eigenvalues().size(); ++i) {
            const double e = eig.eigenvalues()[i];
            if (!window_.contains(e)) {
                continue;
            }
            ++ritz_in_window_;
            const VectorXd y = eig.eigenvectors().col(i);
            VectorXd x = basis_ * y;
            const VectorXd r = a_basis_ * y - e * (ops_.S * x);
            const double res = r.norm() / x.norm();
            worst_residual_ = std::max(worst_residual_, res);
            if (res < opt_.residual_tol) {
                ++converged;
                // fix the sign so that the largest component is positive
                Eigen::Index imax = 0;
                x.cwiseAbs().maxCoeff(&imax);
                if (x[imax] < 0.0) {
                    x = -x;
                }
                result_.emplace_back(e, std::move(x));
            }
        }
        return converged;
    }

    const Operators& ops_;
    EnergyWindow window_;
    int wanted_;
    SolveOptions opt_;
    std::mt19937_64 rng_;
    Factorization ldlt_;
    MatrixXd basis_;
    MatrixXd a_basis_;
    std::vector<std::pair<double, VectorXd>> result_;
    int ritz_in_window_ = 0;
    double worst_residual_ = 0.0;
};

MatrixXd to_dense(const SparseSymmetricOperator& m) { return MatrixXd(m); }

} // namespace

Spectrum Spectrum::subset(int first, int count) const {
    if (first < 0 || count < 0 || first + count > size()) {
        throw InvalidInput("Spectrum::subset: range outside the spectrum");
    }
    Spectrum s;
    s.gamma = gamma;
    s.basis = basis;
    s.energies = energies.segment(first, count);
    s.vectors = vectors.middleCols(first, count);
    return s;
}

int count_below(const Operators& ops, double energy) {
    Factorization ldlt(shifted(ops, energy));
    if (ldlt.info() != Eigen::Success) {
        throw ConvergenceFailure("count_below: factorization of A - E S failed at E=" + std::to_string(energy));
    }
    const VectorXd d = ldlt.vectorD();
    return static_cast<int>((d.array() < 0.0).count());
}

Spectrum solve_dense(const Operators& ops) {
    const MatrixXd a = to_dense(ops.A);
    const MatrixXd s = to_dense(ops.S);
    Eigen::GeneralizedSelfAdjointEigenSolver<MatrixXd> eig(a, s);
    if (eig.info() != Eigen::Success) {
        throw ConvergenceFailure("solve_dense: generalized eigensolver failed");
    }
    std::vector<std::pair<double, VectorXd>> pairs;
    for (Eigen::Index i = 0; i < eig.eigenvalues().size(); ++i) {
        VectorXd x = eig.eigenvectors().col(i);
        Eigen::Index imax = 0;
        x.cwiseAbs().maxCoeff(&imax);
        if (x[imax] < 0.0) {
            x = -x;
        }
        pairs.emplace_back(eig.eigenvalues()[i], std::move(x));
    }
    return make_spectrum(ops, std::move(pairs));
}

Spectrum solve_window(const Operators& ops, EnergyWindow window, const SolveOptions& options) {
    if (!(window.lower < window.upper)) {
        throw InvalidInput("solve_window: empty energy window");
    }
    Spectrum empty;
    empty.gamma = ops.gamma;
    empty.basis = ops.basis;
    empty.energies.resize(0);
    empty.vectors.resize(ops.A.rows(), 0);
    if (window.lower >= 0.0) {
        return empty;  // no bound states
    }
    window.upper = std::min(window.upper, 0.0);

    const int n = static_cast<int>(ops.A.rows());
    const bool dense = options.method == SolveOptions::Method::dense ||
                       (options.method == SolveOptions::Method::automatic && n < options.dense_threshold);
    if (dense) {
        const Spectrum all = solve_dense(ops);
        int first = 0;
        while (first < all.size() && all.energies[first] < window.lower) {
            ++first;
        }
        int last = first;
        while (last < all.size() && all.energies[last] <= window.upper) {
            ++last;
        }
        return all.subset(first, last - first);
    }

    const int wanted = count_below(ops, window.upper) - count_below(ops, window.lower);
    if (wanted <= 0) {
        return empty;
    }
    ShiftInvertSolver solver(ops, window, wanted, options);
    return solver.run();
}

Spectrum solve_nearest(const Operators& ops, double center, int count, const SolveOptions& options) {
    if (count < 1) {
        throw InvalidInput("solve_nearest: count must be positive");
    }
    if (!(center < 0.0)) {
        throw InvalidInput("solve_nearest: centre must lie in the bound spectrum");
    }
    constexpr double top = -1e-300;
    // widen a symmetric window until it holds at least `count` states
    double half = 1e-3 * std::abs(center);
    while (count_below(ops, std::min(center + half, top)) - count_below(ops, center - half) < count) {
        if (half > 1e3 * std::abs(center)) {
            throw InvalidInput("solve_nearest: fewer bound states than requested");
        }
        half *= 1.5;
    }
    const Spectrum window = solve_window(ops, {center - half, std::min(center + half, top)}, options);
    std::vector<int> order(static_cast<std::size_t>(window.size()));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        return std::abs(window.energies[a] - center) < std::abs(window.energies[b] - center);
    });
    order.resize(static_cast<std::size_t>(std::min(count, window.size())));
    std::sort(order.begin(), order.end());
    Spectrum s;
    s.gamma = window.gamma;
    s.basis = window.basis;
    s.energies.resize(static_cast<Eigen::Index>(order.size()));
    s.vectors.resize(window.vectors.rows(), static_cast<Eigen::Index>(order.size()));
    for (std::size_t i = 0; i < order.size(); ++i) {
        s.energies[static_cast<Eigen::Index>(i)] = window.energies[order[i]];
        s.vectors.col(static_cast<Eigen::Index>(i)) = window.vectors.col(order[i]);
    }
    return s;
}

SpectrumDiagnostics diagnose(const Operators& ops, const Spectrum& spectrum) {
    SpectrumDiagnostics d;
    if (spectrum.size() == 0) {
        return d;
    }
    const MatrixXd sx = ops.S * spectrum.vectors;
    const MatrixXd ax = ops.A * spectrum.vectors;
    for (int k = 0; k < spectrum.size(); ++k) {
        const double res = (ax.col(k) - spectrum.energies[k] * sx.col(k)).norm() / spectrum.vectors.col(k).norm();
        d.max_residual = std::max(d.max_residual, res);
    }
    const MatrixXd gram = spectrum.vectors.transpose() * sx;
    d.max_orthonormality_error =
        (gram - MatrixXd::Identity(spectrum.size(), spectrum.size())).cwiseAbs().maxCoeff();
    return d;
}

} // namespace rydbohm::quantum
