#pragma once

// Pointwise evaluation of psi(rho, z) = f(mu^2)^T C f(nu^2) and its derivatives,
// for real (single eigenstate) or complex (time-evolved wavepacket) C.

#include "rydbohm/basis.hpp"
#include "rydbohm/spectrum.hpp"

#include <Eigen/Core>

#include <cmath>

namespace rydbohm::quantum {

// Semiparabolic squares u = mu^2 = r + z, v = nu^2 = r - z, computed without
// cancellation near the z axis.
struct SemiparabolicPoint {
    double r = 0.0;
    double u = 0.0;
    double v = 0.0;
};

inline SemiparabolicPoint to_semiparabolic(double rho, double z) {
    SemiparabolicPoint p;
    p.r = std::hypot(rho, z);
    if (z >= 0.0) {
        p.u = p.r + z;
        p.v = p.u > 0.0 ? rho * rho / p.u : 0.0;
    } else {
        p.v = p.r - z;
        p.u = rho * rho / p.v;
    }
    return p;
}

// Reusable scratch space for repeated evaluations.
struct ExpansionWorkspace {
    RadialValues fu;
    RadialValues fv;
};

template <typename Scalar, typename Derived>
PointValue<Scalar> evaluate_expansion(const Eigen::MatrixBase<Derived>& coeffs, const BasisSpec& basis,
                                      double rho, double z, bool with_laplacian,
                                      ExpansionWorkspace& ws) {
    using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
    const int k = basis.radial_count();
    const SemiparabolicPoint p = to_semiparabolic(rho, z);
    evaluate_radial(k, basis.b, p.u, ws.fu, with_laplacian);
    evaluate_radial(k, basis.b, p.v, ws.fv, with_laplacian);

    const Vec w0 = coeffs * ws.fv.f.template cast<Scalar>();
    const Vec w1 = coeffs * ws.fv.df.template cast<Scalar>();
    const Scalar psi = ws.fu.f.template cast<Scalar>().dot(w0);
    const Scalar psi_u = ws.fu.df.template cast<Scalar>().dot(w0);
    const Scalar psi_v = ws.fu.f.template cast<Scalar>().dot(w1);

    PointValue<Scalar> out;
    out.value = psi;
    if (p.r <= 0.0) {
        // Coulomb cusp: the gradient has no limit at the nucleus.
        out.d_rho = Scalar(0);
        out.d_z = Scalar(0);
        out.laplacian = Scalar(std::nan(""));
        return out;
    }
    out.d_rho = (psi_u + psi_v) * (rho / p.r);
    out.d_z = (p.u * psi_u - p.v * psi_v) / p.r;
    if (with_laplacian) {
        const Vec w2 = coeffs * ws.fv.d2f.template cast<Scalar>();
        const Scalar psi_uu = ws.fu.d2f.template cast<Scalar>().dot(w0);
        const Scalar psi_vv = ws.fu.f.template cast<Scalar>().dot(w2);
        // 3D Laplacian = (1/(mu^2+nu^2)) (Delta_mu + Delta_nu), Delta_mu = 4 (d_u + u d_uu)
        out.laplacian = (2.0 / p.r) * (psi_u + p.u * psi_uu + psi_v + p.v * psi_vv);
    }
    return out;
}

} // namespace rydbohm::quantum
