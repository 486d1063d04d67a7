#pragma once

// Independent reference for classical traces: physical-unit integration in cylindrical
// coordinates (rho, z, p_rho, p_z) at m = 0 with Boost.Odeint.

#include <boost/numeric/odeint.hpp>

#include <array>
#include <cmath>
#include <vector>

namespace fixtures {

using CylState = std::array<double, 4>;

struct Cylindrical {
    double gamma;
    void operator()(const CylState& y, CylState& dy, double) const {
        const double r = std::hypot(y[0], y[1]);
        const double r3 = r * r * r;
        dy[0] = y[2];
        dy[1] = y[3];
        dy[2] = -y[0] / r3 - 0.25 * gamma * gamma * y[0];
        dy[3] = -y[1] / r3;
    }
};

// Outgoing radial launch from scaled radius r0s at angle theta, integrated at field gamma
// and returned in scaled units (|rho|, z) at the requested scaled times.
inline std::vector<std::array<double, 2>> cylindrical_trace(double epsilon, double gamma, double r0s, double theta,
                                                            const std::vector<double>& scaled_times) {
    namespace odeint = boost::numeric::odeint;
    const double length = std::pow(gamma, -2.0 / 3.0);
    const double momentum = std::cbrt(gamma);
    const double rho_s = r0s * std::sin(theta);
    const double p_s = std::sqrt(2.0 * (epsilon + 1.0 / r0s - rho_s * rho_s / 8.0));
    CylState y{r0s * std::sin(theta) * length, r0s * std::cos(theta) * length, p_s * std::sin(theta) * momentum,
               p_s * std::cos(theta) * momentum};
    std::vector<std::array<double, 2>> out;
    auto stepper = odeint::make_dense_output(1e-14, 1e-14, odeint::runge_kutta_dopri5<CylState>());
    std::vector<double> times;
    for (double t : scaled_times) {
        times.push_back(t / gamma);
    }
    odeint::integrate_times(stepper, Cylindrical{gamma}, y, times.begin(), times.end(), times[1] * 1e-3,
                            [&](const CylState& s, double) { out.push_back({std::abs(s[0]) / length, s[1] / length}); });
    return out;
}

} // namespace fixtures
