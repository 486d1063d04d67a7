#pragma once

// Dormand-Prince 5(4) embedded Runge-Kutta pair with the 4th-order
// continuous extension, shared by the classical and Bohmian integrators.

#include <Eigen/Core>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace rydbohm::ode {

struct Tolerances {
    double rtol = 1e-10;
    double atol = 1e-12;
    double h_initial = 0.0;   // 0 selects an automatic first step
    double h_min = 1e-14;     // relative to the span, below which the step underflows
    double h_max = std::numeric_limits<double>::infinity();
    long max_steps = 10'000'000;
};

template <typename State>
struct StepRecord {
    double t0 = 0.0;
    double h = 0.0;
    State y0;
    State y1;
    State k1;
    State k7;
    State rc5;  // continuous-extension correction term

    double t1() const { return t0 + h; }

    // Dense output on [t0, t0 + h].
    State at(double t) const {
        const double theta = (t - t0) / h;
        const double theta1 = 1.0 - theta;
        const State rc2 = y1 - y0;
        const State rc3 = h * k1 - rc2;
        const State rc4 = rc2 - h * k7 - rc3;
        return y0 + theta * (rc2 + theta1 * (rc3 + theta * (rc4 + theta1 * rc5)));
    }
};

namespace dp5 {
inline constexpr double c2 = 1.0 / 5.0, c3 = 3.0 / 10.0, c4 = 4.0 / 5.0, c5 = 8.0 / 9.0;
inline constexpr double a21 = 1.0 / 5.0;
inline constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
inline constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
inline constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0, a53 = 64448.0 / 6561.0,
                        a54 = -212.0 / 729.0;
inline constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0, a63 = 46732.0 / 5247.0,
                        a64 = 49.0 / 176.0, a65 = -5103.0 / 18656.0;
inline constexpr double b1 = 35.0 / 384.0, b3 = 500.0 / 1113.0, b4 = 125.0 / 192.0,
                        b5 = -2187.0 / 6784.0, b6 = 11.0 / 84.0;
inline constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0,
                        e5 = -17253.0 / 339200.0, e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;
inline constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                        d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                        d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;
} // namespace dp5

// One trial step from (t, y) with derivative k1 = f(t, y). Fills `rec` (y1, k7, dense
// coefficients) and returns the error-estimate vector in `err`.
template <typename State, typename Rhs>
void dp5_trial_step(Rhs&& rhs, double t, const State& y, const State& k1, double h,
                    StepRecord<State>& rec, State& err) {
    using namespace dp5;
    const State k2 = rhs(t + c2 * h, State(y + h * a21 * k1));
    const State k3 = rhs(t + c3 * h, State(y + h * (a31 * k1 + a32 * k2)));
    const State k4 = rhs(t + c4 * h, State(y + h * (a41 * k1 + a42 * k2 + a43 * k3)));
    const State k5 = rhs(t + c5 * h, State(y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4)));
    const State k6 =
        rhs(t + h, State(y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5)));
    State y1 = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    State k7 = rhs(t + h, y1);
    err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
    rec.t0 = t;
    rec.h = h;
    rec.y0 = y;
    rec.k1 = k1;
    rec.rc5 = h * (d1 * k1 + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6 + d7 * k7);
    rec.y1 = std::move(y1);
    rec.k7 = std::move(k7);
}

// Scaled RMS error norm used for step acceptance.
template <typename State>
double rms_error_norm(const State& err, const State& y0, const State& y1, const Tolerances& tol) {
    double sum = 0.0;
    const auto n = err.size();
    for (Eigen::Index i = 0; i < n; ++i) {
        const double scale = tol.atol + tol.rtol * std::max(std::abs(y0[i]), std::abs(y1[i]));
        const double q = err[i] / scale;
        sum += q * q;
    }
    return std::sqrt(sum / static_cast<double>(n));
}

// Standard PI-free step-size update for a 5th-order method.
inline double next_step_factor(double err_norm) {
    constexpr double safety = 0.9;
    constexpr double min_factor = 0.2;
    constexpr double max_factor = 5.0;
    if (err_norm == 0.0) {
        return max_factor;
    }
    return std::clamp(safety * std::pow(err_norm, -0.2), min_factor, max_factor);
}

// Hairer's initial step heuristic.
template <typename State, typename Rhs>
double initial_step(Rhs&& rhs, double t, const State& y, const State& f0, double direction,
                    const Tolerances& tol) {
    auto norm = [&](const State& v) {
        double s = 0.0;
        for (Eigen::Index i = 0; i < v.size(); ++i) {
            const double sc = tol.atol + tol.rtol * std::abs(y[i]);
            s += (v[i] / sc) * (v[i] / sc);
        }
        return std::sqrt(s / static_cast<double>(v.size()));
    };
    const double d0 = norm(y);
    const double d1 = norm(f0);
    double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    const State y1 = y + direction * h0 * f0;
    const State f1 = rhs(t + direction * h0, y1);
    const double d2 = norm(State(f1 - f0)) / h0;
    const double dmax = std::max(d1, d2);
    const double h1 = dmax <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / dmax, 0.2);
    return std::min({100.0 * h0, h1, tol.h_max});
}

} // namespace rydbohm::ode
