#include "rydbohm/classical.hpp"

#include "rydbohm/errors.hpp"
#include "rydbohm/units.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace rydbohm::classical {

using Record = ode::StepRecord<StateVector>;

StateVector to_vector(const SemiparabolicState& s) {
    StateVector y;
    y << s.mu, s.nu, s.p_mu, s.p_nu, s.t_phys;
    return y;
}

SemiparabolicState from_vector(const StateVector& y, double tau) {
    return SemiparabolicState{y[0], y[1], y[2], y[3], tau, y[4]};
}

double regularized_energy(const SemiparabolicState& s, double epsilon) {
    return regularized_energy(to_vector(s), epsilon);
}

double regularized_energy(const StateVector& y, double epsilon) {
    const double mu2 = y[0] * y[0];
    const double nu2 = y[1] * y[1];
    return 0.5 * (y[2] * y[2] + y[3] * y[3]) - epsilon * (mu2 + nu2) + 0.125 * mu2 * nu2 * (mu2 + nu2);
}

StateVector regularized_rhs(const StateVector& y, double epsilon) {
    const double mu = y[0];
    const double nu = y[1];
    const double mu2 = mu * mu;
    const double nu2 = nu * nu;
    StateVector d;
    d[0] = y[2];
    d[1] = y[3];
    // -d/dmu of -eps (mu^2+nu^2) + (mu^4 nu^2 + mu^2 nu^4)/8
    d[2] = 2.0 * epsilon * mu - 0.125 * (4.0 * mu2 * mu * nu2 + 2.0 * mu * nu2 * nu2);
    d[3] = 2.0 * epsilon * nu - 0.125 * (4.0 * nu2 * nu * mu2 + 2.0 * nu * mu2 * mu2);
    d[4] = mu2 + nu2;
    return d;
}

void LaunchSpec::validate() const {
    if (!(r0 > 0.0) || !std::isfinite(r0)) {
        throw InvalidInput("LaunchSpec: r0 must be positive");
    }
    if (!(theta >= 0.0 && theta <= 0.5 * units::pi + 1e-15)) {
        throw InvalidInput("LaunchSpec: theta must lie in [0, pi/2]");
    }
    if (p_theta != 0.0) {
        throw InvalidInput("LaunchSpec: only p_theta = 0 launches are supported");
    }
}

SemiparabolicState launch_state(const LaunchSpec& launch) {
    launch.validate();
    const double rho = launch.r0 * std::sin(launch.theta);
    const double p_r2 = 2.0 * (launch.epsilon + 1.0 / launch.r0 - rho * rho / 8.0);
    if (!(p_r2 > 0.0)) {
        throw InvalidInput("LaunchSpec: launch point is classically forbidden at this energy");
    }
    const double p_r = std::sqrt(p_r2);
    const double big_r = std::sqrt(2.0 * launch.r0);
    SemiparabolicState s;
    s.mu = big_r * std::cos(0.5 * launch.theta);
    s.nu = big_r * std::sin(0.5 * launch.theta);
    // radial momentum maps to p_(mu,nu) = p_r * (mu, nu)
    s.p_mu = p_r * s.mu;
    s.p_nu = p_r * s.nu;
    return s;
}

namespace {

// Adaptive integration in fictitious time; calls on_step for every accepted step
// until it returns false or t_phys reaches t_max.
template <typename OnStep>
double drive(const StateVector& start, double epsilon, double t_max, const ode::Tolerances& tol,
             OnStep&& on_step, long* steps_out = nullptr) {
    auto rhs = [epsilon](double, const StateVector& y) { return regularized_rhs(y, epsilon); };
    StateVector y = start;
    StateVector f = rhs(0.0, y);
    double tau = 0.0;
    double h = tol.h_initial > 0.0 ? tol.h_initial : ode::initial_step(rhs, tau, y, f, 1.0, tol);
    h = std::min(h, 0.05);
    double max_err = std::abs(regularized_energy(y, epsilon) - 2.0);
    Record rec;
    StateVector err;
    long steps = 0;
    while (y[4] < t_max) {
        if (++steps > tol.max_steps) {
            throw IntegrationFailure("classical integration exceeded the step budget at t=" + std::to_string(y[4]));
        }
        ode::dp5_trial_step(rhs, tau, y, f, h, rec, err);
        const double en = ode::rms_error_norm(err, y, rec.y1, tol);
        if (!std::isfinite(en)) {
            h *= 0.1;
        } else if (en <= 1.0) {
            tau += h;
            y = rec.y1;
            f = rec.k7;
            max_err = std::max(max_err, std::abs(regularized_energy(y, epsilon) - 2.0));
            if (!on_step(rec)) {
                break;
            }
            h *= ode::next_step_factor(en);
        } else {
            h *= std::max(0.2, 0.9 * std::pow(en, -0.25));
        }
        h = std::min(h, 0.05);
        if (h < tol.h_min) {
            std::ostringstream msg;
            msg << "classical integration: step-size underflow at tau=" << tau << " t=" << y[4] << " mu=" << y[0]
                << " nu=" << y[1] << " h=" << h;
            throw IntegrationFailure(msg.str());
        }
    }
    if (steps_out != nullptr) {
        *steps_out = steps;
    }
    return max_err;
}

// Root of component-wise function g(state) on the step's dense output, bracketed on [t0, t1].
template <typename G>
double locate(const Record& rec, G&& g) {
    double a = rec.t0;
    double b = rec.t1();
    double ga = g(rec.y0);
    for (int i = 0; i < 80 && b - a > 1e-15 * std::max(1.0, std::abs(b)); ++i) {
        const double m = 0.5 * (a + b);
        const double gm = g(rec.at(m));
        if ((gm < 0.0) == (ga < 0.0)) {
            a = m;
            ga = gm;
        } else {
            b = m;
        }
    }
    return 0.5 * (a + b);
}

TracePoint to_trace_point(const StateVector& y) {
    // z + i x = (mu + i nu)^2 / 2
    return TracePoint{y[4], std::abs(y[0] * y[1]), 0.5 * (y[0] * y[0] - y[1] * y[1])};
}

double radial_velocity_sign(const StateVector& y) { return y[0] * y[2] + y[1] * y[3]; }

ReturnEvent make_event(const StateVector& y) {
    ReturnEvent e;
    e.t = y[4];
    const double p = std::hypot(y[2], y[3]);
    e.miss = (y[0] * y[3] - y[1] * y[2]) / p;
    e.return_radius = 0.5 * (y[0] * y[0] + y[1] * y[1]);
    return e;
}

// Physical time from the nucleus out to the launch point, found by running the launch backwards.
double time_from_nucleus(const SemiparabolicState& start, double epsilon, const ode::Tolerances& tol) {
    SemiparabolicState back = start;
    back.p_mu = -back.p_mu;
    back.p_nu = -back.p_nu;
    double t_found = -1.0;
    drive(to_vector(back), epsilon, 1e300, tol, [&](const Record& rec) {
        if (radial_velocity_sign(rec.y0) < 0.0 && radial_velocity_sign(rec.y1) >= 0.0) {
            t_found = rec.at(locate(rec, radial_velocity_sign))[4];
            return false;
        }
        return true;
    });
    return t_found;
}

} // namespace

Trace integrate_state(const SemiparabolicState& start, double epsilon, double t_max, double dt_out,
                      const ode::Tolerances& tol) {
    if (!(dt_out > 0.0) || !(t_max > 0.0)) {
        throw InvalidInput("integrate: t_max and dt_out must be positive");
    }
    Trace trace;
    StateVector y0 = to_vector(start);
    const double t_start = y0[4];
    trace.samples.push_back(to_trace_point(y0));
    long next = 1;
    trace.max_energy_error = drive(
        y0, epsilon, t_start + t_max, tol,
        [&](const Record& rec) {
            while (true) {
                const double target = t_start + static_cast<double>(next) * dt_out;
                if (target > rec.y1[4] || target > t_start + t_max * (1.0 + 1e-14)) {
                    break;
                }
                const double tau = locate(rec, [target](const StateVector& y) { return y[4] - target; });
                StateVector y = rec.at(tau);
                y[4] = target;
                trace.samples.push_back(to_trace_point(y));
                ++next;
            }
            return true;
        },
        &trace.steps);
    return trace;
}

Trace integrate(const LaunchSpec& launch, double t_max, double dt_out, const ode::Tolerances& tol) {
    return integrate_state(launch_state(launch), launch.epsilon, t_max, dt_out, tol);
}

ReturnScan scan_returns(const LaunchSpec& launch, double t_max, const ode::Tolerances& tol) {
    ReturnScan scan;
    scan.max_energy_error = drive(to_vector(launch_state(launch)), launch.epsilon, t_max, tol, [&](const Record& rec) {
        if (radial_velocity_sign(rec.y0) < 0.0 && radial_velocity_sign(rec.y1) >= 0.0) {
            scan.events.push_back(make_event(rec.at(locate(rec, radial_velocity_sign))));
        }
        return true;
    });
    return scan;
}

namespace {

struct Candidate {
    double theta;
    ReturnEvent event;
    int index;
};

const ReturnEvent* nearest_event(const std::vector<ReturnEvent>& events, double t, int* index = nullptr) {
    const ReturnEvent* best = nullptr;
    for (std::size_t i = 0; i < events.size(); ++i) {
        if (best == nullptr || std::abs(events[i].t - t) < std::abs(best->t - t)) {
            best = &events[i];
            if (index != nullptr) {
                *index = static_cast<int>(i) + 1;
            }
        }
    }
    return best;
}

bool same_time(double a, double b) { return std::abs(a - b) < 0.05 * std::max(a, b); }

} // namespace

OrbitSearchResult find_closed_orbits(double epsilon, double r0, const OrbitSearchOptions& options) {
    if (options.theta_points < 2) {
        throw InvalidInput("find_closed_orbits: need at least two launch angles");
    }
    const double theta_max = 0.5 * units::pi;
    const int n = options.theta_points;
    std::vector<double> thetas(static_cast<std::size_t>(n));
    std::vector<ReturnScan> scans(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        thetas[i] = theta_max * i / (n - 1);
        scans[i] = scan_returns({r0, thetas[i], 0.0, epsilon}, options.t_max, options.tolerances);
    }

    OrbitSearchResult result;
    std::vector<Candidate> found;

    // Closures that already sit on a grid angle (the axis orbits, the Coulomb limit).
    for (int i = 0; i < n; ++i) {
        for (std::size_t e = 0; e < scans[i].events.size(); ++e) {
            if (scans[i].events[e].return_radius < options.closure_tol) {
                found.push_back({thetas[i], scans[i].events[e], static_cast<int>(e) + 1});
            }
        }
    }

    // Sign changes of the miss distance between neighbouring angles, matched by return time.
    for (int i = 0; i + 1 < n; ++i) {
        for (const ReturnEvent& ea : scans[i].events) {
            if (ea.return_radius < options.closure_tol) {
                continue;
            }
            const ReturnEvent* eb = nearest_event(scans[i + 1].events, ea.t);
            if (eb == nullptr || !same_time(ea.t, eb->t) || eb->return_radius < options.closure_tol ||
                (ea.miss < 0.0) == (eb->miss < 0.0)) {
                continue;
            }
            double lo = thetas[i];
            double hi = thetas[i + 1];
            const bool lo_negative = ea.miss < 0.0;
            double t_guess = 0.5 * (ea.t + eb->t);
            ReturnEvent best = ea;
            int best_index = 0;
            double best_theta = lo;
            bool lost = false;
            for (int it = 0; it < options.max_bisections; ++it) {
                const double mid = 0.5 * (lo + hi);
                const ReturnScan s = scan_returns({r0, mid, 0.0, epsilon}, std::min(options.t_max, 1.2 * t_guess + 0.1),
                                                  options.tolerances);
                int index = 0;
                const ReturnEvent* em = nearest_event(s.events, t_guess, &index);
                if (em == nullptr || !same_time(em->t, t_guess)) {
                    lost = true;
                    break;
                }
                t_guess = em->t;
                best = *em;
                best_index = index;
                best_theta = mid;
                if (em->return_radius < 1e-3 * options.closure_tol || hi - lo < 1e-15) {
                    break;
                }
                if ((em->miss < 0.0) == lo_negative) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            if (!lost && best.return_radius < options.closure_tol) {
                found.push_back({best_theta, best, best_index});
            } else {
                std::ostringstream msg;
                msg << "theta in [" << thetas[i] << ", " << thetas[i + 1] << "], return near t=" << t_guess << ": "
                    << (lost ? "return event lost during bisection" : "bisection ended with return radius ")
                    << (lost ? 0.0 : best.return_radius);
                result.failures.push_back(msg.str());
            }
        }
    }

    // Period from nucleus to nucleus; drop duplicates.
    std::sort(found.begin(), found.end(), [](const Candidate& a, const Candidate& b) {
        return a.event.t < b.event.t || (a.event.t == b.event.t && a.theta < b.theta);
    });
    for (const Candidate& c : found) {
        const LaunchSpec launch{r0, c.theta, 0.0, epsilon};
        const double t_in = time_from_nucleus(launch_state(launch), epsilon, options.tolerances);
        ClosedOrbit orbit;
        orbit.theta_launch = c.theta;
        orbit.scaled_period = c.event.t + std::max(0.0, t_in);
        orbit.return_radius = c.event.return_radius;
        orbit.return_index = c.index;
        const bool duplicate = std::any_of(result.orbits.begin(), result.orbits.end(), [&](const ClosedOrbit& o) {
            return std::abs(o.theta_launch - orbit.theta_launch) < 1e-7 &&
                   std::abs(o.scaled_period - orbit.scaled_period) < 1e-6 * orbit.scaled_period;
        });
        if (!duplicate) {
            result.orbits.push_back(std::move(orbit));
        }
    }
    std::sort(result.orbits.begin(), result.orbits.end(),
              [](const ClosedOrbit& a, const ClosedOrbit& b) { return a.scaled_period < b.scaled_period; });

    // Labels and repetitions.
    for (std::size_t i = 0; i < result.orbits.size(); ++i) {
        ClosedOrbit& o = result.orbits[i];
        for (std::size_t j = 0; j < i; ++j) {
            const ClosedOrbit& base = result.orbits[j];
            if (base.repetition != 1 || std::abs(base.theta_launch - o.theta_launch) > 1e-4) {
                continue;
            }
            const double ratio = o.scaled_period / base.scaled_period;
            const double k = std::round(ratio);
            if (k >= 2.0 && std::abs(ratio - k) < 1e-4 * k) {
                o.repetition = static_cast<int>(k);
                break;
            }
        }
        std::ostringstream label;
        if (o.theta_launch < 1e-9) {
            label << "parallel";
        } else if (std::abs(o.theta_launch - theta_max) < 1e-9) {
            label << "perpendicular";
        } else {
            label.precision(4);
            label << std::fixed << "theta=" << o.theta_launch;
        }
        if (o.repetition > 1) {
            label << "^" << o.repetition;
        }
        o.label = label.str();
        o.trace = integrate({r0, o.theta_launch, 0.0, epsilon}, o.scaled_period, options.trace_dt,
                            options.tolerances)
                      .samples;
    }
    return result;
}

double physical_period_ps(const ClosedOrbit& orbit, double gamma) {
    if (!(gamma > 0.0)) {
        throw InvalidInput("physical_period: gamma must be positive");
    }
    return units::au_time_to_ps(orbit.scaled_period / gamma);
}

} // namespace rydbohm::classical
