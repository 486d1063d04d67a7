#include "rydbohm/bohm.hpp"

#include "rydbohm/errors.hpp"
#include "rydbohm/quadrature.hpp"
#include "rydbohm/units.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <sstream>

namespace rydbohm::bohm {

using complex = std::complex<double>;
using quantum::BasisSpec;
using quantum::ExpansionWorkspace;

namespace {

constexpr double inf = std::numeric_limits<double>::infinity();

struct FlowPoint {
    double v_rho = 0.0;
    double v_z = 0.0;
    double amp = 0.0;
    double grad = 0.0;  // |grad psi|
};

// The flow is extended to rho < 0 as the mirror image so that the axis stays invariant
// under small integration errors; z < 0 is covered by the even z-parity of the expansion.
FlowPoint flow_at(const Eigen::MatrixXcd& coeffs, const BasisSpec& basis, double rho, double z,
                  ExpansionWorkspace& ws) {
    const double sign = rho < 0.0 ? -1.0 : 1.0;
    const auto pv = Wavepacket::evaluate_with(coeffs, basis, std::abs(rho), z, false, ws);
    const double amp2 = std::norm(pv.value);
    FlowPoint f;
    f.amp = std::sqrt(amp2);
    f.grad = std::sqrt(std::norm(pv.d_rho) + std::norm(pv.d_z));
    if (amp2 > 0.0) {
        f.v_rho = sign * (std::conj(pv.value) * pv.d_rho).imag() / amp2;
        f.v_z = (std::conj(pv.value) * pv.d_z).imag() / amp2;
    }
    return f;
}

double au_time(double t_ps) { return units::ps_to_au_time(t_ps); }

void require_position(double rho, double z) {
    if (!(rho >= 0.0) || !std::isfinite(rho) || !std::isfinite(z)) {
        throw InvalidInput("need rho >= 0 and finite z");
    }
}

enum class Outcome { completed, stalled, underflow };

struct Advance {
    Outcome outcome = Outcome::completed;
    double t_au = 0.0;
    Point p;
    double min_amp = inf;
    long steps = 0;
};

// Integrates one trajectory from t0 to t1 (au). outputs[k] for k >= first_output are
// increasing times in (t0, t1] with outputs.back() == t1; record(k, point) is called for each.
template <typename Record>
Advance advance(const Wavepacket& wp, Point start, double t0, double t1, const std::vector<double>& outputs,
                std::size_t first_output, const TrajectoryOptions& opt, Record&& record) {
    using State = Eigen::Vector2d;
    const BasisSpec& basis = wp.spectrum().basis;
    const ode::Tolerances& tol = opt.tolerances;
    const NodeThresholds& thr = opt.thresholds;
    ExpansionWorkspace ws;

    FlowPoint info;
    bool hard_hit = false;
    auto rhs = [&](double t, const State& s) -> State {
        info = flow_at(wp.coefficients_at(t), basis, s[0], s[1], ws);
        if (!(info.amp > thr.hard)) {
            hard_hit = true;
            return State::Zero();
        }
        return State(info.v_rho, info.v_z);
    };

    Advance out;
    State y(start.rho, start.z);
    auto stop = [&](Outcome outcome, double t) {
        out.outcome = outcome;
        out.t_au = t;
        out.p = Point{std::abs(y[0]), y[1]};
        return out;
    };
    State f = rhs(t0, y);
    FlowPoint at_y = info;
    out.min_amp = at_y.amp;
    if (hard_hit) {
        return stop(Outcome::stalled, t0);
    }
    const double span = t1 - t0;
    if (span <= 0.0) {
        return stop(Outcome::completed, t1);
    }

    const double h_min = tol.h_min * span;
    double t = t0;
    double h = tol.h_initial > 0.0 ? tol.h_initial : ode::initial_step(rhs, t, y, f, 1.0, tol);
    std::size_t next_out = first_output;
    ode::StepRecord<State> rec;
    State err;
    while (true) {
        if (++out.steps > tol.max_steps) {
            return stop(Outcome::underflow, t);
        }
        double h_try = std::min({h, t1 - t, tol.h_max});
        const double speed = f.norm();
        if (at_y.amp < thr.node && speed > 0.0 && at_y.grad > 0.0) {
            h_try = std::min(h_try, opt.node_step_fraction * at_y.amp / at_y.grad / speed);
        }
        const bool last = h_try >= t1 - t;
        hard_hit = false;
        ode::dp5_trial_step(rhs, t, y, f, h_try, rec, err);
        const double e = hard_hit ? inf : ode::rms_error_norm(err, y, rec.y1, tol);
        if (e <= 1.0) {
            const double t_new = last ? t1 : t + h_try;
            while (next_out < outputs.size() && outputs[next_out] <= t_new) {
                const State s = (last && next_out + 1 == outputs.size()) ? rec.y1 : rec.at(outputs[next_out]);
                record(next_out, Point{std::abs(s[0]), s[1]});
                ++next_out;
            }
            t = t_new;
            y = rec.y1;
            f = rec.k7;
            at_y = info;
            out.min_amp = std::min(out.min_amp, at_y.amp);
            if (last) {
                return stop(Outcome::completed, t1);
            }
            h = h_try * ode::next_step_factor(e);
        } else {
            h = h_try * (std::isfinite(e) ? std::max(0.2, 0.9 * std::pow(e, -0.25)) : 0.2);
            if (h < h_min) {
                return stop(hard_hit || at_y.amp < thr.node ? Outcome::stalled : Outcome::underflow, t);
            }
        }
    }
}

TrajectoryStatus to_status(Outcome o) {
    switch (o) {
    case Outcome::stalled:
        return TrajectoryStatus::node_stalled;
    case Outcome::underflow:
        return TrajectoryStatus::step_underflow;
    default:
        return TrajectoryStatus::completed;
    }
}

} // namespace

NodeThresholds NodeThresholds::relative_to(const Wavepacket& wp, double node_fraction, double hard_fraction) {
    if (!(node_fraction > 0.0 && hard_fraction > 0.0 && hard_fraction < node_fraction)) {
        throw InvalidInput("node thresholds need 0 < hard < node");
    }
    const Box box = default_box(wp);
    const Eigen::MatrixXcd c = wp.coefficients_at(0.0);
    ExpansionWorkspace ws;
    constexpr int n = 64;
    double peak = 0.0;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            const double rho = box.rho_max * (i + 0.5) / n;
            const double z = box.z_max * (j + 0.5) / n;
            peak = std::max(peak, std::abs(Wavepacket::evaluate_with(c, wp.spectrum().basis, rho, z, false, ws).value));
        }
    }
    return NodeThresholds{node_fraction * peak, hard_fraction * peak};
}

Box default_box(const Wavepacket& wp) {
    const double e_top = wp.spectrum().energies.maxCoeff();
    if (!(e_top < 0.0)) {
        throw InvalidInput("default_box: wavepacket contains unbound states");
    }
    const double extent = 1.5 / std::abs(e_top);
    return Box{extent, extent};
}

VelocitySample velocity(const Wavepacket& wp, double rho, double z, double t_ps, const NodeThresholds& thresholds) {
    require_position(rho, z);
    ExpansionWorkspace ws;
    const FlowPoint f = flow_at(wp.coefficients_at(au_time(t_ps)), wp.spectrum().basis, rho, z, ws);
    if (!(f.amp > thresholds.hard)) {
        throw NodeSingularity(rho, z, f.amp);
    }
    return VelocitySample{f.v_rho, f.v_z, f.amp, f.amp < thresholds.node};
}

VelocitySample velocity_from(const quantum::PointValue<complex>& psi) {
    const double amp2 = std::norm(psi.value);
    VelocitySample v;
    v.amp = std::sqrt(amp2);
    if (amp2 > 0.0) {
        v.v_rho = (std::conj(psi.value) * psi.d_rho).imag() / amp2;
        v.v_z = (std::conj(psi.value) * psi.d_z).imag() / amp2;
    }
    return v;
}

double quantum_potential_from(const quantum::PointValue<complex>& psi) {
    const VelocitySample v = velocity_from(psi);
    // lap|psi| / |psi| = Re(lap psi / psi) + |grad phase|^2
    return -0.5 * ((psi.laplacian / psi.value).real() + v.v_rho * v.v_rho + v.v_z * v.v_z);
}

double quantum_potential(const Wavepacket& wp, double rho, double z, double t_ps, const NodeThresholds& thresholds) {
    require_position(rho, z);
    const auto pv = wp.evaluate(rho, z, au_time(t_ps), true);
    const double amp = std::abs(pv.value);
    if (!(amp > thresholds.node)) {
        throw NodeSingularity(rho, z, amp);
    }
    return quantum_potential_from(pv);
}

ContinuityResidual continuity_residual(const Wavepacket& wp, double rho, double z, double t_ps,
                                       const NodeThresholds& thresholds, double step) {
    require_position(rho, z);
    const double t = au_time(t_ps);
    const BasisSpec& basis = wp.spectrum().basis;
    const Eigen::MatrixXcd c = wp.coefficients_at(t);
    const Eigen::MatrixXcd dc = wp.coefficient_rate_at(t);
    ExpansionWorkspace ws;
    const auto pv = Wavepacket::evaluate_with(c, basis, rho, z, false, ws);
    const double amp = std::abs(pv.value);
    if (!(amp > thresholds.node)) {
        throw NodeSingularity(rho, z, amp);
    }
    const complex rate = Wavepacket::evaluate_with(dc, basis, rho, z, false, ws).value;

    if (step <= 0.0) {
        // a fiftieth of the local de Broglie wavelength over 2 pi
        const double r = std::hypot(rho, z);
        const double kinetic = std::max(wp.mean_energy() + 1.0 / std::max(r, 1e-3), std::abs(wp.mean_energy()));
        step = 0.02 / std::sqrt(2.0 * kinetic);
    }
    if (rho <= 2.0 * step) {
        throw InvalidInput("continuity_residual: point too close to the axis for the difference stencil");
    }
    auto current = [&](double rr, double zz) {
        const auto q = Wavepacket::evaluate_with(c, basis, rr, zz, false, ws);
        return std::array<double, 2>{(std::conj(q.value) * q.d_rho).imag(), (std::conj(q.value) * q.d_z).imag()};
    };
    auto divergence = [&](double h) {
        const double flux_hi = (rho + h) * current(rho + h, z)[0];
        const double flux_lo = (rho - h) * current(rho - h, z)[0];
        const double jz_hi = current(rho, z + h)[1];
        const double jz_lo = current(rho, z - h)[1];
        return (flux_hi - flux_lo) / (2.0 * h * rho) + (jz_hi - jz_lo) / (2.0 * h);
    };
    ContinuityResidual out;
    out.density_rate = 2.0 * (std::conj(pv.value) * rate).real();
    out.divergence = (4.0 * divergence(0.5 * step) - divergence(step)) / 3.0;
    const double scale = std::abs(out.density_rate) + std::abs(out.divergence);
    out.residual = scale > 0.0 ? std::abs(out.density_rate + out.divergence) / scale : 0.0;
    return out;
}

std::string status_name(TrajectoryStatus status) {
    switch (status) {
    case TrajectoryStatus::completed:
        return "completed";
    case TrajectoryStatus::node_stalled:
        return "node-stalled";
    case TrajectoryStatus::step_underflow:
        return "step-underflow";
    }
    return "unknown";
}

BohmTrajectory integrate_trajectory(const Wavepacket& wp, Point start, double t0_ps, double t1_ps,
                                    const TrajectoryOptions& options) {
    require_position(start.rho, start.z);
    if (!(t1_ps >= t0_ps)) {
        throw InvalidInput("integrate_trajectory: t1 must not precede t0");
    }
    std::vector<double> out_ps;
    for (double s : options.sample_times_ps) {
        if (s > t0_ps && s < t1_ps) {
            out_ps.push_back(s);
        }
    }
    std::sort(out_ps.begin(), out_ps.end());
    out_ps.erase(std::unique(out_ps.begin(), out_ps.end()), out_ps.end());
    out_ps.push_back(t1_ps);
    std::vector<double> out_au(out_ps.size());
    std::transform(out_ps.begin(), out_ps.end(), out_au.begin(), au_time);

    BohmTrajectory traj;
    traj.times_ps.push_back(t0_ps);
    traj.points.push_back(start);
    const Advance r = advance(wp, start, au_time(t0_ps), au_time(t1_ps), out_au, 0, options,
                              [&](std::size_t k, Point p) {
                                  if (out_ps[k] > traj.times_ps.back()) {
                                      traj.times_ps.push_back(out_ps[k]);
                                      traj.points.push_back(p);
                                  }
                              });
    traj.steps = r.steps;
    traj.status = to_status(r.outcome);
    traj.min_amp_seen = r.min_amp;
    if (traj.status != TrajectoryStatus::completed) {
        traj.times_ps.push_back(units::au_time_to_ps(r.t_au));
        traj.points.push_back(r.p);
    }

    const BasisSpec& basis = wp.spectrum().basis;
    ExpansionWorkspace ws;
    for (std::size_t i = 0; i < traj.points.size(); ++i) {
        const FlowPoint f = flow_at(wp.coefficients_at(au_time(traj.times_ps[i])), basis, traj.points[i].rho,
                                    traj.points[i].z, ws);
        traj.velocities.push_back({f.v_rho, f.v_z, f.amp, f.amp < options.thresholds.node});
    }
    return traj;
}

Ensemble sample_initial(const Wavepacket& wp, int n, std::uint64_t seed, const SamplingOptions& options) {
    if (n < 1) {
        throw InvalidInput("sample_initial: need at least one sample");
    }
    Ensemble ens;
    ens.seed = seed;
    ens.box = options.box.rho_max > 0.0 ? options.box : default_box(wp);
    const BasisSpec& basis = wp.spectrum().basis;
    const Eigen::MatrixXcd c = wp.coefficients_at(0.0);
    ExpansionWorkspace ws;
    auto weight = [&](double rho, double z) {
        return 2.0 * units::pi * rho * std::norm(Wavepacket::evaluate_with(c, basis, rho, z, false, ws).value);
    };
    // Polar scan with radii crowded towards the nucleus, where the density has its finest
    // structure, then local refinement around the highest scan points.
    const int m = options.scan_points;
    const double r_max = std::hypot(ens.box.rho_max, ens.box.z_max);
    struct ScanPoint {
        double w;
        Point p;
        double h;  // local scan spacing
    };
    std::vector<ScanPoint> scan;
    scan.reserve(static_cast<std::size_t>((m + 1) * (m + 1)));
    for (int i = 0; i <= m; ++i) {
        const double x = static_cast<double>(i) / m;
        const double r = r_max * x * x;
        const double dr = r_max * (2.0 * x + 1.0 / m) / m;
        for (int j = 0; j <= m; ++j) {
            const double th = 0.5 * units::pi * j / m;
            const Point p{r * std::sin(th), r * std::cos(th)};
            if (ens.box.contains(p)) {
                scan.push_back({weight(p.rho, p.z), p, std::max(dr, 0.5 * units::pi * r / m)});
            }
        }
    }
    const std::size_t seeds = std::min<std::size_t>(32, scan.size());
    std::partial_sort(scan.begin(), scan.begin() + static_cast<std::ptrdiff_t>(seeds), scan.end(),
                      [](const ScanPoint& a, const ScanPoint& b) { return a.w > b.w; });
    double bound = scan.front().w;
    for (std::size_t s = 0; s < seeds; ++s) {
        Point center = scan[s].p;
        double h = scan[s].h;
        for (int level = 0; level < 6; ++level) {
            Point best = center;
            for (int a = -4; a <= 4; ++a) {
                for (int b = -4; b <= 4; ++b) {
                    const Point p{std::clamp(center.rho + 0.25 * a * h, 0.0, ens.box.rho_max),
                                  std::clamp(center.z + 0.25 * b * h, 0.0, ens.box.z_max)};
                    const double w = weight(p.rho, p.z);
                    if (w > bound) {
                        bound = w;
                        best = p;
                    }
                }
            }
            center = best;
            h *= 0.35;
        }
    }
    bound *= options.envelope_safety;
    if (!(bound > 0.0)) {
        throw ConvergenceFailure("sample_initial: density vanishes on the envelope scan grid");
    }

    const double max_attempts = static_cast<double>(n) / options.acceptance_floor + 1000.0;
    long attempts = 0;
    ens.initial.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(i)};
        std::mt19937_64 rng(seq);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        while (true) {
            if (++attempts > max_attempts) {
                std::ostringstream msg;
                msg << "sample_initial: acceptance rate below " << options.acceptance_floor << " after " << attempts
                    << " draws; shrink the box or lower envelope_safety";
                throw ConvergenceFailure(msg.str());
            }
            const double rho = ens.box.rho_max * unit(rng);
            const double z = ens.box.z_max * unit(rng);
            const double w = weight(rho, z);
            if (w > bound) {
                std::ostringstream msg;
                msg << "sample_initial: density " << w << " exceeds the envelope " << bound << " at rho=" << rho
                    << " z=" << z << "; raise scan_points or envelope_safety";
                throw ConvergenceFailure(msg.str());
            }
            if (unit(rng) * bound < w) {
                ens.initial.push_back({rho, z});
                break;
            }
        }
    }
    ens.acceptance_rate = static_cast<double>(n) / static_cast<double>(attempts);
    return ens;
}

int EnsembleRun::failures() const {
    return static_cast<int>(std::count_if(status.begin(), status.end(),
                                          [](TrajectoryStatus s) { return s != TrajectoryStatus::completed; }));
}

std::string EnsembleRun::census() const {
    std::map<std::string, int> counts;
    for (TrajectoryStatus s : status) {
        ++counts[status_name(s)];
    }
    std::ostringstream out;
    bool first = true;
    for (const auto& [name, count] : counts) {
        out << (first ? "" : ", ") << name << ": " << count;
        first = false;
    }
    return out.str();
}

std::vector<bool> EnsembleRun::valid_at(std::size_t k) const {
    std::vector<bool> valid(status.size());
    for (std::size_t i = 0; i < status.size(); ++i) {
        valid[i] = status[i] == TrajectoryStatus::completed || failure_time_ps[i] >= checkpoints_ps[k];
    }
    return valid;
}

EnsembleRun propagate_ensemble(const Wavepacket& wp, const Ensemble& ensemble, const std::vector<double>& checkpoints_ps,
                               const TrajectoryOptions& options) {
    if (checkpoints_ps.empty() || checkpoints_ps.front() < 0.0 ||
        !std::is_sorted(checkpoints_ps.begin(), checkpoints_ps.end()) ||
        std::adjacent_find(checkpoints_ps.begin(), checkpoints_ps.end()) != checkpoints_ps.end()) {
        throw InvalidInput("propagate_ensemble: checkpoints must be non-negative and strictly increasing");
    }
    const int n = static_cast<int>(ensemble.initial.size());
    EnsembleRun run;
    run.checkpoints_ps = checkpoints_ps;
    run.positions.assign(checkpoints_ps.size(), std::vector<Point>(n));
    run.status.assign(n, TrajectoryStatus::completed);
    run.failure_time_ps.assign(n, inf);

    // checkpoint 0 may be the start itself
    std::size_t first = 0;
    while (first < checkpoints_ps.size() && checkpoints_ps[first] == 0.0) {
        run.positions[first] = ensemble.initial;
        ++first;
    }
    if (first == checkpoints_ps.size()) {
        return run;
    }
    std::vector<double> out_au(checkpoints_ps.size());
    std::transform(checkpoints_ps.begin(), checkpoints_ps.end(), out_au.begin(), au_time);
    const double t_end = out_au.back();
    for (int id = 0; id < n; ++id) {
        const Advance r = advance(wp, ensemble.initial[id], 0.0, t_end, out_au, first, options,
                                  [&](std::size_t k, Point p) { run.positions[k][id] = p; });
        run.steps += r.steps;
        if (r.outcome != Outcome::completed) {
            run.status[id] = to_status(r.outcome);
            run.failure_time_ps[id] = units::au_time_to_ps(r.t_au);
            for (std::size_t k = first; k < out_au.size(); ++k) {
                if (out_au[k] > r.t_au) {
                    run.positions[k][id] = r.p;
                }
            }
        }
    }
    return run;
}

namespace {

class CellIntegrator {
public:
    CellIntegrator(const Wavepacket& wp, double t_au, int order)
        : basis_(wp.spectrum().basis), coeffs_(wp.coefficients_at(t_au)), rule_(quadrature::gauss_legendre(order)) {}

    // Integral of rho |psi|^2 over the rectangle, bisected until halves and whole agree.
    double adaptive(double r0, double r1, double z0, double z1, double whole, int depth) {
        const double rm = 0.5 * (r0 + r1);
        const double zm = 0.5 * (z0 + z1);
        const double a = plain(r0, rm, z0, zm);
        const double b = plain(rm, r1, z0, zm);
        const double c = plain(r0, rm, zm, z1);
        const double d = plain(rm, r1, zm, z1);
        const double split = a + b + c + d;
        if (depth == 0 || std::abs(split - whole) <= tolerance) {
            return split;
        }
        return adaptive(r0, rm, z0, zm, a, depth - 1) + adaptive(rm, r1, z0, zm, b, depth - 1) +
               adaptive(r0, rm, zm, z1, c, depth - 1) + adaptive(rm, r1, zm, z1, d, depth - 1);
    }

    double plain(double r0, double r1, double z0, double z1) {
        const int n = static_cast<int>(rule_.nodes.size());
        double sum = 0.0;
        for (int a = 0; a < n; ++a) {
            const double rho = r0 + 0.5 * (r1 - r0) * (rule_.nodes[a] + 1.0);
            for (int b = 0; b < n; ++b) {
                const double z = z0 + 0.5 * (z1 - z0) * (rule_.nodes[b] + 1.0);
                const double d = std::norm(Wavepacket::evaluate_with(coeffs_, basis_, rho, z, false, ws_).value);
                sum += rule_.weights[a] * rule_.weights[b] * rho * d;
            }
        }
        return 0.25 * (r1 - r0) * (z1 - z0) * sum;
    }

    double tolerance = 0.0;

private:
    const BasisSpec& basis_;
    Eigen::MatrixXcd coeffs_;
    quadrature::Rule rule_;
    ExpansionWorkspace ws_;
};

} // namespace

std::vector<double> cell_masses(const Wavepacket& wp, double t_ps, const Box& box, int grid, int order) {
    if (grid < 1 || order < 1 || !(box.rho_max > 0.0 && box.z_max > 0.0)) {
        throw InvalidInput("cell_masses: need a positive grid, order, and box");
    }
    CellIntegrator integrator(wp, au_time(t_ps), order);
    // the quadrant holds half the mass: 2 (mirror) * 2 pi (azimuth) * integral
    constexpr double to_mass = 4.0 * units::pi;
    integrator.tolerance = 1e-10 / (to_mass * grid * grid);
    const double dr = box.rho_max / grid;
    const double dz = box.z_max / grid;
    std::vector<double> masses(static_cast<std::size_t>(grid) * grid + 1, 0.0);
    double inside = 0.0;
    for (int i = 0; i < grid; ++i) {
        for (int j = 0; j < grid; ++j) {
            const double r0 = dr * i;
            const double z0 = dz * j;
            const double whole = integrator.plain(r0, r0 + dr, z0, z0 + dz);
            const double mass = to_mass * integrator.adaptive(r0, r0 + dr, z0, z0 + dz, whole, 6);
            masses[static_cast<std::size_t>(i) * grid + j] = mass;
            inside += mass;
        }
    }
    masses.back() = std::max(0.0, 1.0 - inside);
    return masses;
}

EquivarianceReport equivariance_distance(const Wavepacket& wp, const std::vector<Point>& points,
                                         const std::vector<bool>& valid, double t_ps, const Box& box,
                                         const EquivarianceOptions& options) {
    if (points.size() != valid.size() || points.empty()) {
        throw InvalidInput("equivariance_distance: need one validity flag per point");
    }
    EquivarianceReport rep;
    rep.t_ps = t_ps;
    const int g = options.grid;
    std::vector<double> counts(static_cast<std::size_t>(g) * g + 1, 0.0);
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (!valid[i]) {
            ++rep.failed;
            continue;
        }
        ++rep.used;
        const Point& p = points[i];
        const double z = std::abs(p.z);
        if (p.rho >= box.rho_max || z >= box.z_max) {
            counts.back() += 1.0;
            continue;
        }
        const int a = std::min(g - 1, static_cast<int>(p.rho / box.rho_max * g));
        const int b = std::min(g - 1, static_cast<int>(z / box.z_max * g));
        counts[static_cast<std::size_t>(a) * g + b] += 1.0;
    }
    if (rep.failed > options.max_failure_fraction * static_cast<double>(points.size())) {
        std::ostringstream msg;
        msg << "equivariance_distance: " << rep.failed << " of " << points.size()
            << " trajectories failed before t=" << t_ps << " ps";
        throw ConvergenceFailure(msg.str());
    }
    const std::vector<double> p = cell_masses(wp, t_ps, box, g, options.quadrature_order);
    rep.outside_mass = p.back();
    double total = 0.0;
    for (double v : p) {
        total += v;
    }
    auto tv = [&](const std::vector<double>& c, double n) {
        double d = 0.0;
        for (std::size_t k = 0; k < c.size(); ++k) {
            d += std::abs(c[k] / n - p[k] / total);
        }
        return 0.5 * d;
    };
    rep.distance = tv(counts, rep.used);

    std::mt19937_64 rng(options.seed);
    std::vector<double> draw(p.size());
    double noise = 0.0;
    for (int b = 0; b < options.bootstrap; ++b) {
        int remaining = rep.used;
        double mass_left = 1.0;
        for (std::size_t k = 0; k < p.size(); ++k) {
            const double q = p[k] / total;
            int nk = 0;
            if (remaining > 0 && q > 0.0) {
                const double prob = std::clamp(q / mass_left, 0.0, 1.0);
                nk = std::binomial_distribution<int>(remaining, prob)(rng);
            }
            draw[k] = nk;
            remaining -= nk;
            mass_left -= q;
            if (mass_left <= 0.0) {
                mass_left = 1e-300;
            }
        }
        noise += tv(draw, rep.used);
    }
    rep.bootstrap_noise = noise / options.bootstrap;
    return rep;
}

} // namespace rydbohm::bohm
