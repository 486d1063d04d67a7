#pragma once

// de Broglie-Bohm flow of a wavepacket in the (rho, z) half-plane: velocity field,
// quantum potential, trajectory integration with node-aware stepping, ensembles.

#include "rydbohm/ode.hpp"
#include "rydbohm/wavepacket.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace rydbohm::bohm {

using wavepacket::Wavepacket;

struct Point {
    double rho = 0.0;
    double z = 0.0;
};

// Amplitude thresholds for node handling. Below `node` the step size is limited by the
// distance to the node; below `hard` the trajectory is considered stalled.
struct NodeThresholds {
    double node = 0.0;
    double hard = 0.0;

    // Thresholds given as fractions of the largest |psi(t = 0)| in the wavepacket's box.
    static NodeThresholds relative_to(const Wavepacket& wp, double node_fraction = 1e-3,
                                      double hard_fraction = 1e-9);
};

// Region [0, rho_max] x [0, z_max] holding the bulk of the wavepacket.
struct Box {
    double rho_max = 0.0;
    double z_max = 0.0;

    bool contains(const Point& p) const { return p.rho <= rho_max && p.z <= z_max; }
};

// Square box reaching 1.5 classical turning radii of the most weakly bound retained state.
Box default_box(const Wavepacket& wp);

struct VelocitySample {
    double v_rho = 0.0;
    double v_z = 0.0;
    double amp = 0.0;
    bool node_flag = false;
};

// Pointwise formulas from psi, its gradient and (for Q) its Laplacian.
VelocitySample velocity_from(const quantum::PointValue<std::complex<double>>& psi);
double quantum_potential_from(const quantum::PointValue<std::complex<double>>& psi);

// v = Im(grad psi / psi). Throws NodeSingularity when |psi| < thresholds.hard.
VelocitySample velocity(const Wavepacket& wp, double rho, double z, double t_ps, const NodeThresholds& thresholds = {});

// Q = -(1/2) lap|psi| / |psi| in hartree.
double quantum_potential(const Wavepacket& wp, double rho, double z, double t_ps,
                         const NodeThresholds& thresholds = {});

struct ContinuityResidual {
    double density_rate = 0.0;  // d|psi|^2/dt from the eigen-expansion
    double divergence = 0.0;    // div(|psi|^2 v), extrapolated finite differences
    double residual = 0.0;      // |rate + divergence| / (|rate| + |divergence|)
};

// `step` is the finite-difference spacing in au (0 picks a default from the position).
ContinuityResidual continuity_residual(const Wavepacket& wp, double rho, double z, double t_ps,
                                       const NodeThresholds& thresholds = {}, double step = 0.0);

enum class TrajectoryStatus { completed, node_stalled, step_underflow };
std::string status_name(TrajectoryStatus status);

struct TrajectoryOptions {
    ode::Tolerances tolerances{1e-9, 1e-7};  // on positions in au
    NodeThresholds thresholds;
    double node_step_fraction = 0.1;  // max displacement per step in units of |psi| / |grad psi|
    std::vector<double> sample_times_ps;  // extra output times inside the span
};

struct BohmTrajectory {
    std::vector<double> times_ps;
    std::vector<Point> points;
    std::vector<VelocitySample> velocities;
    double min_amp_seen = 0.0;
    TrajectoryStatus status = TrajectoryStatus::completed;
    long steps = 0;
};

// Integrates dr/dt = v from t0_ps to t1_ps. Output holds the start, every sample time
// reached, and the final point.
BohmTrajectory integrate_trajectory(const Wavepacket& wp, Point start, double t0_ps, double t1_ps,
                                    const TrajectoryOptions& options = {});

struct SamplingOptions {
    Box box;                        // default_box when empty
    int scan_points = 160;          // envelope scan per axis
    double envelope_safety = 1.5;
    double acceptance_floor = 1e-4;
};

struct Ensemble {
    std::uint64_t seed = 0;
    Box box;
    std::vector<Point> initial;
    double acceptance_rate = 0.0;
};

// Rejection sampling of 2 pi rho |psi(rho, z, 0)|^2 under a uniform envelope on the box.
// Sample i draws from its own generator seeded by (seed, i).
Ensemble sample_initial(const Wavepacket& wp, int n, std::uint64_t seed, const SamplingOptions& options = {});

struct EnsembleRun {
    std::vector<double> checkpoints_ps;
    std::vector<std::vector<Point>> positions;  // [checkpoint][trajectory]
    std::vector<TrajectoryStatus> status;
    std::vector<double> failure_time_ps;  // time at which a failed trajectory stopped
    long steps = 0;

    int failures() const;
    std::string census() const;
    // Trajectories still running (or finished) at checkpoint index k.
    std::vector<bool> valid_at(std::size_t k) const;
};

// Looser tolerances suited to statistics over many trajectories.
inline TrajectoryOptions ensemble_trajectory_options() { return {ode::Tolerances{1e-7, 1e-5}, {}, 0.1, {}}; }

// Propagates every member from t = 0 through increasing checkpoint times. A failed trajectory
// keeps its last position at later checkpoints and is excluded there by valid_at.
EnsembleRun propagate_ensemble(const Wavepacket& wp, const Ensemble& ensemble, const std::vector<double>& checkpoints_ps,
                               const TrajectoryOptions& options = ensemble_trajectory_options());

// Probability of each cell of a grid x grid partition of the box at time t (row-major in
// rho), plus the mass outside the box as the final entry.
std::vector<double> cell_masses(const Wavepacket& wp, double t_ps, const Box& box, int grid, int order = 8);

struct EquivarianceOptions {
    int grid = 24;
    int bootstrap = 200;
    std::uint64_t seed = 1;
    int quadrature_order = 8;
    double max_failure_fraction = 0.01;
};

struct EquivarianceReport {
    double t_ps = 0.0;
    double distance = 0.0;
    double bootstrap_noise = 0.0;  // mean distance of multinomial resamples from the exact masses
    int used = 0;
    int failed = 0;
    double outside_mass = 0.0;
};

// Total-variation distance between trajectory endpoints and the quadrature of
// 2 pi rho |psi(t)|^2 over the grid. Throws ConvergenceFailure when too many
// trajectories failed.
EquivarianceReport equivariance_distance(const Wavepacket& wp, const std::vector<Point>& points,
                                         const std::vector<bool>& valid, double t_ps, const Box& box,
                                         const EquivarianceOptions& options = {});

} // namespace rydbohm::bohm
