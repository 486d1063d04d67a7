#pragma once

// Scaled classical dynamics of the m = 0 diamagnetic Kepler problem,
//   H = p^2/2 - 1/r + rho^2/8 = epsilon,
// regularized with semiparabolic (Levi-Civita) coordinates z + i x = (mu + i nu)^2 / 2
// and fictitious time dt = (mu^2 + nu^2) dtau, in which
//   h = (p_mu^2 + p_nu^2)/2 - epsilon (mu^2 + nu^2) + mu^2 nu^2 (mu^2 + nu^2)/8 = 2.
// All lengths and times here are scaled (r~ = gamma^(2/3) r, t~ = gamma t).

#include "rydbohm/ode.hpp"

#include <Eigen/Core>

#include <optional>
#include <string>
#include <vector>

namespace rydbohm::classical {

struct SemiparabolicState {
    double mu = 0.0;
    double nu = 0.0;
    double p_mu = 0.0;
    double p_nu = 0.0;
    double tau = 0.0;
    double t_phys = 0.0;
};

// (mu, nu, p_mu, p_nu, t_phys) as integrated in fictitious time.
using StateVector = Eigen::Matrix<double, 5, 1>;

StateVector to_vector(const SemiparabolicState& s);
SemiparabolicState from_vector(const StateVector& y, double tau);

double regularized_energy(const SemiparabolicState& s, double epsilon);
double regularized_energy(const StateVector& y, double epsilon);

// d/dtau of (mu, nu, p_mu, p_nu, t_phys).
StateVector regularized_rhs(const StateVector& y, double epsilon);

struct LaunchSpec {
    double r0 = 0.0;     // scaled launch radius
    double theta = 0.0;  // angle from the +z axis, [0, pi/2]
    double p_theta = 0.0;
    double epsilon = 0.0;

    void validate() const;
};

// Launch point with outgoing radial momentum fixed by h = 2.
SemiparabolicState launch_state(const LaunchSpec& launch);

struct TracePoint {
    double t = 0.0;    // scaled time
    double rho = 0.0;  // scaled cylindrical radius (>= 0)
    double z = 0.0;    // scaled axial coordinate
};

struct Trace {
    std::vector<TracePoint> samples;
    double max_energy_error = 0.0;  // max |h - 2| over accepted steps
    long steps = 0;
};

// Uniformly sampled trace (in physical scaled time) from launch to t_max.
Trace integrate(const LaunchSpec& launch, double t_max, double dt_out, const ode::Tolerances& tol = {});

// Same, but starting from an arbitrary regularized state.
Trace integrate_state(const SemiparabolicState& start, double epsilon, double t_max, double dt_out,
                      const ode::Tolerances& tol = {});

// A close approach to the nucleus: a local minimum of r along the orbit.
struct ReturnEvent {
    double t = 0.0;            // scaled time since launch
    double miss = 0.0;         // signed miss distance in the (mu, nu) plane
    double return_radius = 0.0;  // scaled r at the minimum
};

struct ReturnScan {
    std::vector<ReturnEvent> events;
    double max_energy_error = 0.0;
};

// All local minima of r up to t_max.
ReturnScan scan_returns(const LaunchSpec& launch, double t_max, const ode::Tolerances& tol = {});

struct ClosedOrbit {
    double theta_launch = 0.0;
    double scaled_period = 0.0;   // nucleus to nucleus
    double return_radius = 0.0;   // scaled residual miss distance
    int return_index = 0;         // which close approach closed the orbit (1 = first)
    int repetition = 1;           // k > 1 for the k-th traversal of a shorter orbit
    std::string label;
    std::vector<TracePoint> trace;
};

struct OrbitSearchOptions {
    int theta_points = 241;
    double closure_tol = 1e-8;    // scaled return radius accepted as closed
    double t_max = 20.0;          // scaled time horizon for returns
    double trace_dt = 0.01;       // sampling of the stored traces
    ode::Tolerances tolerances{};
    int max_bisections = 200;
};

struct OrbitSearchResult {
    std::vector<ClosedOrbit> orbits;     // sorted by period
    std::vector<std::string> failures;   // candidates that did not converge
};

OrbitSearchResult find_closed_orbits(double epsilon, double r0, const OrbitSearchOptions& options = {});

// Scaled period -> picoseconds at field gamma.
double physical_period_ps(const ClosedOrbit& orbit, double gamma);

} // namespace rydbohm::classical
