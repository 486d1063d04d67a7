#pragma once

// Run configuration: a text file of `key = value` lines with flat dotted keys.
// Lines starting with '#' are comments. Unknown keys are rejected.

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace rydbohm::io {

struct RunConfig {
    // field: exactly one of tesla, gamma, epsilon; with target.n_eff it fixes (E, B, epsilon)
    std::optional<double> field_tesla;
    std::optional<double> field_gamma;
    std::optional<double> field_epsilon;
    double n_eff = 24.0;

    // eigenstates kept, as a range of effective principal quantum numbers
    double window_n_low = 22.0;
    double window_n_high = 26.0;

    int basis_n_max = 96;
    std::optional<double> basis_b;  // default sqrt(n_eff)
    std::string solver_method = "automatic";
    std::uint64_t solver_seed = 20070415;

    double wavepacket_r0_au = 10.0;
    double wavepacket_delta_r_au2 = 4.0;
    std::vector<double> wavepacket_bump_angles{0.0, 1.1};
    double wavepacket_sigma_theta = 0.2;

    std::optional<double> time_t_max_ps;  // default 4 cyclotron periods
    int time_samples = 2001;
    std::string recurrence_apodization = "rectangular";
    double peaks_min_prominence = 0.01;

    std::vector<std::pair<double, double>> probe_points;  // (rho_au, z_au)
    double probe_orbit_fraction = 0.5;  // point P on the recurrence orbit, by elapsed time
    int probe_power = 4;

    double orbits_r0_au = 10.0;
    int orbits_theta_points = 241;
    double orbits_t_max_scaled = 20.0;

    std::vector<std::pair<double, double>> bohm_starts{{10.0, 1.1}, {10.0, 0.0}};  // (r_au, theta)
    std::optional<double> bohm_t_max_ps;  // default 1.5 cyclotron periods
    int bohm_samples = 400;
    double bohm_rtol = 1e-9;
    double bohm_atol_au = 1e-7;
    double bohm_node_fraction = 1e-3;
    double bohm_hard_fraction = 1e-9;

    int ensemble_n = 4000;
    std::uint64_t ensemble_seed = 1;
    int ensemble_checkpoints = 4;
    int ensemble_grid = 24;
    double ensemble_rtol = 1e-7;
    double ensemble_atol_au = 1e-5;

    void validate() const;
};

RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

// Sorted `key = value` listing of every setting, with defaults filled in.
std::string canonical_text(const RunConfig& config);

// First 16 hex digits of the SHA-256 of canonical_text.
std::string config_hash(const RunConfig& config);

} // namespace rydbohm::io
