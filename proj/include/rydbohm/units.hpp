#pragma once

#include <array>

namespace rydbohm::units {

// Atomic-unit conversion constants. Everything inside the library is in
// atomic units; tesla and picoseconds appear only at I/O boundaries.
struct UnitBundle {
    static constexpr double au_time_seconds = 2.418884e-17;
    static constexpr double au_field_tesla = 2.350518e5;
    static constexpr double au_time_ps = au_time_seconds * 1e12;
};

inline constexpr double pi = 3.14159265358979323846;

double gamma_from_tesla(double tesla);
double tesla_from_gamma(double gamma);

double au_time_to_ps(double t_au);
double ps_to_au_time(double t_ps);

// epsilon = E * gamma^(-2/3)
double scaled_energy(double energy_au, double gamma);

// Field strength giving scaled energy epsilon at E = -1/(2 n_eff^2).
double gamma_for_scaled_energy(double epsilon, double n_eff);

double energy_from_n_eff(double n_eff);
double n_eff_from_energy(double energy_au);

// Cyclotron period 2 pi / gamma, in picoseconds.
double cyclotron_period_ps(double gamma);
double cyclotron_period_au(double gamma);

/// The (E, B, epsilon) triple describing one physical configuration.
struct FieldConfig {
    double B_tesla = 0.0;
    double gamma = 0.0;
    double epsilon = 0.0;
    double E_au = 0.0;
    double n_eff = 0.0;

    static FieldConfig from_tesla_and_n_eff(double tesla, double n_eff);
    static FieldConfig from_gamma_and_n_eff(double gamma, double n_eff);
    static FieldConfig from_epsilon_and_n_eff(double epsilon, double n_eff);
};

/// Point of the meridional (rho, z) plane with its conjugate momenta and time.
struct PhasePoint {
    std::array<double, 2> r{};
    std::array<double, 2> p{};
    double t = 0.0;
};

// r~ = gamma^(2/3) r, p~ = gamma^(-1/3) p, t~ = gamma t.
PhasePoint scale_phase_point(const PhasePoint& point, double gamma);
PhasePoint unscale_phase_point(const PhasePoint& scaled, double gamma);

} // namespace rydbohm::units
