#include "rydbohm/units.hpp"

#include "rydbohm/errors.hpp"

#include <cmath>
#include <string>

namespace rydbohm::units {

namespace {

void require_positive_gamma(double gamma, const char* where) {
    if (!(gamma > 0.0) || !std::isfinite(gamma)) {
        throw InvalidInput(std::string(where) + ": gamma must be positive and finite, got " +
                           std::to_string(gamma));
    }
}

} // namespace

double gamma_from_tesla(double tesla) {
    if (!(tesla > 0.0) || !std::isfinite(tesla)) {
        throw InvalidInput("gamma_from_tesla: field must be positive, got " + std::to_string(tesla));
    }
    return tesla / UnitBundle::au_field_tesla;
}

double tesla_from_gamma(double gamma) {
    require_positive_gamma(gamma, "tesla_from_gamma");
    return gamma * UnitBundle::au_field_tesla;
}

double au_time_to_ps(double t_au) { return t_au * UnitBundle::au_time_ps; }

double ps_to_au_time(double t_ps) { return t_ps / UnitBundle::au_time_ps; }

double scaled_energy(double energy_au, double gamma) {
    require_positive_gamma(gamma, "scaled_energy");
    return energy_au * std::pow(gamma, -2.0 / 3.0);
}

double gamma_for_scaled_energy(double epsilon, double n_eff) {
    if (!(epsilon < 0.0)) {
        throw InvalidInput("gamma_for_scaled_energy: bound states need epsilon < 0");
    }
    if (!(n_eff > 0.0)) {
        throw InvalidInput("gamma_for_scaled_energy: n_eff must be positive");
    }
    const double energy = energy_from_n_eff(n_eff);
    return std::pow(energy / epsilon, 1.5);
}

double energy_from_n_eff(double n_eff) {
    if (!(n_eff > 0.0)) {
        throw InvalidInput("energy_from_n_eff: n_eff must be positive");
    }
    return -0.5 / (n_eff * n_eff);
}

double n_eff_from_energy(double energy_au) {
    if (!(energy_au < 0.0)) {
        throw InvalidInput("n_eff_from_energy: energy must be negative");
    }
    return 1.0 / std::sqrt(-2.0 * energy_au);
}

double cyclotron_period_au(double gamma) {
    require_positive_gamma(gamma, "cyclotron_period");
    return 2.0 * pi / gamma;
}

double cyclotron_period_ps(double gamma) { return au_time_to_ps(cyclotron_period_au(gamma)); }

FieldConfig FieldConfig::from_tesla_and_n_eff(double tesla, double n_eff) {
    return from_gamma_and_n_eff(gamma_from_tesla(tesla), n_eff);
}

FieldConfig FieldConfig::from_gamma_and_n_eff(double gamma, double n_eff) {
    require_positive_gamma(gamma, "FieldConfig");
    FieldConfig cfg;
    cfg.gamma = gamma;
    cfg.B_tesla = gamma * UnitBundle::au_field_tesla;
    cfg.n_eff = n_eff;
    cfg.E_au = energy_from_n_eff(n_eff);
    cfg.epsilon = scaled_energy(cfg.E_au, gamma);
    return cfg;
}

FieldConfig FieldConfig::from_epsilon_and_n_eff(double epsilon, double n_eff) {
    return from_gamma_and_n_eff(gamma_for_scaled_energy(epsilon, n_eff), n_eff);
}

PhasePoint scale_phase_point(const PhasePoint& point, double gamma) {
    require_positive_gamma(gamma, "scale_phase_point");
    const double rs = std::cbrt(gamma * gamma);
    const double ps = 1.0 / std::cbrt(gamma);
    PhasePoint out;
    for (int i = 0; i < 2; ++i) {
        out.r[i] = point.r[i] * rs;
        out.p[i] = point.p[i] * ps;
    }
    out.t = point.t * gamma;
    return out;
}

PhasePoint unscale_phase_point(const PhasePoint& scaled, double gamma) {
    require_positive_gamma(gamma, "unscale_phase_point");
    const double rs = std::cbrt(gamma * gamma);
    const double ps = 1.0 / std::cbrt(gamma);
    PhasePoint out;
    for (int i = 0; i < 2; ++i) {
        out.r[i] = scaled.r[i] / rs;
        out.p[i] = scaled.p[i] / ps;
    }
    out.t = scaled.t / gamma;
    return out;
}

} // namespace rydbohm::units
