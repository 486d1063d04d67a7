#pragma once

// Shared desk-scale problem: epsilon = -0.3 at n_eff = 24, window 22 <= n <= 26.

#include "rydbohm/spectrum.hpp"
#include "rydbohm/units.hpp"
#include "rydbohm/wavepacket.hpp"

#include <cmath>
#include <map>
#include <memory>

namespace fixtures {

inline constexpr double desk_epsilon = -0.3;
inline constexpr double desk_n_eff = 24.0;

inline double desk_gamma() { return rydbohm::units::gamma_for_scaled_energy(desk_epsilon, desk_n_eff); }

inline rydbohm::quantum::EnergyWindow desk_window() {
    return {rydbohm::units::energy_from_n_eff(22.0), rydbohm::units::energy_from_n_eff(26.0)};
}

inline rydbohm::quantum::BasisSpec desk_basis(int n_max = 96) { return {n_max, std::sqrt(desk_n_eff)}; }

inline std::shared_ptr<const rydbohm::quantum::Spectrum> desk_spectrum(int n_max = 96) {
    static std::map<int, std::shared_ptr<const rydbohm::quantum::Spectrum>> cache;
    auto& slot = cache[n_max];
    if (!slot) {
        const auto ops = rydbohm::quantum::assemble_operators(desk_basis(n_max), desk_gamma());
        slot = std::make_shared<const rydbohm::quantum::Spectrum>(
            rydbohm::quantum::solve_window(ops, desk_window()));
    }
    return slot;
}

inline const rydbohm::wavepacket::Wavepacket& desk_wavepacket() {
    static const auto wp = rydbohm::wavepacket::build_initial({}, desk_spectrum());
    return wp;
}

// One eigenstate of the desk spectrum as a stationary wavepacket.
inline rydbohm::wavepacket::Wavepacket desk_eigenstate(int k) {
    auto single = std::make_shared<const rydbohm::quantum::Spectrum>(desk_spectrum()->subset(k, 1));
    return rydbohm::wavepacket::Wavepacket(single, Eigen::VectorXcd::Ones(1));
}

inline double desk_cyclotron_ps() { return rydbohm::units::cyclotron_period_ps(desk_gamma()); }

} // namespace fixtures
