#include "rydbohm/io/config.hpp"

#include "rydbohm/errors.hpp"
#include "rydbohm/io/format.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace rydbohm::io {

namespace {

struct Entry {
    std::function<void(const std::string&)> set;
    std::function<std::string()> get;
};

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> parts;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, sep)) {
        if (item.find_first_not_of(" \t") != std::string::npos) {
            parts.push_back(item);
        }
    }
    return parts;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) {
        return {};
    }
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

Entry number(double& field, const std::string& key) {
    return {[&field, key](const std::string& v) { field = parse_number(v, key); },
            [&field] { return format_number(field); }};
}

Entry optional_number(std::optional<double>& field, const std::string& key) {
    return {[&field, key](const std::string& v) {
                if (trim(v) == "auto") {
                    field.reset();
                } else {
                    field = parse_number(v, key);
                }
            },
            [&field] { return field ? format_number(*field) : std::string("auto"); }};
}

Entry integer(int& field, const std::string& key) {
    return {[&field, key](const std::string& v) { field = static_cast<int>(parse_integer(v, key)); },
            [&field] { return std::to_string(field); }};
}

Entry seed(std::uint64_t& field, const std::string& key) {
    return {[&field, key](const std::string& v) {
                const long long s = parse_integer(v, key);
                if (s < 0) {
                    throw InvalidInput(key + ": seed must be non-negative");
                }
                field = static_cast<std::uint64_t>(s);
            },
            [&field] { return std::to_string(field); }};
}

Entry text(std::string& field) {
    return {[&field](const std::string& v) { field = trim(v); }, [&field] { return field; }};
}

Entry number_list(std::vector<double>& field, const std::string& key) {
    return {[&field, key](const std::string& v) {
                field.clear();
                for (const auto& p : split(v, ',')) {
                    field.push_back(parse_number(p, key));
                }
            },
            [&field] {
                std::string out;
                for (std::size_t i = 0; i < field.size(); ++i) {
                    out += (i ? "," : "") + format_number(field[i]);
                }
                return out;
            }};
}

Entry pair_list(std::vector<std::pair<double, double>>& field, const std::string& key) {
    return {[&field, key](const std::string& v) {
                field.clear();
                for (const auto& p : split(v, ';')) {
                    const auto xy = split(p, ':');
                    if (xy.size() != 2) {
                        throw InvalidInput(key + ": expected 'a:b' pairs separated by ';', got '" + p + "'");
                    }
                    field.emplace_back(parse_number(xy[0], key), parse_number(xy[1], key));
                }
            },
            [&field] {
                std::string out;
                for (std::size_t i = 0; i < field.size(); ++i) {
                    out += (i ? ";" : "") + format_number(field[i].first) + ":" + format_number(field[i].second);
                }
                return out;
            }};
}

std::map<std::string, Entry> registry(RunConfig& c) {
    std::map<std::string, Entry> r;
    r["field.tesla"] = optional_number(c.field_tesla, "field.tesla");
    r["field.gamma"] = optional_number(c.field_gamma, "field.gamma");
    r["field.epsilon"] = optional_number(c.field_epsilon, "field.epsilon");
    r["target.n_eff"] = number(c.n_eff, "target.n_eff");
    r["window.n_low"] = number(c.window_n_low, "window.n_low");
    r["window.n_high"] = number(c.window_n_high, "window.n_high");
    r["basis.n_max"] = integer(c.basis_n_max, "basis.n_max");
    r["basis.b"] = optional_number(c.basis_b, "basis.b");
    r["solver.method"] = text(c.solver_method);
    r["solver.seed"] = seed(c.solver_seed, "solver.seed");
    r["wavepacket.r0_au"] = number(c.wavepacket_r0_au, "wavepacket.r0_au");
    r["wavepacket.delta_r_au2"] = number(c.wavepacket_delta_r_au2, "wavepacket.delta_r_au2");
    r["wavepacket.bump_angles"] = number_list(c.wavepacket_bump_angles, "wavepacket.bump_angles");
    r["wavepacket.sigma_theta"] = number(c.wavepacket_sigma_theta, "wavepacket.sigma_theta");
    r["time.t_max_ps"] = optional_number(c.time_t_max_ps, "time.t_max_ps");
    r["time.samples"] = integer(c.time_samples, "time.samples");
    r["recurrence.apodization"] = text(c.recurrence_apodization);
    r["peaks.min_prominence"] = number(c.peaks_min_prominence, "peaks.min_prominence");
    r["probe.points"] = pair_list(c.probe_points, "probe.points");
    r["probe.orbit_fraction"] = number(c.probe_orbit_fraction, "probe.orbit_fraction");
    r["probe.power"] = integer(c.probe_power, "probe.power");
    r["orbits.r0_au"] = number(c.orbits_r0_au, "orbits.r0_au");
    r["orbits.theta_points"] = integer(c.orbits_theta_points, "orbits.theta_points");
    r["orbits.t_max_scaled"] = number(c.orbits_t_max_scaled, "orbits.t_max_scaled");
    r["bohm.starts"] = pair_list(c.bohm_starts, "bohm.starts");
    r["bohm.t_max_ps"] = optional_number(c.bohm_t_max_ps, "bohm.t_max_ps");
    r["bohm.samples"] = integer(c.bohm_samples, "bohm.samples");
    r["bohm.rtol"] = number(c.bohm_rtol, "bohm.rtol");
    r["bohm.atol_au"] = number(c.bohm_atol_au, "bohm.atol_au");
    r["bohm.node_fraction"] = number(c.bohm_node_fraction, "bohm.node_fraction");
    r["bohm.hard_fraction"] = number(c.bohm_hard_fraction, "bohm.hard_fraction");
    r["ensemble.n"] = integer(c.ensemble_n, "ensemble.n");
    r["ensemble.seed"] = seed(c.ensemble_seed, "ensemble.seed");
    r["ensemble.checkpoints"] = integer(c.ensemble_checkpoints, "ensemble.checkpoints");
    r["ensemble.grid"] = integer(c.ensemble_grid, "ensemble.grid");
    r["ensemble.rtol"] = number(c.ensemble_rtol, "ensemble.rtol");
    r["ensemble.atol_au"] = number(c.ensemble_atol_au, "ensemble.atol_au");
    return r;
}

void require(bool ok, const std::string& message) {
    if (!ok) {
        throw InvalidInput("config: " + message);
    }
}

} // namespace

void RunConfig::validate() const {
    const int fields = (field_tesla ? 1 : 0) + (field_gamma ? 1 : 0) + (field_epsilon ? 1 : 0);
    require(fields == 1, "set exactly one of field.tesla, field.gamma, field.epsilon");
    require(!field_tesla || *field_tesla > 0.0, "field.tesla must be positive");
    require(!field_gamma || *field_gamma >= 0.0, "field.gamma must be non-negative");
    require(!field_epsilon || *field_epsilon < 0.0, "field.epsilon must be negative (bound motion)");
    require(n_eff > 0.0, "target.n_eff must be positive");
    require(window_n_low > 0.0 && window_n_low < window_n_high, "need 0 < window.n_low < window.n_high");
    require(basis_n_max >= 2 && basis_n_max % 2 == 0, "basis.n_max must be an even number >= 2");
    require(!basis_b || *basis_b > 0.0, "basis.b must be positive");
    require(solver_method == "automatic" || solver_method == "dense" || solver_method == "shift-invert",
            "solver.method must be automatic, dense or shift-invert");
    require(wavepacket_r0_au > 0.0 && wavepacket_delta_r_au2 > 0.0 && wavepacket_sigma_theta > 0.0,
            "wavepacket r0, delta_r and sigma_theta must be positive");
    require(!wavepacket_bump_angles.empty(), "wavepacket.bump_angles must not be empty");
    require(!time_t_max_ps || *time_t_max_ps > 0.0, "time.t_max_ps must be positive");
    require(time_samples >= 2, "time.samples must be at least 2");
    require(recurrence_apodization == "rectangular" || recurrence_apodization == "hann" ||
                recurrence_apodization == "gaussian",
            "recurrence.apodization must be rectangular, hann or gaussian");
    require(peaks_min_prominence >= 0.0, "peaks.min_prominence must be non-negative");
    require(probe_orbit_fraction > 0.0 && probe_orbit_fraction < 1.0, "probe.orbit_fraction must lie in (0, 1)");
    require(probe_power == 2 || probe_power == 4, "probe.power must be 2 or 4");
    for (const auto& [rho, z] : probe_points) {
        require(rho >= 0.0, "probe.points need rho >= 0");
    }
    require(orbits_r0_au > 0.0 && orbits_theta_points >= 3 && orbits_t_max_scaled > 0.0,
            "orbits settings must be positive (theta_points >= 3)");
    for (const auto& [r, theta] : bohm_starts) {
        require(r > 0.0 && theta >= 0.0 && theta <= 1.5707963267948966, "bohm.starts need r > 0, theta in [0, pi/2]");
    }
    require(!bohm_t_max_ps || *bohm_t_max_ps > 0.0, "bohm.t_max_ps must be positive");
    require(bohm_samples >= 2, "bohm.samples must be at least 2");
    require(bohm_rtol > 0.0 && bohm_atol_au > 0.0 && ensemble_rtol > 0.0 && ensemble_atol_au > 0.0,
            "tolerances must be positive");
    require(bohm_hard_fraction > 0.0 && bohm_hard_fraction < bohm_node_fraction,
            "need 0 < bohm.hard_fraction < bohm.node_fraction");
    require(ensemble_n >= 1, "ensemble.n must be at least 1");
    require(ensemble_checkpoints >= 1, "ensemble.checkpoints must be at least 1");
    require(ensemble_grid >= 2, "ensemble.grid must be at least 2");
}

RunConfig parse_config(const std::string& text) {
    RunConfig config;
    auto reg = registry(config);
    std::istringstream in(text);
    std::string line;
    int number = 0;
    while (std::getline(in, line)) {
        ++number;
        const std::string t = trim(line);
        if (t.empty() || t.front() == '#') {
            continue;
        }
        const auto eq = t.find('=');
        if (eq == std::string::npos) {
            throw InvalidInput("config line " + std::to_string(number) + ": expected 'key = value'");
        }
        const std::string key = trim(t.substr(0, eq));
        const auto it = reg.find(key);
        if (it == reg.end()) {
            throw InvalidInput("config line " + std::to_string(number) + ": unknown key '" + key + "'");
        }
        it->second.set(t.substr(eq + 1));
    }
    config.validate();
    return config;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw InvalidInput("cannot open config file '" + path + "'");
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

std::string canonical_text(const RunConfig& config) {
    RunConfig copy = config;
    std::string out;
    for (const auto& [key, entry] : registry(copy)) {
        out += key + " = " + entry.get() + "\n";
    }
    return out;
}

std::string config_hash(const RunConfig& config) { return sha256_hex(canonical_text(config)).substr(0, 16); }

} // namespace rydbohm::io
