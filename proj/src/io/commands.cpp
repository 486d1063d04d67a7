#include "rydbohm/io/commands.hpp"

#include "rydbohm/errors.hpp"
#include "rydbohm/io/format.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>

namespace rydbohm::io {

namespace fs = std::filesystem;
using classical::ClosedOrbit;
using wavepacket::Wavepacket;

ResolvedRun resolve(const RunConfig& config) {
    config.validate();
    ResolvedRun r;
    if (config.field_tesla) {
        r.field = units::FieldConfig::from_tesla_and_n_eff(*config.field_tesla, config.n_eff);
    } else if (config.field_gamma && *config.field_gamma == 0.0) {
        // field-free: only the spectrum stage is meaningful
        r.field.E_au = units::energy_from_n_eff(config.n_eff);
        r.field.n_eff = config.n_eff;
        r.field.epsilon = -std::numeric_limits<double>::infinity();
    } else if (config.field_gamma) {
        r.field = units::FieldConfig::from_gamma_and_n_eff(*config.field_gamma, config.n_eff);
    } else {
        r.field = units::FieldConfig::from_epsilon_and_n_eff(*config.field_epsilon, config.n_eff);
    }
    r.window = {units::energy_from_n_eff(config.window_n_low), units::energy_from_n_eff(config.window_n_high)};
    r.basis = quantum::BasisSpec{config.basis_n_max, config.basis_b.value_or(std::sqrt(config.n_eff))};
    r.basis.validate();
    r.cyclotron_ps = r.field.gamma > 0.0 ? units::cyclotron_period_ps(r.field.gamma)
                                         : std::numeric_limits<double>::infinity();
    return r;
}

RunContext::RunContext(RunConfig cfg, std::string out, std::string cache, bool with_plots, std::ostream& log_stream,
                       const std::string& command)
    : config(std::move(cfg)), run(resolve(config)), hash(config_hash(config)), out_dir(std::move(out)),
      cache_dir(std::move(cache)), plots(with_plots), log(log_stream), manifest(hash, command) {
    fs::create_directories(out_dir);
    if (!cache_dir.empty()) {
        fs::create_directories(cache_dir);
    }
}

std::string RunContext::path(const std::string& file) const { return (fs::path(out_dir) / file).string(); }

void RunContext::stage(const std::string& name, double seconds) {
    manifest.add_timing(name, seconds);
    log << name << ": " << format_number(std::round(seconds * 1000.0) / 1000.0) << " s\n";
}

const ClosedOrbit* match_orbit(const classical::OrbitSearchResult& orbits, double gamma, double t_ps,
                               double tolerance) {
    const ClosedOrbit* best = nullptr;
    double best_offset = tolerance;
    for (const auto& o : orbits.orbits) {
        const double offset = std::abs(classical::physical_period_ps(o, gamma) - t_ps) / t_ps;
        if (offset <= best_offset) {
            best = &o;
            best_offset = offset;
        }
    }
    return best;
}

namespace {

void require_field(const RunContext& ctx, const std::string& stage) {
    if (!(ctx.run.field.gamma > 0.0)) {
        throw InvalidInput(stage + " needs a non-zero magnetic field");
    }
}

void ensure_orbits(RunContext& ctx) {
    if (ctx.orbits) {
        return;
    }
    require_field(ctx, "closed-orbit search");
    const Stopwatch sw;
    classical::OrbitSearchOptions opts;
    opts.theta_points = ctx.config.orbits_theta_points;
    opts.t_max = ctx.config.orbits_t_max_scaled;
    const double r0 = ctx.config.orbits_r0_au * std::cbrt(ctx.run.field.gamma * ctx.run.field.gamma);
    ctx.orbits = classical::find_closed_orbits(ctx.run.field.epsilon, r0, opts);
    ctx.stage("closed-orbits", sw.seconds());
}

quantum::SolveOptions solve_options(const RunConfig& c) {
    quantum::SolveOptions o;
    o.seed = c.solver_seed;
    if (c.solver_method == "dense") {
        o.method = quantum::SolveOptions::Method::dense;
    } else if (c.solver_method == "shift-invert") {
        o.method = quantum::SolveOptions::Method::shift_invert;
    }
    return o;
}

std::string cache_file(const RunContext& ctx) {
    const auto key = quantum::spectrum_cache_key(ctx.run.field.gamma, ctx.run.basis, ctx.run.window);
    return (fs::path(ctx.cache_dir) / ("spectrum-" + sha256_hex(key).substr(0, 16) + ".bin")).string();
}

// Spectrum from memory or the cache; nullptr if neither has it.
std::shared_ptr<const quantum::Spectrum> cached_spectrum(RunContext& ctx) {
    if (ctx.spectrum) {
        return ctx.spectrum;
    }
    if (ctx.cache_dir.empty()) {
        return nullptr;
    }
    const std::string file = cache_file(ctx);
    if (!fs::exists(file)) {
        return nullptr;
    }
    const Stopwatch sw;
    ctx.spectrum = std::make_shared<quantum::Spectrum>(quantum::load_spectrum(file));
    ctx.log << "spectrum: cache hit " << file << '\n';
    ctx.stage("spectrum-cache-load", sw.seconds());
    return ctx.spectrum;
}

std::shared_ptr<const quantum::Spectrum> require_spectrum(RunContext& ctx) {
    auto s = cached_spectrum(ctx);
    if (!s) {
        throw InvalidInput("no spectrum for this configuration" +
                           (ctx.cache_dir.empty() ? std::string(" (cache disabled)")
                                                  : " in cache directory '" + ctx.cache_dir + "'") +
                           "; run the 'spectrum' subcommand first with the same --config and --cache, or use 'all'");
    }
    return s;
}

// Expansion coefficients are cached per (spectrum, wavepacket settings) as JSON.
std::string wavepacket_cache_file(const RunContext& ctx, const wavepacket::WavepacketSpec& spec) {
    std::ostringstream key;
    key << quantum::spectrum_cache_key(ctx.run.field.gamma, ctx.run.basis, ctx.run.window)
        << "|r0=" << format_number(spec.r0) << "|delta_r=" << format_number(spec.delta_r)
        << "|sigma_theta=" << format_number(spec.sigma_theta) << "|bumps=";
    for (double a : spec.bump_angles) {
        key << format_number(a) << ',';
    }
    return (fs::path(ctx.cache_dir) / ("wavepacket-" + sha256_hex(key.str()).substr(0, 16) + ".json")).string();
}

std::shared_ptr<const Wavepacket> load_wavepacket(const std::string& file,
                                                  std::shared_ptr<const quantum::Spectrum> spectrum) {
    std::ifstream in(file);
    const auto j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded() || !j.contains("alpha_re") || !j.contains("alpha_im") ||
        j["alpha_re"].size() != static_cast<std::size_t>(spectrum->size()) ||
        j["alpha_im"].size() != j["alpha_re"].size()) {
        return nullptr;
    }
    Eigen::VectorXcd alpha(spectrum->size());
    for (int k = 0; k < spectrum->size(); ++k) {
        alpha[k] = {j["alpha_re"][k].get<double>(), j["alpha_im"][k].get<double>()};
    }
    auto wp = std::make_shared<Wavepacket>(std::move(spectrum), alpha);
    wp->set_target_overlap(j.value("target_overlap", 1.0));
    return wp;
}

void save_wavepacket(const Wavepacket& wp, const std::string& file) {
    nlohmann::json j;
    j["alpha_re"] = nlohmann::json::array();
    j["alpha_im"] = nlohmann::json::array();
    for (int k = 0; k < wp.size(); ++k) {
        j["alpha_re"].push_back(wp.alpha()[k].real());
        j["alpha_im"].push_back(wp.alpha()[k].imag());
    }
    j["target_overlap"] = wp.target_overlap();
    std::ofstream(file) << j.dump() << '\n';
}

std::shared_ptr<const Wavepacket> make_wavepacket(RunContext& ctx) {
    require_field(ctx, "wavepacket evolution");
    const auto spectrum = require_spectrum(ctx);
    wavepacket::WavepacketSpec spec;
    spec.r0 = ctx.config.wavepacket_r0_au;
    spec.delta_r = ctx.config.wavepacket_delta_r_au2;
    spec.bump_angles = ctx.config.wavepacket_bump_angles;
    spec.sigma_theta = ctx.config.wavepacket_sigma_theta;
    spec.window = ctx.run.window;
    const Stopwatch sw;
    const std::string file = ctx.cache_dir.empty() ? std::string() : wavepacket_cache_file(ctx, spec);
    if (!file.empty() && fs::exists(file)) {
        if (auto wp = load_wavepacket(file, spectrum)) {
            ctx.log << "wavepacket: cache hit " << file << '\n';
            ctx.stage("wavepacket-cache-load", sw.seconds());
            return wp;
        }
        ctx.log << "wavepacket: ignoring unreadable cache file " << file << '\n';
    }
    auto wp = std::make_shared<Wavepacket>(wavepacket::build_initial(spec, spectrum));
    if (!file.empty() && wp->size() == spectrum->size()) {
        save_wavepacket(*wp, file);
    }
    ctx.stage("wavepacket", sw.seconds());
    return wp;
}

double t_max_ps(const RunContext& ctx) { return ctx.config.time_t_max_ps.value_or(4.0 * ctx.run.cyclotron_ps); }

// First prominent |C|^2 peak, if any.
std::optional<wavepacket::Peak> first_recurrence(const RunContext& ctx, const Wavepacket& wp) {
    const auto times = wavepacket::time_grid_ps(t_max_ps(ctx), ctx.config.time_samples);
    const auto c = wavepacket::autocorrelation(wp, times);
    const auto peaks = wavepacket::find_peaks(times, c.magnitudes_squared(), ctx.config.peaks_min_prominence);
    if (peaks.empty()) {
        return std::nullopt;
    }
    return peaks.front();
}

void write_time_series(RunContext& ctx, const std::string& file, const std::string& kind,
                       const std::vector<double>& times, const std::vector<double>& values,
                       const std::string& value_column) {
    CsvWriter csv(ctx.path(file), kind, ctx.hash, {"t_ps", "t_tc", value_column});
    for (std::size_t i = 0; i < times.size(); ++i) {
        csv << times[i] << times[i] / ctx.run.cyclotron_ps << values[i];
        csv.end_row();
    }
    csv.close();
    ctx.manifest.add_artifact(csv.path());
}

std::vector<double> in_cyclotron_periods(const RunContext& ctx, std::vector<double> t) {
    for (double& x : t) {
        x /= ctx.run.cyclotron_ps;
    }
    return t;
}

std::vector<Marker> orbit_markers(const RunContext& ctx) {
    std::vector<Marker> m;
    for (const auto& o : ctx.orbits->orbits) {
        if (o.repetition == 1) {
            m.push_back({classical::physical_period_ps(o, ctx.run.field.gamma) / ctx.run.cyclotron_ps, o.label});
        }
    }
    return m;
}

void save_plot(RunContext& ctx, const Plot& plot, const std::string& file) {
    if (!ctx.plots) {
        return;
    }
    write_svg(plot, ctx.path(file));
    ctx.manifest.add_artifact(ctx.path(file));
}

} // namespace

void cmd_closed_orbits(RunContext& ctx) {
    ensure_orbits(ctx);
    const double gamma = ctx.run.field.gamma;
    const double length = 1.0 / std::cbrt(gamma * gamma);  // scaled -> au
    CsvWriter csv(ctx.path("orbits.csv"), "closed-orbits", ctx.hash,
                  {"label", "theta_launch_rad", "repetition", "return_index", "scaled_period", "period_ps",
                   "period_tc", "return_radius_scaled"});
    for (const auto& o : ctx.orbits->orbits) {
        const double t_ps = classical::physical_period_ps(o, gamma);
        csv << o.label << o.theta_launch << o.repetition << o.return_index << o.scaled_period << t_ps
            << t_ps / ctx.run.cyclotron_ps << o.return_radius;
        csv.end_row();
    }
    csv.close();
    ctx.manifest.add_artifact(csv.path());

    CsvWriter traces(ctx.path("orbit_traces.csv"), "closed-orbit-traces", ctx.hash,
                     {"label", "t_scaled", "t_ps", "rho_au", "z_au"});
    Plot plot{"Closed orbits, epsilon = " + format_number(ctx.run.field.epsilon), "rho (au)", "z (au)", {}, {}, true};
    for (const auto& o : ctx.orbits->orbits) {
        if (o.repetition != 1) {
            continue;
        }
        Series s{o.label, {}, {}};
        for (const auto& p : o.trace) {
            traces << o.label << p.t << units::au_time_to_ps(p.t / gamma) << p.rho * length << p.z * length;
            traces.end_row();
            s.x.push_back(p.rho * length);
            s.y.push_back(p.z * length);
        }
        plot.series.push_back(std::move(s));
    }
    traces.close();
    ctx.manifest.add_artifact(traces.path());
    save_plot(ctx, plot, "orbits.svg");

    if (ctx.orbits->orbits.empty()) {
        ctx.manifest.add_note("closed-orbits: no closed orbits found within the scaled time horizon");
        ctx.log << "closed-orbits: none found\n";
    }
    for (const auto& f : ctx.orbits->failures) {
        ctx.manifest.add_note("closed-orbits: " + f);
    }
    ctx.log << "closed-orbits: " << ctx.orbits->orbits.size() << " orbits at epsilon "
            << format_number(ctx.run.field.epsilon) << '\n';
}

void cmd_spectrum(RunContext& ctx) {
    std::shared_ptr<const quantum::Spectrum> spectrum = cached_spectrum(ctx);
    if (!spectrum) {
        const Stopwatch sw;
        const auto ops = quantum::assemble_operators(ctx.run.basis, ctx.run.field.gamma);
        auto solved = std::make_shared<quantum::Spectrum>(
            quantum::solve_window(ops, ctx.run.window, solve_options(ctx.config)));
        const auto diag = quantum::diagnose(ops, *solved);
        ctx.stage("spectrum-solve", sw.seconds());
        std::ostringstream note;
        note << "spectrum: " << solved->size() << " states, dimension " << ctx.run.basis.dimension()
             << ", max residual " << diag.max_residual << ", max orthonormality error "
             << diag.max_orthonormality_error;
        ctx.manifest.add_note(note.str());
        ctx.log << note.str() << '\n';
        if (!ctx.cache_dir.empty()) {
            quantum::save_spectrum(*solved, cache_file(ctx));
            ctx.log << "spectrum: cached in " << cache_file(ctx) << '\n';
        }
        spectrum = solved;
        ctx.spectrum = spectrum;
    }
    CsvWriter csv(ctx.path("spectrum.csv"), "spectrum", ctx.hash,
                  {"index", "energy_au", "n_eff", "scaled_energy"});
    for (int k = 0; k < spectrum->size(); ++k) {
        const double e = spectrum->energies[k];
        csv << k << e << units::n_eff_from_energy(e)
            << (spectrum->gamma > 0.0 ? units::scaled_energy(e, spectrum->gamma) : ctx.run.field.epsilon);
        csv.end_row();
    }
    csv.close();
    ctx.manifest.add_artifact(csv.path());
    if (spectrum->size() == 0) {
        ctx.manifest.add_note("spectrum: no eigenstates in the window");
    }
}

void cmd_evolve(RunContext& ctx) {
    const auto wp = make_wavepacket(ctx);
    ensure_orbits(ctx);
    const double gamma = ctx.run.field.gamma;
    const double tc = ctx.run.cyclotron_ps;
    const Stopwatch sw;

    {
        CsvWriter csv(ctx.path("wavepacket.csv"), "wavepacket", ctx.hash,
                      {"index", "energy_au", "n_eff", "weight", "alpha_re", "alpha_im"});
        for (int k = 0; k < wp->size(); ++k) {
            const double e = wp->spectrum().energies[k];
            csv << k << e << units::n_eff_from_energy(e) << std::norm(wp->alpha()[k]) << wp->alpha()[k].real()
                << wp->alpha()[k].imag();
            csv.end_row();
        }
        csv.close();
        ctx.manifest.add_artifact(csv.path());
        std::ostringstream note;
        note << "wavepacket: " << wp->size() << " states, overlap with target " << wp->target_overlap()
             << ", mean scaled energy " << units::scaled_energy(wp->mean_energy(), gamma);
        ctx.manifest.add_note(note.str());
        ctx.log << note.str() << '\n';
    }

    const auto times = wavepacket::time_grid_ps(t_max_ps(ctx), ctx.config.time_samples);
    const auto c = wavepacket::autocorrelation(*wp, times);
    const auto c2 = c.magnitudes_squared();
    {
        CsvWriter csv(ctx.path("autocorrelation.csv"), wavepacket::kind_name(c.kind), ctx.hash,
                      {"t_ps", "t_tc", "c_re", "c_im", "c_abs2"});
        for (std::size_t i = 0; i < times.size(); ++i) {
            csv << times[i] << times[i] / tc << c.values[i].real() << c.values[i].imag() << c2[i];
            csv.end_row();
        }
        csv.close();
        ctx.manifest.add_artifact(csv.path());
    }
    const auto signal = wavepacket::recurrence_time_signal(
        *wp, times, ctx.run.window, wavepacket::parse_apodization(ctx.config.recurrence_apodization));
    write_time_series(ctx, "recurrence_signal.csv", wavepacket::kind_name(signal.kind), times, signal.real_values(),
                      "magnitude");

    const auto c_peaks = wavepacket::find_peaks(times, c2, ctx.config.peaks_min_prominence);
    const auto s_peaks = wavepacket::find_peaks(times, signal.real_values(), ctx.config.peaks_min_prominence);
    {
        CsvWriter csv(ctx.path("peaks.csv"), "recurrence-peaks", ctx.hash,
                      {"series", "time_ps", "time_tc", "value", "prominence", "orbit_label", "orbit_period_ps",
                       "relative_offset"});
        auto emit = [&](const std::string& series, const std::vector<wavepacket::Peak>& peaks) {
            for (const auto& p : peaks) {
                const ClosedOrbit* o = match_orbit(*ctx.orbits, gamma, p.time_ps);
                const double period = o ? classical::physical_period_ps(*o, gamma) : std::nan("");
                csv << series << p.time_ps << p.time_ps / tc << p.value << p.prominence
                    << (o ? o->label : std::string()) << period << (o ? (p.time_ps - period) / period : std::nan(""));
                csv.end_row();
            }
        };
        emit("autocorrelation_abs2", c_peaks);
        emit("recurrence_signal", s_peaks);
        csv.close();
        ctx.manifest.add_artifact(csv.path());
    }

    // Probes: configured points plus point P on the orbit of the first recurrence.
    struct Probe {
        double rho;
        double z;
        std::string source;
        double outbound_ps;
        double next_passage_ps;
    };
    std::vector<Probe> probes;
    for (const auto& [rho, z] : ctx.config.probe_points) {
        probes.push_back({rho, z, "config", std::nan(""), std::nan("")});
    }
    const ClosedOrbit* orbit_c = c_peaks.empty() ? nullptr : match_orbit(*ctx.orbits, gamma, c_peaks.front().time_ps);
    if (orbit_c != nullptr && !orbit_c->trace.empty()) {
        const double length = 1.0 / std::cbrt(gamma * gamma);
        const double t_target = ctx.config.probe_orbit_fraction * orbit_c->scaled_period;
        const auto it = std::min_element(orbit_c->trace.begin(), orbit_c->trace.end(),
                                         [&](const auto& a, const auto& b) {
                                             return std::abs(a.t - t_target) < std::abs(b.t - t_target);
                                         });
        const double out_ps = units::au_time_to_ps(it->t / gamma);
        probes.push_back({it->rho * length, it->z * length, "orbit " + orbit_c->label, out_ps,
                          out_ps + classical::physical_period_ps(*orbit_c, gamma)});
    } else {
        ctx.manifest.add_note("evolve: no closed orbit matches the first recurrence; orbit probe skipped");
    }
    Plot probe_plot{"Density probes", "t / T_c", "|psi|^" + std::to_string(ctx.config.probe_power), {}, {}, false};
    {
        CsvWriter csv(ctx.path("probes.csv"), "probe-points", ctx.hash,
                      {"probe", "rho_au", "z_au", "source", "outbound_ps", "next_passage_ps"});
        for (std::size_t k = 0; k < probes.size(); ++k) {
            const auto& p = probes[k];
            csv << static_cast<int>(k) << p.rho << p.z << p.source << p.outbound_ps << p.next_passage_ps;
            csv.end_row();
            const auto series = wavepacket::density_probe(*wp, p.rho, p.z, times, ctx.config.probe_power);
            write_time_series(ctx, "probe_" + std::to_string(k) + ".csv", wavepacket::kind_name(series.kind), times,
                              series.real_values(), "density_power");
            probe_plot.series.push_back({"probe " + std::to_string(k) + " (" + p.source + ")",
                                         in_cyclotron_periods(ctx, times), series.real_values()});
            if (std::isfinite(p.outbound_ps)) {
                probe_plot.markers.push_back({p.outbound_ps / tc, "out"});
                probe_plot.markers.push_back({p.next_passage_ps / tc, "again"});
            }
        }
        csv.close();
        ctx.manifest.add_artifact(csv.path());
    }
    ctx.stage("evolve", sw.seconds());

    if (!c_peaks.empty()) {
        ctx.log << "evolve: first |C|^2 peak at " << format_number(c_peaks.front().time_ps) << " ps ("
                << format_number(c_peaks.front().time_ps / tc) << " T_c)"
                << (orbit_c ? ", orbit " + orbit_c->label : std::string()) << '\n';
    }
    save_plot(ctx,
              Plot{"Autocorrelation", "t / T_c", "|C(t)|^2", {{"|C|^2", in_cyclotron_periods(ctx, times), c2}},
                   orbit_markers(ctx), false},
              "autocorrelation.svg");
    save_plot(ctx,
              Plot{"Recurrence signal (" + ctx.config.recurrence_apodization + ")", "t / T_c", "magnitude",
                   {{"signal", in_cyclotron_periods(ctx, times), signal.real_values()}}, orbit_markers(ctx), false},
              "recurrence_signal.svg");
    if (!probe_plot.series.empty()) {
        save_plot(ctx, probe_plot, "probes.svg");
    }
}

void cmd_bohm(RunContext& ctx) {
    const auto wp = make_wavepacket(ctx);
    const auto rec = first_recurrence(ctx, *wp);
    const double tc = ctx.run.cyclotron_ps;
    const double t_end = ctx.config.bohm_t_max_ps.value_or(1.5 * tc);
    const bohm::NodeThresholds thresholds =
        bohm::NodeThresholds::relative_to(*wp, ctx.config.bohm_node_fraction, ctx.config.bohm_hard_fraction);

    // Individual trajectories from the configured starts.
    Stopwatch sw;
    bohm::TrajectoryOptions topt;
    topt.tolerances.rtol = ctx.config.bohm_rtol;
    topt.tolerances.atol = ctx.config.bohm_atol_au;
    topt.thresholds = thresholds;
    topt.sample_times_ps = wavepacket::time_grid_ps(t_end, ctx.config.bohm_samples);
    const bool rec_reached = rec && rec->time_ps <= t_end;
    if (rec_reached) {
        topt.sample_times_ps.push_back(rec->time_ps);
    } else if (rec) {
        ctx.manifest.add_note("bohm: first recurrence (" + format_number(rec->time_ps) +
                              " ps) lies beyond bohm.t_max_ps; no distance check");
    }
    Plot plot{"Bohmian trajectories", "rho (au)", "z (au)", {}, {}, true};
    CsvWriter summary(ctx.path("trajectories.csv"), "bohm-trajectory-summary", ctx.hash,
                      {"trajectory", "start_r_au", "start_theta_rad", "status", "steps", "min_abs_psi",
                       "distance_at_recurrence_au", "final_t_ps"});
    for (std::size_t k = 0; k < ctx.config.bohm_starts.size(); ++k) {
        const auto [r, theta] = ctx.config.bohm_starts[k];
        const bohm::Point start{r * std::sin(theta), r * std::cos(theta)};
        const auto traj = bohm::integrate_trajectory(*wp, start, 0.0, t_end, topt);
        CsvWriter csv(ctx.path("trajectory_" + std::to_string(k) + ".csv"), "bohm-trajectory", ctx.hash,
                      {"t_ps", "rho_au", "z_au", "v_rho_au", "v_z_au", "abs_psi"});
        Series s{"start (" + format_number(r) + ", " + format_number(theta) + ")", {}, {}};
        double at_rec = std::nan("");
        for (std::size_t i = 0; i < traj.points.size(); ++i) {
            const auto& p = traj.points[i];
            const auto& v = traj.velocities[i];
            csv << traj.times_ps[i] << p.rho << p.z << v.v_rho << v.v_z << v.amp;
            csv.end_row();
            s.x.push_back(p.rho);
            s.y.push_back(p.z);
            if (rec_reached && traj.times_ps[i] == rec->time_ps) {
                at_rec = std::hypot(p.rho, p.z);
            }
        }
        csv.close();
        ctx.manifest.add_artifact(csv.path());
        plot.series.push_back(std::move(s));
        summary << static_cast<int>(k) << r << theta << bohm::status_name(traj.status) << traj.steps
                << traj.min_amp_seen << at_rec << traj.times_ps.back();
        summary.end_row();
        if (k == 0 && rec_reached) {
            if (!(at_rec > r)) {
                std::ostringstream msg;
                msg << "trajectory from (" << r << ", " << theta << ") is at distance " << at_rec
                    << " au at the first recurrence (" << rec->time_ps << " ps), not farther than its start";
                ctx.flags.push_back(msg.str());
            }
        }
    }
    summary.close();
    ctx.manifest.add_artifact(summary.path());
    save_plot(ctx, plot, "trajectories.svg");
    ctx.stage("bohm-trajectories", sw.seconds());

    // Ensemble transport and equivariance.
    sw = Stopwatch();
    const double horizon = rec ? rec->time_ps : t_end;
    if (!rec) {
        ctx.manifest.add_note("bohm: no |C|^2 peak found; ensemble checkpoints span bohm.t_max_ps");
    }
    std::vector<double> checkpoints;
    for (int k = 0; k <= ctx.config.ensemble_checkpoints; ++k) {
        checkpoints.push_back(horizon * k / ctx.config.ensemble_checkpoints);
    }
    const auto ensemble = bohm::sample_initial(*wp, ctx.config.ensemble_n, ctx.config.ensemble_seed);
    bohm::TrajectoryOptions eopt = bohm::ensemble_trajectory_options();
    eopt.tolerances.rtol = ctx.config.ensemble_rtol;
    eopt.tolerances.atol = ctx.config.ensemble_atol_au;
    eopt.thresholds = thresholds;
    const auto run = bohm::propagate_ensemble(*wp, ensemble, checkpoints, eopt);
    ctx.log << "bohm: ensemble of " << ensemble.initial.size() << " (" << run.census() << "), " << run.steps
            << " steps\n";
    CsvWriter eq(ctx.path("equivariance.csv"), "equivariance", ctx.hash,
                 {"t_ps", "tv_distance", "bootstrap_noise", "used", "failed"});
    bohm::EquivarianceOptions qopt;
    qopt.grid = ctx.config.ensemble_grid;
    qopt.seed = ctx.config.ensemble_seed;
    for (std::size_t k = 0; k < checkpoints.size(); ++k) {
        const auto valid = run.valid_at(k);
        CsvWriter snap(ctx.path("ensemble_t" + std::to_string(k) + ".csv"), "ensemble-snapshot t_ps=" +
                       format_number(checkpoints[k]), ctx.hash, {"rho_au", "z_au"});
        for (std::size_t i = 0; i < valid.size(); ++i) {
            if (valid[i]) {
                snap << run.positions[k][i].rho << run.positions[k][i].z;
                snap.end_row();
            }
        }
        snap.close();
        ctx.manifest.add_artifact(snap.path());
        bohm::EquivarianceReport rep;
        try {
            rep = bohm::equivariance_distance(*wp, run.positions[k], valid, checkpoints[k], ensemble.box, qopt);
        } catch (const ConvergenceFailure& e) {
            throw ConvergenceFailure(std::string(e.what()) + "; census: " + run.census());
        }
        eq << rep.t_ps << rep.distance << rep.bootstrap_noise << rep.used << rep.failed;
        eq.end_row();
        ctx.log << "bohm: t = " << format_number(rep.t_ps) << " ps, TV distance " << format_number(rep.distance)
                << ", bootstrap noise " << format_number(rep.bootstrap_noise) << '\n';
    }
    eq.close();
    ctx.manifest.add_artifact(eq.path());
    ctx.stage("bohm-ensemble", sw.seconds());
}

void cmd_all(RunContext& ctx) {
    cmd_closed_orbits(ctx);
    cmd_spectrum(ctx);
    cmd_evolve(ctx);
    cmd_bohm(ctx);
}

} // namespace rydbohm::io
