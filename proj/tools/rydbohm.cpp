// Command-line driver: closed orbits, spectrum, wavepacket evolution and Bohmian runs.

#include "rydbohm/errors.hpp"
#include "rydbohm/io/commands.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <functional>
#include <iostream>
#include <map>

namespace {

enum Exit { ok = 0, usage = 2, numerical = 3, flagged = 4 };

} // namespace

int main(int argc, char** argv) {
    using namespace rydbohm;

    CLI::App app{"Diamagnetic hydrogen: closed orbits, eigenstates, wavepacket recurrences and Bohmian trajectories"};
    app.set_version_flag("--version", std::string(io::tool_version));
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    std::string out_dir = "out";
    std::string cache_dir;
    bool no_cache = false;
    bool no_plots = false;
    std::optional<long long> seed;
    app.add_option("--config", config_path, "run configuration file")->required()->check(CLI::ExistingFile);
    app.add_option("--out", out_dir, "output directory")->capture_default_str();
    app.add_option("--cache", cache_dir, "cache directory for spectra and wavepacket coefficients (default: <out>/cache)");
    app.add_flag("--no-cache", no_cache, "neither read nor write the cache");
    app.add_option("--seed", seed, "ensemble seed (overrides ensemble.seed)")->check(CLI::NonNegativeNumber);
    app.add_flag("--no-plots", no_plots, "write CSV files only");

    const std::map<std::string, std::function<void(io::RunContext&)>> commands{
        {"closed-orbits", io::cmd_closed_orbits},
        {"spectrum", io::cmd_spectrum},
        {"evolve", io::cmd_evolve},
        {"bohm", io::cmd_bohm},
        {"all", io::cmd_all},
    };
    const std::map<std::string, std::string> help{
        {"closed-orbits", "search closed classical orbits at the configured scaled energy"},
        {"spectrum", "compute (or load from cache) the eigenstates in the energy window"},
        {"evolve", "build the wavepacket and write autocorrelation, recurrence signal and probes"},
        {"bohm", "integrate Bohmian trajectories and test ensemble equivariance"},
        {"all", "run every stage in order"},
    };
    for (const auto& [name, _] : commands) {
        app.add_subcommand(name, help.at(name));
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? Exit::ok : Exit::usage;
    }
    const std::string command = app.get_subcommands().front()->get_name();

    try {
        io::RunConfig config = io::load_config(config_path);
        if (seed) {
            config.ensemble_seed = static_cast<std::uint64_t>(*seed);
        }
        if (no_cache) {
            cache_dir.clear();
        } else if (cache_dir.empty()) {
            cache_dir = (std::filesystem::path(out_dir) / "cache").string();
        }
        io::RunContext ctx(config, out_dir, cache_dir, !no_plots, std::cerr, command);
        std::cerr << "config hash " << ctx.hash << '\n';
        commands.at(command)(ctx);
        for (const auto& f : ctx.flags) {
            ctx.manifest.add_note("flagged: " + f);
            std::cerr << "flagged: " << f << '\n';
        }
        ctx.manifest.write(out_dir);
        return ctx.flags.empty() ? Exit::ok : Exit::flagged;
    } catch (const InvalidInput& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return Exit::usage;
    } catch (const ConvergenceFailure& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return Exit::numerical;
    } catch (const IntegrationFailure& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return Exit::numerical;
    } catch (const NodeSingularity& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return Exit::numerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
