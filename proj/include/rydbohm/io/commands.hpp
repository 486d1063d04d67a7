#pragma once

// Subcommands of the command-line tool. Each writes its artifacts into the output
// directory and registers them with the run manifest.

#include "rydbohm/bohm.hpp"
#include "rydbohm/classical.hpp"
#include "rydbohm/io/config.hpp"
#include "rydbohm/io/output.hpp"
#include "rydbohm/spectrum.hpp"
#include "rydbohm/units.hpp"
#include "rydbohm/wavepacket.hpp"

#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace rydbohm::io {

// Physical quantities derived from a configuration.
struct ResolvedRun {
    units::FieldConfig field;
    quantum::EnergyWindow window;
    quantum::BasisSpec basis;
    double cyclotron_ps = 0.0;
};

ResolvedRun resolve(const RunConfig& config);

struct RunContext {
    RunContext(RunConfig cfg, std::string out, std::string cache, bool with_plots, std::ostream& log_stream,
               const std::string& command);

    RunConfig config;
    ResolvedRun run;
    std::string hash;
    std::string out_dir;
    std::string cache_dir;  // empty disables the spectrum cache
    bool plots = true;
    std::ostream& log;
    Manifest manifest;
    std::vector<std::string> flags;  // expected-outcome checks that did not hold

    // Results shared between stages of one invocation.
    std::optional<classical::OrbitSearchResult> orbits;
    std::shared_ptr<const quantum::Spectrum> spectrum;

    std::string path(const std::string& file) const;
    void stage(const std::string& name, double seconds);
};

void cmd_closed_orbits(RunContext& ctx);
void cmd_spectrum(RunContext& ctx);
void cmd_evolve(RunContext& ctx);
void cmd_bohm(RunContext& ctx);
void cmd_all(RunContext& ctx);

// Closed orbit whose period (or repetition) lies within `tolerance` of t_ps; nullptr if none.
const classical::ClosedOrbit* match_orbit(const classical::OrbitSearchResult& orbits, double gamma, double t_ps,
                                          double tolerance = 0.05);

} // namespace rydbohm::io
