#pragma once

#include "rydbohm/expansion.hpp"
#include "rydbohm/spectrum.hpp"

#include <Eigen/Core>

#include <complex>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace rydbohm::wavepacket {

using complex = std::complex<double>;
using quantum::EnergyWindow;
using quantum::PointValue;
using quantum::Spectrum;

/// Localized initial state: a radial Gaussian at r0 times Gaussian bumps in the
/// polar angle, mirrored to z < 0 so that it lies in the even z-parity sector.
struct WavepacketSpec {
    double r0 = 10.0;                         // au
    double delta_r = 4.0;                     // au^2; exp(-(r - r0)^2 / (2 delta_r))
    std::vector<double> bump_angles{0.0, 1.1};  // rad, angle from the +z axis
    double sigma_theta = 0.2;                 // rad
    std::optional<EnergyWindow> window;       // states kept; all of the spectrum if empty

    void validate() const;
};

// Unnormalized target function g(rho, z).
double target_function(const WavepacketSpec& spec, double rho, double z);

struct QuadratureOptions {
    int radial_points = 48;
    int angular_points = 96;
    double tolerance = 1e-8;  // relative change of the coefficients under refinement
    int max_refinements = 3;
};

class Wavepacket {
public:
    Wavepacket(std::shared_ptr<const Spectrum> spectrum, Eigen::VectorXcd alpha);

    const Spectrum& spectrum() const { return *spectrum_; }
    std::shared_ptr<const Spectrum> spectrum_ptr() const { return spectrum_; }
    const Eigen::VectorXcd& alpha() const { return alpha_; }
    int size() const { return static_cast<int>(alpha_.size()); }

    // Overlap <g|psi(0)> / ||g|| recorded at construction (1 when built from coefficients).
    double target_overlap() const { return target_overlap_; }
    void set_target_overlap(double v) { target_overlap_ = v; }

    // Mean energy sum |alpha_k|^2 E_k.
    double mean_energy() const;

    // psi(t) = f(mu^2)^T C(t) f(nu^2); C(t) carries the 3D normalization.
    Eigen::MatrixXcd coefficients_at(double t_au) const;
    // dC/dt
    Eigen::MatrixXcd coefficient_rate_at(double t_au) const;

    PointValue<complex> evaluate(double rho, double z, double t_au, bool with_laplacian = false) const;

    // Evaluation with coefficients prepared by coefficients_at (shared by many points).
    static PointValue<complex> evaluate_with(const Eigen::MatrixXcd& coeffs, const quantum::BasisSpec& basis,
                                             double rho, double z, bool with_laplacian,
                                             quantum::ExpansionWorkspace& ws);

private:
    Eigen::VectorXcd phased(double t_au) const;

    std::shared_ptr<const Spectrum> spectrum_;
    Eigen::VectorXcd alpha_;
    Eigen::MatrixXd stacked_;  // column k = vec(C_k) / sqrt(2 pi)
    double target_overlap_ = 1.0;
};

// Projects the target function onto the spectrum's eigenstates and renormalizes.
Wavepacket build_initial(const WavepacketSpec& spec, std::shared_ptr<const Spectrum> spectrum,
                         const QuadratureOptions& quadrature = {});

// psi(rho, z, t) with t in picoseconds.
PointValue<complex> psi_at(const Wavepacket& wp, double rho, double z, double t_ps);

struct TimeSeries {
    enum class Kind { autocorrelation, probe, recurrence_signal };
    Kind kind = Kind::autocorrelation;
    std::vector<double> times_ps;
    std::vector<complex> values;  // real kinds keep a zero imaginary part

    std::vector<double> magnitudes_squared() const;
    std::vector<double> real_values() const;
};

std::string kind_name(TimeSeries::Kind kind);

// Uniform grid of n samples on [0, t_max_ps] (n >= 2).
std::vector<double> time_grid_ps(double t_max_ps, int n);

// C(t) = sum_k |alpha_k|^2 exp(-i E_k t).
TimeSeries autocorrelation(const Wavepacket& wp, const std::vector<double>& times_ps);

// |psi(rho, z, t)|^power, power 2 or 4.
TimeSeries density_probe(const Wavepacket& wp, double rho, double z, const std::vector<double>& times_ps,
                         int power = 2);

enum class Apodization { rectangular, hann, gaussian };
Apodization parse_apodization(const std::string& name);

// |sum_k w(E_k) |alpha_k|^2 exp(-i E_k t)| / sum_k w(E_k) |alpha_k|^2 over the window.
TimeSeries recurrence_time_signal(const Wavepacket& wp, const std::vector<double>& times_ps, EnergyWindow window,
                                  Apodization apodization);

struct Peak {
    double time_ps = 0.0;
    double value = 0.0;
    double prominence = 0.0;
};

// Local maxima of a sampled real series, refined by parabolic interpolation, with the
// prominence of each peak relative to the surrounding minima.
std::vector<Peak> find_peaks(const std::vector<double>& times, const std::vector<double>& values,
                             double min_prominence);

} // namespace rydbohm::wavepacket
