#include "rydbohm/wavepacket.hpp"

#include "rydbohm/errors.hpp"
#include "rydbohm/quadrature.hpp"
#include "rydbohm/units.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace rydbohm::wavepacket {

using quantum::BasisSpec;
using quantum::ExpansionWorkspace;
using quantum::PairIndex;

void WavepacketSpec::validate() const {
    if (!(r0 > 0.0)) {
        throw InvalidInput("WavepacketSpec: r0 must be positive");
    }
    if (!(delta_r > 0.0)) {
        throw InvalidInput("WavepacketSpec: delta_r must be positive");
    }
    if (!(sigma_theta > 0.0)) {
        throw InvalidInput("WavepacketSpec: sigma_theta must be positive");
    }
    if (bump_angles.empty()) {
        throw InvalidInput("WavepacketSpec: need at least one angular bump");
    }
    for (double a : bump_angles) {
        if (!(a >= 0.0 && a <= 0.5 * units::pi + 1e-12)) {
            throw InvalidInput("WavepacketSpec: bump angles must lie in [0, pi/2]");
        }
    }
    if (window && !(window->lower < window->upper)) {
        throw InvalidInput("WavepacketSpec: empty energy window");
    }
}

double target_function(const WavepacketSpec& spec, double rho, double z) {
    const double r = std::hypot(rho, z);
    const double theta = std::atan2(rho, z);
    const double radial = std::exp(-(r - spec.r0) * (r - spec.r0) / (2.0 * spec.delta_r));
    const double s2 = 2.0 * spec.sigma_theta * spec.sigma_theta;
    double angular = 0.0;
    for (double b : spec.bump_angles) {
        const double d1 = theta - b;
        const double d2 = units::pi - theta - b;
        angular += std::exp(-d1 * d1 / s2) + std::exp(-d2 * d2 / s2);
    }
    return radial * angular;
}

Wavepacket::Wavepacket(std::shared_ptr<const Spectrum> spectrum, Eigen::VectorXcd alpha)
    : spectrum_(std::move(spectrum)), alpha_(std::move(alpha)) {
    if (!spectrum_) {
        throw InvalidInput("Wavepacket: null spectrum");
    }
    if (alpha_.size() != spectrum_->size() || alpha_.size() == 0) {
        throw InvalidInput("Wavepacket: coefficient count must equal the (non-zero) number of states");
    }
    const int k = spectrum_->basis.radial_count();
    const PairIndex index(k);
    stacked_.resize(static_cast<Eigen::Index>(k) * k, spectrum_->size());
    const double norm = 1.0 / std::sqrt(2.0 * units::pi);
    for (int s = 0; s < spectrum_->size(); ++s) {
        const Eigen::MatrixXd c = quantum::coefficient_matrix(index, spectrum_->vectors.col(s)) * norm;
        stacked_.col(s) = Eigen::Map<const Eigen::VectorXd>(c.data(), c.size());
    }
}

double Wavepacket::mean_energy() const { return alpha_.cwiseAbs2().dot(spectrum_->energies); }

Eigen::VectorXcd Wavepacket::phased(double t_au) const {
    Eigen::VectorXcd a(alpha_.size());
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        a[i] = alpha_[i] * std::polar(1.0, -spectrum_->energies[i] * t_au);
    }
    return a;
}

Eigen::MatrixXcd Wavepacket::coefficients_at(double t_au) const {
    const Eigen::VectorXcd a = phased(t_au);
    const int k = spectrum_->basis.radial_count();
    Eigen::MatrixXcd c(k, k);
    Eigen::Map<Eigen::VectorXcd> flat(c.data(), c.size());
    flat.real() = stacked_ * a.real();
    flat.imag() = stacked_ * a.imag();
    return c;
}

Eigen::MatrixXcd Wavepacket::coefficient_rate_at(double t_au) const {
    Eigen::VectorXcd a = phased(t_au);
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        a[i] *= complex(0.0, -spectrum_->energies[i]);
    }
    const int k = spectrum_->basis.radial_count();
    Eigen::MatrixXcd c(k, k);
    Eigen::Map<Eigen::VectorXcd> flat(c.data(), c.size());
    flat.real() = stacked_ * a.real();
    flat.imag() = stacked_ * a.imag();
    return c;
}

PointValue<complex> Wavepacket::evaluate_with(const Eigen::MatrixXcd& coeffs, const BasisSpec& basis, double rho,
                                              double z, bool with_laplacian, ExpansionWorkspace& ws) {
    if (!(rho >= 0.0) || !std::isfinite(z)) {
        throw InvalidInput("wavepacket evaluation: need rho >= 0 and finite z");
    }
    return quantum::evaluate_expansion<complex>(coeffs, basis, rho, z, with_laplacian, ws);
}

PointValue<complex> Wavepacket::evaluate(double rho, double z, double t_au, bool with_laplacian) const {
    ExpansionWorkspace ws;
    return evaluate_with(coefficients_at(t_au), spectrum_->basis, rho, z, with_laplacian, ws);
}

namespace {

struct Projection {
    Eigen::VectorXd overlaps;  // <psi_k | g>
    double g_norm2 = 0.0;
};

Projection project_target(const WavepacketSpec& spec, const Spectrum& spectrum, int radial_points,
                          int angular_points) {
    const BasisSpec& basis = spectrum.basis;
    const int k = basis.radial_count();
    const double r_hi = spec.r0 + 10.0 * std::sqrt(spec.delta_r);
    const double big_r_max = std::sqrt(2.0 * r_hi);
    const int r_panels = std::max(1, radial_points / 16);
    const int a_panels = std::max(1, angular_points / 16);
    const auto rr = quadrature::composite_gauss_legendre(16, r_panels, 0.0, big_r_max);
    const auto ra = quadrature::composite_gauss_legendre(16, a_panels, 0.0, 0.5 * units::pi);

    Eigen::MatrixXd g_proj = Eigen::MatrixXd::Zero(k, k);
    double g_norm2 = 0.0;
    quantum::RadialValues fu;
    quantum::RadialValues fv;
    for (std::size_t i = 0; i < rr.nodes.size(); ++i) {
        const double big_r = rr.nodes[i];
        for (std::size_t j = 0; j < ra.nodes.size(); ++j) {
            const double phi = ra.nodes[j];
            const double mu = big_r * std::cos(phi);
            const double nu = big_r * std::sin(phi);
            const double u = mu * mu;
            const double v = nu * nu;
            const double g = target_function(spec, mu * nu, 0.5 * (u - v));
            // d^3r = 2 pi (mu^2 + nu^2) mu nu dmu dnu, dmu dnu = R dR dphi
            const double w = rr.weights[i] * ra.weights[j] * big_r * (u + v) * mu * nu * 2.0 * units::pi;
            if (w * std::abs(g) == 0.0) {
                continue;
            }
            quantum::evaluate_radial(k, basis.b, u, fu, false);
            quantum::evaluate_radial(k, basis.b, v, fv, false);
            g_proj.noalias() += (w * g) * fu.f * fv.f.transpose();
            g_norm2 += w * g * g;
        }
    }
    const PairIndex index(k);
    Projection p;
    p.g_norm2 = g_norm2;
    p.overlaps.resize(spectrum.size());
    const double norm = 1.0 / std::sqrt(2.0 * units::pi);
    for (int s = 0; s < spectrum.size(); ++s) {
        const Eigen::MatrixXd c = quantum::coefficient_matrix(index, spectrum.vectors.col(s));
        p.overlaps[s] = norm * (c.array() * g_proj.array()).sum();
    }
    return p;
}

} // namespace

Wavepacket build_initial(const WavepacketSpec& spec, std::shared_ptr<const Spectrum> spectrum,
                         const QuadratureOptions& quadrature) {
    spec.validate();
    if (!spectrum) {
        throw InvalidInput("build_initial: null spectrum");
    }
    std::vector<int> keep;
    for (int s = 0; s < spectrum->size(); ++s) {
        if (!spec.window || spec.window->contains(spectrum->energies[s])) {
            keep.push_back(s);
        }
    }
    if (keep.empty()) {
        throw InvalidInput("build_initial: no eigenstates inside the wavepacket window");
    }
    auto retained = std::make_shared<Spectrum>();
    retained->gamma = spectrum->gamma;
    retained->basis = spectrum->basis;
    retained->energies.resize(static_cast<Eigen::Index>(keep.size()));
    retained->vectors.resize(spectrum->vectors.rows(), static_cast<Eigen::Index>(keep.size()));
    for (std::size_t i = 0; i < keep.size(); ++i) {
        retained->energies[static_cast<Eigen::Index>(i)] = spectrum->energies[keep[i]];
        retained->vectors.col(static_cast<Eigen::Index>(i)) = spectrum->vectors.col(keep[i]);
    }

    int nr = quadrature.radial_points;
    int na = quadrature.angular_points;
    Projection coarse = project_target(spec, *retained, nr, na);
    double change = 0.0;
    bool converged = false;
    for (int level = 0; level <= quadrature.max_refinements; ++level) {
        nr *= 2;
        na *= 2;
        Projection fine = project_target(spec, *retained, nr, na);
        change = (fine.overlaps - coarse.overlaps).norm() / std::max(fine.overlaps.norm(), 1e-300);
        coarse = std::move(fine);
        if (change < quadrature.tolerance) {
            converged = true;
            break;
        }
    }
    if (!converged) {
        std::ostringstream msg;
        msg << "build_initial: overlap quadrature not converged on a " << nr << " x " << na
            << " (radial x angular) grid; relative change " << change;
        throw ConvergenceFailure(msg.str());
    }
    const double captured = coarse.overlaps.norm();
    if (!(captured > 0.0)) {
        throw ConvergenceFailure("build_initial: target has zero overlap with the retained states");
    }
    Eigen::VectorXcd alpha = (coarse.overlaps / captured).cast<complex>();
    Wavepacket wp(std::move(retained), std::move(alpha));
    wp.set_target_overlap(captured / std::sqrt(coarse.g_norm2));
    return wp;
}

PointValue<complex> psi_at(const Wavepacket& wp, double rho, double z, double t_ps) {
    return wp.evaluate(rho, z, units::ps_to_au_time(t_ps), false);
}

std::vector<double> TimeSeries::magnitudes_squared() const {
    std::vector<double> out(values.size());
    std::transform(values.begin(), values.end(), out.begin(), [](complex v) { return std::norm(v); });
    return out;
}

std::vector<double> TimeSeries::real_values() const {
    std::vector<double> out(values.size());
    std::transform(values.begin(), values.end(), out.begin(), [](complex v) { return v.real(); });
    return out;
}

std::string kind_name(TimeSeries::Kind kind) {
    switch (kind) {
    case TimeSeries::Kind::autocorrelation:
        return "autocorrelation";
    case TimeSeries::Kind::probe:
        return "probe";
    case TimeSeries::Kind::recurrence_signal:
        return "recurrence-signal";
    }
    return "unknown";
}

std::vector<double> time_grid_ps(double t_max_ps, int n) {
    if (n < 2 || !(t_max_ps > 0.0)) {
        throw InvalidInput("time grid needs at least two samples and a positive length");
    }
    std::vector<double> t(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        t[i] = t_max_ps * i / (n - 1);
    }
    return t;
}

namespace {

void require_increasing(const std::vector<double>& times) {
    for (std::size_t i = 1; i < times.size(); ++i) {
        if (!(times[i] > times[i - 1])) {
            throw InvalidInput("time samples must be strictly increasing");
        }
    }
}

} // namespace

TimeSeries autocorrelation(const Wavepacket& wp, const std::vector<double>& times_ps) {
    require_increasing(times_ps);
    TimeSeries ts;
    ts.kind = TimeSeries::Kind::autocorrelation;
    ts.times_ps = times_ps;
    ts.values.reserve(times_ps.size());
    const Eigen::VectorXd weights = wp.alpha().cwiseAbs2();
    const Eigen::VectorXd& e = wp.spectrum().energies;
    for (double t_ps : times_ps) {
        const double t = units::ps_to_au_time(t_ps);
        complex c = 0.0;
        for (Eigen::Index k = 0; k < weights.size(); ++k) {
            c += weights[k] * std::polar(1.0, -e[k] * t);
        }
        ts.values.push_back(c);
    }
    return ts;
}

TimeSeries density_probe(const Wavepacket& wp, double rho, double z, const std::vector<double>& times_ps, int power) {
    if (power != 2 && power != 4) {
        throw InvalidInput("density_probe: power must be 2 or 4");
    }
    if (!(rho >= 0.0)) {
        throw InvalidInput("density_probe: rho must be non-negative");
    }
    require_increasing(times_ps);
    TimeSeries ts;
    ts.kind = TimeSeries::Kind::probe;
    ts.times_ps = times_ps;
    ExpansionWorkspace ws;
    // basis functions at the probe point are time independent: psi(t) = sum_k a_k(t) psi_k
    const Spectrum& sp = wp.spectrum();
    Eigen::VectorXd psi_k(sp.size());
    for (int k = 0; k < sp.size(); ++k) {
        psi_k[k] = quantum::eigenfunction_value(sp, k, rho, z).value;
    }
    for (double t_ps : times_ps) {
        const double t = units::ps_to_au_time(t_ps);
        complex psi = 0.0;
        for (int k = 0; k < sp.size(); ++k) {
            psi += wp.alpha()[k] * std::polar(1.0, -sp.energies[k] * t) * psi_k[k];
        }
        const double d = std::norm(psi);
        ts.values.emplace_back(power == 2 ? d : d * d, 0.0);
    }
    return ts;
}

Apodization parse_apodization(const std::string& name) {
    if (name == "rectangular") {
        return Apodization::rectangular;
    }
    if (name == "hann") {
        return Apodization::hann;
    }
    if (name == "gaussian") {
        return Apodization::gaussian;
    }
    throw InvalidInput("unknown apodization '" + name + "' (rectangular, hann, gaussian)");
}

TimeSeries recurrence_time_signal(const Wavepacket& wp, const std::vector<double>& times_ps, EnergyWindow window,
                                  Apodization apodization) {
    if (!(window.lower < window.upper)) {
        throw InvalidInput("recurrence_time_signal: empty energy window");
    }
    require_increasing(times_ps);
    const Eigen::VectorXd& e = wp.spectrum().energies;
    const double width = window.upper - window.lower;
    const double center = 0.5 * (window.upper + window.lower);
    std::vector<double> w(static_cast<std::size_t>(e.size()), 0.0);
    double total = 0.0;
    for (Eigen::Index k = 0; k < e.size(); ++k) {
        if (!window.contains(e[k])) {
            continue;
        }
        const double x = (e[k] - center) / width;  // in [-1/2, 1/2]
        double a = 1.0;
        switch (apodization) {
        case Apodization::rectangular:
            break;
        case Apodization::hann:
            a = std::cos(units::pi * x) * std::cos(units::pi * x);
            break;
        case Apodization::gaussian:
            a = std::exp(-0.5 * (x / 0.25) * (x / 0.25));
            break;
        }
        w[static_cast<std::size_t>(k)] = a * std::norm(wp.alpha()[k]);
        total += w[static_cast<std::size_t>(k)];
    }
    if (!(total > 0.0)) {
        throw InvalidInput("recurrence_time_signal: no populated states inside the window");
    }
    TimeSeries ts;
    ts.kind = TimeSeries::Kind::recurrence_signal;
    ts.times_ps = times_ps;
    for (double t_ps : times_ps) {
        const double t = units::ps_to_au_time(t_ps);
        complex c = 0.0;
        for (Eigen::Index k = 0; k < e.size(); ++k) {
            c += w[static_cast<std::size_t>(k)] * std::polar(1.0, -e[k] * t);
        }
        ts.values.emplace_back(std::abs(c) / total, 0.0);
    }
    return ts;
}

std::vector<Peak> find_peaks(const std::vector<double>& times, const std::vector<double>& values,
                             double min_prominence) {
    std::vector<Peak> peaks;
    const std::size_t n = values.size();
    if (n < 3 || times.size() != n) {
        return peaks;
    }
    for (std::size_t i = 1; i + 1 < n; ++i) {
        if (!(values[i] > values[i - 1] && values[i] >= values[i + 1])) {
            continue;
        }
        double left = values[i];
        for (std::size_t j = i; j-- > 0;) {
            if (values[j] > values[i]) {
                break;
            }
            left = std::min(left, values[j]);
        }
        double right = values[i];
        for (std::size_t j = i + 1; j < n; ++j) {
            if (values[j] > values[i]) {
                break;
            }
            right = std::min(right, values[j]);
        }
        const double prominence = values[i] - std::max(left, right);
        if (prominence < min_prominence) {
            continue;
        }
        // parabola through the three samples around the maximum
        const double y0 = values[i - 1];
        const double y1 = values[i];
        const double y2 = values[i + 1];
        const double denom = y0 - 2.0 * y1 + y2;
        double shift = denom != 0.0 ? 0.5 * (y0 - y2) / denom : 0.0;
        shift = std::clamp(shift, -0.5, 0.5);
        const double dt = 0.5 * (times[i + 1] - times[i - 1]);
        peaks.push_back({times[i] + shift * dt, y1 - 0.25 * (y0 - y2) * shift, prominence});
    }
    return peaks;
}

} // namespace rydbohm::wavepacket
