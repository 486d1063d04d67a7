#include "rydbohm/expansion.hpp"
#include "rydbohm/spectrum.hpp"

#include "rydbohm/errors.hpp"
#include "rydbohm/units.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace rydbohm::quantum {

PointValue<double> eigenfunction_value(const Spectrum& spectrum, int k, double rho, double z, bool with_laplacian) {
    if (k < 0 || k >= spectrum.size()) {
        throw InvalidInput("eigenfunction_value: state index out of range");
    }
    if (!(rho >= 0.0) || !std::isfinite(z)) {
        throw InvalidInput("eigenfunction_value: need rho >= 0 and finite z");
    }
    const PairIndex index(spectrum.basis.radial_count());
    // 2 pi x^T S x = 1 over the full 3D volume
    const Eigen::MatrixXd c =
        coefficient_matrix(index, spectrum.vectors.col(k)) / std::sqrt(2.0 * units::pi);
    ExpansionWorkspace ws;
    return evaluate_expansion<double>(c, spectrum.basis, rho, z, with_laplacian, ws);
}

namespace {

constexpr char magic[8] = {'R', 'Y', 'D', 'B', 'S', 'P', 'E', 'C'};

template <typename T>
void write_raw(std::ofstream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_raw(std::ifstream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) {
        throw std::runtime_error("load_spectrum: truncated file");
    }
    return v;
}

} // namespace

std::string spectrum_cache_key(double gamma, const BasisSpec& basis, const EnergyWindow& window) {
    std::ostringstream os;
    os << std::setprecision(17) << "v" << spectrum_format_version << "|gamma=" << gamma << "|n_max=" << basis.n_max
       << "|b=" << basis.b << "|window=" << window.lower << "," << window.upper;
    return os.str();
}

void save_spectrum(const Spectrum& spectrum, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("save_spectrum: cannot open " + path);
    }
    out.write(magic, sizeof(magic));
    write_raw(out, spectrum_format_version);
    write_raw(out, spectrum.gamma);
    write_raw(out, static_cast<std::int32_t>(spectrum.basis.n_max));
    write_raw(out, spectrum.basis.b);
    write_raw(out, static_cast<std::int64_t>(spectrum.vectors.rows()));
    write_raw(out, static_cast<std::int64_t>(spectrum.size()));
    out.write(reinterpret_cast<const char*>(spectrum.energies.data()),
              static_cast<std::streamsize>(sizeof(double) * spectrum.energies.size()));
    out.write(reinterpret_cast<const char*>(spectrum.vectors.data()),
              static_cast<std::streamsize>(sizeof(double) * spectrum.vectors.size()));
    if (!out) {
        throw std::runtime_error("save_spectrum: write failed for " + path);
    }
}

Spectrum load_spectrum(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("load_spectrum: cannot open " + path);
    }
    char head[sizeof(magic)];
    in.read(head, sizeof(head));
    if (!in || !std::equal(std::begin(head), std::end(head), std::begin(magic))) {
        throw std::runtime_error("load_spectrum: " + path + " is not a spectrum cache file");
    }
    const auto version = read_raw<std::uint32_t>(in);
    if (version != spectrum_format_version) {
        throw std::runtime_error("load_spectrum: unsupported format version " + std::to_string(version));
    }
    Spectrum s;
    s.gamma = read_raw<double>(in);
    s.basis.n_max = read_raw<std::int32_t>(in);
    s.basis.b = read_raw<double>(in);
    s.basis.validate();
    const auto rows = read_raw<std::int64_t>(in);
    const auto cols = read_raw<std::int64_t>(in);
    if (rows != s.basis.dimension() || cols < 0) {
        throw std::runtime_error("load_spectrum: inconsistent dimensions in " + path);
    }
    s.energies.resize(cols);
    s.vectors.resize(rows, cols);
    in.read(reinterpret_cast<char*>(s.energies.data()), static_cast<std::streamsize>(sizeof(double) * cols));
    in.read(reinterpret_cast<char*>(s.vectors.data()), static_cast<std::streamsize>(sizeof(double) * rows * cols));
    if (!in) {
        throw std::runtime_error("load_spectrum: truncated file " + path);
    }
    return s;
}

} // namespace rydbohm::quantum
