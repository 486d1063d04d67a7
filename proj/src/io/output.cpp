#include "rydbohm/io/output.hpp"

#include "rydbohm/io/format.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace rydbohm::io {

CsvWriter::CsvWriter(const std::string& path, const std::string& kind, const std::string& hash,
                     const std::vector<std::string>& columns)
    : path_(path), out_(path, std::ios::binary), columns_(columns.size()) {
    if (!out_) {
        throw std::runtime_error("cannot write " + path);
    }
    out_ << "# kind=" << kind << " config_hash=" << hash << '\n';
    for (std::size_t i = 0; i < columns.size(); ++i) {
        out_ << (i ? "," : "") << columns[i];
    }
    out_ << '\n';
}

void CsvWriter::separator() {
    if (in_row_ == columns_) {
        throw std::logic_error(path_ + ": too many values in a row");
    }
    if (in_row_++ > 0) {
        out_ << ',';
    }
}

CsvWriter& CsvWriter::operator<<(double value) {
    separator();
    out_ << format_number(value);
    return *this;
}

CsvWriter& CsvWriter::write_integer(long long value) {
    separator();
    out_ << value;
    return *this;
}

CsvWriter& CsvWriter::operator<<(const std::string& value) {
    separator();
    if (value.find_first_of(",\"\n") != std::string::npos) {
        std::string q = "\"";
        for (char c : value) {
            q += c == '"' ? std::string("\"\"") : std::string(1, c);
        }
        out_ << q << '"';
    } else {
        out_ << value;
    }
    return *this;
}

void CsvWriter::end_row() {
    if (in_row_ != columns_) {
        throw std::logic_error(path_ + ": incomplete row");
    }
    out_ << '\n';
    in_row_ = 0;
}

void CsvWriter::close() {
    out_.close();
    if (!out_) {
        throw std::runtime_error("error writing " + path_);
    }
}

namespace {

std::string escape_xml(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
        case '<':
            out += "&lt;";
            break;
        case '>':
            out += "&gt;";
            break;
        case '&':
            out += "&amp;";
            break;
        default:
            out += c;
        }
    }
    return out;
}

// Round tick spacing giving about `target` intervals over [lo, hi].
double tick_step(double lo, double hi, int target) {
    const double raw = (hi - lo) / target;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    for (double m : {1.0, 2.0, 5.0, 10.0}) {
        if (raw <= m * mag) {
            return m * mag;
        }
    }
    return 10.0 * mag;
}

std::string tick_label(double v, double step) {
    std::ostringstream s;
    const int digits = std::max(0, -static_cast<int>(std::floor(std::log10(step))));
    s << std::fixed << std::setprecision(digits) << (std::abs(v) < 0.5 * step ? 0.0 : v);
    return s.str();
}

} // namespace

void write_svg(const Plot& plot, const std::string& path) {
    constexpr double width = 720.0;
    constexpr double height = 480.0;
    constexpr double left = 80.0;
    constexpr double right = 150.0;
    constexpr double top = 40.0;
    constexpr double bottom = 60.0;
    double x0 = std::numeric_limits<double>::infinity();
    double x1 = -x0;
    double y0 = x0;
    double y1 = -x0;
    for (const auto& s : plot.series) {
        for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
            if (std::isfinite(s.x[i]) && std::isfinite(s.y[i])) {
                x0 = std::min(x0, s.x[i]);
                x1 = std::max(x1, s.x[i]);
                y0 = std::min(y0, s.y[i]);
                y1 = std::max(y1, s.y[i]);
            }
        }
    }
    if (!std::isfinite(x0)) {
        x0 = 0.0;
        x1 = 1.0;
        y0 = 0.0;
        y1 = 1.0;
    }
    if (x1 <= x0) {
        x1 = x0 + 1.0;
    }
    if (y1 <= y0) {
        y1 = y0 + 1.0;
    }
    double pw = width - left - right;
    double ph = height - top - bottom;
    if (plot.equal_aspect) {
        const double scale = std::min(pw / (x1 - x0), ph / (y1 - y0));
        pw = scale * (x1 - x0);
        ph = scale * (y1 - y0);
    }
    auto px = [&](double x) { return left + (x - x0) / (x1 - x0) * pw; };
    auto py = [&](double y) { return top + ph - (y - y0) / (y1 - y0) * ph; };

    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf"};
    std::ostringstream svg;
    svg << std::setprecision(6);
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
        << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg << "<text x=\"" << left + pw / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">"
        << escape_xml(plot.title) << "</text>\n";
    svg << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
        << "\" fill=\"none\" stroke=\"black\"/>\n";

    const double xs = tick_step(x0, x1, 6);
    for (double t = std::ceil(x0 / xs) * xs; t <= x1 + 1e-9 * xs; t += xs) {
        svg << "<line x1=\"" << px(t) << "\" y1=\"" << top + ph << "\" x2=\"" << px(t) << "\" y2=\"" << top + ph + 5
            << "\" stroke=\"black\"/><text x=\"" << px(t) << "\" y=\"" << top + ph + 18
            << "\" text-anchor=\"middle\">" << tick_label(t, xs) << "</text>\n";
    }
    const double ys = tick_step(y0, y1, 5);
    for (double t = std::ceil(y0 / ys) * ys; t <= y1 + 1e-9 * ys; t += ys) {
        svg << "<line x1=\"" << left - 5 << "\" y1=\"" << py(t) << "\" x2=\"" << left << "\" y2=\"" << py(t)
            << "\" stroke=\"black\"/><text x=\"" << left - 8 << "\" y=\"" << py(t) + 4
            << "\" text-anchor=\"end\">" << tick_label(t, ys) << "</text>\n";
    }
    svg << "<text x=\"" << left + pw / 2 << "\" y=\"" << top + ph + 42 << "\" text-anchor=\"middle\">"
        << escape_xml(plot.x_label) << "</text>\n";
    svg << "<text transform=\"translate(20," << top + ph / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
        << escape_xml(plot.y_label) << "</text>\n";

    for (const auto& m : plot.markers) {
        if (m.x < x0 || m.x > x1) {
            continue;
        }
        svg << "<line x1=\"" << px(m.x) << "\" y1=\"" << top << "\" x2=\"" << px(m.x) << "\" y2=\"" << top + ph
            << "\" stroke=\"gray\" stroke-dasharray=\"4,3\"/><text x=\"" << px(m.x) + 3 << "\" y=\"" << top + 12
            << "\" fill=\"gray\">" << escape_xml(m.label) << "</text>\n";
    }
    for (std::size_t k = 0; k < plot.series.size(); ++k) {
        const auto& s = plot.series[k];
        const char* color = colors[k % std::size(colors)];
        svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.2\" points=\"";
        for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
            if (std::isfinite(s.x[i]) && std::isfinite(s.y[i])) {
                svg << px(s.x[i]) << ',' << py(s.y[i]) << ' ';
            }
        }
        svg << "\"/>\n";
        const double ly = top + 14 + 16 * static_cast<double>(k);
        svg << "<line x1=\"" << left + pw + 10 << "\" y1=\"" << ly - 4 << "\" x2=\"" << left + pw + 30 << "\" y2=\""
            << ly - 4 << "\" stroke=\"" << color << "\" stroke-width=\"2\"/><text x=\"" << left + pw + 34
            << "\" y=\"" << ly << "\">" << escape_xml(s.name) << "</text>\n";
    }
    svg << "</svg>\n";

    std::ofstream out(path, std::ios::binary);
    out << svg.str();
    if (!out) {
        throw std::runtime_error("cannot write " + path);
    }
}

Manifest::Manifest(std::string config_hash, std::string command)
    : hash_(std::move(config_hash)), command_(std::move(command)) {}

void Manifest::add_artifact(const std::string& path) {
    if (std::find(artifacts_.begin(), artifacts_.end(), path) == artifacts_.end()) {
        artifacts_.push_back(path);
    }
}

void Manifest::add_timing(const std::string& stage, double seconds) { timings_.emplace_back(stage, seconds); }

void Manifest::add_note(const std::string& note) { notes_.push_back(note); }

std::string Manifest::write(const std::string& directory) const {
    namespace fs = std::filesystem;
    nlohmann::ordered_json j;
    j["config_hash"] = hash_;
    j["tool_version"] = tool_version;
    j["command"] = command_;
    const std::time_t now = std::time(nullptr);
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    j["written_at"] = stamp;
    j["artifacts"] = nlohmann::json::array();
    for (const auto& a : artifacts_) {
        j["artifacts"].push_back({{"path", fs::relative(a, directory).generic_string()},
                                  {"bytes", fs::file_size(a)},
                                  {"sha256", sha256_file(a)}});
    }
    j["timings_s"] = nlohmann::ordered_json::object();
    for (const auto& [stage, s] : timings_) {
        j["timings_s"][stage] = s;
    }
    j["notes"] = notes_;
    const std::string path = (fs::path(directory) / "manifest.json").string();
    std::ofstream out(path);
    out << j.dump(2) << '\n';
    if (!out) {
        throw std::runtime_error("cannot write " + path);
    }
    return path;
}

} // namespace rydbohm::io
