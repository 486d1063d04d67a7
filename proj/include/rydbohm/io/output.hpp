#pragma once

// Output artifacts: CSV tables, SVG line plots, and the run manifest.

#include <chrono>
#include <concepts>
#include <fstream>
#include <map>
#include <string>
#include <vector>

namespace rydbohm::io {

// CSV with a comment line "# kind=<kind> config_hash=<hash>" followed by a header row.
class CsvWriter {
public:
    CsvWriter(const std::string& path, const std::string& kind, const std::string& hash,
              const std::vector<std::string>& columns);

    CsvWriter& operator<<(double value);
    template <std::integral T>
    CsvWriter& operator<<(T value) {
        return write_integer(static_cast<long long>(value));
    }
    CsvWriter& operator<<(const std::string& value);
    void end_row();
    void close();

    const std::string& path() const { return path_; }

private:
    void separator();
    CsvWriter& write_integer(long long value);

    std::string path_;
    std::ofstream out_;
    std::size_t columns_;
    std::size_t in_row_ = 0;
};

struct Series {
    std::string name;
    std::vector<double> x;
    std::vector<double> y;
};

struct Marker {
    double x = 0.0;
    std::string label;
};

struct Plot {
    std::string title;
    std::string x_label;
    std::string y_label;
    std::vector<Series> series;
    std::vector<Marker> markers;  // labelled vertical lines
    bool equal_aspect = false;
};

void write_svg(const Plot& plot, const std::string& path);

class Manifest {
public:
    Manifest(std::string config_hash, std::string command);

    void add_artifact(const std::string& path);
    void add_timing(const std::string& stage, double seconds);
    void add_note(const std::string& note);
    // Writes manifest.json into `directory`; call after every artifact is closed.
    std::string write(const std::string& directory) const;

    const std::vector<std::string>& artifacts() const { return artifacts_; }

private:
    std::string hash_;
    std::string command_;
    std::vector<std::string> artifacts_;
    std::vector<std::pair<std::string, double>> timings_;
    std::vector<std::string> notes_;
};

class Stopwatch {
public:
    Stopwatch() : start_(std::chrono::steady_clock::now()) {}
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

inline constexpr const char* tool_version = "1.0.0";

} // namespace rydbohm::io
