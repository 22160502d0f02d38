#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "frequency_grid.hpp"
#include "units.hpp"

namespace cryorf {

// A per-frequency real-valued trace with a unit tag.
struct ScalarTrace {
    FrequencyGrid grid;
    std::vector<double> values;
    Unit unit = Unit::linear;

    ScalarTrace() = default;
    ScalarTrace(FrequencyGrid g, std::vector<double> v, Unit u)
        : grid(std::move(g)), values(std::move(v)), unit(u) {
        if (grid.size() != values.size())
            throw Error("trace length does not match grid length");
    }

    static ScalarTrace constant(const FrequencyGrid& g, double value, Unit u) {
        return ScalarTrace(g, std::vector<double>(g.size(), value), u);
    }

    std::size_t size() const { return values.size(); }

    double at_frequency(double f_hz) const { return values[grid.nearest_index(f_hz)]; }

    // Linear interpolation within the grid span; no extrapolation.
    double interpolate(double f_hz) const {
        const auto& p = grid.points();
        if (f_hz < p.front() || f_hz > p.back())
            throw Error("trace interpolation outside grid range");
        auto it = std::lower_bound(p.begin(), p.end(), f_hz);
        if (it == p.begin()) return values.front();
        const std::size_t hi = static_cast<std::size_t>(it - p.begin());
        const std::size_t lo = hi - 1;
        const double t = (f_hz - p[lo]) / (p[hi] - p[lo]);
        return values[lo] + t * (values[hi] - values[lo]);
    }

    ScalarTrace resampled(const FrequencyGrid& target) const {
        std::vector<double> v(target.size());
        for (std::size_t i = 0; i < target.size(); ++i) v[i] = interpolate(target[i]);
        return ScalarTrace(target, std::move(v), unit);
    }

    ScalarTrace map(const std::function<double(double)>& fn, Unit new_unit) const {
        std::vector<double> v(values.size());
        for (std::size_t i = 0; i < values.size(); ++i) v[i] = fn(values[i]);
        return ScalarTrace(grid, std::move(v), new_unit);
    }
};

inline ScalarTrace to_linear(const ScalarTrace& t, DbKind kind = DbKind::power) {
    if (t.unit == Unit::linear) return t;
    if (t.unit != Unit::dB)
        throw Error("to_linear expects a dB trace, got " + to_string(t.unit));
    return t.map([kind](double v) { return linear_from_db(v, kind); }, Unit::linear);
}

inline ScalarTrace to_db(const ScalarTrace& t, DbKind kind = DbKind::power) {
    if (t.unit == Unit::dB) return t;
    if (t.unit != Unit::linear)
        throw Error("to_db expects a linear trace, got " + to_string(t.unit));
    return t.map([kind](double v) { return db_from_linear(v, kind); }, Unit::dB);
}

// CSV trace format: one-line unit header, then freq_hz,value rows.
//
//   # unit: dB
//   4.0e9,1.25
//
inline std::string write_trace_csv(const ScalarTrace& t) {
    std::ostringstream os;
    os << "# unit: " << to_string(t.unit) << "\n";
    os << std::setprecision(17);
    for (std::size_t i = 0; i < t.size(); ++i)
        os << t.grid[i] << "," << t.values[i] << "\n";
    return os.str();
}

inline ScalarTrace parse_trace_csv(const std::string& text) {
    std::istringstream is(text);
    std::string line;
    Unit unit = Unit::linear;
    std::vector<double> freqs, vals;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        if (line[first] == '#') {
            auto pos = line.find("unit:");
            if (pos != std::string::npos) {
                std::string tag = line.substr(pos + 5);
                tag.erase(0, tag.find_first_not_of(" \t"));
                tag.erase(tag.find_last_not_of(" \t\r") + 1);
                unit = unit_from_string(tag);
            }
            continue;
        }
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream ls(line);
        double f, v;
        if (!(ls >> f >> v)) {
            // tolerate a column-header row
            if (lineno <= 2) continue;
            throw Error("trace CSV parse error at line " + std::to_string(lineno));
        }
        freqs.push_back(f);
        vals.push_back(v);
    }
    if (freqs.size() < 2) throw Error("trace CSV has fewer than 2 data rows");
    return ScalarTrace(FrequencyGrid(std::move(freqs)), std::move(vals), unit);
}

inline void save_trace_csv(const ScalarTrace& t, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw Error("cannot open " + path + " for writing");
    os << write_trace_csv(t);
}

inline ScalarTrace load_trace_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw Error("cannot open " + path);
    std::ostringstream ss;
    ss << is.rdbuf();
    return parse_trace_csv(ss.str());
}

} // namespace cryorf
