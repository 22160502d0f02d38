// Device figures of merit computed from corrected data: gain flatness, 1 dB
// compression extraction from power sweeps, band compliance against a
// threshold, and calibration repeatability statistics.
#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "trace.hpp"

namespace cryorf {

struct BandSpec {
    double f_low_hz = 0.0;
    double f_high_hz = 0.0;

    void validate() const {
        if (!(f_low_hz > 0.0) || !(f_low_hz < f_high_hz))
            throw Error("band requires 0 < f_low < f_high");
    }

    bool contains(double f_hz) const { return f_hz >= f_low_hz && f_hz <= f_high_hz; }
};

namespace detail {
inline std::vector<std::size_t> band_indices(const FrequencyGrid& grid, const BandSpec& band) {
    band.validate();
    if (band.f_low_hz < grid.front() || band.f_high_hz > grid.back())
        throw Error("band [" + frequency_label(band.f_low_hz) + ", " +
                    frequency_label(band.f_high_hz) + "] extends outside the trace grid");
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < grid.size(); ++i)
        if (band.contains(grid[i])) idx.push_back(i);
    if (idx.empty()) throw Error("no grid points inside the band");
    return idx;
}
} // namespace detail

// Max minus min of the trace over the band, dB.
inline double gain_flatness(const ScalarTrace& gain_db, const BandSpec& band) {
    const auto idx = detail::band_indices(gain_db.grid, band);
    double lo = gain_db.values[idx.front()], hi = lo;
    for (std::size_t i : idx) {
        lo = std::min(lo, gain_db.values[i]);
        hi = std::max(hi, gain_db.values[i]);
    }
    return hi - lo;
}

enum class Relation { below, above };

struct ComplianceResult {
    bool pass = false;
    std::vector<double> violations; // failing grid frequencies, Hz
};

inline ComplianceResult band_compliance(const ScalarTrace& trace_db, double threshold_db,
                                        Relation relation, const BandSpec& band) {
    ComplianceResult r;
    for (std::size_t i : detail::band_indices(trace_db.grid, band)) {
        const double v = trace_db.values[i];
        const bool ok = (relation == Relation::below) ? (v < threshold_db) : (v > threshold_db);
        if (!ok) r.violations.push_back(trace_db.grid[i]);
    }
    r.pass = r.violations.empty();
    return r;
}

// One power sweep at a fixed frequency.
struct PowerSweep {
    double frequency_hz = 0.0;
    std::vector<double> pin_dbm;  // strictly increasing
    std::vector<double> pout_dbm;

    void validate() const {
        if (pin_dbm.size() != pout_dbm.size()) throw Error("power sweep column length mismatch");
        if (pin_dbm.size() < 8) throw Error("power sweep needs at least 8 points");
        for (std::size_t i = 1; i < pin_dbm.size(); ++i)
            if (!(pin_dbm[i] > pin_dbm[i - 1]))
                throw Error("power sweep input powers must be strictly increasing");
    }
};

inline std::string write_power_sweep_csv(const PowerSweep& s) {
    std::ostringstream os;
    os << "# frequency_hz: " << std::setprecision(12) << s.frequency_hz << "\n";
    os << std::setprecision(17);
    for (std::size_t i = 0; i < s.pin_dbm.size(); ++i)
        os << s.pin_dbm[i] << "," << s.pout_dbm[i] << "\n";
    return os.str();
}

inline PowerSweep parse_power_sweep_csv(const std::string& text) {
    std::istringstream is(text);
    std::string line;
    PowerSweep s;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        if (line[first] == '#') {
            if (auto pos = line.find("frequency_hz:"); pos != std::string::npos)
                s.frequency_hz = std::stod(line.substr(pos + 13));
            continue;
        }
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream ls(line);
        double a, b;
        if (!(ls >> a >> b)) {
            if (lineno <= 2) continue;
            throw Error("power sweep CSV parse error at line " + std::to_string(lineno));
        }
        s.pin_dbm.push_back(a);
        s.pout_dbm.push_back(b);
    }
    s.validate();
    return s;
}

struct P1dbOptions {
    double fit_window_low_dbm = -80.0;
    double fit_window_high_dbm = -60.0;
    bool constrain_unit_slope = true; // pure-gain small-signal fit
    double expansion_flag_db = 0.05;  // gain expansion beyond this is flagged
};

struct P1dbResult {
    bool found = false;
    double ip1db_dbm = 0.0;
    double op1db_dbm = 0.0;
    double small_signal_gain_db = 0.0;
    double fit_slope = 1.0;
    bool expansion_flagged = false;
    std::string note;
};

// Projects the small-signal line fitted over the window across the sweep and
// finds where the measured output first stays 1 dB below it.  The deviation
// must hold for all subsequent samples, which rejects single-point noise.
inline P1dbResult extract_p1db(const PowerSweep& sweep, const P1dbOptions& opt = {}) {
    sweep.validate();
    const std::size_t n = sweep.pin_dbm.size();

    std::vector<std::size_t> window;
    for (std::size_t i = 0; i < n; ++i)
        if (sweep.pin_dbm[i] >= opt.fit_window_low_dbm &&
            sweep.pin_dbm[i] <= opt.fit_window_high_dbm)
            window.push_back(i);
    if (window.size() < 3) throw Error("fewer than 3 sweep points inside the fit window");

    P1dbResult r;
    if (opt.constrain_unit_slope) {
        double sum = 0.0;
        for (std::size_t i : window) sum += sweep.pout_dbm[i] - sweep.pin_dbm[i];
        r.small_signal_gain_db = sum / static_cast<double>(window.size());
        r.fit_slope = 1.0;
    } else {
        double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
        for (std::size_t i : window) {
            sx += sweep.pin_dbm[i];
            sy += sweep.pout_dbm[i];
            sxx += sweep.pin_dbm[i] * sweep.pin_dbm[i];
            sxy += sweep.pin_dbm[i] * sweep.pout_dbm[i];
        }
        const double m = static_cast<double>(window.size());
        r.fit_slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
        r.small_signal_gain_db = (sy - r.fit_slope * sx) / m;
    }
    auto line = [&](double pin) {
        return opt.constrain_unit_slope ? pin + r.small_signal_gain_db
                                        : r.fit_slope * pin + r.small_signal_gain_db;
    };

    std::vector<double> deviation(n);
    for (std::size_t i = 0; i < n; ++i) deviation[i] = line(sweep.pin_dbm[i]) - sweep.pout_dbm[i];
    for (double d : deviation)
        if (d < -opt.expansion_flag_db) r.expansion_flagged = true;

    // smallest index from which the deviation stays >= 1 dB
    std::size_t k = n;
    for (std::size_t i = n; i-- > 0;) {
        if (deviation[i] >= 1.0)
            k = i;
        else
            break;
    }
    if (k == n) {
        r.note = "compression never reaches 1 dB within the sweep";
        return r;
    }
    if (k == 0) {
        r.note = "already compressed by 1 dB at the first sweep point";
        return r;
    }
    const double d0 = deviation[k - 1], d1 = deviation[k];
    const double t = (1.0 - d0) / (d1 - d0);
    r.ip1db_dbm = sweep.pin_dbm[k - 1] + t * (sweep.pin_dbm[k] - sweep.pin_dbm[k - 1]);
    r.op1db_dbm = line(r.ip1db_dbm) - 1.0;
    r.found = true;
    return r;
}

struct RepeatabilityResult {
    ScalarTrace mean;
    ScalarTrace two_sigma; // 2x sample standard deviation per frequency
};

inline RepeatabilityResult repeatability_ci(const std::vector<ScalarTrace>& traces) {
    if (traces.size() < 2) throw Error("repeatability needs at least 2 traces");
    const auto& grid = traces.front().grid;
    for (const auto& t : traces) require_same_grid(grid, t.grid, "repeatability");
    const std::size_t n = grid.size();
    const double k = static_cast<double>(traces.size());
    std::vector<double> mean(n, 0.0), two_sigma(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (const auto& t : traces) s += t.values[i];
        mean[i] = s / k;
        double ss = 0.0;
        for (const auto& t : traces) {
            const double d = t.values[i] - mean[i];
            ss += d * d;
        }
        two_sigma[i] = 2.0 * std::sqrt(ss / (k - 1.0));
    }
    return {ScalarTrace(grid, std::move(mean), traces.front().unit),
            ScalarTrace(grid, std::move(two_sigma), traces.front().unit)};
}

} // namespace cryorf
