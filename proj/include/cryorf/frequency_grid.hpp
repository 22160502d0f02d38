#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "units.hpp"

namespace cryorf {

// Shared frequency axis.  Strictly increasing, all points positive, at least
// two points.  Traces and networks may be combined arithmetically only when
// their grids are identical; resampling is always explicit.
class FrequencyGrid {
public:
    FrequencyGrid() = default;

    explicit FrequencyGrid(std::vector<double> points_hz) : points_(std::move(points_hz)) {
        validate();
    }

    static FrequencyGrid linspace(double start_hz, double stop_hz, std::size_t n) {
        if (n < 2) throw Error("frequency grid needs at least 2 points");
        std::vector<double> p(n);
        for (std::size_t i = 0; i < n; ++i)
            p[i] = start_hz + (stop_hz - start_hz) * static_cast<double>(i) / static_cast<double>(n - 1);
        return FrequencyGrid(std::move(p));
    }

    const std::vector<double>& points() const { return points_; }
    std::size_t size() const { return points_.size(); }
    double operator[](std::size_t i) const { return points_[i]; }
    double front() const { return points_.front(); }
    double back() const { return points_.back(); }

    bool operator==(const FrequencyGrid& other) const { return points_ == other.points_; }
    bool operator!=(const FrequencyGrid& other) const { return !(*this == other); }

    bool contains(double f_hz) const { return f_hz >= front() && f_hz <= back(); }

    // Index of the nearest grid point.
    std::size_t nearest_index(double f_hz) const {
        std::size_t best = 0;
        double d = std::abs(points_[0] - f_hz);
        for (std::size_t i = 1; i < points_.size(); ++i) {
            const double di = std::abs(points_[i] - f_hz);
            if (di < d) { d = di; best = i; }
        }
        return best;
    }

private:
    void validate() const {
        if (points_.size() < 2) throw Error("frequency grid needs at least 2 points");
        double prev = 0.0;
        for (double f : points_) {
            if (!(f > 0.0)) throw Error("frequency grid points must be positive");
            if (!(f > prev)) throw Error("frequency grid must be strictly increasing");
            prev = f;
        }
    }

    std::vector<double> points_;
};

inline void require_same_grid(const FrequencyGrid& a, const FrequencyGrid& b, const char* what) {
    if (a != b) throw Error(std::string(what) + ": frequency grids differ; resample explicitly");
}

inline std::string frequency_label(double f_hz) {
    return std::to_string(f_hz / 1e9) + " GHz";
}

} // namespace cryorf
