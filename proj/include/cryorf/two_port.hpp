#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include "frequency_grid.hpp"
#include "trace.hpp"
#include "units.hpp"

namespace cryorf {

using Complex = std::complex<double>;

// One frequency point of a two-port: linear complex S-parameters.
struct SMatrix {
    Complex s11{}, s12{}, s21{}, s22{};

    Complex det() const { return s11 * s22 - s12 * s21; }

    // Largest singular value, from the eigenvalues of S^H S (closed form for 2x2).
    double max_singular_value() const {
        const double a = std::norm(s11) + std::norm(s21);
        const double b = std::norm(s12) + std::norm(s22);
        const Complex c = std::conj(s11) * s12 + std::conj(s21) * s22;
        const double tr = a + b;
        const double disc = std::sqrt(std::max(0.0, (a - b) * (a - b) + 4.0 * std::norm(c)));
        return std::sqrt(std::max(0.0, 0.5 * (tr + disc)));
    }

    bool finite() const {
        for (Complex v : {s11, s12, s21, s22})
            if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
        return true;
    }
};

// Wave cascade (T) matrix with the convention [a1; b1] = T [b2; a2], so that
// cascading a followed by b is the matrix product Ta * Tb.
struct TMatrix {
    Complex t11{}, t12{}, t21{}, t22{};

    TMatrix operator*(const TMatrix& o) const {
        return {t11 * o.t11 + t12 * o.t21, t11 * o.t12 + t12 * o.t22,
                t21 * o.t11 + t22 * o.t21, t21 * o.t12 + t22 * o.t22};
    }

    Complex det() const { return t11 * t22 - t12 * t21; }

    TMatrix inverse() const {
        const Complex d = det();
        if (std::abs(d) == 0.0) throw Error("singular T-matrix");
        return {t22 / d, -t12 / d, -t21 / d, t11 / d};
    }
};

inline TMatrix t_from_s(const SMatrix& s) {
    if (std::abs(s.s21) == 0.0)
        throw Error("S21 = 0: transfer-parameter conversion is singular");
    const Complex inv = 1.0 / s.s21;
    return {inv, -s.s22 * inv, s.s11 * inv, -s.det() * inv};
}

inline SMatrix s_from_t(const TMatrix& t) {
    if (std::abs(t.t11) == 0.0)
        throw Error("T11 = 0: cannot convert back to S-parameters");
    const Complex inv = 1.0 / t.t11;
    return {t.t21 * inv, t.det() * inv, inv, -t.t12 * inv};
}

// Per-frequency 2x2 complex S-parameter matrices on a shared grid.
// Reference impedance is 50 ohm throughout.
class TwoPortNetwork {
public:
    static constexpr double kReferenceOhms = 50.0;

    TwoPortNetwork() = default;
    TwoPortNetwork(FrequencyGrid grid, std::vector<SMatrix> s)
        : grid_(std::move(grid)), s_(std::move(s)) {
        if (grid_.size() != s_.size())
            throw Error("network point count does not match grid length");
        for (std::size_t i = 0; i < s_.size(); ++i)
            if (!s_[i].finite())
                throw Error("non-finite S-parameter at " + frequency_label(grid_[i]));
    }

    const FrequencyGrid& grid() const { return grid_; }
    std::size_t size() const { return s_.size(); }
    const SMatrix& at(std::size_t i) const { return s_[i]; }
    const std::vector<SMatrix>& points() const { return s_; }

    static std::string frequency_label(double f_hz) { return cryorf::frequency_label(f_hz); }

    static TwoPortNetwork ideal_thru(const FrequencyGrid& g) {
        return TwoPortNetwork(g, std::vector<SMatrix>(g.size(), SMatrix{0.0, 1.0, 1.0, 0.0}));
    }

    // Matched reciprocal element with transmission coefficient s21(f).
    static TwoPortNetwork matched(const FrequencyGrid& g, const std::vector<Complex>& s21) {
        std::vector<SMatrix> pts(g.size());
        for (std::size_t i = 0; i < g.size(); ++i) pts[i] = {0.0, s21[i], s21[i], 0.0};
        return TwoPortNetwork(g, std::move(pts));
    }

    static TwoPortNetwork attenuator(const FrequencyGrid& g, double loss_db) {
        const Complex s21 = linear_from_db(-loss_db, DbKind::amplitude);
        return matched(g, std::vector<Complex>(g.size(), s21));
    }

    bool is_passive(double tol = 1e-9) const {
        for (const auto& m : s_)
            if (m.max_singular_value() > 1.0 + tol) return false;
        return true;
    }

    ScalarTrace magnitude_db(Complex SMatrix::*entry, double floor_db = -300.0) const {
        std::vector<double> v(size());
        for (std::size_t i = 0; i < size(); ++i) {
            const double mag = std::abs(s_[i].*entry);
            v[i] = (mag > 0.0) ? std::max(floor_db, db_from_linear(mag, DbKind::amplitude))
                               : floor_db;
        }
        return ScalarTrace(grid_, std::move(v), Unit::dB);
    }

    ScalarTrace s21_db() const { return magnitude_db(&SMatrix::s21); }
    ScalarTrace s11_db() const { return magnitude_db(&SMatrix::s11); }
    ScalarTrace s22_db() const { return magnitude_db(&SMatrix::s22); }
    ScalarTrace s12_db() const { return magnitude_db(&SMatrix::s12); }

    // Linear interpolation on (real, imaginary) parts; no extrapolation.
    TwoPortNetwork resampled(const FrequencyGrid& target) const {
        const auto& p = grid_.points();
        if (target.front() < p.front() || target.back() > p.back())
            throw Error("network resampling outside source grid range");
        std::vector<SMatrix> out(target.size());
        for (std::size_t i = 0; i < target.size(); ++i) {
            const double f = target[i];
            auto it = std::lower_bound(p.begin(), p.end(), f);
            std::size_t hi = (it == p.begin()) ? 1 : static_cast<std::size_t>(it - p.begin());
            if (hi >= p.size()) hi = p.size() - 1;
            const std::size_t lo = hi - 1;
            const double t = (f - p[lo]) / (p[hi] - p[lo]);
            auto lerp = [t](Complex a, Complex b) { return a + t * (b - a); };
            out[i] = {lerp(s_[lo].s11, s_[hi].s11), lerp(s_[lo].s12, s_[hi].s12),
                      lerp(s_[lo].s21, s_[hi].s21), lerp(s_[lo].s22, s_[hi].s22)};
        }
        return TwoPortNetwork(target, std::move(out));
    }

private:
    FrequencyGrid grid_;
    std::vector<SMatrix> s_;
};

// Cascade a followed by b via transfer parameters.
inline TwoPortNetwork cascade(const TwoPortNetwork& a, const TwoPortNetwork& b) {
    require_same_grid(a.grid(), b.grid(), "cascade");
    std::vector<SMatrix> out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        try {
            out[i] = s_from_t(t_from_s(a.at(i)) * t_from_s(b.at(i)));
        } catch (const Error& e) {
            throw Error(std::string(e.what()) + " at " +
                        TwoPortNetwork::frequency_label(a.grid()[i]));
        }
    }
    return TwoPortNetwork(a.grid(), std::move(out));
}

inline TwoPortNetwork cascade(const TwoPortNetwork& a, const TwoPortNetwork& b,
                              const TwoPortNetwork& c) {
    return cascade(cascade(a, b), c);
}

// Reflection seen looking into port 1 when port 2 is terminated with gamma.
inline Complex input_reflection(const SMatrix& s, Complex gamma) {
    return s.s11 + s.s12 * s.s21 * gamma / (1.0 - s.s22 * gamma);
}

// Reflection seen looking into port 2 when port 1 is terminated with gamma.
inline Complex output_reflection(const SMatrix& s, Complex gamma) {
    return s.s22 + s.s12 * s.s21 * gamma / (1.0 - s.s11 * gamma);
}

} // namespace cryorf
