// Temperature-dependent material property tables: thermal conductivity k(T)
// and electrical resistivity rho(T), interpolated log-log between knots.
// The conductivity integral used by the gradient solver is evaluated in
// closed form under the interpolation model (k = c*T^b per segment), so the
// analytic test cases invert exactly.
#pragma once

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "units.hpp"

namespace cryorf {

class MaterialProperties {
public:
    MaterialProperties() = default;
    MaterialProperties(std::string name, std::vector<double> temps,
                       std::vector<double> conductivity, std::vector<double> resistivity)
        : name_(std::move(name)), t_(std::move(temps)), k_(std::move(conductivity)),
          rho_(std::move(resistivity)) {
        if (t_.size() < 2 || t_.size() != k_.size() || t_.size() != rho_.size())
            throw Error("material table needs matching columns with at least 2 rows");
        for (std::size_t i = 0; i < t_.size(); ++i) {
            if (!(t_[i] > 0.0) || !(k_[i] > 0.0) || !(rho_[i] > 0.0))
                throw Error("material table entries must be positive");
            if (i > 0 && !(t_[i] > t_[i - 1]))
                throw Error("material table temperatures must be strictly increasing");
        }
        build_integral_cache();
    }

    const std::string& name() const { return name_; }
    double min_temperature() const { return t_.front(); }
    double max_temperature() const { return t_.back(); }

    bool in_range(double temp_k) const {
        return temp_k >= t_.front() && temp_k <= t_.back();
    }

    double conductivity(double temp_k) const { return interp(k_, temp_k); }
    double resistivity(double temp_k) const { return interp(rho_, temp_k); }

    // Theta(T) = integral of k dT from the table's lowest temperature.
    double conductivity_integral(double temp_k) const {
        const std::size_t s = segment_of(temp_k);
        return theta_[s] + segment_integral(s, t_[s], temp_k);
    }

    // Inverse of the conductivity integral (Theta is strictly increasing).
    double invert_conductivity_integral(double theta) const {
        if (theta < -1e-12 * theta_.back() || theta > theta_.back() * (1.0 + 1e-12))
            throw Error("conductivity integral inversion outside table range for " + name_);
        theta = std::clamp(theta, 0.0, theta_.back());
        auto it = std::upper_bound(theta_.begin(), theta_.end(), theta);
        std::size_t s = (it == theta_.begin()) ? 0 : static_cast<std::size_t>(it - theta_.begin()) - 1;
        s = std::min(s, t_.size() - 2);
        const double rem = theta - theta_[s];
        const double b = exp_k_[s], c = coeff_k_[s];
        // invert integral of c*T^b from t_[s]
        if (std::abs(b + 1.0) > 1e-12) {
            const double p = b + 1.0;
            return std::pow(rem * p / c + std::pow(t_[s], p), 1.0 / p);
        }
        return t_[s] * std::exp(rem / c);
    }

private:
    double interp(const std::vector<double>& col, double temp_k) const {
        if (!in_range(temp_k))
            throw Error("temperature " + std::to_string(temp_k) + " K outside the " + name_ +
                        " property table range [" + std::to_string(t_.front()) + ", " +
                        std::to_string(t_.back()) + "]");
        const std::size_t s = segment_of(temp_k);
        const double lt = std::log(temp_k / t_[s]);
        const double slope = std::log(col[s + 1] / col[s]) / std::log(t_[s + 1] / t_[s]);
        return col[s] * std::exp(slope * lt);
    }

    std::size_t segment_of(double temp_k) const {
        auto it = std::upper_bound(t_.begin(), t_.end(), temp_k);
        std::size_t s = (it == t_.begin()) ? 0 : static_cast<std::size_t>(it - t_.begin()) - 1;
        return std::min(s, t_.size() - 2);
    }

    // On segment s the model is k(T) = c * T^b.
    double segment_integral(std::size_t s, double from, double to) const {
        const double b = exp_k_[s], c = coeff_k_[s];
        if (std::abs(b + 1.0) > 1e-12) {
            const double p = b + 1.0;
            return c / p * (std::pow(to, p) - std::pow(from, p));
        }
        return c * std::log(to / from);
    }

    void build_integral_cache() {
        const std::size_t nseg = t_.size() - 1;
        exp_k_.resize(nseg);
        coeff_k_.resize(nseg);
        theta_.assign(t_.size(), 0.0);
        for (std::size_t s = 0; s < nseg; ++s) {
            exp_k_[s] = std::log(k_[s + 1] / k_[s]) / std::log(t_[s + 1] / t_[s]);
            coeff_k_[s] = k_[s] / std::pow(t_[s], exp_k_[s]);
            theta_[s + 1] = theta_[s] + segment_integral(s, t_[s], t_[s + 1]);
        }
    }

    std::string name_;
    std::vector<double> t_, k_, rho_;
    std::vector<double> exp_k_, coeff_k_, theta_;
};

// CSV rows: temperature_k,k_w_per_m_k,rho_ohm_m
inline MaterialProperties parse_material_csv(const std::string& name, const std::string& text) {
    std::istringstream is(text);
    std::string line;
    std::vector<double> t, k, rho;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream ls(line);
        double a, b, c;
        if (!(ls >> a >> b >> c)) {
            if (lineno == 1) continue; // header row
            throw Error("material CSV parse error at line " + std::to_string(lineno));
        }
        t.push_back(a);
        k.push_back(b);
        rho.push_back(c);
    }
    return MaterialProperties(name, std::move(t), std::move(k), std::move(rho));
}

namespace materials {

// OFHC copper, RRR = 100.  Conductivity from the standard NIST cryogenic fit;
// resistivity from the residual-resistance ratio plus a Bloch-Grueneisen
// phonon term normalized to 1.543e-8 ohm m at 273 K.
inline const MaterialProperties& cu_rrr100() {
    static const MaterialProperties m(
        "cu_rrr100",
        {2,       3,       4,       5,       6,       8,       10,      12,
         14,      16,      18,      20,      25,      30,      35,      40,
         45,      50,      60,      70,      80,      90,      100,     120,
         140,     160,     180,     200,     220,     240,     260,     280,
         296,     310},
        {321.1,   481.7,   642.3,   783.2,   931.7,   1239.0,  1540.0,  1814.0,
         2045.0,  2226.0,  2352.0,  2423.0,  2388.0,  2143.0,  1810.0,  1485.0,
         1213.0,  1005.0,  741.2,   603.6,   529.3,   487.0,   461.5,   434.8,
         422.1,   415.0,   410.3,   407.0,   404.2,   401.9,   399.9,   398.0,
         396.7,   396.3},
        {1.5430e-10, 1.5430e-10, 1.5430e-10, 1.5431e-10, 1.5432e-10, 1.5440e-10,
         1.5461e-10, 1.5506e-10, 1.5595e-10, 1.5752e-10, 1.6011e-10, 1.6412e-10,
         1.8391e-10, 2.2536e-10, 2.9772e-10, 4.0743e-10, 5.5691e-10, 7.4504e-10,
         1.2219e-09, 1.8001e-09, 2.4434e-09, 3.1247e-09, 3.8261e-09, 5.2479e-09,
         6.6634e-09, 8.0586e-09, 9.4314e-09, 1.0783e-08, 1.2117e-08, 1.3436e-08,
         1.4741e-08, 1.6036e-08, 1.7066e-08, 1.7962e-08});
    return m;
}

// Beryllium copper (C17200 class): low-conductivity alloy used for the
// thermally isolating semi-rigid coax runs.
inline const MaterialProperties& becu() {
    static const MaterialProperties m(
        "becu",
        {2,      3,      4,      6,      8,      10,     15,     20,     30,
         40,     50,     70,     80,     100,    120,    150,    200,    250,
         296,    310},
        {0.9,    1.4,    1.9,    2.9,    3.9,    4.8,    7.0,    8.6,    11.8,
         16.0,   20.0,   23.8,   26.0,   31.0,   36.3,   44.0,   60.0,   84.0,
         105.0,  110.0},
        {5.690e-08, 5.690e-08, 5.690e-08, 5.690e-08, 5.690e-08, 5.690e-08,
         5.690e-08, 5.691e-08, 5.698e-08, 5.720e-08, 5.759e-08, 5.883e-08,
         5.958e-08, 6.120e-08, 6.286e-08, 6.534e-08, 6.934e-08, 7.321e-08,
         7.669e-08, 7.774e-08});
    return m;
}

inline const MaterialProperties& by_name(const std::string& name) {
    if (name == "cu_rrr100") return cu_rrr100();
    if (name == "becu") return becu();
    throw Error("unknown bundled material '" + name + "'");
}

} // namespace materials
} // namespace cryorf
