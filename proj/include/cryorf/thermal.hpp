// Distributed cable thermal-noise model: steady-state conduction gradient
// along each coax section, per-element loss allocation, input-referred noise
// integration of the attenuator chain, and the lumped single-temperature fit.
#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "materials.hpp"
#include "trace.hpp"

namespace cryorf {

struct CableSection {
    MaterialProperties material;
    double length_m = 0.0;
    double hot_end_k = 0.0;
    double cold_end_k = 0.0;
    bool signal_enters_hot = true; // physical orientation along the signal path
    ScalarTrace insertion_loss_db; // total section loss vs frequency, dB >= 0

    void validate() const {
        if (!(length_m > 0.0)) throw Error("cable section length must be positive");
        if (!(hot_end_k >= cold_end_k))
            throw Error("cable section hot end must be >= cold end");
        if (!material.in_range(hot_end_k) || !material.in_range(cold_end_k))
            throw Error("cable section endpoint outside the " + material.name() +
                        " property table range");
        for (double v : insertion_loss_db.values)
            if (v < 0.0) throw Error("cable section loss must be >= 0 dB");
    }
};

struct CableThermalSpec {
    std::vector<CableSection> sections; // ordered in signal direction
    std::size_t elements_per_section = 1000;

    const FrequencyGrid& grid() const {
        if (sections.empty()) throw Error("cable spec has no sections");
        return sections.front().insertion_loss_db.grid;
    }

    std::size_t total_elements() const { return sections.size() * elements_per_section; }

    void validate() const {
        if (sections.empty()) throw Error("cable spec has no sections");
        if (elements_per_section < 1) throw Error("need at least one element per section");
        for (const auto& s : sections) {
            s.validate();
            require_same_grid(grid(), s.insertion_loss_db.grid, "cable sections");
        }
    }
};

enum class LossWeighting { sqrt_resistivity, uniform_db };

// Steady-state 1-D conduction with constant heat flux: the conductivity
// integral Theta(T) is affine in position, so element midpoint temperatures
// are its inverse at midpoint positions.  Ordered from the signal-entry end.
inline std::vector<double> temperature_profile(const CableSection& section, std::size_t n) {
    if (n < 1) throw Error("temperature profile needs n >= 1");
    section.validate();
    std::vector<double> t(n);
    if (section.hot_end_k == section.cold_end_k) {
        std::fill(t.begin(), t.end(), section.hot_end_k);
        return t;
    }
    const double th_start = section.signal_enters_hot ? section.hot_end_k : section.cold_end_k;
    const double th_end = section.signal_enters_hot ? section.cold_end_k : section.hot_end_k;
    const double theta_start = section.material.conductivity_integral(th_start);
    const double theta_end = section.material.conductivity_integral(th_end);
    for (std::size_t i = 0; i < n; ++i) {
        const double x = (static_cast<double>(i) + 0.5) / static_cast<double>(n);
        t[i] = section.material.invert_conductivity_integral(theta_start +
                                                             x * (theta_end - theta_start));
    }
    return t;
}

// Splits a section's total dB loss across its elements.  Conductor loss
// scales with surface resistance, hence the sqrt(rho(T)) weighting; a
// uniform-in-dB mode is available for sensitivity studies.  Returns weights
// that sum to exactly 1.
inline std::vector<double> distribute_loss_weights(const CableSection& section,
                                                   std::span<const double> element_temps,
                                                   LossWeighting weighting) {
    std::vector<double> w(element_temps.size(), 1.0);
    if (weighting == LossWeighting::sqrt_resistivity)
        for (std::size_t i = 0; i < element_temps.size(); ++i)
            w[i] = std::sqrt(section.material.resistivity(element_temps[i]));
    const double sum = std::accumulate(w.begin(), w.end(), 0.0);
    for (double& x : w) x /= sum;
    return w;
}

// Input-referred noise temperature of a chain of passive attenuators with
// linear losses l_i >= 1 at physical temperatures T_i, ordered from the
// input:  T_eff = sum_i (l_i - 1) T_i prod_{j<i} l_j.
inline double integrated_cable_noise(std::span<const double> loss_linear,
                                     std::span<const double> temps_k) {
    if (loss_linear.size() != temps_k.size())
        throw Error("per-element loss and temperature counts differ");
    double t_eff = 0.0;
    double upstream = 1.0;
    for (std::size_t i = 0; i < loss_linear.size(); ++i) {
        const double l = loss_linear[i];
        if (l < 1.0)
            throw Error("active element in passive cable (loss " + std::to_string(l) + " < 1)");
        t_eff += (l - 1.0) * temps_k[i] * upstream;
        upstream *= l;
    }
    return t_eff;
}

inline double output_referred_cable_noise(std::span<const double> loss_linear,
                                          std::span<const double> temps_k) {
    const double t_in = integrated_cable_noise(loss_linear, temps_k);
    double total = 1.0;
    for (double l : loss_linear) total *= l;
    return t_in / total;
}

// Assembled per-element model of a full cable run.  Element temperatures and
// loss weights are frequency-independent; per-frequency element losses come
// from scaling each section's total dB loss.
class CableNoiseModel {
public:
    explicit CableNoiseModel(const CableThermalSpec& spec,
                             LossWeighting weighting = LossWeighting::sqrt_resistivity)
        : grid_(spec.grid()) {
        spec.validate();
        const std::size_t n = spec.elements_per_section;
        for (const auto& section : spec.sections) {
            const auto temps = temperature_profile(section, n);
            const auto weights = distribute_loss_weights(section, temps, weighting);
            temps_.insert(temps_.end(), temps.begin(), temps.end());
            weights_.insert(weights_.end(), weights.begin(), weights.end());
            section_of_element_.insert(section_of_element_.end(), n, section_loss_db_.size());
            section_loss_db_.push_back(section.insertion_loss_db.values);
        }
    }

    const FrequencyGrid& grid() const { return grid_; }
    const std::vector<double>& element_temperatures() const { return temps_; }
    std::size_t element_count() const { return temps_.size(); }

    std::vector<double> element_losses_linear(std::size_t freq_index) const {
        std::vector<double> l(temps_.size());
        for (std::size_t i = 0; i < temps_.size(); ++i) {
            const double db = weights_[i] * section_loss_db_[section_of_element_[i]][freq_index];
            l[i] = std::pow(10.0, db / 10.0);
        }
        return l;
    }

    double total_loss_db(std::size_t freq_index) const {
        double db = 0.0;
        for (const auto& sec : section_loss_db_) db += sec[freq_index];
        return db;
    }

    ScalarTrace total_loss_db_trace() const {
        std::vector<double> v(grid_.size());
        for (std::size_t i = 0; i < grid_.size(); ++i) v[i] = total_loss_db(i);
        return ScalarTrace(grid_, std::move(v), Unit::dB);
    }

    ScalarTrace total_loss_linear_trace() const {
        return to_linear(total_loss_db_trace());
    }

    // T_eff(f) referred to the cable input (the signal-entry end).
    ScalarTrace effective_noise_input_referred() const {
        std::vector<double> v(grid_.size());
        for (std::size_t i = 0; i < grid_.size(); ++i)
            v[i] = integrated_cable_noise(element_losses_linear(i), temps_);
        return ScalarTrace(grid_, std::move(v), Unit::kelvin);
    }

    ScalarTrace effective_noise_output_referred() const {
        auto t = effective_noise_input_referred();
        for (std::size_t i = 0; i < grid_.size(); ++i)
            t.values[i] /= std::pow(10.0, total_loss_db(i) / 10.0);
        return t;
    }

    // Per-frequency lumped equivalent temperature, T_eff / (L - 1).
    ScalarTrace lumped_equivalent_temperature() const {
        const auto t_eff = effective_noise_input_referred();
        std::vector<double> v(grid_.size());
        for (std::size_t i = 0; i < grid_.size(); ++i) {
            const double l = std::pow(10.0, total_loss_db(i) / 10.0);
            if (l <= 1.0) throw Error("lumped temperature undefined for a lossless point");
            v[i] = t_eff.values[i] / (l - 1.0);
        }
        return ScalarTrace(grid_, std::move(v), Unit::kelvin);
    }

private:
    FrequencyGrid grid_;
    std::vector<double> temps_;
    std::vector<double> weights_;
    std::vector<std::size_t> section_of_element_;
    std::vector<std::vector<double>> section_loss_db_;
};

// Least-squares single-temperature fit of T_eff(f) ~ (L(f) - 1) * T_cable:
//   T_cable = sum (L-1) T_eff / sum (L-1)^2.
inline double fit_lumped_temperature(const ScalarTrace& t_eff_k, const ScalarTrace& l_cable_linear) {
    require_same_grid(t_eff_k.grid, l_cable_linear.grid, "lumped fit");
    if (t_eff_k.unit != Unit::kelvin) throw Error("lumped fit expects T_eff in kelvin");
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < t_eff_k.size(); ++i) {
        const double lm1 = l_cable_linear.values[i] - 1.0;
        if (lm1 < 0.0) throw Error("cable loss below unity in lumped fit");
        num += lm1 * t_eff_k.values[i];
        den += lm1 * lm1;
    }
    if (den == 0.0) throw Error("lumped fit undefined: cable is lossless at every frequency");
    return num / den;
}

// Single equivalent temperature for the combined cable + attenuator loss:
//   T_Loss = [(L_cable - 1) T_cable + L_cable (L_A - 1) T_A] / (L_A L_cable - 1)
inline double t_loss(double l_cable, double t_cable, double l_a, double t_a) {
    if (l_cable < 1.0 || l_a < 1.0) throw Error("losses must be >= 1 (linear)");
    const double den = l_a * l_cable - 1.0;
    if (den == 0.0) throw Error("t_loss undefined when L_A * L_cable = 1");
    return ((l_cable - 1.0) * t_cable + l_cable * (l_a - 1.0) * t_a) / den;
}

// Default geometry of the testbed's coax runs: a room-temperature copper
// cable (1 m), a BeCu drop to the 50 K plate (0.5 m), and a BeCu drop to the
// 4 K plate (0.5 m).  Loss scales as sqrt(f) from a per-meter coefficient.
struct CableLossCoefficients {
    double cu_db_per_m_sqrtghz = 0.35;
    double becu_db_per_m_sqrtghz = 1.5;
};

namespace detail {
inline ScalarTrace sqrt_f_loss(const FrequencyGrid& grid, double db_per_sqrtghz_total) {
    std::vector<double> v(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i)
        v[i] = db_per_sqrtghz_total * std::sqrt(grid[i] / 1e9);
    return ScalarTrace(grid, std::move(v), Unit::dB);
}
} // namespace detail

// Signal direction: room-temperature instrument -> 4 K plate.
inline CableThermalSpec default_input_cable(const FrequencyGrid& grid,
                                            const CableLossCoefficients& c = {},
                                            double warm_k = 296.0, double mid_k = 50.0,
                                            double cold_k = 4.0) {
    CableThermalSpec spec;
    spec.sections.push_back({materials::cu_rrr100(), 1.0, warm_k, warm_k, true,
                             detail::sqrt_f_loss(grid, c.cu_db_per_m_sqrtghz * 1.0)});
    spec.sections.push_back({materials::becu(), 0.5, warm_k, mid_k, true,
                             detail::sqrt_f_loss(grid, c.becu_db_per_m_sqrtghz * 0.5)});
    spec.sections.push_back({materials::becu(), 0.5, mid_k, cold_k, true,
                             detail::sqrt_f_loss(grid, c.becu_db_per_m_sqrtghz * 0.5)});
    return spec;
}

// Signal direction: 4 K plate -> room-temperature instrument (the run the
// analyzer sees; its input is the cold end).
inline CableThermalSpec default_output_cable(const FrequencyGrid& grid,
                                             const CableLossCoefficients& c = {},
                                             double warm_k = 296.0, double mid_k = 50.0,
                                             double cold_k = 4.0) {
    CableThermalSpec spec;
    spec.sections.push_back({materials::becu(), 0.5, mid_k, cold_k, false,
                             detail::sqrt_f_loss(grid, c.becu_db_per_m_sqrtghz * 0.5)});
    spec.sections.push_back({materials::becu(), 0.5, warm_k, mid_k, false,
                             detail::sqrt_f_loss(grid, c.becu_db_per_m_sqrtghz * 0.5)});
    spec.sections.push_back({materials::cu_rrr100(), 1.0, warm_k, warm_k, true,
                             detail::sqrt_f_loss(grid, c.cu_db_per_m_sqrtghz * 1.0)});
    return spec;
}

} // namespace cryorf
