// Cold-attenuator Y-factor pipeline: ENR handling, hot/cold source
// temperatures at the DUT plane, loss-table construction, the Y-factor
// noise-temperature extraction, and the second-stage receiver correction.
#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "thermal.hpp"
#include "trace.hpp"
#include "units.hpp"

namespace cryorf {

// Calibrated noise-source description.  The hot temperature convention is
// T_hot = 290 * 10^(ENR/10) + T_off with the diode off-state at its physical
// temperature.
struct EnrTable {
    ScalarTrace enr_db;               // excess noise ratio vs frequency
    double off_temperature_k = 296.0; // diode physical temperature when off

    const FrequencyGrid& grid() const { return enr_db.grid; }
};

inline ScalarTrace hot_temperature(const EnrTable& enr) {
    std::vector<double> t(enr.enr_db.size());
    for (std::size_t i = 0; i < t.size(); ++i)
        t[i] = constants::noise_reference_k * std::pow(10.0, enr.enr_db.values[i] / 10.0) +
               enr.off_temperature_k;
    return ScalarTrace(enr.grid(), std::move(t), Unit::kelvin);
}

inline ScalarTrace cold_temperature(const EnrTable& enr) {
    return ScalarTrace::constant(enr.grid(), enr.off_temperature_k, Unit::kelvin);
}

// Before/after DUT loss tables with the analyzer's single loss temperature.
struct LossTables {
    ScalarTrace before_db;
    ScalarTrace after_db;
    double t_loss_k = 0.0;

    void validate() const {
        require_same_grid(before_db.grid, after_db.grid, "loss tables");
        for (double v : before_db.values)
            if (v < 0.0) throw Error("before-DUT loss table has negative loss");
        for (double v : after_db.values)
            if (v < 0.0) throw Error("after-DUT loss table has negative loss");
    }
};

// Splits the measured DUT-less system insertion loss between the before and
// after tables (the two cable runs are nominally identical, so the default
// split is 50/50 in dB) and adds the separately measured cold attenuator to
// the before table.
inline LossTables build_loss_tables(const ScalarTrace& system_thru_loss_db,
                                    const ScalarTrace& attenuator_loss_db, double t_loss_k,
                                    double before_fraction = 0.5) {
    require_same_grid(system_thru_loss_db.grid, attenuator_loss_db.grid, "loss tables");
    if (before_fraction < 0.0 || before_fraction > 1.0)
        throw Error("before fraction must be in [0, 1]");
    const std::size_t n = system_thru_loss_db.size();
    std::vector<double> before(n), after(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double sys = system_thru_loss_db.values[i];
        const double att = attenuator_loss_db.values[i];
        if (sys < 0.0 || att < 0.0) throw Error("negative loss in loss-table construction");
        before[i] = before_fraction * sys + att;
        after[i] = (1.0 - before_fraction) * sys;
    }
    LossTables t{ScalarTrace(system_thru_loss_db.grid, std::move(before), Unit::dB),
                 ScalarTrace(system_thru_loss_db.grid, std::move(after), Unit::dB), t_loss_k};
    t.validate();
    return t;
}

// Per-frequency measurement validity markers.
struct FlaggedTrace {
    ScalarTrace trace;
    std::vector<std::uint8_t> valid;    // false where the point is unusable
    std::vector<std::uint8_t> negative; // true where the value is unphysical (< 0)

    bool all_valid() const {
        for (auto v : valid)
            if (!v) return false;
        return true;
    }
};

struct YFactorResult {
    ScalarTrace y;                   // linear ratio
    std::vector<std::uint8_t> valid; // Y > 1
};

inline YFactorResult y_factor(const ScalarTrace& n_hot_linear, const ScalarTrace& n_cold_linear) {
    require_same_grid(n_hot_linear.grid, n_cold_linear.grid, "y_factor");
    if (n_hot_linear.unit != Unit::linear || n_cold_linear.unit != Unit::linear)
        throw Error("y_factor expects linear power traces");
    const std::size_t n = n_hot_linear.size();
    std::vector<double> y(n);
    std::vector<std::uint8_t> valid(n, 1);
    for (std::size_t i = 0; i < n; ++i) {
        if (!(n_cold_linear.values[i] > 0.0))
            throw Error("non-positive cold noise power at " +
                        frequency_label(n_hot_linear.grid[i]));
        y[i] = n_hot_linear.values[i] / n_cold_linear.values[i];
        if (!(y[i] > 1.0)) valid[i] = 0;
    }
    return {ScalarTrace(n_hot_linear.grid, std::move(y), Unit::linear), std::move(valid)};
}

// T_DUT = (T_hot - Y T_cold) / (Y - 1).  Negative results are flagged, not
// clamped; Y <= 1 marks the point invalid rather than failing the run.
inline FlaggedTrace dut_noise_temperature(const YFactorResult& y, const ScalarTrace& t_hot_k,
                                          const ScalarTrace& t_cold_k) {
    require_same_grid(y.y.grid, t_hot_k.grid, "dut_noise_temperature");
    require_same_grid(y.y.grid, t_cold_k.grid, "dut_noise_temperature");
    const std::size_t n = y.y.size();
    FlaggedTrace out;
    out.valid.assign(n, 1);
    out.negative.assign(n, 0);
    std::vector<double> t(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double yi = y.y.values[i];
        if (!y.valid[i] || !(yi > 1.0)) {
            out.valid[i] = 0;
            continue;
        }
        t[i] = (t_hot_k.values[i] - yi * t_cold_k.values[i]) / (yi - 1.0);
        if (t[i] < 0.0) out.negative[i] = 1;
    }
    out.trace = ScalarTrace(y.y.grid, std::move(t), Unit::kelvin);
    return out;
}

enum class InputNoiseMode { full, lumped };

// Noise temperature presented to the DUT input by the source, the cable and
// the cold attenuator:
//   full:    T_in = T_s/(L_A L_c) + (1/L_A)(1 - 1/L_c) T_cable + (1 - 1/L_A) T_A
//   lumped:  T_in = T_s/(L_A L_c) + (1 - 1/(L_A L_c)) T_Loss
// The two agree identically when T_Loss comes from t_loss().
inline double input_noise_temperature(double t_s_k, double l_a, double t_a_k, double l_cable,
                                      double t_cable_k, InputNoiseMode mode) {
    if (l_a < 1.0 || l_cable < 1.0) throw Error("losses must be >= 1 (linear)");
    const double a = 1.0 / (l_a * l_cable);
    if (mode == InputNoiseMode::full)
        return a * t_s_k + (1.0 / l_a) * (1.0 - 1.0 / l_cable) * t_cable_k +
               (1.0 - 1.0 / l_a) * t_a_k;
    if (l_a * l_cable == 1.0) return t_s_k; // lossless: T_Loss carries no weight
    return a * t_s_k + (1.0 - a) * t_loss(l_cable, t_cable_k, l_a, t_a_k);
}

// T_DUT = T_measured - T_receiver / G_DUT (Friis second-stage subtraction;
// T_receiver is everything after the DUT referred to the DUT output).
inline double second_stage_correction(double t_measured_k, double g_dut_linear,
                                      double t_receiver_k) {
    if (!(g_dut_linear > 0.0)) throw Error("DUT gain must be positive");
    return t_measured_k - t_receiver_k / g_dut_linear;
}

inline double noise_figure_from_temperature(double t_k) {
    if (t_k < 0.0) throw Error("noise temperature must be >= 0 for a noise figure");
    return 10.0 * std::log10(1.0 + t_k / constants::noise_reference_k);
}

// ---------------------------------------------------------------------------
// Composed analyzer-equivalent pipeline.

// Result of the source-direct receiver calibration.
struct ReceiverCal {
    ScalarTrace t_receiver_k;    // receiver noise temperature
    ScalarTrace delta_cal_w_hz;  // N_hot - N_cold during calibration, W/Hz
};

inline ScalarTrace dbm_hz_to_w_hz(const ScalarTrace& t) {
    if (t.unit != Unit::dBm_per_Hz) throw Error("expected a dBm/Hz trace");
    return t.map([](double v) { return watts_from_dbm(v); }, Unit::linear);
}

inline ReceiverCal receiver_calibration(const EnrTable& enr, const ScalarTrace& n_hot_dbm_hz,
                                        const ScalarTrace& n_cold_dbm_hz) {
    require_same_grid(enr.grid(), n_hot_dbm_hz.grid, "receiver calibration");
    const auto nh = dbm_hz_to_w_hz(n_hot_dbm_hz);
    const auto nc = dbm_hz_to_w_hz(n_cold_dbm_hz);
    const auto t_hot = hot_temperature(enr);
    const auto t_cold = cold_temperature(enr);
    const auto y = y_factor(nh, nc);
    const auto t_rx = dut_noise_temperature(y, t_hot, t_cold);
    std::vector<double> delta(nh.size());
    for (std::size_t i = 0; i < nh.size(); ++i) {
        if (!t_rx.valid[i])
            throw Error("receiver calibration has Y <= 1 at " +
                        frequency_label(nh.grid[i]));
        delta[i] = nh.values[i] - nc.values[i];
    }
    return {t_rx.trace, ScalarTrace(nh.grid, std::move(delta), Unit::linear)};
}

// Loss corrections with optional per-frequency temperatures.  The scalar
// t_loss_k in LossTables mirrors the analyzer's single-temperature entry; the
// overrides allow an exact model-derived temperature per table.
struct PipelineCorrections {
    LossTables losses;
    std::optional<ScalarTrace> before_temperature_k;
    std::optional<ScalarTrace> after_temperature_k;
    // Cold reference temperature at the DUT input.  When present this is a
    // live thermometer-driven entry (the usual analyzer workflow); otherwise
    // the cold state is derived through the before table like the hot state.
    std::optional<ScalarTrace> cold_reference_k;

    double before_temp(std::size_t i) const {
        return before_temperature_k ? before_temperature_k->values[i] : losses.t_loss_k;
    }
    double after_temp(std::size_t i) const {
        return after_temperature_k ? after_temperature_k->values[i] : losses.t_loss_k;
    }
};

// Hot/cold temperatures presented to the DUT input.  The hot state always
// goes through the static before-DUT loss table; the cold state uses the
// sensor-driven reference when one is configured.
struct DutInputTemperatures {
    ScalarTrace t_hot_k;
    ScalarTrace t_cold_k;
};

inline DutInputTemperatures dut_input_temperatures(const EnrTable& enr,
                                                   const PipelineCorrections& corr) {
    require_same_grid(enr.grid(), corr.losses.before_db.grid, "dut input temperatures");
    if (corr.cold_reference_k)
        require_same_grid(enr.grid(), corr.cold_reference_k->grid, "dut input temperatures");
    const auto t_hot_src = hot_temperature(enr);
    const std::size_t n = enr.grid().size();
    std::vector<double> th(n), tc(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double lb = linear_from_db(corr.losses.before_db.values[i]);
        const double tl = corr.before_temp(i);
        th[i] = t_hot_src.values[i] / lb + (1.0 - 1.0 / lb) * tl;
        tc[i] = corr.cold_reference_k ? corr.cold_reference_k->values[i]
                                      : enr.off_temperature_k / lb + (1.0 - 1.0 / lb) * tl;
    }
    return {ScalarTrace(enr.grid(), std::move(th), Unit::kelvin),
            ScalarTrace(enr.grid(), std::move(tc), Unit::kelvin)};
}

struct NoiseResult {
    FlaggedTrace t_dut_k;     // corrected DUT noise temperature
    ScalarTrace gain_db;      // extracted DUT gain
    ScalarTrace t_sys_k;      // before second-stage correction
    ScalarTrace y;            // measured Y factor
    DutInputTemperatures dut_input;
    ScalarTrace noise_figure_db() const {
        return t_dut_k.trace.map(
            [](double t) { return noise_figure_from_temperature(std::max(0.0, t)); }, Unit::dB);
    }
};

// Full cold-attenuator Y-factor measurement reduction.
inline NoiseResult run_y_factor_pipeline(const EnrTable& enr, const ReceiverCal& rx,
                                         const ScalarTrace& n_hot_dbm_hz,
                                         const ScalarTrace& n_cold_dbm_hz,
                                         const PipelineCorrections& corr) {
    corr.losses.validate();
    require_same_grid(enr.grid(), n_hot_dbm_hz.grid, "y-factor pipeline");
    require_same_grid(enr.grid(), n_cold_dbm_hz.grid, "y-factor pipeline");
    require_same_grid(enr.grid(), corr.losses.before_db.grid, "y-factor pipeline");
    require_same_grid(enr.grid(), rx.t_receiver_k.grid, "y-factor pipeline");

    const auto nh = dbm_hz_to_w_hz(n_hot_dbm_hz);
    const auto nc = dbm_hz_to_w_hz(n_cold_dbm_hz);
    const auto yres = y_factor(nh, nc);
    const auto input = dut_input_temperatures(enr, corr);
    auto t_sys = dut_noise_temperature(yres, input.t_hot_k, input.t_cold_k);

    const std::size_t n = nh.size();
    std::vector<double> gain_db(n), t_dut(n);
    std::vector<std::uint8_t> valid = t_sys.valid, negative(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        const double lb = linear_from_db(corr.losses.before_db.values[i]);
        const double la = linear_from_db(corr.losses.after_db.values[i]);
        const double g_chain = (nh.values[i] - nc.values[i]) / rx.delta_cal_w_hz.values[i];
        if (!(g_chain > 0.0)) {
            // hot/cold difference buried in measurement noise; unusable point
            valid[i] = 0;
            gain_db[i] = -300.0;
            continue;
        }
        const double g_dut = g_chain * lb * la;
        gain_db[i] = db_from_linear(g_dut);
        if (!valid[i]) continue;
        const double t_second = (la - 1.0) * corr.after_temp(i) +
                                rx.t_receiver_k.values[i] * la;
        t_dut[i] = second_stage_correction(t_sys.trace.values[i], g_dut, t_second);
        if (t_dut[i] < 0.0) negative[i] = 1;
    }

    NoiseResult out;
    out.t_dut_k = {ScalarTrace(nh.grid, std::move(t_dut), Unit::kelvin), std::move(valid),
                   std::move(negative)};
    out.gain_db = ScalarTrace(nh.grid, std::move(gain_db), Unit::dB);
    out.t_sys_k = t_sys.trace;
    out.y = yres.y;
    out.dut_input = input;
    return out;
}

} // namespace cryorf
