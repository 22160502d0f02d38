// Virtual cryostat testbed: synthetic DUTs, fixture networks with the switch
// matrix and TRL standards, a calibrated noise source, and virtual VNA/SA
// instruments for the two measurement configurations.  Every measurement is
// deterministic for a fixed (scenario, seed): each call draws from an
// independent substream derived from the seed and a call counter.
#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "metrics.hpp"
#include "noise.hpp"
#include "rng.hpp"
#include "thermal.hpp"
#include "touchstone.hpp"
#include "trl.hpp"
#include "two_port.hpp"

namespace cryorf {

// Piecewise-linear device parameter vs frequency, clamped at the ends.
struct ParamTable {
    std::vector<double> freq_hz;
    std::vector<double> values;

    static ParamTable flat(double v) { return {{1.0, 1e12}, {v, v}}; }

    double at(double f_hz) const {
        if (freq_hz.empty()) throw Error("empty parameter table");
        if (freq_hz.size() != values.size()) throw Error("parameter table length mismatch");
        if (f_hz <= freq_hz.front()) return values.front();
        if (f_hz >= freq_hz.back()) return values.back();
        auto it = std::upper_bound(freq_hz.begin(), freq_hz.end(), f_hz);
        const std::size_t hi = static_cast<std::size_t>(it - freq_hz.begin());
        const std::size_t lo = hi - 1;
        const double t = (f_hz - freq_hz[lo]) / (freq_hz[hi] - freq_hz[lo]);
        return values[lo] + t * (values[hi] - values[lo]);
    }

    ScalarTrace sampled(const FrequencyGrid& grid, Unit unit) const {
        std::vector<double> v(grid.size());
        for (std::size_t i = 0; i < grid.size(); ++i) v[i] = at(grid[i]);
        return ScalarTrace(grid, std::move(v), unit);
    }
};

struct CompressionSpec {
    enum class Model { none, rapp, hard };
    Model model = Model::none;
    double saturation_dbm = 0.0; // output power at hard saturation
    double smoothness = 2.0;     // rapp knee sharpness
};

struct BiasConditions {
    double vd_v = 0.0;
    double id_ma = 0.0;
    double vg_v = 0.0;
};

// Synthetic device truth: gain and added noise spectra, port matches,
// reverse isolation and an output-saturation model.
struct DutModel {
    std::string name;
    ParamTable gain_db;
    ParamTable noise_temperature_k;
    ParamTable input_match_db;      // 20 log10 |Gamma_in|, negative
    ParamTable output_match_db;
    ParamTable reverse_isolation_db;
    double delay_ps = 60.0;         // transmission phase slope
    double match_delay_ps = 35.0;   // reflection phase slope
    CompressionSpec compression;
    BiasConditions bias;

    void validate(const FrequencyGrid& grid) const {
        for (std::size_t i = 0; i < grid.size(); ++i) {
            const double f = grid[i];
            if (noise_temperature_k.at(f) < 0.0) throw Error("DUT noise temperature < 0");
            if (input_match_db.at(f) >= 0.0 || output_match_db.at(f) >= 0.0)
                throw Error("DUT reflection magnitude must stay below 0 dB");
        }
    }

    SMatrix small_signal(double f_hz) const {
        const double w = 2.0 * M_PI * f_hz;
        SMatrix m;
        m.s21 = std::polar(linear_from_db(gain_db.at(f_hz), DbKind::amplitude),
                           -w * delay_ps * 1e-12);
        m.s12 = std::polar(linear_from_db(reverse_isolation_db.at(f_hz), DbKind::amplitude),
                           -w * delay_ps * 1e-12);
        m.s11 = std::polar(linear_from_db(input_match_db.at(f_hz), DbKind::amplitude),
                           -2.0 * w * match_delay_ps * 1e-12);
        m.s22 = std::polar(linear_from_db(output_match_db.at(f_hz), DbKind::amplitude),
                           -2.0 * w * match_delay_ps * 1.15e-12);
        return m;
    }

    TwoPortNetwork small_signal_network(const FrequencyGrid& grid) const {
        std::vector<SMatrix> pts(grid.size());
        for (std::size_t i = 0; i < grid.size(); ++i) pts[i] = small_signal(grid[i]);
        return TwoPortNetwork(grid, std::move(pts));
    }

    // Large-signal output power at one frequency (device planes).
    double pout_dbm(double f_hz, double pin_dbm) const {
        const double g = gain_db.at(f_hz);
        switch (compression.model) {
            case CompressionSpec::Model::none:
                return pin_dbm + g;
            case CompressionSpec::Model::hard:
                return std::min(pin_dbm + g, compression.saturation_dbm);
            case CompressionSpec::Model::rapp: {
                const double s = compression.smoothness;
                const double x = pin_dbm + g - compression.saturation_dbm;
                // log10(1 + 10^u) = max(u,0) + log10(1 + 10^-|u|), overflow-safe
                const double u = s * x / 10.0;
                const double lse = std::max(u, 0.0) + std::log10(1.0 + std::pow(10.0, -std::abs(u)));
                return pin_dbm + g - (10.0 / s) * lse;
            }
        }
        return pin_dbm + g;
    }
};

struct TrlStandardsSpec {
    double line_delay_ps = 20.0;
    double line_loss_db_at_10ghz = 0.3; // scales as sqrt(f)
    double reflect_delay_ps = 0.0;      // offset of the short
    ReflectKind reflect_kind = ReflectKind::SHORT;
};

struct EtalonSpec {
    bool enabled = false;
    double amplitude_db = 0.05;
    double period_ghz = 0.35;
};

enum class ColdSensor { potted, adjacent };

struct TestbedConfig {
    FrequencyGrid grid;
    CableLossCoefficients cable_loss;
    double cable_warm_k = 296.0;
    double cable_mid_k = 50.0;
    double cable_cold_k = 4.0;
    std::size_t elements_per_section = 1000;
    double cable_delay_ps = 5000.0;

    double attenuator_db = 30.0;
    double attenuator_potted_k = 3.2;   // potted sensor; treated as the true value
    double attenuator_adjacent_k = 2.88; // sensor near the LNA body
    ColdSensor cold_sensor = ColdSensor::potted;

    EnrTable noise_source;
    double receiver_noise_k = 300.0;
    double receiver_gain_db = 0.0;
    double vna_noise_db = 0.01; // trace noise, dB-equivalent sigma
    double sa_noise_db = 0.01;  // power-density noise, dB sigma
    double base_temperature_k = 2.74;

    TrlStandardsSpec trl;
    EtalonSpec etalon;
    std::uint64_t seed = 1;

    double attenuator_sensor_reading_k() const {
        return cold_sensor == ColdSensor::potted ? attenuator_potted_k : attenuator_adjacent_k;
    }

    void validate() const {
        if (attenuator_db < 0.0) throw Error("attenuator loss must be >= 0 dB");
        for (double t : {attenuator_potted_k, attenuator_adjacent_k, base_temperature_k,
                         cable_warm_k, cable_mid_k, cable_cold_k})
            if (!(t > 0.0)) throw Error("testbed temperatures must be positive");
    }
};

enum class SwitchPort { THRU, REFLECT, LINE, DUT, SPARE };

// Both SP6T switches must select the same two-port path.
struct SwitchState {
    SwitchPort input_side = SwitchPort::THRU;
    SwitchPort output_side = SwitchPort::THRU;

    SwitchPort selected() const {
        if (input_side != output_side)
            throw Error("inconsistent switch state: the two SP6T switches disagree");
        if (input_side == SwitchPort::SPARE) throw Error("spare switch port is not populated");
        return input_side;
    }

    static SwitchState both(SwitchPort p) { return {p, p}; }
};

enum class NoiseSourceState { hot, cold };

struct Scenario {
    int schema = 1;
    std::string name;
    TestbedConfig testbed;
    DutModel dut;

    void validate() const {
        testbed.validate();
        dut.validate(testbed.grid);
        require_same_grid(testbed.grid, testbed.noise_source.grid(), "scenario noise source");
    }
};

class VirtualTestbed {
public:
    explicit VirtualTestbed(Scenario scenario)
        : sc_(std::move(scenario)),
          input_cable_spec_(default_input_cable(sc_.testbed.grid, sc_.testbed.cable_loss,
                                                sc_.testbed.cable_warm_k, sc_.testbed.cable_mid_k,
                                                sc_.testbed.cable_cold_k)),
          output_cable_spec_(default_output_cable(sc_.testbed.grid, sc_.testbed.cable_loss,
                                                  sc_.testbed.cable_warm_k, sc_.testbed.cable_mid_k,
                                                  sc_.testbed.cable_cold_k)) {
        sc_.validate();
        input_cable_spec_.elements_per_section = sc_.testbed.elements_per_section;
        output_cable_spec_.elements_per_section = sc_.testbed.elements_per_section;
        input_model_.emplace(input_cable_spec_);
        output_model_.emplace(output_cable_spec_);
        build_fixtures();
        cache_noise_chain();
    }

    const Scenario& scenario() const { return sc_; }
    const FrequencyGrid& grid() const { return sc_.testbed.grid; }
    const CableNoiseModel& input_cable() const { return *input_model_; }
    const CableNoiseModel& output_cable() const { return *output_model_; }
    const TwoPortNetwork& input_fixture() const { return fixture_input_; }
    const TwoPortNetwork& output_fixture() const { return fixture_output_; }
    std::uint64_t call_count() const { return calls_; }

    // ----- VNA configuration ------------------------------------------------

    TwoPortNetwork vna_measure(SwitchState state) {
        const SwitchPort port = state.selected();
        TwoPortNetwork element = TwoPortNetwork::ideal_thru(grid());
        switch (port) {
            case SwitchPort::THRU: break;
            case SwitchPort::LINE: element = line_standard(); break;
            case SwitchPort::DUT: element = sc_.dut.small_signal_network(grid()); break;
            case SwitchPort::REFLECT:
                throw Error("REFLECT is a one-port standard; use vna_measure_reflection");
            case SwitchPort::SPARE: break; // unreachable
        }
        auto raw = cascade(fixture_input_, element, fixture_output_);
        return add_trace_noise(raw, next_stream());
    }

    // Raw reflection of the REFLECT standard seen from the given port (1 or 2).
    ReflectionTrace vna_measure_reflection(int port) {
        if (port != 1 && port != 2) throw Error("reflection port must be 1 or 2");
        auto stream = next_stream();
        const double sigma = sc_.testbed.vna_noise_db * constants::ln10 / 20.0;
        std::vector<Complex> g(grid().size());
        for (std::size_t i = 0; i < grid().size(); ++i) {
            const Complex gamma = reflect_gamma(grid()[i]);
            const Complex raw = (port == 1) ? input_reflection(fixture_input_.at(i), gamma)
                                            : output_reflection(fixture_output_.at(i), gamma);
            g[i] = raw * (1.0 + sigma * stream.complex_normal());
        }
        return ReflectionTrace(grid(), std::move(g));
    }

    TrlStandardsMeasurement measure_trl_standards() {
        TrlStandardsMeasurement m;
        m.m_thru = vna_measure(SwitchState::both(SwitchPort::THRU));
        m.m_line = vna_measure(SwitchState::both(SwitchPort::LINE));
        m.m_reflect_p1 = vna_measure_reflection(1);
        m.m_reflect_p2 = vna_measure_reflection(2);
        m.reflect_kind = sc_.testbed.trl.reflect_kind;
        return m;
    }

    // ----- SA (noise) configuration ------------------------------------------

    // Noise power density at the analyzer, through the full chain:
    // source -> input cable -> cold attenuator -> (DUT | thru) -> output
    // cable -> receiver.
    ScalarTrace sa_measure(NoiseSourceState source, bool dut_installed) {
        auto stream = next_stream();
        std::vector<double> p(grid().size());
        const auto t_hot = hot_temperature(sc_.testbed.noise_source);
        const double g_sa = linear_from_db(sc_.testbed.receiver_gain_db);
        for (std::size_t i = 0; i < grid().size(); ++i) {
            const double f = grid()[i];
            double t = (source == NoiseSourceState::hot)
                           ? t_hot.values[i]
                           : sc_.testbed.noise_source.off_temperature_k;
            t = t / in_loss_[i] + in_added_out_[i];
            const double l_a = linear_from_db(sc_.testbed.attenuator_db);
            t = t / l_a + (1.0 - 1.0 / l_a) * sc_.testbed.attenuator_potted_k;
            if (dut_installed)
                t = linear_from_db(sc_.dut.gain_db.at(f)) *
                    (t + sc_.dut.noise_temperature_k.at(f));
            t = t / out_loss_[i] + out_added_out_[i];
            t += sc_.testbed.receiver_noise_k;
            const double density = constants::boltzmann_w_per_hz_k * t * g_sa;
            p[i] = dbm_from_watts(density) + sc_.testbed.sa_noise_db * stream.normal();
        }
        return ScalarTrace(grid(), std::move(p), Unit::dBm_per_Hz);
    }

    // Receiver calibration configuration: noise source connected directly to
    // the analyzer input.
    ScalarTrace sa_receiver_cal(NoiseSourceState source) {
        auto stream = next_stream();
        std::vector<double> p(grid().size());
        const auto t_hot = hot_temperature(sc_.testbed.noise_source);
        const double g_sa = linear_from_db(sc_.testbed.receiver_gain_db);
        for (std::size_t i = 0; i < grid().size(); ++i) {
            const double t = ((source == NoiseSourceState::hot)
                                  ? t_hot.values[i]
                                  : sc_.testbed.noise_source.off_temperature_k) +
                             sc_.testbed.receiver_noise_k;
            p[i] = dbm_from_watts(constants::boltzmann_w_per_hz_k * t * g_sa) +
                   sc_.testbed.sa_noise_db * stream.normal();
        }
        return ScalarTrace(grid(), std::move(p), Unit::dBm_per_Hz);
    }

    // Calibrated power sweep at the DUT reference planes.  The fixture loss
    // on both sides is present in the raw sweep and removed with the known
    // calibration, so the returned sweep is the device curve plus noise.
    PowerSweep power_sweep(double f_hz, double pin_lo_dbm = -80.0, double pin_hi_dbm = -20.0,
                           double step_db = 1.0) {
        auto stream = next_stream();
        PowerSweep s;
        s.frequency_hz = f_hz;
        for (double pin = pin_lo_dbm; pin <= pin_hi_dbm + 1e-9; pin += step_db) {
            s.pin_dbm.push_back(pin);
            s.pout_dbm.push_back(sc_.dut.pout_dbm(f_hz, pin) +
                                 sc_.testbed.sa_noise_db * stream.normal());
        }
        return s;
    }

    // ----- model-derived correction data -----------------------------------

    ScalarTrace attenuator_loss_trace() const {
        return ScalarTrace::constant(grid(), sc_.testbed.attenuator_db, Unit::dB);
    }

    // Per-frequency loss temperatures for the before/after tables, derived
    // from the same thermal model the forward simulation uses.  The static
    // tables are characterized once with the attenuator's own (potted)
    // sensor; the live cold reference follows whichever sensor the scenario
    // selects, which is how a sensor bias reaches the result with the
    // Y/(Y-1) slope rather than unity.
    PipelineCorrections model_corrections(const ScalarTrace& system_cable_loss_db) const {
        PipelineCorrections corr;
        corr.losses = build_loss_tables(system_cable_loss_db, attenuator_loss_trace(),
                                        lumped_t_loss());

        const auto t_cable_in = input_cable().lumped_equivalent_temperature();
        const auto t_cable_out = output_cable().lumped_equivalent_temperature();
        const auto l_in = input_cable().total_loss_linear_trace();
        const double l_a = linear_from_db(sc_.testbed.attenuator_db);
        const double t_a_static = sc_.testbed.attenuator_potted_k;
        const double t_a_live = sc_.testbed.attenuator_sensor_reading_k();
        std::vector<double> before(grid().size()), after(grid().size()), cold(grid().size());
        for (std::size_t i = 0; i < grid().size(); ++i) {
            before[i] = t_loss(l_in.values[i], t_cable_in.values[i], l_a, t_a_static);
            after[i] = t_cable_out.values[i];
            cold[i] = input_noise_temperature(sc_.testbed.noise_source.off_temperature_k, l_a,
                                              t_a_live, l_in.values[i], t_cable_in.values[i],
                                              InputNoiseMode::full);
        }
        corr.before_temperature_k = ScalarTrace(grid(), std::move(before), Unit::kelvin);
        corr.after_temperature_k = ScalarTrace(grid(), std::move(after), Unit::kelvin);
        corr.cold_reference_k = ScalarTrace(grid(), std::move(cold), Unit::kelvin);
        return corr;
    }

    // Single-temperature (analyzer-style) correction: the lumped cable fit
    // combined with the attenuator through the equivalent-temperature formula
    // at the band-center cable loss.
    double lumped_t_loss() const {
        const double t_cable = fit_lumped_temperature(output_cable().effective_noise_input_referred(),
                                                      output_cable().total_loss_linear_trace());
        const std::size_t mid = grid().size() / 2;
        const double l_c = std::pow(10.0, input_cable().total_loss_db(mid) / 10.0);
        return t_loss(l_c, t_cable, linear_from_db(sc_.testbed.attenuator_db),
                      sc_.testbed.attenuator_potted_k);
    }

    TwoPortNetwork line_standard() const {
        std::vector<Complex> s21(grid().size());
        for (std::size_t i = 0; i < grid().size(); ++i) {
            const double f = grid()[i];
            const double alpha_db = sc_.testbed.trl.line_loss_db_at_10ghz * std::sqrt(f / 10e9);
            s21[i] = std::polar(linear_from_db(-alpha_db, DbKind::amplitude),
                                -2.0 * M_PI * f * sc_.testbed.trl.line_delay_ps * 1e-12);
        }
        return TwoPortNetwork::matched(grid(), s21);
    }

    Complex reflect_gamma(double f_hz) const {
        const double sign = (sc_.testbed.trl.reflect_kind == ReflectKind::SHORT) ? -1.0 : 1.0;
        return sign * std::polar(1.0, -2.0 * 2.0 * M_PI * f_hz *
                                          sc_.testbed.trl.reflect_delay_ps * 1e-12);
    }

private:
    RandomStream next_stream() {
        return RandomStream::substream(sc_.testbed.seed, 0x7465737462ULL, calls_++);
    }

    TwoPortNetwork add_trace_noise(const TwoPortNetwork& n, RandomStream stream) const {
        const double sigma = sc_.testbed.vna_noise_db * constants::ln10 / 20.0;
        if (sigma == 0.0) return n;
        std::vector<SMatrix> pts = n.points();
        for (auto& p : pts)
            for (Complex* e : {&p.s11, &p.s12, &p.s21, &p.s22})
                *e *= 1.0 + sigma * stream.complex_normal();
        return TwoPortNetwork(n.grid(), std::move(pts));
    }

    TwoPortNetwork cable_two_port(const CableNoiseModel& model, double delay_ps) const {
        std::vector<Complex> s21(grid().size());
        for (std::size_t i = 0; i < grid().size(); ++i) {
            double mag_db = -model.total_loss_db(i);
            if (sc_.testbed.etalon.enabled)
                mag_db += sc_.testbed.etalon.amplitude_db *
                          std::sin(grid()[i] / (sc_.testbed.etalon.period_ghz * 1e9) * 2.0 * M_PI);
            s21[i] = std::polar(linear_from_db(mag_db, DbKind::amplitude),
                                -2.0 * M_PI * grid()[i] * delay_ps * 1e-12);
        }
        return TwoPortNetwork::matched(grid(), s21);
    }

    void build_fixtures() {
        const auto att = TwoPortNetwork::attenuator(grid(), sc_.testbed.attenuator_db);
        fixture_input_ = cascade(cable_two_port(*input_model_, sc_.testbed.cable_delay_ps), att);
        fixture_output_ = cable_two_port(*output_model_, sc_.testbed.cable_delay_ps);
    }

    void cache_noise_chain() {
        const std::size_t n = grid().size();
        in_loss_.resize(n);
        in_added_out_.resize(n);
        out_loss_.resize(n);
        out_added_out_.resize(n);
        const auto in_eff = input_model_->effective_noise_input_referred();
        const auto out_eff = output_model_->effective_noise_input_referred();
        for (std::size_t i = 0; i < n; ++i) {
            in_loss_[i] = std::pow(10.0, input_model_->total_loss_db(i) / 10.0);
            out_loss_[i] = std::pow(10.0, output_model_->total_loss_db(i) / 10.0);
            in_added_out_[i] = in_eff.values[i] / in_loss_[i];
            out_added_out_[i] = out_eff.values[i] / out_loss_[i];
        }
    }

    Scenario sc_;
    CableThermalSpec input_cable_spec_, output_cable_spec_;
    std::optional<CableNoiseModel> input_model_, output_model_;
    TwoPortNetwork fixture_input_, fixture_output_;
    std::vector<double> in_loss_, in_added_out_, out_loss_, out_added_out_;
    std::uint64_t calls_ = 0;
};

// --- scenario JSON ----------------------------------------------------------

namespace detail {

inline ParamTable param_table_from_json(const nlohmann::json& j) {
    if (j.is_number()) return ParamTable::flat(j.get<double>());
    ParamTable t;
    for (double f : j.at("freq_ghz")) t.freq_hz.push_back(f * 1e9);
    for (double v : j.at("values")) t.values.push_back(v);
    if (t.freq_hz.size() != t.values.size() || t.freq_hz.empty())
        throw Error("parameter table freq_ghz/values length mismatch");
    return t;
}

inline nlohmann::json param_table_to_json(const ParamTable& t) {
    nlohmann::json f = nlohmann::json::array(), v = nlohmann::json::array();
    for (double x : t.freq_hz) f.push_back(x / 1e9);
    for (double x : t.values) v.push_back(x);
    return {{"freq_ghz", f}, {"values", v}};
}

} // namespace detail

inline Scenario scenario_from_json(const nlohmann::json& j) {
    if (j.value("schema", 0) != 1)
        throw Error("unsupported scenario schema (expected schema: 1)");
    Scenario sc;
    sc.name = j.value("name", "scenario");

    const auto& g = j.at("grid");
    const double start = g.at("start_ghz").get<double>() * 1e9;
    const double stop = g.at("stop_ghz").get<double>() * 1e9;
    if (g.contains("step_ghz")) {
        const double step = g.at("step_ghz").get<double>() * 1e9;
        std::vector<double> pts;
        for (std::size_t k = 0; start + static_cast<double>(k) * step <= stop + 1e-3; ++k)
            pts.push_back(start + static_cast<double>(k) * step);
        sc.testbed.grid = FrequencyGrid(std::move(pts));
    } else {
        sc.testbed.grid = FrequencyGrid::linspace(start, stop, g.at("points").get<std::size_t>());
    }

    const auto& tb = j.at("testbed");
    sc.testbed.seed = j.value("seed", 1ULL);
    sc.testbed.base_temperature_k = tb.value("base_temperature_k", 2.74);
    const auto& att = tb.at("attenuator");
    sc.testbed.attenuator_db = att.value("loss_db", 30.0);
    sc.testbed.attenuator_potted_k = att.value("potted_sensor_k", 3.2);
    sc.testbed.attenuator_adjacent_k = att.value("adjacent_sensor_k", 2.88);
    const std::string sensor = tb.value("cold_sensor", "potted");
    if (sensor == "potted") sc.testbed.cold_sensor = ColdSensor::potted;
    else if (sensor == "adjacent") sc.testbed.cold_sensor = ColdSensor::adjacent;
    else throw Error("cold_sensor must be 'potted' or 'adjacent'");

    if (tb.contains("cables")) {
        const auto& c = tb.at("cables");
        sc.testbed.cable_loss.cu_db_per_m_sqrtghz = c.value("cu_db_per_m_sqrtghz", 0.35);
        sc.testbed.cable_loss.becu_db_per_m_sqrtghz = c.value("becu_db_per_m_sqrtghz", 1.5);
        sc.testbed.cable_warm_k = c.value("warm_k", 296.0);
        sc.testbed.cable_mid_k = c.value("mid_k", 50.0);
        sc.testbed.cable_cold_k = c.value("cold_k", 4.0);
        sc.testbed.elements_per_section = c.value("elements_per_section", std::size_t(1000));
        sc.testbed.cable_delay_ps = c.value("delay_ps", 5000.0);
    }

    const auto& ns = tb.at("noise_source");
    sc.testbed.noise_source.enr_db =
        detail::param_table_from_json(ns.at("enr_db")).sampled(sc.testbed.grid, Unit::dB);
    sc.testbed.noise_source.off_temperature_k = ns.value("off_temperature_k", 296.0);

    if (tb.contains("receiver")) {
        sc.testbed.receiver_noise_k = tb.at("receiver").value("noise_temperature_k", 300.0);
        sc.testbed.receiver_gain_db = tb.at("receiver").value("gain_db", 0.0);
    }
    sc.testbed.vna_noise_db = tb.value("vna_noise_db", 0.01);
    sc.testbed.sa_noise_db = tb.value("sa_noise_db", 0.01);

    if (tb.contains("trl")) {
        const auto& trl = tb.at("trl");
        sc.testbed.trl.line_delay_ps = trl.value("line_delay_ps", 20.0);
        sc.testbed.trl.line_loss_db_at_10ghz = trl.value("line_loss_db_at_10ghz", 0.3);
        sc.testbed.trl.reflect_delay_ps = trl.value("reflect_delay_ps", 0.0);
        const std::string kind = trl.value("reflect", "short");
        sc.testbed.trl.reflect_kind = (kind == "open") ? ReflectKind::OPEN : ReflectKind::SHORT;
    }
    if (tb.contains("etalon")) {
        const auto& e = tb.at("etalon");
        sc.testbed.etalon.enabled = e.value("enabled", false);
        sc.testbed.etalon.amplitude_db = e.value("amplitude_db", 0.05);
        sc.testbed.etalon.period_ghz = e.value("period_ghz", 0.35);
    }

    const auto& d = j.at("dut");
    sc.dut.name = d.value("name", "DUT");
    sc.dut.gain_db = detail::param_table_from_json(d.at("gain_db"));
    sc.dut.noise_temperature_k = detail::param_table_from_json(d.at("noise_temperature_k"));
    sc.dut.input_match_db = detail::param_table_from_json(d.at("input_match_db"));
    sc.dut.output_match_db = detail::param_table_from_json(d.at("output_match_db"));
    sc.dut.reverse_isolation_db = detail::param_table_from_json(d.at("reverse_isolation_db"));
    sc.dut.delay_ps = d.value("delay_ps", 60.0);
    sc.dut.match_delay_ps = d.value("match_delay_ps", 35.0);
    if (d.contains("compression")) {
        const auto& c = d.at("compression");
        const std::string model = c.value("model", "none");
        if (model == "none") sc.dut.compression.model = CompressionSpec::Model::none;
        else if (model == "rapp") sc.dut.compression.model = CompressionSpec::Model::rapp;
        else if (model == "hard") sc.dut.compression.model = CompressionSpec::Model::hard;
        else throw Error("compression model must be none|rapp|hard");
        sc.dut.compression.saturation_dbm = c.value("saturation_dbm", 0.0);
        sc.dut.compression.smoothness = c.value("smoothness", 2.0);
    }
    if (d.contains("bias")) {
        sc.dut.bias.vd_v = d.at("bias").value("vd_v", 0.0);
        sc.dut.bias.id_ma = d.at("bias").value("id_ma", 0.0);
        sc.dut.bias.vg_v = d.at("bias").value("vg_v", 0.0);
    }

    sc.validate();
    return sc;
}

inline Scenario load_scenario(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw Error("cannot open scenario file " + path);
    nlohmann::json j;
    try {
        is >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error("scenario JSON parse error in " + path + ": " + e.what());
    }
    return scenario_from_json(j);
}

} // namespace cryorf
