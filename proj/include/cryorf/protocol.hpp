// Two-phase qualification runner: Phase 1 qualifies the test setup against a
// control device with known behavior, Phase 2 tests unknown devices against
// the integrator's spec limits.  Runs produce immutable JSON records whose
// canonical form (timestamp excluded) is byte-reproducible for identical
// (config, seed, limits).
#pragma once

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "metrics.hpp"
#include "simlab.hpp"
#include "uncertainty.hpp"

namespace cryorf {

enum class Verdict { PASS, FAIL, FAIL_FAILURE_ANALYSIS };

inline std::string to_string(Verdict v) {
    switch (v) {
        case Verdict::PASS: return "PASS";
        case Verdict::FAIL: return "FAIL";
        case Verdict::FAIL_FAILURE_ANALYSIS: return "FAIL_FAILURE_ANALYSIS";
    }
    return "FAIL";
}

// Integrator limits.  All limits are optional except the band; trace limits
// are evaluated at every grid point inside their band.
struct SpecLimits {
    BandSpec band;
    std::optional<BandSpec> return_loss_band; // defaults to band
    std::optional<double> min_gain_db;
    std::optional<double> max_gain_db;
    std::optional<double> max_flatness_db;
    std::optional<double> max_noise_temperature_k;
    std::optional<double> min_op1db_dbm;
    std::optional<double> return_loss_db;  // S11 and S22 must stay below
    std::optional<double> isolation_db;    // S12 must stay below

    void validate() const {
        band.validate();
        if (!min_gain_db && !max_gain_db && !max_flatness_db && !max_noise_temperature_k &&
            !min_op1db_dbm && !return_loss_db && !isolation_db)
            throw Error("spec limits need at least one limit besides the band");
    }
};

// Phase-1 agreement tolerances against the control device's known values.
struct ControlTolerances {
    double flatness_db = 0.1;
    double peak_gain_db = 0.2;
    double noise_temperature_k = 0.3; // max |measured - reference| in band
    double op1db_db = 0.5;
    double verify_cal_db = 0.05;
};

// A failed limit within these margins is routed to failure analysis instead
// of outright rejection.
struct FailureAnalysisPolicy {
    double sigma_multiplier = 2.0;        // times the propagated noise uncertainty
    double margin_db = 0.1;               // absolute margin for dB metrics
    std::optional<double> margin_k;       // optional absolute margin for kelvin metrics
};

enum class CorrectionMode { exact, lumped };

struct RunOptions {
    std::optional<std::uint64_t> seed;  // overrides the scenario seed
    std::vector<double> sweep_frequencies_hz; // default: band center
    ControlTolerances control;
    FailureAnalysisPolicy failure_analysis;
    CorrectionMode correction_mode = CorrectionMode::exact;
    bool exclude_flagged_from_verification = true;
    // Deliberate corruption of the before-DUT loss table, for exercising the
    // protocol's fault-detection path.
    double injected_before_table_error_db = 0.0;
};

struct LimitOutcome {
    std::string name;
    double threshold = 0.0;
    double observed = 0.0;
    double margin = 0.0; // positive means on the passing side
    bool pass = false;
    bool kelvin_units = false;
    std::vector<double> violations;
};

struct RunRecord {
    int schema = 1;
    std::string run_id;
    std::string timestamp; // excluded from the canonical form
    int phase = 1;
    std::string scenario_name;
    std::string config_hash;
    std::uint64_t seed = 0;
    std::string phase1_ref; // run id of the gating phase-1 record

    BiasConditions bias;
    std::string correction_mode;
    double t_cable_fit_k = 0.0;
    double t_loss_k = 0.0;

    double cal_residual_db = 0.0;
    bool cal_pass = false;
    double cal_tolerance_db = 0.0;
    std::size_t cal_flagged_points = 0;

    std::vector<double> grid_hz;
    std::map<std::string, std::vector<double>> traces;
    std::vector<PowerSweep> sweeps;
    std::vector<P1dbResult> p1db;

    BandSpec band;
    double peak_gain_db = 0.0;
    double flatness_db = 0.0;
    double t_n_min_k = 0.0;
    double t_n_max_k = 0.0;

    nlohmann::json uncertainty;
    std::vector<LimitOutcome> limits;
    Verdict verdict = Verdict::FAIL;

    nlohmann::json to_json() const;       // canonical (no timestamp)
    std::string canonical_text() const { return to_json().dump(2); }
    nlohmann::json file_json() const {
        nlohmann::json j = to_json();
        j["timestamp"] = timestamp;
        return j;
    }
};

namespace detail {

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

inline std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%SZ", &tm);
    return buf;
}

} // namespace detail

inline nlohmann::json to_json(const SpecLimits& l) {
    nlohmann::json j;
    j["band_ghz"] = {l.band.f_low_hz / 1e9, l.band.f_high_hz / 1e9};
    if (l.return_loss_band)
        j["return_loss_band_ghz"] = {l.return_loss_band->f_low_hz / 1e9,
                                     l.return_loss_band->f_high_hz / 1e9};
    auto put = [&j](const char* k, const std::optional<double>& v) {
        if (v) j[k] = *v;
    };
    put("min_gain_db", l.min_gain_db);
    put("max_gain_db", l.max_gain_db);
    put("max_flatness_db", l.max_flatness_db);
    put("max_noise_temperature_k", l.max_noise_temperature_k);
    put("min_op1db_dbm", l.min_op1db_dbm);
    put("return_loss_db", l.return_loss_db);
    put("isolation_db", l.isolation_db);
    return j;
}

inline SpecLimits limits_from_json(const nlohmann::json& j) {
    SpecLimits l;
    const auto& b = j.at("band_ghz");
    l.band = {b.at(0).get<double>() * 1e9, b.at(1).get<double>() * 1e9};
    if (j.contains("return_loss_band_ghz")) {
        const auto& rb = j.at("return_loss_band_ghz");
        l.return_loss_band = BandSpec{rb.at(0).get<double>() * 1e9, rb.at(1).get<double>() * 1e9};
    }
    auto get = [&j](const char* k) -> std::optional<double> {
        if (j.contains(k)) return j.at(k).get<double>();
        return std::nullopt;
    };
    l.min_gain_db = get("min_gain_db");
    l.max_gain_db = get("max_gain_db");
    l.max_flatness_db = get("max_flatness_db");
    l.max_noise_temperature_k = get("max_noise_temperature_k");
    l.min_op1db_dbm = get("min_op1db_dbm");
    l.return_loss_db = get("return_loss_db");
    l.isolation_db = get("isolation_db");
    l.validate();
    return l;
}

inline RunOptions run_options_from_json(const nlohmann::json& j) {
    RunOptions o;
    if (j.contains("sweep_frequencies_ghz"))
        for (double f : j.at("sweep_frequencies_ghz")) o.sweep_frequencies_hz.push_back(f * 1e9);
    if (j.contains("tolerances")) {
        const auto& t = j.at("tolerances");
        o.control.flatness_db = t.value("flatness_db", o.control.flatness_db);
        o.control.peak_gain_db = t.value("peak_gain_db", o.control.peak_gain_db);
        o.control.noise_temperature_k =
            t.value("noise_temperature_k", o.control.noise_temperature_k);
        o.control.op1db_db = t.value("op1db_db", o.control.op1db_db);
        o.control.verify_cal_db = t.value("verify_cal_db", o.control.verify_cal_db);
    }
    if (j.contains("failure_analysis")) {
        const auto& f = j.at("failure_analysis");
        o.failure_analysis.sigma_multiplier =
            f.value("sigma_multiplier", o.failure_analysis.sigma_multiplier);
        o.failure_analysis.margin_db = f.value("margin_db", o.failure_analysis.margin_db);
        if (f.contains("margin_k")) o.failure_analysis.margin_k = f.at("margin_k").get<double>();
    }
    if (j.contains("correction_mode")) {
        const std::string m = j.at("correction_mode");
        if (m == "exact") o.correction_mode = CorrectionMode::exact;
        else if (m == "lumped") o.correction_mode = CorrectionMode::lumped;
        else throw Error("correction_mode must be exact|lumped");
    }
    return o;
}

inline nlohmann::json RunRecord::to_json() const {
    nlohmann::json j;
    j["schema"] = schema;
    j["run_id"] = run_id;
    j["phase"] = phase;
    j["scenario"] = scenario_name;
    j["config_hash"] = config_hash;
    j["seed"] = seed;
    if (!phase1_ref.empty()) j["phase1_ref"] = phase1_ref;
    j["bias"] = {{"vd_v", bias.vd_v}, {"id_ma", bias.id_ma}, {"vg_v", bias.vg_v}};
    j["correction"] = {{"mode", correction_mode},
                       {"t_cable_fit_k", t_cable_fit_k},
                       {"t_loss_k", t_loss_k}};
    j["calibration"] = {{"residual_db", cal_residual_db},
                        {"pass", cal_pass},
                        {"tolerance_db", cal_tolerance_db},
                        {"flagged_points", cal_flagged_points}};
    j["grid_hz"] = grid_hz;
    nlohmann::json tr;
    for (const auto& [name, values] : traces) tr[name] = values;
    j["traces"] = tr;
    nlohmann::json sweeps_j = nlohmann::json::array();
    for (std::size_t i = 0; i < sweeps.size(); ++i) {
        nlohmann::json s;
        s["frequency_hz"] = sweeps[i].frequency_hz;
        s["pin_dbm"] = sweeps[i].pin_dbm;
        s["pout_dbm"] = sweeps[i].pout_dbm;
        const auto& r = p1db[i];
        s["p1db"] = {{"found", r.found},
                     {"ip1db_dbm", r.ip1db_dbm},
                     {"op1db_dbm", r.op1db_dbm},
                     {"small_signal_gain_db", r.small_signal_gain_db},
                     {"expansion_flagged", r.expansion_flagged}};
        sweeps_j.push_back(s);
    }
    j["power_sweeps"] = sweeps_j;
    j["metrics"] = {{"band_ghz", {band.f_low_hz / 1e9, band.f_high_hz / 1e9}},
                    {"peak_gain_db", peak_gain_db},
                    {"flatness_db", flatness_db},
                    {"t_n_min_k", t_n_min_k},
                    {"t_n_max_k", t_n_max_k}};
    j["uncertainty"] = uncertainty;
    nlohmann::json lims = nlohmann::json::array();
    for (const auto& l : limits)
        lims.push_back({{"name", l.name},
                        {"threshold", l.threshold},
                        {"observed", l.observed},
                        {"margin", l.margin},
                        {"pass", l.pass},
                        {"violations_hz", l.violations}});
    j["limits"] = lims;
    j["verdict"] = to_string(verdict);
    return j;
}

namespace detail {

struct QualificationData {
    ScalarTrace gain_db, t_dut_k, nf_db, s11_db, s22_db, s12_db, y, cal_residual_db;
    std::vector<std::uint8_t> t_valid;
    CalVerification verification;
    std::size_t flagged_points = 0;
    double t_cable_fit_k = 0.0;
    double t_loss_k = 0.0;
    std::optional<UncertaintyResult> uncertainty;
    std::vector<PowerSweep> sweeps;
    std::vector<P1dbResult> p1db;
};

// Shared measurement sequence of both phases: calibrate, verify, S-parameter
// suite, power sweeps, noise suite.
inline QualificationData run_measurements(VirtualTestbed& bed, const BandSpec& band,
                                          const RunOptions& opt) {
    QualificationData q;
    const auto& grid = bed.grid();

    // --- calibrate and verify
    const auto standards = bed.measure_trl_standards();
    const auto em = solve_trl(standards);
    q.flagged_points = em.ill_conditioned_points().size();
    const auto fresh_thru = bed.vna_measure(SwitchState::both(SwitchPort::THRU));
    q.verification = verify_cal(em, fresh_thru, opt.control.verify_cal_db);
    q.cal_residual_db = q.verification.residual_db;
    if (opt.exclude_flagged_from_verification && !q.verification.pass) {
        // the usable result is the residual over well-conditioned points
        double worst = 0.0;
        for (std::size_t i = 0; i < grid.size(); ++i)
            if (!em.conditioning[i].ill_conditioned)
                worst = std::max(worst, std::abs(q.verification.residual_db.values[i]));
        q.verification.max_abs_db = worst;
        q.verification.pass = worst <= q.verification.tolerance_db;
    }

    // --- S-parameter suite
    const auto raw_dut = bed.vna_measure(SwitchState::both(SwitchPort::DUT));
    const auto dut = deembed(em, raw_dut);
    q.gain_db = dut.s21_db();
    q.s11_db = dut.s11_db();
    q.s22_db = dut.s22_db();
    q.s12_db = dut.s12_db();

    // --- power sweeps
    std::vector<double> sweep_freqs = opt.sweep_frequencies_hz;
    if (sweep_freqs.empty())
        sweep_freqs.push_back(0.5 * (band.f_low_hz + band.f_high_hz));
    for (double f : sweep_freqs) {
        q.sweeps.push_back(bed.power_sweep(f));
        q.p1db.push_back(extract_p1db(q.sweeps.back()));
    }

    // --- noise suite
    const auto& enr = bed.scenario().testbed.noise_source;
    const auto rx = receiver_calibration(enr, bed.sa_receiver_cal(NoiseSourceState::hot),
                                         bed.sa_receiver_cal(NoiseSourceState::cold));
    const auto thru_raw = bed.vna_measure(SwitchState::both(SwitchPort::THRU));
    auto system_db = thru_raw.s21_db();
    for (double& v : system_db.values)
        v = std::max(0.0, -v - bed.scenario().testbed.attenuator_db);
    auto corr = bed.model_corrections(system_db);
    if (opt.injected_before_table_error_db != 0.0)
        for (double& v : corr.losses.before_db.values) v += opt.injected_before_table_error_db;
    q.t_loss_k = corr.losses.t_loss_k;
    q.t_cable_fit_k = fit_lumped_temperature(bed.output_cable().effective_noise_input_referred(),
                                             bed.output_cable().total_loss_linear_trace());
    if (opt.correction_mode == CorrectionMode::lumped) {
        // single-temperature correction, the way the analyzer applies it
        corr.before_temperature_k.reset();
        corr.after_temperature_k.reset();
    }
    const auto res = run_y_factor_pipeline(enr, rx, bed.sa_measure(NoiseSourceState::hot, true),
                                           bed.sa_measure(NoiseSourceState::cold, true), corr);
    q.t_dut_k = res.t_dut_k.trace;
    q.t_valid = res.t_dut_k.valid;
    q.nf_db = res.noise_figure_db();
    q.y = res.y;

    // --- uncertainty at the measured band-center operating point
    const std::size_t mid = grid.nearest_index(0.5 * (band.f_low_hz + band.f_high_hz));
    if (res.y.values[mid] > 1.0) {
        OperatingPoint op;
        op.y = res.y.values[mid];
        op.t_hot_k = res.dut_input.t_hot_k.values[mid];
        op.t_cold_k = res.dut_input.t_cold_k.values[mid];
        op.l_a = linear_from_db(bed.scenario().testbed.attenuator_db);
        op.l_cable = linear_from_db(corr.losses.before_db.values[mid] -
                                    bed.scenario().testbed.attenuator_db);
        op.t_cable_k = bed.input_cable().lumped_equivalent_temperature().values[mid];
        op.t_a_k = bed.scenario().testbed.attenuator_sensor_reading_k();
        op.g_dut = linear_from_db(res.gain_db.values[mid]);
        op.t_off_k = enr.off_temperature_k;
        const double l_aft = linear_from_db(corr.losses.after_db.values[mid]);
        op.t_receiver_k = (l_aft - 1.0) * corr.after_temp(mid) +
                          rx.t_receiver_k.values[mid] * l_aft;
        q.uncertainty = propagate_tdut(UncertaintyBudget{}, op);
    }
    return q;
}

inline LimitOutcome trace_limit(const std::string& name, const ScalarTrace& trace,
                                double threshold, Relation rel, const BandSpec& band,
                                bool kelvin = false) {
    LimitOutcome o;
    o.name = name;
    o.threshold = threshold;
    o.kelvin_units = kelvin;
    const auto r = band_compliance(trace, threshold, rel, band);
    o.pass = r.pass;
    o.violations = r.violations;
    double worst = trace.values[band_indices(trace.grid, band).front()];
    for (std::size_t i : band_indices(trace.grid, band)) {
        if (rel == Relation::below)
            worst = std::max(worst, trace.values[i]);
        else
            worst = std::min(worst, trace.values[i]);
    }
    o.observed = worst;
    o.margin = (rel == Relation::below) ? threshold - worst : worst - threshold;
    return o;
}

inline LimitOutcome scalar_limit(const std::string& name, double observed, double threshold,
                                 bool must_be_below, bool kelvin = false) {
    LimitOutcome o;
    o.name = name;
    o.threshold = threshold;
    o.observed = observed;
    o.kelvin_units = kelvin;
    o.margin = must_be_below ? threshold - observed : observed - threshold;
    o.pass = o.margin >= 0.0;
    return o;
}

} // namespace detail

struct QualificationInput {
    Scenario scenario;
    std::string config_text; // raw scenario file content, hashed into the run id
    SpecLimits limits;
    RunOptions options;
};

namespace detail {

inline RunRecord run_qualification(const QualificationInput& in, int phase,
                                   const std::string& phase1_ref) {
    in.limits.validate();
    Scenario sc = in.scenario;
    if (in.options.seed) sc.testbed.seed = *in.options.seed;
    VirtualTestbed bed(sc);
    const BandSpec band = in.limits.band;
    const auto q = run_measurements(bed, band, in.options);

    RunRecord rec;
    rec.phase = phase;
    rec.scenario_name = sc.name;
    rec.seed = sc.testbed.seed;
    rec.config_hash = hex64(fnv1a64(in.config_text));
    rec.phase1_ref = phase1_ref;
    rec.bias = sc.dut.bias;
    rec.correction_mode =
        (in.options.correction_mode == CorrectionMode::exact) ? "exact" : "lumped";
    rec.t_cable_fit_k = q.t_cable_fit_k;
    rec.t_loss_k = q.t_loss_k;
    rec.cal_residual_db = q.verification.max_abs_db;
    rec.cal_pass = q.verification.pass;
    rec.cal_tolerance_db = q.verification.tolerance_db;
    rec.cal_flagged_points = q.flagged_points;
    rec.grid_hz = bed.grid().points();
    rec.traces["gain_db"] = q.gain_db.values;
    rec.traces["t_dut_k"] = q.t_dut_k.values;
    rec.traces["nf_db"] = q.nf_db.values;
    rec.traces["s11_db"] = q.s11_db.values;
    rec.traces["s22_db"] = q.s22_db.values;
    rec.traces["s12_db"] = q.s12_db.values;
    rec.traces["y_factor"] = q.y.values;
    rec.traces["cal_residual_db"] = q.cal_residual_db.values;
    rec.sweeps = q.sweeps;
    rec.p1db = q.p1db;
    rec.band = band;
    rec.flatness_db = gain_flatness(q.gain_db, band);
    double peak = -1e9, tn_lo = 1e9, tn_hi = -1e9;
    for (std::size_t i : band_indices(bed.grid(), band)) {
        peak = std::max(peak, q.gain_db.values[i]);
        tn_lo = std::min(tn_lo, q.t_dut_k.values[i]);
        tn_hi = std::max(tn_hi, q.t_dut_k.values[i]);
    }
    rec.peak_gain_db = peak;
    rec.t_n_min_k = tn_lo;
    rec.t_n_max_k = tn_hi;
    if (q.uncertainty) rec.uncertainty = to_json(*q.uncertainty);

    // --- limit evaluation
    auto& L = rec.limits;
    L.push_back(scalar_limit("calibration_verification_db", q.verification.max_abs_db,
                             q.verification.tolerance_db, true));
    if (in.limits.min_gain_db)
        L.push_back(trace_limit("min_gain_db", q.gain_db, *in.limits.min_gain_db,
                                Relation::above, band));
    if (in.limits.max_gain_db)
        L.push_back(trace_limit("max_gain_db", q.gain_db, *in.limits.max_gain_db,
                                Relation::below, band));
    if (in.limits.max_flatness_db)
        L.push_back(scalar_limit("max_flatness_db", rec.flatness_db, *in.limits.max_flatness_db,
                                 true));
    if (in.limits.max_noise_temperature_k)
        L.push_back(trace_limit("max_noise_temperature_k", q.t_dut_k,
                                *in.limits.max_noise_temperature_k, Relation::below, band, true));
    if (in.limits.min_op1db_dbm) {
        double worst = 1e9;
        bool found_all = !q.p1db.empty();
        for (const auto& r : q.p1db) {
            if (!r.found) found_all = false;
            else worst = std::min(worst, r.op1db_dbm);
        }
        auto o = scalar_limit("min_op1db_dbm", found_all ? worst : -999.0,
                              *in.limits.min_op1db_dbm, false);
        if (!found_all) o.pass = false;
        L.push_back(o);
    }
    if (in.limits.return_loss_db) {
        const BandSpec rl_band = in.limits.return_loss_band.value_or(band);
        L.push_back(trace_limit("s11_return_loss_db", q.s11_db, *in.limits.return_loss_db,
                                Relation::below, rl_band));
        L.push_back(trace_limit("s22_return_loss_db", q.s22_db, *in.limits.return_loss_db,
                                Relation::below, rl_band));
    }
    if (in.limits.isolation_db)
        L.push_back(trace_limit("s12_isolation_db", q.s12_db, *in.limits.isolation_db,
                                Relation::below, band));

    // --- verdict with the failure-analysis margin rule
    bool all_pass = true;
    bool all_marginal = true;
    const double sigma = q.uncertainty ? q.uncertainty->sigma_t_dut_k : 0.0;
    for (const auto& o : L) {
        if (o.pass) continue;
        all_pass = false;
        const double margin_allow =
            o.kelvin_units
                ? std::max(in.options.failure_analysis.sigma_multiplier * sigma,
                           in.options.failure_analysis.margin_k.value_or(0.0))
                : in.options.failure_analysis.margin_db;
        if (-o.margin > margin_allow) all_marginal = false;
        if (o.name == "calibration_verification_db") all_marginal = false;
    }
    rec.verdict = all_pass ? Verdict::PASS
                           : (all_marginal ? Verdict::FAIL_FAILURE_ANALYSIS : Verdict::FAIL);
    return rec;
}

} // namespace detail

// Phase 1: measure the control device and require agreement with its known
// values before the setup is considered qualified.
inline RunRecord run_phase1(const QualificationInput& in) {
    Scenario sc = in.scenario;
    if (in.options.seed) sc.testbed.seed = *in.options.seed;
    RunRecord rec = detail::run_qualification(in, 1, "");

    // control agreement against the device model's known behavior
    const auto& grid = sc.testbed.grid;
    const auto truth_gain = sc.dut.gain_db.sampled(grid, Unit::dB);
    const auto truth_tn = sc.dut.noise_temperature_k.sampled(grid, Unit::kelvin);
    const double ref_flatness = gain_flatness(truth_gain, in.limits.band);
    double ref_peak = -1e9;
    for (std::size_t i : detail::band_indices(grid, in.limits.band))
        ref_peak = std::max(ref_peak, truth_gain.values[i]);

    auto& L = rec.limits;
    const std::size_t first_control = L.size();
    L.push_back(detail::scalar_limit("control_flatness_dev_db",
                                     std::abs(rec.flatness_db - ref_flatness),
                                     in.options.control.flatness_db, true));
    L.push_back(detail::scalar_limit("control_peak_gain_dev_db",
                                     std::abs(rec.peak_gain_db - ref_peak),
                                     in.options.control.peak_gain_db, true));
    double tn_dev = 0.0;
    for (std::size_t i : detail::band_indices(grid, in.limits.band))
        tn_dev = std::max(tn_dev,
                          std::abs(rec.traces["t_dut_k"][i] - truth_tn.values[i]));
    L.push_back(detail::scalar_limit("control_noise_temperature_dev_k", tn_dev,
                                     in.options.control.noise_temperature_k, true, true));
    if (!rec.p1db.empty() && rec.p1db.front().found &&
        sc.dut.compression.model != CompressionSpec::Model::none) {
        PowerSweep ref_sweep;
        ref_sweep.frequency_hz = rec.sweeps.front().frequency_hz;
        for (double pin = -80.0; pin <= -20.0 + 1e-9; pin += 1.0) {
            ref_sweep.pin_dbm.push_back(pin);
            ref_sweep.pout_dbm.push_back(sc.dut.pout_dbm(ref_sweep.frequency_hz, pin));
        }
        const auto ref = extract_p1db(ref_sweep);
        if (ref.found)
            L.push_back(detail::scalar_limit("control_op1db_dev_db",
                                             std::abs(rec.p1db.front().op1db_dbm - ref.op1db_dbm),
                                             in.options.control.op1db_db, true));
    }

    bool all_pass = rec.verdict == Verdict::PASS;
    for (std::size_t i = first_control; i < L.size(); ++i)
        if (!L[i].pass) all_pass = false;
    if (!all_pass && rec.verdict == Verdict::PASS) rec.verdict = Verdict::FAIL;

    rec.run_id = detail::hex64(detail::fnv1a64(rec.config_hash + ":" +
                                               std::to_string(rec.seed) + ":phase1:" +
                                               to_json(in.limits).dump()));
    rec.timestamp = detail::utc_timestamp();
    return rec;
}

// Phase 2 refuses to run without a passing phase-1 record.
inline RunRecord run_phase2(const QualificationInput& in, const nlohmann::json& phase1_record) {
    if (!phase1_record.is_object() || !phase1_record.contains("verdict") ||
        !phase1_record.contains("phase"))
        throw Error("phase 2 requires a phase-1 run record");
    if (phase1_record.at("phase").get<int>() != 1)
        throw Error("phase-1 reference record is not a phase-1 run");
    if (phase1_record.at("verdict").get<std::string>() != "PASS")
        throw Error("phase-1 reference record did not PASS; the setup is not qualified");

    RunRecord rec = detail::run_qualification(in, 2, phase1_record.at("run_id").get<std::string>());
    rec.run_id = detail::hex64(detail::fnv1a64(rec.config_hash + ":" + std::to_string(rec.seed) +
                                               ":phase2:" + to_json(in.limits).dump()));
    rec.timestamp = detail::utc_timestamp();
    return rec;
}

// --- rendering and persistence ----------------------------------------------

inline std::string render_markdown(const nlohmann::json& j) {
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os << "# Device qualification report\n\n";
    os << "- scenario: `" << j.value("scenario", "?") << "` (phase " << j.value("phase", 0)
       << ")\n";
    os << "- run id: `" << j.value("run_id", "?") << "`  config hash: `"
       << j.value("config_hash", "?") << "`  seed: " << j.value("seed", std::uint64_t{0}) << "\n";
    if (j.contains("timestamp")) os << "- timestamp: " << j.at("timestamp").get<std::string>() << "\n";
    if (j.contains("phase1_ref")) os << "- qualified by phase-1 run `"
                                     << j.at("phase1_ref").get<std::string>() << "`\n";
    const auto& bias = j.at("bias");
    os.precision(2);
    os << "- bias: V_D = " << bias.value("vd_v", 0.0) << " V, I_D = " << bias.value("id_ma", 0.0)
       << " mA, V_G = " << bias.value("vg_v", 0.0) << " V\n\n";
    os << "## Verdict: **" << j.value("verdict", "?") << "**\n\n";

    const auto& cal = j.at("calibration");
    os.precision(4);
    os << "## Calibration\n\n";
    os << "- thru verification residual: " << cal.value("residual_db", 0.0) << " dB (tolerance "
       << cal.value("tolerance_db", 0.0) << " dB) -> " << (cal.value("pass", false) ? "ok" : "FAIL")
       << "\n";
    os << "- ill-conditioned line-phase points: " << cal.value("flagged_points", 0) << "\n\n";

    const auto& m = j.at("metrics");
    os.precision(2);
    os << "## Metrics (band " << m.at("band_ghz").at(0).get<double>() << "-"
       << m.at("band_ghz").at(1).get<double>() << " GHz)\n\n";
    os << "| metric | value |\n|---|---|\n";
    os << "| peak gain | " << m.value("peak_gain_db", 0.0) << " dB |\n";
    os << "| gain flatness | " << m.value("flatness_db", 0.0) << " dB |\n";
    os << "| noise temperature | " << m.value("t_n_min_k", 0.0) << " - "
       << m.value("t_n_max_k", 0.0) << " K |\n";
    for (const auto& s : j.at("power_sweeps")) {
        const auto& p = s.at("p1db");
        os << "| P1dB @ " << s.at("frequency_hz").get<double>() / 1e9 << " GHz | ";
        if (p.value("found", false))
            os << "OP1dB " << p.value("op1db_dbm", 0.0) << " dBm, IP1dB "
               << p.value("ip1db_dbm", 0.0) << " dBm |\n";
        else
            os << "no 1 dB compression in sweep |\n";
    }
    os << "| lumped cable temperature fit | " << j.at("correction").value("t_cable_fit_k", 0.0)
       << " K |\n";
    os << "| loss table temperature | " << j.at("correction").value("t_loss_k", 0.0) << " K |\n\n";

    if (j.contains("uncertainty") && j.at("uncertainty").is_object()) {
        const auto& u = j.at("uncertainty");
        os.precision(1);
        os << "## Noise temperature uncertainty\n\n";
        os << "combined (1 sigma): " << u.value("sigma_t_dut_k", 0.0) * 1e3 << " mK\n\n";
        os << "| parameter | sigma in | contribution (mK) | in sum |\n|---|---|---|---|\n";
        for (const auto& t : u.at("terms"))
            os << "| " << t.value("parameter", "?") << " | " << t.value("sigma_input", 0.0)
               << " | " << t.value("contribution_k", 0.0) * 1e3 << " | "
               << (t.value("in_default_sum", false) ? "yes" : "no") << " |\n";
        os << "\n";
    }

    os.precision(3);
    os << "## Limits\n\n| limit | threshold | observed | margin | result |\n|---|---|---|---|---|\n";
    for (const auto& l : j.at("limits"))
        os << "| " << l.value("name", "?") << " | " << l.value("threshold", 0.0) << " | "
           << l.value("observed", 0.0) << " | " << l.value("margin", 0.0) << " | "
           << (l.value("pass", false) ? "pass" : "FAIL") << " |\n";
    os << "\n";
    return os.str();
}

// One CSV file per stored trace plus the power sweeps; returns name -> content.
inline std::map<std::string, std::string> render_csv_bundle(const nlohmann::json& j) {
    std::map<std::string, std::string> files;
    std::vector<double> freqs;
    for (double f : j.at("grid_hz")) freqs.push_back(f);
    const FrequencyGrid grid(freqs);
    for (const auto& [name, values] : j.at("traces").items()) {
        std::vector<double> v;
        for (double x : values) v.push_back(x);
        Unit unit = Unit::linear;
        if (name.ends_with("_db")) unit = Unit::dB;
        if (name.ends_with("_k")) unit = Unit::kelvin;
        files[name + ".csv"] = write_trace_csv(ScalarTrace(grid, v, unit));
    }
    int idx = 0;
    for (const auto& s : j.at("power_sweeps")) {
        PowerSweep sweep;
        sweep.frequency_hz = s.at("frequency_hz").get<double>();
        for (double x : s.at("pin_dbm")) sweep.pin_dbm.push_back(x);
        for (double x : s.at("pout_dbm")) sweep.pout_dbm.push_back(x);
        files["power_sweep_" + std::to_string(idx++) + ".csv"] = write_power_sweep_csv(sweep);
    }
    return files;
}

// Appends the record to the run directory as runs/<timestamp>_<runid>.json.
inline std::filesystem::path save_run(const RunRecord& rec, const std::filesystem::path& out_dir) {
    const auto dir = out_dir / "runs";
    std::filesystem::create_directories(dir);
    const auto path = dir / (rec.timestamp + "_" + rec.run_id + ".json");
    std::ofstream os(path);
    if (!os) throw Error("cannot write run record " + path.string());
    os << rec.file_json().dump(2) << "\n";
    return path;
}

inline nlohmann::json load_run(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw Error("cannot open run record " + path.string());
    nlohmann::json j;
    is >> j;
    return j;
}

} // namespace cryorf
