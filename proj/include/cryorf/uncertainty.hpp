// First-order propagation of the measurement parameter uncertainties to the
// corrected DUT noise temperature, with a Monte Carlo companion that pushes
// Gaussian draws through the exact correction chain.
//
// The chain mirrors how the corrections are applied in practice: the cold
// reference temperature is live (the attenuator thermometer and the cable
// temperature enter the cold state directly through the full input-noise
// expression), while the hot state is corrected through the static loss
// table at its frozen loss temperature.  Consequently a T_A-only budget
// propagates with sensitivity (Y/(Y-1))(1 - 1/L_A) exactly.
#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <json.hpp>

#include "noise.hpp"
#include "rng.hpp"
#include "units.hpp"

namespace cryorf {

// One-sigma standard uncertainties of the measured parameters.
struct UncertaintyBudget {
    double g_dut_db = 0.033;
    double l_cable_db = 0.033;
    double l_a_db = 0.033;
    double t_cable_k = 32.0;
    double t_a_k = 0.005;
    double enr_db = 0.18;
    double t_eff_k = 12.0; // analyzer noise-temperature scale (receiver cal)

    void validate() const {
        for (double v : {g_dut_db, l_cable_db, l_a_db, t_cable_k, t_a_k, enr_db, t_eff_k})
            if (v < 0.0) throw Error("budget entries must be >= 0");
    }

    static UncertaintyBudget zero() { return {0, 0, 0, 0, 0, 0, 0}; }
};

// The ENR and T_eff entries overlap (the analyzer scale error is dominated
// by the ENR error); the default aggregation takes the direct ENR path and
// reports T_eff separately, the alternative swaps them.
enum class BudgetAggregation { enr_direct, t_eff_alternative };

struct OperatingPoint {
    double y = 0.0;          // measured Y factor, linear
    double t_hot_k = 0.0;    // hot temperature at the DUT input
    double t_cold_k = 0.0;   // cold temperature at the DUT input
    double l_a = 0.0;        // cold attenuator loss, linear
    double l_cable = 0.0;    // input cable loss, linear
    double t_cable_k = 0.0;  // lumped cable temperature
    double t_a_k = 0.0;      // attenuator physical temperature
    double g_dut = 0.0;      // DUT gain, linear
    double t_off_k = 296.0;  // noise source off-state temperature
    double t_receiver_k = 0.0; // second stage referred to the DUT output
    bool g_is_amplitude = false; // dB basis for the gain uncertainty

    void validate() const {
        if (!(y > 1.0)) throw Error("operating point requires Y > 1");
        if (l_a < 1.0 || l_cable < 1.0) throw Error("operating point losses must be >= 1");
        if (!(g_dut > 0.0)) throw Error("operating point requires positive gain");
        // the cold state must be consistent with its own parameters
        const double t_cold_model = input_noise_temperature(t_off_k, l_a, t_a_k, l_cable,
                                                            t_cable_k, InputNoiseMode::full);
        if (std::abs(t_cold_model - t_cold_k) > 0.05)
            throw Error("operating point t_cold (" + std::to_string(t_cold_k) +
                        " K) inconsistent with its loss/temperature fields (expect " +
                        std::to_string(t_cold_model) + " K)");
    }
};

// Reference point assembled from the testbed's published values: 30 dB
// attenuator at 3.2 K, 3.0 dB input cable lumped at 210 K, a 15 dB-class
// noise source (T_hot at the DUT plane via the lumped correction), the
// qualification scenario's representative mid-band Y factor, 37 dB gain and
// a 1000 K receiver referred to the DUT output.
inline OperatingPoint reference_operating_point() {
    OperatingPoint op;
    op.l_a = linear_from_db(30.0);
    op.l_cable = linear_from_db(3.0);
    op.t_cable_k = 210.0;
    op.t_a_k = 3.2;
    op.t_off_k = 296.0;
    const double t_s_hot = constants::noise_reference_k * std::pow(10.0, 1.5) + op.t_off_k;
    op.t_hot_k = input_noise_temperature(t_s_hot, op.l_a, op.t_a_k, op.l_cable, op.t_cable_k,
                                         InputNoiseMode::full);
    op.t_cold_k = input_noise_temperature(op.t_off_k, op.l_a, op.t_a_k, op.l_cable,
                                          op.t_cable_k, InputNoiseMode::full);
    op.y = 2.25;
    op.g_dut = linear_from_db(37.0);
    op.t_receiver_k = 1000.0;
    return op;
}

namespace detail {

struct ChainPerturbation {
    double enr_db = 0.0;
    double l_a_db = 0.0;
    double l_cable_db = 0.0;
    double t_cable_k = 0.0;
    double t_a_k = 0.0;
    double g_db = 0.0;
    double t_eff_k = 0.0;
};

// Exact correction chain used by both the analytic derivatives and the
// Monte Carlo sampler.
inline double chain_t_dut(const OperatingPoint& op, const ChainPerturbation& d) {
    const double a0 = 1.0 / (op.l_a * op.l_cable);
    const double t_loss_nom = t_loss(op.l_cable, op.t_cable_k, op.l_a, op.t_a_k);
    const double t_s_hot = (op.t_hot_k - (1.0 - a0) * t_loss_nom) / a0;

    const double l_a = op.l_a * std::pow(10.0, d.l_a_db / 10.0);
    const double l_c = op.l_cable * std::pow(10.0, d.l_cable_db / 10.0);
    const double a = 1.0 / (l_a * l_c);
    const double t_s = op.t_off_k + (t_s_hot - op.t_off_k) * std::pow(10.0, d.enr_db / 10.0);
    const double t_hot = a * t_s + (1.0 - a) * t_loss_nom;
    const double t_cold = a * op.t_off_k +
                          (1.0 / l_a) * (1.0 - 1.0 / l_c) * (op.t_cable_k + d.t_cable_k) +
                          (1.0 - 1.0 / l_a) * (op.t_a_k + d.t_a_k);
    const double t_sys = (t_hot - op.y * t_cold) / (op.y - 1.0);
    const double g_scale = op.g_is_amplitude ? 20.0 : 10.0;
    const double g = op.g_dut * std::pow(10.0, d.g_db / g_scale);
    return t_sys - (op.t_receiver_k + d.t_eff_k) / g;
}

} // namespace detail

struct UncertaintyTerm {
    std::string parameter;
    double sigma_input = 0.0;   // in the parameter's own unit
    double sensitivity = 0.0;   // dT_DUT per unit of the parameter
    double contribution_k = 0.0; // |sensitivity| * sigma
    bool in_default_sum = true;
};

struct UncertaintyResult {
    double sigma_t_dut_k = 0.0;
    double nominal_t_dut_k = 0.0;
    BudgetAggregation aggregation = BudgetAggregation::enr_direct;
    std::vector<UncertaintyTerm> terms;

    const UncertaintyTerm& term(const std::string& name) const {
        for (const auto& t : terms)
            if (t.parameter == name) return t;
        throw Error("no uncertainty term named " + name);
    }
};

// Root-sum-square of the first-order sensitivities, derived analytically
// from the correction chain.
inline UncertaintyResult propagate_tdut(const UncertaintyBudget& budget, const OperatingPoint& op,
                                        BudgetAggregation agg = BudgetAggregation::enr_direct) {
    budget.validate();
    op.validate();
    const double ln10_10 = constants::ln10 / 10.0;
    const double y = op.y;
    const double a = 1.0 / (op.l_a * op.l_cable);
    const double t_loss_nom = t_loss(op.l_cable, op.t_cable_k, op.l_a, op.t_a_k);
    const double t_s_hot = (op.t_hot_k - (1.0 - a) * t_loss_nom) / a;
    if (t_s_hot <= op.t_off_k)
        throw Error("operating point implies a hot source below the off state");

    UncertaintyResult r;
    r.aggregation = agg;
    r.nominal_t_dut_k = detail::chain_t_dut(op, {});

    // ENR -> hot source excess only.
    const double s_enr = ln10_10 * a * (t_s_hot - op.t_off_k) / (y - 1.0);
    // loss terms reach both states.
    const double dth_dln = -a * (t_s_hot - t_loss_nom); // shared by L_A and L_cable
    const double dtc_dln_la = -a * op.t_off_k -
                              (1.0 / op.l_a) * (1.0 - 1.0 / op.l_cable) * op.t_cable_k +
                              op.t_a_k / op.l_a;
    const double dtc_dln_lc = -a * op.t_off_k + a * op.t_cable_k;
    const double s_la = ln10_10 * (dth_dln - y * dtc_dln_la) / (y - 1.0);
    const double s_lc = ln10_10 * (dth_dln - y * dtc_dln_lc) / (y - 1.0);
    // live cold-state temperature terms.
    const double s_tcable = -y / (y - 1.0) * (1.0 / op.l_a) * (1.0 - 1.0 / op.l_cable);
    const double s_ta = -y / (y - 1.0) * (1.0 - 1.0 / op.l_a);
    // second stage.
    const double g_scale = op.g_is_amplitude ? 20.0 : 10.0;
    const double s_g = (constants::ln10 / g_scale) * op.t_receiver_k / op.g_dut;
    const double s_teff = -1.0 / op.g_dut;

    const bool enr_in = (agg == BudgetAggregation::enr_direct);
    r.terms = {
        {"ENR", budget.enr_db, s_enr, std::abs(s_enr) * budget.enr_db, enr_in},
        {"L_A", budget.l_a_db, s_la, std::abs(s_la) * budget.l_a_db, true},
        {"L_cable", budget.l_cable_db, s_lc, std::abs(s_lc) * budget.l_cable_db, true},
        {"T_cable", budget.t_cable_k, s_tcable, std::abs(s_tcable) * budget.t_cable_k, true},
        {"T_A", budget.t_a_k, s_ta, std::abs(s_ta) * budget.t_a_k, true},
        {"G_DUT", budget.g_dut_db, s_g, std::abs(s_g) * budget.g_dut_db, true},
        {"T_eff", budget.t_eff_k, s_teff, std::abs(s_teff) * budget.t_eff_k, !enr_in},
    };
    double ss = 0.0;
    for (auto& t : r.terms)
        if (t.in_default_sum) ss += t.contribution_k * t.contribution_k;
    r.sigma_t_dut_k = std::sqrt(ss);
    return r;
}

struct MonteCarloResult {
    double sigma_t_dut_k = 0.0;
    double mean_t_dut_k = 0.0;
    double p05_k = 0.0, p95_k = 0.0;
    std::size_t samples = 0;
};

// Pushes independent Gaussian parameter draws through the exact chain (no
// linearization).  Deterministic for a fixed seed.
inline MonteCarloResult monte_carlo_tdut(const UncertaintyBudget& budget, const OperatingPoint& op,
                                         std::size_t n, std::uint64_t seed,
                                         BudgetAggregation agg = BudgetAggregation::enr_direct) {
    budget.validate();
    op.validate();
    if (n < 10000) throw Error("monte carlo needs at least 1e4 samples");
    RandomStream rng = RandomStream::substream(seed, 0x756e63ULL, 0);
    std::vector<double> samples(n);
    const bool enr_in = (agg == BudgetAggregation::enr_direct);
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        detail::ChainPerturbation d;
        d.enr_db = enr_in ? rng.normal() * budget.enr_db : 0.0;
        d.l_a_db = rng.normal() * budget.l_a_db;
        d.l_cable_db = rng.normal() * budget.l_cable_db;
        d.t_cable_k = rng.normal() * budget.t_cable_k;
        d.t_a_k = rng.normal() * budget.t_a_k;
        d.g_db = rng.normal() * budget.g_dut_db;
        d.t_eff_k = enr_in ? 0.0 : rng.normal() * budget.t_eff_k;
        samples[i] = detail::chain_t_dut(op, d);
        mean += samples[i];
    }
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (double s : samples) ss += (s - mean) * (s - mean);

    std::sort(samples.begin(), samples.end());
    MonteCarloResult r;
    r.sigma_t_dut_k = std::sqrt(ss / static_cast<double>(n - 1));
    r.mean_t_dut_k = mean;
    r.p05_k = samples[static_cast<std::size_t>(0.05 * static_cast<double>(n))];
    r.p95_k = samples[static_cast<std::size_t>(0.95 * static_cast<double>(n))];
    r.samples = n;
    return r;
}

// --- JSON forms -----------------------------------------------------------

inline nlohmann::json to_json(const UncertaintyBudget& b) {
    return {{"g_dut_db", b.g_dut_db},   {"l_cable_db", b.l_cable_db}, {"l_a_db", b.l_a_db},
            {"t_cable_k", b.t_cable_k}, {"t_a_k", b.t_a_k},           {"enr_db", b.enr_db},
            {"t_eff_k", b.t_eff_k}};
}

inline UncertaintyBudget budget_from_json(const nlohmann::json& j) {
    UncertaintyBudget b;
    b.g_dut_db = j.value("g_dut_db", b.g_dut_db);
    b.l_cable_db = j.value("l_cable_db", b.l_cable_db);
    b.l_a_db = j.value("l_a_db", b.l_a_db);
    b.t_cable_k = j.value("t_cable_k", b.t_cable_k);
    b.t_a_k = j.value("t_a_k", b.t_a_k);
    b.enr_db = j.value("enr_db", b.enr_db);
    b.t_eff_k = j.value("t_eff_k", b.t_eff_k);
    b.validate();
    return b;
}

inline nlohmann::json to_json(const OperatingPoint& op) {
    return {{"y", op.y},
            {"t_hot_k", op.t_hot_k},
            {"t_cold_k", op.t_cold_k},
            {"l_a", op.l_a},
            {"l_cable", op.l_cable},
            {"t_cable_k", op.t_cable_k},
            {"t_a_k", op.t_a_k},
            {"g_dut", op.g_dut},
            {"t_off_k", op.t_off_k},
            {"t_receiver_k", op.t_receiver_k},
            {"g_is_amplitude", op.g_is_amplitude}};
}

inline OperatingPoint operating_point_from_json(const nlohmann::json& j) {
    OperatingPoint op = reference_operating_point();
    op.y = j.value("y", op.y);
    op.t_hot_k = j.value("t_hot_k", op.t_hot_k);
    op.t_cold_k = j.value("t_cold_k", op.t_cold_k);
    op.l_a = j.value("l_a", op.l_a);
    op.l_cable = j.value("l_cable", op.l_cable);
    op.t_cable_k = j.value("t_cable_k", op.t_cable_k);
    op.t_a_k = j.value("t_a_k", op.t_a_k);
    op.g_dut = j.value("g_dut", op.g_dut);
    op.t_off_k = j.value("t_off_k", op.t_off_k);
    op.t_receiver_k = j.value("t_receiver_k", op.t_receiver_k);
    op.g_is_amplitude = j.value("g_is_amplitude", op.g_is_amplitude);
    op.validate();
    return op;
}

inline nlohmann::json to_json(const UncertaintyResult& r) {
    nlohmann::json terms = nlohmann::json::array();
    for (const auto& t : r.terms)
        terms.push_back({{"parameter", t.parameter},
                         {"sigma_input", t.sigma_input},
                         {"sensitivity", t.sensitivity},
                         {"contribution_k", t.contribution_k},
                         {"in_default_sum", t.in_default_sum}});
    return {{"sigma_t_dut_k", r.sigma_t_dut_k},
            {"nominal_t_dut_k", r.nominal_t_dut_k},
            {"aggregation", r.aggregation == BudgetAggregation::enr_direct ? "enr_direct"
                                                                           : "t_eff_alternative"},
            {"terms", terms}};
}

} // namespace cryorf
