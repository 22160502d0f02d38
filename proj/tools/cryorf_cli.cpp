// Command-line front end: calibration, de-embedding, the Y-factor noise
// pipeline, P1dB extraction, the cable thermal model, uncertainty budgets,
// scenario simulation and the two-phase qualification protocol.
//
// Exit codes: 0 success / PASS verdict, 1 FAIL verdict, 2 execution error.

#include <CLI11.hpp>

#include <cryorf/cryorf.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace cryorf;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw Error("cannot open " + path);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

void write_file(const fs::path& path, const std::string& content) {
    fs::create_directories(path.parent_path().empty() ? "." : path.parent_path());
    std::ofstream os(path);
    if (!os) throw Error("cannot write " + path.string());
    os << content;
}

nlohmann::json parse_json_file(const std::string& path) {
    try {
        return nlohmann::json::parse(slurp(path));
    } catch (const nlohmann::json::exception& e) {
        throw Error("JSON parse error in " + path + ": " + e.what());
    }
}

// Trace CSV that may omit the unit header (loss tables, ENR tables).
ScalarTrace load_trace(const std::string& path, Unit fallback) {
    auto t = load_trace_csv(path);
    if (t.unit == Unit::linear) t.unit = fallback;
    return t;
}

struct GlobalArgs {
    std::string config;
    std::string out = ".";
    std::string format = "json";
    std::optional<std::uint64_t> seed;
};

QualificationInput make_qual_input(const GlobalArgs& g, const std::string& limits_path) {
    QualificationInput in;
    in.config_text = slurp(g.config);
    in.scenario = scenario_from_json(nlohmann::json::parse(in.config_text));
    const auto lj = parse_json_file(limits_path);
    in.limits = limits_from_json(lj);
    in.options = run_options_from_json(lj);
    in.options.seed = g.seed;
    return in;
}

void emit_report(const RunRecord& rec, const GlobalArgs& g) {
    const fs::path out(g.out);
    const auto path = save_run(rec, out);
    std::cout << "record: " << path.string() << "\n";
    const auto j = rec.file_json();
    if (g.format == "markdown") {
        const fs::path md = out / (rec.run_id + ".md");
        write_file(md, render_markdown(j));
        std::cout << "report: " << md.string() << "\n";
    } else if (g.format == "csv") {
        const fs::path dir = out / (rec.run_id + "_csv");
        for (const auto& [name, content] : render_csv_bundle(j))
            write_file(dir / name, content);
        std::cout << "csv bundle: " << dir.string() << "\n";
    }
    std::cout << "verdict: " << to_string(rec.verdict) << "\n";
}

int run_cli(int argc, char** argv) {
    CLI::App app{"cryogenic LNA characterization toolkit"};
    app.require_subcommand(1);
    app.fallthrough();

    GlobalArgs g;
    app.add_option("--config", g.config, "scenario JSON file");
    app.add_option("--seed", g.seed, "random seed override");
    app.add_option("--out", g.out, "output directory");
    app.add_option("--format", g.format, "report format: json|markdown|csv")
        ->check(CLI::IsMember({"json", "markdown", "csv"}));

    // --- calibrate ---------------------------------------------------------
    auto* cal = app.add_subcommand("calibrate", "solve a TRL calibration from raw standards");
    std::string thru_path, line_path, r1_path, r2_path, cal_out = "error_model.json";
    std::string reflect_kind = "short";
    cal->add_option("--thru", thru_path, "raw THRU .s2p")->required();
    cal->add_option("--line", line_path, "raw LINE .s2p")->required();
    cal->add_option("--reflect1", r1_path, "raw port-1 reflect CSV (freq_hz,re,im)")->required();
    cal->add_option("--reflect2", r2_path, "raw port-2 reflect CSV (freq_hz,re,im)")->required();
    cal->add_option("--model", cal_out, "output error-model JSON");
    cal->add_option("--reflect-kind", reflect_kind, "short|open")
        ->check(CLI::IsMember({"short", "open"}));
    cal->callback([&] {
        TrlStandardsMeasurement m;
        m.m_thru = load_touchstone(thru_path);
        m.m_line = load_touchstone(line_path);
        m.m_reflect_p1 = load_reflection_csv(r1_path);
        m.m_reflect_p2 = load_reflection_csv(r2_path);
        m.reflect_kind = (reflect_kind == "open") ? ReflectKind::OPEN : ReflectKind::SHORT;
        const auto em = solve_trl(m);
        write_file(cal_out, to_json(em).dump(2) + "\n");
        const auto v = verify_cal(em, m.m_thru);
        std::cout << "error model: " << cal_out << "\n"
                  << "self-thru residual: " << v.max_abs_db << " dB\n"
                  << "ill-conditioned points: " << em.ill_conditioned_points().size() << "\n";
    });

    // --- deembed -----------------------------------------------------------
    auto* dem = app.add_subcommand("deembed", "remove error boxes from a raw measurement");
    std::string model_path, raw_path, dut_out = "dut.s2p";
    dem->add_option("--model", model_path, "error-model JSON from calibrate")->required();
    dem->add_option("--input", raw_path, "raw DUT .s2p")->required();
    dem->add_option("--output", dut_out, "corrected .s2p");
    dem->callback([&] {
        const auto em = error_model_from_json(parse_json_file(model_path));
        const auto dut = deembed(em, load_touchstone(raw_path));
        save_touchstone(dut, dut_out);
        std::cout << "corrected: " << dut_out << "\n";
    });

    // --- noise -------------------------------------------------------------
    auto* noi = app.add_subcommand("noise", "cold-attenuator Y-factor pipeline");
    std::string enr_path, nh_path, nc_path, ch_path, cc_path, before_path, after_path;
    std::string cold_ref_path;
    double t_loss_opt = 0.0, t_off = 296.0;
    noi->add_option("--enr", enr_path, "ENR table CSV (freq_hz,enr_db)")->required();
    noi->add_option("--hot", nh_path, "hot noise density CSV, dBm/Hz")->required();
    noi->add_option("--cold", nc_path, "cold noise density CSV, dBm/Hz")->required();
    noi->add_option("--cal-hot", ch_path, "receiver-cal hot density CSV")->required();
    noi->add_option("--cal-cold", cc_path, "receiver-cal cold density CSV")->required();
    noi->add_option("--before", before_path, "before-DUT loss table CSV, dB")->required();
    noi->add_option("--after", after_path, "after-DUT loss table CSV, dB")->required();
    noi->add_option("--t-loss", t_loss_opt, "loss table temperature, K")->required();
    noi->add_option("--cold-reference", cold_ref_path,
                    "optional DUT-plane cold reference trace CSV, K");
    noi->add_option("--t-off", t_off, "noise source off-state temperature, K");
    noi->callback([&] {
        EnrTable enr{load_trace(enr_path, Unit::dB), t_off};
        const auto rx = receiver_calibration(enr, load_trace(ch_path, Unit::dBm_per_Hz),
                                             load_trace(cc_path, Unit::dBm_per_Hz));
        PipelineCorrections corr;
        corr.losses = {load_trace(before_path, Unit::dB), load_trace(after_path, Unit::dB),
                       t_loss_opt};
        if (!cold_ref_path.empty())
            corr.cold_reference_k = load_trace(cold_ref_path, Unit::kelvin);
        const auto res = run_y_factor_pipeline(enr, rx, load_trace(nh_path, Unit::dBm_per_Hz),
                                               load_trace(nc_path, Unit::dBm_per_Hz), corr);
        const fs::path out(g.out);
        write_file(out / "t_dut_k.csv", write_trace_csv(res.t_dut_k.trace));
        write_file(out / "gain_db.csv", write_trace_csv(res.gain_db));
        write_file(out / "nf_db.csv", write_trace_csv(res.noise_figure_db()));
        std::size_t invalid = 0, negative = 0;
        for (auto v : res.t_dut_k.valid) invalid += v ? 0 : 1;
        for (auto v : res.t_dut_k.negative) negative += v ? 1 : 0;
        std::cout << "wrote t_dut_k.csv, gain_db.csv, nf_db.csv under " << g.out << "\n"
                  << "invalid points (Y <= 1 or unusable): " << invalid << "\n"
                  << "negative (unphysical) points: " << negative << "\n";
    });

    // --- p1db --------------------------------------------------------------
    auto* p1 = app.add_subcommand("p1db", "extract 1 dB compression from a power sweep");
    std::string sweep_path;
    std::vector<double> window;
    p1->add_option("--sweep", sweep_path, "power sweep CSV (pin_dbm,pout_dbm)")->required();
    p1->add_option("--window", window, "small-signal fit window, dBm (two values)")
        ->expected(2);
    p1->callback([&] {
        P1dbOptions opt;
        if (window.size() == 2) {
            opt.fit_window_low_dbm = window[0];
            opt.fit_window_high_dbm = window[1];
        }
        const auto r = extract_p1db(parse_power_sweep_csv(slurp(sweep_path)), opt);
        nlohmann::json j{{"found", r.found},
                         {"small_signal_gain_db", r.small_signal_gain_db},
                         {"expansion_flagged", r.expansion_flagged}};
        if (r.found) {
            j["ip1db_dbm"] = r.ip1db_dbm;
            j["op1db_dbm"] = r.op1db_dbm;
        } else {
            j["note"] = r.note;
        }
        std::cout << j.dump(2) << "\n";
    });

    // --- thermal -----------------------------------------------------------
    auto* th = app.add_subcommand("thermal", "cable gradient/noise model and lumped fit");
    th->callback([&] {
        FrequencyGrid grid = FrequencyGrid::linspace(2e9, 26.5e9, 99);
        CableLossCoefficients coeff;
        std::size_t elements = 1000;
        if (!g.config.empty()) {
            const auto sc = load_scenario(g.config);
            grid = sc.testbed.grid;
            coeff = sc.testbed.cable_loss;
            elements = sc.testbed.elements_per_section;
        }
        auto spec = default_output_cable(grid, coeff);
        spec.elements_per_section = elements;
        const CableNoiseModel model(spec);
        const auto t_eff = model.effective_noise_input_referred();
        const auto loss = model.total_loss_linear_trace();
        const double t_cable = fit_lumped_temperature(t_eff, loss);
        const fs::path out(g.out);
        write_file(out / "cable_t_eff_k.csv", write_trace_csv(t_eff));
        write_file(out / "cable_loss_db.csv", write_trace_csv(model.total_loss_db_trace()));
        nlohmann::json j{{"elements", model.element_count()},
                         {"fitted_cable_temperature_k", t_cable},
                         {"t_loss_30db_attenuator_k",
                          t_loss(loss.values[loss.size() / 2], t_cable, 1000.0, 3.2)}};
        std::cout << j.dump(2) << "\n";
    });

    // --- uncertainty -------------------------------------------------------
    auto* unc = app.add_subcommand("uncertainty", "propagate the parameter budget to T_DUT");
    std::string budget_path, op_path;
    std::size_t mc_samples = 100000;
    unc->add_option("--budget", budget_path, "budget JSON (defaults bundled)");
    unc->add_option("--op", op_path, "operating point JSON (defaults to the reference point)");
    unc->add_option("--samples", mc_samples, "Monte Carlo sample count");
    unc->callback([&] {
        const UncertaintyBudget budget =
            budget_path.empty() ? UncertaintyBudget{} : budget_from_json(parse_json_file(budget_path));
        const OperatingPoint op = op_path.empty()
                                      ? reference_operating_point()
                                      : operating_point_from_json(parse_json_file(op_path));
        const auto analytic = propagate_tdut(budget, op);
        const auto mc = monte_carlo_tdut(budget, op, mc_samples, g.seed.value_or(1));
        nlohmann::json j = to_json(analytic);
        j["monte_carlo"] = {{"sigma_t_dut_k", mc.sigma_t_dut_k},
                            {"mean_t_dut_k", mc.mean_t_dut_k},
                            {"samples", mc.samples},
                            {"p05_k", mc.p05_k},
                            {"p95_k", mc.p95_k}};
        std::cout << j.dump(2) << "\n";
    });

    // --- simulate ----------------------------------------------------------
    auto* sim = app.add_subcommand("simulate", "run the virtual instruments on a scenario");
    sim->callback([&] {
        if (g.config.empty()) throw Error("simulate requires --config");
        const std::string text = slurp(g.config);
        auto sc = scenario_from_json(nlohmann::json::parse(text));
        if (g.seed) sc.testbed.seed = *g.seed;
        VirtualTestbed bed(sc);
        const fs::path out = fs::path(g.out) / (sc.name + "_sim");

        const auto standards = bed.measure_trl_standards();
        write_file(out / "thru_raw.s2p", write_touchstone(standards.m_thru));
        write_file(out / "line_raw.s2p", write_touchstone(standards.m_line));
        write_file(out / "reflect_p1.csv", write_reflection_csv(standards.m_reflect_p1));
        write_file(out / "reflect_p2.csv", write_reflection_csv(standards.m_reflect_p2));
        const auto dut_raw = bed.vna_measure(SwitchState::both(SwitchPort::DUT));
        write_file(out / "dut_raw.s2p", write_touchstone(dut_raw));
        write_file(out / "sa_hot_dbm_hz.csv",
                   write_trace_csv(bed.sa_measure(NoiseSourceState::hot, true)));
        write_file(out / "sa_cold_dbm_hz.csv",
                   write_trace_csv(bed.sa_measure(NoiseSourceState::cold, true)));
        write_file(out / "rx_cal_hot_dbm_hz.csv",
                   write_trace_csv(bed.sa_receiver_cal(NoiseSourceState::hot)));
        write_file(out / "rx_cal_cold_dbm_hz.csv",
                   write_trace_csv(bed.sa_receiver_cal(NoiseSourceState::cold)));
        write_file(out / "enr_db.csv", write_trace_csv(sc.testbed.noise_source.enr_db));
        const auto sweep = bed.power_sweep(0.5 * (bed.grid().front() + bed.grid().back()));
        write_file(out / "power_sweep.csv", write_power_sweep_csv(sweep));

        nlohmann::json manifest{{"schema", 1},
                                {"scenario", sc.name},
                                {"seed", sc.testbed.seed},
                                {"config_hash",
                                 cryorf::detail::hex64(cryorf::detail::fnv1a64(text))},
                                {"measurement_calls", bed.call_count()}};
        write_file(out / "manifest.json", manifest.dump(2) + "\n");
        std::cout << "simulated measurement set under " << out.string() << "\n";
    });

    // --- phase1 / phase2 ----------------------------------------------------
    auto* p1cmd = app.add_subcommand("phase1", "qualify the setup against the control device");
    std::string limits_path;
    p1cmd->add_option("--limits", limits_path, "limits/tolerances JSON")->required();
    int phase_exit = 0;
    p1cmd->callback([&] {
        if (g.config.empty()) throw Error("phase1 requires --config");
        const auto rec = run_phase1(make_qual_input(g, limits_path));
        emit_report(rec, g);
        phase_exit = (rec.verdict == Verdict::PASS) ? 0 : 1;
    });

    auto* p2cmd = app.add_subcommand("phase2", "test a device against integrator limits");
    std::string limits2_path, phase1_path;
    p2cmd->add_option("--limits", limits2_path, "limits JSON")->required();
    p2cmd->add_option("--phase1-record", phase1_path, "passing phase-1 run record")->required();
    p2cmd->callback([&] {
        if (g.config.empty()) throw Error("phase2 requires --config");
        const auto rec =
            run_phase2(make_qual_input(g, limits2_path), parse_json_file(phase1_path));
        emit_report(rec, g);
        phase_exit = (rec.verdict == Verdict::PASS) ? 0 : 1;
    });

    // --- report ------------------------------------------------------------
    auto* rep = app.add_subcommand("report", "re-render a stored run record");
    std::string run_path;
    rep->add_option("--run", run_path, "run record JSON")->required();
    rep->callback([&] {
        const auto j = load_run(run_path);
        if (g.format == "markdown") {
            std::cout << render_markdown(j);
        } else if (g.format == "csv") {
            const fs::path dir = fs::path(g.out) / (j.value("run_id", "run") + "_csv");
            for (const auto& [name, content] : render_csv_bundle(j))
                write_file(dir / name, content);
            std::cout << "csv bundle: " << dir.string() << "\n";
        } else {
            std::cout << j.dump(2) << "\n";
        }
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return (app.exit(e) == 0) ? 0 : 2;
    }
    return phase_exit;
}

} // namespace

int main(int argc, char** argv) {
    try {
        return run_cli(argc, argv);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
