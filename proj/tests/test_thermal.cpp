#include <catch2/catch_amalgamated.hpp>

#include <cryorf/thermal.hpp>

#include <fstream>
#include <random>
#include <sstream>

using namespace cryorf;

namespace {

MaterialProperties constant_k_material(double k, double rho = 1e-8) {
    return MaterialProperties("const_k", {1.0, 400.0}, {k, k}, {rho, rho});
}

// k(T) = c*T is exactly representable by the log-log segment model.
MaterialProperties linear_k_material(double c) {
    return MaterialProperties("linear_k", {1.0, 400.0}, {c * 1.0, c * 400.0}, {1e-8, 1e-8});
}

ScalarTrace flat_loss(const FrequencyGrid& g, double db) {
    return ScalarTrace::constant(g, db, Unit::dB);
}

const FrequencyGrid kGrid = FrequencyGrid::linspace(2e9, 10e9, 5);

// Independent conduction oracle: integrate dT/dx = -q/k(T) with RK4 and shoot
// on the heat flux q until the cold-end temperature matches.
std::vector<double> rk4_profile(const MaterialProperties& mat, double t_hot, double t_cold,
                                std::size_t steps) {
    auto integrate = [&](double q, std::vector<double>* out) {
        double t = t_hot;
        if (out) out->push_back(t);
        const double h = 1.0 / static_cast<double>(steps);
        for (std::size_t i = 0; i < steps; ++i) {
            auto f = [&](double temp) { return -q / mat.conductivity(std::clamp(temp, 2.0, 310.0)); };
            const double k1 = f(t);
            const double k2 = f(t + 0.5 * h * k1);
            const double k3 = f(t + 0.5 * h * k2);
            const double k4 = f(t + h * k3);
            t += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            if (out) out->push_back(t);
        }
        return t;
    };
    // bracket the flux
    double qlo = 0.0, qhi = 1.0;
    while (integrate(qhi, nullptr) > t_cold) qhi *= 2.0;
    for (int it = 0; it < 60; ++it) {
        const double qm = 0.5 * (qlo + qhi);
        (integrate(qm, nullptr) > t_cold ? qlo : qhi) = qm;
    }
    std::vector<double> profile;
    profile.reserve(steps + 1);
    integrate(0.5 * (qlo + qhi), &profile);
    return profile;
}

} // namespace

TEST_CASE("temperature profile: constant conductivity gives a linear gradient") {
    CableSection s{constant_k_material(100.0), 1.0, 300.0, 100.0, true, flat_loss(kGrid, 1.0)};
    const auto t = temperature_profile(s, 4);
    REQUIRE(t.size() == 4);
    CHECK_THAT(t[0], Catch::Matchers::WithinAbs(275.0, 1e-9));
    CHECK_THAT(t[1], Catch::Matchers::WithinAbs(225.0, 1e-9));
    CHECK_THAT(t[2], Catch::Matchers::WithinAbs(175.0, 1e-9));
    CHECK_THAT(t[3], Catch::Matchers::WithinAbs(125.0, 1e-9));
}

TEST_CASE("temperature profile: k ~ T gives the analytic sqrt gradient") {
    CableSection s{linear_k_material(0.5), 1.0, 300.0, 60.0, true, flat_loss(kGrid, 1.0)};
    const std::size_t n = 8;
    const auto t = temperature_profile(s, n);
    for (std::size_t i = 0; i < n; ++i) {
        const double x = (static_cast<double>(i) + 0.5) / n;
        const double want = std::sqrt(300.0 * 300.0 - x * (300.0 * 300.0 - 60.0 * 60.0));
        CHECK_THAT(t[i], Catch::Matchers::WithinAbs(want, 1e-9));
    }
}

TEST_CASE("temperature profile: endpoints exact, interior strictly between") {
    CableSection s{materials::becu(), 0.5, 296.0, 50.0, true, flat_loss(kGrid, 1.0)};
    const auto t = temperature_profile(s, 100);
    for (double v : t) {
        CHECK(v < 296.0);
        CHECK(v > 50.0);
    }
    // monotone along the section
    for (std::size_t i = 1; i < t.size(); ++i) CHECK(t[i] < t[i - 1]);

    // signal entering the cold end reverses the ordering
    CableSection r = s;
    r.signal_enters_hot = false;
    const auto tr = temperature_profile(r, 100);
    for (std::size_t i = 0; i < tr.size(); ++i)
        CHECK_THAT(tr[i], Catch::Matchers::WithinAbs(t[t.size() - 1 - i], 1e-9));
}

TEST_CASE("temperature profile matches an RK4 shooting oracle for Cu RRR=100") {
    CableSection s{materials::cu_rrr100(), 1.0, 296.0, 50.0, true, flat_loss(kGrid, 1.0)};
    const std::size_t n = 1000;
    const auto t = temperature_profile(s, n);
    const std::size_t steps = 100000;
    const auto oracle = rk4_profile(s.material, 296.0, 50.0, steps);
    for (std::size_t i = 0; i < n; i += 37) {
        const double x = (static_cast<double>(i) + 0.5) / n;
        const double pos = x * static_cast<double>(steps);
        const auto lo = static_cast<std::size_t>(pos);
        const double frac = pos - static_cast<double>(lo);
        const double want = oracle[lo] * (1.0 - frac) + oracle[lo + 1] * frac;
        CHECK_THAT(t[i], Catch::Matchers::WithinAbs(want, 0.1));
    }
}

TEST_CASE("temperature profile rejects endpoints outside the table") {
    CableSection s{materials::becu(), 0.5, 400.0, 50.0, true, flat_loss(kGrid, 1.0)};
    CHECK_THROWS_WITH(temperature_profile(s, 10),
                      Catch::Matchers::ContainsSubstring("property table"));
}

TEST_CASE("loss distribution") {
    SECTION("uniform temperature gives uniform dB split") {
        CableSection s{materials::becu(), 1.0, 100.0, 100.0, true, flat_loss(kGrid, 3.0)};
        const auto temps = temperature_profile(s, 10);
        const auto w = distribute_loss_weights(s, temps, LossWeighting::sqrt_resistivity);
        for (double x : w) CHECK_THAT(x, Catch::Matchers::WithinAbs(0.1, 1e-12));
    }

    SECTION("resistivity ratio 4:1 splits dB 2:1") {
        MaterialProperties m("ratio", {100.0, 300.0}, {10.0, 10.0}, {1e-8, 4e-8});
        CableSection s{m, 1.0, 300.0, 100.0, true, flat_loss(kGrid, 3.0)};
        const std::vector<double> temps = {300.0, 100.0};
        const auto w = distribute_loss_weights(s, temps, LossWeighting::sqrt_resistivity);
        CHECK_THAT(w[0] / w[1], Catch::Matchers::WithinAbs(2.0, 1e-12));
        CHECK_THAT(w[0] + w[1], Catch::Matchers::WithinAbs(1.0, 1e-15));
    }

    SECTION("element dB losses sum to the section total") {
        std::mt19937_64 g(5);
        std::uniform_real_distribution<double> loss(0.1, 6.0);
        for (int trial = 0; trial < 20; ++trial) {
            CableSection s{materials::becu(), 0.5, 296.0, 50.0, true,
                           flat_loss(kGrid, loss(g))};
            const auto temps = temperature_profile(s, 100);
            const auto w = distribute_loss_weights(s, temps, LossWeighting::sqrt_resistivity);
            double total = 0.0;
            for (double x : w) total += x * s.insertion_loss_db.values[0];
            CHECK(std::abs(total - s.insertion_loss_db.values[0]) <
                  1e-9 * s.insertion_loss_db.values[0]);
        }
    }
}

TEST_CASE("integrated cable noise") {
    SECTION("single element matches the lumped expression") {
        const std::vector<double> l = {2.5}, t = {150.0};
        CHECK_THAT(integrated_cable_noise(l, t), Catch::Matchers::WithinAbs(1.5 * 150.0, 1e-12));
    }
    SECTION("lossless cable adds nothing") {
        const std::vector<double> l = {1.0, 1.0, 1.0}, t = {100.0, 200.0, 300.0};
        CHECK(integrated_cable_noise(l, t) == 0.0);
    }
    SECTION("two elements match a hand-computed Friis cascade") {
        const std::vector<double> l = {1.2, 1.5}, t = {250.0, 80.0};
        // (1.2-1)*250 + (1.5-1)*80*1.2 = 50 + 48
        CHECK_THAT(integrated_cable_noise(l, t), Catch::Matchers::WithinAbs(98.0, 1e-12));
        CHECK_THAT(output_referred_cable_noise(l, t),
                   Catch::Matchers::WithinAbs(98.0 / 1.8, 1e-12));
    }
    SECTION("active element rejected") {
        const std::vector<double> l = {0.9}, t = {100.0};
        CHECK_THROWS_AS(integrated_cable_noise(l, t), Error);
    }
    SECTION("order-dependent for unequal temperatures, loss product invariant") {
        const std::vector<double> l = {1.3, 1.7}, t = {300.0, 4.0};
        const std::vector<double> lr = {1.7, 1.3}, tr = {4.0, 300.0};
        CHECK(integrated_cable_noise(l, t) != integrated_cable_noise(lr, tr));
        CHECK(l[0] * l[1] == lr[0] * lr[1]);
    }
}

TEST_CASE("cable model consistency") {
    const auto spec = default_output_cable(kGrid);
    const CableNoiseModel model(spec);
    CHECK(model.element_count() == 3000);

    SECTION("per-element losses multiply back to the section totals") {
        for (std::size_t fi = 0; fi < kGrid.size(); ++fi) {
            const auto l = model.element_losses_linear(fi);
            double db = 0.0;
            for (double x : l) db += 10.0 * std::log10(x);
            CHECK(std::abs(db - model.total_loss_db(fi)) < 1e-9 * model.total_loss_db(fi));
        }
    }

    SECTION("discretization is converged at n = 1000") {
        auto fine_spec = spec;
        fine_spec.elements_per_section = 2000;
        const CableNoiseModel fine(fine_spec);
        const auto a = model.effective_noise_input_referred();
        const auto b = fine.effective_noise_input_referred();
        for (std::size_t i = 0; i < a.size(); ++i)
            CHECK(std::abs(a.values[i] - b.values[i]) < 1e-3 * a.values[i]);
    }
}

TEST_CASE("lumped temperature fit") {
    SECTION("self-consistent synthetic data returns the generating temperature") {
        std::vector<double> loss = {1.2, 1.5, 2.0, 2.5, 3.0};
        std::vector<double> t_eff(5);
        for (std::size_t i = 0; i < 5; ++i) t_eff[i] = (loss[i] - 1.0) * 123.0;
        const double fit = fit_lumped_temperature(ScalarTrace(kGrid, t_eff, Unit::kelvin),
                                                  ScalarTrace(kGrid, loss, Unit::linear));
        CHECK_THAT(fit, Catch::Matchers::WithinAbs(123.0, 1e-12));
    }

    SECTION("two-point case matches the hand-solved normal equation") {
        const FrequencyGrid g2({1e9, 2e9});
        const ScalarTrace t_eff(g2, {30.0, 100.0}, Unit::kelvin);
        const ScalarTrace loss(g2, {1.25, 1.8}, Unit::linear);
        // T = (0.25*30 + 0.8*100) / (0.25^2 + 0.8^2)
        const double want = (0.25 * 30.0 + 0.8 * 100.0) / (0.0625 + 0.64);
        CHECK_THAT(fit_lumped_temperature(t_eff, loss), Catch::Matchers::WithinAbs(want, 1e-12));
    }

    SECTION("lossless trace is rejected") {
        const ScalarTrace t_eff(kGrid, std::vector<double>(5, 0.0), Unit::kelvin);
        const ScalarTrace loss(kGrid, std::vector<double>(5, 1.0), Unit::linear);
        CHECK_THROWS_AS(fit_lumped_temperature(t_eff, loss), Error);
    }
}

TEST_CASE("default geometry reproduces the lumped cable temperature") {
    const auto grid = FrequencyGrid::linspace(2e9, 26.5e9, 99);
    const CableNoiseModel model(default_output_cable(grid));
    const double fit = fit_lumped_temperature(model.effective_noise_input_referred(),
                                              model.total_loss_linear_trace());
    INFO("fitted lumped cable temperature: " << fit << " K");
    CHECK(fit > 180.0);
    CHECK(fit < 240.0);
}

TEST_CASE("bundled material CSVs stay in sync with the built-in tables") {
    auto check = [](const MaterialProperties& builtin, const std::string& file) {
        std::ifstream is(std::string(CRYORF_SOURCE_DIR) + "/data/materials/" + file);
        REQUIRE(is);
        std::ostringstream ss;
        ss << is.rdbuf();
        const auto parsed = parse_material_csv("csv", ss.str());
        for (double t = builtin.min_temperature(); t <= builtin.max_temperature(); t += 2.5) {
            CHECK_THAT(parsed.conductivity(t),
                       Catch::Matchers::WithinRel(builtin.conductivity(t), 1e-4));
            CHECK_THAT(parsed.resistivity(t),
                       Catch::Matchers::WithinRel(builtin.resistivity(t), 1e-4));
        }
    };
    check(materials::cu_rrr100(), "cu_rrr100.csv");
    check(materials::becu(), "becu.csv");
    CHECK_THROWS_AS(materials::by_name("unobtainium"), Error);
}

TEST_CASE("t_loss limits and hand value") {
    CHECK_THAT(t_loss(1.0, 210.0, 5.0, 3.2), Catch::Matchers::WithinAbs(3.2, 1e-12));
    CHECK_THAT(t_loss(2.0, 210.0, 1.0, 3.2), Catch::Matchers::WithinAbs(210.0, 1e-12));
    // 30 dB attenuator at 3.2 K behind a 3 dB cable lumped at 210 K
    const double v = t_loss(2.0, 210.0, 1000.0, 3.2);
    CHECK_THAT(v, Catch::Matchers::WithinAbs((210.0 + 2.0 * 999.0 * 3.2) / 1999.0, 1e-12));
    CHECK_THAT(v, Catch::Matchers::WithinAbs(3.3034, 1.1e-4));
    CHECK_THROWS_AS(t_loss(0.5, 210.0, 2.0, 3.2), Error);
}
