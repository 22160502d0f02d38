#include <catch2/catch_amalgamated.hpp>

#include <cryorf/metrics.hpp>

#include <random>

using namespace cryorf;

namespace {

const FrequencyGrid kGrid = FrequencyGrid::linspace(2e9, 10e9, 81);

// Saturating amplifier in the power domain: smoothness s -> infinity gives
// the hard limiter min(pin + g, psat).
double rapp_pout_dbm(double pin_dbm, double gain_db, double psat_dbm, double s) {
    const double x = pin_dbm + gain_db - psat_dbm;
    return pin_dbm + gain_db - (10.0 / s) * std::log10(1.0 + std::pow(10.0, s * x / 10.0));
}

PowerSweep make_sweep(double f_hz, double step_db,
                      const std::function<double(double)>& pout_of_pin,
                      double lo = -80.0, double hi = -20.0) {
    PowerSweep s;
    s.frequency_hz = f_hz;
    for (double p = lo; p <= hi + 1e-9; p += step_db) {
        s.pin_dbm.push_back(p);
        s.pout_dbm.push_back(pout_of_pin(p));
    }
    return s;
}

// Definition-faithful brute-force oracle at 0.001 dBm resolution.
double brute_force_op1db(const std::function<double(double)>& pout_of_pin) {
    const double step = 0.001;
    double gain = 0.0;
    std::size_t count = 0;
    for (double p = -80.0; p <= -60.0 + 1e-12; p += step) {
        gain += pout_of_pin(p) - p;
        ++count;
    }
    gain /= static_cast<double>(count);
    for (double p = -60.0; p <= -10.0; p += step) {
        if (p + gain - pout_of_pin(p) >= 1.0) return p + gain - 1.0;
    }
    return std::nan("");
}

} // namespace

TEST_CASE("gain flatness") {
    const BandSpec band{4e9, 8e9};
    SECTION("constant trace has zero flatness") {
        CHECK(gain_flatness(ScalarTrace::constant(kGrid, 37.0, Unit::dB), band) == 0.0);
    }
    SECTION("invariant under adding a constant") {
        std::mt19937_64 g(3);
        std::normal_distribution<double> n(0.0, 1.0);
        std::vector<double> v(kGrid.size());
        for (double& x : v) x = 30.0 + n(g);
        const ScalarTrace t(kGrid, v, Unit::dB);
        for (double& x : v) x += 7.5;
        const ScalarTrace shifted(kGrid, v, Unit::dB);
        CHECK_THAT(gain_flatness(shifted, band),
                   Catch::Matchers::WithinAbs(gain_flatness(t, band), 1e-12));
    }
    SECTION("band outside the grid is an error") {
        CHECK_THROWS_AS(gain_flatness(ScalarTrace::constant(kGrid, 1.0, Unit::dB),
                                      BandSpec{1e9, 8e9}),
                        Error);
        CHECK_THROWS_AS(gain_flatness(ScalarTrace::constant(kGrid, 1.0, Unit::dB),
                                      BandSpec{4e9, 11e9}),
                        Error);
    }
}

TEST_CASE("band compliance") {
    const BandSpec band{3.2e9, 7.3e9};
    SECTION("constant -15 dB passes a -10 dB ceiling") {
        const auto r = band_compliance(ScalarTrace::constant(kGrid, -15.0, Unit::dB), -10.0,
                                       Relation::below, band);
        CHECK(r.pass);
        CHECK(r.violations.empty());
    }
    SECTION("constructed crossing reports exactly the failing grid points") {
        std::vector<double> v(kGrid.size(), -15.0);
        std::vector<double> expect;
        for (std::size_t i = 0; i < kGrid.size(); ++i) {
            if (i % 13 == 0 && band.contains(kGrid[i])) {
                v[i] = -8.0;
                expect.push_back(kGrid[i]);
            }
        }
        const auto r = band_compliance(ScalarTrace(kGrid, v, Unit::dB), -10.0, Relation::below,
                                       band);
        CHECK_FALSE(r.pass);
        CHECK(r.violations == expect);
    }
    SECTION("pass iff violations empty, for the above relation too") {
        const auto r = band_compliance(ScalarTrace::constant(kGrid, 30.0, Unit::dB), 20.0,
                                       Relation::above, band);
        CHECK(r.pass == r.violations.empty());
        CHECK(r.pass);
    }
}

TEST_CASE("p1db extraction") {
    SECTION("a perfectly linear device is reported as not found") {
        const auto sweep = make_sweep(6e9, 1.0, [](double p) { return p + 30.0; });
        const auto r = extract_p1db(sweep);
        CHECK_FALSE(r.found);
        CHECK_THAT(r.small_signal_gain_db, Catch::Matchers::WithinAbs(30.0, 1e-12));
    }

    SECTION("hard limiter matches the closed form") {
        const double g = 35.0, psat = -12.0;
        const auto sweep = make_sweep(6e9, 1.0, [&](double p) { return std::min(p + g, psat); });
        const auto r = extract_p1db(sweep);
        REQUIRE(r.found);
        // deviation reaches 1 dB at pin = psat - g + 1, pout = psat
        CHECK_THAT(r.ip1db_dbm, Catch::Matchers::WithinAbs(psat - g + 1.0, 0.05));
        CHECK_THAT(r.op1db_dbm, Catch::Matchers::WithinAbs(psat, 0.05));
    }

    SECTION("rapp model matches the brute-force fine sweep oracle") {
        std::mt19937_64 rg(29);
        std::uniform_real_distribution<double> gd(20.0, 35.0), sd(1.2, 5.0);
        for (int trial = 0; trial < 20; ++trial) {
            const double g = gd(rg);
            std::uniform_real_distribution<double> pd(g - 36.0, g - 23.0);
            const double psat = pd(rg), s = sd(rg);
            auto curve = [&](double p) { return rapp_pout_dbm(p, g, psat, s); };
            const auto r = extract_p1db(make_sweep(6e9, 1.0, curve));
            const double oracle = brute_force_op1db(curve);
            REQUIRE(r.found);
            REQUIRE(!std::isnan(oracle));
            CHECK_THAT(r.op1db_dbm, Catch::Matchers::WithinAbs(oracle, 0.1));
        }
    }

    SECTION("rapp converges to the hard limiter at high smoothness") {
        const double g = 30.0, psat = -10.0;
        auto rapp = [&](double p) { return rapp_pout_dbm(p, g, psat, 400.0); };
        auto hard = [&](double p) { return std::min(p + g, psat); };
        const auto a = extract_p1db(make_sweep(6e9, 0.25, rapp));
        const auto b = extract_p1db(make_sweep(6e9, 0.25, hard));
        REQUIRE(a.found);
        REQUIRE(b.found);
        CHECK_THAT(a.op1db_dbm, Catch::Matchers::WithinAbs(b.op1db_dbm, 0.01));
    }

    SECTION("common power offset moves both compression points by the offset") {
        const double g = 30.0, psat = -10.0, s = 2.0;
        const auto sweep = make_sweep(6e9, 1.0,
                                      [&](double p) { return rapp_pout_dbm(p, g, psat, s); });
        PowerSweep relabeled = sweep;
        for (double& p : relabeled.pin_dbm) p += 4.0;
        for (double& p : relabeled.pout_dbm) p += 4.0;
        P1dbOptions shifted_window;
        shifted_window.fit_window_low_dbm += 4.0;
        shifted_window.fit_window_high_dbm += 4.0;
        const auto a = extract_p1db(sweep);
        const auto b = extract_p1db(relabeled, shifted_window);
        REQUIRE(a.found);
        REQUIRE(b.found);
        CHECK_THAT(b.ip1db_dbm - a.ip1db_dbm, Catch::Matchers::WithinAbs(4.0, 1e-9));
        CHECK_THAT(b.op1db_dbm - a.op1db_dbm, Catch::Matchers::WithinAbs(4.0, 1e-9));
        CHECK_THAT(b.small_signal_gain_db, Catch::Matchers::WithinAbs(a.small_signal_gain_db, 1e-9));
    }

    SECTION("expansion is flagged separately") {
        auto curve = [](double p) {
            const double bump = (p > -50.0) ? 0.5 : 0.0; // gain expansion region
            return std::min(p + 30.0 + bump, -10.0);
        };
        const auto r = extract_p1db(make_sweep(6e9, 1.0, curve));
        CHECK(r.expansion_flagged);
    }

    SECTION("too few window points is an error") {
        PowerSweep s = make_sweep(6e9, 1.0, [](double p) { return p + 30.0; }, -61.0, -20.0);
        CHECK_THROWS_AS(extract_p1db(s), Error);
    }

    SECTION("sweep CSV round trip") {
        const auto sweep = make_sweep(6e9, 1.0, [](double p) { return std::min(p + 30.0, -12.0); });
        const auto back = parse_power_sweep_csv(write_power_sweep_csv(sweep));
        CHECK(back.frequency_hz == sweep.frequency_hz);
        CHECK(back.pin_dbm == sweep.pin_dbm);
        CHECK(back.pout_dbm == sweep.pout_dbm);
    }
}

TEST_CASE("repeatability") {
    const auto grid = FrequencyGrid::linspace(4e9, 8e9, 201);
    SECTION("identical traces give zero spread") {
        const auto t = ScalarTrace::constant(grid, 2.2, Unit::kelvin);
        const auto r = repeatability_ci({t, t, t});
        for (double v : r.two_sigma.values) CHECK(v == 0.0);
        for (double v : r.mean.values) CHECK(v == 2.2);
    }

    SECTION("known-sigma gaussian ensemble") {
        std::mt19937_64 g(31);
        std::normal_distribution<double> noise(0.0, 0.040);
        std::vector<ScalarTrace> traces;
        for (int k = 0; k < 9; ++k) {
            std::vector<double> v(grid.size());
            for (double& x : v) x = 2.2 + noise(g);
            traces.emplace_back(grid, std::move(v), Unit::kelvin);
        }
        const auto r = repeatability_ci(traces);
        // per-point estimate is chi-distributed with 8 dof; all points must
        // sit inside generous quantile bounds and the average close to 80 mK
        double sum = 0.0;
        for (double v : r.two_sigma.values) {
            CHECK(v > 0.080 * 0.35);
            CHECK(v < 0.080 * 1.9);
            sum += v;
        }
        const double avg = sum / static_cast<double>(grid.size());
        CHECK_THAT(avg, Catch::Matchers::WithinAbs(0.080 * 0.9693, 0.004));
    }

    SECTION("estimate scales linearly with the injected noise") {
        std::mt19937_64 g(37);
        std::normal_distribution<double> n01(0.0, 1.0);
        std::vector<std::vector<double>> base(9, std::vector<double>(grid.size()));
        for (auto& row : base)
            for (double& x : row) x = n01(g);
        auto ensemble = [&](double sigma) {
            std::vector<ScalarTrace> traces;
            for (const auto& row : base) {
                std::vector<double> v(grid.size());
                for (std::size_t i = 0; i < grid.size(); ++i) v[i] = 5.0 + sigma * row[i];
                traces.emplace_back(grid, std::move(v), Unit::kelvin);
            }
            return repeatability_ci(traces);
        };
        const auto r1 = ensemble(0.05);
        const auto r2 = ensemble(0.10);
        for (std::size_t i = 0; i < grid.size(); ++i)
            CHECK_THAT(r2.two_sigma.values[i],
                       Catch::Matchers::WithinRel(2.0 * r1.two_sigma.values[i], 1e-9));
    }

    SECTION("mismatched grids are rejected") {
        const auto other = FrequencyGrid::linspace(4e9, 8e9, 11);
        CHECK_THROWS_AS(repeatability_ci({ScalarTrace::constant(grid, 1.0, Unit::kelvin),
                                          ScalarTrace::constant(other, 1.0, Unit::kelvin)}),
                        Error);
    }
}
