#include <catch2/catch_amalgamated.hpp>

#include <cryorf/noise.hpp>

#include <random>

using namespace cryorf;

namespace {
const FrequencyGrid kGrid = FrequencyGrid::linspace(4e9, 8e9, 5);

EnrTable enr_flat(double enr_db, double t_off = 296.0) {
    return {ScalarTrace::constant(kGrid, enr_db, Unit::dB), t_off};
}
} // namespace

TEST_CASE("hot temperature from ENR") {
    SECTION("0 dB at 290 K off-state doubles the reference") {
        const auto t = hot_temperature(enr_flat(0.0, 290.0));
        for (double v : t.values) CHECK_THAT(v, Catch::Matchers::WithinAbs(580.0, 1e-12));
    }
    SECTION("15 dB at 296 K off-state") {
        const auto t = hot_temperature(enr_flat(15.0, 296.0));
        // 290 * 10^1.5 + 296
        const double want = 290.0 * std::pow(10.0, 1.5) + 296.0;
        CHECK_THAT(want, Catch::Matchers::WithinAbs(9466.605, 5e-3));
        for (double v : t.values) CHECK_THAT(v, Catch::Matchers::WithinRel(want, 1e-12));
    }
    SECTION("very low ENR approaches the off-state temperature") {
        const auto t = hot_temperature(enr_flat(-200.0, 296.0));
        for (double v : t.values) CHECK_THAT(v, Catch::Matchers::WithinAbs(296.0, 1e-9));
    }
}

TEST_CASE("y factor") {
    const auto one = ScalarTrace::constant(kGrid, 1e-15, Unit::linear);
    SECTION("equal powers give Y = 1, flagged invalid") {
        const auto y = y_factor(one, one);
        for (std::size_t i = 0; i < y.y.size(); ++i) {
            CHECK(y.y.values[i] == 1.0);
            CHECK_FALSE(y.valid[i]);
        }
    }
    SECTION("doubled power gives Y = 2") {
        auto two = one;
        for (double& v : two.values) v *= 2.0;
        const auto y = y_factor(two, one);
        for (std::size_t i = 0; i < y.y.size(); ++i) {
            CHECK_THAT(y.y.values[i], Catch::Matchers::WithinRel(2.0, 1e-15));
            CHECK(y.valid[i]);
        }
    }
    SECTION("dBm arithmetic: -90 and -93 dBm give 1.9953") {
        const double y = watts_from_dbm(-90.0) / watts_from_dbm(-93.0);
        CHECK_THAT(y, Catch::Matchers::WithinAbs(1.9953, 1e-4));
    }
    SECTION("non-positive cold power is an error") {
        auto zero = one;
        zero.values[2] = 0.0;
        CHECK_THROWS_AS(y_factor(one, zero), Error);
    }
}

TEST_CASE("dut noise temperature from Y") {
    auto make = [](double y) {
        YFactorResult r{ScalarTrace::constant(kGrid, y, Unit::linear), {}};
        r.valid.assign(kGrid.size(), y > 1.0);
        return r;
    };
    const auto t300 = ScalarTrace::constant(kGrid, 300.0, Unit::kelvin);

    SECTION("zero case") {
        const auto t = dut_noise_temperature(make(3.0), t300,
                                             ScalarTrace::constant(kGrid, 100.0, Unit::kelvin));
        for (double v : t.trace.values) CHECK_THAT(v, Catch::Matchers::WithinAbs(0.0, 1e-12));
    }
    SECTION("hand evaluation") {
        const auto t = dut_noise_temperature(make(2.0), t300,
                                             ScalarTrace::constant(kGrid, 50.0, Unit::kelvin));
        for (double v : t.trace.values) CHECK_THAT(v, Catch::Matchers::WithinAbs(200.0, 1e-12));
    }
    SECTION("negative results are flagged, not clamped") {
        const auto t = dut_noise_temperature(make(4.0), t300,
                                             ScalarTrace::constant(kGrid, 110.0, Unit::kelvin));
        for (std::size_t i = 0; i < t.trace.size(); ++i) {
            CHECK(t.trace.values[i] < 0.0);
            CHECK(t.negative[i]);
            CHECK(t.valid[i]);
        }
    }
    SECTION("linearity in T_cold: slope is exactly -Y/(Y-1)") {
        std::mt19937_64 g(17);
        std::uniform_real_distribution<double> yd(1.1, 100.0), td(1.0, 1000.0), dd(1.0, 50.0);
        for (int trial = 0; trial < 1000; ++trial) {
            const double y = yd(g), th = td(g), tc = td(g), dt = dd(g);
            const auto r = make(y);
            const auto a = dut_noise_temperature(
                r, ScalarTrace::constant(kGrid, th, Unit::kelvin),
                ScalarTrace::constant(kGrid, tc, Unit::kelvin));
            const auto b = dut_noise_temperature(
                r, ScalarTrace::constant(kGrid, th, Unit::kelvin),
                ScalarTrace::constant(kGrid, tc + dt, Unit::kelvin));
            const double got = b.trace.values[0] - a.trace.values[0];
            const double want = -y / (y - 1.0) * dt;
            CHECK(std::abs(got - want) <= 1e-12 * std::max(1.0, std::abs(want)));
        }
    }
}

TEST_CASE("input noise temperature modes") {
    SECTION("lossless limit returns the source temperature") {
        CHECK(input_noise_temperature(123.0, 1.0, 3.2, 1.0, 210.0, InputNoiseMode::full) == 123.0);
        CHECK(input_noise_temperature(123.0, 1.0, 3.2, 1.0, 210.0, InputNoiseMode::lumped) == 123.0);
    }
    SECTION("term-by-term hand evaluation") {
        const double t = input_noise_temperature(9466.8, 1000.0, 3.2, 2.0, 210.0,
                                                 InputNoiseMode::full);
        CHECK_THAT(t, Catch::Matchers::WithinAbs(4.7334 + 0.105 + 3.1968, 1e-4));
        CHECK_THAT(t, Catch::Matchers::WithinAbs(8.0352, 1e-4));
    }
    SECTION("full and lumped modes agree identically") {
        std::mt19937_64 g(19);
        std::uniform_real_distribution<double> ld(0.0, 4.0), td(-1.0, 4.0);
        for (int trial = 0; trial < 10000; ++trial) {
            const double la = std::pow(10.0, ld(g));
            const double lc = std::pow(10.0, ld(g));
            const double ts = std::pow(10.0, td(g));
            const double ta = std::pow(10.0, td(g));
            const double tc = std::pow(10.0, td(g));
            const double full = input_noise_temperature(ts, la, ta, lc, tc, InputNoiseMode::full);
            const double lump = input_noise_temperature(ts, la, ta, lc, tc, InputNoiseMode::lumped);
            CHECK(std::abs(full - lump) <= 1e-12 * std::max(std::abs(full), 1.0));
        }
    }
    SECTION("loss below one is rejected") {
        CHECK_THROWS_AS(input_noise_temperature(100.0, 0.5, 3.2, 2.0, 210.0, InputNoiseMode::full),
                        Error);
    }
}

TEST_CASE("loss tables") {
    SECTION("6 dB system loss with a 30 dB attenuator splits 33 / 3") {
        const auto t = build_loss_tables(ScalarTrace::constant(kGrid, 6.0, Unit::dB),
                                         ScalarTrace::constant(kGrid, 30.0, Unit::dB), 3.3);
        for (std::size_t i = 0; i < kGrid.size(); ++i) {
            CHECK_THAT(t.before_db.values[i], Catch::Matchers::WithinAbs(33.0, 1e-12));
            CHECK_THAT(t.after_db.values[i], Catch::Matchers::WithinAbs(3.0, 1e-12));
        }
    }
    SECTION("zero losses give zero tables") {
        const auto t = build_loss_tables(ScalarTrace::constant(kGrid, 0.0, Unit::dB),
                                         ScalarTrace::constant(kGrid, 0.0, Unit::dB), 3.3);
        for (std::size_t i = 0; i < kGrid.size(); ++i) {
            CHECK(t.before_db.values[i] == 0.0);
            CHECK(t.after_db.values[i] == 0.0);
        }
    }
    SECTION("split conserves the total at every frequency and fraction") {
        std::mt19937_64 g(23);
        std::uniform_real_distribution<double> ld(0.0, 10.0), fd(0.0, 1.0);
        for (int trial = 0; trial < 100; ++trial) {
            const double sys = ld(g), att = ld(g), frac = fd(g);
            const auto t = build_loss_tables(ScalarTrace::constant(kGrid, sys, Unit::dB),
                                             ScalarTrace::constant(kGrid, att, Unit::dB), 3.3,
                                             frac);
            for (std::size_t i = 0; i < kGrid.size(); ++i)
                CHECK_THAT(t.before_db.values[i] + t.after_db.values[i],
                           Catch::Matchers::WithinAbs(sys + att, 1e-12));
        }
    }
    SECTION("negative loss is rejected") {
        CHECK_THROWS_AS(build_loss_tables(ScalarTrace::constant(kGrid, -1.0, Unit::dB),
                                          ScalarTrace::constant(kGrid, 30.0, Unit::dB), 3.3),
                        Error);
    }
}

TEST_CASE("second stage correction") {
    CHECK(second_stage_correction(10.0, 50.0, 0.0) == 10.0);
    CHECK_THAT(second_stage_correction(15.0, 100.0, 1000.0),
               Catch::Matchers::WithinAbs(5.0, 1e-12));
    CHECK_THAT(second_stage_correction(15.0, 1e12, 1000.0),
               Catch::Matchers::WithinAbs(15.0, 1e-8));
    CHECK_THROWS_AS(second_stage_correction(15.0, 0.0, 1000.0), Error);
}

TEST_CASE("noise figure from temperature") {
    CHECK(noise_figure_from_temperature(0.0) == 0.0);
    CHECK_THAT(noise_figure_from_temperature(290.0), Catch::Matchers::WithinAbs(3.0103, 1e-4));
    CHECK_THAT(noise_figure_from_temperature(6.0), Catch::Matchers::WithinAbs(0.08894, 1e-4));
    CHECK_THROWS_AS(noise_figure_from_temperature(-1.0), Error);
}

TEST_CASE("receiver calibration recovers the receiver temperature") {
    const auto enr = enr_flat(15.0);
    const auto t_hot = hot_temperature(enr);
    const double t_rx_true = 1234.0;
    std::vector<double> nh(kGrid.size()), nc(kGrid.size());
    for (std::size_t i = 0; i < kGrid.size(); ++i) {
        nh[i] = dbm_from_watts(constants::boltzmann_w_per_hz_k * (t_hot.values[i] + t_rx_true));
        nc[i] = dbm_from_watts(constants::boltzmann_w_per_hz_k * (296.0 + t_rx_true));
    }
    const auto cal = receiver_calibration(enr, ScalarTrace(kGrid, nh, Unit::dBm_per_Hz),
                                          ScalarTrace(kGrid, nc, Unit::dBm_per_Hz));
    for (double v : cal.t_receiver_k.values)
        CHECK_THAT(v, Catch::Matchers::WithinRel(t_rx_true, 1e-9));
}

TEST_CASE("pipeline recovers a synthetic DUT exactly") {
    // Hand-built forward model: source -> before loss at T_b -> DUT -> after
    // loss at T_a -> receiver.  The pipeline must invert it to numerical
    // precision when the corrections match the truth.
    const double lb_db = 33.0, la_db = 3.0, t_b = 3.3, t_a = 210.0;
    const double g_dut = linear_from_db(37.0), t_n = 2.2, t_rx = 900.0;
    const auto enr = enr_flat(17.0);
    const auto t_hot_src = hot_temperature(enr);

    const double lb = linear_from_db(lb_db), la = linear_from_db(la_db);
    auto forward = [&](double t_src) {
        const double t_in = t_src / lb + (1.0 - 1.0 / lb) * t_b;
        const double t_out = g_dut * (t_in + t_n);
        const double t_sa = t_out / la + (1.0 - 1.0 / la) * t_a + t_rx;
        return dbm_from_watts(constants::boltzmann_w_per_hz_k * t_sa);
    };
    std::vector<double> nh(kGrid.size()), nc(kGrid.size()), ch(kGrid.size()), cc(kGrid.size());
    for (std::size_t i = 0; i < kGrid.size(); ++i) {
        nh[i] = forward(t_hot_src.values[i]);
        nc[i] = forward(296.0);
        ch[i] = dbm_from_watts(constants::boltzmann_w_per_hz_k * (t_hot_src.values[i] + t_rx));
        cc[i] = dbm_from_watts(constants::boltzmann_w_per_hz_k * (296.0 + t_rx));
    }
    const auto rx = receiver_calibration(enr, ScalarTrace(kGrid, ch, Unit::dBm_per_Hz),
                                         ScalarTrace(kGrid, cc, Unit::dBm_per_Hz));
    PipelineCorrections corr;
    corr.losses = {ScalarTrace::constant(kGrid, lb_db, Unit::dB),
                   ScalarTrace::constant(kGrid, la_db, Unit::dB), t_b};
    corr.before_temperature_k = ScalarTrace::constant(kGrid, t_b, Unit::kelvin);
    corr.after_temperature_k = ScalarTrace::constant(kGrid, t_a, Unit::kelvin);

    const auto res = run_y_factor_pipeline(enr, rx, ScalarTrace(kGrid, nh, Unit::dBm_per_Hz),
                                           ScalarTrace(kGrid, nc, Unit::dBm_per_Hz), corr);
    REQUIRE(res.t_dut_k.all_valid());
    for (std::size_t i = 0; i < kGrid.size(); ++i) {
        CHECK_THAT(res.t_dut_k.trace.values[i], Catch::Matchers::WithinAbs(t_n, 1e-9));
        CHECK_THAT(res.gain_db.values[i], Catch::Matchers::WithinAbs(37.0, 1e-9));
    }
}
