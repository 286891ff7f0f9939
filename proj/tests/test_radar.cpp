#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <vector>

#include "seqdet/error.hpp"
#include "seqdet/radar.hpp"
#include "seqdet/stats.hpp"

using namespace seqdet;
using models::Hypothesis;
using radar::cdouble;

namespace {

radar::RadarScenario default_scenario(int num_tx, int num_rx, radar::SwerlingCase swerling,
                                      radar::RadarDetector detector, double energy = 2.0) {
    radar::RadarScenario s;
    s.geometry = radar::paper_geometry(num_tx, num_rx);
    s.num_tx = num_tx;
    s.num_rx = num_rx;
    s.total_energy = energy;
    s.swerling = swerling;
    s.detector = detector;
    s.validate();
    return s;
}

} // namespace

TEST_CASE("paper geometry distances") {
    const auto g = radar::paper_geometry(2, 2);
    CHECK(g.path_distance(0, 0) ==
          doctest::Approx(std::sqrt(586.0) + std::sqrt(596.0)).epsilon(1e-12));
    CHECK(g.path_delay(0, 0) == doctest::Approx((std::sqrt(586.0) + std::sqrt(596.0)) / 299792.458));
    CHECK_FALSE(g.has_degenerate_path());
    CHECK_THROWS_AS(radar::paper_geometry(0, 2), invalid_parameter);
}

TEST_CASE("transmitter 20 minimizes the path distance over the sweep range") {
    const auto g = radar::paper_geometry(40, 15);
    int best_m = -1;
    double best = 1e18;
    for (int m = 0; m < 40; ++m) {
        const double d = g.path_distance(m, 14);
        if (d < best) {
            best = d;
            best_m = m;
        }
    }
    CHECK(best_m == 19); // zero-based: transmitter at x = 20
}

TEST_CASE("degenerate geometry is flagged") {
    radar::Geometry g = radar::paper_geometry(2, 2);
    g.tx_positions[0] = g.target_position;
    CHECK(g.has_degenerate_path());
}

TEST_CASE("waveform samples") {
    const double s_dur = 2e-7;
    const double inv = 1.0 / std::sqrt(s_dur);
    const auto mid = radar::waveform_sample(1, s_dur / 2.0, s_dur);
    CHECK(mid.real() == doctest::Approx(-inv).epsilon(1e-12));
    CHECK(mid.imag() == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(radar::waveform_sample(1, s_dur, s_dur) == cdouble(0.0, 0.0));
    CHECK(radar::waveform_sample(1, -0.1 * s_dur, s_dur) == cdouble(0.0, 0.0));
}

TEST_CASE("discrete waveforms are orthogonal over each block") {
    const auto scenario = default_scenario(2, 1, radar::SwerlingCase::one,
                                           radar::RadarDetector::wsprt);
    const std::int64_t block = scenario.samples_per_waveform();
    CHECK(block == 2);
    for (std::int64_t p = 1; p <= 3; ++p) {
        cdouble cross = 0.0;
        double power0 = 0.0;
        for (std::int64_t tick = 1; tick <= p * block; ++tick) {
            const auto s0 = radar::waveform_discrete(scenario, 0, 0, tick);
            const auto s1 = radar::waveform_discrete(scenario, 1, 0, tick);
            cross += s0 * std::conj(s1);
            power0 += std::norm(s0);
        }
        CHECK(std::abs(cross) < 1e-9 / scenario.waveform_duration * 1e-3);
        // sum |s|^2 = p / T_s exactly
        CHECK(power0 == doctest::Approx(static_cast<double>(p) / scenario.sample_period)
                            .epsilon(1e-12));
    }
}

TEST_CASE("channel draw statistics") {
    auto scenario = default_scenario(2, 1, radar::SwerlingCase::two,
                                     radar::RadarDetector::recursive);
    auto stream = RngRoot(3).stream(0, 0, 0, RngPurpose::channel_coefficient);
    stats::Summary power;
    for (int i = 0; i < 500000; ++i)
        for (const auto& h : radar::draw_channels(scenario, stream)) power.add(std::norm(h));
    CHECK(power.mean() == doctest::Approx(1.0).epsilon(0.005));

    auto rician = default_scenario(2, 1, radar::SwerlingCase::three,
                                   radar::RadarDetector::wsprt);
    auto stream3 = RngRoot(4).stream(0, 0, 0, RngPurpose::channel_coefficient);
    stats::Summary re, im;
    for (int i = 0; i < 500000; ++i) {
        for (const auto& h : radar::draw_channels(rician, stream3)) {
            re.add(h.real());
            im.add(h.imag());
        }
    }
    CHECK(re.mean() == doctest::Approx(1.0 / 3.0).epsilon(0.015));
    CHECK(im.mean() == doctest::Approx(1.0 / 3.0).epsilon(0.015));
}

TEST_CASE("observation power under both hypotheses") {
    auto scenario = default_scenario(2, 2, radar::SwerlingCase::two,
                                     radar::RadarDetector::recursive);
    const double rho2 = scenario.rho_squared(0);
    CHECK(rho2 > 0.5); // paper-scale sanity: O(1) at 3 dB
    auto stream = RngRoot(9).stream(0, 0, 0, RngPurpose::observation);
    auto channel_stream = RngRoot(9).stream(0, 0, 0, RngPurpose::channel_coefficient);
    stats::Summary h0_power, h1_power;
    for (int i = 0; i < 200000; ++i) {
        h0_power.add(std::norm(
            radar::synthesize_observation(scenario, {}, 0, 1, Hypothesis::h0, stream)));
        const auto h = radar::draw_channels(scenario, channel_stream);
        h1_power.add(std::norm(
            radar::synthesize_observation(scenario, h, 0, 1, Hypothesis::h1, stream)));
    }
    CHECK(std::fabs(h0_power.mean() - 1.0) < 3.0 * h0_power.std_error());
    CHECK(std::fabs(h1_power.mean() - (rho2 + 1.0)) < 3.0 * h1_power.std_error());
}

TEST_CASE("zero transmit energy makes the hypotheses indistinguishable") {
    auto scenario = default_scenario(2, 1, radar::SwerlingCase::one,
                                     radar::RadarDetector::wsprt, 0.0);
    auto s1 = RngRoot(5).stream(0, 0, 1, RngPurpose::observation);
    auto s2 = RngRoot(5).stream(0, 0, 1, RngPurpose::observation);
    const auto y0 = radar::synthesize_observation(scenario, {{1.0, 0.5}, {0.3, 0.1}}, 0, 1,
                                                  Hypothesis::h1, s1);
    const auto y1 = radar::synthesize_observation(scenario, {}, 0, 1, Hypothesis::h0, s2);
    CHECK(y0 == y1);

    radar::MatchedFilterBank bank(scenario, 0);
    bank.update(y0, 1);
    bank.update(y1, 2);
    CHECK(radar::llr_sw1_wsprt(bank, scenario, 1) == 0.0);
}

TEST_CASE("swerling-1 wsprt matches the literal formula on a hand-built block") {
    auto scenario = default_scenario(1, 1, radar::SwerlingCase::one,
                                     radar::RadarDetector::wsprt);
    const std::int64_t block = scenario.samples_per_waveform();
    radar::MatchedFilterBank bank(scenario, 0);
    const cdouble c(3.0, -4.0);
    cdouble raw = 0.0;
    for (std::int64_t tick = 1; tick <= block; ++tick) {
        const auto s = radar::waveform_discrete(scenario, 0, 0, tick);
        const cdouble y = c * s * std::sqrt(scenario.waveform_duration); // |y| = |c|
        bank.update(y, tick);
        raw += y * std::conj(s);
    }
    // literal route: |sum y s*|^2 / (sigma^2 (p/T_s + (M/E) sigma^2 / d^-2eta)) - ln(...)
    const double d = scenario.geometry.path_distance(0, 0);
    const double d2eta = std::pow(d, -2.0 * scenario.geometry.path_loss_eta);
    const double p_over_ts = 1.0 / scenario.sample_period;
    const double denom = scenario.noise_variance *
                         (p_over_ts + (1.0 / scenario.total_energy) * scenario.noise_variance / d2eta);
    const double log_term =
        std::log(scenario.total_energy * p_over_ts * d2eta / scenario.noise_variance + 1.0);
    const double expected = std::norm(raw) / denom - log_term;
    CHECK(radar::llr_sw1_wsprt(bank, scenario, 1) == doctest::Approx(expected).epsilon(1e-12));

    CHECK_THROWS_AS(radar::llr_sw1_wsprt(bank, scenario, 0), invalid_parameter);
    CHECK_THROWS_AS(radar::llr_sw1_wsprt(bank, scenario, 2), sequencing_error);
}

TEST_CASE("swerling-3 wsprt reduces to swerling-1 at zero mean and shifts otherwise") {
    auto scenario = default_scenario(2, 1, radar::SwerlingCase::three,
                                     radar::RadarDetector::wsprt);
    auto zero_mean = scenario;
    zero_mean.rician_mean = 0.0;

    radar::MatchedFilterBank bank(scenario, 0);
    auto stream = RngRoot(12).stream(0, 0, 0, RngPurpose::observation);
    for (std::int64_t tick = 1; tick <= 2; ++tick) bank.update(stream.complex_normal(), tick);

    CHECK(radar::llr_sw3_wsprt(bank, zero_mean, 1) ==
          doctest::Approx(radar::llr_sw1_wsprt(bank, zero_mean, 1)).epsilon(1e-12));

    // independent literal evaluation of the mean-shifted form
    double expected = 0.0;
    for (int m = 0; m < 2; ++m) {
        const double u = bank.u(m);
        expected += std::norm(bank.v(m) + scenario.rician_mean) / (u + 1.0) -
                    std::norm(scenario.rician_mean) - std::log(u + 1.0);
    }
    CHECK(radar::llr_sw3_wsprt(bank, scenario, 1) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("gslrt scalar reduction, strided equivalence and MAP optimality") {
    auto scenario = default_scenario(1, 1, radar::SwerlingCase::one, radar::RadarDetector::gslrt);
    radar::MatchedFilterBank bank(scenario, 0, true);
    auto stream = RngRoot(21).stream(0, 0, 0, RngPurpose::observation);
    bank.update(stream.complex_normal() * 2.0, 1);
    bank.update(stream.complex_normal() * 2.0, 2);
    const double scalar = std::norm(bank.v(0)) / (bank.u(0) + 1.0) - std::log(M_PI);
    CHECK(radar::llr_sw1_gslrt(bank, scenario, 2) == doctest::Approx(scalar).epsilon(1e-12));

    auto scenario2 = default_scenario(2, 1, radar::SwerlingCase::one, radar::RadarDetector::gslrt);
    radar::MatchedFilterBank bank2(scenario2, 0, true);
    for (std::int64_t tick = 1; tick <= 4; ++tick)
        bank2.update(stream.complex_normal() * 1.5 + cdouble(0.2, -0.1), tick);
    CHECK(radar::llr_sw1_gslrt(bank2, scenario2, 4) ==
          doctest::Approx(radar::llr_sw1_gslrt_orth(bank2, scenario2, 2)).epsilon(1e-9));

    auto scenario3 = default_scenario(2, 1, radar::SwerlingCase::three, radar::RadarDetector::gslrt);
    radar::MatchedFilterBank bank3(scenario3, 0, true);
    for (std::int64_t tick = 1; tick <= 4; ++tick)
        bank3.update(stream.complex_normal() * 1.5, tick);
    CHECK(radar::llr_sw3_gslrt(bank3, scenario3, 4) ==
          doctest::Approx(radar::llr_sw3_gslrt_orth(bank3, scenario3, 2)).epsilon(1e-9));
    auto zero_mean = scenario3;
    zero_mean.rician_mean = 0.0;
    CHECK(radar::llr_sw3_gslrt(bank3, zero_mean, 4) ==
          doctest::Approx(radar::llr_sw1_gslrt(bank3, zero_mean, 4)).epsilon(1e-12));

    // MAP estimate maximizes the posterior objective
    const auto map = radar::map_channel_estimate(bank2, scenario2);
    const double at_map = radar::log_posterior_objective(bank2, scenario2, map);
    auto perturb_stream = RngRoot(22).stream(0, 0, 0, RngPurpose::calibration);
    for (int trial = 0; trial < 10; ++trial) {
        auto perturbed = map;
        for (auto& h : perturbed)
            h += 0.05 * cdouble(perturb_stream.normal(), perturb_stream.normal());
        CHECK(radar::log_posterior_objective(bank2, scenario2, perturbed) <= at_map + 1e-12);
    }
}

TEST_CASE("swerling-2 increment examples") {
    // Custom geometry with d = 2 km so rho^2 is easy to pin: choose E with
    // rho^2 = (E/M)(1/S) d^-4 = 1.
    radar::RadarScenario s;
    s.geometry.tx_positions = {{1.0, 0.0, 0.0}};
    s.geometry.rx_positions = {{0.0, 1.0, 0.0}};
    s.geometry.target_position = {0.0, 0.0, 0.0};
    s.num_tx = 1;
    s.num_rx = 1;
    s.swerling = radar::SwerlingCase::two;
    s.detector = radar::RadarDetector::recursive;
    s.total_energy = 16.0 * s.waveform_duration;
    s.validate();
    CHECK(s.rho_squared(0) == doctest::Approx(1.0).epsilon(1e-12));

    const double inc = radar::llr_sw2_increment(s, 0, cdouble(std::sqrt(2.0), 0.0));
    CHECK(inc == doctest::Approx(1.0 - std::log(2.0)).epsilon(1e-12));
    CHECK(radar::llr_sw2_increment(s, 0, cdouble(0.0, 0.0)) ==
          doctest::Approx(std::log(0.5)).epsilon(1e-12));

    // KL positivity by Monte Carlo
    auto stream = RngRoot(30).stream(0, 0, 0, RngPurpose::calibration);
    stats::Summary under_h0, under_h1;
    for (int i = 0; i < 100000; ++i) {
        const auto noise = stream.complex_normal();
        under_h0.add(radar::llr_sw2_increment(s, 0, noise));
        const auto signal = std::sqrt(s.rho_squared(0)) * stream.complex_normal() + noise;
        under_h1.add(radar::llr_sw2_increment(s, 0, signal));
    }
    CHECK(under_h0.mean() < -3.0 * under_h0.std_error());
    CHECK(under_h1.mean() > 3.0 * under_h1.std_error());
}

TEST_CASE("swerling-4 increment reduces to swerling-2 at zero mean") {
    auto scenario = default_scenario(2, 1, radar::SwerlingCase::four,
                                     radar::RadarDetector::recursive);
    auto zero_mean = scenario;
    zero_mean.rician_mean = 0.0;
    auto stream = RngRoot(40).stream(0, 0, 0, RngPurpose::calibration);
    for (int i = 0; i < 50; ++i) {
        const cdouble y = 2.0 * stream.complex_normal();
        const auto tick = static_cast<std::int64_t>(1 + (i % 7));
        CHECK(radar::llr_sw4_increment(zero_mean, 0, y, tick) ==
              doctest::Approx(radar::llr_sw2_increment(zero_mean, 0, y)).epsilon(1e-12));
    }

    // evaluated at the deterministic mean: numerator = (rho^2/sigma^2 + 1)|mu~|^2
    const std::int64_t tick = 3;
    const cdouble mt = scenario.mu_tilde(0, tick);
    const double rho2 = scenario.rho_squared(0);
    const double expected =
        (rho2 + 1.0) * std::norm(mt) / (rho2 + 1.0) / 1.0 + std::log(1.0 / (rho2 + 1.0));
    CHECK(radar::llr_sw4_increment(scenario, 0, mt, tick) ==
          doctest::Approx(expected).epsilon(1e-10));
}

TEST_CASE("matched filter accumulators equal a from-scratch recomputation") {
    auto scenario = default_scenario(3, 1, radar::SwerlingCase::one, radar::RadarDetector::gslrt);
    radar::MatchedFilterBank bank(scenario, 0, true);
    auto stream = RngRoot(50).stream(0, 0, 0, RngPurpose::observation);
    std::vector<cdouble> history;
    for (std::int64_t tick = 1; tick <= 100; ++tick) {
        const cdouble y = stream.complex_normal() * 1.7 + cdouble(0.1, 0.2);
        history.push_back(y);
        bank.update(y, tick);
    }
    for (int m = 0; m < 3; ++m) {
        cdouble raw = 0.0;
        for (std::size_t i = 0; i < history.size(); ++i)
            raw += history[i] *
                   std::conj(radar::waveform_discrete(scenario, m, 0, static_cast<std::int64_t>(i + 1)));
        CHECK(std::abs(bank.raw_correlation(m) - raw) < 1e-10 * std::max(1.0, std::abs(raw)));
        for (int n = 0; n < 3; ++n) {
            if (m == n) continue;
            cdouble cross = 0.0;
            for (std::size_t i = 0; i < history.size(); ++i) {
                const auto tick = static_cast<std::int64_t>(i + 1);
                cross += radar::waveform_discrete(scenario, m, 0, tick) *
                         std::conj(radar::waveform_discrete(scenario, n, 0, tick));
            }
            const double scale = scenario.total_energy / 3.0 *
                                 std::pow(scenario.geometry.path_distance(m, 0), -2.0) *
                                 std::pow(scenario.geometry.path_distance(n, 0), -2.0) /
                                 scenario.noise_variance;
            CHECK(std::abs(bank.z(m, n) - scale * cross) < 1e-10);
        }
    }
    CHECK_THROWS_AS(bank.update(cdouble(0, 0), 100), sequencing_error);
}

TEST_CASE("radar llr sources follow the counter-keyed draw discipline") {
    const RngRoot root(99);
    const std::uint64_t trial = 7;

    SUBCASE("swerling 1: one channel draw per scan") {
        auto scenario = default_scenario(2, 1, radar::SwerlingCase::one,
                                         radar::RadarDetector::wsprt);
        radar::RadarNetwork network(scenario);
        auto source = network.make_source(0, Hypothesis::h1, trial, root);
        SensorRng rng(root, trial, 0);

        auto channel_stream = root.stream(trial, 0, 0, RngPurpose::channel_coefficient);
        const auto h = radar::draw_channels(scenario, channel_stream);
        radar::MatchedFilterBank bank(scenario, 0);
        for (std::int64_t tick = 1; tick <= 4; ++tick) {
            auto obs_stream = root.stream(trial, 0, static_cast<std::uint64_t>(tick),
                                          RngPurpose::observation);
            bank.update(radar::synthesize_observation(scenario, h, 0, tick, Hypothesis::h1,
                                                      obs_stream),
                        tick);
            const double got = source->advance(tick, rng);
            if (tick % 2 == 0)
                CHECK(got == radar::llr_sw1_wsprt(bank, scenario, tick / 2));
        }
    }

    SUBCASE("swerling 2: fresh channel draw per tick") {
        auto scenario = default_scenario(2, 1, radar::SwerlingCase::two,
                                         radar::RadarDetector::recursive);
        radar::RadarNetwork network(scenario);
        auto source = network.make_source(0, Hypothesis::h1, trial, root);
        SensorRng rng(root, trial, 0);

        double expected = 0.0;
        for (std::int64_t tick = 1; tick <= 4; ++tick) {
            auto channel_stream = root.stream(trial, 0, static_cast<std::uint64_t>(tick),
                                              RngPurpose::channel_coefficient);
            const auto h = radar::draw_channels(scenario, channel_stream);
            auto obs_stream = root.stream(trial, 0, static_cast<std::uint64_t>(tick),
                                          RngPurpose::observation);
            const auto y =
                radar::synthesize_observation(scenario, h, 0, tick, Hypothesis::h1, obs_stream);
            expected += radar::llr_sw2_increment(scenario, 0, y);
            CHECK(source->advance(tick, rng) == expected);
        }
    }
}

TEST_CASE("mean llr stream increases under h1") {
    auto scenario = default_scenario(2, 1, radar::SwerlingCase::one, radar::RadarDetector::wsprt);
    radar::RadarNetwork network(scenario);
    const RngRoot root(123);
    const int blocks = 5;
    std::vector<stats::Summary> at_block(blocks);
    for (std::uint64_t trial = 0; trial < 1000; ++trial) {
        auto source = network.make_source(0, Hypothesis::h1, trial, root);
        SensorRng rng(root, trial, 0);
        for (std::int64_t tick = 1; tick <= 2 * blocks; ++tick) {
            const double llr = source->advance(tick, rng);
            if (tick % 2 == 0) at_block[static_cast<std::size_t>(tick / 2 - 1)].add(llr);
        }
    }
    for (int p = 1; p < blocks; ++p)
        CHECK(at_block[static_cast<std::size_t>(p)].mean() >
              at_block[static_cast<std::size_t>(p - 1)].mean());
}

TEST_CASE("scenario and network validation") {
    radar::RadarScenario bad = default_scenario(2, 2, radar::SwerlingCase::one,
                                                radar::RadarDetector::wsprt);
    bad.swerling = radar::SwerlingCase::two;
    CHECK_THROWS_AS(bad.validate(), invalid_parameter);
    bad.swerling = radar::SwerlingCase::one;
    bad.detector = radar::RadarDetector::recursive;
    CHECK_THROWS_AS(bad.validate(), invalid_parameter);
    bad = default_scenario(2, 2, radar::SwerlingCase::one, radar::RadarDetector::wsprt);
    bad.sample_period = 3e-8; // S / T_s not integral
    CHECK_THROWS_AS(bad.validate(), invalid_parameter);

    radar::RadarNetwork network(
        default_scenario(2, 2, radar::SwerlingCase::one, radar::RadarDetector::wsprt));
    CHECK_THROWS_AS(network.block_kl_sum(Hypothesis::h1), unsupported_method);
    network.calibrate_kl(2000, 5);
    CHECK(network.block_kl_sum(Hypothesis::h1) > 0.0);
    CHECK(network.block_kl_sum(Hypothesis::h0) > 0.0);
    CHECK(network.stride() == 2);
    CHECK(network.kl_block_ticks() == 2);
}
