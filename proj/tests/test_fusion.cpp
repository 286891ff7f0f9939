#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <queue>
#include <vector>

#include "seqdet/codec.hpp"
#include "seqdet/error.hpp"
#include "seqdet/fusion.hpp"
#include "seqdet/lts.hpp"
#include "seqdet/models.hpp"

using namespace seqdet;
using models::Hypothesis;

namespace {

const double kPaperShift = std::pow(10.0, 0.25);

// Network whose sensors follow scripted LLR paths; tick t reads path[t-1].
class ScriptedNetwork final : public models::NetworkModel {
public:
    explicit ScriptedNetwork(std::vector<std::vector<double>> paths) : paths_(std::move(paths)) {}

    int num_sensors() const override { return static_cast<int>(paths_.size()); }
    std::int64_t stride() const override { return 1; }
    std::int64_t kl_block_ticks() const override { return 1; }
    double block_kl_sum(Hypothesis) const override { return 1.0; }

    std::unique_ptr<models::LlrSource> make_source(int sensor, Hypothesis, std::uint64_t,
                                                   const RngRoot&) const override {
        struct Scripted final : models::LlrSource {
            explicit Scripted(const std::vector<double>* path) : path(path) {}
            double advance(std::int64_t tick, const SensorRng&) override {
                const auto index = static_cast<std::size_t>(tick - 1);
                return index < path->size() ? (*path)[index] : path->back();
            }
            const std::vector<double>* path;
        };
        return std::make_unique<Scripted>(&paths_[static_cast<std::size_t>(sensor)]);
    }

private:
    std::vector<std::vector<double>> paths_;
};

fusion::TrialConfig basic_config(double delta, double a, double b) {
    fusion::TrialConfig config;
    config.delta = delta;
    config.threshold_a = a;
    config.threshold_b = b;
    config.theta = 8.0;
    config.encoder.slope_r = 8.5;
    config.random_encoder.slope_r = 10.0;
    config.random_encoder.offset = 0.1;
    config.random_channel = codec::ChannelModel::random_uniform(0.2);
    config.max_ticks = 100000;
    return config;
}

} // namespace

TEST_CASE("wald thresholds formula") {
    auto [a, b] = fusion::wald_thresholds(1e-2, 1e-2);
    CHECK(a == doctest::Approx(std::log(99.0)).epsilon(1e-12));
    CHECK(b == doctest::Approx(std::log(99.0)).epsilon(1e-12));
    auto [a6, b6] = fusion::wald_thresholds(1e-6, 1e-6);
    CHECK(a6 == doctest::Approx(13.8155).epsilon(1e-4));
    CHECK(b6 == a6);
    auto [a_edge, b_edge] = fusion::wald_thresholds(0.499999, 0.499999);
    CHECK(a_edge < 1e-5);
    CHECK(b_edge < 1e-5);
    CHECK_THROWS_AS(fusion::wald_thresholds(0.0, 0.1), invalid_parameter);
    CHECK_THROWS_AS(fusion::wald_thresholds(0.1, 0.5), invalid_parameter);
}

TEST_CASE("fusion state applies messages and stops at the crossed side") {
    fusion::FusionState fc(4.595, 4.595);
    fc.on_message(1, 0.2, 1.0, 0.3);
    CHECK(fc.llr_hat() == doctest::Approx(1.2));
    CHECK(fc.running());

    // three-message hand-summed recursion
    fusion::FusionState fc2(10.0, 10.0);
    fc2.on_message(1, 0.1, 1.0, 1.0);
    fc2.on_message(-1, 0.3, 1.0, 2.0);
    fc2.on_message(1, 0.0, 1.0, 3.0);
    CHECK(fc2.llr_hat() == doctest::Approx(0.8).epsilon(1e-12));
    CHECK(fc2.message_count() == 3);

    fusion::FusionState fc3(4.595, 4.595);
    fc3.apply_absolute(4.0, 1.0);
    CHECK(fc3.running());
    fc3.on_message(1, 0.0, 1.0, 2.25);
    CHECK_FALSE(fc3.running());
    CHECK(fc3.decision() == 1);
    CHECK(fc3.llr_hat() == doctest::Approx(5.0));
    CHECK(fc3.stop_time_raw() == doctest::Approx(2.25));

    // late messages are ignored but counted
    fc3.on_message(-1, 0.0, 1.0, 3.0);
    CHECK(fc3.llr_hat() == doctest::Approx(5.0));
    CHECK(fc3.late_message_count() == 1);
}

TEST_CASE("decision always matches the crossed threshold") {
    auto stream = RngRoot(77).stream(0, 0, 0, RngPurpose::calibration);
    for (int rep = 0; rep < 500; ++rep) {
        fusion::FusionState fc(2.0, 3.0);
        while (fc.running()) fc.apply_update(stream.normal(), 1.0);
        if (fc.decision() == 1)
            CHECK(fc.llr_hat() >= 2.0);
        else
            CHECK(fc.llr_hat() <= -3.0);
    }
}

TEST_CASE("majority rule follows the spec examples") {
    const auto variant = fusion::DetectorVariant::decision_fusion_majority();
    const auto config = basic_config(1.0, 1.0, 1.0);
    const RngRoot root(1);

    SUBCASE("K=3, local decisions (1,1,0) -> 1") {
        ScriptedNetwork network({{1.5, 1.5}, {0.5, 1.5}, {-1.5, -1.5}});
        // ticks: sensor 0 decides 1 at t=1, sensor 2 decides 0 at t=1, sensor 1 decides 1 at t=2.
        const auto outcome =
            fusion::run_baseline(variant, network, Hypothesis::h1, config, 0, root);
        CHECK(outcome.decision == 1);
        CHECK(outcome.stop_ticks == 2);
        CHECK(outcome.messages == 3);
    }

    SUBCASE("K=2, local decisions (1,0) -> 0: one vote is not > K/2") {
        ScriptedNetwork network({{1.5, 1.5}, {0.0, -1.5}});
        const auto outcome =
            fusion::run_baseline(variant, network, Hypothesis::h1, config, 0, root);
        CHECK(outcome.decision == 0);
        CHECK(outcome.stop_ticks == 2);
    }

    SUBCASE("K=2, first vote 0 already decides") {
        ScriptedNetwork network({{-1.5, -1.5}, {0.0, 0.0, 0.0, 1.5}});
        const auto outcome =
            fusion::run_baseline(variant, network, Hypothesis::h1, config, 0, root);
        CHECK(outcome.decision == 0);
        CHECK(outcome.stop_ticks == 1);
        CHECK(outcome.messages == 1);
    }
}

TEST_CASE("terminal-value identity: decoded recursion equals exact local llrs") {
    // Two sensors, ideal channel: after each processed arrival the running
    // statistic equals the sum of exact local LLRs at the latest sample ticks.
    const double delta = 1.5;
    codec::EncoderParams encoder;
    encoder.slope_r = 12.0;
    const auto channel = codec::ChannelModel::ideal();

    auto walk_stream = RngRoot(31).stream(0, 0, 0, RngPurpose::calibration);
    std::vector<lts::Sampler> samplers{{0, delta}, {1, delta}};
    std::vector<double> llr(2, 0.0);
    std::vector<double> llr_at_last_sample(2, 0.0);
    fusion::FusionState fc(1e12, 1e12);

    struct Arrival {
        double time;
        int bit;
        int sensor;
    };
    for (std::int64_t t = 1; t <= 4000; ++t) {
        std::vector<Arrival> arrivals;
        for (int k = 0; k < 2; ++k) {
            llr[static_cast<std::size_t>(k)] += walk_stream.normal() * 1.3 + 0.05;
            if (auto event = samplers[static_cast<std::size_t>(k)].step(t, llr[static_cast<std::size_t>(k)])) {
                const auto sent = codec::encode(*event, encoder);
                REQUIRE_FALSE(sent.saturated);
                arrivals.push_back({sent.message.arrival_time, event->bit, k});
                llr_at_last_sample[static_cast<std::size_t>(k)] = llr[static_cast<std::size_t>(k)];
            }
        }
        std::sort(arrivals.begin(), arrivals.end(),
                  [](const Arrival& x, const Arrival& y) { return x.time < y.time; });
        for (const auto& arrival : arrivals) {
            const auto decoded = codec::decode(arrival.time, encoder, channel);
            fc.on_message(arrival.bit, decoded.overshoot, delta, arrival.time);
        }
        if (!arrivals.empty())
            CHECK(fc.llr_hat() ==
                  doctest::Approx(llr_at_last_sample[0] + llr_at_last_sample[1]).epsilon(1e-9));
    }
}

TEST_CASE("high-resolution quantizer reproduces the time-encoded transcript") {
    models::GaussianNetwork network(2, kPaperShift, 1.0);
    const auto config = basic_config(6.35, std::log(99.0), std::log(99.0));
    const auto te = fusion::DetectorVariant::time_encoded();
    const auto q50 = fusion::DetectorVariant::quantized(50);

    int matching = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const RngRoot root(seed);
        const auto a = fusion::run_baseline(te, network, Hypothesis::h1, config, 0, root);
        const auto b = fusion::run_baseline(q50, network, Hypothesis::h1, config, 0, root);
        if (a.decision == b.decision && std::llabs(a.stop_ticks - b.stop_ticks) <= 1) ++matching;
    }
    CHECK(matching >= 99);
}

TEST_CASE("uniform sampling transmits exact changes every period") {
    ScriptedNetwork network({{0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0}});
    auto config = basic_config(1.0, 3.9, 100.0);
    const auto variant = fusion::DetectorVariant::uniform_sampling(2);
    const auto outcome =
        fusion::run_baseline(variant, network, Hypothesis::h1, config, 0, RngRoot(1));
    // statistic hits 4.0 at tick 8 (fourth report).
    CHECK(outcome.decision == 1);
    CHECK(outcome.stop_ticks == 8);
    CHECK(outcome.messages == 4);
}

TEST_CASE("ignore-overshoot updates by exactly delta") {
    ScriptedNetwork network({{2.0, 4.0, 6.0}});
    auto config = basic_config(1.5, 2.9, 100.0);
    const auto outcome = fusion::run_baseline(fusion::DetectorVariant::ignore_overshoot(), network,
                                              Hypothesis::h1, config, 0, RngRoot(1));
    // each sample adds +-delta only: 1.5, 3.0 -> crosses 2.9 on the second event.
    CHECK(outcome.decision == 1);
    CHECK(outcome.stop_ticks == 2);
    CHECK(outcome.messages == 2);
}

TEST_CASE("centralized stop is the plain SPRT on the summed stream") {
    ScriptedNetwork network({{0.5, 1.0, 2.2, 3.3}, {0.4, 0.9, 1.0, 1.4}});
    auto config = basic_config(1.0, 3.0, 3.0);
    const auto outcome = fusion::run_baseline(fusion::DetectorVariant::centralized(), network,
                                              Hypothesis::h1, config, 0, RngRoot(1));
    // summed stream: 0.9, 1.9, 3.2 -> stops at tick 3.
    CHECK(outcome.decision == 1);
    CHECK(outcome.stop_ticks == 3);
    CHECK(outcome.stop_time_raw == doctest::Approx(3.0));
    CHECK(outcome.messages == 0);
}

TEST_CASE("censoring is reported when no decision is reachable") {
    ScriptedNetwork network({{0.1, 0.2, 0.1, 0.2}});
    auto config = basic_config(1.0, 50.0, 50.0);
    config.max_ticks = 64;
    for (const auto& variant :
         {fusion::DetectorVariant::centralized(), fusion::DetectorVariant::time_encoded(),
          fusion::DetectorVariant::decision_fusion_majority()}) {
        const auto outcome =
            fusion::run_baseline(variant, network, Hypothesis::h1, config, 0, RngRoot(1));
        CHECK(outcome.censored);
        CHECK(outcome.decision == -1);
        CHECK(outcome.stop_ticks == 64);
    }
}

TEST_CASE("variant validation") {
    CHECK_THROWS_AS(fusion::DetectorVariant::quantized(0), invalid_parameter);
    CHECK_THROWS_AS(fusion::DetectorVariant::uniform_sampling(0), invalid_parameter);

    models::GaussianNetwork network(1, 1.0, 1.0);
    auto config = basic_config(1.0, 2.0, 2.0);
    config.random_channel = codec::ChannelModel::ideal();
    CHECK_THROWS_AS(fusion::run_baseline(fusion::DetectorVariant::time_encoded_random(), network,
                                         Hypothesis::h1, config, 0, RngRoot(1)),
                    invalid_parameter);
}
