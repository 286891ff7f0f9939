#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "seqdet/codec.hpp"
#include "seqdet/error.hpp"
#include "seqdet/rng.hpp"

using namespace seqdet;

namespace {

lts::SampleEvent make_event(std::int64_t tick, double overshoot, int bit = 1, int sensor = 0) {
    lts::SampleEvent e;
    e.sensor_id = sensor;
    e.tick = tick;
    e.bit = bit;
    e.overshoot = overshoot;
    return e;
}

} // namespace

TEST_CASE("encode maps overshoot linearly into the sub-tick delay") {
    codec::EncoderParams params;
    params.slope_r = 2.0;
    const auto out = codec::encode(make_event(7, 0.5), params);
    CHECK(out.message.transmit_time == doctest::Approx(7.25).epsilon(1e-15));
    CHECK_FALSE(out.saturated);

    const auto zero = codec::encode(make_event(3, 0.0), params);
    CHECK(zero.message.transmit_time == 3.0);

    codec::EncoderParams guarded = params;
    guarded.offset = 0.1;
    CHECK(codec::encode(make_event(3, 0.0), guarded).message.transmit_time ==
          doctest::Approx(3.1).epsilon(1e-15));
}

TEST_CASE("encode saturates at the tick budget and reports it") {
    codec::EncoderParams params;
    params.slope_r = 2.0;
    params.saturation_epsilon = 1e-6;
    const auto out = codec::encode(make_event(3, 10.0), params);
    CHECK(out.saturated);
    CHECK(out.message.transmit_time == doctest::Approx(3.0 + 1.0 - 1e-6).epsilon(1e-12));
}

TEST_CASE("encode rejects invalid parameters") {
    codec::EncoderParams params;
    params.slope_r = 0.0;
    CHECK_THROWS_AS(codec::encode(make_event(0, 0.1), params), invalid_parameter);
    params.slope_r = 1.0;
    params.offset = 0.9999999;
    CHECK_THROWS_AS(codec::encode(make_event(0, 0.1), params), invalid_parameter);
    params.offset = -0.1;
    CHECK_THROWS_AS(codec::encode(make_event(0, 0.1), params), invalid_parameter);
    params.offset = 0.0;
    CHECK_THROWS_AS(codec::encode(make_event(0, -0.5), params), invalid_parameter);
}

TEST_CASE("decode inverts encode under the ideal channel") {
    codec::EncoderParams params;
    params.slope_r = 2.0;
    const auto decoded = codec::decode(7.25, params, codec::ChannelModel::ideal());
    CHECK(decoded.tick == 7);
    CHECK(decoded.overshoot == doctest::Approx(0.5).epsilon(1e-12));
    CHECK_FALSE(decoded.integrity_violation);
}

TEST_CASE("deterministic delays are subtracted exactly") {
    codec::EncoderParams params;
    params.slope_r = 2.0;
    const auto channel = codec::ChannelModel::deterministic(0.03);
    const auto decoded = codec::decode(7.25 + 0.03, params, channel);
    CHECK(decoded.tick == 7);
    CHECK(decoded.overshoot == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("round-trip is exact for random events under the ideal channel") {
    codec::EncoderParams params;
    params.slope_r = 10.0;
    const auto channel = codec::ChannelModel::ideal();
    auto stream = RngRoot(5).stream(0, 0, 0, RngPurpose::calibration);
    for (int i = 0; i < 20000; ++i) {
        const auto tick = static_cast<std::int64_t>(stream.next_u64() % 1024);
        const double overshoot = stream.uniform(0.0, 9.99);
        const auto sent = codec::encode(make_event(tick, overshoot), params);
        REQUIRE_FALSE(sent.saturated);
        const auto decoded = codec::decode(sent.message.arrival_time, params, channel);
        CHECK(decoded.tick == tick);
        CHECK(std::fabs(decoded.overshoot - overshoot) < 1e-12);
    }
}

TEST_CASE("random channel: overshoot error bounded by r * phi_hat") {
    codec::EncoderParams params;
    params.slope_r = 4.0;
    params.offset = 0.1; // phi_hat for uniform [0, 0.2]
    const auto channel = codec::ChannelModel::random_uniform(0.2);
    CHECK(channel.delay_estimate() == doctest::Approx(0.1));
    CHECK(channel.estimate_error_bound() == doctest::Approx(0.1));

    auto stream = RngRoot(8).stream(0, 0, 0, RngPurpose::channel_delay);
    const double bound = params.slope_r * channel.estimate_error_bound() + 1e-12;
    for (int i = 0; i < 20000; ++i) {
        const auto tick = static_cast<std::int64_t>(stream.next_u64() % 512);
        const double overshoot = stream.uniform(0.0, 4.0 * (1.0 - 2.0 * 0.1) * 0.999);
        const auto sent = codec::encode(make_event(tick, overshoot), params);
        REQUIRE_FALSE(sent.saturated);
        const auto arrived = codec::transmit(sent.message, channel, stream);
        const auto decoded = codec::decode(arrived.arrival_time, params, channel);
        CHECK(decoded.tick == tick);
        CHECK_FALSE(decoded.integrity_violation);
        CHECK(std::fabs(decoded.overshoot - overshoot) <= bound);
    }
}

TEST_CASE("messages from one sensor stay ordered under deterministic channels") {
    codec::EncoderParams params;
    params.slope_r = 3.0;
    const auto channel = codec::ChannelModel::deterministic(0.4);
    auto stream = RngRoot(10).stream(0, 0, 0, RngPurpose::channel_delay);
    double previous_arrival = -1.0;
    std::int64_t tick = 0;
    for (int i = 0; i < 1000; ++i) {
        tick += 1 + static_cast<std::int64_t>(stream.next_u64() % 3);
        const double overshoot = stream.uniform(0.0, 2.9);
        auto sent = codec::encode(make_event(tick, overshoot), params);
        const auto arrived = codec::transmit(sent.message, channel, stream);
        CHECK(arrived.arrival_time > previous_arrival);
        previous_arrival = arrived.arrival_time;
    }
}

TEST_CASE("decode integrity violation is flagged and throwable") {
    codec::EncoderParams params;
    params.slope_r = 2.0;
    params.offset = 0.2;
    // Ideal channel: fraction below the offset cannot come from this encoder.
    const auto decoded = codec::decode(5.05, params, codec::ChannelModel::ideal());
    CHECK(decoded.integrity_violation);
    CHECK(decoded.overshoot == 0.0);
    CHECK_THROWS_AS(codec::decode_or_throw(5.05, params, codec::ChannelModel::ideal()),
                    decode_integrity_error);

    // Within phi_hat of the offset is legitimate under a random channel.
    const auto channel = codec::ChannelModel::random_uniform(0.4);
    CHECK_FALSE(codec::decode(5.05, params, channel).integrity_violation);
}

TEST_CASE("min_slope formula and feasibility") {
    CHECK(codec::min_slope(2.0, 0.0) == doctest::Approx(2.0));
    CHECK(codec::min_slope(2.0, 0.1) == doctest::Approx(2.5));
    // Worst-case error at the minimal slope: (phi_hat / (1 - 2 phi_hat)) * theta.
    CHECK(codec::min_slope(2.0, 0.1) * 0.1 == doctest::Approx(0.25));
    CHECK_THROWS_AS(codec::min_slope(2.0, 0.5), infeasible_encoding);
    CHECK_THROWS_AS(codec::min_slope(0.0, 0.1), invalid_parameter);
    CHECK_THROWS_AS(codec::min_slope(2.0, -0.1), invalid_parameter);
}

TEST_CASE("validate_for_channel requires the guard offset") {
    codec::EncoderParams params;
    params.slope_r = 4.0;
    params.offset = 0.0;
    CHECK_NOTHROW(codec::validate_for_channel(params, codec::ChannelModel::ideal()));
    CHECK_THROWS_AS(codec::validate_for_channel(params, codec::ChannelModel::random_uniform(0.2)),
                    invalid_parameter);
    params.offset = 0.1;
    CHECK_NOTHROW(codec::validate_for_channel(params, codec::ChannelModel::random_uniform(0.2)));
}
