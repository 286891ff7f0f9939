#include "seqdet/codec.hpp"

#include <cmath>

#include "seqdet/error.hpp"

namespace seqdet::codec {
namespace {

// Absorbs floating-point noise from delay subtraction when recovering the
// integer tick; far below any legitimate sub-tick structure.
constexpr double kTickSlack = 1.5e-8;

} // namespace

void EncoderParams::validate() const {
    if (!(slope_r > 0.0)) throw invalid_parameter("EncoderParams: slope_r must be positive");
    if (offset < 0.0) throw invalid_parameter("EncoderParams: offset must be non-negative");
    if (!(saturation_epsilon > 0.0) || saturation_epsilon >= 1.0)
        throw invalid_parameter("EncoderParams: saturation_epsilon outside (0, 1)");
    if (offset + saturation_epsilon >= 1.0)
        throw invalid_parameter("EncoderParams: offset + saturation_epsilon leaves no budget");
}

ChannelModel ChannelModel::ideal() { return ChannelModel{}; }

ChannelModel ChannelModel::deterministic(double delay) {
    if (delay < 0.0) throw invalid_parameter("ChannelModel: negative deterministic delay");
    ChannelModel c;
    c.kind_ = ChannelKind::deterministic;
    c.fixed_delay_ = delay;
    return c;
}

ChannelModel ChannelModel::random_uniform(double phi) {
    if (!(phi > 0.0)) throw invalid_parameter("ChannelModel: random delay bound must be positive");
    ChannelModel c;
    c.kind_ = ChannelKind::random_uniform;
    c.phi_ = phi;
    return c;
}

double ChannelModel::draw_delay(RngStream& rng) const {
    switch (kind_) {
        case ChannelKind::ideal: return 0.0;
        case ChannelKind::deterministic: return fixed_delay_;
        case ChannelKind::random_uniform: return rng.uniform(0.0, phi_);
    }
    return 0.0;
}

double ChannelModel::delay_estimate() const {
    switch (kind_) {
        case ChannelKind::ideal: return 0.0;
        case ChannelKind::deterministic: return fixed_delay_;
        case ChannelKind::random_uniform: return 0.5 * phi_; // mean estimator
    }
    return 0.0;
}

double ChannelModel::estimate_error_bound() const {
    return kind_ == ChannelKind::random_uniform ? 0.5 * phi_ : 0.0;
}

Encoded encode(const lts::SampleEvent& event, const EncoderParams& params) {
    params.validate();
    if (event.overshoot < 0.0) throw invalid_parameter("encode: negative overshoot");

    const double budget = 1.0 - params.saturation_epsilon - params.offset;
    const double raw = event.overshoot / params.slope_r;
    const bool saturated = raw > budget;
    const double xi = params.offset + (saturated ? budget : raw);

    Encoded out;
    out.message.sensor_id = event.sensor_id;
    out.message.bit = event.bit;
    out.message.transmit_time = static_cast<double>(event.tick) + xi;
    out.message.arrival_time = out.message.transmit_time;
    out.message.true_overshoot = event.overshoot;
    out.saturated = saturated;
    return out;
}

Message transmit(Message message, const ChannelModel& channel, RngStream& rng) {
    message.arrival_time = message.transmit_time + channel.draw_delay(rng);
    return message;
}

Decoded decode(double arrival_time, const EncoderParams& params, const ChannelModel& channel) {
    const double corrected = arrival_time - channel.delay_estimate();
    const auto tick = static_cast<std::int64_t>(std::floor(corrected + kTickSlack));
    const double fraction = corrected - static_cast<double>(tick);

    Decoded out;
    out.tick = tick;
    const double phi_hat = channel.estimate_error_bound();
    out.integrity_violation = fraction < params.offset - phi_hat - 1e-9;
    out.overshoot = std::fmax(0.0, params.slope_r * (fraction - params.offset));
    return out;
}

Decoded decode_or_throw(double arrival_time, const EncoderParams& params,
                        const ChannelModel& channel) {
    Decoded out = decode(arrival_time, params, channel);
    if (out.integrity_violation)
        throw decode_integrity_error("decode: corrected fraction below the encoder offset "
                                     "beyond the channel error bound");
    return out;
}

double min_slope(double theta, double phi_hat) {
    if (!(theta > 0.0)) throw invalid_parameter("min_slope: theta must be positive");
    if (phi_hat < 0.0) throw invalid_parameter("min_slope: negative phi_hat");
    if (phi_hat >= 0.5)
        throw infeasible_encoding("min_slope: phi_hat >= 1/2 leaves no encoding budget");
    return theta / (1.0 - 2.0 * phi_hat);
}

void validate_for_channel(const EncoderParams& params, const ChannelModel& channel) {
    params.validate();
    const double phi_hat = channel.estimate_error_bound();
    if (phi_hat >= 0.5)
        throw infeasible_encoding("channel error bound phi_hat >= 1/2");
    if (params.offset + 1e-12 < phi_hat)
        throw invalid_parameter("encoder offset below the channel error bound phi_hat");
}

} // namespace seqdet::codec
