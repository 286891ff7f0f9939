#pragma once

#include <cstdint>

#include "seqdet/lts.hpp"
#include "seqdet/rng.hpp"

namespace seqdet::codec {

/// Parameters of the linear time encoder. A sample at tick t with overshoot q
/// is transmitted at t + offset + q/slope_r, clamped so the fraction stays in
/// [offset, 1 - saturation_epsilon). offset is the guard band needed under
/// random channel delays (0 for ideal and deterministic channels).
struct EncoderParams {
    double slope_r = 1.0;
    double offset = 0.0;
    double saturation_epsilon = 1e-6;

    void validate() const;
};

enum class ChannelKind { ideal, deterministic, random_uniform };

/// Channel between sensors and the fusion center: no delay, a fixed known
/// delay, or a random delay uniform on [0, phi]. The decoder subtracts the
/// estimate delay_estimate(); estimate_error_bound() is the worst-case
/// estimator error phi_hat.
class ChannelModel {
public:
    static ChannelModel ideal();
    static ChannelModel deterministic(double delay);
    static ChannelModel random_uniform(double phi);

    ChannelKind kind() const { return kind_; }
    double phi() const { return phi_; }
    double fixed_delay() const { return fixed_delay_; }

    double draw_delay(RngStream& rng) const;
    double delay_estimate() const;
    double estimate_error_bound() const;

private:
    ChannelKind kind_ = ChannelKind::ideal;
    double fixed_delay_ = 0.0;
    double phi_ = 0.0;
};

/// A sign bit in flight. true_overshoot is carried for test oracles only;
/// the decoder never reads it.
struct Message {
    int sensor_id = 0;
    int bit = 0;
    double transmit_time = 0.0;
    double arrival_time = 0.0;
    double true_overshoot = 0.0;
};

struct Encoded {
    Message message;
    bool saturated = false;
};

/// Encodes a sample into a pre-channel message (arrival_time equals
/// transmit_time until the channel is applied).
Encoded encode(const lts::SampleEvent& event, const EncoderParams& params);

/// Applies the channel delay to a message's arrival time.
Message transmit(Message message, const ChannelModel& channel, RngStream& rng);

struct Decoded {
    std::int64_t tick = 0;
    double overshoot = 0.0;
    /// The corrected fraction fell below the encoder offset by more than the
    /// channel's error bound; the overshoot was clamped to the nearest valid
    /// value. Signals a mis-specified channel bound.
    bool integrity_violation = false;
};

/// Recovers (sampling tick, overshoot estimate) from an arrival time.
Decoded decode(double arrival_time, const EncoderParams& params, const ChannelModel& channel);

/// As decode(), but throws decode_integrity_error instead of flagging.
Decoded decode_or_throw(double arrival_time, const EncoderParams& params,
                        const ChannelModel& channel);

/// Smallest decoding slope compatible with overshoot bound theta and
/// delay-estimation error bound phi_hat; callers must configure slope_r
/// strictly above this.
double min_slope(double theta, double phi_hat);

/// Rejects encoder/channel pairs whose guard band cannot absorb the
/// channel's estimation error.
void validate_for_channel(const EncoderParams& params, const ChannelModel& channel);

} // namespace seqdet::codec
