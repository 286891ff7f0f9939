#pragma once

#include <cstdint>
#include <optional>

namespace seqdet::lts {

/// One level-triggered sample: which sensor, at which tick, which threshold
/// was crossed, and by how much.
struct SampleEvent {
    int sensor_id = 0;
    std::int64_t tick = 0;
    int bit = 0;          // -1 or +1
    double overshoot = 0; // |llr change| - delta, >= 0
};

/// Solves delta * tanh(delta/2) = kl_sum / rate for the unique non-negative
/// root by bisection; the left-hand side is strictly increasing.
double solve_delta(double kl_sum, double rate);

/// Per-sensor level-triggered sampler. Feed it the exact local LLR at every
/// stride-aligned tick; it emits an event whenever the LLR has moved at least
/// delta away from its value at the previous event.
class Sampler {
public:
    Sampler(int sensor_id, double delta, std::int64_t stride = 1);

    /// Ticks must be stride-aligned and strictly increasing.
    std::optional<SampleEvent> step(std::int64_t tick, double llr_value);

    double delta() const { return delta_; }
    std::int64_t stride() const { return stride_; }
    double last_sample_llr() const { return ref_llr_; }
    std::int64_t last_sample_tick() const { return ref_tick_; }

private:
    int sensor_id_;
    double delta_;
    std::int64_t stride_;
    double ref_llr_ = 0.0;
    std::int64_t ref_tick_ = 0;
    std::int64_t last_eval_tick_ = 0;
};

} // namespace seqdet::lts
