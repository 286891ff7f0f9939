#include "seqdet/lts.hpp"

#include <cmath>

#include "seqdet/error.hpp"

namespace seqdet::lts {

double solve_delta(double kl_sum, double rate) {
    if (kl_sum < 0.0) throw invalid_parameter("solve_delta: negative kl_sum");
    if (!(rate > 0.0)) throw invalid_parameter("solve_delta: rate must be positive");
    const double target = kl_sum / rate;
    if (target == 0.0) return 0.0;

    const auto lhs = [](double d) { return d * std::tanh(0.5 * d); };
    // lhs(d) <= d, so the root lies below max(target, 1) + 1.
    double lo = 0.0;
    double hi = std::fmax(target, 1.0) + 1.0;
    for (int i = 0; i < 200 && hi - lo > 0.0; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (mid == lo || mid == hi) break;
        (lhs(mid) < target ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

Sampler::Sampler(int sensor_id, double delta, std::int64_t stride)
    : sensor_id_(sensor_id), delta_(delta), stride_(stride) {
    if (!(delta > 0.0)) throw invalid_parameter("Sampler: delta must be positive");
    if (stride < 1) throw invalid_parameter("Sampler: stride must be >= 1");
}

std::optional<SampleEvent> Sampler::step(std::int64_t tick, double llr_value) {
    if (tick % stride_ != 0)
        throw sequencing_error("Sampler::step: tick not aligned to stride");
    if (tick <= last_eval_tick_)
        throw sequencing_error("Sampler::step: ticks must be strictly increasing");
    last_eval_tick_ = tick;

    const double change = llr_value - ref_llr_;
    if (std::fabs(change) < delta_) return std::nullopt;

    SampleEvent event;
    event.sensor_id = sensor_id_;
    event.tick = tick;
    event.bit = change >= 0.0 ? 1 : -1;
    event.overshoot = std::fabs(change) - delta_;
    ref_llr_ = llr_value;
    ref_tick_ = tick;
    return event;
}

} // namespace seqdet::lts
