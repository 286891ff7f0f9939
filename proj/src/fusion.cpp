#include "seqdet/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <vector>

#include "seqdet/error.hpp"
#include "seqdet/lts.hpp"

namespace seqdet::fusion {

std::pair<double, double> wald_thresholds(double alpha, double beta) {
    if (!(alpha > 0.0) || alpha >= 0.5 || !(beta > 0.0) || beta >= 0.5)
        throw invalid_parameter("wald_thresholds: alpha and beta must lie in (0, 1/2)");
    return {std::log((1.0 - beta) / alpha), std::log((1.0 - alpha) / beta)};
}

FusionState::FusionState(double threshold_a, double threshold_b) : a_(threshold_a), b_(threshold_b) {
    if (!(threshold_a > 0.0) || !(threshold_b > 0.0))
        throw invalid_parameter("FusionState: thresholds must be positive");
}

void FusionState::on_message(int bit, double overshoot_estimate, double delta,
                             double arrival_time) {
    apply_update(static_cast<double>(bit) * (delta + overshoot_estimate), arrival_time);
}

void FusionState::apply_update(double lambda_hat, double arrival_time) {
    if (decided_) {
        ++late_;
        return;
    }
    llr_ += lambda_hat;
    ++messages_;
    check_stop(arrival_time);
}

void FusionState::apply_absolute(double llr_value, double time) {
    if (decided_) return;
    llr_ = llr_value;
    check_stop(time);
}

void FusionState::check_stop(double time) {
    if (llr_ >= a_) {
        decided_ = true;
        decision_ = 1;
        stop_time_ = time;
    } else if (llr_ <= -b_) {
        decided_ = true;
        decision_ = 0;
        stop_time_ = time;
    }
}

DetectorVariant DetectorVariant::time_encoded() { return {}; }

DetectorVariant DetectorVariant::time_encoded_random() {
    DetectorVariant v;
    v.kind = Kind::time_encoded_random;
    return v;
}

DetectorVariant DetectorVariant::quantized(int bits) {
    if (bits < 1) throw invalid_parameter("DetectorVariant: quantizer needs at least one bit");
    DetectorVariant v;
    v.kind = Kind::quantized;
    v.quantizer_bits = bits;
    return v;
}

DetectorVariant DetectorVariant::ignore_overshoot() {
    DetectorVariant v;
    v.kind = Kind::ignore_overshoot;
    return v;
}

DetectorVariant DetectorVariant::bit_llr_calibrated(double lambda_plus, double lambda_minus) {
    DetectorVariant v;
    v.kind = Kind::bit_llr_calibrated;
    v.bit_llr_plus = lambda_plus;
    v.bit_llr_minus = lambda_minus;
    return v;
}

DetectorVariant DetectorVariant::uniform_sampling(std::int64_t period) {
    if (period < 1) throw invalid_parameter("DetectorVariant: uniform period must be >= 1");
    DetectorVariant v;
    v.kind = Kind::uniform_sampling;
    v.uniform_period = period;
    return v;
}

DetectorVariant DetectorVariant::centralized() {
    DetectorVariant v;
    v.kind = Kind::centralized;
    return v;
}

DetectorVariant DetectorVariant::decision_fusion_majority() {
    DetectorVariant v;
    v.kind = Kind::decision_fusion_majority;
    return v;
}

std::string DetectorVariant::name() const {
    switch (kind) {
        case Kind::time_encoded: return "time_encoded";
        case Kind::time_encoded_random: return "time_encoded_random";
        case Kind::quantized: return "quantized" + std::to_string(quantizer_bits);
        case Kind::ignore_overshoot: return "ignore_overshoot";
        case Kind::bit_llr_calibrated: return "bit_llr";
        case Kind::uniform_sampling: return "uniform" + std::to_string(uniform_period);
        case Kind::centralized: return "centralized";
        case Kind::decision_fusion_majority: return "decision_fusion";
    }
    return "unknown";
}

namespace {

using models::Hypothesis;
using models::LlrSource;
using models::NetworkModel;

// Midpoint reconstruction over 2^bits uniform cells of [0, theta].
double quantize_overshoot(double overshoot, double theta, int bits, bool& clamped) {
    const double levels = std::ldexp(1.0, bits); // 2^bits
    const double width = theta / levels;
    auto cell = static_cast<std::int64_t>(overshoot / width);
    clamped = cell >= static_cast<std::int64_t>(levels);
    if (clamped) cell = static_cast<std::int64_t>(levels) - 1;
    return (static_cast<double>(cell) + 0.5) * width;
}

struct Pending {
    double arrival = 0.0;
    int sensor = 0;
    bool decode_at_fc = false; // time-encoded transport; decode on arrival
    int bit = 0;
    double q_hat = 0.0;     // used when !decode_at_fc && !has_override
    bool has_override = false;
    double lambda_override = 0.0;
};

struct PendingLater {
    bool operator()(const Pending& lhs, const Pending& rhs) const {
        if (lhs.arrival != rhs.arrival) return lhs.arrival > rhs.arrival;
        return lhs.sensor > rhs.sensor;
    }
};

using PendingQueue = std::priority_queue<Pending, std::vector<Pending>, PendingLater>;

struct EngineState {
    std::vector<std::unique_ptr<LlrSource>> sources;
    std::vector<SensorRng> rngs;
    std::vector<double> local_llr;
    double global_llr = 0.0;

    EngineState(const NetworkModel& network, Hypothesis h, std::uint64_t trial,
                const RngRoot& root) {
        const int num = network.num_sensors();
        sources.reserve(num);
        rngs.reserve(num);
        local_llr.assign(num, 0.0);
        for (int k = 0; k < num; ++k) {
            sources.push_back(network.make_source(k, h, trial, root));
            rngs.emplace_back(root, trial, static_cast<std::uint64_t>(k));
        }
    }

    // Advances every sensor through ticks (t - stride, t]; callers that freeze
    // sensors (decision fusion) advance selectively instead.
    void advance_to(std::int64_t t, std::int64_t stride) {
        for (std::int64_t tick = t - stride + 1; tick <= t; ++tick)
            for (std::size_t k = 0; k < sources.size(); ++k)
                local_llr[k] = sources[k]->advance(tick, rngs[k]);
        global_llr = 0.0;
        for (double v : local_llr) global_llr += v;
    }
};

TrialOutcome run_centralized(const NetworkModel& network, Hypothesis hypothesis,
                             const TrialConfig& config, std::uint64_t trial,
                             const RngRoot& root) {
    const std::int64_t stride = network.stride();
    EngineState engine(network, hypothesis, trial, root);
    FusionState fc(config.threshold_a, config.threshold_b);
    TrialOutcome out;
    for (std::int64_t t = stride; t <= config.max_ticks && fc.running(); t += stride) {
        engine.advance_to(t, stride);
        fc.apply_absolute(engine.global_llr, static_cast<double>(t));
    }
    if (fc.running()) {
        out.censored = true;
        out.stop_time_raw = static_cast<double>(config.max_ticks);
        out.stop_ticks = config.max_ticks;
    } else {
        out.decision = fc.decision();
        out.stop_time_raw = fc.stop_time_raw();
        out.stop_ticks = static_cast<std::int64_t>(std::ceil(out.stop_time_raw));
    }
    out.exact_llr_at_stop = engine.global_llr;
    return out;
}

TrialOutcome run_decision_fusion(const NetworkModel& network, Hypothesis hypothesis,
                                 const TrialConfig& config, std::uint64_t trial,
                                 const RngRoot& root) {
    const int num = network.num_sensors();
    const std::int64_t stride = network.stride();
    EngineState engine(network, hypothesis, trial, root);

    std::vector<char> decided(num, 0);
    std::vector<int> local_decision(num, -1);
    int undecided = num;
    int count_h1 = 0;
    int count_h0 = 0;
    // Majority rule: H1 needs strictly more than half of all K receivers.
    const int need_h1 = num / 2 + 1;

    TrialOutcome out;
    for (std::int64_t t = stride; t <= config.max_ticks && undecided > 0; t += stride) {
        for (std::int64_t tick = t - stride + 1; tick <= t; ++tick)
            for (int k = 0; k < num; ++k)
                if (!decided[k]) engine.local_llr[k] = engine.sources[k]->advance(tick, engine.rngs[k]);

        for (int k = 0; k < num; ++k) {
            if (decided[k]) continue;
            const double llr = engine.local_llr[k];
            if (llr >= config.threshold_a || llr <= -config.threshold_b) {
                decided[k] = 1;
                --undecided;
                local_decision[k] = llr >= config.threshold_a ? 1 : 0;
                ++out.messages;
                (local_decision[k] == 1 ? count_h1 : count_h0) += 1;
                if (count_h1 >= need_h1) {
                    out.decision = 1;
                } else if (num - count_h0 < need_h1) {
                    // Too few potential H1 votes remain.
                    out.decision = 0;
                }
                if (out.decision >= 0) {
                    out.stop_time_raw = static_cast<double>(t);
                    out.stop_ticks = t;
                    break;
                }
            }
        }
        if (out.decision >= 0) break;
    }

    if (out.decision < 0) {
        out.censored = true;
        out.stop_time_raw = static_cast<double>(config.max_ticks);
        out.stop_ticks = config.max_ticks;
    }
    double total = 0.0;
    for (int k = 0; k < num; ++k) total += engine.local_llr[k];
    out.exact_llr_at_stop = total;
    return out;
}

TrialOutcome run_message_variant(const DetectorVariant& variant, const NetworkModel& network,
                                 Hypothesis hypothesis, const TrialConfig& config,
                                 std::uint64_t trial, const RngRoot& root) {
    const int num = network.num_sensors();
    const std::int64_t stride = network.stride();
    const bool time_encoded_transport = variant.kind == DetectorVariant::Kind::time_encoded ||
                                        variant.kind == DetectorVariant::Kind::time_encoded_random;
    const bool random_transport = variant.kind == DetectorVariant::Kind::time_encoded_random;
    const bool uniform = variant.kind == DetectorVariant::Kind::uniform_sampling;

    const codec::EncoderParams& encoder = random_transport ? config.random_encoder : config.encoder;
    const codec::ChannelModel& channel = random_transport ? config.random_channel : config.channel;
    if (time_encoded_transport) {
        codec::validate_for_channel(encoder, channel);
        if (random_transport && channel.kind() != codec::ChannelKind::random_uniform)
            throw invalid_parameter("time_encoded_random requires a random channel model");
    }
    if (uniform && variant.uniform_period % stride != 0)
        throw invalid_parameter("uniform_sampling period must be a multiple of the network stride");

    EngineState engine(network, hypothesis, trial, root);
    FusionState fc(config.threshold_a, config.threshold_b);
    std::vector<lts::Sampler> samplers;
    if (!uniform)
        for (int k = 0; k < num; ++k) samplers.emplace_back(k, config.delta, stride);
    std::vector<double> last_reported(num, 0.0);

    PendingQueue queue;
    TrialOutcome out;

    const auto emit_event = [&](const lts::SampleEvent& event) {
        Pending p;
        p.sensor = event.sensor_id;
        p.bit = event.bit;
        switch (variant.kind) {
            case DetectorVariant::Kind::time_encoded:
            case DetectorVariant::Kind::time_encoded_random: {
                codec::Encoded enc = codec::encode(event, encoder);
                if (enc.saturated) ++out.saturations;
                auto delay_stream = root.stream(trial, static_cast<std::uint64_t>(event.sensor_id),
                                                static_cast<std::uint64_t>(event.tick),
                                                RngPurpose::channel_delay);
                const codec::Message sent = codec::transmit(enc.message, channel, delay_stream);
                p.arrival = sent.arrival_time;
                p.decode_at_fc = true;
                break;
            }
            case DetectorVariant::Kind::quantized: {
                bool clamped = false;
                p.q_hat = quantize_overshoot(event.overshoot, config.theta, variant.quantizer_bits,
                                             clamped);
                if (clamped) ++out.saturations;
                p.arrival = static_cast<double>(event.tick);
                break;
            }
            case DetectorVariant::Kind::ignore_overshoot:
                p.q_hat = 0.0;
                p.arrival = static_cast<double>(event.tick);
                break;
            case DetectorVariant::Kind::bit_llr_calibrated:
                p.has_override = true;
                p.lambda_override = event.bit > 0 ? variant.bit_llr_plus : variant.bit_llr_minus;
                p.arrival = static_cast<double>(event.tick);
                break;
            default:
                throw invalid_parameter("emit_event: unexpected variant");
        }
        queue.push(p);
    };

    const auto process = [&](const Pending& p) {
        if (p.decode_at_fc) {
            const codec::Decoded decoded = codec::decode(p.arrival, encoder, channel);
            if (decoded.integrity_violation) ++out.integrity_events;
            fc.on_message(p.bit, decoded.overshoot, config.delta, p.arrival);
        } else if (p.has_override) {
            fc.apply_update(p.lambda_override, p.arrival);
        } else {
            fc.on_message(p.bit, p.q_hat, config.delta, p.arrival);
        }
    };

    for (std::int64_t t = stride; t <= config.max_ticks && fc.running(); t += stride) {
        engine.advance_to(t, stride);

        if (uniform) {
            if (t % variant.uniform_period == 0) {
                for (int k = 0; k < num; ++k) {
                    Pending p;
                    p.sensor = k;
                    p.arrival = static_cast<double>(t);
                    p.has_override = true;
                    p.lambda_override = engine.local_llr[k] - last_reported[k];
                    last_reported[k] = engine.local_llr[k];
                    queue.push(p);
                }
            }
        } else {
            for (int k = 0; k < num; ++k)
                if (auto event = samplers[k].step(t, engine.local_llr[k])) emit_event(*event);
        }

        while (!queue.empty() && queue.top().arrival <= static_cast<double>(t) && fc.running()) {
            const Pending p = queue.top();
            queue.pop();
            process(p);
        }
    }

    // Messages still in flight past the horizon can carry the decision.
    while (!queue.empty() && fc.running()) {
        const Pending p = queue.top();
        queue.pop();
        process(p);
    }

    out.messages = fc.message_count();
    out.late_messages = fc.late_message_count() + static_cast<std::int64_t>(queue.size());
    out.exact_llr_at_stop = engine.global_llr;
    if (fc.running()) {
        out.censored = true;
        out.stop_time_raw = static_cast<double>(config.max_ticks);
        out.stop_ticks = config.max_ticks;
    } else {
        out.decision = fc.decision();
        out.stop_time_raw = fc.stop_time_raw();
        out.stop_ticks = static_cast<std::int64_t>(std::ceil(out.stop_time_raw));
    }
    return out;
}

} // namespace

TrialOutcome run_baseline(const DetectorVariant& variant, const NetworkModel& network,
                          Hypothesis hypothesis, const TrialConfig& config, std::uint64_t trial,
                          const RngRoot& root) {
    if (config.max_ticks < 1) throw invalid_parameter("run_baseline: max_ticks must be >= 1");
    switch (variant.kind) {
        case DetectorVariant::Kind::centralized:
            return run_centralized(network, hypothesis, config, trial, root);
        case DetectorVariant::Kind::decision_fusion_majority:
            return run_decision_fusion(network, hypothesis, config, trial, root);
        default:
            return run_message_variant(variant, network, hypothesis, config, trial, root);
    }
}

} // namespace seqdet::fusion
