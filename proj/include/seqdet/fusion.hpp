#pragma once

#include <cstdint>
#include <string>
#include <utility>

#include "seqdet/codec.hpp"
#include "seqdet/models.hpp"

namespace seqdet::fusion {

/// Wald's closed-form SPRT thresholds for target error probabilities:
/// a = ln((1-beta)/alpha), b = ln((1-alpha)/beta).
std::pair<double, double> wald_thresholds(double alpha, double beta);

/// Fusion-center SPRT state. The running statistic is updated per message
/// (or set directly by the centralized detector) and the stopping rule is
/// evaluated immediately after every update.
class FusionState {
public:
    FusionState(double threshold_a, double threshold_b);

    /// Applies one decoded message: llr += bit * (delta + overshoot_estimate).
    /// Messages arriving after the decision are ignored and counted.
    void on_message(int bit, double overshoot_estimate, double delta, double arrival_time);

    /// Adds a precomputed LLR message (calibrated bit LLRs, uniform sampling).
    void apply_update(double lambda_hat, double arrival_time);

    /// Centralized path: the statistic is the exact global LLR itself.
    void apply_absolute(double llr_value, double time);

    bool running() const { return !decided_; }
    /// 0 or 1; meaningful only once !running().
    int decision() const { return decision_; }
    double llr_hat() const { return llr_; }
    double stop_time_raw() const { return stop_time_; }
    double threshold_a() const { return a_; }
    double threshold_b() const { return b_; }
    std::int64_t message_count() const { return messages_; }
    std::int64_t late_message_count() const { return late_; }

private:
    void check_stop(double time);

    double a_;
    double b_;
    double llr_ = 0.0;
    bool decided_ = false;
    int decision_ = -1;
    double stop_time_ = 0.0;
    std::int64_t messages_ = 0;
    std::int64_t late_ = 0;
};

/// The detectors compared by the harness. One kind per run.
struct DetectorVariant {
    enum class Kind {
        time_encoded,
        time_encoded_random,
        quantized,
        ignore_overshoot,
        bit_llr_calibrated,
        uniform_sampling,
        centralized,
        decision_fusion_majority,
    };

    Kind kind = Kind::time_encoded;
    int quantizer_bits = 3;            // quantized
    std::int64_t uniform_period = 4;   // uniform_sampling, in ticks
    double bit_llr_plus = 0.0;         // bit_llr_calibrated constants
    double bit_llr_minus = 0.0;

    static DetectorVariant time_encoded();
    static DetectorVariant time_encoded_random();
    static DetectorVariant quantized(int bits);
    static DetectorVariant ignore_overshoot();
    static DetectorVariant bit_llr_calibrated(double lambda_plus, double lambda_minus);
    static DetectorVariant uniform_sampling(std::int64_t period);
    static DetectorVariant centralized();
    static DetectorVariant decision_fusion_majority();

    std::string name() const;
};

/// Everything a single trial needs beyond the network model. The harness
/// prepares one of these per experiment; encoder/channel pairs exist for both
/// the deterministic-channel and the random-channel transports so that both
/// time-encoded variants can run against common random numbers.
struct TrialConfig {
    double delta = 1.0;
    double threshold_a = 1.0;
    double threshold_b = 1.0;
    double theta = 1.0; // overshoot bound; quantizer range
    codec::EncoderParams encoder;
    codec::ChannelModel channel = codec::ChannelModel::ideal();
    codec::EncoderParams random_encoder;
    codec::ChannelModel random_channel = codec::ChannelModel::ideal();
    std::int64_t max_ticks = 10'000'000;
};

struct TrialOutcome {
    bool censored = false;
    int decision = -1;
    double stop_time_raw = 0.0;
    std::int64_t stop_ticks = 0;
    std::int64_t messages = 0;
    std::int64_t saturations = 0;
    std::int64_t integrity_events = 0;
    std::int64_t late_messages = 0;
    /// Exact global LLR (sum of all sensors' exact local LLRs) at the
    /// evaluated tick covering the stop; importance-sampling weights are
    /// exp(+-) of this.
    double exact_llr_at_stop = 0.0;
};

/// Runs one trial of the given detector over the network. Deterministic
/// given (trial, root): all draws are counter-keyed, so different variants
/// see identical observations for the same trial index.
TrialOutcome run_baseline(const DetectorVariant& variant, const models::NetworkModel& network,
                          models::Hypothesis hypothesis, const TrialConfig& config,
                          std::uint64_t trial, const RngRoot& root);

} // namespace seqdet::fusion
