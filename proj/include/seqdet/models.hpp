#pragma once

#include <cstdint>
#include <memory>
#include <optional>

#include "seqdet/rng.hpp"

namespace seqdet::models {

enum class Hypothesis : int { h0 = 0, h1 = 1 };

/// Kullback-Leibler information numbers of a per-tick LLR increment:
/// i0 = E0[-l], i1 = E1[l], both in nats per tick.
struct KlNumbers {
    double i0 = 0.0;
    double i1 = 0.0;
};

/// An i.i.d. per-tick scalar observation model: a sampler for each hypothesis
/// plus the deterministic map from observation to LLR increment.
class SensorModel {
public:
    explicit SensorModel(int id) : id_(id) {}
    virtual ~SensorModel() = default;

    int id() const { return id_; }

    virtual double draw(Hypothesis h, RngStream& rng) const = 0;
    virtual double llr_increment(double observation) const = 0;

    /// Closed-form KL numbers when the model has them.
    virtual std::optional<KlNumbers> analytic_kl() const { return std::nullopt; }

private:
    int id_;
};

/// H0: N(0, sigma^2), H1: N(mean_shift, sigma^2).
/// llr(y) = (mean_shift*y - mean_shift^2/2) / sigma^2.
class GaussianShiftModel final : public SensorModel {
public:
    GaussianShiftModel(double mean_shift, double sigma, int id);

    double draw(Hypothesis h, RngStream& rng) const override;
    double llr_increment(double observation) const override;
    std::optional<KlNumbers> analytic_kl() const override;

    double mean_shift() const { return mean_shift_; }
    double sigma() const { return sigma_; }

private:
    double mean_shift_;
    double sigma_;
};

std::shared_ptr<SensorModel> gaussian_shift_model(double mean_shift, double sigma, int id);

/// KL numbers from the model's closed form; throws unsupported_method when
/// the model does not declare one.
KlNumbers kl_numbers_analytic(const SensorModel& model);

/// Sample means of -l under H0 and +l under H1.
KlNumbers kl_numbers_monte_carlo(const SensorModel& model, std::size_t n_draws,
                                 std::uint64_t seed);

/// Per-sensor, per-trial source of the exact local LLR process. advance()
/// must be called once per tick in increasing tick order; its return value is
/// the exact local LLR, meaningful at multiples of the owning network's
/// stride (block detectors may return partial values mid-block).
class LlrSource {
public:
    virtual ~LlrSource() = default;
    virtual double advance(std::int64_t tick, const SensorRng& rng) = 0;
};

/// LlrSource over an i.i.d. SensorModel: one observation per tick,
/// accumulated LLR.
class IidLlrSource final : public LlrSource {
public:
    IidLlrSource(std::shared_ptr<const SensorModel> model, Hypothesis h)
        : model_(std::move(model)), hypothesis_(h) {}

    double advance(std::int64_t tick, const SensorRng& rng) override;

private:
    std::shared_ptr<const SensorModel> model_;
    Hypothesis hypothesis_;
    double llr_ = 0.0;
};

/// Immutable description of a sensor network: how many sensors, the tick
/// stride at which local LLRs are defined, per-trial LLR sources, and the
/// per-stride KL sums used to calibrate the sampling threshold. Shareable
/// across concurrent trials.
class NetworkModel {
public:
    virtual ~NetworkModel() = default;

    virtual int num_sensors() const = 0;
    virtual std::int64_t stride() const = 0;

    virtual std::unique_ptr<LlrSource> make_source(int sensor, Hypothesis h,
                                                   std::uint64_t trial,
                                                   const RngRoot& root) const = 0;

    /// Length in ticks of the block over which block_kl_sum is reported
    /// (one tick for i.i.d. models, one waveform for block detectors).
    virtual std::int64_t kl_block_ticks() const = 0;

    /// Sum over sensors of |E_i[L over one KL block]| in nats. The sampling
    /// threshold solves delta*tanh(delta/2) = block_kl_sum / (rate * block).
    virtual double block_kl_sum(Hypothesis h) const = 0;
};

/// K independent sensors sharing one GaussianShiftModel parameterization.
class GaussianNetwork final : public NetworkModel {
public:
    GaussianNetwork(int num_sensors, double mean_shift, double sigma);

    int num_sensors() const override { return num_sensors_; }
    std::int64_t stride() const override { return 1; }
    std::unique_ptr<LlrSource> make_source(int sensor, Hypothesis h, std::uint64_t trial,
                                           const RngRoot& root) const override;
    std::int64_t kl_block_ticks() const override { return 1; }
    double block_kl_sum(Hypothesis h) const override;

    const SensorModel& sensor_model() const { return *model_; }

private:
    int num_sensors_;
    std::shared_ptr<SensorModel> model_;
};

} // namespace seqdet::models
