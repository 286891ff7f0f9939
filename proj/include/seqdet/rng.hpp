#pragma once

#include <complex>
#include <cstdint>

namespace seqdet {

/// Purpose tag mixed into every stream key. Streams with different purposes
/// never share draws, so adding a consumer (e.g. a channel-delay draw) does
/// not shift anyone else's random numbers.
enum class RngPurpose : std::uint64_t {
    observation = 1,
    channel_coefficient = 2,
    channel_delay = 3,
    calibration = 4,
};

/// Deterministic pseudo-random stream seeded from a fully mixed 64-bit key.
class RngStream {
public:
    explicit RngStream(std::uint64_t key) : state_(key) {}

    std::uint64_t next_u64();

    /// Uniform on [0, 1).
    double uniform();
    /// Uniform on (0, 1]; safe as a log argument.
    double uniform_positive();
    double uniform(double lo, double hi);

    /// Standard normal via Box-Muller; the second variate is cached.
    double normal();

    /// Circularly symmetric complex normal with E|z|^2 = 1.
    std::complex<double> complex_normal();

private:
    std::uint64_t state_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// Root of the counter-based splitting scheme. All randomness in a run flows
/// from one seed; a stream is addressed by (trial, sensor, tick, purpose), so
/// results do not depend on execution order or thread count.
class RngRoot {
public:
    explicit RngRoot(std::uint64_t seed) : seed_(seed) {}

    RngStream stream(std::uint64_t trial, std::uint64_t sensor, std::uint64_t tick,
                     RngPurpose purpose) const;

    std::uint64_t seed() const { return seed_; }

private:
    std::uint64_t seed_;
};

/// Independent root for side runs (calibration passes, rate measurements)
/// that must not share streams with measurement trials.
RngRoot derive_root(const RngRoot& root, std::uint64_t tag);

/// View of the root fixed to one (trial, sensor); mints per-tick streams.
class SensorRng {
public:
    SensorRng(const RngRoot& root, std::uint64_t trial, std::uint64_t sensor)
        : root_(&root), trial_(trial), sensor_(sensor) {}

    RngStream at(std::uint64_t tick, RngPurpose purpose) const {
        return root_->stream(trial_, sensor_, tick, purpose);
    }

private:
    const RngRoot* root_;
    std::uint64_t trial_;
    std::uint64_t sensor_;
};

} // namespace seqdet
