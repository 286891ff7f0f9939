#include "seqdet/rng.hpp"

#include <cmath>

namespace seqdet {
namespace {

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

// SplitMix64 finalizer; full-avalanche 64-bit mix.
std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::uint64_t absorb(std::uint64_t h, std::uint64_t v) {
    return mix64(h ^ (v + kGolden + (h << 6) + (h >> 2)));
}

} // namespace

std::uint64_t RngStream::next_u64() {
    state_ += kGolden;
    return mix64(state_);
}

double RngStream::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::uniform_positive() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
}

double RngStream::uniform(double lo, double hi) {
    return lo + (hi - lo) * uniform();
}

double RngStream::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    const double u1 = uniform_positive();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * M_PI * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
}

std::complex<double> RngStream::complex_normal() {
    return {normal() * M_SQRT1_2, normal() * M_SQRT1_2};
}

RngStream RngRoot::stream(std::uint64_t trial, std::uint64_t sensor, std::uint64_t tick,
                          RngPurpose purpose) const {
    std::uint64_t h = mix64(seed_ ^ kGolden);
    h = absorb(h, trial);
    h = absorb(h, sensor);
    h = absorb(h, tick);
    h = absorb(h, static_cast<std::uint64_t>(purpose));
    return RngStream(h);
}

RngRoot derive_root(const RngRoot& root, std::uint64_t tag) {
    return RngRoot(absorb(mix64(root.seed()), tag));
}

} // namespace seqdet
