#pragma once

#include <cmath>
#include <cstdint>

namespace paff {

/// Counter-based pseudo-random stream (splitmix64 core).
///
/// Streams are splittable: `split(i)` derives an independent child stream,
/// so parallel workers (folds, MC passes, dropout layers) can each own a
/// reproducible stream keyed by their index. Output is identical across
/// platforms since no std distribution machinery is involved.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed) : key_(mix(seed ^ 0x5851f42d4c957f2dULL)) {}

    /// Independent child stream; deterministic in (parent key, index).
    RngStream split(std::uint64_t index) const {
        return RngStream(mix(key_ + mix(index + 0x9e3779b97f4a7c15ULL)));
    }

    std::uint64_t next_u64() {
        counter_ += 0x9e3779b97f4a7c15ULL;
        return mix(key_ ^ counter_);
    }

    /// Uniform in [0, 1).
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    /// Uniform integer in [0, n).
    std::uint64_t next_index(std::uint64_t n) { return next_u64() % n; }

    /// Standard normal via Box-Muller (cached second deviate).
    double next_normal() {
        if (have_cached_) {
            have_cached_ = false;
            return cached_;
        }
        double u1 = next_double();
        double u2 = next_double();
        while (u1 <= 0.0) u1 = next_double();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 6.283185307179586476925286766559 * u2;
        cached_ = r * std::sin(theta);
        have_cached_ = true;
        return r * std::cos(theta);
    }

private:
    static std::uint64_t mix(std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    double cached_ = 0.0;
    bool have_cached_ = false;
};

/// Fisher-Yates shuffle driven by an RngStream.
template <typename Container>
void shuffle(Container& c, RngStream& rng) {
    for (std::size_t i = c.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng.next_index(i));
        std::swap(c[i - 1], c[j]);
    }
}

}  // namespace paff
