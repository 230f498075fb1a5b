#pragma once

#include <cstdint>
#include <random>

#include "bsmix/normal.hpp"

namespace bsmix {

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}
}  // namespace detail

/// Seeded random stream. Child streams derived by index are independent of
/// each other and of the order in which they are consumed, so replicate-level
/// work can be parallelized without changing any result.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed)
        : seed_(seed), gen_(detail::splitmix64(seed)) {}

    RngStream derive(std::uint64_t index) const {
        return RngStream(detail::splitmix64(seed_ ^ detail::splitmix64(index + 1)));
    }

    std::uint64_t seed() const { return seed_; }

    /// Uniform draw in the open interval (0,1).
    double uniform() {
        const std::uint64_t r = gen_();
        return (static_cast<double>(r >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Standard normal via inverse cdf; deterministic across platforms.
    double normal() { return norm_quantile(uniform()); }

    std::uint64_t next_u64() { return gen_(); }

private:
    std::uint64_t seed_;
    std::mt19937_64 gen_;
};

}  // namespace bsmix
