#pragma once

// Counter-based per-sample random streams.
//
// The stream for (seed, index) is a SplitMix64 sequence whose starting state
// is an avalanche mix of both values, so sample i draws the same variates no
// matter which worker produces it or in what order. Uniforms and normals are
// derived with explicit formulas; the implementation-defined std
// distributions are never used.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <utility>

namespace matchpoly {

/// Stafford "Mix13" finaliser, as used by SplitMix64.
constexpr std::uint64_t avalanche64(std::uint64_t z) noexcept
{
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

constexpr std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) noexcept
{
    return avalanche64(seed ^ avalanche64(index + 0x9e3779b97f4a7c15ULL));
}

class RngStream {
public:
    RngStream(std::uint64_t seed, std::uint64_t stream_index) noexcept
        : seed_(seed), index_(stream_index), state_(mix_seed(seed, stream_index))
    {
    }

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t stream_index() const noexcept { return index_; }

    std::uint64_t next_u64() noexcept
    {
        state_ += 0x9e3779b97f4a7c15ULL;
        return avalanche64(state_);
    }

    /// Uniform on (0, 1], 53-bit resolution.
    double next_uniform() noexcept
    {
        return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    }

    /// Fills `out` with standard normals by Box-Muller. Every pair of outputs
    /// consumes exactly two uniforms; an odd tail still consumes two.
    void fill_normals(std::span<double> out) noexcept
    {
        std::size_t i = 0;
        for (; i + 1 < out.size(); i += 2) {
            const auto [z0, z1] = box_muller();
            out[i] = z0;
            out[i + 1] = z1;
        }
        if (i < out.size()) out[i] = box_muller().first;
    }

    double next_normal() noexcept { return box_muller().first; }

private:
    std::pair<double, double> box_muller() noexcept
    {
        const double u1 = next_uniform();
        const double u2 = next_uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * std::numbers::pi * u2;
        return {r * std::cos(theta), r * std::sin(theta)};
    }

    std::uint64_t seed_;
    std::uint64_t index_;
    std::uint64_t state_;
};

} // namespace matchpoly
