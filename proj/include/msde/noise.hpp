#pragma once

#include <cstdint>
#include <span>

namespace msde {

/// Driving-noise channels. W1 drives the slow equation, W2 the fast one;
/// LimitW1 is the independent Brownian motion of the deviation limit.
enum class Channel : std::uint64_t {
    SlowW1 = 1,
    FastW2 = 2,
    LimitW1 = 3,
    Frozen = 4,
    Auxiliary = 5,
};

/// Counter-addressed standard normals for one channel of a NoisePath.
/// normal(step, coord) is a pure function of (seed, stream_id, channel,
/// step, coord).
class NoiseStream {
public:
    explicit NoiseStream(std::uint64_t prefix) noexcept : prefix_(prefix) {}

    [[nodiscard]] double normal(std::uint64_t step, std::uint32_t coord) const noexcept;

    /// Fills out[i] = sqrt(dt) * normal(step, i).
    void increments(std::uint64_t step, double dt, std::span<double> out) const noexcept;

    /// Increment over coarse step `coarse_step` of a grid that is `factor`
    /// times coarser than the base grid of width base_dt: the exact sum of the
    /// factor underlying fine increments, summed in index order.
    [[nodiscard]] double coarse_increment(std::uint64_t coarse_step, std::uint32_t coord,
                                          double base_dt, std::uint64_t factor) const noexcept;

    [[nodiscard]] std::uint64_t prefix() const noexcept { return prefix_; }

private:
    std::uint64_t prefix_;
};

/// Reproducible Gaussian noise source keyed by (seed, stream_id). Paths in a
/// Monte-Carlo batch use stream_id = path index; distinct channels give
/// independent Brownian motions for the same path.
struct NoisePath {
    std::uint64_t seed = 0;
    std::uint64_t stream_id = 0;

    [[nodiscard]] NoiseStream channel(Channel c) const noexcept;
    [[nodiscard]] NoisePath with_stream(std::uint64_t id) const noexcept { return {seed, id}; }

    friend bool operator==(const NoisePath&, const NoisePath&) = default;
};

/// splitmix64 finalizer; exposed for stream derivation in experiment drivers.
[[nodiscard]] std::uint64_t mix64(std::uint64_t z) noexcept;

}  // namespace msde
