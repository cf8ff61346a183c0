#include "msde/noise.hpp"

#include <cmath>
#include <numbers>

namespace msde {

std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

NoiseStream NoisePath::channel(Channel c) const noexcept {
    std::uint64_t h = mix64(seed);
    h = mix64(h ^ stream_id);
    h = mix64(h ^ static_cast<std::uint64_t>(c));
    return NoiseStream(h);
}

double NoiseStream::normal(std::uint64_t step, std::uint32_t coord) const noexcept {
    std::uint64_t h = mix64(prefix_ ^ step);
    h = mix64(h ^ (static_cast<std::uint64_t>(coord) * 0x632be59bd9b4e019ULL));
    const std::uint64_t h2 = mix64(h ^ 0xd1b54a32d192ed03ULL);
    // u1 in (0, 1], u2 in [0, 1)
    const double u1 = static_cast<double>((h >> 11) + 1) * 0x1.0p-53;
    const double u2 = static_cast<double>(h2 >> 11) * 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

void NoiseStream::increments(std::uint64_t step, double dt, std::span<double> out) const noexcept {
    const double s = std::sqrt(dt);
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = s * normal(step, static_cast<std::uint32_t>(i));
    }
}

double NoiseStream::coarse_increment(std::uint64_t coarse_step, std::uint32_t coord, double base_dt,
                                     std::uint64_t factor) const noexcept {
    const double s = std::sqrt(base_dt);
    double sum = 0.0;
    for (std::uint64_t j = 0; j < factor; ++j) sum += s * normal(coarse_step * factor + j, coord);
    return sum;
}

}  // namespace msde
