#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace d3net {

/// Purpose tags that keep independent random streams apart.
enum class StreamTag : std::uint64_t {
    tilt_y = 1,
    tilt_x = 2,
    noise = 3,
    jitter = 4,
    scene = 5,
    init = 6,
    sampler = 7,
};

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

inline std::uint64_t mix_key(std::initializer_list<std::uint64_t> parts) {
    std::uint64_t h = 0x243F6A8885A308D3ULL;
    for (auto p : parts) {
        h = splitmix64(h ^ splitmix64(p));
    }
    return h;
}

/// Random stream addressed by (seed, a, b, tag): any frame's noise can be
/// regenerated in isolation, independent of generation order.
class RandomStream {
public:
    RandomStream(std::uint64_t seed, std::uint64_t a, std::uint64_t b, StreamTag tag)
        : engine_(mix_key({seed, a, b, static_cast<std::uint64_t>(tag)})) {}

    double normal() { return normal_(engine_); }
    double uniform(double lo = 0.0, double hi = 1.0) {
        return lo + (hi - lo) * std::generate_canonical<double, 53>(engine_);
    }
    std::uint64_t index(std::uint64_t n) { return std::uniform_int_distribution<std::uint64_t>(0, n - 1)(engine_); }
    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

} // namespace d3net
