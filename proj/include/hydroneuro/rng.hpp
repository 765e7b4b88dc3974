#pragma once

#include <cstdint>
#include <random>

namespace hydroneuro {

// Stream tags keep the initial-condition draws of replica k independent of
// its dynamics draws while both stay reproducible in isolation.
enum class StreamTag : std::uint64_t {
    initial = 1,
    dynamics = 2,
    auxiliary = 3,
    coupling = 4,
    oracle = 5,
};

std::uint64_t splitmix64(std::uint64_t x);

/// Seed for replica `replica` of stream `tag` under root seed `root`.
/// seed = splitmix64(splitmix64(root ^ tag * C1) + (replica + 1) * C2)
std::uint64_t derive_seed(std::uint64_t root, StreamTag tag, std::uint64_t replica);

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform on [0,1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    /// Uniform on (0,1].
    double uniform_open() { return 1.0 - uniform(); }
    double exponential(double rate);
    std::size_t index(std::size_t n);

private:
    std::mt19937_64 engine_;
};

}  // namespace hydroneuro
