#include "hydroneuro/rng.hpp"

#include <cmath>
#include <limits>

namespace hydroneuro {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t root, StreamTag tag, std::uint64_t replica) {
    const std::uint64_t base = splitmix64(root ^ (static_cast<std::uint64_t>(tag) * 0xD1B54A32D192ED03ULL));
    return splitmix64(base + (replica + 1) * 0x9E3779B97F4A7C15ULL);
}

double Rng::exponential(double rate) {
    if (rate <= 0.0) return std::numeric_limits<double>::infinity();
    return -std::log(uniform_open()) / rate;
}

std::size_t Rng::index(std::size_t n) {
    auto k = static_cast<std::size_t>(uniform() * static_cast<double>(n));
    return k < n ? k : n - 1;
}

}  // namespace hydroneuro
