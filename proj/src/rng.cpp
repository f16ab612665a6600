#include "unisoft/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace unisoft {

std::uint64_t splitmix64_next(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

namespace {
inline std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
}
}  // namespace

Rng::Rng(std::uint64_t seed) {
    // xoshiro256++ must not start from the all-zero state; SplitMix64
    // seeding guarantees that.
    std::uint64_t s = seed;
    for (auto& word : state_) word = splitmix64_next(s);
}

Rng Rng::for_run(std::uint64_t master_seed, std::uint64_t run_index) {
    std::uint64_t s = master_seed;
    std::uint64_t a = splitmix64_next(s);
    s ^= run_index + 0x9e3779b97f4a7c15ULL;
    std::uint64_t b = splitmix64_next(s);
    return Rng(a ^ rotl(b, 17));
}

std::uint64_t Rng::next_u64() {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
}

double Rng::uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

bool Rng::bernoulli(double p) {
    return uniform01() < p;
}

int Rng::categorical(std::span<const double> probs) {
    if (probs.empty()) throw std::invalid_argument("categorical: empty probability vector");
    const double u = uniform01();
    double cdf = 0.0;
    for (std::size_t i = 0; i + 1 < probs.size(); ++i) {
        cdf += probs[i];
        if (u < cdf) return static_cast<int>(i);
    }
    return static_cast<int>(probs.size() - 1);
}

double Rng::gaussian() {
    // Box-Muller with the cosine branch only; u1 is kept away from zero.
    const double u1 = 1.0 - uniform01();
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace unisoft
