#pragma once

#include <cmath>
#include <cstdint>

namespace conclab {

// Counter-based stream: output k of stream (seed, task) is a pure function of
// (seed, task, k), so serial and parallel runs produce identical samples.
class CounterRng {
  public:
    CounterRng(std::uint64_t seed, std::uint64_t task = 0)
        : key_(mix(seed ^ mix(task + 0x9e3779b97f4a7c15ull))), counter_(0) {}

    std::uint64_t next_u64() { return mix(key_ + 0x9e3779b97f4a7c15ull * ++counter_); }

    // uniform in [0,1)
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // uniform in {0, ..., m-1}
    std::uint64_t next_below(std::uint64_t m) {
        // 128-bit multiply avoids the modulo bias for small m
        return static_cast<std::uint64_t>((static_cast<unsigned __int128>(next_u64()) * m) >> 64);
    }

    double next_gaussian() {
        // Box-Muller, one value per call (the discarded twin keeps the stream
        // a pure counter function)
        double u1 = next_double();
        double u2 = next_double();
        while (u1 <= 0.0) u1 = next_double();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
    }

  private:
    static std::uint64_t mix(std::uint64_t z) {
        // splitmix64 finalizer
        z ^= z >> 30;
        z *= 0xbf58476d1ce4e5b9ull;
        z ^= z >> 27;
        z *= 0x94d049bb133111ebull;
        z ^= z >> 31;
        return z;
    }

    std::uint64_t key_;
    std::uint64_t counter_;
};

} // namespace conclab
