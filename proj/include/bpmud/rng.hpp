#pragma once

#include <cstdint>
#include <random>

namespace bpmud {

// Stable 64-bit mixer (splitmix64 finalizer). Used to derive independent
// sub-stream seeds from (trial seed, stream label) so that signatures,
// symbols and noise each get their own reproducible generator.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

enum class Stream : std::uint64_t {
    Signatures = 1,
    Symbols = 2,
    Noise = 3,
    Probe = 4, // start vectors for power iteration and similar diagnostics
};

// mt19937_64 seeded from a (seed, stream) pair. Byte-reproducible for a
// fixed libstdc++, which is all the determinism contract asks for.
class SeededRng {
  public:
    SeededRng(std::uint64_t seed, Stream stream)
        : engine_(mix64(mix64(seed) ^ static_cast<std::uint64_t>(stream))) {}

    double gaussian() { return normal_(engine_); }

    // +1 or -1 with equal probability.
    double sign() { return (engine_() & 1ULL) ? 1.0 : -1.0; }

    std::mt19937_64& engine() { return engine_; }

  private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

} // namespace bpmud
