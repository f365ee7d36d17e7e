#pragma once

// Seeded RNG stream derivation. Every random choice in a run is drawn from a
// stream keyed by (run seed, structured key parts), so runs are reproducible
// and resumable without saving mutable generator state.

#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <string_view>

namespace distill {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// Collapses (base seed, key parts) into one 64-bit stream seed. Distinct key
// tuples give independent streams; identical tuples give identical streams.
inline std::uint64_t derive_seed(std::uint64_t base, std::span<const std::uint64_t> parts) {
    std::uint64_t h = splitmix64(base);
    for (std::uint64_t p : parts) h = splitmix64(h ^ splitmix64(p + 0x9E3779B97F4A7C15ULL));
    return h;
}

inline std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> parts) {
    return derive_seed(base, std::span<const std::uint64_t>(parts.begin(), parts.size()));
}

// FNV-1a over bytes; stable across processes and platforms (std::hash is not).
inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

// Unbiased draw from [0, n). mt19937_64 output is fully specified by the
// standard and the rejection step below is ours, so draws are identical on
// every platform (uniform_int_distribution would not guarantee that).
inline std::uint64_t bounded_draw(std::mt19937_64& gen, std::uint64_t n) {
    const std::uint64_t threshold = (0 - n) % n;
    for (;;) {
        std::uint64_t r = gen();
        if (r >= threshold) return r % n;
    }
}

class SeedStream {
public:
    explicit SeedStream(std::uint64_t derived) : gen_(derived) {}
    SeedStream(std::uint64_t base, std::initializer_list<std::uint64_t> parts)
        : gen_(derive_seed(base, parts)) {}

    std::uint64_t below(std::uint64_t n) { return bounded_draw(gen_, n); }
    std::uint64_t next() { return gen_(); }

private:
    std::mt19937_64 gen_;
};

} // namespace distill
