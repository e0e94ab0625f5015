#pragma once

#include <cstdint>
#include <string>
#include <stdexcept>

namespace spicrack {

/// Counter-style 64-bit PRNG (splitmix64). Every randomized artifact in this
/// library is a pure function of a 64-bit seed, so runs reproduce bit-for-bit
/// across platforms; std:: distributions are avoided for the same reason.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    /// Uniform double in [0,1) with 53 random bits.
    double next_double() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    /// Uniform double in [lo,hi).
    double next_double(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    /// Uniform integer in [0,bound) by rejection; exact, no modulo bias.
    std::uint64_t next_below(std::uint64_t bound) {
        if (bound == 0) throw std::invalid_argument("next_below: bound must be positive");
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
        std::uint64_t v = next();
        while (v >= limit) v = next();
        return v % bound;
    }

    /// Fair coin as 0/1.
    std::uint64_t next_bit() { return next() >> 63; }

private:
    std::uint64_t state_;
};

/// Decorrelated sub-seed for stream `stream` of a master seed. Used so that
/// e.g. image i of a corpus depends only on (seed, i), not on corpus size.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    SplitMix64 g(seed ^ (0x9e3779b97f4a7c15ull * (stream + 1)));
    return g.next();
}

/// Parses a seed given as up to 16 hex digits (optionally 0x-prefixed).
inline std::uint64_t parse_seed_hex(const std::string& text) {
    std::string s = text;
    if (s.rfind("0x", 0) == 0 || s.rfind("0X", 0) == 0) s = s.substr(2);
    if (s.empty() || s.size() > 16) throw std::invalid_argument("seed: expected 1..16 hex digits, got '" + text + "'");
    std::uint64_t v = 0;
    for (char c : s) {
        int d;
        if (c >= '0' && c <= '9') d = c - '0';
        else if (c >= 'a' && c <= 'f') d = c - 'a' + 10;
        else if (c >= 'A' && c <= 'F') d = c - 'A' + 10;
        else throw std::invalid_argument("seed: invalid hex digit '" + std::string(1, c) + "' in '" + text + "'");
        v = (v << 4) | static_cast<std::uint64_t>(d);
    }
    return v;
}

/// Formats a seed as lowercase hex (no prefix), the form used in file headers.
inline std::string seed_to_hex(std::uint64_t seed) {
    static const char* digits = "0123456789abcdef";
    std::string s;
    do {
        s.insert(s.begin(), digits[seed & 0xf]);
        seed >>= 4;
    } while (seed != 0);
    return s;
}

} // namespace spicrack
