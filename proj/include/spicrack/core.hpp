#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "spicrack/parallel.hpp"
#include "spicrack/prng.hpp"

namespace spicrack {

using BigInt = boost::multiprecision::cpp_int;

// ---------------------------------------------------------------------------
// Domain types. All of them are plain immutable-by-convention value types;
// operations never mutate their inputs, so sharing across threads is safe.
// ---------------------------------------------------------------------------

/// Grayscale plaintext: N pixels in [0,1], stored row-major with 2-D shape.
struct ObjectImage {
    std::vector<double> pixels;
    int width = 0;
    int height = 0;

    int pixel_count() const { return width * height; }
    double at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
};

/// One binary illumination pattern per row: M rows of N entries in {0,1}.
/// The full matrix is the encryption/decryption key of a Type I system.
struct PatternKey {
    std::vector<std::uint8_t> entries; // row-major, pattern index is the slow axis
    int pattern_count = 0;             // M
    int pixels_per_pattern = 0;        // N
    int width = 0;                     // per-pattern shape, width*height == N
    int height = 0;

    std::span<const std::uint8_t> row(int m) const {
        return {entries.data() + static_cast<std::size_t>(m) * pixels_per_pattern,
                static_cast<std::size_t>(pixels_per_pattern)};
    }
};

/// Single-pixel intensity sequence C(m): the ciphertext of one image.
struct Ciphertext {
    std::vector<double> values;
};

/// Secret order of a Type II system. order[i] is the 0-based index of the
/// original pattern that sits at position i (file formats use 1-based).
struct PermutationKey {
    std::vector<int> order;

    int size() const { return static_cast<int>(order.size()); }
};

/// Aligned plaintext/ciphertext pairs available to a known-plaintext attacker.
struct PlainCipherCorpus {
    std::vector<ObjectImage> images;
    std::vector<Ciphertext> ciphertexts;

    int pair_count() const { return static_cast<int>(images.size()); }
};

/// Which part of the system is secret: the raw patterns (TypeI, key space
/// 2^(M*N)) or only their order (TypeII, key space M!).
enum class KeyRegime { TypeI, TypeII };

inline const char* regime_name(KeyRegime r) { return r == KeyRegime::TypeI ? "TYPE1" : "TYPE2"; }

// ---------------------------------------------------------------------------
// Validation helpers. Readers and operations call these so that malformed
// values never propagate past a module boundary.
// ---------------------------------------------------------------------------

inline void validate_image(const ObjectImage& img, const char* what = "image") {
    if (img.width < 1 || img.height < 1)
        throw std::invalid_argument(std::string(what) + ": dimensions must be positive");
    if (img.pixels.size() != static_cast<std::size_t>(img.width) * img.height)
        throw std::invalid_argument(std::string(what) + ": pixel count does not match width*height");
    for (double v : img.pixels)
        if (!(v >= 0.0 && v <= 1.0))
            throw std::invalid_argument(std::string(what) + ": pixel value outside [0,1]");
}

inline void validate_key(const PatternKey& key, const char* what = "key") {
    if (key.pattern_count < 1 || key.pixels_per_pattern < 1)
        throw std::invalid_argument(std::string(what) + ": M and N must be positive");
    if (key.width < 1 || key.height < 1 || key.width * key.height != key.pixels_per_pattern)
        throw std::invalid_argument(std::string(what) + ": pattern shape does not match N");
    if (key.entries.size() != static_cast<std::size_t>(key.pattern_count) * key.pixels_per_pattern)
        throw std::invalid_argument(std::string(what) + ": entry count does not match M*N");
    for (std::uint8_t e : key.entries)
        if (e > 1) throw std::invalid_argument(std::string(what) + ": entries must be 0 or 1");
}

inline void validate_permutation(const PermutationKey& perm, int expected_size = -1) {
    int m = perm.size();
    if (m < 1) throw std::invalid_argument("permutation: must be non-empty");
    if (expected_size >= 0 && m != expected_size)
        throw std::invalid_argument("permutation: length " + std::to_string(m) + " does not match expected " +
                                    std::to_string(expected_size));
    std::vector<bool> seen(static_cast<std::size_t>(m), false);
    for (int v : perm.order) {
        if (v < 0 || v >= m || seen[static_cast<std::size_t>(v)])
            throw std::invalid_argument("permutation: not a bijection on {0..M-1}");
        seen[static_cast<std::size_t>(v)] = true;
    }
}

inline void validate_corpus(const PlainCipherCorpus& corpus) {
    if (corpus.images.empty() || corpus.images.size() != corpus.ciphertexts.size())
        throw std::invalid_argument("corpus: needs Q >= 1 aligned image/ciphertext pairs");
    int w = corpus.images.front().width, h = corpus.images.front().height;
    std::size_t m = corpus.ciphertexts.front().values.size();
    for (const auto& img : corpus.images) {
        if (img.width != w || img.height != h)
            throw std::invalid_argument("corpus: images disagree on shape");
        if (img.pixels.size() != static_cast<std::size_t>(w) * h)
            throw std::invalid_argument("corpus: image pixel count does not match shape");
    }
    for (const auto& c : corpus.ciphertexts)
        if (c.values.size() != m)
            throw std::invalid_argument("corpus: ciphertexts disagree on M");
}

// ---------------------------------------------------------------------------
// Dense row-major matrix of doubles, the workhorse of the solvers. Rows are
// measurements so both the forward model and the attack systems stream
// contiguously.
// ---------------------------------------------------------------------------

struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {
        if (r < 1 || c < 1) throw std::invalid_argument("matrix: dimensions must be positive");
    }

    double& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
    double at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
    std::span<const double> row(int r) const {
        return {data.data() + static_cast<std::size_t>(r) * cols, static_cast<std::size_t>(cols)};
    }
    std::span<double> row(int r) {
        return {data.data() + static_cast<std::size_t>(r) * cols, static_cast<std::size_t>(cols)};
    }
};

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

/// Generates an M x N key of independent fair-coin bits from the seed.
/// Identical arguments give identical keys.
inline PatternKey generate_key(int pattern_count, int pixels_per_pattern, int width, std::uint64_t seed) {
    if (pattern_count < 1 || pixels_per_pattern < 1)
        throw std::invalid_argument("generate_key: M and N must be positive");
    if (width < 1 || pixels_per_pattern % width != 0)
        throw std::invalid_argument("generate_key: width must divide N");
    PatternKey key;
    key.pattern_count = pattern_count;
    key.pixels_per_pattern = pixels_per_pattern;
    key.width = width;
    key.height = pixels_per_pattern / width;
    key.entries.resize(static_cast<std::size_t>(pattern_count) * pixels_per_pattern);
    SplitMix64 rng(seed);
    for (auto& e : key.entries) e = static_cast<std::uint8_t>(rng.next_bit());
    return key;
}

/// Uniform random permutation of {0..M-1} (Fisher-Yates over the seeded PRNG).
inline PermutationKey generate_permutation(int pattern_count, std::uint64_t seed) {
    if (pattern_count < 1) throw std::invalid_argument("generate_permutation: M must be positive");
    PermutationKey perm;
    perm.order.resize(static_cast<std::size_t>(pattern_count));
    for (int i = 0; i < pattern_count; ++i) perm.order[static_cast<std::size_t>(i)] = i;
    SplitMix64 rng(seed);
    for (int i = pattern_count - 1; i > 0; --i) {
        auto j = static_cast<std::size_t>(rng.next_below(static_cast<std::uint64_t>(i) + 1));
        std::swap(perm.order[static_cast<std::size_t>(i)], perm.order[j]);
    }
    return perm;
}

/// Forward model: C(m) = sum_n K(m,n) * O(n). Encryption of one image.
inline Ciphertext encrypt(const ObjectImage& image, const PatternKey& key) {
    if (image.pixel_count() != key.pixels_per_pattern)
        throw std::invalid_argument("encrypt: image has " + std::to_string(image.pixel_count()) +
                                    " pixels, key expects " + std::to_string(key.pixels_per_pattern));
    Ciphertext out;
    out.values.resize(static_cast<std::size_t>(key.pattern_count));
    const double* px = image.pixels.data();
    const int n = key.pixels_per_pattern;
    for (int m = 0; m < key.pattern_count; ++m) {
        const std::uint8_t* row = key.entries.data() + static_cast<std::size_t>(m) * n;
        double acc = 0.0;
        for (int i = 0; i < n; ++i) acc += row[i] ? px[i] : 0.0;
        out.values[static_cast<std::size_t>(m)] = acc;
    }
    return out;
}

/// Encrypts a whole image set under one key. Images are independent, so the
/// loop fans out across threads; outputs are identical for any thread count.
inline std::vector<Ciphertext> encrypt_all(const std::vector<ObjectImage>& images, const PatternKey& key,
                                           int threads = 0) {
    std::vector<Ciphertext> out(images.size());
    parallel_for(images.size(), threads, [&](std::size_t i) { out[i] = encrypt(images[i], key); });
    return out;
}

/// Rearranges patterns: row i of the result is row order[i] of the original.
inline PatternKey permute_key(const PatternKey& original, const PermutationKey& perm) {
    validate_permutation(perm, original.pattern_count);
    PatternKey out = original;
    const int n = original.pixels_per_pattern;
    for (int i = 0; i < original.pattern_count; ++i) {
        auto src = original.row(perm.order[static_cast<std::size_t>(i)]);
        std::copy(src.begin(), src.end(), out.entries.begin() + static_cast<std::size_t>(i) * n);
    }
    return out;
}

/// Inverse permutation: if p places original order[i] at position i, the
/// inverse places position i back at order[i].
inline PermutationKey invert_permutation(const PermutationKey& perm) {
    validate_permutation(perm);
    PermutationKey inv;
    inv.order.assign(perm.order.size(), 0);
    for (int i = 0; i < perm.size(); ++i)
        inv.order[static_cast<std::size_t>(perm.order[static_cast<std::size_t>(i)])] = i;
    return inv;
}

/// base-2 logarithm of a positive big integer, good to double precision.
inline double log2_of(const BigInt& x) {
    if (x <= 0) throw std::invalid_argument("log2_of: argument must be positive");
    const unsigned bits = boost::multiprecision::msb(x); // floor(log2 x)
    if (bits <= 52) return std::log2(x.convert_to<double>());
    const BigInt top = x >> (bits - 52);
    return std::log2(top.convert_to<double>()) + static_cast<double>(bits - 52);
}

struct KeySpaceSize {
    BigInt count;
    double log2_count = 0.0;
};

/// Exact key-space size: 2^(M*N) for Type I, M! for Type II.
inline KeySpaceSize key_space_size(int pattern_count, int pixels_per_pattern, KeyRegime regime) {
    if (pattern_count < 1 || pixels_per_pattern < 1)
        throw std::invalid_argument("key_space_size: M and N must be positive");
    KeySpaceSize out;
    if (regime == KeyRegime::TypeI) {
        out.count = BigInt(1) << (static_cast<std::size_t>(pattern_count) * static_cast<std::size_t>(pixels_per_pattern));
    } else {
        out.count = 1;
        for (int i = 2; i <= pattern_count; ++i) out.count *= i;
    }
    out.log2_count = log2_of(out.count);
    return out;
}

} // namespace spicrack
