#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "spicrack/core.hpp"
#include "spicrack/parallel.hpp"

namespace spicrack::coa {

/// Uniform binning of an intensity range. The span must be an integer number
/// of bins.
struct HistogramConfig {
    double range_low = 0.0;
    double range_high = 15.0; // paper-scale single-pixel intensities
    double bin_size = 0.5;

    int bin_count() const {
        const double span = range_high - range_low;
        return static_cast<int>(std::llround(span / bin_size));
    }
};

inline void validate_histogram_config(const HistogramConfig& cfg) {
    if (!(cfg.range_high > cfg.range_low)) throw std::invalid_argument("histogram: range_high must exceed range_low");
    if (!(cfg.bin_size > 0.0)) throw std::invalid_argument("histogram: bin_size must be positive");
    const double span = cfg.range_high - cfg.range_low;
    const double bins = span / cfg.bin_size;
    if (std::abs(bins - std::llround(bins)) > 1e-9 * bins || std::llround(bins) < 1)
        throw std::invalid_argument("histogram: range must split into a whole number of bins");
}

/// Binned counts of single-pixel intensities recorded under one pattern.
struct IntensityHistogram {
    HistogramConfig config;
    std::vector<std::int64_t> counts;

    std::int64_t total() const {
        std::int64_t t = 0;
        for (auto c : counts) t += c;
        return t;
    }
};

/// Result of the ciphertext-only attack: the recovered pattern order plus the
/// full actual-vs-exemplar histogram distance matrix (rows: positions in the
/// secret key, cols: original pattern indices).
struct CoaResult {
    PermutationKey permutation;
    Matrix distance_matrix;
    bool frequency_normalized = false; // set when Q != Q' forced frequencies
};

/// Rearranges a set of per-image ciphertexts (each length M) into the M x Q
/// intensity matrix the attack consumes: row m holds C_1(m)..C_Q(m).
inline Matrix intensities_from_ciphertexts(const std::vector<Ciphertext>& ciphertexts) {
    if (ciphertexts.empty()) throw std::invalid_argument("intensities: need at least one ciphertext");
    const int m_total = static_cast<int>(ciphertexts.front().values.size());
    const int q_total = static_cast<int>(ciphertexts.size());
    if (m_total < 1) throw std::invalid_argument("intensities: empty ciphertext");
    Matrix out(m_total, q_total);
    for (int q = 0; q < q_total; ++q) {
        const auto& v = ciphertexts[static_cast<std::size_t>(q)].values;
        if (static_cast<int>(v.size()) != m_total)
            throw std::invalid_argument("intensities: ciphertexts disagree on M");
        for (int m = 0; m < m_total; ++m) out.at(m, q) = v[static_cast<std::size_t>(m)];
    }
    return out;
}

/// Virtually records intensities for the attacker's exemplar images under the
/// published original patterns: entry (m,q) = <K_original row m, exemplar q>.
inline Matrix simulate_exemplar_intensities(const std::vector<ObjectImage>& exemplars,
                                            const PatternKey& originals, int threads = 0) {
    if (exemplars.empty()) throw std::invalid_argument("simulate: need at least one exemplar");
    for (const auto& img : exemplars)
        if (img.pixel_count() != originals.pixels_per_pattern)
            throw std::invalid_argument("simulate: exemplar pixel count does not match key N");
    Matrix out(originals.pattern_count, static_cast<int>(exemplars.size()));
    parallel_for(exemplars.size(), threads, [&](std::size_t q) {
        const Ciphertext c = encrypt(exemplars[q], originals);
        for (int m = 0; m < originals.pattern_count; ++m) out.at(m, static_cast<int>(q)) = c.values[static_cast<std::size_t>(m)];
    });
    return out;
}

/// Counts values into uniform bins. Bin i covers [low + i*bs, low + (i+1)*bs),
/// the last bin is closed on the right, and out-of-range values clamp into the
/// nearest edge bin so that total count always equals the number of inputs.
inline IntensityHistogram build_histogram(std::span<const double> values, const HistogramConfig& cfg) {
    validate_histogram_config(cfg);
    IntensityHistogram h;
    h.config = cfg;
    h.counts.assign(static_cast<std::size_t>(cfg.bin_count()), 0);
    const int last = cfg.bin_count() - 1;
    for (double v : values) {
        if (!std::isfinite(v)) throw std::invalid_argument("build_histogram: non-finite value");
        int idx = static_cast<int>(std::floor((v - cfg.range_low) / cfg.bin_size));
        if (idx < 0) idx = 0;
        if (idx > last) idx = last;
        ++h.counts[static_cast<std::size_t>(idx)];
    }
    return h;
}

/// Euclidean distance between two equally-configured histograms (raw counts).
inline double histogram_distance(const IntensityHistogram& a, const IntensityHistogram& b) {
    if (a.config.range_low != b.config.range_low || a.config.range_high != b.config.range_high ||
        a.config.bin_size != b.config.bin_size)
        throw std::invalid_argument("histogram_distance: mismatched configs");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.counts.size(); ++i) {
        const double d = static_cast<double>(a.counts[i] - b.counts[i]);
        acc += d * d;
    }
    return std::sqrt(acc);
}

/// Recovers the Type II permutation from recorded and simulated intensity
/// matrices. One histogram per row on each side; greedy nearest-histogram
/// assignment in ascending position order with lowest-index tie-break. When
/// the two sides have different sample counts the histograms are compared as
/// frequencies instead of raw counts (and the result says so).
inline CoaResult recover_permutation_coa(const Matrix& actual, const Matrix& exemplar,
                                         const HistogramConfig& cfg) {
    validate_histogram_config(cfg);
    if (actual.rows != exemplar.rows)
        throw std::invalid_argument("recover_permutation_coa: matrices disagree on M");
    if (actual.rows < 1 || actual.cols < 1 || exemplar.cols < 1)
        throw std::invalid_argument("recover_permutation_coa: empty intensity matrix");

    const int m_total = actual.rows;
    const bool as_frequency = actual.cols != exemplar.cols;
    const int bins = cfg.bin_count();

    auto row_feature = [&](const Matrix& mat, int r) {
        IntensityHistogram h = build_histogram(mat.row(r), cfg);
        std::vector<double> f(h.counts.size());
        const double scale = as_frequency ? 1.0 / static_cast<double>(mat.cols) : 1.0;
        for (std::size_t i = 0; i < f.size(); ++i) f[i] = static_cast<double>(h.counts[i]) * scale;
        return f;
    };

    std::vector<std::vector<double>> actual_h(static_cast<std::size_t>(m_total));
    std::vector<std::vector<double>> exemplar_h(static_cast<std::size_t>(m_total));
    parallel_for(static_cast<std::size_t>(m_total), 0, [&](std::size_t r) {
        actual_h[r] = row_feature(actual, static_cast<int>(r));
        exemplar_h[r] = row_feature(exemplar, static_cast<int>(r));
    });

    CoaResult out;
    out.frequency_normalized = as_frequency;
    out.distance_matrix = Matrix(m_total, m_total);
    for (int m = 0; m < m_total; ++m)
        for (int c = 0; c < m_total; ++c) {
            double acc = 0.0;
            for (int i = 0; i < bins; ++i) {
                const double d = actual_h[static_cast<std::size_t>(m)][static_cast<std::size_t>(i)] -
                                 exemplar_h[static_cast<std::size_t>(c)][static_cast<std::size_t>(i)];
                acc += d * d;
            }
            out.distance_matrix.at(m, c) = std::sqrt(acc);
        }

    out.permutation.order.assign(static_cast<std::size_t>(m_total), -1);
    std::vector<bool> taken(static_cast<std::size_t>(m_total), false);
    for (int m = 0; m < m_total; ++m) {
        int best = -1;
        double best_dist = std::numeric_limits<double>::infinity();
        for (int c = 0; c < m_total; ++c) {
            if (taken[static_cast<std::size_t>(c)]) continue;
            const double d = out.distance_matrix.at(m, c);
            if (d < best_dist) {
                best_dist = d;
                best = c;
            }
        }
        out.permutation.order[static_cast<std::size_t>(m)] = best;
        taken[static_cast<std::size_t>(best)] = true;
    }
    return out;
}

} // namespace spicrack::coa
