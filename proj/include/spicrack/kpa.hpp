#pragma once

#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "spicrack/core.hpp"
#include "spicrack/parallel.hpp"
#include "spicrack/solver.hpp"

namespace spicrack::kpa {

/// Outcome of a key-recovery run: the binarized key plus the relative solver
/// residual left behind for each pattern.
struct KpaResult {
    PatternKey recovered_key;
    std::vector<double> per_pattern_residuals;
    SolverConfig config_echo;
};

/// Real-valued stage of the same recovery, before binarization. Row m is the
/// least-squares estimate of pattern m; at small Q it is only a projection of
/// the true pattern, and Type II matching works on it directly because the
/// magnitudes carry confidence that binarization throws away.
struct KpaValues {
    Matrix values; // M x N
    std::vector<double> per_pattern_residuals;
    SolverConfig config_echo;
    int width = 0;
    int height = 0;
};

/// Stacks the corpus plaintexts into the Q x N system matrix whose rows take
/// the place of "illumination patterns" in the role-interchanged model.
inline Matrix corpus_matrix(const PlainCipherCorpus& corpus) {
    validate_corpus(corpus);
    const int q = corpus.pair_count();
    const int n = corpus.images.front().pixel_count();
    Matrix a(q, n);
    for (int i = 0; i < q; ++i) {
        const auto& px = corpus.images[static_cast<std::size_t>(i)].pixels;
        std::copy(px.begin(), px.end(), a.data.begin() + static_cast<std::size_t>(i) * n);
    }
    return a;
}

namespace detail {

/// Real-valued recovery of pattern m against a prebuilt corpus matrix:
/// solves plaintexts * K_m = [C_1(m) ... C_Q(m)] by CGNR.
inline CgdResult recover_pattern_raw(const Matrix& plaintexts, const std::vector<Ciphertext>& ciphertexts,
                                     int m, const SolverConfig& cfg) {
    std::vector<double> rhs(static_cast<std::size_t>(plaintexts.rows));
    for (int q = 0; q < plaintexts.rows; ++q)
        rhs[static_cast<std::size_t>(q)] = ciphertexts[static_cast<std::size_t>(q)].values[static_cast<std::size_t>(m)];
    return cgd_solve(plaintexts, rhs, cfg);
}

} // namespace detail

/// Real-valued estimate of pattern m (0-based), before binarization. Useful
/// for inspecting how much signal survives at small Q.
inline std::vector<double> recover_pattern_values(const PlainCipherCorpus& corpus, int m,
                                                  const SolverConfig& cfg) {
    validate_corpus(corpus);
    const int pattern_total = static_cast<int>(corpus.ciphertexts.front().values.size());
    if (m < 0 || m >= pattern_total) throw std::out_of_range("recover_pattern: pattern index out of range");
    const Matrix a = corpus_matrix(corpus);
    return detail::recover_pattern_raw(a, corpus.ciphertexts, m, cfg).solution;
}

/// Recovers pattern m as a binary vector: CGNR solve, then normalize+binarize.
inline std::vector<std::uint8_t> recover_pattern(const PlainCipherCorpus& corpus, int m,
                                                 const SolverConfig& cfg) {
    return normalize_binarize(recover_pattern_values(corpus, m, cfg));
}

/// Recovers all M patterns as real-valued vectors. Patterns are processed in
/// lane-width chunks of the lockstep solver and chunks fan out across
/// threads; chunk boundaries are fixed, so results do not depend on the
/// thread count and each row matches a standalone solve exactly.
inline KpaValues recover_key_values(const PlainCipherCorpus& corpus, const SolverConfig& cfg, int threads = 0) {
    validate_corpus(corpus);
    const Matrix a = corpus_matrix(corpus);
    const int pattern_total = static_cast<int>(corpus.ciphertexts.front().values.size());
    const int q = a.rows;

    KpaValues out;
    out.config_echo = cfg;
    out.width = corpus.images.front().width;
    out.height = corpus.images.front().height;
    out.values = Matrix(pattern_total, a.cols);
    out.per_pattern_residuals.resize(static_cast<std::size_t>(pattern_total));

    const CgdSystem sys = prepare_cgd_system(a);
    const int chunk = solver_lane_width();
    const int chunk_count = (pattern_total + chunk - 1) / chunk;
    parallel_for(static_cast<std::size_t>(chunk_count), threads, [&](std::size_t ci) {
        const int base = static_cast<int>(ci) * chunk;
        const int lanes = std::min(chunk, pattern_total - base);
        Matrix rhs(q, lanes);
        for (int row = 0; row < q; ++row) {
            const auto& values = corpus.ciphertexts[static_cast<std::size_t>(row)].values;
            for (int m = 0; m < lanes; ++m) rhs.at(row, m) = values[static_cast<std::size_t>(base + m)];
        }
        CgdMultiResult solved = cgd_solve_multi(sys, rhs, cfg);
        for (int m = 0; m < lanes; ++m) {
            auto src = solved.solutions.row(m);
            std::copy(src.begin(), src.end(), out.values.row(base + m).begin());
            out.per_pattern_residuals[static_cast<std::size_t>(base + m)] =
                solved.final_residuals[static_cast<std::size_t>(m)];
        }
    });
    return out;
}

/// Cracks a Type I system: real-valued recovery of every pattern followed by
/// normalize+binarize per row.
inline KpaResult recover_key_type1(const PlainCipherCorpus& corpus, const SolverConfig& cfg, int threads = 0) {
    KpaValues vals = recover_key_values(corpus, cfg, threads);
    const int n = vals.values.cols;
    KpaResult out;
    out.config_echo = vals.config_echo;
    out.per_pattern_residuals = std::move(vals.per_pattern_residuals);
    out.recovered_key.pattern_count = vals.values.rows;
    out.recovered_key.pixels_per_pattern = n;
    out.recovered_key.width = vals.width;
    out.recovered_key.height = vals.height;
    out.recovered_key.entries.resize(static_cast<std::size_t>(vals.values.rows) * n);
    for (int m = 0; m < vals.values.rows; ++m) {
        std::vector<std::uint8_t> bits = normalize_binarize(vals.values.row(m));
        std::copy(bits.begin(), bits.end(),
                  out.recovered_key.entries.begin() + static_cast<std::size_t>(m) * n);
    }
    return out;
}

/// Hamming distance between one recovered row and one original row.
inline int pattern_distance(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b) {
    int d = 0;
    for (std::size_t i = 0; i < a.size(); ++i) d += a[i] != b[i];
    return d;
}

/// Type II matching: greedily maps each recovered pattern (in ascending index
/// order) to the closest original pattern not claimed by an earlier match,
/// ties broken toward the lowest original index. Always returns a bijection.
inline PermutationKey match_patterns_type2(const PatternKey& recovered, const PatternKey& originals) {
    if (recovered.pattern_count != originals.pattern_count ||
        recovered.pixels_per_pattern != originals.pixels_per_pattern)
        throw std::invalid_argument("match_patterns_type2: key dimensions differ");
    const int m_total = recovered.pattern_count;
    PermutationKey perm;
    perm.order.assign(static_cast<std::size_t>(m_total), -1);
    std::vector<bool> taken(static_cast<std::size_t>(m_total), false);
    for (int m = 0; m < m_total; ++m) {
        int best = -1;
        int best_dist = std::numeric_limits<int>::max();
        for (int cand = 0; cand < m_total; ++cand) {
            if (taken[static_cast<std::size_t>(cand)]) continue;
            const int d = pattern_distance(recovered.row(m), originals.row(cand));
            if (d < best_dist) {
                best_dist = d;
                best = cand;
            }
        }
        perm.order[static_cast<std::size_t>(m)] = best;
        taken[static_cast<std::size_t>(best)] = true;
    }
    return perm;
}

/// Type II matching on the real-valued recovery: greedy assignment (ascending
/// position, lowest-index tie-break) by normalized correlation between each
/// recovered row and the original patterns. At the tiny Q a Type II attack
/// uses, the recovered rows are faint projections of the true patterns;
/// keeping their magnitudes instead of hard bits is what makes the full
/// permutation recoverable, so the attack pipeline matches here and
/// match_patterns_type2 remains the binary-key variant.
inline PermutationKey match_patterns_real(const Matrix& recovered_values, const PatternKey& originals) {
    if (recovered_values.rows != originals.pattern_count ||
        recovered_values.cols != originals.pixels_per_pattern)
        throw std::invalid_argument("match_patterns_real: dimensions differ");
    const int m_total = originals.pattern_count;
    const int n = originals.pixels_per_pattern;

    auto standardize = [n](std::vector<double>& v) {
        double mean = 0.0;
        for (double x : v) mean += x;
        mean /= static_cast<double>(n);
        double ss = 0.0;
        for (double& x : v) {
            x -= mean;
            ss += x * x;
        }
        if (ss > 0.0) {
            const double inv = 1.0 / std::sqrt(ss);
            for (double& x : v) x *= inv;
        }
    };

    std::vector<std::vector<double>> rec(static_cast<std::size_t>(m_total)),
        orig(static_cast<std::size_t>(m_total));
    for (int i = 0; i < m_total; ++i) {
        rec[static_cast<std::size_t>(i)].assign(recovered_values.row(i).begin(), recovered_values.row(i).end());
        standardize(rec[static_cast<std::size_t>(i)]);
        auto& o = orig[static_cast<std::size_t>(i)];
        o.resize(static_cast<std::size_t>(n));
        auto bits = originals.row(i);
        for (int c = 0; c < n; ++c) o[static_cast<std::size_t>(c)] = bits[static_cast<std::size_t>(c)];
        standardize(o);
    }

    PermutationKey perm;
    perm.order.assign(static_cast<std::size_t>(m_total), -1);
    std::vector<bool> taken(static_cast<std::size_t>(m_total), false);
    for (int i = 0; i < m_total; ++i) {
        int best = -1;
        double best_dist = std::numeric_limits<double>::infinity();
        for (int cand = 0; cand < m_total; ++cand) {
            if (taken[static_cast<std::size_t>(cand)]) continue;
            double corr = 0.0;
            const auto& r = rec[static_cast<std::size_t>(i)];
            const auto& o = orig[static_cast<std::size_t>(cand)];
            for (int c = 0; c < n; ++c) corr += r[static_cast<std::size_t>(c)] * o[static_cast<std::size_t>(c)];
            const double d = 1.0 - corr;
            if (d < best_dist) {
                best_dist = d;
                best = cand;
            }
        }
        perm.order[static_cast<std::size_t>(i)] = best;
        taken[static_cast<std::size_t>(best)] = true;
    }
    return perm;
}

/// Full Type II attack result: the recovered permutation plus the key it
/// implies (originals rearranged by that permutation).
struct Type2Result {
    PermutationKey permutation;
    PatternKey rearranged_key;
    std::vector<double> per_pattern_residuals;
    SolverConfig config_echo;
};

/// Cracks a Type II system from plaintext/ciphertext pairs and the published
/// original patterns: real-valued per-pattern recovery, then correlation
/// matching.
inline Type2Result recover_key_type2(const PlainCipherCorpus& corpus, const PatternKey& originals,
                                     const SolverConfig& cfg, int threads = 0) {
    KpaValues vals = recover_key_values(corpus, cfg, threads);
    if (vals.values.rows != originals.pattern_count || vals.values.cols != originals.pixels_per_pattern)
        throw std::invalid_argument("recover_key_type2: corpus does not match original key dimensions");
    Type2Result out;
    out.permutation = match_patterns_real(vals.values, originals);
    out.rearranged_key = permute_key(originals, out.permutation);
    out.per_pattern_residuals = std::move(vals.per_pattern_residuals);
    out.config_echo = cfg;
    return out;
}

} // namespace spicrack::kpa
