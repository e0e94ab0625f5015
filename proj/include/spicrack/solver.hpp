#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "spicrack/core.hpp"

namespace spicrack {

/// Generic dense least-squares problem min ||A x - b||^2. Rows are
/// measurements: A=K, b=C for decryption; A=plaintext matrix, b=per-pattern
/// intensity column for the known-plaintext attack.
struct LinearSystem {
    Matrix a;
    std::vector<double> b;
};

struct SolverConfig {
    int max_iterations = 2000;
    double residual_tolerance = 1e-8; // relative l2 residual ||Ax-b||/||b||
    double tv_weight = 0.0;           // lambda; 0 selects the pure least-squares path
};

/// Config used by TV-regularized decryption when the caller does not override.
inline SolverConfig default_tv_config() {
    SolverConfig cfg;
    cfg.tv_weight = 1e-2;
    return cfg;
}

struct CgdResult {
    std::vector<double> solution;
    int iterations = 0;
    double final_residual = 0.0; // relative, recomputed from a fresh A*x-b
};

namespace detail {

inline void check_finite(std::span<const double> v, const char* what) {
    for (double x : v)
        if (!std::isfinite(x)) throw std::invalid_argument(std::string(what) + ": non-finite entry");
}

/// Dot product with four fixed partial sums combined as ((s0+s1)+(s2+s3))
/// plus a sequential tail. The unroll breaks the serial FP dependency chain
/// so the compiler can vectorize. Every over-N reduction in the CG paths uses
/// this exact order (the lockstep multi-RHS kernel mirrors it lane by lane),
/// so single-system and blocked solves produce bit-identical results.
inline double dot(std::span<const double> a, std::span<const double> b) {
    const std::size_t n = a.size();
    double s0 = 0, s1 = 0, s2 = 0, s3 = 0;
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        s0 += a[i] * b[i];
        s1 += a[i + 1] * b[i + 1];
        s2 += a[i + 2] * b[i + 2];
        s3 += a[i + 3] * b[i + 3];
    }
    double acc = (s0 + s1) + (s2 + s3);
    for (; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

/// Plain sequential sum of squares; the order used for all over-rows norms.
inline double norm2_seq(std::span<const double> v) {
    double acc = 0.0;
    for (double x : v) acc += x * x;
    return std::sqrt(acc);
}

inline double norm2(std::span<const double> v) { return norm2_seq(v); }

/// out = A * x
inline void matvec(const Matrix& a, std::span<const double> x, std::span<double> out) {
    for (int r = 0; r < a.rows; ++r) {
        const double* row = a.data.data() + static_cast<std::size_t>(r) * a.cols;
        double acc = 0.0;
        for (int c = 0; c < a.cols; ++c) acc += row[c] * x[static_cast<std::size_t>(c)];
        out[static_cast<std::size_t>(r)] = acc;
    }
}

/// out = A^T * y, accumulated row-wise so the access pattern stays contiguous.
inline void matvec_transpose(const Matrix& a, std::span<const double> y, std::span<double> out) {
    std::fill(out.begin(), out.end(), 0.0);
    for (int r = 0; r < a.rows; ++r) {
        const double* row = a.data.data() + static_cast<std::size_t>(r) * a.cols;
        const double w = y[static_cast<std::size_t>(r)];
        if (w == 0.0) continue;
        for (int c = 0; c < a.cols; ++c) out[static_cast<std::size_t>(c)] += w * row[c];
    }
}

} // namespace detail

/// Lane width of the lockstep multi-RHS kernel; callers that batch systems
/// get the best throughput from chunks of this size.
inline constexpr int solver_lane_width() { return 16; }

/// Explicit transposed copy. The CG kernel evaluates A^T r as plain dot
/// products over rows of this copy, which keeps both half-iterations
/// streaming contiguously instead of scattering updates into an accumulator.
inline Matrix transposed(const Matrix& a) {
    Matrix t(a.cols, a.rows);
    for (int r = 0; r < a.rows; ++r) {
        const double* row = a.data.data() + static_cast<std::size_t>(r) * a.cols;
        for (int c = 0; c < a.cols; ++c) t.data[static_cast<std::size_t>(c) * a.rows + r] = row[c];
    }
    return t;
}

/// Results of solving one system for many right-hand sides.
struct CgdMultiResult {
    Matrix solutions; // one row per right-hand side
    std::vector<int> iterations;
    std::vector<double> final_residuals;
};

namespace detail {

// Systems built from the same matrix are iterated side by side so each pass
// over the matrix serves all lanes; passes are the dominant memory traffic,
// so this is what makes paper-scale key recovery run in minutes. Each lane
// performs exactly the arithmetic of a solo solve.
inline constexpr int kCgLanes = solver_lane_width();

// Column-tile width of the blocked matrix layout. One vector tile
// (kCgDotTile * kCgLanes doubles = 16 KB) stays L1-resident while every row's
// slice of the tile streams past it sequentially.
inline constexpr std::size_t kCgDotTile = 128;

/// A matrix stored twice in column-tile-blocked form (tile-major, row, then
/// column within tile): once as-is for A*p products and once transposed for
/// A^T*r products. Preparing it once lets many right-hand-side batches share
/// the layout work.
struct BlockedMatrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> tiles; // [tile][row][col-in-tile], fully contiguous

    void assign(const Matrix& m) {
        rows = m.rows;
        cols = m.cols;
        tiles.resize(static_cast<std::size_t>(rows) * cols);
        double* dst = tiles.data();
        for (std::size_t tile = 0; tile < static_cast<std::size_t>(cols); tile += kCgDotTile) {
            const std::size_t tile_end = std::min(static_cast<std::size_t>(cols), tile + kCgDotTile);
            for (int r = 0; r < rows; ++r) {
                const double* row = m.data.data() + static_cast<std::size_t>(r) * cols;
                for (std::size_t c = tile; c < tile_end; ++c) *dst++ = row[c];
            }
        }
    }
};

/// out_i[m] = <row i of mat, lane m of v> for every row. Lane-interleaved
/// storage: v[c*K+m] is element c of lane m. Within a tile each lane reduces
/// over four fixed partial sums, and tile subtotals accumulate in tile order,
/// so the summation order is a fixed property of the code (identical for solo
/// and blocked solves).
inline void lane_dot_rows(const BlockedMatrix& mat, const double* v_il, double* out_il) {
    constexpr int K = kCgLanes;
    const std::size_t len = static_cast<std::size_t>(mat.cols);
    const std::size_t rows = static_cast<std::size_t>(mat.rows);
    std::fill(out_il, out_il + rows * K, 0.0);
    const double* src = mat.tiles.data();
    for (std::size_t tile = 0; tile < len; tile += kCgDotTile) {
        const std::size_t tile_len = std::min(len - tile, kCgDotTile);
        const double* v_tile = v_il + tile * K;
        for (std::size_t i = 0; i < rows; ++i) {
            const double* row = src;
            src += tile_len;
            double s0[K] = {}, s1[K] = {}, s2[K] = {}, s3[K] = {};
            std::size_t c = 0;
            for (; c + 4 <= tile_len; c += 4) {
                const double a0 = row[c], a1 = row[c + 1], a2 = row[c + 2], a3 = row[c + 3];
                const double* v0 = v_tile + c * K;
                for (int m = 0; m < K; ++m) s0[m] += a0 * v0[m];
                for (int m = 0; m < K; ++m) s1[m] += a1 * v0[K + m];
                for (int m = 0; m < K; ++m) s2[m] += a2 * v0[2 * K + m];
                for (int m = 0; m < K; ++m) s3[m] += a3 * v0[3 * K + m];
            }
            double sub[K];
            for (int m = 0; m < K; ++m) sub[m] = (s0[m] + s1[m]) + (s2[m] + s3[m]);
            for (; c < tile_len; ++c) {
                const double av = row[c];
                const double* vc = v_tile + c * K;
                for (int m = 0; m < K; ++m) sub[m] += av * vc[m];
            }
            double* out = out_il + i * K;
            for (int m = 0; m < K; ++m) out[m] += sub[m];
        }
    }
}

/// Lockstep CGLS iteration on up to kCgLanes right-hand sides of one matrix.
/// `a_t` is the transposed copy used for the A^T r half-step. Converged or
/// degenerate lanes freeze (their step size pins to zero) while the rest keep
/// iterating.
inline void cgd_lockstep(const BlockedMatrix& a, const BlockedMatrix& a_t, const double* b_il, double* x_il,
                         int* iterations, double* final_residuals, const SolverConfig& cfg,
                         std::vector<std::vector<double>>* histories, int history_base, int lanes_used) {
    constexpr int K = kCgLanes;
    const std::size_t ns = static_cast<std::size_t>(a.cols);
    const std::size_t qs = static_cast<std::size_t>(a.rows);

    std::vector<double> p(ns * K), z(ns * K), r(qs * K), w(qs * K);
    std::fill(x_il, x_il + ns * K, 0.0);

    double b_norm2[K], z2[K], z2_next[K], rel[K], alpha[K], beta[K], wn2[K], rn2[K];
    bool active[K];

    for (int m = 0; m < K; ++m) {
        double acc = 0.0;
        for (std::size_t q = 0; q < qs; ++q) acc += b_il[q * K + m] * b_il[q * K + m];
        b_norm2[m] = acc;
        active[m] = m < lanes_used && acc > 0.0;
        iterations[m] = 0;
        rel[m] = active[m] ? 1.0 : 0.0;
        if (histories && m < lanes_used)
            (*histories)[static_cast<std::size_t>(history_base + m)].push_back(active[m] ? 1.0 : 0.0);
    }
    std::copy(b_il, b_il + qs * K, r.begin());

    auto lane_z_norm2 = [&] {
        double s0[K] = {}, s1[K] = {}, s2[K] = {}, s3[K] = {};
        std::size_t c = 0;
        for (; c + 4 <= ns; c += 4) {
            const double* v0 = &z[c * K];
            for (int m = 0; m < K; ++m) s0[m] += v0[m] * v0[m];
            for (int m = 0; m < K; ++m) s1[m] += v0[K + m] * v0[K + m];
            for (int m = 0; m < K; ++m) s2[m] += v0[2 * K + m] * v0[2 * K + m];
            for (int m = 0; m < K; ++m) s3[m] += v0[3 * K + m] * v0[3 * K + m];
        }
        for (int m = 0; m < K; ++m) z2_next[m] = (s0[m] + s1[m]) + (s2[m] + s3[m]);
        for (; c < ns; ++c)
            for (int m = 0; m < K; ++m) z2_next[m] += z[c * K + m] * z[c * K + m];
    };

    lane_dot_rows(a_t, r.data(), z.data()); // z = A^T r
    p = z;
    lane_z_norm2();
    for (int m = 0; m < K; ++m) z2[m] = z2_next[m];

    bool any_active = false;
    for (bool f : active) any_active |= f;

    int iter = 0;
    while (any_active && iter < cfg.max_iterations) {
        lane_dot_rows(a, p.data(), w.data()); // w = A p
        for (int m = 0; m < K; ++m) wn2[m] = 0.0;
        for (std::size_t q = 0; q < qs; ++q) {
            const double* wq = &w[q * K];
            for (int m = 0; m < K; ++m) wn2[m] += wq[m] * wq[m];
        }

        for (int m = 0; m < K; ++m) {
            if (active[m] && (z2[m] == 0.0 || wn2[m] == 0.0)) active[m] = false; // LS optimum reached
            alpha[m] = active[m] ? z2[m] / wn2[m] : 0.0;
        }

        for (std::size_t c = 0; c < ns; ++c) {
            double* xc = x_il + c * K;
            const double* pc = &p[c * K];
            for (int m = 0; m < K; ++m) xc[m] += alpha[m] * pc[m];
        }
        for (std::size_t q = 0; q < qs; ++q) {
            double* rq = &r[q * K];
            const double* wq = &w[q * K];
            for (int m = 0; m < K; ++m) rq[m] -= alpha[m] * wq[m];
        }

        lane_dot_rows(a_t, r.data(), z.data()); // z = A^T r, fresh
        lane_z_norm2();
        for (int m = 0; m < K; ++m) {
            beta[m] = active[m] && z2[m] > 0.0 ? z2_next[m] / z2[m] : 0.0;
            z2[m] = z2_next[m];
        }
        for (std::size_t c = 0; c < ns; ++c) {
            double* pc = &p[c * K];
            const double* zc = &z[c * K];
            for (int m = 0; m < K; ++m) pc[m] = active[m] ? zc[m] + beta[m] * pc[m] : pc[m];
        }

        for (int m = 0; m < K; ++m) rn2[m] = 0.0;
        for (std::size_t q = 0; q < qs; ++q) {
            const double* rq = &r[q * K];
            for (int m = 0; m < K; ++m) rn2[m] += rq[m] * rq[m];
        }

        ++iter;
        any_active = false;
        for (int m = 0; m < K; ++m) {
            if (!active[m]) continue;
            rel[m] = std::sqrt(rn2[m]) / std::sqrt(b_norm2[m]);
            iterations[m] = iter;
            if (histories && m < lanes_used)
                (*histories)[static_cast<std::size_t>(history_base + m)].push_back(rel[m]);
            if (rel[m] <= cfg.residual_tolerance) active[m] = false;
            any_active |= active[m];
        }
    }

    // honest exit report: recompute ||A x - b|| / ||b|| from scratch
    lane_dot_rows(a, x_il, w.data());
    for (int m = 0; m < K; ++m) rn2[m] = 0.0;
    for (std::size_t q = 0; q < qs; ++q) {
        const double* wq = &w[q * K];
        for (int m = 0; m < K; ++m) {
            const double d = wq[m] - b_il[q * K + m];
            rn2[m] += d * d;
        }
    }
    for (int m = 0; m < K; ++m)
        final_residuals[m] = b_norm2[m] > 0.0 ? std::sqrt(rn2[m]) / std::sqrt(b_norm2[m]) : 0.0;
}

} // namespace detail

/// A least-squares system matrix prepared for repeated batched solves: the
/// matrix and its transpose in the blocked layout the kernel streams.
struct CgdSystem {
    int rows = 0;
    int cols = 0;
    detail::BlockedMatrix a;
    detail::BlockedMatrix a_t;
};

inline CgdSystem prepare_cgd_system(const Matrix& a) {
    if (a.rows < 1 || a.cols < 1) throw std::invalid_argument("cgd_solve: empty matrix");
    detail::check_finite({a.data.data(), a.data.size()}, "cgd_solve: matrix");
    CgdSystem sys;
    sys.rows = a.rows;
    sys.cols = a.cols;
    sys.a.assign(a);
    sys.a_t.assign(transposed(a));
    return sys;
}

/// CGNR (conjugate gradients on the normal equations A^T A x = A^T b) for
/// many right-hand sides sharing one matrix; column t of `rhs_columns` is
/// system t. A^T A is never formed: each iteration multiplies by A and by its
/// stored transpose only. Starts every system from the zero vector, so
/// results are deterministic and identical to solving each system alone.
/// Stops a system when its relative residual ||Ax-b||/||b|| reaches
/// cfg.residual_tolerance or at the iteration cap. A zero right-hand side
/// yields the zero solution immediately.
inline CgdMultiResult cgd_solve_multi(const CgdSystem& sys, const Matrix& rhs_columns, const SolverConfig& cfg,
                                      std::vector<std::vector<double>>* residual_histories = nullptr) {
    if (rhs_columns.rows != sys.rows || rhs_columns.cols < 1)
        throw std::invalid_argument("cgd_solve: system shape mismatch");
    if (cfg.max_iterations < 1 || !(cfg.residual_tolerance > 0.0))
        throw std::invalid_argument("cgd_solve: bad config");
    if (cfg.tv_weight != 0.0)
        throw std::invalid_argument("cgd_solve: pure least-squares path requires tv_weight == 0");
    detail::check_finite({rhs_columns.data.data(), rhs_columns.data.size()}, "cgd_solve: rhs");

    constexpr int K = detail::kCgLanes;
    const int t_total = rhs_columns.cols;
    const std::size_t ns = static_cast<std::size_t>(sys.cols);
    const std::size_t qs = static_cast<std::size_t>(sys.rows);

    CgdMultiResult out;
    out.solutions = Matrix(t_total, sys.cols);
    out.iterations.assign(static_cast<std::size_t>(t_total), 0);
    out.final_residuals.assign(static_cast<std::size_t>(t_total), 0.0);
    if (residual_histories) residual_histories->assign(static_cast<std::size_t>(t_total), {});

    std::vector<double> b_il(qs * K), x_il(ns * K);
    for (int base = 0; base < t_total; base += K) {
        const int lanes = std::min(K, t_total - base);
        for (std::size_t q = 0; q < qs; ++q)
            for (int m = 0; m < K; ++m)
                b_il[q * K + m] = m < lanes ? rhs_columns.at(static_cast<int>(q), base + m) : 0.0;
        int iters[K];
        double resids[K];
        detail::cgd_lockstep(sys.a, sys.a_t, b_il.data(), x_il.data(), iters, resids, cfg, residual_histories,
                             base, lanes);
        for (int m = 0; m < lanes; ++m) {
            double* dst = out.solutions.row(base + m).data();
            for (std::size_t c = 0; c < ns; ++c) dst[c] = x_il[c * K + m];
            out.iterations[static_cast<std::size_t>(base + m)] = iters[m];
            out.final_residuals[static_cast<std::size_t>(base + m)] = resids[m];
        }
    }
    return out;
}

inline CgdMultiResult cgd_solve_multi(const Matrix& a, const Matrix& rhs_columns, const SolverConfig& cfg,
                                      std::vector<std::vector<double>>* residual_histories = nullptr) {
    return cgd_solve_multi(prepare_cgd_system(a), rhs_columns, cfg, residual_histories);
}

/// Single right-hand side convenience wrapper; runs the same kernel, so the
/// result is bit-identical to the corresponding lane of a blocked solve.
inline CgdResult cgd_solve(const Matrix& a, std::span<const double> b, const SolverConfig& cfg,
                           std::vector<double>* residual_history = nullptr) {
    if (b.size() != static_cast<std::size_t>(a.rows))
        throw std::invalid_argument("cgd_solve: system shape mismatch");
    Matrix rhs(a.rows, 1);
    std::copy(b.begin(), b.end(), rhs.data.begin());
    std::vector<std::vector<double>> hist;
    CgdMultiResult multi = cgd_solve_multi(a, rhs, cfg, residual_history ? &hist : nullptr);
    CgdResult res;
    res.solution.assign(multi.solutions.row(0).begin(), multi.solutions.row(0).end());
    res.iterations = multi.iterations[0];
    res.final_residual = multi.final_residuals[0];
    if (residual_history) *residual_history = std::move(hist[0]);
    return res;
}

inline CgdResult cgd_solve(const LinearSystem& sys, const SolverConfig& cfg,
                           std::vector<double>* residual_history = nullptr) {
    return cgd_solve(sys.a, sys.b, cfg, residual_history);
}

/// Min-max normalize to [0,1], then threshold at 0.5 (values >= 0.5 map to 1).
/// A constant vector normalizes to all zeros. Already-binary vectors with both
/// values present are fixed points.
inline std::vector<std::uint8_t> normalize_binarize(std::span<const double> v) {
    if (v.empty()) throw std::invalid_argument("normalize_binarize: empty input");
    detail::check_finite(v, "normalize_binarize");
    double lo = v[0], hi = v[0];
    for (double x : v) {
        lo = std::min(lo, x);
        hi = std::max(hi, x);
    }
    std::vector<std::uint8_t> out(v.size(), 0);
    if (hi == lo) return out;
    const double span = hi - lo;
    for (std::size_t i = 0; i < v.size(); ++i)
        out[i] = (v[i] - lo) / span >= 0.5 ? 1 : 0;
    return out;
}

// ---------------------------------------------------------------------------
// Total-variation regularized reconstruction.
//
// Objective: f(O) = ||K O - C||^2 + lambda * sum_edges sqrt(d^2 + eps^2)
// over horizontal and vertical neighbor differences d on the 2-D grid
// (anisotropic TV with an eps-smoothed absolute value, so f is differentiable
// everywhere). Minimized by conjugate-direction descent (Polak-Ribiere+ with
// restarts) with a backtracking-halving line search; plain steepest descent
// stalls on the near-singular normal matrix of a square random binary key.
// ---------------------------------------------------------------------------

inline constexpr double kTvEpsilon = 1e-6;

/// Smoothed anisotropic TV of a width x height image.
inline double tv_value(std::span<const double> image, int width, int height) {
    double acc = 0.0;
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * width + x;
            if (x + 1 < width) {
                const double d = image[i] - image[i + 1];
                acc += std::sqrt(d * d + kTvEpsilon * kTvEpsilon);
            }
            if (y + 1 < height) {
                const double d = image[i] - image[i + static_cast<std::size_t>(width)];
                acc += std::sqrt(d * d + kTvEpsilon * kTvEpsilon);
            }
        }
    return acc;
}

/// Adds lambda * grad TV(image) into grad.
inline void tv_add_gradient(std::span<const double> image, int width, int height, double lambda,
                            std::span<double> grad) {
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * width + x;
            if (x + 1 < width) {
                const double d = image[i] - image[i + 1];
                const double s = lambda * d / std::sqrt(d * d + kTvEpsilon * kTvEpsilon);
                grad[i] += s;
                grad[i + 1] -= s;
            }
            if (y + 1 < height) {
                const std::size_t j = i + static_cast<std::size_t>(width);
                const double d = image[i] - image[j];
                const double s = lambda * d / std::sqrt(d * d + kTvEpsilon * kTvEpsilon);
                grad[i] += s;
                grad[j] -= s;
            }
        }
}

/// Full objective at `image` (flattened to the key's pattern shape).
inline double tv_objective(const PatternKey& key, const Ciphertext& cipher, double tv_weight,
                           std::span<const double> image) {
    Matrix a(key.pattern_count, key.pixels_per_pattern);
    for (std::size_t i = 0; i < key.entries.size(); ++i) a.data[i] = key.entries[i];
    std::vector<double> kx(static_cast<std::size_t>(key.pattern_count));
    detail::matvec(a, image, kx);
    double acc = 0.0;
    for (std::size_t i = 0; i < kx.size(); ++i) {
        const double d = kx[i] - cipher.values[i];
        acc += d * d;
    }
    return acc + tv_weight * tv_value(image, key.width, key.height);
}

/// Analytic gradient of tv_objective, for optimization and for checking
/// against finite differences.
inline std::vector<double> tv_gradient(const PatternKey& key, const Ciphertext& cipher, double tv_weight,
                                       std::span<const double> image) {
    Matrix a(key.pattern_count, key.pixels_per_pattern);
    for (std::size_t i = 0; i < key.entries.size(); ++i) a.data[i] = key.entries[i];
    std::vector<double> resid(static_cast<std::size_t>(key.pattern_count));
    detail::matvec(a, image, resid);
    for (std::size_t i = 0; i < resid.size(); ++i) resid[i] -= cipher.values[i];
    std::vector<double> grad(image.size(), 0.0);
    detail::matvec_transpose(a, resid, grad);
    for (auto& g : grad) g *= 2.0;
    tv_add_gradient(image, key.width, key.height, tv_weight, grad);
    return grad;
}

/// Decrypts/reconstructs an image from its intensity sequence and a key by
/// minimizing the TV-regularized fit. Deterministic (zero initialization);
/// the result is clamped to [0,1].
inline ObjectImage tv_reconstruct(const PatternKey& key, const Ciphertext& cipher, const SolverConfig& cfg) {
    if (cipher.values.size() != static_cast<std::size_t>(key.pattern_count))
        throw std::invalid_argument("tv_reconstruct: ciphertext length does not match key M");
    if (!(cfg.tv_weight > 0.0)) throw std::invalid_argument("tv_reconstruct: tv_weight must be positive");
    if (cfg.max_iterations < 1 || !(cfg.residual_tolerance > 0.0))
        throw std::invalid_argument("tv_reconstruct: bad config");
    detail::check_finite(cipher.values, "tv_reconstruct: ciphertext");

    const int width = key.width, height = key.height;
    const std::size_t n = static_cast<std::size_t>(key.pixels_per_pattern);
    const std::size_t m = static_cast<std::size_t>(key.pattern_count);
    const double lambda = cfg.tv_weight;

    Matrix a(key.pattern_count, key.pixels_per_pattern);
    for (std::size_t i = 0; i < key.entries.size(); ++i) a.data[i] = key.entries[i];

    std::vector<double> x(n, 0.0);
    std::vector<double> resid(m); // K*x - C, maintained incrementally
    for (std::size_t i = 0; i < m; ++i) resid[i] = -cipher.values[i];

    auto objective_at = [&](std::span<const double> img, std::span<const double> res) {
        double acc = 0.0;
        for (double r : res) acc += r * r;
        return acc + lambda * tv_value(img, width, height);
    };

    std::vector<double> grad(n), grad_prev(n), dir(n), q(m);
    std::vector<double> x_trial(n), resid_trial(m);
    double f = objective_at(x, resid);
    double g0_norm = -1.0;
    double alpha_prev = 1.0;

    for (int iter = 0; iter < cfg.max_iterations; ++iter) {
        detail::matvec_transpose(a, resid, grad);
        for (auto& g : grad) g *= 2.0;
        tv_add_gradient(x, width, height, lambda, grad);
        const double g_norm = detail::norm2(grad);
        if (g0_norm < 0.0) g0_norm = g_norm;
        if (g_norm <= cfg.residual_tolerance * std::max(1.0, g0_norm)) break;

        double beta = 0.0;
        if (iter > 0) {
            const double gp2 = detail::dot(grad_prev, grad_prev);
            if (gp2 > 0.0)
                beta = std::max(0.0, (detail::dot(grad, grad) - detail::dot(grad, grad_prev)) / gp2);
        }
        if (iter == 0) {
            for (std::size_t i = 0; i < n; ++i) dir[i] = -grad[i];
        } else {
            for (std::size_t i = 0; i < n; ++i) dir[i] = -grad[i] + beta * dir[i];
        }
        double slope = detail::dot(grad, dir);
        if (slope >= 0.0) { // not a descent direction: restart on steepest descent
            for (std::size_t i = 0; i < n; ++i) dir[i] = -grad[i];
            slope = -detail::dot(grad, grad);
        }

        detail::matvec(a, dir, q);
        const double q_norm2 = detail::dot(q, q);
        // exact minimizer of the quadratic data term along dir seeds the search
        double alpha = q_norm2 > 0.0 ? -slope / (2.0 * q_norm2) : alpha_prev;
        if (!(alpha > 0.0) || !std::isfinite(alpha)) alpha = alpha_prev;

        bool accepted = false;
        for (int halving = 0; halving < 60; ++halving) {
            for (std::size_t i = 0; i < n; ++i) x_trial[i] = x[i] + alpha * dir[i];
            for (std::size_t i = 0; i < m; ++i) resid_trial[i] = resid[i] + alpha * q[i];
            const double f_trial = objective_at(x_trial, resid_trial);
            if (f_trial <= f + 1e-4 * alpha * slope) {
                x.swap(x_trial);
                resid.swap(resid_trial);
                f = f_trial;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if (!accepted) break; // no further progress at double precision
        alpha_prev = alpha;
        grad_prev = grad;
    }

    ObjectImage out;
    out.width = width;
    out.height = height;
    out.pixels.resize(n);
    for (std::size_t i = 0; i < n; ++i) out.pixels[i] = std::clamp(x[i], 0.0, 1.0);
    return out;
}

} // namespace spicrack
