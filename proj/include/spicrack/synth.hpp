#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "spicrack/core.hpp"
#include "spicrack/prng.hpp"

namespace spicrack::synth {

// ---------------------------------------------------------------------------
// Locally smooth random images: a weighted sum of unit-variance noise bands
// at blur scales 4, 2, 1 and 0 pixels, min-max normalized to span [0,1]
// exactly. The decaying band weights give the gradual, photograph-like
// amplitude spectrum that sets the conditioning of the plaintext matrices
// these images form; the small white-noise floor keeps every spatial
// frequency represented.
// ---------------------------------------------------------------------------

inline constexpr double kSmoothBandSigma[3] = {4.0, 2.0, 1.0};
inline constexpr double kSmoothBandWeight[4] = {1.0, 0.3, 0.05, 0.002}; // coarse..fine, then white floor

namespace detail {

/// Separable Gaussian blur with reflected boundaries.
inline void gaussian_blur(std::vector<double>& img, int width, int height, double sigma) {
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        const double v = std::exp(-0.5 * (i * i) / (sigma * sigma));
        kernel[static_cast<std::size_t>(i + radius)] = v;
        sum += v;
    }
    for (auto& k : kernel) k /= sum;

    auto reflect = [](int i, int n) {
        while (i < 0 || i >= n) { // kernels wider than the image bounce repeatedly
            if (i < 0) i = -i - 1;
            if (i >= n) i = 2 * n - 1 - i;
        }
        return i;
    };

    std::vector<double> tmp(img.size());
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            double acc = 0.0;
            for (int k = -radius; k <= radius; ++k)
                acc += kernel[static_cast<std::size_t>(k + radius)] *
                       img[static_cast<std::size_t>(y) * width + reflect(x + k, width)];
            tmp[static_cast<std::size_t>(y) * width + x] = acc;
        }
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            double acc = 0.0;
            for (int k = -radius; k <= radius; ++k)
                acc += kernel[static_cast<std::size_t>(k + radius)] *
                       tmp[static_cast<std::size_t>(reflect(y + k, height)) * width + x];
            img[static_cast<std::size_t>(y) * width + x] = acc;
        }
}

} // namespace detail

/// Deterministic locally smooth random images. Image i depends only on
/// (seed, i), so prefixes of a larger corpus reproduce a smaller one.
inline std::vector<ObjectImage> generate_smooth_images(int count, int width, int height, std::uint64_t seed) {
    if (count < 1 || width < 1 || height < 1)
        throw std::invalid_argument("generate_smooth_images: count and dimensions must be positive");
    std::vector<ObjectImage> out(static_cast<std::size_t>(count));
    const std::size_t n = static_cast<std::size_t>(width) * height;
    for (int i = 0; i < count; ++i) {
        SplitMix64 rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
        ObjectImage& img = out[static_cast<std::size_t>(i)];
        img.width = width;
        img.height = height;
        img.pixels.assign(n, 0.0);
        std::vector<double> band(n);
        for (int b = 0; b < 4; ++b) {
            for (auto& v : band) v = rng.next_double() - 0.5;
            if (b < 3) detail::gaussian_blur(band, width, height, kSmoothBandSigma[b]);
            double mean = 0.0, var = 0.0;
            for (double v : band) mean += v;
            mean /= static_cast<double>(n);
            for (double v : band) var += (v - mean) * (v - mean);
            var /= static_cast<double>(n);
            if (var == 0.0) continue; // single-pixel image: band carries nothing
            const double scale = kSmoothBandWeight[b] / std::sqrt(var);
            for (std::size_t p = 0; p < n; ++p) img.pixels[p] += scale * (band[p] - mean);
        }
        double lo = img.pixels[0], hi = img.pixels[0];
        for (double v : img.pixels) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        if (hi > lo) {
            for (auto& v : img.pixels) v = (v - lo) / (hi - lo);
        } else {
            std::fill(img.pixels.begin(), img.pixels.end(), 0.0);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Synthetic handwritten digits: stroke skeletons rasterized at 28x28 with
// randomized affine pose, stroke thickness, and ink level. A self-contained
// stand-in for handwritten-digit corpora with similar ink statistics (mean
// pixel value ~0.13, strong per-class ink variation); real IDX files can be
// used instead wherever these are accepted.
// ---------------------------------------------------------------------------

namespace detail {

using Stroke = std::vector<std::array<double, 2>>; // polyline in unit glyph coords, y down

inline std::vector<Stroke> glyph_strokes(int digit) {
    auto ellipse = [](double cx, double cy, double rx, double ry) {
        Stroke s;
        const int steps = 14;
        for (int i = 0; i <= steps; ++i) {
            const double t = 2.0 * 3.14159265358979323846 * i / steps;
            s.push_back({cx + rx * std::sin(t), cy - ry * std::cos(t)});
        }
        return s;
    };
    switch (digit) {
        case 0: return {ellipse(0.5, 0.5, 0.30, 0.40)};
        case 1: return {{{0.34, 0.26}, {0.54, 0.10}, {0.54, 0.90}}};
        case 2:
            return {{{0.22, 0.30}, {0.30, 0.14}, {0.50, 0.09}, {0.70, 0.16}, {0.76, 0.33},
                     {0.62, 0.55}, {0.42, 0.72}, {0.24, 0.88}, {0.78, 0.88}}};
        case 3:
            return {{{0.26, 0.18}, {0.46, 0.09}, {0.66, 0.16}, {0.71, 0.31}, {0.58, 0.45}, {0.44, 0.49},
                     {0.62, 0.54}, {0.74, 0.68}, {0.64, 0.85}, {0.44, 0.92}, {0.24, 0.84}}};
        case 4: return {{{0.62, 0.10}, {0.24, 0.62}, {0.80, 0.62}}, {{0.64, 0.34}, {0.64, 0.92}}};
        case 5:
            return {{{0.72, 0.11}, {0.31, 0.11}, {0.27, 0.46}, {0.48, 0.40}, {0.68, 0.48},
                     {0.73, 0.66}, {0.61, 0.85}, {0.38, 0.90}, {0.23, 0.79}}};
        case 6:
            return {{{0.64, 0.10}, {0.44, 0.28}, {0.32, 0.52}, {0.30, 0.70}, {0.40, 0.87}, {0.60, 0.88},
                     {0.71, 0.73}, {0.66, 0.57}, {0.48, 0.52}, {0.33, 0.60}}};
        case 7: return {{{0.23, 0.12}, {0.77, 0.12}, {0.47, 0.90}}};
        case 8: return {ellipse(0.50, 0.30, 0.21, 0.20), ellipse(0.50, 0.69, 0.25, 0.22)};
        case 9:
            return {ellipse(0.50, 0.32, 0.21, 0.21), {{0.71, 0.36}, {0.67, 0.64}, {0.54, 0.90}}};
        default: throw std::invalid_argument("glyph_strokes: digit must be 0..9");
    }
}

inline double segment_distance(double px, double py, const std::array<double, 2>& a,
                               const std::array<double, 2>& b) {
    const double vx = b[0] - a[0], vy = b[1] - a[1];
    const double wx = px - a[0], wy = py - a[1];
    const double len2 = vx * vx + vy * vy;
    double t = len2 > 0.0 ? (wx * vx + wy * vy) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    const double dx = px - (a[0] + t * vx), dy = py - (a[1] + t * vy);
    return std::sqrt(dx * dx + dy * dy);
}

} // namespace detail

inline constexpr int kDigitImageSize = 28;

/// Renders one digit with a randomized pose drawn from rng.
inline ObjectImage render_digit(int digit, SplitMix64& rng) {
    const int size = kDigitImageSize;
    ObjectImage img;
    img.width = size;
    img.height = size;
    img.pixels.assign(static_cast<std::size_t>(size) * size, 0.0);

    const double theta = rng.next_double(-0.18, 0.18);
    const double shear = rng.next_double(-0.16, 0.16);
    const double sx = 19.0 * rng.next_double(0.82, 1.08);
    const double sy = 19.0 * rng.next_double(0.84, 1.10);
    const double cx = 14.0 + rng.next_double(-1.6, 1.6);
    const double cy = 14.0 + rng.next_double(-1.6, 1.6);
    const double half_width = rng.next_double(0.8, 1.42); // stroke half-thickness in pixels
    const double edge = 1.1;                              // anti-aliasing ramp width
    const double amp = rng.next_double(0.79, 0.98);
    const double ct = std::cos(theta), st = std::sin(theta);

    auto strokes = detail::glyph_strokes(digit);
    for (auto& stroke : strokes)
        for (auto& p : stroke) {
            double x = p[0] - 0.5 + rng.next_double(-0.03, 0.03);
            double y = p[1] - 0.5 + rng.next_double(-0.03, 0.03);
            x += shear * y;
            const double rx = ct * x - st * y, ry = st * x + ct * y;
            p = {cx + sx * rx, cy + sy * ry};
        }

    const double reach = half_width + edge;
    for (const auto& stroke : strokes)
        for (std::size_t s = 0; s + 1 < stroke.size(); ++s) {
            const auto& a = stroke[s];
            const auto& b = stroke[s + 1];
            const int x0 = std::max(0, static_cast<int>(std::floor(std::min(a[0], b[0]) - reach)));
            const int x1 = std::min(size - 1, static_cast<int>(std::ceil(std::max(a[0], b[0]) + reach)));
            const int y0 = std::max(0, static_cast<int>(std::floor(std::min(a[1], b[1]) - reach)));
            const int y1 = std::min(size - 1, static_cast<int>(std::ceil(std::max(a[1], b[1]) + reach)));
            for (int y = y0; y <= y1; ++y)
                for (int x = x0; x <= x1; ++x) {
                    const double d = detail::segment_distance(x + 0.5, y + 0.5, a, b);
                    const double cov = std::clamp((half_width + edge - d) / edge, 0.0, 1.0);
                    if (cov > 0.0) {
                        double& px = img.pixels[static_cast<std::size_t>(y) * size + x];
                        px = std::max(px, amp * cov);
                    }
                }
        }
    return img;
}

/// Deterministic digit corpus at 28x28; image i depends only on (seed, i).
/// Digit classes are drawn uniformly.
inline std::vector<ObjectImage> generate_digit_images(int count, std::uint64_t seed) {
    if (count < 1) throw std::invalid_argument("generate_digit_images: count must be positive");
    std::vector<ObjectImage> out(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        SplitMix64 rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
        const int digit = static_cast<int>(rng.next_below(10));
        out[static_cast<std::size_t>(i)] = render_digit(digit, rng);
    }
    return out;
}

} // namespace spicrack::synth
