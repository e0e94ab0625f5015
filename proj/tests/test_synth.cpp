#include <catch2/catch_amalgamated.hpp>

#include "spicrack/synth.hpp"

using namespace spicrack;

TEST_CASE("smooth images are deterministic and span the unit range") {
    auto a = synth::generate_smooth_images(3, 16, 16, 0x40);
    auto b = synth::generate_smooth_images(3, 16, 16, 0x40);
    for (int i = 0; i < 3; ++i) {
        REQUIRE(a[static_cast<std::size_t>(i)].pixels == b[static_cast<std::size_t>(i)].pixels);
        double lo = 2.0, hi = -1.0;
        for (double v : a[static_cast<std::size_t>(i)].pixels) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        REQUIRE(lo == 0.0);
        REQUIRE(hi == 1.0);
    }
}

TEST_CASE("smooth image prefixes are stable under corpus growth") {
    auto small = synth::generate_smooth_images(2, 8, 8, 0x41);
    auto large = synth::generate_smooth_images(5, 8, 8, 0x41);
    REQUIRE(small[0].pixels == large[0].pixels);
    REQUIRE(small[1].pixels == large[1].pixels);
}

TEST_CASE("smooth images are locally smooth") {
    auto imgs = synth::generate_smooth_images(4, 32, 32, 0x42);
    for (const auto& img : imgs) {
        double diff = 0.0;
        int count = 0;
        for (int y = 0; y < 32; ++y)
            for (int x = 0; x + 1 < 32; ++x) {
                diff += std::abs(img.at(x, y) - img.at(x + 1, y));
                ++count;
            }
        for (int y = 0; y + 1 < 32; ++y)
            for (int x = 0; x < 32; ++x) {
                diff += std::abs(img.at(x, y) - img.at(x, y + 1));
                ++count;
            }
        REQUIRE(diff / count < 0.15);
    }
}

TEST_CASE("digit corpus is deterministic with plausible ink statistics") {
    auto a = synth::generate_digit_images(10, 0x43);
    auto b = synth::generate_digit_images(10, 0x43);
    for (std::size_t i = 0; i < a.size(); ++i) REQUIRE(a[i].pixels == b[i].pixels);

    auto corpus = synth::generate_digit_images(200, 0x44);
    double mean_ink = 0.0;
    std::vector<double> inks;
    for (const auto& img : corpus) {
        REQUIRE(img.width == 28);
        REQUIRE(img.height == 28);
        double ink = 0.0;
        for (double v : img.pixels) {
            REQUIRE(v >= 0.0);
            REQUIRE(v <= 1.0);
            ink += v;
        }
        ink /= static_cast<double>(img.pixels.size());
        inks.push_back(ink);
        mean_ink += ink;
    }
    mean_ink /= static_cast<double>(corpus.size());
    REQUIRE(mean_ink > 0.10); // handwritten-digit ballpark
    REQUIRE(mean_ink < 0.16);
    double var = 0.0;
    for (double v : inks) var += (v - mean_ink) * (v - mean_ink);
    REQUIRE(std::sqrt(var / static_cast<double>(inks.size())) > 0.02); // classes differ in ink
}

TEST_CASE("generators validate their arguments") {
    REQUIRE_THROWS_AS(synth::generate_smooth_images(0, 8, 8, 1), std::invalid_argument);
    REQUIRE_THROWS_AS(synth::generate_smooth_images(1, 0, 8, 1), std::invalid_argument);
    REQUIRE_THROWS_AS(synth::generate_digit_images(0, 1), std::invalid_argument);
}
