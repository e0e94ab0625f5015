#include <catch2/catch_amalgamated.hpp>

#include "spicrack/coa.hpp"
#include "spicrack/io.hpp"
#include "spicrack/metrics.hpp"
#include "spicrack/synth.hpp"

using namespace spicrack;

TEST_CASE("build_histogram counts the worked example") {
    // 44 values falling 7/13/16/8 into [0,5) [5,10) [10,15) [15,20]
    std::vector<double> values;
    auto add = [&](int count, double lo) {
        for (int i = 0; i < count; ++i) values.push_back(lo + 0.1 + 4.0 * i / std::max(1, count));
    };
    add(7, 0.0);
    add(13, 5.0);
    add(16, 10.0);
    add(8, 15.0);
    coa::HistogramConfig cfg{0.0, 20.0, 5.0};
    auto h = coa::build_histogram(values, cfg);
    REQUIRE(h.counts == std::vector<std::int64_t>{7, 13, 16, 8});
}

TEST_CASE("build_histogram edge behavior") {
    coa::HistogramConfig cfg{0.0, 10.0, 5.0};
    SECTION("empty input gives zero counts") {
        auto h = coa::build_histogram(std::vector<double>{}, cfg);
        REQUIRE(h.counts == std::vector<std::int64_t>{0, 0});
        REQUIRE(h.total() == 0);
    }
    SECTION("interior boundary lands right") {
        auto h = coa::build_histogram(std::vector<double>{5.0}, cfg);
        REQUIRE(h.counts == std::vector<std::int64_t>{0, 1});
    }
    SECTION("top of range closes the last bin") {
        auto h = coa::build_histogram(std::vector<double>{10.0}, cfg);
        REQUIRE(h.counts == std::vector<std::int64_t>{0, 1});
    }
    SECTION("out-of-range values clamp into edge bins, conserving mass") {
        auto h = coa::build_histogram(std::vector<double>{-3.0, 12.5, 100.0, 2.0}, cfg);
        REQUIRE(h.counts == std::vector<std::int64_t>{2, 2});
        REQUIRE(h.total() == 4);
    }
    SECTION("mass conservation on random input") {
        SplitMix64 rng(0x888);
        for (int trial = 0; trial < 20; ++trial) {
            std::vector<double> v(200);
            for (auto& x : v) x = rng.next_double(-10.0, 25.0);
            REQUIRE(coa::build_histogram(v, cfg).total() == 200);
        }
    }
    SECTION("non-finite values rejected") {
        REQUIRE_THROWS_AS(coa::build_histogram(std::vector<double>{std::nan("")}, cfg), std::invalid_argument);
    }
}

TEST_CASE("histogram config validation") {
    REQUIRE_THROWS_AS(coa::validate_histogram_config({5.0, 5.0, 1.0}), std::invalid_argument);
    REQUIRE_THROWS_AS(coa::validate_histogram_config({0.0, 10.0, 0.0}), std::invalid_argument);
    REQUIRE_THROWS_AS(coa::validate_histogram_config({0.0, 10.0, 3.0}), std::invalid_argument);
    REQUIRE_NOTHROW(coa::validate_histogram_config({0.0, 15.0, 0.5}));
}

TEST_CASE("histogram_distance") {
    coa::HistogramConfig cfg{0.0, 10.0, 5.0};
    coa::IntensityHistogram a{cfg, {1, 0}}, b{cfg, {0, 1}}, c{cfg, {1, 0}};
    REQUIRE(coa::histogram_distance(a, c) == 0.0);
    REQUIRE(coa::histogram_distance(a, b) == Catch::Approx(std::sqrt(2.0)));
    SECTION("symmetry on random counts") {
        SplitMix64 rng(0x999);
        for (int t = 0; t < 20; ++t) {
            coa::IntensityHistogram x{cfg, {static_cast<std::int64_t>(rng.next_below(100)),
                                            static_cast<std::int64_t>(rng.next_below(100))}};
            coa::IntensityHistogram y{cfg, {static_cast<std::int64_t>(rng.next_below(100)),
                                            static_cast<std::int64_t>(rng.next_below(100))}};
            REQUIRE(coa::histogram_distance(x, y) == coa::histogram_distance(y, x));
        }
    }
    SECTION("mismatched configs rejected") {
        coa::IntensityHistogram other{{0.0, 20.0, 10.0}, {1, 0}};
        REQUIRE_THROWS_AS(coa::histogram_distance(a, other), std::invalid_argument);
    }
}

TEST_CASE("simulate_exemplar_intensities") {
    auto key = generate_key(8, 64, 8, 0x1212);
    SECTION("all-zero exemplars give a zero matrix") {
        std::vector<ObjectImage> zeros(3, ObjectImage{std::vector<double>(64, 0.0), 8, 8});
        auto m = coa::simulate_exemplar_intensities(zeros, key);
        for (double v : m.data) REQUIRE(v == 0.0);
    }
    SECTION("all-ones pattern row sums the exemplar") {
        PatternKey ones{std::vector<std::uint8_t>(4, 1), 1, 4, 2, 2};
        std::vector<ObjectImage> ex{ObjectImage{{0.1, 0.2, 0.3, 0.4}, 2, 2}};
        auto m = coa::simulate_exemplar_intensities(ex, ones);
        REQUIRE(m.at(0, 0) == Catch::Approx(1.0).epsilon(1e-12));
    }
    SECTION("agrees with per-image encrypt") {
        auto digits = io::resize_all(synth::generate_digit_images(20, 0x1313), 8, 8);
        auto m = coa::simulate_exemplar_intensities(digits, key);
        for (int q = 0; q < 20; ++q) {
            auto c = encrypt(digits[static_cast<std::size_t>(q)], key);
            for (int row = 0; row < 8; ++row)
                REQUIRE(m.at(row, q) == c.values[static_cast<std::size_t>(row)]);
        }
    }
    SECTION("dimension mismatch rejected") {
        std::vector<ObjectImage> wrong{ObjectImage{std::vector<double>(16, 0.0), 4, 4}};
        REQUIRE_THROWS_AS(coa::simulate_exemplar_intensities(wrong, key), std::invalid_argument);
    }
}

TEST_CASE("recover_permutation_coa with perfect statistics") {
    // distinct per-row histograms; actual = exemplar rows permuted
    const int m = 6, q = 50;
    Matrix exemplar(m, q);
    for (int r = 0; r < m; ++r)
        for (int c = 0; c < q; ++c) exemplar.at(r, c) = r + 0.3 + 0.4 * ((c * 7) % 10) / 10.0;
    PermutationKey perm{{3, 0, 5, 1, 4, 2}};
    Matrix actual(m, q);
    for (int r = 0; r < m; ++r)
        for (int c = 0; c < q; ++c) actual.at(r, c) = exemplar.at(perm.order[static_cast<std::size_t>(r)], c);
    coa::HistogramConfig cfg{0.0, 8.0, 0.5};
    auto res = coa::recover_permutation_coa(actual, exemplar, cfg);
    REQUIRE(res.permutation.order == perm.order);
    REQUIRE_FALSE(res.frequency_normalized);
    REQUIRE(res.distance_matrix.rows == m);
}

TEST_CASE("recover_permutation_coa stays a bijection on degenerate input") {
    Matrix flat_a(5, 20), flat_b(5, 20);
    for (auto& v : flat_a.data) v = 1.0;
    for (auto& v : flat_b.data) v = 1.0;
    auto res = coa::recover_permutation_coa(flat_a, flat_b, {0.0, 15.0, 0.5});
    REQUIRE_NOTHROW(validate_permutation(res.permutation, 5));
    // all distances tie, so greedy assigns identity by the low-index rule
    REQUIRE(res.permutation.order == std::vector<int>{0, 1, 2, 3, 4});
}

TEST_CASE("recover_permutation_coa is invariant to sample order") {
    auto key = generate_key(12, 64, 8, 0x1414);
    auto digits = io::resize_all(synth::generate_digit_images(300, 0x1515), 8, 8);
    auto mat = coa::simulate_exemplar_intensities(digits, key);
    Matrix shuffled = mat;
    SplitMix64 rng(0x1616);
    for (int r = 0; r < shuffled.rows; ++r) {
        auto row = shuffled.row(r);
        for (int c = shuffled.cols - 1; c > 0; --c)
            std::swap(row[static_cast<std::size_t>(c)],
                      row[static_cast<std::size_t>(rng.next_below(static_cast<std::uint64_t>(c) + 1))]);
    }
    coa::HistogramConfig cfg{0.0, 15.0, 0.5};
    auto base = coa::recover_permutation_coa(mat, mat, cfg);
    auto shuf = coa::recover_permutation_coa(shuffled, mat, cfg);
    REQUIRE(base.permutation.order == shuf.permutation.order);
}

TEST_CASE("unequal sample counts switch to frequency comparison") {
    Matrix a(3, 40), b(3, 80);
    SplitMix64 rng(0x1717);
    for (auto& v : a.data) v = rng.next_double(0.0, 15.0);
    for (auto& v : b.data) v = rng.next_double(0.0, 15.0);
    auto res = coa::recover_permutation_coa(a, b, {0.0, 15.0, 0.5});
    REQUIRE(res.frequency_normalized);
    REQUIRE_NOTHROW(validate_permutation(res.permutation, 3));
}

TEST_CASE("correct rate decays as image size grows") {
    // Table-3-style trend at reduced scale: Q=6000, M=64, sizes 8/12/16
    const int m = 64, q = 6000;
    coa::HistogramConfig cfg{0.0, 15.0, 0.5};
    double last = 2.0;
    for (int side : {8, 12, 16}) {
        auto originals = generate_key(m, side * side, side, 0x2001);
        auto perm = generate_permutation(m, 0x2002);
        auto secret = permute_key(originals, perm);
        auto digits = synth::generate_digit_images(2 * q, 0x2003);
        std::vector<ObjectImage> actual_src(digits.begin(), digits.begin() + q);
        std::vector<ObjectImage> exemplar_src(digits.begin() + q, digits.end());
        auto actual = coa::intensities_from_ciphertexts(
            encrypt_all(io::resize_all(actual_src, side, side), secret));
        auto exemplar = coa::simulate_exemplar_intensities(io::resize_all(exemplar_src, side, side), originals);
        const double rate = permutation_correct_rate(perm, coa::recover_permutation_coa(actual, exemplar, cfg).permutation);
        INFO("side = " << side << " rate = " << rate);
        REQUIRE(rate <= last);
        last = rate;
    }
    REQUIRE(last < 0.9); // the 16x16 end of the trend has visibly degraded
}

TEST_CASE("intensity matrix assembly validates shapes") {
    std::vector<Ciphertext> cs{Ciphertext{{1.0, 2.0}}, Ciphertext{{3.0}}};
    REQUIRE_THROWS_AS(coa::intensities_from_ciphertexts(cs), std::invalid_argument);
    REQUIRE_THROWS_AS(coa::intensities_from_ciphertexts(std::vector<Ciphertext>{}), std::invalid_argument);
    std::vector<Ciphertext> ok{Ciphertext{{1.0, 2.0}}, Ciphertext{{3.0, 4.0}}};
    auto m = coa::intensities_from_ciphertexts(ok);
    REQUIRE(m.rows == 2);
    REQUIRE(m.cols == 2);
    REQUIRE(m.at(0, 1) == 3.0);
    REQUIRE(m.at(1, 0) == 2.0);
}
