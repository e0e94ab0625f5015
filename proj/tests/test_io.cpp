#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "spicrack/io.hpp"
#include "spicrack/synth.hpp"

using namespace spicrack;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("spicrack_test_" + std::to_string(::getpid()) + "_" +
                                            std::to_string(reinterpret_cast<std::uintptr_t>(this)));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

std::string slurp(const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spit(const std::string& p, const std::string& data) {
    std::ofstream out(p, std::ios::binary);
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
}

} // namespace

TEST_CASE("pgm round trip") {
    TempDir dir;
    auto img = synth::generate_smooth_images(1, 7, 5, 0x20)[0];
    io::write_pgm(img, dir.file("a.pgm"));
    auto back = io::read_pgm(dir.file("a.pgm"));
    REQUIRE(back.width == 7);
    REQUIRE(back.height == 5);
    for (std::size_t i = 0; i < img.pixels.size(); ++i)
        REQUIRE(back.pixels[i] == Catch::Approx(img.pixels[i]).margin(0.5 / 255.0 + 1e-12));
}

TEST_CASE("pgm hand-scaled payload") {
    TempDir dir;
    spit(dir.file("b.pgm"), std::string("P5\n2 2\n255\n") + '\x00' + '\xff' + '\x80' + '\x40');
    auto img = io::read_pgm(dir.file("b.pgm"));
    REQUIRE(img.pixels[0] == 0.0);
    REQUIRE(img.pixels[1] == 1.0);
    REQUIRE(img.pixels[2] == Catch::Approx(128.0 / 255.0));
    REQUIRE(img.pixels[3] == Catch::Approx(64.0 / 255.0));
}

TEST_CASE("pgm malformed inputs carry diagnostics") {
    TempDir dir;
    SECTION("truncated payload names the byte count") {
        spit(dir.file("t.pgm"), std::string("P5\n2 2\n255\n") + "abc");
        REQUIRE_THROWS_WITH(io::read_pgm(dir.file("t.pgm")), Catch::Matchers::ContainsSubstring("truncated"));
    }
    SECTION("wrong magic") {
        spit(dir.file("m.pgm"), "P6\n2 2\n255\n....");
        REQUIRE_THROWS_WITH(io::read_pgm(dir.file("m.pgm")), Catch::Matchers::ContainsSubstring("P5"));
    }
    SECTION("unsupported max value") {
        spit(dir.file("x.pgm"), "P5\n2 2\n65535\n....");
        REQUIRE_THROWS_WITH(io::read_pgm(dir.file("x.pgm")),
                            Catch::Matchers::ContainsSubstring("unsupported max value"));
    }
    SECTION("comments in the header are fine") {
        spit(dir.file("c.pgm"), std::string("P5\n# a comment\n2 1 255\n") + '\x10' + '\x20');
        auto img = io::read_pgm(dir.file("c.pgm"));
        REQUIRE(img.width == 2);
    }
}

TEST_CASE("idx hand-built fixture parses exactly") {
    TempDir dir;
    std::string data;
    auto be32 = [&](std::uint32_t v) {
        data.push_back(static_cast<char>(v >> 24));
        data.push_back(static_cast<char>((v >> 16) & 0xff));
        data.push_back(static_cast<char>((v >> 8) & 0xff));
        data.push_back(static_cast<char>(v & 0xff));
    };
    be32(0x00000803);
    be32(2); // 2 images
    be32(2); // rows
    be32(2); // cols
    for (unsigned char b : {0, 51, 102, 153, 204, 255, 128, 64}) data.push_back(static_cast<char>(b));
    spit(dir.file("two.idx"), data);
    auto imgs = io::parse_idx(dir.file("two.idx"));
    REQUIRE(imgs.size() == 2);
    REQUIRE(imgs[0].pixels == std::vector<double>{0.0, 51 / 255.0, 102 / 255.0, 153 / 255.0});
    REQUIRE(imgs[1].pixels == std::vector<double>{204 / 255.0, 1.0, 128 / 255.0, 64 / 255.0});
}

TEST_CASE("idx rejects wrong magic and truncation") {
    TempDir dir;
    std::string labels("\x00\x00\x08\x01\x00\x00\x00\x02\x01\x02", 10);
    spit(dir.file("labels.idx"), labels);
    REQUIRE_THROWS_WITH(io::parse_idx(dir.file("labels.idx")), Catch::Matchers::ContainsSubstring("magic"));
    std::string trunc("\x00\x00\x08\x03\x00\x00\x00\x02\x00\x00\x00\x02\x00\x00\x00\x02\x01", 17);
    spit(dir.file("trunc.idx"), trunc);
    REQUIRE_THROWS_WITH(io::parse_idx(dir.file("trunc.idx")), Catch::Matchers::ContainsSubstring("payload"));
}

TEST_CASE("idx write/parse round trip at digit scale") {
    TempDir dir;
    auto digits = synth::generate_digit_images(25, 0x21);
    io::write_idx(digits, dir.file("digits.idx"));
    auto back = io::parse_idx(dir.file("digits.idx"));
    REQUIRE(back.size() == digits.size());
    for (std::size_t i = 0; i < back.size(); ++i) {
        REQUIRE(back[i].width == 28);
        for (std::size_t p = 0; p < back[i].pixels.size(); ++p)
            REQUIRE(back[i].pixels[p] == Catch::Approx(digits[i].pixels[p]).margin(0.5 / 255.0 + 1e-12));
    }
}

TEST_CASE("resize_image") {
    SECTION("identity") {
        auto img = synth::generate_smooth_images(1, 9, 9, 0x22)[0];
        auto out = io::resize_image(img, 9, 9);
        REQUIRE(out.pixels == img.pixels);
    }
    SECTION("constants stay constant") {
        ObjectImage img{std::vector<double>(36, 0.42), 6, 6};
        auto out = io::resize_image(img, 11, 3);
        for (double v : out.pixels) REQUIRE(v == Catch::Approx(0.42).margin(1e-12));
    }
    SECTION("digit downsampling approximately preserves the mean") {
        auto digits = synth::generate_digit_images(50, 0x23);
        for (const auto& d : digits) {
            auto small = io::resize_image(d, 8, 8);
            double src_mean = 0.0, dst_mean = 0.0; // brute-force averages
            for (double v : d.pixels) src_mean += v;
            for (double v : small.pixels) dst_mean += v;
            src_mean /= static_cast<double>(d.pixels.size());
            dst_mean /= static_cast<double>(small.pixels.size());
            REQUIRE(std::abs(src_mean - dst_mean) <= 0.02);
        }
    }
    SECTION("zero target rejected") {
        ObjectImage img{std::vector<double>(4, 0.0), 2, 2};
        REQUIRE_THROWS_AS(io::resize_image(img, 0, 2), std::invalid_argument);
    }
}

TEST_CASE("ciphertext csv") {
    TempDir dir;
    SECTION("round trip within 1e-8 relative") {
        std::vector<Ciphertext> set{Ciphertext{{0.123456789123, 250.5, 1e-3}},
                                    Ciphertext{{42.0, 0.0, 777.77777}}};
        io::write_ciphertext_csv(set, dir.file("c.csv"));
        auto back = io::read_ciphertext_csv(dir.file("c.csv"));
        REQUIRE(back.size() == 2);
        for (std::size_t i = 0; i < set.size(); ++i)
            for (std::size_t j = 0; j < set[i].values.size(); ++j)
                REQUIRE(back[i].values[j] == Catch::Approx(set[i].values[j]).epsilon(1e-8));
    }
    SECTION("empty file is an empty set") {
        spit(dir.file("e.csv"), "");
        REQUIRE(io::read_ciphertext_csv(dir.file("e.csv")).empty());
    }
    SECTION("ragged rows are rejected with a line number") {
        spit(dir.file("r.csv"), "1,2,3\n4,5\n");
        REQUIRE_THROWS_WITH(io::read_ciphertext_csv(dir.file("r.csv")),
                            Catch::Matchers::ContainsSubstring("line 2"));
    }
    SECTION("malformed fields are rejected") {
        spit(dir.file("m.csv"), "1,zap,3\n");
        REQUIRE_THROWS_WITH(io::read_ciphertext_csv(dir.file("m.csv")),
                            Catch::Matchers::ContainsSubstring("malformed"));
    }
}

TEST_CASE("key file round trip is bit exact") {
    TempDir dir;
    auto key = generate_key(13, 24, 6, 0xbeef0001);
    io::write_key_file(key, KeyRegime::TypeII, 0xbeef0001, dir.file("k.spikey"));
    auto back = io::read_key_file(dir.file("k.spikey"));
    REQUIRE(back.key.entries == key.entries);
    REQUIRE(back.key.width == 6);
    REQUIRE(back.regime == KeyRegime::TypeII);
    REQUIRE(back.seed == 0xbeef0001);
    SECTION("writers are byte-deterministic") {
        io::write_key_file(key, KeyRegime::TypeII, 0xbeef0001, dir.file("k2.spikey"));
        REQUIRE(slurp(dir.file("k.spikey")) == slurp(dir.file("k2.spikey")));
    }
}

TEST_CASE("key file malformed inputs") {
    TempDir dir;
    spit(dir.file("bad1"), "NOTKEY 1 TYPE1 M=1 N=2 W=2 SEED=0\n01\n");
    REQUIRE_THROWS_WITH(io::read_key_file(dir.file("bad1")), Catch::Matchers::ContainsSubstring("SPIKEY"));
    spit(dir.file("bad2"), "SPIKEY 1 TYPE1 M=1 N=4 W=2 SEED=0\n012x\n");
    REQUIRE_THROWS_AS(io::read_key_file(dir.file("bad2")), std::runtime_error);
    spit(dir.file("bad3"), "SPIKEY 1 TYPE1 M=1 N=4 W=2 SEED=0\n0101\nextra\n");
    REQUIRE_THROWS_WITH(io::read_key_file(dir.file("bad3")), Catch::Matchers::ContainsSubstring("trailing"));
    spit(dir.file("bad4"), "SPIKEY 1 TYPE1 M=2 N=4 W=2 SEED=0\n0101\n");
    REQUIRE_THROWS_WITH(io::read_key_file(dir.file("bad4")), Catch::Matchers::ContainsSubstring("row"));
}

TEST_CASE("permutation file round trip and 1-based storage") {
    TempDir dir;
    auto perm = generate_permutation(9, 0x31);
    io::write_permutation_file(perm, 0x31, dir.file("p.spiperm"));
    auto back = io::read_permutation_file(dir.file("p.spiperm"));
    REQUIRE(back.perm.order == perm.order);
    REQUIRE(back.seed == 0x31);
    auto text = slurp(dir.file("p.spiperm"));
    // entries on disk are 1-based
    REQUIRE(text.find("\n" + std::to_string(perm.order[0] + 1) + "\n") != std::string::npos);
}

TEST_CASE("histogram and matrix csv dumps") {
    TempDir dir;
    coa::IntensityHistogram h{{0.0, 2.0, 0.5}, {3, 1, 0, 9}};
    io::write_histogram_csv(h, dir.file("h.csv"));
    REQUIRE(slurp(dir.file("h.csv")) == "bin_low,bin_high,count\n0,0.5,3\n0.5,1,1\n1,1.5,0\n1.5,2,9\n");
    Matrix m(2, 2);
    m.at(0, 0) = 1.25;
    m.at(1, 1) = -0.5;
    io::write_matrix_csv(m, dir.file("m.csv"));
    REQUIRE(slurp(dir.file("m.csv")) == "1.25,0\n0,-0.5\n");
}

TEST_CASE("mosaic layout") {
    std::vector<ObjectImage> tiles(7, ObjectImage{std::vector<double>(16, 1.0), 4, 4});
    auto grid = io::make_mosaic(tiles, 3);
    REQUIRE(grid.width == 3 * 4 + 2 * 2);
    REQUIRE(grid.height == 3 * 4 + 2 * 2);
    REQUIRE(grid.pixels[0] == 1.0);
    REQUIRE(grid.pixels[4] == 0.0); // separator column
}

TEST_CASE("pgm directory loader reads sorted") {
    TempDir dir;
    ObjectImage a{std::vector<double>(4, 0.2), 2, 2}, b{std::vector<double>(4, 0.8), 2, 2};
    io::write_pgm(b, dir.file("img_02.pgm"));
    io::write_pgm(a, dir.file("img_01.pgm"));
    spit(dir.file("ignored.txt"), "not an image");
    auto imgs = io::read_pgm_directory(dir.path.string());
    REQUIRE(imgs.size() == 2);
    REQUIRE(imgs[0].pixels[0] == Catch::Approx(0.2).margin(1.0 / 255));
    REQUIRE(imgs[1].pixels[0] == Catch::Approx(0.8).margin(1.0 / 255));
}
