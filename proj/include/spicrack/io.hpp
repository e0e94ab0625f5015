#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "spicrack/coa.hpp"
#include "spicrack/core.hpp"
#include "spicrack/prng.hpp"

namespace spicrack::io {

namespace detail {

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error(path + ": cannot open for reading");
    std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return data;
}

inline void write_file(const std::string& path, const std::string& data) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error(path + ": cannot open for writing");
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!out) throw std::runtime_error(path + ": write failed");
}

[[noreturn]] inline void fail_at(const std::string& path, std::size_t offset, const std::string& what) {
    throw std::runtime_error(path + ": byte " + std::to_string(offset) + ": " + what);
}

[[noreturn]] inline void fail_line(const std::string& path, std::size_t line, const std::string& what) {
    throw std::runtime_error(path + ": line " + std::to_string(line) + ": " + what);
}

/// PGM token scanner: skips whitespace and '#' comments, tracks byte offset.
struct PgmScanner {
    const std::string& data;
    const std::string& path;
    std::size_t pos = 0;

    void skip_space_and_comments() {
        while (pos < data.size()) {
            const char c = data[pos];
            if (c == '#') {
                while (pos < data.size() && data[pos] != '\n') ++pos;
            } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
                ++pos;
            } else {
                break;
            }
        }
    }

    int next_int(const char* what) {
        skip_space_and_comments();
        if (pos >= data.size()) fail_at(path, pos, std::string("expected ") + what + ", found end of file");
        int value = 0;
        const char* begin = data.data() + pos;
        const char* end = data.data() + data.size();
        auto [ptr, ec] = std::from_chars(begin, end, value);
        if (ec != std::errc() || ptr == begin)
            fail_at(path, pos, std::string("expected ") + what);
        pos = static_cast<std::size_t>(ptr - data.data());
        return value;
    }
};

inline std::uint32_t read_be32(const std::string& data, std::size_t off) {
    return (static_cast<std::uint32_t>(static_cast<unsigned char>(data[off])) << 24) |
           (static_cast<std::uint32_t>(static_cast<unsigned char>(data[off + 1])) << 16) |
           (static_cast<std::uint32_t>(static_cast<unsigned char>(data[off + 2])) << 8) |
           static_cast<std::uint32_t>(static_cast<unsigned char>(data[off + 3]));
}

inline void append_be32(std::string& out, std::uint32_t v) {
    out.push_back(static_cast<char>((v >> 24) & 0xff));
    out.push_back(static_cast<char>((v >> 16) & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
    out.push_back(static_cast<char>(v & 0xff));
}

inline std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

} // namespace detail

// ---------------------------------------------------------------------------
// PGM (binary P5, maxval 255)
// ---------------------------------------------------------------------------

inline ObjectImage read_pgm(const std::string& path) {
    const std::string data = detail::read_file(path);
    if (data.size() < 2 || data[0] != 'P' || data[1] != '5')
        detail::fail_at(path, 0, "not a binary P5 PGM file");
    detail::PgmScanner sc{data, path, 2};
    const int width = sc.next_int("width");
    const int height = sc.next_int("height");
    const int maxval = sc.next_int("maxval");
    if (width < 1 || height < 1) detail::fail_at(path, sc.pos, "dimensions must be positive");
    if (maxval != 255) detail::fail_at(path, sc.pos, "unsupported max value " + std::to_string(maxval));
    if (sc.pos >= data.size()) detail::fail_at(path, sc.pos, "missing payload");
    ++sc.pos; // exactly one whitespace byte separates header from payload
    const std::size_t need = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    if (data.size() - sc.pos < need)
        detail::fail_at(path, data.size(),
                        "truncated payload (expected " + std::to_string(need) + " bytes, got " +
                            std::to_string(data.size() - sc.pos) + ")");
    ObjectImage img;
    img.width = width;
    img.height = height;
    img.pixels.resize(need);
    for (std::size_t i = 0; i < need; ++i)
        img.pixels[i] = static_cast<unsigned char>(data[sc.pos + i]) / 255.0;
    return img;
}

inline void write_pgm(const ObjectImage& image, const std::string& path) {
    validate_image(image);
    std::string out = "P5\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
    out.reserve(out.size() + image.pixels.size());
    for (double v : image.pixels)
        out.push_back(static_cast<char>(static_cast<unsigned char>(v * 255.0 + 0.5)));
    detail::write_file(path, out);
}

/// Loads every *.pgm in a directory in sorted filename order.
inline std::vector<ObjectImage> read_pgm_directory(const std::string& dir) {
    std::vector<std::string> names;
    for (const auto& entry : std::filesystem::directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().extension() == ".pgm")
            names.push_back(entry.path().string());
    std::sort(names.begin(), names.end());
    std::vector<ObjectImage> images;
    images.reserve(names.size());
    for (const auto& name : names) images.push_back(read_pgm(name));
    return images;
}

// ---------------------------------------------------------------------------
// IDX container (the MNIST image convention: big-endian magic 0x00000803,
// rank-3 unsigned bytes)
// ---------------------------------------------------------------------------

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;

inline std::vector<ObjectImage> parse_idx(const std::string& path) {
    const std::string data = detail::read_file(path);
    if (data.size() < 16) detail::fail_at(path, data.size(), "truncated header (need 16 bytes)");
    const std::uint32_t magic = detail::read_be32(data, 0);
    if (magic != kIdxImageMagic)
        detail::fail_at(path, 0, "wrong magic 0x" + [&] {
            char buf[16];
            std::snprintf(buf, sizeof buf, "%08x", magic);
            return std::string(buf);
        }() + " (expected rank-3 unsigned-byte images, 0x00000803)");
    const std::uint32_t count = detail::read_be32(data, 4);
    const std::uint32_t rows = detail::read_be32(data, 8);
    const std::uint32_t cols = detail::read_be32(data, 12);
    if (count == 0 || rows == 0 || cols == 0) detail::fail_at(path, 4, "zero dimension in header");
    const std::size_t need = static_cast<std::size_t>(count) * rows * cols;
    if (data.size() - 16 != need)
        detail::fail_at(path, data.size(),
                        "payload size " + std::to_string(data.size() - 16) + " does not match dimensions (" +
                            std::to_string(need) + ")");
    std::vector<ObjectImage> images(count);
    std::size_t off = 16;
    for (std::uint32_t i = 0; i < count; ++i) {
        ObjectImage& img = images[i];
        img.width = static_cast<int>(cols);
        img.height = static_cast<int>(rows);
        img.pixels.resize(static_cast<std::size_t>(rows) * cols);
        for (auto& px : img.pixels) px = static_cast<unsigned char>(data[off++]) / 255.0;
    }
    return images;
}

/// Writes images (all one shape) as a rank-3 unsigned-byte IDX file.
inline void write_idx(const std::vector<ObjectImage>& images, const std::string& path) {
    if (images.empty()) throw std::invalid_argument("write_idx: empty image set");
    const int w = images.front().width, h = images.front().height;
    std::string out;
    detail::append_be32(out, kIdxImageMagic);
    detail::append_be32(out, static_cast<std::uint32_t>(images.size()));
    detail::append_be32(out, static_cast<std::uint32_t>(h));
    detail::append_be32(out, static_cast<std::uint32_t>(w));
    for (const auto& img : images) {
        if (img.width != w || img.height != h) throw std::invalid_argument("write_idx: images disagree on shape");
        validate_image(img);
        for (double v : img.pixels)
            out.push_back(static_cast<char>(static_cast<unsigned char>(v * 255.0 + 0.5)));
    }
    detail::write_file(path, out);
}

// ---------------------------------------------------------------------------
// Resizing (bilinear, corner-aligned)
// ---------------------------------------------------------------------------

inline ObjectImage resize_image(const ObjectImage& image, int new_width, int new_height) {
    validate_image(image);
    if (new_width < 1 || new_height < 1) throw std::invalid_argument("resize_image: target dimensions must be positive");
    if (new_width == image.width && new_height == image.height) return image;
    ObjectImage out;
    out.width = new_width;
    out.height = new_height;
    out.pixels.resize(static_cast<std::size_t>(new_width) * new_height);
    const double sx = new_width > 1 ? static_cast<double>(image.width - 1) / (new_width - 1) : 0.0;
    const double sy = new_height > 1 ? static_cast<double>(image.height - 1) / (new_height - 1) : 0.0;
    for (int y = 0; y < new_height; ++y) {
        const double fy = y * sy;
        const int y0 = static_cast<int>(fy);
        const int y1 = std::min(y0 + 1, image.height - 1);
        const double wy = fy - y0;
        for (int x = 0; x < new_width; ++x) {
            const double fx = x * sx;
            const int x0 = static_cast<int>(fx);
            const int x1 = std::min(x0 + 1, image.width - 1);
            const double wx = fx - x0;
            const double v = (1 - wy) * ((1 - wx) * image.at(x0, y0) + wx * image.at(x1, y0)) +
                             wy * ((1 - wx) * image.at(x0, y1) + wx * image.at(x1, y1));
            out.pixels[static_cast<std::size_t>(y) * new_width + x] = std::clamp(v, 0.0, 1.0);
        }
    }
    return out;
}

inline std::vector<ObjectImage> resize_all(const std::vector<ObjectImage>& images, int w, int h) {
    std::vector<ObjectImage> out;
    out.reserve(images.size());
    for (const auto& img : images) out.push_back(resize_image(img, w, h));
    return out;
}

// ---------------------------------------------------------------------------
// Ciphertext CSV: one row per ciphertext, values with 9 significant digits
// ---------------------------------------------------------------------------

inline void write_ciphertext_csv(const std::vector<Ciphertext>& set, const std::string& path) {
    std::string out;
    for (const auto& c : set) {
        for (std::size_t i = 0; i < c.values.size(); ++i) {
            if (i) out.push_back(',');
            out += detail::format_double(c.values[i]);
        }
        out.push_back('\n');
    }
    detail::write_file(path, out);
}

inline std::vector<Ciphertext> read_ciphertext_csv(const std::string& path) {
    const std::string data = detail::read_file(path);
    std::vector<Ciphertext> set;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    std::size_t expected = 0;
    while (pos < data.size()) {
        const std::size_t eol = data.find('\n', pos);
        const std::size_t end = eol == std::string::npos ? data.size() : eol;
        ++line_no;
        if (end > pos) {
            Ciphertext c;
            const char* p = data.data() + pos;
            const char* stop = data.data() + end;
            while (p < stop) {
                double v = 0.0;
                auto [ptr, ec] = std::from_chars(p, stop, v);
                if (ec != std::errc() || ptr == p)
                    detail::fail_line(path, line_no, "malformed numeric field");
                c.values.push_back(v);
                p = ptr;
                if (p < stop) {
                    if (*p != ',') detail::fail_line(path, line_no, "expected ',' between fields");
                    ++p;
                    if (p == stop) detail::fail_line(path, line_no, "trailing comma");
                }
            }
            if (set.empty()) expected = c.values.size();
            else if (c.values.size() != expected)
                detail::fail_line(path, line_no,
                                  "row has " + std::to_string(c.values.size()) + " fields, expected " +
                                      std::to_string(expected));
            set.push_back(std::move(c));
        }
        if (eol == std::string::npos) break;
        pos = eol + 1;
    }
    return set;
}

// ---------------------------------------------------------------------------
// Pattern-key and permutation-key files (ASCII, debuggable at paper scales)
// ---------------------------------------------------------------------------

struct KeyFile {
    PatternKey key;
    KeyRegime regime = KeyRegime::TypeI;
    std::uint64_t seed = 0;
};

/// Key file: `SPIKEY 1 <TYPE1|TYPE2> M=<m> N=<n> W=<w> SEED=<hex>` then M
/// newline-terminated rows of N characters from {0,1}.
inline void write_key_file(const PatternKey& key, KeyRegime regime, std::uint64_t seed, const std::string& path) {
    validate_key(key);
    std::string out = "SPIKEY 1 " + std::string(regime_name(regime)) + " M=" + std::to_string(key.pattern_count) +
                      " N=" + std::to_string(key.pixels_per_pattern) + " W=" + std::to_string(key.width) +
                      " SEED=" + seed_to_hex(seed) + "\n";
    out.reserve(out.size() + key.entries.size() + static_cast<std::size_t>(key.pattern_count));
    for (int m = 0; m < key.pattern_count; ++m) {
        for (auto bit : key.row(m)) out.push_back(bit ? '1' : '0');
        out.push_back('\n');
    }
    detail::write_file(path, out);
}

inline KeyFile read_key_file(const std::string& path) {
    const std::string data = detail::read_file(path);
    const std::size_t eol = data.find('\n');
    if (eol == std::string::npos) detail::fail_line(path, 1, "missing header line");
    std::istringstream header(data.substr(0, eol));
    std::string magic, version, regime, m_kv, n_kv, w_kv, seed_kv;
    header >> magic >> version >> regime >> m_kv >> n_kv >> w_kv >> seed_kv;
    if (magic != "SPIKEY" || version != "1") detail::fail_line(path, 1, "not a SPIKEY version 1 file");
    KeyFile out;
    if (regime == "TYPE1") out.regime = KeyRegime::TypeI;
    else if (regime == "TYPE2") out.regime = KeyRegime::TypeII;
    else detail::fail_line(path, 1, "unknown regime tag '" + regime + "'");
    auto kv_int = [&](const std::string& kv, const char* name) {
        const std::string prefix = std::string(name) + "=";
        if (kv.rfind(prefix, 0) != 0) detail::fail_line(path, 1, "expected " + prefix + "<value>");
        return std::stoi(kv.substr(prefix.size()));
    };
    const int m = kv_int(m_kv, "M");
    const int n = kv_int(n_kv, "N");
    const int w = kv_int(w_kv, "W");
    if (seed_kv.rfind("SEED=", 0) != 0) detail::fail_line(path, 1, "expected SEED=<hex>");
    out.seed = parse_seed_hex(seed_kv.substr(5));
    if (m < 1 || n < 1 || w < 1 || n % w != 0) detail::fail_line(path, 1, "invalid dimensions");
    out.key.pattern_count = m;
    out.key.pixels_per_pattern = n;
    out.key.width = w;
    out.key.height = n / w;
    out.key.entries.reserve(static_cast<std::size_t>(m) * n);
    std::size_t pos = eol + 1;
    for (int row = 0; row < m; ++row) {
        const std::size_t row_end = data.find('\n', pos);
        if (row_end == std::string::npos)
            detail::fail_line(path, static_cast<std::size_t>(row) + 2, "missing newline-terminated key row");
        if (row_end - pos != static_cast<std::size_t>(n))
            detail::fail_line(path, static_cast<std::size_t>(row) + 2,
                              "row has " + std::to_string(row_end - pos) + " digits, expected " + std::to_string(n));
        for (std::size_t i = pos; i < row_end; ++i) {
            const char c = data[i];
            if (c != '0' && c != '1')
                detail::fail_at(path, i, std::string("invalid key digit '") + c + "'");
            out.key.entries.push_back(static_cast<std::uint8_t>(c - '0'));
        }
        pos = row_end + 1;
    }
    if (pos != data.size()) detail::fail_at(path, pos, "trailing data after key rows");
    return out;
}

/// Permutation file: `SPIPERM 1 M=<m> SEED=<hex>` then M lines, each the
/// 1-based original pattern index placed at that position.
inline void write_permutation_file(const PermutationKey& perm, std::uint64_t seed, const std::string& path) {
    validate_permutation(perm);
    std::string out = "SPIPERM 1 M=" + std::to_string(perm.size()) + " SEED=" + seed_to_hex(seed) + "\n";
    for (int v : perm.order) out += std::to_string(v + 1) + "\n";
    detail::write_file(path, out);
}

struct PermutationFile {
    PermutationKey perm;
    std::uint64_t seed = 0;
};

inline PermutationFile read_permutation_file(const std::string& path) {
    const std::string data = detail::read_file(path);
    const std::size_t eol = data.find('\n');
    if (eol == std::string::npos) detail::fail_line(path, 1, "missing header line");
    std::istringstream header(data.substr(0, eol));
    std::string magic, version, m_kv, seed_kv;
    header >> magic >> version >> m_kv >> seed_kv;
    if (magic != "SPIPERM" || version != "1") detail::fail_line(path, 1, "not a SPIPERM version 1 file");
    if (m_kv.rfind("M=", 0) != 0) detail::fail_line(path, 1, "expected M=<value>");
    const int m = std::stoi(m_kv.substr(2));
    if (seed_kv.rfind("SEED=", 0) != 0) detail::fail_line(path, 1, "expected SEED=<hex>");
    PermutationFile out;
    out.seed = parse_seed_hex(seed_kv.substr(5));
    std::size_t pos = eol + 1;
    for (int i = 0; i < m; ++i) {
        const std::size_t row_end = data.find('\n', pos);
        if (row_end == std::string::npos)
            detail::fail_line(path, static_cast<std::size_t>(i) + 2, "missing permutation entry");
        int v = 0;
        auto [ptr, ec] = std::from_chars(data.data() + pos, data.data() + row_end, v);
        if (ec != std::errc() || ptr != data.data() + row_end)
            detail::fail_line(path, static_cast<std::size_t>(i) + 2, "malformed permutation entry");
        out.perm.order.push_back(v - 1);
        pos = row_end + 1;
    }
    if (pos != data.size()) detail::fail_at(path, pos, "trailing data after permutation entries");
    validate_permutation(out.perm, m);
    return out;
}

// ---------------------------------------------------------------------------
// CSV dumps for inspection (histograms, distance matrices)
// ---------------------------------------------------------------------------

inline void write_histogram_csv(const coa::IntensityHistogram& h, const std::string& path) {
    std::string out = "bin_low,bin_high,count\n";
    for (std::size_t i = 0; i < h.counts.size(); ++i) {
        const double lo = h.config.range_low + static_cast<double>(i) * h.config.bin_size;
        out += detail::format_double(lo) + "," + detail::format_double(lo + h.config.bin_size) + "," +
               std::to_string(h.counts[i]) + "\n";
    }
    detail::write_file(path, out);
}

inline void write_matrix_csv(const Matrix& m, const std::string& path) {
    std::string out;
    for (int r = 0; r < m.rows; ++r) {
        for (int c = 0; c < m.cols; ++c) {
            if (c) out.push_back(',');
            out += detail::format_double(m.at(r, c));
        }
        out.push_back('\n');
    }
    detail::write_file(path, out);
}

/// Tiles images into one mosaic with 2-pixel black separators, wrapping rows
/// of at most `max_cols` tiles.
inline ObjectImage make_mosaic(const std::vector<ObjectImage>& images, int max_cols = 5) {
    if (images.empty()) throw std::invalid_argument("make_mosaic: empty image set");
    const int w = images.front().width, h = images.front().height;
    for (const auto& img : images)
        if (img.width != w || img.height != h) throw std::invalid_argument("make_mosaic: images disagree on shape");
    const int n = static_cast<int>(images.size());
    const int cols = std::min(n, max_cols);
    const int rows = (n + cols - 1) / cols;
    const int sep = 2;
    ObjectImage out;
    out.width = cols * w + (cols - 1) * sep;
    out.height = rows * h + (rows - 1) * sep;
    out.pixels.assign(static_cast<std::size_t>(out.width) * out.height, 0.0);
    for (int i = 0; i < n; ++i) {
        const int cx = (i % cols) * (w + sep);
        const int cy = (i / cols) * (h + sep);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                out.pixels[static_cast<std::size_t>(cy + y) * out.width + cx + x] =
                    images[static_cast<std::size_t>(i)].at(x, y);
    }
    return out;
}

} // namespace spicrack::io
