#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "spicrack/core.hpp"

namespace spicrack {

/// PSNR reported for an exact match (zero MSE), with peak fixed at 1.0.
inline constexpr double kPsnrCap = 99.0;

/// Fraction of key pixels that agree between two equally-sized keys.
inline double cracking_correct_rate(const PatternKey& true_key, const PatternKey& recovered) {
    if (true_key.pattern_count != recovered.pattern_count ||
        true_key.pixels_per_pattern != recovered.pixels_per_pattern)
        throw std::invalid_argument("cracking_correct_rate: key dimensions differ");
    std::size_t agree = 0;
    for (std::size_t i = 0; i < true_key.entries.size(); ++i)
        agree += true_key.entries[i] == recovered.entries[i];
    return static_cast<double>(agree) / static_cast<double>(true_key.entries.size());
}

/// Fraction of positions whose pattern index was recovered exactly.
inline double permutation_correct_rate(const PermutationKey& true_perm, const PermutationKey& recovered) {
    if (true_perm.size() != recovered.size())
        throw std::invalid_argument("permutation_correct_rate: lengths differ");
    int agree = 0;
    for (int i = 0; i < true_perm.size(); ++i)
        agree += true_perm.order[static_cast<std::size_t>(i)] == recovered.order[static_cast<std::size_t>(i)];
    return static_cast<double>(agree) / static_cast<double>(true_perm.size());
}

/// Peak signal-to-noise ratio in dB with peak 1 (pixels live in [0,1]).
inline double psnr(const ObjectImage& reference, const ObjectImage& candidate) {
    if (reference.width != candidate.width || reference.height != candidate.height)
        throw std::invalid_argument("psnr: image dimensions differ");
    validate_image(reference, "psnr reference");
    validate_image(candidate, "psnr candidate");
    double mse = 0.0;
    for (std::size_t i = 0; i < reference.pixels.size(); ++i) {
        const double d = reference.pixels[i] - candidate.pixels[i];
        mse += d * d;
    }
    mse /= static_cast<double>(reference.pixels.size());
    if (mse == 0.0) return kPsnrCap;
    return 10.0 * std::log10(1.0 / mse);
}

/// One attack run's quantitative outcome plus enough metadata to rerun it.
struct AttackReport {
    std::string attack; // "kpa-type1", "kpa-type2", "coa", "eval"
    std::optional<double> cracking_correct_rate;
    std::optional<double> permutation_correct_rate;
    std::vector<double> psnr_by_image;
    std::map<std::string, std::string> seeds; // role -> hex seed
    nlohmann::json config_echo;               // dimensions, solver/histogram settings, sources
    double timing_seconds = 0.0;              // wall time; excluded from reproducibility checks
};

inline void validate_report(const AttackReport& r) {
    auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
    if (r.cracking_correct_rate && !in_unit(*r.cracking_correct_rate))
        throw std::invalid_argument("report: cracking_correct_rate outside [0,1]");
    if (r.permutation_correct_rate && !in_unit(*r.permutation_correct_rate))
        throw std::invalid_argument("report: permutation_correct_rate outside [0,1]");
    for (double p : r.psnr_by_image)
        if (!(p >= 0.0 && p <= kPsnrCap)) throw std::invalid_argument("report: PSNR outside [0, cap]");
}

inline nlohmann::json report_to_json(const AttackReport& r) {
    validate_report(r);
    nlohmann::json j;
    j["attack"] = r.attack;
    if (r.cracking_correct_rate) j["cracking_correct_rate"] = *r.cracking_correct_rate;
    if (r.permutation_correct_rate) j["permutation_correct_rate"] = *r.permutation_correct_rate;
    j["psnr_by_image"] = r.psnr_by_image;
    j["seeds"] = r.seeds;
    j["config"] = r.config_echo;
    j["timing_seconds"] = r.timing_seconds;
    return j;
}

inline AttackReport report_from_json(const nlohmann::json& j) {
    AttackReport r;
    r.attack = j.value("attack", "");
    if (j.contains("cracking_correct_rate")) r.cracking_correct_rate = j["cracking_correct_rate"].get<double>();
    if (j.contains("permutation_correct_rate"))
        r.permutation_correct_rate = j["permutation_correct_rate"].get<double>();
    if (j.contains("psnr_by_image")) r.psnr_by_image = j["psnr_by_image"].get<std::vector<double>>();
    if (j.contains("seeds")) r.seeds = j["seeds"].get<std::map<std::string, std::string>>();
    if (j.contains("config")) r.config_echo = j["config"];
    r.timing_seconds = j.value("timing_seconds", 0.0);
    return r;
}

inline std::string report_csv_header() {
    return "attack,regime,N,M,Q,cracking_correct_rate,permutation_correct_rate,psnr_avg,seed";
}

/// Flat one-row summary for table assembly; missing fields stay empty.
inline std::string report_csv_row(const AttackReport& r) {
    validate_report(r);
    std::ostringstream os;
    auto field = [&](const char* key) {
        return r.config_echo.contains(key) ? r.config_echo[key].dump() : std::string();
    };
    os << r.attack << ',' << (r.config_echo.contains("regime") ? r.config_echo["regime"].get<std::string>() : "")
       << ',' << field("n") << ',' << field("m") << ',' << field("q") << ',';
    char buf[64];
    if (r.cracking_correct_rate) {
        std::snprintf(buf, sizeof buf, "%.9g", *r.cracking_correct_rate);
        os << buf;
    }
    os << ',';
    if (r.permutation_correct_rate) {
        std::snprintf(buf, sizeof buf, "%.9g", *r.permutation_correct_rate);
        os << buf;
    }
    os << ',';
    if (!r.psnr_by_image.empty()) {
        double avg = 0.0;
        for (double p : r.psnr_by_image) avg += p;
        avg /= static_cast<double>(r.psnr_by_image.size());
        std::snprintf(buf, sizeof buf, "%.9g", avg);
        os << buf;
    }
    os << ',';
    auto it = r.seeds.find("master");
    if (it != r.seeds.end()) os << it->second;
    return os.str();
}

} // namespace spicrack
