// spicrack: encrypted single-pixel-imaging workbench.
//
// Subcommands: keygen, encrypt, decrypt, kpa, coa, eval, report.
// Every command reads an optional JSON config (--config) with flag overrides,
// writes its artifacts under --out, and emits a report.json where relevant.
// Commands compose through files only; reruns with the same config reproduce
// every artifact byte for byte (report timing aside).

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "spicrack/spicrack.hpp"

using namespace spicrack;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

struct CommonOpts {
    std::string config_path;
    std::string out_dir = ".";
    std::string seed_hex;
    int threads = 0;
};

json load_config(const CommonOpts& opts) {
    json cfg = json::object();
    if (!opts.config_path.empty()) {
        std::ifstream in(opts.config_path);
        if (!in) throw std::invalid_argument(opts.config_path + ": cannot open config");
        try {
            in >> cfg;
        } catch (const json::parse_error& e) {
            throw std::invalid_argument(opts.config_path + ": " + e.what());
        }
    }
    if (!opts.seed_hex.empty()) cfg["seed"] = opts.seed_hex;
    if (opts.threads > 0) cfg["threads"] = opts.threads;
    if (!cfg.contains("seed")) cfg["seed"] = "1";
    return cfg;
}

std::uint64_t master_seed(const json& cfg) { return parse_seed_hex(cfg["seed"].get<std::string>()); }

int config_int(const json& cfg, const char* key, int fallback = -1) {
    if (cfg.contains(key)) return cfg[key].get<int>();
    if (fallback >= 0) return fallback;
    throw std::invalid_argument(std::string("config: missing required field '") + key + "'");
}

SolverConfig solver_config(const json& cfg) {
    SolverConfig sc;
    if (cfg.contains("solver")) {
        const auto& s = cfg["solver"];
        sc.max_iterations = s.value("max_iterations", sc.max_iterations);
        sc.residual_tolerance = s.value("residual_tolerance", sc.residual_tolerance);
        sc.tv_weight = s.value("tv_weight", sc.tv_weight);
    }
    return sc;
}

SolverConfig decrypt_config(const json& cfg) {
    SolverConfig sc = default_tv_config();
    if (cfg.contains("solver")) {
        const auto& s = cfg["solver"];
        sc.max_iterations = s.value("max_iterations", sc.max_iterations);
        sc.residual_tolerance = s.value("residual_tolerance", sc.residual_tolerance);
        sc.tv_weight = s.value("tv_weight", sc.tv_weight);
    }
    return sc;
}

coa::HistogramConfig histogram_config(const json& cfg) {
    coa::HistogramConfig hc;
    if (cfg.contains("histogram")) {
        const auto& h = cfg["histogram"];
        hc.range_low = h.value("range_low", hc.range_low);
        hc.range_high = h.value("range_high", hc.range_high);
        hc.bin_size = h.value("bin_size", hc.bin_size);
    }
    coa::validate_histogram_config(hc);
    return hc;
}

json echo_solver(const SolverConfig& sc) {
    return {{"max_iterations", sc.max_iterations},
            {"residual_tolerance", sc.residual_tolerance},
            {"tv_weight", sc.tv_weight}};
}

json echo_histogram(const coa::HistogramConfig& hc) {
    return {{"range_low", hc.range_low}, {"range_high", hc.range_high}, {"bin_size", hc.bin_size}};
}

/// Loads a corpus per the config section `name`:
///   {"source": "smooth"|"digits"|"idx"|"pgm-dir", "count": n, "path": "...",
///    "seed": "hex"} — synthetic sources need count, file sources need path;
/// images are resized to width x height when they do not match already.
std::vector<ObjectImage> load_images(const json& cfg, const char* name, int width, int height,
                                     std::uint64_t fallback_seed) {
    if (!cfg.contains(name))
        throw std::invalid_argument(std::string("config: missing image source section '") + name + "'");
    const auto& src = cfg[name];
    const std::string kind = src.value("source", "smooth");
    std::vector<ObjectImage> images;
    if (kind == "smooth" || kind == "digits") {
        const int count = src.value("count", 0);
        if (count < 1) throw std::invalid_argument(std::string(name) + ": synthetic source needs a positive count");
        const std::uint64_t seed =
            src.contains("seed") ? parse_seed_hex(src["seed"].get<std::string>()) : fallback_seed;
        images = kind == "smooth" ? synth::generate_smooth_images(count, width, height, seed)
                                  : synth::generate_digit_images(count, seed);
    } else if (kind == "idx") {
        const std::string path = src.value("path", "");
        if (path.empty() || !fs::exists(path))
            throw std::invalid_argument(std::string(name) + ": idx source needs an existing path");
        images = io::parse_idx(path);
        if (src.contains("count")) {
            const int count = src["count"].get<int>();
            if (count < 1 || static_cast<std::size_t>(count) > images.size())
                throw std::invalid_argument(std::string(name) + ": count exceeds records in idx file");
            images.resize(static_cast<std::size_t>(count));
        }
    } else if (kind == "pgm-dir") {
        const std::string path = src.value("path", "");
        if (path.empty() || !fs::is_directory(path))
            throw std::invalid_argument(std::string(name) + ": pgm-dir source needs an existing directory");
        images = io::read_pgm_directory(path);
        if (images.empty()) throw std::invalid_argument(std::string(name) + ": directory holds no .pgm files");
    } else {
        throw std::invalid_argument(std::string(name) + ": unknown source '" + kind + "'");
    }
    for (auto& img : images)
        if (img.width != width || img.height != height) img = io::resize_image(img, width, height);
    return images;
}

json echo_source(const json& cfg, const char* name) {
    return cfg.contains(name) ? cfg[name] : json(nullptr);
}

void ensure_out_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw std::runtime_error(dir + ": cannot create output directory");
}

void write_report(const AttackReport& report, const std::string& dir) {
    json j = report_to_json(report);
    std::ofstream out(fs::path(dir) / "report.json");
    out << j.dump(2) << "\n";
    std::ofstream csv(fs::path(dir) / "report.csv");
    csv << report_csv_header() << "\n" << report_csv_row(report) << "\n";
}

struct Timer {
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
};

// ---------------------------------------------------------------------------

int cmd_keygen(const CommonOpts& opts) {
    const json cfg = load_config(opts);
    const int m = config_int(cfg, "m");
    const int width = config_int(cfg, "width");
    const int height = config_int(cfg, "height", width);
    const std::string regime_str = cfg.value("regime", "type1");
    const std::uint64_t seed = master_seed(cfg);
    const KeyRegime regime = regime_str == "type2" ? KeyRegime::TypeII : KeyRegime::TypeI;
    if (regime_str != "type1" && regime_str != "type2")
        throw std::invalid_argument("config: regime must be type1 or type2");

    auto key = generate_key(m, width * height, width, derive_seed(seed, 1));
    ensure_out_dir(opts.out_dir);
    io::write_key_file(key, regime, seed, (fs::path(opts.out_dir) / "key.spikey").string());
    if (regime == KeyRegime::TypeII) {
        auto perm = generate_permutation(m, derive_seed(seed, 2));
        io::write_permutation_file(perm, seed, (fs::path(opts.out_dir) / "perm.spiperm").string());
        auto secret = permute_key(key, perm);
        io::write_key_file(secret, regime, seed, (fs::path(opts.out_dir) / "key_permuted.spikey").string());
    }
    std::cerr << "keygen: wrote " << regime_str << " key (M=" << m << ", N=" << width * height << ") to "
              << opts.out_dir << "\n";
    return 0;
}

int cmd_encrypt(const CommonOpts& opts, const std::string& key_path, const std::string& perm_path) {
    const json cfg = load_config(opts);
    auto kf = io::read_key_file(key_path);
    PatternKey key = kf.key;
    if (!perm_path.empty()) key = permute_key(key, io::read_permutation_file(perm_path).perm);
    auto images = load_images(cfg, "corpus", key.width, key.height, derive_seed(master_seed(cfg), 3));
    auto ciphertexts = encrypt_all(images, key, cfg.value("threads", 0));
    ensure_out_dir(opts.out_dir);
    io::write_ciphertext_csv(ciphertexts, (fs::path(opts.out_dir) / "cipher.csv").string());
    std::cerr << "encrypt: " << images.size() << " images -> cipher.csv (M=" << key.pattern_count << ")\n";
    return 0;
}

int cmd_decrypt(const CommonOpts& opts, const std::string& key_path, const std::string& perm_path,
                const std::string& cipher_path) {
    const json cfg = load_config(opts);
    auto kf = io::read_key_file(key_path);
    PatternKey key = kf.key;
    if (!perm_path.empty()) key = permute_key(key, io::read_permutation_file(perm_path).perm);
    auto ciphertexts = io::read_ciphertext_csv(cipher_path);
    if (ciphertexts.empty()) throw std::invalid_argument(cipher_path + ": no ciphertexts to decrypt");
    const SolverConfig sc = decrypt_config(cfg);
    ensure_out_dir(opts.out_dir);
    std::vector<ObjectImage> recon(ciphertexts.size());
    parallel_for(ciphertexts.size(), cfg.value("threads", 0),
                 [&](std::size_t i) { recon[i] = tv_reconstruct(key, ciphertexts[i], sc); });
    char name[64];
    for (std::size_t i = 0; i < recon.size(); ++i) {
        std::snprintf(name, sizeof name, "decrypted_%03zu.pgm", i);
        io::write_pgm(recon[i], (fs::path(opts.out_dir) / name).string());
    }
    io::write_pgm(io::make_mosaic(recon), (fs::path(opts.out_dir) / "grid.pgm").string());
    std::cerr << "decrypt: wrote " << recon.size() << " images and grid.pgm\n";
    return 0;
}

int cmd_kpa(const CommonOpts& opts, const std::string& cipher_path, const std::string& originals_path,
            const std::string& true_key_path, const std::string& true_perm_path) {
    const json cfg = load_config(opts);
    Timer timer;
    auto ciphertexts = io::read_ciphertext_csv(cipher_path);
    if (ciphertexts.empty()) throw std::invalid_argument(cipher_path + ": empty ciphertext file");
    const std::string regime = cfg.value("regime", "type1");
    const int width = config_int(cfg, "width");
    const int height = config_int(cfg, "height", width);
    const std::uint64_t seed = master_seed(cfg);
    const SolverConfig sc = solver_config(cfg);
    const int threads = cfg.value("threads", 0);

    PlainCipherCorpus corpus;
    corpus.images = load_images(cfg, "corpus", width, height, derive_seed(seed, 3));
    if (corpus.images.size() != ciphertexts.size())
        throw std::invalid_argument("kpa: corpus has " + std::to_string(corpus.images.size()) +
                                    " images but cipher.csv has " + std::to_string(ciphertexts.size()) +
                                    " rows");
    corpus.ciphertexts = std::move(ciphertexts);

    ensure_out_dir(opts.out_dir);
    AttackReport report;
    report.seeds["master"] = seed_to_hex(seed);
    report.config_echo = {{"regime", regime},
                          {"n", width * height},
                          {"m", static_cast<int>(corpus.ciphertexts.front().values.size())},
                          {"q", corpus.pair_count()},
                          {"solver", echo_solver(sc)},
                          {"corpus", echo_source(cfg, "corpus")}};

    if (regime == "type1") {
        auto result = kpa::recover_key_type1(corpus, sc, threads);
        io::write_key_file(result.recovered_key, KeyRegime::TypeI, seed,
                           (fs::path(opts.out_dir) / "recovered_key.spikey").string());
        report.attack = "kpa-type1";
        if (!true_key_path.empty())
            report.cracking_correct_rate =
                cracking_correct_rate(io::read_key_file(true_key_path).key, result.recovered_key);
    } else if (regime == "type2") {
        if (originals_path.empty()) throw std::invalid_argument("kpa type2 requires --originals");
        auto originals = io::read_key_file(originals_path).key;
        auto result = kpa::recover_key_type2(corpus, originals, sc, threads);
        io::write_permutation_file(result.permutation, seed,
                                   (fs::path(opts.out_dir) / "recovered_perm.spiperm").string());
        io::write_key_file(result.rearranged_key, KeyRegime::TypeII, seed,
                           (fs::path(opts.out_dir) / "recovered_key.spikey").string());
        report.attack = "kpa-type2";
        if (!true_perm_path.empty())
            report.permutation_correct_rate =
                permutation_correct_rate(io::read_permutation_file(true_perm_path).perm, result.permutation);
        if (!true_key_path.empty())
            report.cracking_correct_rate =
                cracking_correct_rate(io::read_key_file(true_key_path).key, result.rearranged_key);
    } else {
        throw std::invalid_argument("config: regime must be type1 or type2");
    }
    report.timing_seconds = timer.seconds();
    write_report(report, opts.out_dir);
    std::cerr << "kpa: done in " << report.timing_seconds << "s";
    if (report.cracking_correct_rate) std::cerr << ", cracking rate " << *report.cracking_correct_rate;
    if (report.permutation_correct_rate) std::cerr << ", permutation rate " << *report.permutation_correct_rate;
    std::cerr << "\n";
    return 0;
}

int cmd_coa(const CommonOpts& opts, const std::string& cipher_path, const std::string& originals_path,
            const std::string& true_perm_path) {
    const json cfg = load_config(opts);
    Timer timer;
    if (originals_path.empty()) throw std::invalid_argument("coa requires --originals");
    auto originals = io::read_key_file(originals_path).key;
    auto ciphertexts = io::read_ciphertext_csv(cipher_path);
    if (ciphertexts.empty()) throw std::invalid_argument(cipher_path + ": empty ciphertext file");
    const std::uint64_t seed = master_seed(cfg);
    auto exemplars =
        load_images(cfg, "exemplar", originals.width, originals.height, derive_seed(seed, 4));
    const coa::HistogramConfig hc = histogram_config(cfg);
    const int threads = cfg.value("threads", 0);

    auto actual = coa::intensities_from_ciphertexts(ciphertexts);
    auto simulated = coa::simulate_exemplar_intensities(exemplars, originals, threads);
    auto result = coa::recover_permutation_coa(actual, simulated, hc);

    ensure_out_dir(opts.out_dir);
    io::write_permutation_file(result.permutation, seed,
                               (fs::path(opts.out_dir) / "recovered_perm.spiperm").string());
    io::write_matrix_csv(result.distance_matrix, (fs::path(opts.out_dir) / "distance_matrix.csv").string());
    const fs::path hist_dir = fs::path(opts.out_dir) / "histograms";
    ensure_out_dir(hist_dir.string());
    char name[64];
    for (int m = 0; m < actual.rows; ++m) {
        std::snprintf(name, sizeof name, "actual_%03d.csv", m + 1);
        io::write_histogram_csv(coa::build_histogram(actual.row(m), hc), (hist_dir / name).string());
        std::snprintf(name, sizeof name, "exemplar_%03d.csv", m + 1);
        io::write_histogram_csv(coa::build_histogram(simulated.row(m), hc), (hist_dir / name).string());
    }

    AttackReport report;
    report.attack = "coa";
    report.seeds["master"] = seed_to_hex(seed);
    report.config_echo = {{"regime", "type2"},
                          {"n", originals.pixels_per_pattern},
                          {"m", originals.pattern_count},
                          {"q", actual.cols},
                          {"exemplar_count", simulated.cols},
                          {"histogram", echo_histogram(hc)},
                          {"exemplar", echo_source(cfg, "exemplar")},
                          {"frequency_normalized", result.frequency_normalized}};
    if (!true_perm_path.empty())
        report.permutation_correct_rate =
            permutation_correct_rate(io::read_permutation_file(true_perm_path).perm, result.permutation);
    report.timing_seconds = timer.seconds();
    write_report(report, opts.out_dir);
    std::cerr << "coa: done in " << report.timing_seconds << "s";
    if (report.permutation_correct_rate) std::cerr << ", permutation rate " << *report.permutation_correct_rate;
    std::cerr << "\n";
    return 0;
}

int cmd_eval(const CommonOpts& opts, const std::string& true_key_path, const std::string& recovered_key_path,
             const std::string& true_perm_path, const std::string& recovered_perm_path,
             const std::string& cipher_path) {
    const json cfg = load_config(opts);
    Timer timer;
    AttackReport report;
    report.attack = "eval";
    report.seeds["master"] = seed_to_hex(master_seed(cfg));
    json echo = json::object();

    std::optional<PatternKey> true_key, recovered_key;
    if (!true_key_path.empty() && !recovered_key_path.empty()) {
        true_key = io::read_key_file(true_key_path).key;
        recovered_key = io::read_key_file(recovered_key_path).key;
        report.cracking_correct_rate = cracking_correct_rate(*true_key, *recovered_key);
        echo["m"] = true_key->pattern_count;
        echo["n"] = true_key->pixels_per_pattern;
    }
    if (!true_perm_path.empty() && !recovered_perm_path.empty())
        report.permutation_correct_rate =
            permutation_correct_rate(io::read_permutation_file(true_perm_path).perm,
                                     io::read_permutation_file(recovered_perm_path).perm);

    // PSNR leg: decrypt the given ciphertexts with the recovered key and
    // compare against reference images from config.corpus
    if (!cipher_path.empty()) {
        if (!recovered_key) throw std::invalid_argument("eval: PSNR needs --recovered-key");
        auto ciphertexts = io::read_ciphertext_csv(cipher_path);
        auto references = load_images(cfg, "corpus", recovered_key->width, recovered_key->height,
                                      derive_seed(master_seed(cfg), 3));
        if (references.size() != ciphertexts.size())
            throw std::invalid_argument("eval: reference images and ciphertext rows differ in count");
        const SolverConfig sc = decrypt_config(cfg);
        echo["solver"] = echo_solver(sc);
        report.psnr_by_image.resize(ciphertexts.size());
        parallel_for(ciphertexts.size(), cfg.value("threads", 0), [&](std::size_t i) {
            report.psnr_by_image[i] = psnr(references[i], tv_reconstruct(*recovered_key, ciphertexts[i], sc));
        });
    }
    report.config_echo = echo;
    report.timing_seconds = timer.seconds();
    ensure_out_dir(opts.out_dir);
    write_report(report, opts.out_dir);

    std::cout << report_to_json(report).dump(2) << "\n";
    return 0;
}

int cmd_report(const CommonOpts& opts, const std::vector<std::string>& inputs) {
    std::vector<std::pair<std::string, AttackReport>> rows;
    for (const auto& root : inputs) {
        if (!fs::exists(root)) throw std::invalid_argument(root + ": no such file or directory");
        auto consider = [&](const fs::path& p) {
            if (p.filename() != "report.json") return;
            std::ifstream in(p);
            json j;
            in >> j;
            rows.emplace_back(p.string(), report_from_json(j));
        };
        if (fs::is_directory(root)) {
            for (const auto& entry : fs::recursive_directory_iterator(root))
                if (entry.is_regular_file()) consider(entry.path());
        } else {
            consider(root);
        }
    }
    std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    ensure_out_dir(opts.out_dir);
    const std::string table = (fs::path(opts.out_dir) / "table.csv").string();
    std::ofstream out(table);
    out << "source," << report_csv_header() << "\n";
    for (const auto& [path, rep] : rows) out << path << "," << report_csv_row(rep) << "\n";
    std::cerr << "report: assembled " << rows.size() << " runs into " << table << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"encrypted single-pixel-imaging workbench: forward model, key recovery, order recovery"};
    app.require_subcommand(1);

    CommonOpts opts;
    std::string key_path, perm_path, cipher_path, originals_path;
    std::string true_key_path, true_perm_path, recovered_key_path, recovered_perm_path;
    std::vector<std::string> report_inputs;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", opts.config_path, "JSON config file");
        cmd->add_option("--out", opts.out_dir, "output directory");
        cmd->add_option("--seed", opts.seed_hex, "master seed (hex), overrides config");
        cmd->add_option("--threads", opts.threads, "worker threads (0 = all cores)");
    };

    auto* keygen = app.add_subcommand("keygen", "generate an illumination-pattern key (and Type II order)");
    add_common(keygen);

    auto* encrypt = app.add_subcommand("encrypt", "record single-pixel intensities for a corpus");
    add_common(encrypt);
    encrypt->add_option("--key", key_path, "pattern key file")->required();
    encrypt->add_option("--perm", perm_path, "permutation applied to the key before use");

    auto* decrypt = app.add_subcommand("decrypt", "reconstruct images from intensities with a key");
    add_common(decrypt);
    decrypt->add_option("--key", key_path, "pattern key file")->required();
    decrypt->add_option("--perm", perm_path, "permutation applied to the key before use");
    decrypt->add_option("--cipher", cipher_path, "ciphertext CSV")->required();

    auto* kpa_cmd = app.add_subcommand("kpa", "known-plaintext attack: recover the key from pairs");
    add_common(kpa_cmd);
    kpa_cmd->add_option("--cipher", cipher_path, "ciphertext CSV aligned with the corpus")->required();
    kpa_cmd->add_option("--originals", originals_path, "published original patterns (type2)");
    kpa_cmd->add_option("--true-key", true_key_path, "true key for rate reporting");
    kpa_cmd->add_option("--true-perm", true_perm_path, "true permutation for rate reporting");

    auto* coa_cmd = app.add_subcommand("coa", "ciphertext-only attack: recover the pattern order");
    add_common(coa_cmd);
    coa_cmd->add_option("--cipher", cipher_path, "recorded ciphertext CSV")->required();
    coa_cmd->add_option("--originals", originals_path, "published original patterns")->required();
    coa_cmd->add_option("--true-perm", true_perm_path, "true permutation for rate reporting");

    auto* eval = app.add_subcommand("eval", "rates and PSNR from stored artifacts");
    add_common(eval);
    eval->add_option("--true-key", true_key_path, "true key file");
    eval->add_option("--recovered-key", recovered_key_path, "recovered key file");
    eval->add_option("--true-perm", true_perm_path, "true permutation file");
    eval->add_option("--recovered-perm", recovered_perm_path, "recovered permutation file");
    eval->add_option("--cipher", cipher_path, "ciphertexts for the PSNR leg (uses config.corpus references)");

    auto* report = app.add_subcommand("report", "assemble run reports into a table");
    add_common(report);
    report->add_option("--in", report_inputs, "report.json files or directories to scan")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (keygen->parsed()) return cmd_keygen(opts);
        if (encrypt->parsed()) return cmd_encrypt(opts, key_path, perm_path);
        if (decrypt->parsed()) return cmd_decrypt(opts, key_path, perm_path, cipher_path);
        if (kpa_cmd->parsed()) return cmd_kpa(opts, cipher_path, originals_path, true_key_path, true_perm_path);
        if (coa_cmd->parsed()) return cmd_coa(opts, cipher_path, originals_path, true_perm_path);
        if (eval->parsed())
            return cmd_eval(opts, true_key_path, recovered_key_path, true_perm_path, recovered_perm_path,
                            cipher_path);
        if (report->parsed()) return cmd_report(opts, report_inputs);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::out_of_range& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return 0;
}
