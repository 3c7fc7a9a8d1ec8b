#include "djescc/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace djescc {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

}  // namespace

Config Config::parse_string(const std::string& text) {
    Config cfg;
    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        line = trim(line);
        if (line.empty() || line[0] == '#' || line[0] == ';') continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw std::runtime_error("config: bad section header at line " +
                                         std::to_string(lineno));
            section = trim(line.substr(1, line.size() - 2));
            cfg.sections_[section];
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("config: expected key = value at line " +
                                     std::to_string(lineno));
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw std::runtime_error("config: empty key at line " + std::to_string(lineno));
        cfg.sections_[section][key] = value;
    }
    return cfg;
}

Config Config::parse_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config: " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_string(ss.str());
}

bool Config::has(const std::string& section, const std::string& key) const {
    auto s = sections_.find(section);
    return s != sections_.end() && s->second.count(key) > 0;
}

void Config::set(const std::string& section, const std::string& key, const std::string& value) {
    sections_[section][key] = value;
}

std::string Config::get(const std::string& section, const std::string& key,
                        const std::string& fallback) const {
    auto s = sections_.find(section);
    if (s == sections_.end()) return fallback;
    auto k = s->second.find(key);
    return k == s->second.end() ? fallback : k->second;
}

std::string Config::require(const std::string& section, const std::string& key) const {
    if (!has(section, key))
        throw std::runtime_error("config: missing required key [" + section + "] " + key);
    return get(section, key, "");
}

int64_t Config::get_int(const std::string& section, const std::string& key,
                        int64_t fallback) const {
    if (!has(section, key)) return fallback;
    return std::stoll(get(section, key, ""));
}

double Config::get_double(const std::string& section, const std::string& key,
                          double fallback) const {
    if (!has(section, key)) return fallback;
    return std::stod(get(section, key, ""));
}

bool Config::get_bool(const std::string& section, const std::string& key, bool fallback) const {
    if (!has(section, key)) return fallback;
    const std::string v = get(section, key, "");
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw std::runtime_error("config: bad boolean [" + section + "] " + key + " = " + v);
}

std::vector<double> Config::get_doubles(const std::string& section, const std::string& key,
                                        const std::vector<double>& fallback) const {
    if (!has(section, key)) return fallback;
    std::vector<double> out;
    std::istringstream in(get(section, key, ""));
    std::string tok;
    while (std::getline(in, tok, ',')) {
        tok = trim(tok);
        if (!tok.empty()) out.push_back(std::stod(tok));
    }
    return out;
}

std::string Config::canonical_text() const {
    std::ostringstream out;
    for (const auto& [section, kv] : sections_) {
        out << "[" << section << "]\n";
        for (const auto& [k, v] : kv) out << k << " = " << v << "\n";
    }
    return out.str();
}

uint64_t Config::hash() const {
    // FNV-1a 64
    uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : canonical_text()) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

std::string Config::hash_hex() const {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash()));
    return buf;
}

void Config::write_file(const fs::path& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("unwritable path: " + path.string());
    out << canonical_text();
}

fs::path resolve_cache_dir(const Config& cfg) {
    if (const char* env = std::getenv("DJESCC_CACHE_DIR")) return env;
    return cfg.get("data", "cache_dir", "data");
}

ExperimentConfig experiment_from_config(const Config& cfg) {
    ExperimentConfig e;
    e.run_id = cfg.get("run", "id", "run");
    e.seed = static_cast<uint64_t>(cfg.get_int("run", "seed", 1));
    e.dataset = cfg.get("data", "dataset", "cifar10");
    e.train_split = cfg.get("data", "train_split", "train");
    e.test_split = cfg.get("data", "test_split", "test");
    e.cache_dir = resolve_cache_dir(cfg);
    e.extractor_dir = cfg.get("extractor", "dir", "");
    e.t = cfg.get_int("model", "t", 16);
    e.lambda_e = cfg.get_double("model", "lambda_e", 0.0);
    e.lambda_d = cfg.get_double("model", "lambda_d", 0.0);
    e.in_channels = cfg.get_int("model", "in_channels", 3);
    e.variant = cipher_variant_from_string(cfg.get("model", "variant", "learned"));
    e.shuffle_seed = static_cast<uint64_t>(cfg.get_int("model", "shuffle_seed", 7));
    e.snr_db_min = cfg.get_double("channel", "snr_db_min", 0.0);
    e.snr_db_max = cfg.get_double("channel", "snr_db_max", 20.0);
    e.snr_per_image = cfg.get_bool("channel", "snr_per_image", false);
    e.epochs = cfg.get_int("training", "epochs", 500);
    e.batch_size = cfg.get_int("training", "batch_size", 64);
    e.initial_lr = cfg.get_double("training", "initial_lr", 1e-3);
    e.plateau_patience = cfg.get_int("training", "plateau_patience", 10);
    e.plateau_factor = cfg.get_double("training", "plateau_factor", 0.1);
    e.plateau_min_delta = cfg.get_double("training", "plateau_min_delta", 1e-4);
    e.train_subset = cfg.get_int("training", "train_subset", -1);
    e.eval_snrs = cfg.get_doubles("eval", "snrs", {0.0, 5.0, 10.0, 15.0, 20.0});
    e.eval_repeats = cfg.get_int("eval", "repeats", 10);
    e.eval_subset = cfg.get_int("eval", "subset", -1);
    e.config_hash = cfg.hash_hex();
    return e;
}

PretrainConfig pretrain_from_config(const Config& cfg) {
    PretrainConfig p;
    p.epochs = cfg.get_int("pretrain", "epochs", 30);
    p.batch_size = cfg.get_int("pretrain", "batch_size", 128);
    p.lr = cfg.get_double("pretrain", "lr", 1e-3);
    p.seed = static_cast<uint64_t>(cfg.get_int("pretrain", "seed", 1));
    p.extractor.cut_blocks = cfg.get_int("extractor", "cut_blocks", 3);
    p.extractor.width_mult = cfg.get_double("extractor", "width_mult", 1.0);
    p.extractor.in_channels = cfg.get_int("model", "in_channels", 3);
    return p;
}

GanAttackConfig gan_attack_from_config(const Config& cfg) {
    GanAttackConfig g;
    g.epochs = cfg.get_int("attack", "gan_epochs", 600);
    g.lr = cfg.get_double("attack", "gan_lr", 1e-4);
    g.batch_size = cfg.get_int("attack", "gan_batch_size", 64);
    g.generator_base_width = cfg.get_int("attack", "gan_base_width", 32);
    g.seed = static_cast<uint64_t>(cfg.get_int("attack", "seed", 1));
    return g;
}

std::string config_reference() {
    // key, default, meaning
    static const struct {
        const char* section;
        const char* key;
        const char* def;
        const char* doc;
    } kKeys[] = {
        {"run", "id", "run", "run identifier used in artifact names and CSV rows"},
        {"run", "seed", "1", "master seed; fixes init, batching, SNR draws and noise"},
        {"data", "dataset", "cifar10", "dataset id: cifar10, stl10 or a synthetic id"},
        {"data", "train_split", "train", "split used for training"},
        {"data", "test_split", "test", "split used for evaluation (stl10 also: unlabeled)"},
        {"data", "cache_dir", "data", "cache root; DJESCC_CACHE_DIR overrides"},
        {"model", "t", "16", "encoder output channels; bandwidth ratio R = t/96"},
        {"model", "lambda_e", "0", "weight of the encrypted-image feature loss"},
        {"model", "lambda_d", "0", "weight of the decoded-image feature loss"},
        {"model", "in_channels", "3", "image channels"},
        {"model", "variant", "learned", "cipher: learned, keyed_shuffle, pixel_invert, identity"},
        {"model", "shuffle_seed", "7", "key seed for the keyed_shuffle variant"},
        {"channel", "snr_db_min", "0", "training SNR range lower edge (dB)"},
        {"channel", "snr_db_max", "20", "training SNR range upper edge (dB)"},
        {"channel", "snr_per_image", "false", "draw one SNR per image instead of per batch"},
        {"training", "epochs", "500", "training epochs"},
        {"training", "batch_size", "64", "batch size"},
        {"training", "initial_lr", "0.001", "Adam initial learning rate"},
        {"training", "plateau_patience", "10", "epochs without improvement before LR cut"},
        {"training", "plateau_factor", "0.1", "LR multiplier on plateau"},
        {"training", "plateau_min_delta", "0.0001", "absolute improvement threshold"},
        {"training", "train_subset", "-1", "cap on training images (-1 = all)"},
        {"eval", "snrs", "0,5,10,15,20", "evaluation SNRs (dB)"},
        {"eval", "repeats", "10", "transmissions per image per SNR"},
        {"eval", "subset", "-1", "cap on evaluated images (-1 = all)"},
        {"extractor", "dir", "", "feature-extractor checkpoint directory"},
        {"extractor", "cut_blocks", "3", "VGG16-bn blocks kept for feature extraction"},
        {"extractor", "width_mult", "1.0", "width multiplier for the VGG trunk"},
        {"pretrain", "epochs", "30", "classifier pretraining epochs"},
        {"pretrain", "batch_size", "128", "pretraining batch size"},
        {"pretrain", "lr", "0.001", "pretraining Adam learning rate"},
        {"pretrain", "seed", "1", "pretraining seed"},
        {"attack", "gan_epochs", "600", "GAN attack training epochs"},
        {"attack", "gan_lr", "0.0001", "GAN attack Adam learning rate"},
        {"attack", "gan_batch_size", "64", "GAN attack batch size"},
        {"attack", "gan_base_width", "32", "generator U-Net base width"},
        {"attack", "gan_images", "5000", "attack training pool size"},
        {"attack", "seed", "1", "attack seed"},
        {"synthetic", "train_count", "2048", "synthetic corpus training images"},
        {"synthetic", "test_count", "512", "synthetic corpus test images"},
        {"synthetic", "height", "32", "synthetic image height"},
        {"synthetic", "width", "32", "synthetic image width"},
        {"synthetic", "classes", "10", "synthetic shape classes"},
        {"synthetic", "seed", "1", "synthetic corpus seed"},
    };
    std::ostringstream out;
    out << "Configuration reference (flat key-value file with [section] headers)\n\n";
    std::string last;
    for (const auto& k : kKeys) {
        if (last != k.section) {
            out << "[" << k.section << "]\n";
            last = k.section;
        }
        out << "  " << k.key << " = " << k.def << "\n      " << k.doc << "\n";
    }
    return out.str();
}

void RunManifest::add_artifact(const std::string& kind, const fs::path& path) {
    artifacts.emplace_back(kind, path.string());
}

void RunManifest::save(const fs::path& path) const {
    json arts = json::array();
    for (const auto& [kind, p] : artifacts) arts.push_back({{"kind", kind}, {"path", p}});
    json j = {{"run_id", run_id},
              {"config_hash", config_hash},
              {"source_rev", source_rev},
              {"created_utc", created_utc},
              {"artifacts", arts}};
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("unwritable path: " + path.string());
    out << j.dump(2) << "\n";
}

RunManifest RunManifest::load(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("missing manifest: " + path.string());
    json j;
    in >> j;
    RunManifest m;
    m.run_id = j.at("run_id").get<std::string>();
    m.config_hash = j.at("config_hash").get<std::string>();
    m.source_rev = j.value("source_rev", "");
    m.created_utc = j.value("created_utc", "");
    for (const auto& a : j.value("artifacts", json::array()))
        m.artifacts.emplace_back(a.at("kind").get<std::string>(), a.at("path").get<std::string>());
    return m;
}

RunManifest make_manifest(const std::string& run_id, const Config& cfg) {
    RunManifest m;
    m.run_id = run_id;
    m.config_hash = cfg.hash_hex();
    m.source_rev = std::getenv("DJESCC_SOURCE_REV") ? std::getenv("DJESCC_SOURCE_REV") : "unknown";
    const auto now = std::chrono::system_clock::now();
    const std::time_t tt = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&tt));
    m.created_utc = buf;
    return m;
}

namespace {

// summary.csv cells are copied as strings so reported numbers stay
// byte-identical to their source rows
struct SummaryRows {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

SummaryRows read_csv(const fs::path& path) {
    SummaryRows out;
    std::ifstream in(path);
    if (!in) return out;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::istringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (first) {
            out.header = cells;
            first = false;
        } else {
            out.rows.push_back(cells);
        }
    }
    return out;
}

}  // namespace

ReportResult emit_report(const std::vector<fs::path>& run_dirs, const fs::path& out_dir) {
    fs::create_directories(out_dir);
    ReportResult result;
    result.curves_csv = out_dir / "curves.csv";
    result.report_txt = out_dir / "report.txt";

    std::ofstream curves(result.curves_csv, std::ios::trunc);
    curves << "run_id,lambda_e,lambda_d,t,variant,snr_db,mean_psnr,mean_ssim,mean_psnr_xy,"
              "mean_psnr_xyhat\n";
    std::ofstream report(result.report_txt, std::ios::trunc);
    report << "DJESCC experiment report\n========================\n\n";

    for (const auto& dir : run_dirs) {
        std::string run_id = dir.filename().string();
        std::string lambda_e = "?", lambda_d = "?", t = "?", variant = "?";
        const fs::path bundle_meta = dir / "checkpoints" / "best" / "bundle.json";
        if (fs::exists(bundle_meta)) {
            std::ifstream in(bundle_meta);
            json j;
            in >> j;
            lambda_e = std::to_string(j.at("lambda_e").get<double>());
            lambda_d = std::to_string(j.at("lambda_d").get<double>());
            t = std::to_string(j.at("t").get<int64_t>());
            variant = j.at("variant").get<std::string>();
        } else {
            result.gaps.push_back(run_id + ": missing bundle metadata");
        }

        const fs::path summary_path = dir / "summary.csv";
        SummaryRows summary = read_csv(summary_path);
        if (summary.rows.empty()) {
            result.gaps.push_back(run_id + ": missing or empty summary.csv");
            report << "run " << run_id << ": NO EVALUATION DATA (gap)\n";
            continue;
        }

        // column indexes by header name; flag absences instead of guessing
        auto col = [&summary](const std::string& name) -> int {
            for (size_t i = 0; i < summary.header.size(); ++i)
                if (summary.header[i] == name) return static_cast<int>(i);
            return -1;
        };
        const int c_snr = col("snr_db"), c_psnr = col("mean_psnr"), c_ssim = col("mean_ssim");
        const int c_xy = col("mean_psnr_xy"), c_xyhat = col("mean_psnr_xyhat");
        const int c_run = col("run_id");

        report << "run " << run_id << " (lambda_e=" << lambda_e << ", lambda_d=" << lambda_d
               << ", t=" << t << ", variant=" << variant << ")\n";
        for (const auto& row : summary.rows) {
            const std::string rid = c_run >= 0 ? row[static_cast<size_t>(c_run)] : run_id;
            auto cell = [&row, &result, &rid](int idx, const std::string& name) -> std::string {
                if (idx < 0 || idx >= static_cast<int>(row.size())) {
                    result.gaps.push_back(rid + ": missing column " + name);
                    return "";
                }
                return row[static_cast<size_t>(idx)];
            };
            curves << rid << "," << lambda_e << "," << lambda_d << "," << t << "," << variant
                   << "," << cell(c_snr, "snr_db") << "," << cell(c_psnr, "mean_psnr") << ","
                   << cell(c_ssim, "mean_ssim") << "," << cell(c_xy, "mean_psnr_xy") << ","
                   << cell(c_xyhat, "mean_psnr_xyhat") << "\n";
            report << "  snr " << cell(c_snr, "snr_db") << " dB: psnr "
                   << cell(c_psnr, "mean_psnr") << ", ssim " << cell(c_ssim, "mean_ssim")
                   << "\n";
        }

        for (const auto& name : {"attack_fr_summary.txt", "attack_gan_summary.txt"}) {
            const fs::path ap = dir / "attacks" / name;
            if (fs::exists(ap)) {
                std::ifstream in(ap);
                report << "  " << name << ":\n";
                std::string line;
                while (std::getline(in, line)) report << "    " << line << "\n";
            }
        }
        report << "\n";
    }

    if (!result.gaps.empty()) {
        report << "gaps\n----\n";
        for (const auto& g : result.gaps) report << "  " << g << "\n";
    }
    return result;
}

// ---------------------------------------------------------------------------
// CLI

namespace {

Config load_cli_config(const std::string& config_path,
                       const std::vector<std::string>& overrides) {
    Config cfg = config_path.empty() ? Config::parse_string("")
                                     : Config::parse_file(config_path);
    for (const auto& kv : overrides) {
        const auto eq = kv.find('=');
        const auto dot = kv.find('.');
        if (eq == std::string::npos || dot == std::string::npos || dot > eq)
            throw std::runtime_error("bad --set (expected section.key=value): " + kv);
        cfg.set(trim(kv.substr(0, dot)), trim(kv.substr(dot + 1, eq - dot - 1)),
                trim(kv.substr(eq + 1)));
    }
    return cfg;
}

FeatureExtractor load_psi(const ExperimentConfig& e, bool required) {
    if (e.extractor_dir.empty()) {
        if (required)
            throw std::runtime_error(
                "configuration error: [extractor] dir is required for this command");
        return FeatureExtractor();
    }
    return FeatureExtractor::load(e.extractor_dir);
}

int cmd_prepare_data(const Config& cfg, const std::string& mode, const std::string& dataset,
                     const std::string& from_dir, const std::string& mirror) {
    const fs::path cache = resolve_cache_dir(cfg);
    if (mode == "synthetic") {
        SyntheticSpec spec;
        spec.train_count = cfg.get_int("synthetic", "train_count", 2048);
        spec.test_count = cfg.get_int("synthetic", "test_count", 512);
        spec.height = cfg.get_int("synthetic", "height", 32);
        spec.width = cfg.get_int("synthetic", "width", 32);
        spec.classes = cfg.get_int("synthetic", "classes", 10);
        spec.seed = static_cast<uint64_t>(cfg.get_int("synthetic", "seed", 1));
        const std::string name = dataset.empty() ? "synthetic32" : dataset;
        generate_synthetic_dataset(cache, name, spec);
        std::printf("generated %s: %lld train / %lld test images (%lldx%lld) under %s\n",
                    name.c_str(), static_cast<long long>(spec.train_count),
                    static_cast<long long>(spec.test_count),
                    static_cast<long long>(spec.height), static_cast<long long>(spec.width),
                    cache.string().c_str());
        return 0;
    }
    if (mode == "from-dir") {
        if (dataset == "cifar10")
            prepare_cifar10_cache(cache, from_dir);
        else if (dataset == "stl10")
            prepare_stl10_cache(cache, from_dir, {"train", "test", "unlabeled"});
        else
            throw std::runtime_error("prepare-data: dataset must be cifar10 or stl10");
        std::printf("cached %s from %s\n", dataset.c_str(), from_dir.c_str());
        return 0;
    }
    if (mode == "fetch") {
        for (const std::string split : dataset == "cifar10"
                                           ? std::vector<std::string>{"train", "test"}
                                           : std::vector<std::string>{"train", "test", "unlabeled"})
            fetch_dataset(dataset, split, cache, mirror);
        std::printf("fetched %s from %s\n", dataset.c_str(), mirror.c_str());
        return 0;
    }
    throw std::runtime_error("prepare-data: unknown mode " + mode);
}

int cmd_pretrain(const Config& cfg) {
    const ExperimentConfig e = experiment_from_config(cfg);
    const PretrainConfig p = pretrain_from_config(cfg);
    if (e.extractor_dir.empty())
        throw std::runtime_error("configuration error: [extractor] dir is required");
    DatasetSplit train = load_dataset(e.dataset, e.train_split, e.cache_dir);
    DatasetSplit test = load_dataset(e.dataset, e.test_split, e.cache_dir);
    PretrainResult r = pretrain_feature_extractor(train, test, p, e.extractor_dir);
    std::printf("pretrained extractor saved to %s (test accuracy %.4f)\n",
                r.checkpoint_dir.string().c_str(), r.test_accuracy);
    return 0;
}

int cmd_train(const Config& cfg, const std::string& run_root) {
    const ExperimentConfig e = experiment_from_config(cfg);
    const fs::path run_dir = fs::path(run_root) / e.run_id;
    fs::create_directories(run_dir);
    cfg.write_file(run_dir / "config.cfg");

    RunManifest manifest = make_manifest(e.run_id, cfg);
    manifest.add_artifact("config", run_dir / "config.cfg");
    manifest.add_artifact("log", run_dir / "log.csv");
    manifest.add_artifact("checkpoint_best", run_dir / "checkpoints" / "best");
    manifest.add_artifact("checkpoint_final", run_dir / "checkpoints" / "final");
    manifest.save(run_dir / "manifest.json");

    DatasetSplit train = load_dataset(e.dataset, e.train_split, e.cache_dir);
    FeatureExtractor psi = load_psi(e, e.lambda_e > 0 || e.lambda_d > 0);
    fit(e, train, psi, run_dir);
    std::printf("run %s trained; artifacts in %s\n", e.run_id.c_str(),
                run_dir.string().c_str());
    return 0;
}

int cmd_evaluate(const Config& cfg, const std::string& run_dir_s, bool quantized) {
    const fs::path run_dir = run_dir_s;
    const Config run_cfg = Config::parse_file(run_dir / "config.cfg");
    const ExperimentConfig e = experiment_from_config(run_cfg);

    ModelBundle bundle = ModelBundle::load(run_dir / "checkpoints" / "best");
    DatasetSplit test = load_dataset(e.dataset, e.test_split, e.cache_dir);
    FeatureExtractor psi = load_psi(e, true);

    EvalTable table = evaluate(bundle, test, e.eval_snrs, e.eval_repeats, e.seed, psi, e.run_id,
                               e.eval_subset, quantized);
    const std::string suffix = quantized ? "_quantized" : "";
    write_metrics_csv(table, run_dir / ("metrics" + suffix + ".csv"));
    write_summary_csv(table, run_dir / ("summary" + suffix + ".csv"));

    const int64_t g = std::min<int64_t>(4, test.count());
    export_sample_grids(bundle, test.head(g), e.eval_snrs, e.seed, run_dir / "grids");

    RunManifest manifest = RunManifest::load(run_dir / "manifest.json");
    manifest.add_artifact("metrics" + suffix, run_dir / ("metrics" + suffix + ".csv"));
    manifest.add_artifact("summary" + suffix, run_dir / ("summary" + suffix + ".csv"));
    manifest.save(run_dir / "manifest.json");

    for (const auto& s : table.summary)
        std::printf("snr %5.1f dB: psnr %.3f  ssim %.4f  psnr(x,y) %.3f\n", s.snr_db,
                    s.mean_psnr, s.mean_ssim, s.mean_psnr_xy);
    return 0;
}

int cmd_encrypt(const std::string& bundle_dir, const std::string& in, const std::string& out) {
    ModelBundle bundle = ModelBundle::load(bundle_dir);
    torch::NoGradGuard ng;
    bundle.eval();
    torch::Tensor x = import_image(in);
    export_image(encrypt_forward(bundle, x), out);
    std::printf("encrypted %s -> %s\n", in.c_str(), out.c_str());
    return 0;
}

int cmd_transmit(const std::string& bundle_dir, const std::string& in, const std::string& out,
                 double snr_db, uint64_t seed) {
    ModelBundle bundle = ModelBundle::load(bundle_dir);
    torch::NoGradGuard ng;
    bundle.eval();
    torch::Tensor y = import_image(in);
    SymbolBlock z = encode_forward(bundle, y);
    torch::Generator gen = at::detail::createCPUGenerator(seed);
    SymbolBlock zhat = awgn_apply(z, snr_to_sigma2(snr_db), gen);
    torch::Tensor yhat = decode_forward(bundle, zhat, y.size(2), y.size(3));
    export_image(yhat, out);
    std::printf("transmitted %s -> %s at %.1f dB\n", in.c_str(), out.c_str(), snr_db);
    return 0;
}

int cmd_decrypt(const std::string& bundle_dir, const std::string& in, const std::string& out) {
    ModelBundle bundle = ModelBundle::load(bundle_dir);
    torch::NoGradGuard ng;
    bundle.eval();
    torch::Tensor yhat = import_image(in);
    export_image(decrypt_forward(bundle, yhat), out);
    std::printf("decrypted %s -> %s\n", in.c_str(), out.c_str());
    return 0;
}

int cmd_attack(const Config& cfg, const std::string& run_dir_s, const std::string& method,
               const std::string& target, double snr_db) {
    const fs::path run_dir = run_dir_s;
    const Config run_cfg = Config::parse_file(run_dir / "config.cfg");
    const ExperimentConfig e = experiment_from_config(run_cfg);

    ModelBundle bundle = ModelBundle::load(run_dir / "checkpoints" / "best");
    bundle.eval();
    DatasetSplit test = load_dataset(e.dataset, e.test_split, e.cache_dir);

    const int64_t subset = cfg.get_int("attack", "eval_images", 256);
    torch::Tensor plains = test.head(std::min<int64_t>(subset, test.count()));

    torch::Generator gen = at::detail::createCPUGenerator(e.seed ^ 0xa77acc);
    torch::NoGradGuard ng;
    torch::Tensor targets;
    if (target == "encrypted") {
        targets = encrypt_forward(bundle, plains);
    } else if (target == "decoded") {
        TransmissionResult tr = transmit_once(bundle, plains, snr_db, gen, true);
        targets = tr.yhat;
    } else {
        throw std::runtime_error("attack: target must be encrypted or decoded");
    }

    AttackParams params;
    params.target = target;
    params.out_dir = run_dir / "attacks";

    if (method == "gan") {
        DatasetSplit train = load_dataset(e.dataset, e.train_split, e.cache_dir);
        GanAttackConfig gcfg = gan_attack_from_config(cfg);
        const int64_t pool = cfg.get_int("attack", "gan_images", 5000);
        torch::Tensor attack_pool =
            train.images.narrow(0, 0, std::min<int64_t>(pool, train.count()));
        CipherFn oracle = [&bundle, target, snr_db, &gen](const torch::Tensor& x) {
            if (target == "encrypted") return encrypt_forward(bundle, x);
            return transmit_once(bundle, x, snr_db, gen, true).yhat;
        };
        GanAttackResult gr = gan_attack_train(oracle, attack_pool, gcfg);
        params.generator = gr.generator;
        for (const auto& w : gr.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
    }

    AttackReport report = run_attack(method, targets, plains, params);
    fs::create_directories(run_dir / "attacks");
    write_attack_csv(report, run_dir / "attacks" / ("attack_" + method + ".csv"));
    write_attack_summary(report, run_dir / "attacks" / ("attack_" + method + "_summary.txt"));
    std::printf("%s attack on %s images: mean psnr %.3f dB, mean ssim %.4f\n", method.c_str(),
                target.c_str(), report.mean_psnr, report.mean_ssim);
    return 0;
}

int cmd_report(const std::vector<std::string>& run_dirs, const std::string& out_dir) {
    std::vector<fs::path> dirs(run_dirs.begin(), run_dirs.end());
    ReportResult r = emit_report(dirs, out_dir);
    std::printf("report written to %s\n", r.report_txt.string().c_str());
    for (const auto& g : r.gaps) std::printf("gap: %s\n", g.c_str());
    return 0;
}

}  // namespace

int run_cli(int argc, char** argv) {
    CLI::App app{"DJESCC: learned image encryption with deep joint source-channel coding"};
    app.require_subcommand(1);
    app.fallthrough();  // global --config/--set may follow the subcommand

    std::string config_path;
    std::vector<std::string> overrides;
    app.add_option("--config", config_path, "configuration file")->envname("DJESCC_CONFIG");
    app.add_option("--set", overrides, "override a config value: section.key=value");

    // prepare-data
    auto* prep = app.add_subcommand("prepare-data", "build the dataset cache");
    std::string prep_mode = "synthetic", prep_dataset, prep_from, prep_mirror;
    prep->add_option("--mode", prep_mode, "synthetic | from-dir | fetch");
    prep->add_option("--dataset", prep_dataset, "dataset id");
    prep->add_option("--from-dir", prep_from, "directory with extracted archive files");
    prep->add_option("--mirror", prep_mirror, "base URL serving the .bin files");

    auto* pre = app.add_subcommand("pretrain-features", "pretrain the frozen feature extractor");

    auto* train = app.add_subcommand("train", "train a DJESCC/DJSCC bundle");
    std::string run_root = "runs";
    train->add_option("--run-root", run_root, "directory that holds run directories");

    auto* eval = app.add_subcommand("evaluate", "evaluate a trained run");
    std::string eval_run;
    bool eval_quantized = false;
    eval->add_option("--run-dir", eval_run, "run directory")->required();
    eval->add_flag("--quantized", eval_quantized, "quantize images at the trust boundaries");

    auto* enc = app.add_subcommand("encrypt", "owner side: plain image file -> cipher image file");
    std::string bundle_dir, file_in, file_out;
    enc->add_option("--bundle", bundle_dir, "bundle or encryption sub-bundle directory")->required();
    enc->add_option("--in", file_in, "input image (PPM)")->required();
    enc->add_option("--out", file_out, "output image (PPM)")->required();

    auto* tx = app.add_subcommand("transmit", "provider side: cipher file -> decoded file");
    std::string tx_bundle, tx_in, tx_out;
    double tx_snr = 10.0;
    uint64_t tx_seed = 1;
    tx->add_option("--bundle", tx_bundle, "bundle or codec sub-bundle directory")->required();
    tx->add_option("--in", tx_in, "input image (PPM)")->required();
    tx->add_option("--out", tx_out, "output image (PPM)")->required();
    tx->add_option("--snr-db", tx_snr, "channel SNR in dB");
    tx->add_option("--seed", tx_seed, "noise seed");

    auto* dec = app.add_subcommand("decrypt", "recipient side: decoded file -> plain estimate");
    std::string dec_bundle, dec_in, dec_out;
    dec->add_option("--bundle", dec_bundle, "bundle or decryption sub-bundle directory")->required();
    dec->add_option("--in", dec_in, "input image (PPM)")->required();
    dec->add_option("--out", dec_out, "output image (PPM)")->required();

    auto* atk = app.add_subcommand("attack", "run a ciphertext-only attack against a run");
    std::string atk_run, atk_method = "fr", atk_target = "encrypted";
    double atk_snr = 10.0;
    atk->add_option("--run-dir", atk_run, "run directory")->required();
    atk->add_option("--method", atk_method, "fr | gan");
    atk->add_option("--target", atk_target, "encrypted | decoded");
    atk->add_option("--snr-db", atk_snr, "channel SNR for decoded targets");

    auto* rep = app.add_subcommand("report", "aggregate curves and attack tables");
    std::vector<std::string> rep_runs;
    std::string rep_out = "report";
    rep->add_option("--run-dir", rep_runs, "run directories (repeatable)")->required();
    rep->add_option("--out", rep_out, "output directory");

    auto* refc = app.add_subcommand("config-reference", "print the configuration reference");

    try {
        app.parse(argc, argv);
        Config cfg = load_cli_config(config_path, overrides);
        if (prep->parsed()) return cmd_prepare_data(cfg, prep_mode, prep_dataset, prep_from, prep_mirror);
        if (pre->parsed()) return cmd_pretrain(cfg);
        if (train->parsed()) return cmd_train(cfg, run_root);
        if (eval->parsed()) return cmd_evaluate(cfg, eval_run, eval_quantized);
        if (enc->parsed()) return cmd_encrypt(bundle_dir, file_in, file_out);
        if (tx->parsed()) return cmd_transmit(tx_bundle, tx_in, tx_out, tx_snr, tx_seed);
        if (dec->parsed()) return cmd_decrypt(dec_bundle, dec_in, dec_out);
        if (atk->parsed()) return cmd_attack(cfg, atk_run, atk_method, atk_target, atk_snr);
        if (rep->parsed()) return cmd_report(rep_runs, rep_out);
        if (refc->parsed()) {
            std::cout << config_reference();
            return 0;
        }
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

}  // namespace djescc
