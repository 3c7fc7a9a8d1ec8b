#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "djescc/attacks.hpp"
#include "djescc/models.hpp"
#include "djescc/training.hpp"

namespace djescc {

// Flat key-value configuration with [section] headers. Values stay strings
// until read; the canonical text (sorted sections and keys) feeds the hash
// that binds run artifacts.
class Config {
public:
    static Config parse_string(const std::string& text);
    static Config parse_file(const std::filesystem::path& path);

    bool has(const std::string& section, const std::string& key) const;
    void set(const std::string& section, const std::string& key, const std::string& value);

    std::string get(const std::string& section, const std::string& key,
                    const std::string& fallback) const;
    // Throws on a missing required key.
    std::string require(const std::string& section, const std::string& key) const;
    int64_t get_int(const std::string& section, const std::string& key, int64_t fallback) const;
    double get_double(const std::string& section, const std::string& key, double fallback) const;
    bool get_bool(const std::string& section, const std::string& key, bool fallback) const;
    std::vector<double> get_doubles(const std::string& section, const std::string& key,
                                    const std::vector<double>& fallback) const;

    std::string canonical_text() const;
    uint64_t hash() const;        // FNV-1a 64 over canonical_text
    std::string hash_hex() const;
    void write_file(const std::filesystem::path& path) const;

    const std::map<std::string, std::map<std::string, std::string>>& sections() const {
        return sections_;
    }

private:
    std::map<std::string, std::map<std::string, std::string>> sections_;
};

// Resolves the dataset cache root: config [data] cache_dir, overridable by
// the DJESCC_CACHE_DIR environment variable.
std::filesystem::path resolve_cache_dir(const Config& cfg);

ExperimentConfig experiment_from_config(const Config& cfg);
PretrainConfig pretrain_from_config(const Config& cfg);
GanAttackConfig gan_attack_from_config(const Config& cfg);

// Generated reference page documenting every config key and its default.
std::string config_reference();

struct RunManifest {
    std::string run_id;
    std::string config_hash;
    std::string source_rev;
    std::string created_utc;
    std::vector<std::pair<std::string, std::string>> artifacts;  // kind, path

    void add_artifact(const std::string& kind, const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;
    static RunManifest load(const std::filesystem::path& path);
};

RunManifest make_manifest(const std::string& run_id, const Config& cfg);

// Report emission over finished run directories: PSNR-vs-SNR curve data per
// run plus attack summaries. Numbers are copied from the CSVs verbatim;
// anything missing is flagged as a gap instead of being filled in.
struct ReportResult {
    std::filesystem::path curves_csv;
    std::filesystem::path report_txt;
    std::vector<std::string> gaps;
};
ReportResult emit_report(const std::vector<std::filesystem::path>& run_dirs,
                         const std::filesystem::path& out_dir);

// CLI entry (subcommands: prepare-data, pretrain-features, train, evaluate,
// encrypt, transmit, decrypt, attack, report). Returns the process exit code.
int run_cli(int argc, char** argv);

}  // namespace djescc
