#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace djescc {

// Images travel through the pipeline as float32 NCHW tensors with every
// value in [0,1]. ImageBatch is the checked carrier used at module
// boundaries; network internals pass the raw tensor around.
struct ImageBatch {
    torch::Tensor values;  // (N, C, H, W) float32, [0,1]

    int64_t batch() const { return values.size(0); }
    int64_t channels() const { return values.size(1); }
    int64_t height() const { return values.size(2); }
    int64_t width() const { return values.size(3); }
    int64_t pixels_per_image() const { return channels() * height() * width(); }

    // Validates dtype, rank and the [0,1] range.
    static ImageBatch wrap(torch::Tensor v);
};

// Throws when t is not a valid image batch (float32, 4-d, values in [0,1]).
void check_image_batch(const torch::Tensor& t, const char* what);
// Additionally requires h and w divisible by 4 (encoder downsampling).
void check_codec_dims(const torch::Tensor& t, const char* what);

// [0,255] uint8 -> [0,1] float32
torch::Tensor normalize(const torch::Tensor& raw);
// [0,1] float32 -> uint8, round-half-up then clamp
torch::Tensor denormalize(const torch::Tensor& img);

// Lossless 8-bit RGB interchange: binary PPM (P6, maxval 255).
void write_ppm(const std::filesystem::path& path, const torch::Tensor& u8chw);
torch::Tensor read_ppm(const std::filesystem::path& path);  // (3,H,W) uint8

// Quantizes via denormalize, then writes PPM. Accepts (C,H,W) or (1,C,H,W).
void export_image(const torch::Tensor& img01, const std::filesystem::path& path);
// Returns (1,3,H,W) float32 in [0,1].
torch::Tensor import_image(const std::filesystem::path& path);

struct DatasetSplit {
    std::string dataset;
    std::string split;
    torch::Tensor images;  // (N, C, H, W) uint8
    torch::Tensor labels;  // (N) int64, undefined when the source has none

    int64_t count() const { return images.size(0); }
    bool has_labels() const { return labels.defined(); }
    // First `n` images as a normalized float batch (all when n < 0).
    torch::Tensor head(int64_t n = -1) const;
};

struct ManifestFile {
    std::string name;
    uint32_t crc32 = 0;
    uint64_t bytes = 0;
};

struct SplitManifest {
    std::string dataset;
    std::string split;
    std::string format;      // cifar10-bin | stl10-bin
    std::string source_url;  // empty for locally generated data
    int64_t count = 0;
    int64_t channels = 0;
    int64_t height = 0;
    int64_t width = 0;
    std::vector<ManifestFile> files;
};

SplitManifest read_manifest(const std::filesystem::path& split_dir);
void write_manifest(const std::filesystem::path& split_dir, const SplitManifest& m);

uint32_t file_crc32(const std::filesystem::path& path);

// Loads a cached split from <cache>/<name>/<split>/. Verifies the manifest
// CRCs (integrity error on mismatch). When the cache is absent, attempts a
// fetch from the recorded source and reports a fetch error on failure.
// Ordering is manifest file order and is byte-deterministic.
DatasetSplit load_dataset(const std::string& name, const std::string& split,
                          const std::filesystem::path& cache_dir);

// Builds the cache layout out of an extracted official archive directory
// (the .bin files of the binary distributions).
void prepare_cifar10_cache(const std::filesystem::path& cache_dir,
                           const std::filesystem::path& source_dir);
void prepare_stl10_cache(const std::filesystem::path& cache_dir,
                         const std::filesystem::path& source_dir,
                         const std::vector<std::string>& splits);

// Downloads the per-split .bin files from <base_url>/<file> into the cache.
void fetch_dataset(const std::string& name, const std::string& split,
                   const std::filesystem::path& cache_dir, const std::string& base_url);

struct SyntheticSpec {
    int64_t train_count = 2048;
    int64_t test_count = 512;
    int64_t height = 32;
    int64_t width = 32;
    int64_t classes = 10;
    uint64_t seed = 1;
};

// Procedural natural-image-like corpus (smooth gradients plus colored
// shapes; the class id fixes shape type and count) written in the CIFAR-10
// binary record layout under <cache>/<name>/{train,test}/.
void generate_synthetic_dataset(const std::filesystem::path& cache_dir,
                                const std::string& name, const SyntheticSpec& spec);

// Seeded Fisher-Yates permutation of [0, n). Shared by the keyed-shuffle
// cipher and the shuffle-baseline pipeline so both derive the same key.
std::vector<int64_t> seeded_permutation(int64_t n, uint64_t seed);

// Deterministic single-consumer batching: the image order is a fresh
// permutation per epoch, reproducible from (seed, epoch).
class BatchIterator {
public:
    BatchIterator(torch::Tensor images_u8, int64_t batch_size, uint64_t seed);

    void start_epoch(int64_t epoch);
    bool next(torch::Tensor& out);  // normalized float batch
    int64_t batches_per_epoch() const;

private:
    torch::Tensor images_;
    int64_t batch_size_;
    uint64_t seed_;
    std::vector<int64_t> order_;
    int64_t cursor_ = 0;
};

}  // namespace djescc
