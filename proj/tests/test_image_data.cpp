#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "djescc/image_data.hpp"
#include "doctest.h"

namespace fs = std::filesystem;
using namespace djescc;

namespace {

fs::path temp_dir(const std::string& tag) {
    fs::path dir = fs::temp_directory_path() / ("djescc_test_" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

// builds a cifar10-bin cache split out of raw records
void write_fixture_split(const fs::path& cache, const std::string& dataset,
                         const std::string& split, const std::vector<uint8_t>& records,
                         int64_t count, int64_t h, int64_t w,
                         const std::string& format = "cifar10-bin",
                         const std::string& filename = "records.bin") {
    const fs::path dir = cache / dataset / split;
    fs::create_directories(dir);
    {
        std::ofstream out(dir / filename, std::ios::binary | std::ios::trunc);
        out.write(reinterpret_cast<const char*>(records.data()),
                  static_cast<std::streamsize>(records.size()));
    }
    SplitManifest m;
    m.dataset = dataset;
    m.split = split;
    m.format = format;
    m.count = count;
    m.channels = 3;
    m.height = h;
    m.width = w;
    m.files.push_back({filename, file_crc32(dir / filename),
                       static_cast<uint64_t>(fs::file_size(dir / filename))});
    write_manifest(dir, m);
}

}  // namespace

TEST_CASE("normalize maps 8-bit endpoints and interior values") {
    torch::Tensor raw = torch::tensor({{255, 0, 51}}, torch::kUInt8).view({1, 1, 1, 3});
    torch::Tensor img = normalize(raw);
    CHECK(img[0][0][0][0].item<float>() == doctest::Approx(1.0));
    CHECK(img[0][0][0][1].item<float>() == doctest::Approx(0.0));
    CHECK(img[0][0][0][2].item<float>() == doctest::Approx(0.2));
}

TEST_CASE("denormalize rounds half up and clamps") {
    torch::Tensor img = torch::tensor({1.0f, 0.5f, 0.0f}).view({1, 1, 1, 3});
    torch::Tensor raw = denormalize(img);
    CHECK(raw[0][0][0][0].item<int>() == 255);
    CHECK(raw[0][0][0][1].item<int>() == 128);  // round(127.5) half-up
    CHECK(raw[0][0][0][2].item<int>() == 0);
}

TEST_CASE("normalize/denormalize round-trips all 256 levels exactly") {
    torch::Tensor raw = torch::arange(256, torch::kUInt8).view({1, 1, 16, 16});
    torch::Tensor back = denormalize(normalize(raw));
    CHECK(back.equal(raw));
}

TEST_CASE("denormalize rejects out-of-range input") {
    torch::Tensor img = torch::tensor({1.5f}).view({1, 1, 1, 1});
    CHECK_THROWS(denormalize(img));
}

TEST_CASE("ppm export/import is lossless on quantized images") {
    const fs::path dir = temp_dir("ppm");
    torch::manual_seed(3);
    torch::Tensor raw = torch::randint(0, 256, {3, 32, 32}, torch::kUInt8);
    torch::Tensor img = normalize(raw);

    export_image(img, dir / "img.ppm");
    torch::Tensor round = import_image(dir / "img.ppm");
    CHECK(round.sizes() == torch::IntArrayRef({1, 3, 32, 32}));
    CHECK(denormalize(round.squeeze(0)).equal(raw));
}

TEST_CASE("export of a non-quantized image quantizes first") {
    const fs::path dir = temp_dir("ppm_q");
    torch::Tensor img = torch::full({3, 8, 8}, 0.4321f);
    export_image(img, dir / "img.ppm");
    torch::Tensor round = import_image(dir / "img.ppm").squeeze(0);
    CHECK(denormalize(round).equal(denormalize(img)));
}

TEST_CASE("read_ppm rejects corrupt files") {
    const fs::path dir = temp_dir("ppm_bad");
    {
        std::ofstream out(dir / "bad.ppm", std::ios::binary);
        out << "P6\n4 4\n255\nshort";
    }
    CHECK_THROWS(read_ppm(dir / "bad.ppm"));
    CHECK_THROWS(read_ppm(dir / "missing.ppm"));
}

TEST_CASE("cifar record parsing recovers planes, labels and ordering") {
    const int64_t h = 4, w = 4;
    std::vector<uint8_t> records;
    for (int img = 0; img < 2; ++img) {
        records.push_back(static_cast<uint8_t>(7 + img));  // label
        for (int c = 0; c < 3; ++c)
            for (int i = 0; i < h * w; ++i)
                records.push_back(static_cast<uint8_t>(img * 100 + c * 16 + i));
    }
    const fs::path cache = temp_dir("cifar_fixture");
    write_fixture_split(cache, "fixture", "test", records, 2, h, w);

    DatasetSplit split = load_dataset("fixture", "test", cache);
    CHECK(split.count() == 2);
    CHECK(split.images.sizes() == torch::IntArrayRef({2, 3, 4, 4}));
    CHECK(split.has_labels());
    CHECK(split.labels[0].item<int64_t>() == 7);
    CHECK(split.labels[1].item<int64_t>() == 8);
    // image 1, channel 2, row-major position 5
    CHECK(split.images[1][2][1][1].item<int>() == 100 + 2 * 16 + 5);

    DatasetSplit again = load_dataset("fixture", "test", cache);
    CHECK(again.images.equal(split.images));  // deterministic ordering
}

TEST_CASE("stl10 images are stored column-major and load transposed") {
    const int64_t h = 96, w = 96;
    std::vector<uint8_t> bytes;
    for (int c = 0; c < 3; ++c)
        for (int col = 0; col < w; ++col)
            for (int row = 0; row < h; ++row)
                bytes.push_back(static_cast<uint8_t>((c * 31 + row * 7 + col * 3) & 0xFF));
    std::vector<uint8_t> labels = {3};  // stl labels are 1-based on disk

    const fs::path cache = temp_dir("stl_fixture");
    const fs::path dir = cache / "stlfix" / "test";
    fs::create_directories(dir);
    {
        std::ofstream out(dir / "test_X.bin", std::ios::binary);
        out.write(reinterpret_cast<const char*>(bytes.data()),
                  static_cast<std::streamsize>(bytes.size()));
    }
    {
        std::ofstream out(dir / "test_y.bin", std::ios::binary);
        out.write(reinterpret_cast<const char*>(labels.data()), 1);
    }
    SplitManifest m;
    m.dataset = "stlfix";
    m.split = "test";
    m.format = "stl10-bin";
    m.count = 1;
    m.channels = 3;
    m.height = h;
    m.width = w;
    m.files.push_back({"test_X.bin", file_crc32(dir / "test_X.bin"),
                       static_cast<uint64_t>(fs::file_size(dir / "test_X.bin"))});
    m.files.push_back({"test_y.bin", file_crc32(dir / "test_y.bin"),
                       static_cast<uint64_t>(fs::file_size(dir / "test_y.bin"))});
    write_manifest(dir, m);

    DatasetSplit split = load_dataset("stlfix", "test", cache);
    CHECK(split.images.sizes() == torch::IntArrayRef({1, 3, 96, 96}));
    CHECK(split.labels[0].item<int64_t>() == 2);
    CHECK(split.images[0][1][10][20].item<int>() == ((1 * 31 + 10 * 7 + 20 * 3) & 0xFF));
}

TEST_CASE("checksum mismatch raises an integrity error") {
    std::vector<uint8_t> records(1 + 3 * 16, 42);
    const fs::path cache = temp_dir("corrupt");
    write_fixture_split(cache, "fixture", "test", records, 1, 4, 4);
    {  // corrupt a byte after the manifest was written
        std::fstream f(cache / "fixture" / "test" / "records.bin",
                       std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(10);
        f.put(static_cast<char>(7));
    }
    CHECK_THROWS_WITH_AS(load_dataset("fixture", "test", cache),
                         doctest::Contains("integrity error"), std::runtime_error);
}

TEST_CASE("missing cache without a reachable source is a fetch error") {
    const fs::path cache = temp_dir("empty_cache");
    CHECK_THROWS_WITH_AS(load_dataset("cifar10", "test", cache),
                         doctest::Contains("fetch error"), std::runtime_error);
}

TEST_CASE("fetching from an unreachable mirror is a fetch error") {
    const fs::path cache = temp_dir("fetch_fail");
    CHECK_THROWS_WITH_AS(fetch_dataset("cifar10", "test", cache, "http://127.0.0.1:9/none"),
                         doctest::Contains("fetch error"), std::runtime_error);
}

TEST_CASE("synthetic corpus is deterministic, labeled and in range") {
    const fs::path cache_a = temp_dir("syn_a");
    const fs::path cache_b = temp_dir("syn_b");
    SyntheticSpec spec;
    spec.train_count = 24;
    spec.test_count = 8;
    spec.seed = 11;
    generate_synthetic_dataset(cache_a, "syn", spec);
    generate_synthetic_dataset(cache_b, "syn", spec);

    CHECK(file_crc32(cache_a / "syn" / "train" / "train_records.bin") ==
          file_crc32(cache_b / "syn" / "train" / "train_records.bin"));

    DatasetSplit train = load_dataset("syn", "train", cache_a);
    CHECK(train.count() == 24);
    CHECK(train.has_labels());
    CHECK(train.labels.min().item<int64_t>() >= 0);
    CHECK(train.labels.max().item<int64_t>() < 10);
    torch::Tensor x = train.head();
    CHECK(x.min().item<float>() >= 0.0f);
    CHECK(x.max().item<float>() <= 1.0f);

    DatasetSplit test = load_dataset("syn", "test", cache_a);
    CHECK(test.count() == 8);
}

TEST_CASE("seeded permutations are bijective and seed-sensitive") {
    auto p1 = seeded_permutation(512, 5);
    auto p2 = seeded_permutation(512, 5);
    auto p3 = seeded_permutation(512, 6);
    CHECK(p1 == p2);
    CHECK(p1 != p3);
    std::set<int64_t> seen(p1.begin(), p1.end());
    CHECK(seen.size() == 512);
    CHECK(*seen.begin() == 0);
    CHECK(*seen.rbegin() == 511);
}

TEST_CASE("batch iterator covers every image once per epoch, deterministically") {
    torch::Tensor images = torch::arange(20 * 3 * 4 * 4, torch::kInt32)
                               .remainder(251)
                               .to(torch::kUInt8)
                               .view({20, 3, 4, 4});
    BatchIterator it(images, 8, 99);
    it.start_epoch(1);
    std::vector<torch::Tensor> batches;
    torch::Tensor b;
    int64_t total = 0;
    while (it.next(b)) {
        total += b.size(0);
        batches.push_back(b);
        CHECK(b.max().item<float>() <= 1.0f);
    }
    CHECK(total == 20);
    CHECK(batches.size() == 3);  // 8 + 8 + 4

    BatchIterator it2(images, 8, 99);
    it2.start_epoch(1);
    torch::Tensor b2;
    it2.next(b2);
    CHECK(b2.equal(batches[0]));

    it2.start_epoch(2);
    it2.next(b2);
    CHECK_FALSE(b2.equal(batches[0]));  // a fresh permutation per epoch
}

TEST_CASE("image batch contracts reject bad shapes and ranges") {
    CHECK_THROWS(check_image_batch(torch::rand({3, 4, 4}), "t"));
    CHECK_THROWS(check_image_batch(torch::rand({1, 3, 4, 4}) + 1.0, "t"));
    CHECK_THROWS(check_codec_dims(torch::rand({1, 3, 6, 8}), "t"));
    CHECK_NOTHROW(check_codec_dims(torch::rand({1, 3, 8, 8}), "t"));
    ImageBatch batch = ImageBatch::wrap(torch::rand({2, 3, 8, 8}));
    CHECK(batch.pixels_per_image() == 3 * 8 * 8);
}
