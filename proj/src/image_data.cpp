#include "djescc/image_data.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "httplib.h"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace djescc {

namespace {

uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

std::vector<char> read_file_bytes(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file: " + path.string());
    in.seekg(0, std::ios::end);
    std::vector<char> buf(static_cast<size_t>(in.tellg()));
    in.seekg(0);
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!in) throw std::runtime_error("short read: " + path.string());
    return buf;
}

void write_file_bytes(const fs::path& path, const char* data, size_t size) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("unwritable path: " + path.string());
    out.write(data, static_cast<std::streamsize>(size));
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace

ImageBatch ImageBatch::wrap(torch::Tensor v) {
    check_image_batch(v, "ImageBatch");
    return ImageBatch{std::move(v)};
}

void check_image_batch(const torch::Tensor& t, const char* what) {
    TORCH_CHECK(t.defined(), what, ": undefined tensor");
    TORCH_CHECK(t.dim() == 4, what, ": expected (N,C,H,W), got dim ", t.dim());
    TORCH_CHECK(t.dtype() == torch::kFloat32 || t.dtype() == torch::kFloat64,
                what, ": expected floating point, got ", t.dtype());
    if (t.numel() > 0) {
        const double lo = t.min().item<double>();
        const double hi = t.max().item<double>();
        TORCH_CHECK(lo >= 0.0 && hi <= 1.0, what, ": values out of [0,1]: min=", lo,
                    " max=", hi);
    }
}

void check_codec_dims(const torch::Tensor& t, const char* what) {
    TORCH_CHECK(t.dim() == 4, what, ": expected (N,C,H,W)");
    TORCH_CHECK(t.size(2) % 4 == 0 && t.size(3) % 4 == 0, what,
                ": h and w must be divisible by 4, got ", t.size(2), "x", t.size(3));
}

torch::Tensor normalize(const torch::Tensor& raw) {
    TORCH_CHECK(raw.dtype() == torch::kUInt8, "normalize: expected uint8 input");
    return raw.to(torch::kFloat32).div_(255.0f);
}

torch::Tensor denormalize(const torch::Tensor& img) {
    TORCH_CHECK(img.is_floating_point(), "denormalize: expected float input");
    if (img.numel() > 0) {
        const double lo = img.min().item<double>();
        const double hi = img.max().item<double>();
        TORCH_CHECK(lo >= 0.0 && hi <= 1.0,
                    "denormalize: values out of [0,1]: min=", lo, " max=", hi);
    }
    // round-half-up, then clamp
    return (img * 255.0 + 0.5).floor().clamp(0.0, 255.0).to(torch::kUInt8);
}

void write_ppm(const fs::path& path, const torch::Tensor& u8chw) {
    torch::Tensor img = u8chw;
    if (img.dim() == 4) {
        TORCH_CHECK(img.size(0) == 1, "write_ppm: expected a single image");
        img = img.squeeze(0);
    }
    TORCH_CHECK(img.dim() == 3 && img.size(0) == 3, "write_ppm: expected (3,H,W)");
    TORCH_CHECK(img.dtype() == torch::kUInt8, "write_ppm: expected uint8");
    const int64_t h = img.size(1), w = img.size(2);
    torch::Tensor hwc = img.permute({1, 2, 0}).contiguous();

    std::ostringstream header;
    header << "P6\n" << w << " " << h << "\n255\n";
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("unwritable path: " + path.string());
    out << header.str();
    out.write(reinterpret_cast<const char*>(hwc.data_ptr<uint8_t>()), 3 * h * w);
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

torch::Tensor read_ppm(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open image: " + path.string());

    auto next_token = [&in, &path]() {
        std::string tok;
        while (in) {
            int c = in.get();
            if (c == '#') {  // comment to end of line
                while (in && in.get() != '\n') {
                }
                continue;
            }
            if (std::isspace(c)) {
                if (!tok.empty()) return tok;
                continue;
            }
            if (c == EOF) break;
            tok.push_back(static_cast<char>(c));
        }
        if (tok.empty()) throw std::runtime_error("corrupt image file: " + path.string());
        return tok;
    };

    if (next_token() != "P6") throw std::runtime_error("corrupt image file (not P6): " + path.string());
    const int64_t w = std::stoll(next_token());
    const int64_t h = std::stoll(next_token());
    const int64_t maxval = std::stoll(next_token());
    if (w <= 0 || h <= 0 || maxval != 255)
        throw std::runtime_error("corrupt image file (bad header): " + path.string());

    std::vector<uint8_t> buf(static_cast<size_t>(3 * h * w));
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!in) throw std::runtime_error("corrupt image file (truncated): " + path.string());

    torch::Tensor hwc = torch::from_blob(buf.data(), {h, w, 3}, torch::kUInt8).clone();
    return hwc.permute({2, 0, 1}).contiguous();
}

void export_image(const torch::Tensor& img01, const fs::path& path) {
    torch::Tensor img = img01;
    if (img.dim() == 4) {
        TORCH_CHECK(img.size(0) == 1, "export_image: expected a single image");
        img = img.squeeze(0);
    }
    TORCH_CHECK(img.dim() == 3, "export_image: expected (C,H,W)");
    write_ppm(path, denormalize(img));
}

torch::Tensor import_image(const fs::path& path) {
    return normalize(read_ppm(path)).unsqueeze(0);
}

torch::Tensor DatasetSplit::head(int64_t n) const {
    if (n < 0 || n > count()) n = count();
    return normalize(images.narrow(0, 0, n));
}

uint32_t file_crc32(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file: " + path.string());
    uLong crc = crc32(0L, Z_NULL, 0);
    std::vector<unsigned char> buf(1 << 16);
    while (in) {
        in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
        const auto got = in.gcount();
        if (got > 0) crc = crc32(crc, buf.data(), static_cast<uInt>(got));
    }
    return static_cast<uint32_t>(crc);
}

SplitManifest read_manifest(const fs::path& split_dir) {
    const fs::path p = split_dir / "manifest.json";
    std::ifstream in(p);
    if (!in) throw std::runtime_error("missing manifest: " + p.string());
    json j;
    in >> j;
    SplitManifest m;
    m.dataset = j.at("dataset").get<std::string>();
    m.split = j.at("split").get<std::string>();
    m.format = j.at("format").get<std::string>();
    m.source_url = j.value("source_url", "");
    m.count = j.at("count").get<int64_t>();
    m.channels = j.at("channels").get<int64_t>();
    m.height = j.at("height").get<int64_t>();
    m.width = j.at("width").get<int64_t>();
    for (const auto& f : j.at("files")) {
        m.files.push_back({f.at("name").get<std::string>(), f.at("crc32").get<uint32_t>(),
                           f.at("bytes").get<uint64_t>()});
    }
    return m;
}

void write_manifest(const fs::path& split_dir, const SplitManifest& m) {
    json files = json::array();
    for (const auto& f : m.files)
        files.push_back({{"name", f.name}, {"crc32", f.crc32}, {"bytes", f.bytes}});
    json j = {{"dataset", m.dataset}, {"split", m.split},       {"format", m.format},
              {"source_url", m.source_url}, {"count", m.count}, {"channels", m.channels},
              {"height", m.height},   {"width", m.width},       {"files", files}};
    std::ofstream out(split_dir / "manifest.json", std::ios::trunc);
    if (!out) throw std::runtime_error("unwritable path: " + (split_dir / "manifest.json").string());
    out << j.dump(2) << "\n";
}

namespace {

// CIFAR-10 binary records: 1 label byte, then the R, G, B planes row-major.
void parse_cifar_records(const std::vector<char>& bytes, int64_t h, int64_t w,
                         std::vector<uint8_t>& images, std::vector<int64_t>& labels) {
    const size_t record = 1 + static_cast<size_t>(3 * h * w);
    if (bytes.size() % record != 0)
        throw std::runtime_error("integrity error: truncated cifar record file");
    const size_t n = bytes.size() / record;
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    for (size_t i = 0; i < n; ++i) {
        labels.push_back(p[i * record]);
        const unsigned char* img = p + i * record + 1;
        images.insert(images.end(), img, img + 3 * h * w);
    }
}

// STL-10 planes are stored column-major; transpose to row-major on load.
void parse_stl_images(const std::vector<char>& bytes, int64_t h, int64_t w,
                      std::vector<uint8_t>& images) {
    const size_t per_image = static_cast<size_t>(3 * h * w);
    if (bytes.size() % per_image != 0)
        throw std::runtime_error("integrity error: truncated stl image file");
    const size_t n = bytes.size() / per_image;
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    std::vector<uint8_t> img(per_image);
    for (size_t i = 0; i < n; ++i) {
        const unsigned char* src = p + i * per_image;
        for (int64_t c = 0; c < 3; ++c)
            for (int64_t col = 0; col < w; ++col)
                for (int64_t row = 0; row < h; ++row)
                    img[static_cast<size_t>(c * h * w + row * w + col)] =
                        src[c * h * w + col * h + row];
        images.insert(images.end(), img.begin(), img.end());
    }
}

struct KnownSplit {
    std::vector<std::string> image_files;
    std::string label_file;  // empty when unlabeled
    int64_t count;
    int64_t dim;
};

KnownSplit cifar10_split_info(const std::string& split) {
    if (split == "train")
        return {{"data_batch_1.bin", "data_batch_2.bin", "data_batch_3.bin",
                 "data_batch_4.bin", "data_batch_5.bin"},
                "",
                50000,
                32};
    if (split == "test") return {{"test_batch.bin"}, "", 10000, 32};
    throw std::invalid_argument("unknown cifar10 split: " + split);
}

KnownSplit stl10_split_info(const std::string& split) {
    if (split == "train") return {{"train_X.bin"}, "train_y.bin", 5000, 96};
    if (split == "test") return {{"test_X.bin"}, "test_y.bin", 8000, 96};
    if (split == "unlabeled") return {{"unlabeled_X.bin"}, "", 100000, 96};
    throw std::invalid_argument("unknown stl10 split: " + split);
}

}  // namespace

DatasetSplit load_dataset(const std::string& name, const std::string& split,
                          const fs::path& cache_dir) {
    const fs::path dir = cache_dir / name / split;
    if (!fs::exists(dir / "manifest.json")) {
        const char* mirror = std::getenv("DJESCC_DATA_MIRROR");
        if (mirror != nullptr && (name == "cifar10" || name == "stl10")) {
            fetch_dataset(name, split, cache_dir, mirror);
        } else {
            throw std::runtime_error(
                "fetch error: no cached data for " + name + "/" + split + " under " +
                cache_dir.string() +
                " and no reachable source (run prepare-data, or set DJESCC_DATA_MIRROR)");
        }
    }

    const SplitManifest m = read_manifest(dir);
    for (const auto& f : m.files) {
        const fs::path p = dir / f.name;
        if (!fs::exists(p)) throw std::runtime_error("integrity error: missing file " + p.string());
        const uint32_t crc = file_crc32(p);
        if (crc != f.crc32)
            throw std::runtime_error("integrity error: checksum mismatch for " + p.string());
    }

    std::vector<uint8_t> images;
    std::vector<int64_t> labels;
    images.reserve(static_cast<size_t>(m.count * m.channels * m.height * m.width));

    if (m.format == "cifar10-bin") {
        for (const auto& f : m.files) {
            auto bytes = read_file_bytes(dir / f.name);
            parse_cifar_records(bytes, m.height, m.width, images, labels);
        }
    } else if (m.format == "stl10-bin") {
        std::vector<int64_t> stl_labels;
        for (const auto& f : m.files) {
            auto bytes = read_file_bytes(dir / f.name);
            if (f.name.find("_y.bin") != std::string::npos) {
                for (char b : bytes) stl_labels.push_back(static_cast<unsigned char>(b) - 1);
            } else {
                parse_stl_images(bytes, m.height, m.width, images);
            }
        }
        labels = std::move(stl_labels);
    } else {
        throw std::runtime_error("unknown dataset format: " + m.format);
    }

    const int64_t n = static_cast<int64_t>(images.size()) / (m.channels * m.height * m.width);
    if (n != m.count)
        throw std::runtime_error("integrity error: manifest count " + std::to_string(m.count) +
                                 " but parsed " + std::to_string(n));

    DatasetSplit out;
    out.dataset = name;
    out.split = split;
    out.images = torch::from_blob(images.data(), {n, m.channels, m.height, m.width},
                                  torch::kUInt8)
                     .clone();
    if (!labels.empty() && static_cast<int64_t>(labels.size()) == n)
        out.labels = torch::tensor(labels, torch::kInt64);
    return out;
}

namespace {

void build_cache_split(const fs::path& cache_dir, const std::string& dataset,
                       const std::string& split, const std::string& format,
                       const std::string& source, const KnownSplit& info,
                       const fs::path& source_dir) {
    const fs::path dir = cache_dir / dataset / split;
    fs::create_directories(dir);
    SplitManifest m;
    m.dataset = dataset;
    m.split = split;
    m.format = format;
    m.source_url = source;
    m.count = info.count;
    m.channels = 3;
    m.height = info.dim;
    m.width = info.dim;

    std::vector<std::string> names = info.image_files;
    if (!info.label_file.empty()) names.push_back(info.label_file);
    for (const auto& name : names) {
        const fs::path src = source_dir / name;
        if (!fs::exists(src))
            throw std::runtime_error("fetch error: source file missing: " + src.string());
        fs::copy_file(src, dir / name, fs::copy_options::overwrite_existing);
        m.files.push_back({name, file_crc32(dir / name),
                           static_cast<uint64_t>(fs::file_size(dir / name))});
    }
    write_manifest(dir, m);
}

}  // namespace

void prepare_cifar10_cache(const fs::path& cache_dir, const fs::path& source_dir) {
    for (const std::string split : {"train", "test"})
        build_cache_split(cache_dir, "cifar10", split, "cifar10-bin",
                          "file://" + source_dir.string(), cifar10_split_info(split),
                          source_dir);
}

void prepare_stl10_cache(const fs::path& cache_dir, const fs::path& source_dir,
                         const std::vector<std::string>& splits) {
    for (const auto& split : splits)
        build_cache_split(cache_dir, "stl10", split, "stl10-bin",
                          "file://" + source_dir.string(), stl10_split_info(split),
                          source_dir);
}

void fetch_dataset(const std::string& name, const std::string& split,
                   const fs::path& cache_dir, const std::string& base_url) {
    KnownSplit info = name == "cifar10" ? cifar10_split_info(split) : stl10_split_info(split);

    // split base_url into host part and path prefix
    std::string url = base_url;
    std::string scheme = "http://";
    if (url.rfind("https://", 0) == 0) scheme = "https://";
    if (url.rfind(scheme, 0) == 0) url = url.substr(scheme.size());
    const auto slash = url.find('/');
    const std::string host = scheme + url.substr(0, slash);
    const std::string prefix = slash == std::string::npos ? "" : url.substr(slash);

    const fs::path tmp = cache_dir / name / (split + ".fetch");
    fs::create_directories(tmp);

    httplib::Client client(host);
    client.set_connection_timeout(10);
    client.set_read_timeout(60);

    std::vector<std::string> names = info.image_files;
    if (!info.label_file.empty()) names.push_back(info.label_file);
    for (const auto& fname : names) {
        auto res = client.Get(prefix + "/" + fname);
        if (!res || res->status != 200)
            throw std::runtime_error("fetch error: could not download " + fname + " from " +
                                     base_url);
        write_file_bytes(tmp / fname, res->body.data(), res->body.size());
    }
    build_cache_split(cache_dir, name, split, name == "cifar10" ? "cifar10-bin" : "stl10-bin",
                      base_url, info, tmp);
    fs::remove_all(tmp);
}

namespace {

struct ShapeSpec {
    int type;  // 0 rect, 1 ellipse, 2 band
    float cx, cy, a, b, angle;
    float color[3];
};

// Smooth two-color gradient background plus class-determined shapes, mild
// blur and a touch of seeded pixel noise.
void draw_synthetic_image(uint64_t seed, int64_t cls, int64_t h, int64_t w,
                          std::vector<uint8_t>& out_planes) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> uni(0.0f, 1.0f);

    float c0[3], c1[3];
    for (int c = 0; c < 3; ++c) {
        c0[c] = uni(rng);
        c1[c] = uni(rng);
    }
    const float theta = uni(rng) * 6.2831853f;
    const float dx = std::cos(theta), dy = std::sin(theta);

    const int shape_count = static_cast<int>(cls / 3) + 1;
    const int shape_type = static_cast<int>(cls % 3);
    std::vector<ShapeSpec> shapes(shape_count);
    for (auto& s : shapes) {
        s.type = shape_type;
        s.cx = 0.15f + 0.7f * uni(rng);
        s.cy = 0.15f + 0.7f * uni(rng);
        s.a = 0.08f + 0.22f * uni(rng);
        s.b = 0.08f + 0.22f * uni(rng);
        s.angle = uni(rng) * 3.1415926f;
        for (int c = 0; c < 3; ++c) s.color[c] = uni(rng);
    }

    std::vector<float> img(static_cast<size_t>(3 * h * w));
    for (int64_t y = 0; y < h; ++y) {
        for (int64_t x = 0; x < w; ++x) {
            const float u = (static_cast<float>(x) + 0.5f) / static_cast<float>(w);
            const float v = (static_cast<float>(y) + 0.5f) / static_cast<float>(h);
            float s = 0.5f + 0.5f * ((u - 0.5f) * dx + (v - 0.5f) * dy) / 0.7071f;
            s = std::clamp(s, 0.0f, 1.0f);
            float px[3];
            for (int c = 0; c < 3; ++c) px[c] = c0[c] + (c1[c] - c0[c]) * s;

            for (const auto& sh : shapes) {
                const float rx = u - sh.cx, ry = v - sh.cy;
                bool inside = false;
                if (sh.type == 0) {
                    inside = std::abs(rx) < sh.a * 0.5f && std::abs(ry) < sh.b * 0.5f;
                } else if (sh.type == 1) {
                    const float ex = rx / (sh.a * 0.6f), ey = ry / (sh.b * 0.6f);
                    inside = ex * ex + ey * ey < 1.0f;
                } else {
                    const float proj = rx * std::cos(sh.angle) + ry * std::sin(sh.angle);
                    inside = std::abs(proj) < sh.a * 0.25f;
                }
                if (inside)
                    for (int c = 0; c < 3; ++c) px[c] = sh.color[c];
            }
            for (int c = 0; c < 3; ++c)
                img[static_cast<size_t>(c * h * w + y * w + x)] = px[c];
        }
    }

    // 3x3 box blur per plane
    std::vector<float> blurred(img.size());
    for (int64_t c = 0; c < 3; ++c) {
        for (int64_t y = 0; y < h; ++y) {
            for (int64_t x = 0; x < w; ++x) {
                float acc = 0.0f;
                int cnt = 0;
                for (int64_t oy = -1; oy <= 1; ++oy) {
                    for (int64_t ox = -1; ox <= 1; ++ox) {
                        const int64_t yy = y + oy, xx = x + ox;
                        if (yy < 0 || yy >= h || xx < 0 || xx >= w) continue;
                        acc += img[static_cast<size_t>(c * h * w + yy * w + xx)];
                        ++cnt;
                    }
                }
                blurred[static_cast<size_t>(c * h * w + y * w + x)] = acc / static_cast<float>(cnt);
            }
        }
    }

    std::normal_distribution<float> noise(0.0f, 0.015f);
    out_planes.resize(img.size());
    for (size_t i = 0; i < blurred.size(); ++i) {
        const float val = std::clamp(blurred[i] + noise(rng), 0.0f, 1.0f);
        out_planes[i] = static_cast<uint8_t>(std::lround(val * 255.0f));
    }
}

void write_synthetic_split(const fs::path& cache_dir, const std::string& name,
                           const std::string& split, int64_t count, const SyntheticSpec& spec,
                           uint64_t salt) {
    const fs::path dir = cache_dir / name / split;
    fs::create_directories(dir);

    const std::string fname = split + "_records.bin";
    std::ofstream out(dir / fname, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("unwritable path: " + (dir / fname).string());

    std::vector<uint8_t> planes;
    for (int64_t i = 0; i < count; ++i) {
        const uint64_t img_seed = splitmix64(spec.seed ^ salt ^ splitmix64(static_cast<uint64_t>(i)));
        const int64_t cls = static_cast<int64_t>(splitmix64(img_seed) % static_cast<uint64_t>(spec.classes));
        draw_synthetic_image(img_seed, cls, spec.height, spec.width, planes);
        const auto label = static_cast<unsigned char>(cls);
        out.write(reinterpret_cast<const char*>(&label), 1);
        out.write(reinterpret_cast<const char*>(planes.data()),
                  static_cast<std::streamsize>(planes.size()));
    }
    out.close();

    SplitManifest m;
    m.dataset = name;
    m.split = split;
    m.format = "cifar10-bin";
    m.source_url = "synthetic:seed=" + std::to_string(spec.seed);
    m.count = count;
    m.channels = 3;
    m.height = spec.height;
    m.width = spec.width;
    m.files.push_back({fname, file_crc32(dir / fname),
                       static_cast<uint64_t>(fs::file_size(dir / fname))});
    write_manifest(dir, m);
}

}  // namespace

void generate_synthetic_dataset(const fs::path& cache_dir, const std::string& name,
                                const SyntheticSpec& spec) {
    TORCH_CHECK(spec.height % 4 == 0 && spec.width % 4 == 0,
                "synthetic dims must be divisible by 4");
    write_synthetic_split(cache_dir, name, "train", spec.train_count, spec, 0x7261696eull);
    write_synthetic_split(cache_dir, name, "test", spec.test_count, spec, 0x74657374ull);
}

std::vector<int64_t> seeded_permutation(int64_t n, uint64_t seed) {
    std::vector<int64_t> perm(static_cast<size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    std::mt19937_64 rng(splitmix64(seed));
    std::shuffle(perm.begin(), perm.end(), rng);
    return perm;
}

BatchIterator::BatchIterator(torch::Tensor images_u8, int64_t batch_size, uint64_t seed)
    : images_(std::move(images_u8)), batch_size_(batch_size), seed_(seed) {
    TORCH_CHECK(images_.dim() == 4 && images_.dtype() == torch::kUInt8,
                "BatchIterator: expected uint8 (N,C,H,W)");
    TORCH_CHECK(batch_size_ >= 1, "BatchIterator: batch_size must be >= 1");
    start_epoch(0);
}

void BatchIterator::start_epoch(int64_t epoch) {
    order_ = seeded_permutation(images_.size(0),
                                splitmix64(seed_) ^ splitmix64(static_cast<uint64_t>(epoch) + 1));
    cursor_ = 0;
}

bool BatchIterator::next(torch::Tensor& out) {
    const int64_t n = images_.size(0);
    if (cursor_ >= n) return false;
    const int64_t take = std::min(batch_size_, n - cursor_);
    torch::Tensor idx = torch::tensor(
        std::vector<int64_t>(order_.begin() + cursor_, order_.begin() + cursor_ + take),
        torch::kInt64);
    cursor_ += take;
    out = normalize(images_.index_select(0, idx));
    return true;
}

int64_t BatchIterator::batches_per_epoch() const {
    return (images_.size(0) + batch_size_ - 1) / batch_size_;
}

}  // namespace djescc
