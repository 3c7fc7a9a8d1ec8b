#include "djescc/models.hpp"

#include <fstream>

#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace djescc {

TransformNetImpl::TransformNetImpl(int64_t in_channels, int64_t out_channels,
                                   int64_t base_width) {
    const int64_t w = base_width;
    namespace nn = torch::nn;
    enc_a = register_module("enc_a", nn::Conv2d(nn::Conv2dOptions(in_channels, w, 3).padding(1)));
    enc_b = register_module("enc_b", nn::Conv2d(nn::Conv2dOptions(w, w, 3).padding(1)));
    pool = register_module("pool", nn::MaxPool2d(nn::MaxPool2dOptions(2)));
    mid_a = register_module("mid_a", nn::Conv2d(nn::Conv2dOptions(w, 2 * w, 3).padding(1)));
    mid_b = register_module("mid_b", nn::Conv2d(nn::Conv2dOptions(2 * w, 2 * w, 3).padding(1)));
    up = register_module("up", nn::ConvTranspose2d(nn::ConvTranspose2dOptions(2 * w, w, 2).stride(2)));
    dec_a = register_module("dec_a", nn::Conv2d(nn::Conv2dOptions(2 * w, w, 3).padding(1)));
    dec_b = register_module("dec_b", nn::Conv2d(nn::Conv2dOptions(w, w, 3).padding(1)));
    head = register_module("head", nn::Conv2d(nn::Conv2dOptions(w, out_channels, 1)));
    act_enc_a = register_module("act_enc_a", nn::PReLU());
    act_enc_b = register_module("act_enc_b", nn::PReLU());
    act_mid_a = register_module("act_mid_a", nn::PReLU());
    act_mid_b = register_module("act_mid_b", nn::PReLU());
    act_up = register_module("act_up", nn::PReLU());
    act_dec_a = register_module("act_dec_a", nn::PReLU());
    act_dec_b = register_module("act_dec_b", nn::PReLU());
}

torch::Tensor TransformNetImpl::forward(torch::Tensor x) {
    TORCH_CHECK(x.dim() == 4, "TransformNet: expected (N,C,H,W)");
    TORCH_CHECK(x.size(2) % 2 == 0 && x.size(3) % 2 == 0,
                "TransformNet: h and w must be even");
    torch::Tensor skip = act_enc_b(enc_b(act_enc_a(enc_a(x))));
    torch::Tensor mid = act_mid_b(mid_b(act_mid_a(mid_a(pool(skip)))));
    torch::Tensor u = act_up(up(mid));
    torch::Tensor d = torch::cat({u, skip}, 1);
    d = act_dec_b(dec_b(act_dec_a(dec_a(d))));
    return torch::sigmoid(head(d));
}

EncoderImpl::EncoderImpl(int64_t in_channels, int64_t t_, int64_t base) : t(t_) {
    namespace nn = torch::nn;
    const int64_t b2 = 2 * base;
    c1 = register_module("c1", nn::Conv2d(nn::Conv2dOptions(in_channels, base, 5).stride(2).padding(2)));
    c2 = register_module("c2", nn::Conv2d(nn::Conv2dOptions(base, b2, 5).stride(2).padding(2)));
    c3 = register_module("c3", nn::Conv2d(nn::Conv2dOptions(b2, b2, 5).stride(1).padding(2)));
    c4 = register_module("c4", nn::Conv2d(nn::Conv2dOptions(b2, b2, 5).stride(1).padding(2)));
    c5 = register_module("c5", nn::Conv2d(nn::Conv2dOptions(b2, t, 5).stride(1).padding(2)));
    a1 = register_module("a1", nn::PReLU());
    a2 = register_module("a2", nn::PReLU());
    a3 = register_module("a3", nn::PReLU());
    a4 = register_module("a4", nn::PReLU());
    a5 = register_module("a5", nn::PReLU());
}

SymbolBlock EncoderImpl::forward(torch::Tensor y) {
    check_codec_dims(y, "encode");
    torch::Tensor h = a1(c1(y));
    h = a2(c2(h));
    h = a3(c3(h));
    h = a4(c4(h));
    h = a5(c5(h));
    torch::Tensor flat = h.flatten(1);  // (N, t*h*w/16) = (N, 2k)
    return power_normalize(pack_complex(flat));
}

DecoderImpl::DecoderImpl(int64_t out_channels_, int64_t t_, int64_t base)
    : t(t_), out_channels(out_channels_) {
    namespace nn = torch::nn;
    const int64_t b2 = 2 * base;
    d1 = register_module("d1", nn::ConvTranspose2d(nn::ConvTranspose2dOptions(t, b2, 5).stride(1).padding(2)));
    d2 = register_module("d2", nn::ConvTranspose2d(nn::ConvTranspose2dOptions(b2, b2, 5).stride(1).padding(2)));
    d3 = register_module("d3", nn::ConvTranspose2d(nn::ConvTranspose2dOptions(b2, b2, 5).stride(1).padding(2)));
    d4 = register_module("d4", nn::ConvTranspose2d(
                                   nn::ConvTranspose2dOptions(b2, base, 5).stride(2).padding(2).output_padding(1)));
    d5 = register_module("d5", nn::ConvTranspose2d(
                                   nn::ConvTranspose2dOptions(base, out_channels, 5).stride(2).padding(2).output_padding(1)));
    a1 = register_module("a1", nn::PReLU());
    a2 = register_module("a2", nn::PReLU());
    a3 = register_module("a3", nn::PReLU());
    a4 = register_module("a4", nn::PReLU());
}

torch::Tensor DecoderImpl::forward(const SymbolBlock& zhat, int64_t height, int64_t width) {
    TORCH_CHECK(height % 4 == 0 && width % 4 == 0, "decode: target dims must be divisible by 4");
    TORCH_CHECK(zhat.k == symbols_per_image(height, width, t), "decode: block length ", zhat.k,
                " inconsistent with target ", height, "x", width, " at t=", t);
    torch::Tensor h = zhat.iq.view({zhat.batch(), t, height / 4, width / 4});
    h = a1(d1(h));
    h = a2(d2(h));
    h = a3(d3(h));
    h = a4(d4(h));
    return torch::sigmoid(d5(h));
}

int64_t symbols_per_image(int64_t height, int64_t width, int64_t t) {
    TORCH_CHECK(height % 4 == 0 && width % 4 == 0, "dims must be divisible by 4");
    TORCH_CHECK((height * width * t) % 32 == 0, "h*w*t must be divisible by 32");
    return height * width * t / 32;
}

namespace {

int64_t scaled_width(int64_t w, double mult) {
    return std::max<int64_t>(1, std::llround(static_cast<double>(w) * mult));
}

// VGG16 conv widths per block.
const std::vector<std::vector<int64_t>> kVggBlocks = {
    {64, 64}, {128, 128}, {256, 256, 256}, {512, 512, 512}, {512, 512, 512}};

}  // namespace

VggTrunkImpl::VggTrunkImpl(const FeatureExtractorConfig& cfg_) : cfg(cfg_) {
    TORCH_CHECK(cfg.cut_blocks >= 1 && cfg.cut_blocks <= 5, "cut_blocks must be in [1,5]");
    namespace nn = torch::nn;
    int64_t prev = cfg.in_channels;
    for (size_t b = 0; b < kVggBlocks.size(); ++b) {
        nn::Sequential block;
        for (int64_t w : kVggBlocks[b]) {
            const int64_t width = scaled_width(w, cfg.width_mult);
            block->push_back(nn::Conv2d(nn::Conv2dOptions(prev, width, 3).padding(1).bias(false)));
            block->push_back(nn::BatchNorm2d(width));
            block->push_back(nn::ReLU());
            prev = width;
        }
        block->push_back(nn::MaxPool2d(nn::MaxPool2dOptions(2)));
        blocks.push_back(register_module("block" + std::to_string(b + 1), block));
    }
}

torch::Tensor VggTrunkImpl::forward(torch::Tensor x) {
    for (int64_t b = 0; b < cfg.cut_blocks; ++b) x = blocks[static_cast<size_t>(b)]->forward(x);
    return x;
}

torch::Tensor VggTrunkImpl::forward_all(torch::Tensor x) {
    for (auto& block : blocks) x = block->forward(x);
    return x;
}

VggClassifierImpl::VggClassifierImpl(const FeatureExtractorConfig& cfg, int64_t num_classes) {
    namespace nn = torch::nn;
    trunk = register_module("trunk", VggTrunk(cfg));
    pool = register_module("pool", nn::AdaptiveAvgPool2d(nn::AdaptiveAvgPool2dOptions(1)));
    fc = register_module("fc", nn::Linear(scaled_width(512, cfg.width_mult), num_classes));
}

torch::Tensor VggClassifierImpl::forward(torch::Tensor x) {
    x = trunk->forward_all(x);
    x = pool(x).flatten(1);
    return fc(x);
}

FeatureExtractor::FeatureExtractor(VggTrunk trunk, FeatureExtractorConfig cfg)
    : trunk_(std::move(trunk)), cfg_(cfg) {
    trunk_->cfg.cut_blocks = cfg_.cut_blocks;
    trunk_->eval();
    for (auto& p : trunk_->parameters()) p.set_requires_grad(false);
}

torch::Tensor FeatureExtractor::extract(const torch::Tensor& img01) const {
    TORCH_CHECK(loaded(), "feature extractor not loaded");
    check_image_batch(img01, "extract_features");
    // eval mode: batch norm uses running stats, so identical inputs give
    // identical features; gradients still reach the input.
    VggTrunk trunk = trunk_;
    return trunk->forward(img01);
}

int64_t FeatureExtractor::feature_count(int64_t height, int64_t width) const {
    TORCH_CHECK(loaded(), "feature extractor not loaded");
    const int64_t cut = cfg_.cut_blocks;
    const int64_t ch = scaled_width(kVggBlocks[static_cast<size_t>(cut - 1)].back(), cfg_.width_mult);
    return ch * (height >> cut) * (width >> cut);
}

void FeatureExtractor::to(torch::Dtype dtype) {
    TORCH_CHECK(loaded(), "feature extractor not loaded");
    trunk_->to(dtype);
}

void FeatureExtractor::save(const fs::path& dir) const {
    TORCH_CHECK(loaded(), "feature extractor not loaded");
    fs::create_directories(dir);
    torch::save(trunk_, (dir / "trunk.pt").string());
    json meta = {{"cut_blocks", cfg_.cut_blocks},
                 {"width_mult", cfg_.width_mult},
                 {"in_channels", cfg_.in_channels}};
    std::ofstream out(dir / "extractor.json", std::ios::trunc);
    out << meta.dump(2) << "\n";
}

FeatureExtractor FeatureExtractor::load(const fs::path& dir, int64_t cut_override) {
    std::ifstream in(dir / "extractor.json");
    if (!in) throw std::runtime_error("configuration error: extractor checkpoint missing at " +
                                      dir.string());
    json meta;
    in >> meta;
    FeatureExtractorConfig cfg;
    cfg.cut_blocks = meta.at("cut_blocks").get<int64_t>();
    cfg.width_mult = meta.at("width_mult").get<double>();
    cfg.in_channels = meta.at("in_channels").get<int64_t>();
    if (cut_override > 0) cfg.cut_blocks = cut_override;

    FeatureExtractorConfig full = cfg;
    full.cut_blocks = 5;  // the stored trunk always has all blocks
    VggTrunk trunk(full);
    torch::load(trunk, (dir / "trunk.pt").string());
    return FeatureExtractor(std::move(trunk), cfg);
}

PretrainResult pretrain_feature_extractor(const DatasetSplit& train, const DatasetSplit& test,
                                          const PretrainConfig& cfg, const fs::path& out_dir) {
    TORCH_CHECK(train.has_labels(), "pretraining requires a labeled split");
    TORCH_CHECK(test.has_labels(), "pretraining requires a labeled test split");
    torch::manual_seed(cfg.seed);

    const int64_t num_classes = train.labels.max().item<int64_t>() + 1;
    VggClassifier model(cfg.extractor, num_classes);
    torch::optim::Adam opt(model->parameters(), torch::optim::AdamOptions(cfg.lr));

    const int64_t n = train.count();
    for (int64_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        model->train();
        auto order = seeded_permutation(n, cfg.seed ^ (0x5052455f00ull + static_cast<uint64_t>(epoch)));
        double loss_sum = 0.0;
        int64_t steps = 0;
        for (int64_t at = 0; at < n; at += cfg.batch_size) {
            const int64_t take = std::min(cfg.batch_size, n - at);
            torch::Tensor idx = torch::tensor(
                std::vector<int64_t>(order.begin() + at, order.begin() + at + take), torch::kInt64);
            torch::Tensor x = normalize(train.images.index_select(0, idx));
            torch::Tensor target = train.labels.index_select(0, idx);
            opt.zero_grad();
            torch::Tensor loss = torch::nn::functional::cross_entropy(model->forward(x), target);
            loss.backward();
            opt.step();
            loss_sum += loss.item<double>();
            ++steps;
        }
        std::printf("[pretrain] epoch %3lld  ce=%.4f\n", static_cast<long long>(epoch),
                    loss_sum / std::max<int64_t>(1, steps));
        std::fflush(stdout);
    }

    model->eval();
    int64_t correct = 0;
    {
        torch::NoGradGuard ng;
        const int64_t nt = test.count();
        for (int64_t at = 0; at < nt; at += cfg.batch_size) {
            const int64_t take = std::min(cfg.batch_size, nt - at);
            torch::Tensor x = normalize(test.images.narrow(0, at, take));
            torch::Tensor pred = model->forward(x).argmax(1);
            correct += pred.eq(test.labels.narrow(0, at, take)).sum().item<int64_t>();
        }
    }
    const double acc = static_cast<double>(correct) / static_cast<double>(test.count());

    FeatureExtractor psi(model->trunk, cfg.extractor);
    psi.save(out_dir);
    {
        json meta = {{"test_accuracy", acc},
                     {"epochs", cfg.epochs},
                     {"seed", cfg.seed},
                     {"train_count", train.count()}};
        std::ofstream out(out_dir / "pretrain.json", std::ios::trunc);
        out << meta.dump(2) << "\n";
    }
    std::printf("[pretrain] test accuracy %.4f\n", acc);
    return PretrainResult{acc, out_dir};
}

std::string to_string(CipherVariant v) {
    switch (v) {
        case CipherVariant::Learned: return "learned";
        case CipherVariant::KeyedShuffle: return "keyed_shuffle";
        case CipherVariant::PixelInvert: return "pixel_invert";
        case CipherVariant::Identity: return "identity";
    }
    return "learned";
}

CipherVariant cipher_variant_from_string(const std::string& s) {
    if (s == "learned") return CipherVariant::Learned;
    if (s == "keyed_shuffle") return CipherVariant::KeyedShuffle;
    if (s == "pixel_invert") return CipherVariant::PixelInvert;
    if (s == "identity") return CipherVariant::Identity;
    throw std::invalid_argument("unknown cipher variant: " + s);
}

std::vector<torch::Tensor> ModelBundle::trainable_parameters() const {
    std::vector<torch::Tensor> params;
    auto append = [&params](const std::vector<torch::Tensor>& ps) {
        params.insert(params.end(), ps.begin(), ps.end());
    };
    if (encryption) append(encryption->parameters());
    if (encoder) append(encoder->parameters());
    if (decoder) append(decoder->parameters());
    if (decryption) append(decryption->parameters());
    return params;
}

void ModelBundle::to(torch::Dtype dtype) {
    if (encryption) encryption->to(dtype);
    if (encoder) encoder->to(dtype);
    if (decoder) decoder->to(dtype);
    if (decryption) decryption->to(dtype);
}

void ModelBundle::train(bool on) {
    if (encryption) encryption->train(on);
    if (encoder) encoder->train(on);
    if (decoder) decoder->train(on);
    if (decryption) decryption->train(on);
}

void ModelBundle::eval() { train(false); }

ModelBundle ModelBundle::create(int64_t t, double lambda_e, double lambda_d, uint64_t init_seed,
                                int64_t in_channels, CipherVariant variant,
                                uint64_t shuffle_seed) {
    TORCH_CHECK(lambda_e >= 0.0 && lambda_d >= 0.0, "loss weights must be non-negative");
    torch::manual_seed(init_seed);
    ModelBundle b;
    b.t = t;
    b.in_channels = in_channels;
    b.lambda_e = lambda_e;
    b.lambda_d = lambda_d;
    b.variant = variant;
    b.shuffle_seed = shuffle_seed;
    if (variant == CipherVariant::Learned) {
        b.encryption = TransformNet(in_channels, in_channels, 32);
        b.decryption = TransformNet(in_channels, in_channels, 32);
    }
    b.encoder = Encoder(in_channels, t);
    b.decoder = Decoder(in_channels, t);
    return b;
}

namespace {

json bundle_meta(const ModelBundle& b) {
    return {{"t", b.t},
            {"in_channels", b.in_channels},
            {"lambda_e", b.lambda_e},
            {"lambda_d", b.lambda_d},
            {"variant", to_string(b.variant)},
            {"shuffle_seed", b.shuffle_seed},
            {"config_hash", b.config_hash}};
}

void write_meta(const fs::path& dir, const json& meta) {
    std::ofstream out(dir / "bundle.json", std::ios::trunc);
    if (!out) throw std::runtime_error("unwritable path: " + dir.string());
    out << meta.dump(2) << "\n";
}

}  // namespace

void ModelBundle::save(const fs::path& dir) const {
    fs::create_directories(dir);
    write_meta(dir, bundle_meta(*this));
    if (encryption) torch::save(encryption, (dir / "encryption.pt").string());
    if (encoder) torch::save(encoder, (dir / "encoder.pt").string());
    if (decoder) torch::save(decoder, (dir / "decoder.pt").string());
    if (decryption) torch::save(decryption, (dir / "decryption.pt").string());
}

ModelBundle ModelBundle::load(const fs::path& dir) {
    std::ifstream in(dir / "bundle.json");
    if (!in) throw std::runtime_error("missing bundle metadata: " + dir.string());
    json meta;
    in >> meta;

    ModelBundle b;
    b.t = meta.at("t").get<int64_t>();
    b.in_channels = meta.at("in_channels").get<int64_t>();
    b.lambda_e = meta.at("lambda_e").get<double>();
    b.lambda_d = meta.at("lambda_d").get<double>();
    b.variant = cipher_variant_from_string(meta.at("variant").get<std::string>());
    b.shuffle_seed = meta.at("shuffle_seed").get<uint64_t>();
    b.config_hash = meta.value("config_hash", "");

    if (fs::exists(dir / "encryption.pt")) {
        b.encryption = TransformNet(b.in_channels, b.in_channels, 32);
        torch::load(b.encryption, (dir / "encryption.pt").string());
    }
    if (fs::exists(dir / "encoder.pt")) {
        b.encoder = Encoder(b.in_channels, b.t);
        torch::load(b.encoder, (dir / "encoder.pt").string());
    }
    if (fs::exists(dir / "decoder.pt")) {
        b.decoder = Decoder(b.in_channels, b.t);
        torch::load(b.decoder, (dir / "decoder.pt").string());
    }
    if (fs::exists(dir / "decryption.pt")) {
        b.decryption = TransformNet(b.in_channels, b.in_channels, 32);
        torch::load(b.decryption, (dir / "decryption.pt").string());
    }
    return b;
}

void ModelBundle::export_encryption(const fs::path& dir) const {
    fs::create_directories(dir);
    write_meta(dir, bundle_meta(*this));
    if (encryption) torch::save(encryption, (dir / "encryption.pt").string());
}

void ModelBundle::export_decryption(const fs::path& dir) const {
    fs::create_directories(dir);
    write_meta(dir, bundle_meta(*this));
    if (decryption) torch::save(decryption, (dir / "decryption.pt").string());
}

void ModelBundle::export_codec(const fs::path& dir) const {
    fs::create_directories(dir);
    write_meta(dir, bundle_meta(*this));
    torch::save(encoder, (dir / "encoder.pt").string());
    torch::save(decoder, (dir / "decoder.pt").string());
}

namespace {

torch::Tensor apply_flat_permutation(const torch::Tensor& x, const std::vector<int64_t>& perm) {
    const auto shape = x.sizes().vec();
    torch::Tensor idx = torch::tensor(perm, torch::kInt64);
    return x.flatten(1).index_select(1, idx).view(shape);
}

std::vector<int64_t> invert_permutation(const std::vector<int64_t>& perm) {
    std::vector<int64_t> inv(perm.size());
    for (size_t i = 0; i < perm.size(); ++i) inv[static_cast<size_t>(perm[i])] = static_cast<int64_t>(i);
    return inv;
}

}  // namespace

torch::Tensor encrypt_forward(const ModelBundle& bundle, const torch::Tensor& x) {
    check_image_batch(x, "encrypt");
    check_codec_dims(x, "encrypt");
    switch (bundle.variant) {
        case CipherVariant::Learned: {
            TORCH_CHECK(bundle.encryption, "encryption net missing from bundle");
            TransformNet net = bundle.encryption;  // modules have reference semantics
            return net->forward(x);
        }
        case CipherVariant::KeyedShuffle:
            return apply_flat_permutation(
                x, seeded_permutation(x.numel() / x.size(0), bundle.shuffle_seed));
        case CipherVariant::PixelInvert:
            return 1.0 - x;
        case CipherVariant::Identity:
            return x;
    }
    TORCH_CHECK(false, "unreachable");
}

SymbolBlock encode_forward(const ModelBundle& bundle, const torch::Tensor& y) {
    check_image_batch(y, "encode");
    TORCH_CHECK(bundle.encoder, "encoder missing from bundle");
    TORCH_CHECK(y.size(1) == bundle.in_channels, "encode: channel mismatch, bundle expects ",
                bundle.in_channels);
    Encoder net = bundle.encoder;
    return net->forward(y);
}

torch::Tensor decode_forward(const ModelBundle& bundle, const SymbolBlock& zhat, int64_t height,
                             int64_t width) {
    TORCH_CHECK(bundle.decoder, "decoder missing from bundle");
    Decoder net = bundle.decoder;
    return net->forward(zhat, height, width);
}

torch::Tensor decrypt_forward(const ModelBundle& bundle, const torch::Tensor& yhat) {
    check_image_batch(yhat, "decrypt");
    switch (bundle.variant) {
        case CipherVariant::Learned: {
            TORCH_CHECK(bundle.decryption, "decryption net missing from bundle");
            TransformNet net = bundle.decryption;
            return net->forward(yhat);
        }
        case CipherVariant::KeyedShuffle:
            return apply_flat_permutation(
                yhat, invert_permutation(
                          seeded_permutation(yhat.numel() / yhat.size(0), bundle.shuffle_seed)));
        case CipherVariant::PixelInvert:
            return 1.0 - yhat;
        case CipherVariant::Identity:
            return yhat;
    }
    TORCH_CHECK(false, "unreachable");
}

}  // namespace djescc
