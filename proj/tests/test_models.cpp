#include <filesystem>

#include "djescc/image_data.hpp"
#include "djescc/models.hpp"
#include "djescc/objective.hpp"
#include "doctest.h"

namespace fs = std::filesystem;
using namespace djescc;

namespace {

fs::path temp_dir(const std::string& tag) {
    fs::path dir = fs::temp_directory_path() / ("djescc_models_" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

FeatureExtractor tiny_extractor(uint64_t seed = 1, int64_t cut = 2, double width_mult = 0.125) {
    torch::manual_seed(seed);
    FeatureExtractorConfig cfg;
    cfg.cut_blocks = cut;
    cfg.width_mult = width_mult;
    FeatureExtractorConfig full = cfg;
    full.cut_blocks = 5;
    return FeatureExtractor(VggTrunk(full), cfg);
}

bool params_equal(const std::vector<torch::Tensor>& a, const std::vector<torch::Tensor>& b) {
    if (a.size() != b.size()) return false;
    for (size_t i = 0; i < a.size(); ++i)
        if (!a[i].equal(b[i])) return false;
    return true;
}

}  // namespace

TEST_CASE("encryption net preserves shape and range across image sizes") {
    torch::manual_seed(2);
    TransformNet net(3, 3, 32);
    torch::Tensor x32 = torch::rand({1, 3, 32, 32});
    torch::Tensor y32 = net->forward(x32);
    CHECK(y32.sizes() == x32.sizes());
    CHECK(y32.min().item<float>() >= 0.0f);
    CHECK(y32.max().item<float>() <= 1.0f);

    // fully convolutional: the same weights run on 96x96 inputs
    torch::Tensor x96 = torch::rand({1, 3, 96, 96});
    CHECK(net->forward(x96).sizes() == x96.sizes());
}

TEST_CASE("encoder symbol counts follow k = h*w*t/32") {
    torch::manual_seed(2);
    SUBCASE("cifar-sized, t=16: k=512, R=1/6") {
        Encoder enc(3, 16);
        SymbolBlock z = enc->forward(torch::rand({2, 3, 32, 32}));
        CHECK(z.k == 512);
        CHECK(static_cast<double>(z.k) / (32 * 32 * 3) == doctest::Approx(1.0 / 6.0));
        CHECK((average_power(z) - 1.0).abs().max().item<double>() < 1e-5);
    }
    SUBCASE("t=8: k=256, R=1/12") {
        Encoder enc(3, 8);
        SymbolBlock z = enc->forward(torch::rand({1, 3, 32, 32}));
        CHECK(z.k == 256);
        CHECK(static_cast<double>(z.k) / (32 * 32 * 3) == doctest::Approx(1.0 / 12.0));
    }
    SUBCASE("stl-sized, t=16: k=4608") {
        Encoder enc(3, 16);
        SymbolBlock z = enc->forward(torch::rand({1, 3, 96, 96}));
        CHECK(z.k == 4608);
    }
    SUBCASE("indivisible spatial dims are rejected") {
        Encoder enc(3, 16);
        CHECK_THROWS(enc->forward(torch::rand({1, 3, 30, 32})));
    }
}

TEST_CASE("bandwidth ratio identity R = t/96 for both supported sizes") {
    for (int64_t t : {8, 16}) {
        for (int64_t hw : {32, 96}) {
            const int64_t k = symbols_per_image(hw, hw, t);
            const int64_t n = hw * hw * 3;
            CHECK(static_cast<double>(k) / n == doctest::Approx(static_cast<double>(t) / 96.0));
        }
    }
}

TEST_CASE("decoder maps symbol blocks back to image shapes") {
    torch::manual_seed(2);
    Decoder dec(3, 16);
    SymbolBlock z{torch::randn({2, 1024}), 512};
    torch::Tensor y = dec->forward(z, 32, 32);
    CHECK(y.sizes() == torch::IntArrayRef({2, 3, 32, 32}));
    CHECK(y.min().item<float>() >= 0.0f);
    CHECK(y.max().item<float>() <= 1.0f);

    SymbolBlock z96{torch::randn({1, 9216}), 4608};
    CHECK(dec->forward(z96, 96, 96).sizes() == torch::IntArrayRef({1, 3, 96, 96}));

    SymbolBlock bad{torch::randn({1, 100}), 50};
    CHECK_THROWS(dec->forward(bad, 32, 32));
}

TEST_CASE("full pipeline shape identity via a bundle") {
    ModelBundle b = ModelBundle::create(16, 0.0, 0.0, 5);
    b.eval();
    torch::NoGradGuard ng;
    torch::Generator gen = at::detail::createCPUGenerator(9);
    for (int64_t hw : {32, 96}) {
        torch::Tensor x = torch::rand({1, 3, hw, hw});
        torch::Tensor y = encrypt_forward(b, x);
        CHECK(y.sizes() == x.sizes());
        SymbolBlock z = encode_forward(b, y);
        SymbolBlock zh = awgn_apply(z, 0.1, gen);
        torch::Tensor yhat = decode_forward(b, zh, hw, hw);
        torch::Tensor xhat = decrypt_forward(b, yhat);
        CHECK(xhat.sizes() == x.sizes());
        CHECK(xhat.min().item<float>() >= 0.0f);
        CHECK(xhat.max().item<float>() <= 1.0f);
    }
}

TEST_CASE("frozen extractor is deterministic and differentiable to its input") {
    FeatureExtractor psi = tiny_extractor();
    torch::Tensor x = torch::rand({1, 3, 32, 32});
    torch::Tensor f1 = psi.extract(x);
    torch::Tensor f2 = psi.extract(x.clone());
    CHECK(f1.equal(f2));
    CHECK(torch::mse_loss(f1, f2).item<double>() == 0.0);

    // configured cut/width fixes the feature shape
    CHECK(f1.numel() == psi.feature_count(32, 32));

    // no parameter receives gradients, the input does
    for (const auto& p : psi.trunk()->parameters()) CHECK_FALSE(p.requires_grad());
    torch::Tensor xin = torch::rand({1, 3, 32, 32}).requires_grad_(true);
    psi.extract(xin).square().sum().backward();
    CHECK(xin.grad().abs().sum().item<double>() > 0.0);
}

TEST_CASE("extractor save/load round-trip is byte-stable") {
    const fs::path dir = temp_dir("psi");
    FeatureExtractor psi = tiny_extractor(3);
    psi.save(dir);
    FeatureExtractor loaded = FeatureExtractor::load(dir);
    CHECK(params_equal(psi.trunk()->parameters(), loaded.trunk()->parameters()));

    const fs::path dir2 = temp_dir("psi2");
    loaded.save(dir2);
    FeatureExtractor again = FeatureExtractor::load(dir2);
    CHECK(params_equal(loaded.trunk()->parameters(), again.trunk()->parameters()));

    // cut override drops deeper blocks from the forward pass
    FeatureExtractor cut1 = FeatureExtractor::load(dir, 1);
    torch::Tensor x = torch::rand({1, 3, 32, 32});
    CHECK(cut1.extract(x).size(2) == 16);
    CHECK(loaded.extract(x).size(2) == 8);
}

TEST_CASE("extractor load from a missing directory is a configuration error") {
    CHECK_THROWS_WITH_AS(FeatureExtractor::load(temp_dir("missing") / "nope"),
                         doctest::Contains("configuration error"), std::runtime_error);
}

TEST_CASE("pretraining learns above chance on the synthetic classes") {
    const fs::path cache = temp_dir("pretrain_cache");
    SyntheticSpec spec;
    spec.train_count = 192;
    spec.test_count = 64;
    spec.seed = 5;
    generate_synthetic_dataset(cache, "syn", spec);
    DatasetSplit train = load_dataset("syn", "train", cache);
    DatasetSplit test = load_dataset("syn", "test", cache);

    PretrainConfig cfg;
    cfg.epochs = 4;
    cfg.batch_size = 32;
    cfg.seed = 2;
    cfg.extractor.cut_blocks = 2;
    cfg.extractor.width_mult = 0.125;
    const fs::path out = temp_dir("pretrain_out");
    PretrainResult r = pretrain_feature_extractor(train, test, cfg, out);
    CHECK(r.test_accuracy > 0.12);  // 10 classes, chance is 0.1

    FeatureExtractor psi = FeatureExtractor::load(out);
    CHECK(psi.loaded());
    CHECK(psi.config().cut_blocks == 2);
}

TEST_CASE("bundle save/load round-trips parameters bitwise") {
    const fs::path dir = temp_dir("bundle");
    ModelBundle b = ModelBundle::create(16, 0.05, 0.05, 7);
    b.config_hash = "deadbeef";
    b.save(dir);
    ModelBundle loaded = ModelBundle::load(dir);
    CHECK(loaded.t == 16);
    CHECK(loaded.lambda_e == 0.05);
    CHECK(loaded.config_hash == "deadbeef");
    CHECK(params_equal(b.trainable_parameters(), loaded.trainable_parameters()));
}

TEST_CASE("sub-bundle exports support the key-distribution split") {
    const fs::path enc_dir = temp_dir("sub_enc");
    const fs::path dec_dir = temp_dir("sub_dec");
    const fs::path codec_dir = temp_dir("sub_codec");
    ModelBundle b = ModelBundle::create(16, 0.0, 0.0, 11);
    b.eval();
    b.export_encryption(enc_dir);
    b.export_decryption(dec_dir);
    b.export_codec(codec_dir);

    torch::NoGradGuard ng;
    torch::Tensor x = torch::rand({1, 3, 32, 32});

    ModelBundle owner = ModelBundle::load(enc_dir);
    owner.eval();
    CHECK(owner.encryption);
    CHECK_FALSE(owner.encoder);
    CHECK(encrypt_forward(owner, x).equal(encrypt_forward(b, x)));
    CHECK_THROWS(encode_forward(owner, x));  // owner key cannot encode

    ModelBundle provider = ModelBundle::load(codec_dir);
    provider.eval();
    CHECK_FALSE(provider.encryption);
    SymbolBlock z = encode_forward(provider, x);
    CHECK(z.k == 512);

    ModelBundle recipient = ModelBundle::load(dec_dir);
    recipient.eval();
    CHECK(decrypt_forward(recipient, x).sizes() == x.sizes());
}

TEST_CASE("keyed_shuffle and pixel_invert variants are fixed invertible ciphers") {
    ModelBundle b = ModelBundle::create(16, 0.0, 0.0, 3, 3, CipherVariant::KeyedShuffle, 77);
    torch::Tensor x = torch::rand({2, 3, 32, 32});
    torch::Tensor y = encrypt_forward(b, x);
    CHECK_FALSE(y.equal(x));
    CHECK(decrypt_forward(b, y).allclose(x));
    // permutations preserve the multiset of values
    auto sorted = [](const torch::Tensor& t) { return std::get<0>(t.flatten().sort()); };
    CHECK(sorted(y).equal(sorted(x)));

    ModelBundle inv = ModelBundle::create(16, 0.0, 0.0, 3, 3, CipherVariant::PixelInvert, 0);
    torch::Tensor yi = encrypt_forward(inv, x);
    CHECK(yi.allclose(1.0 - x));
    CHECK(decrypt_forward(inv, yi).allclose(x));

    ModelBundle ident = ModelBundle::create(16, 0.0, 0.0, 3, 3, CipherVariant::Identity, 0);
    CHECK(encrypt_forward(ident, x).equal(x));
}

TEST_CASE("gradients reach all four parameter sets") {
    ModelBundle b = ModelBundle::create(4, 0.05, 0.05, 13);
    FeatureExtractor psi = tiny_extractor(4);
    torch::Generator gen = at::detail::createCPUGenerator(21);

    torch::Tensor x = torch::rand({2, 3, 32, 32});
    torch::Tensor y = encrypt_forward(b, x);
    SymbolBlock z = encode_forward(b, y);
    SymbolBlock zh = awgn_apply(z, 0.5, gen);
    torch::Tensor yhat = decode_forward(b, zh, 32, 32);
    torch::Tensor xhat = decrypt_forward(b, yhat);

    LossBreakdown lb = total_loss(x, y, yhat, xhat, b.lambda_e, b.lambda_d, psi);
    lb.total.backward();

    auto grad_norm = [](const std::vector<torch::Tensor>& ps) {
        double norm = 0.0;
        for (const auto& p : ps) {
            REQUIRE(p.grad().defined());
            norm += p.grad().abs().sum().item<double>();
        }
        return norm;
    };
    CHECK(grad_norm(b.encryption->parameters()) > 0.0);
    CHECK(grad_norm(b.encoder->parameters()) > 0.0);
    CHECK(grad_norm(b.decoder->parameters()) > 0.0);
    CHECK(grad_norm(b.decryption->parameters()) > 0.0);
    for (const auto& p : psi.trunk()->parameters()) CHECK_FALSE(p.grad().defined());
}
