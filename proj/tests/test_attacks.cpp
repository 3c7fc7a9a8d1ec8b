#include <filesystem>

#include "djescc/attacks.hpp"
#include "djescc/objective.hpp"
#include "doctest.h"

namespace fs = std::filesystem;
using namespace djescc;

namespace {

fs::path temp_dir(const std::string& tag) {
    fs::path dir = fs::temp_directory_path() / ("djescc_attack_" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

// literal application of the flip rule, one component at a time
uint8_t fr_oracle(uint8_t value, int b, bool literal_floor) {
    const int lead = literal_floor ? value : value / 128;
    if (lead != b) return static_cast<uint8_t>(value ^ 255);
    return value;
}

torch::Tensor natural_images(int64_t n, uint64_t seed) {
    fs::path cache = temp_dir("imgs_" + std::to_string(seed));
    SyntheticSpec spec;
    spec.train_count = n;
    spec.test_count = 4;
    spec.seed = seed;
    generate_synthetic_dataset(cache, "s", spec);
    return load_dataset("s", "train", cache).images;
}

}  // namespace

TEST_CASE("fr attack matches the bitwise oracle on every component value") {
    torch::Tensor all = torch::arange(256, torch::kUInt8).view({1, 1, 16, 16});
    for (int b : {0, 1}) {
        torch::Tensor out = fr_attack(all.expand({1, 3, 16, 16}).contiguous(), b);
        auto acc = out.accessor<uint8_t, 4>();
        for (int v = 0; v < 256; ++v) {
            const uint8_t expect = fr_oracle(static_cast<uint8_t>(v), b, false);
            CHECK(acc[0][0][v / 16][v % 16] == expect);
            // every output component's leading bit equals b
            CHECK(acc[0][0][v / 16][v % 16] / 128 == b);
        }
    }
}

TEST_CASE("fr attack spot values from the rule") {
    torch::Tensor img = torch::tensor({200, 100, 0}, torch::kUInt8).view({1, 3, 1, 1});
    torch::Tensor out = fr_attack(img.expand({1, 3, 1, 3}).contiguous(), 0);
    // component 200 has leading bit 1 -> 200 xor 255 = 55; 100 and 0 stay
    CHECK(fr_attack(torch::full({1, 3, 4, 4}, 200, torch::kUInt8), 0)[0][0][0][0].item<int>() == 55);
    CHECK(fr_attack(torch::full({1, 3, 4, 4}, 100, torch::kUInt8), 0)[0][0][0][0].item<int>() == 100);
    torch::Tensor zeros = torch::zeros({1, 3, 4, 4}, torch::kUInt8);
    CHECK(fr_attack(zeros, 0).equal(zeros));
}

TEST_CASE("fr attack equals the oracle on random images") {
    torch::manual_seed(12);
    for (int trial = 0; trial < 50; ++trial) {
        torch::Tensor img = torch::randint(0, 256, {1, 3, 8, 8}, torch::kUInt8);
        const int b = trial % 2;
        torch::Tensor out = fr_attack(img, b);
        auto in_acc = img.accessor<uint8_t, 4>();
        auto out_acc = out.accessor<uint8_t, 4>();
        for (int64_t c = 0; c < 3; ++c)
            for (int64_t i = 0; i < 8; ++i)
                for (int64_t j = 0; j < 8; ++j)
                    CHECK(out_acc[0][c][i][j] == fr_oracle(in_acc[0][c][i][j], b, false));
    }
}

TEST_CASE("fr attack literal-floor mode flips everything except the bit value") {
    torch::Tensor all = torch::arange(256, torch::kUInt8).view({1, 1, 16, 16});
    torch::Tensor out = fr_attack(all, 1, /*literal_floor=*/true);
    auto acc = out.accessor<uint8_t, 4>();
    for (int v = 0; v < 256; ++v)
        CHECK(acc[0][0][v / 16][v % 16] == fr_oracle(static_cast<uint8_t>(v), 1, true));
    CHECK_THROWS(fr_attack(all.to(torch::kFloat32), 0));
    CHECK_THROWS(fr_attack(all, 2));
}

TEST_CASE("pixel_invert is the 255-complement involution") {
    torch::Tensor img = torch::tensor({0, 255, 100}, torch::kUInt8).view({1, 3, 1, 1});
    torch::Tensor inv = pixel_invert(img);
    CHECK(inv[0][0][0][0].item<int>() == 255);
    CHECK(inv[0][1][0][0].item<int>() == 0);
    CHECK(inv[0][2][0][0].item<int>() == 155);
    CHECK(pixel_invert(inv).equal(img));
}

TEST_CASE("inverted images score lower psnr than shuffled ones yet stay structured") {
    torch::Tensor imgs = natural_images(10, 91);
    ShuffleKey key = ShuffleKey::make(3 * 32 * 32, 5);
    for (int64_t i = 0; i < imgs.size(0); ++i) {
        torch::Tensor plain = normalize(imgs.narrow(0, i, 1));
        torch::Tensor inverted = normalize(pixel_invert(imgs.narrow(0, i, 1)));
        torch::Tensor shuffled = normalize(keyed_shuffle_encrypt(imgs.narrow(0, i, 1), key));
        CHECK(psnr(plain, inverted) < psnr(plain, shuffled));
    }
}

TEST_CASE("keyed shuffle round-trips and preserves the histogram") {
    torch::manual_seed(13);
    torch::Tensor img = torch::randint(0, 256, {2, 3, 16, 16}, torch::kUInt8);
    ShuffleKey key = ShuffleKey::make(3 * 16 * 16, 21);
    torch::Tensor enc = keyed_shuffle_encrypt(img, key);
    CHECK_FALSE(enc.equal(img));
    CHECK(keyed_shuffle_decrypt(enc, key).equal(img));

    torch::Tensor h_plain = torch::bincount(img.flatten().to(torch::kInt64), {}, 256);
    torch::Tensor h_enc = torch::bincount(enc.flatten().to(torch::kInt64), {}, 256);
    CHECK(h_plain.equal(h_enc));

    ShuffleKey other = ShuffleKey::make(3 * 16 * 16, 22);
    CHECK_FALSE(other.perm.equal(key.perm));

    ShuffleKey wrong = ShuffleKey::make(100, 21);
    CHECK_THROWS(keyed_shuffle_encrypt(img, wrong));
}

TEST_CASE("shuffle-variant bundles agree with the keyed shuffle cipher") {
    const uint64_t seed = 313;
    ModelBundle b = ModelBundle::create(16, 0.0, 0.0, 1, 3, CipherVariant::KeyedShuffle, seed);
    torch::Tensor x = torch::rand({2, 3, 32, 32});
    ShuffleKey key = ShuffleKey::make(3 * 32 * 32, seed);
    CHECK(encrypt_forward(b, x).equal(keyed_shuffle_encrypt(x, key)));
    CHECK(decrypt_forward(b, encrypt_forward(b, x)).equal(
        keyed_shuffle_decrypt(keyed_shuffle_encrypt(x, key), key)));
}

TEST_CASE("discriminator emits probabilities") {
    torch::manual_seed(3);
    Discriminator d(3, 32, 32);
    torch::Tensor out = d->forward(torch::rand({4, 3, 32, 32}));
    CHECK(out.sizes() == torch::IntArrayRef({4, 1}));
    CHECK(out.min().item<float>() > 0.0f);
    CHECK(out.max().item<float>() < 1.0f);
}

TEST_CASE("gan attack training is reproducible and shape-preserving") {
    torch::Tensor pool = natural_images(64, 93);
    GanAttackConfig cfg;
    cfg.epochs = 2;
    cfg.batch_size = 8;
    cfg.generator_base_width = 8;
    cfg.seed = 5;

    ShuffleKey key = ShuffleKey::make(3 * 32 * 32, 17);
    CipherFn oracle = [&key](const torch::Tensor& x) { return keyed_shuffle_encrypt(x, key); };

    GanAttackResult a = gan_attack_train(oracle, pool, cfg);
    GanAttackResult b = gan_attack_train(oracle, pool, cfg);
    REQUIRE(a.gen_loss_per_epoch.size() == 2);
    CHECK(a.gen_loss_per_epoch == b.gen_loss_per_epoch);

    auto pa = a.generator->parameters();
    auto pb = b.generator->parameters();
    for (size_t i = 0; i < pa.size(); ++i) CHECK(pa[i].equal(pb[i]));

    torch::NoGradGuard ng;
    torch::Tensor cipher = oracle(normalize(pool.narrow(0, 0, 2)));
    CHECK(a.generator->forward(cipher).sizes() == cipher.sizes());
}

TEST_CASE("run_attack reports one row per target and exports grids") {
    torch::Tensor imgs = natural_images(12, 95);
    torch::Tensor plains = normalize(imgs);
    ShuffleKey key = ShuffleKey::make(3 * 32 * 32, 8);
    torch::Tensor ciphers = normalize(keyed_shuffle_encrypt(imgs, key));

    AttackParams params;
    params.target = "encrypted";
    params.out_dir = temp_dir("report");
    AttackReport report = run_attack("fr", ciphers, plains, params);

    CHECK(report.psnr_per_image.size() == 12);
    CHECK(report.ssim_per_image.size() == 12);
    CHECK((report.fr_bit == 0 || report.fr_bit == 1));
    REQUIRE(report.grid_paths.size() == 1);
    CHECK(fs::exists(report.grid_paths.front()));

    write_attack_csv(report, params.out_dir / "attack.csv");
    write_attack_summary(report, params.out_dir / "summary.txt");
    CHECK(fs::exists(params.out_dir / "attack.csv"));
    CHECK(fs::exists(params.out_dir / "summary.txt"));

    CHECK_THROWS(run_attack("unknown", ciphers, plains, params));
    AttackParams gan_missing;
    gan_missing.target = "encrypted";
    CHECK_THROWS(run_attack("gan", ciphers, plains, gan_missing));
}
