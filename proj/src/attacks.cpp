#include "djescc/attacks.hpp"

#include <cstdio>
#include <fstream>

#include "djescc/objective.hpp"

namespace fs = std::filesystem;

namespace djescc {

ShuffleKey ShuffleKey::make(int64_t n, uint64_t seed) {
    TORCH_CHECK(n >= 1, "ShuffleKey: n must be positive");
    std::vector<int64_t> perm = seeded_permutation(n, seed);
    std::vector<int64_t> inv(perm.size());
    for (size_t i = 0; i < perm.size(); ++i)
        inv[static_cast<size_t>(perm[i])] = static_cast<int64_t>(i);
    ShuffleKey key;
    key.perm = torch::tensor(perm, torch::kInt64);
    key.inv = torch::tensor(inv, torch::kInt64);
    key.seed = seed;
    return key;
}

namespace {

torch::Tensor apply_key(const torch::Tensor& img, const torch::Tensor& index) {
    const bool single = img.dim() == 3;
    torch::Tensor x = single ? img.unsqueeze(0) : img;
    TORCH_CHECK(x.dim() == 4, "keyed shuffle: expected (C,H,W) or (N,C,H,W)");
    TORCH_CHECK(x.numel() / x.size(0) == index.size(0), "keyed shuffle: key length ",
                index.size(0), " does not match image size ", x.numel() / x.size(0));
    torch::Tensor out = x.flatten(1).index_select(1, index).view(x.sizes());
    return single ? out.squeeze(0) : out;
}

}  // namespace

torch::Tensor keyed_shuffle_encrypt(const torch::Tensor& img, const ShuffleKey& key) {
    return apply_key(img, key.perm);
}

torch::Tensor keyed_shuffle_decrypt(const torch::Tensor& img, const ShuffleKey& key) {
    return apply_key(img, key.inv);
}

torch::Tensor pixel_invert(const torch::Tensor& img_u8) {
    TORCH_CHECK(img_u8.dtype() == torch::kUInt8, "pixel_invert: expected uint8");
    return (255 - img_u8.to(torch::kInt16)).to(torch::kUInt8);
}

torch::Tensor fr_attack(const torch::Tensor& cipher_u8, int b, bool literal_floor) {
    TORCH_CHECK(cipher_u8.dtype() == torch::kUInt8, "fr_attack: expected an 8-bit image");
    TORCH_CHECK(b == 0 || b == 1, "fr_attack: leading bit must be 0 or 1");
    torch::Tensor v = cipher_u8.to(torch::kInt32);
    torch::Tensor mismatch;
    if (literal_floor) {
        // floor of an integer-valued component is the component itself
        mismatch = v.ne(b);
    } else {
        mismatch = v.div(128, "floor").ne(b);  // leading bit of the 8-bit component
    }
    torch::Tensor flipped = v.bitwise_xor(255);
    return torch::where(mismatch, flipped, v).to(torch::kUInt8);
}

DiscriminatorImpl::DiscriminatorImpl(int64_t in_channels, int64_t height, int64_t width) {
    namespace nn = torch::nn;
    c1 = register_module("c1", nn::Conv2d(nn::Conv2dOptions(in_channels, 16, 2).stride(2)));
    c2 = register_module("c2", nn::Conv2d(nn::Conv2dOptions(16, 16, 2).stride(2)));
    c3 = register_module("c3", nn::Conv2d(nn::Conv2dOptions(16, 32, 2).stride(2)));
    fc = register_module("fc", nn::Linear(32 * (height / 8) * (width / 8), 1));
}

torch::Tensor DiscriminatorImpl::forward(torch::Tensor x) {
    namespace F = torch::nn::functional;
    const auto opts = F::LeakyReLUFuncOptions().negative_slope(0.2);
    x = F::leaky_relu(c1(x), opts);
    x = F::leaky_relu(c2(x), opts);
    x = F::leaky_relu(c3(x), opts);
    return torch::sigmoid(fc(x.flatten(1)));
}

GanAttackResult gan_attack_train(const CipherFn& cipher_fn, const torch::Tensor& train_images_u8,
                                 const GanAttackConfig& cfg) {
    TORCH_CHECK(train_images_u8.dim() == 4 && train_images_u8.dtype() == torch::kUInt8,
                "gan_attack_train: expected uint8 (N,C,H,W)");
    const int64_t n = train_images_u8.size(0);
    TORCH_CHECK(n >= 2 * cfg.batch_size, "gan_attack_train: dataset too small");
    const int64_t channels = train_images_u8.size(1);

    torch::manual_seed(cfg.seed);
    GanAttackResult result;
    result.generator = TransformNet(channels, channels, cfg.generator_base_width);
    Discriminator disc(channels, train_images_u8.size(2), train_images_u8.size(3));

    torch::optim::Adam opt_g(result.generator->parameters(), torch::optim::AdamOptions(cfg.lr));
    torch::optim::Adam opt_d(disc->parameters(), torch::optim::AdamOptions(cfg.lr));

    // disjoint equal halves: X1 stays plain, X2 feeds the encryption oracle
    const int64_t half = n / 2;
    auto split_perm = seeded_permutation(n, cfg.seed ^ 0x58315832ull);
    torch::Tensor idx = torch::tensor(split_perm, torch::kInt64);
    torch::Tensor x1 = train_images_u8.index_select(0, idx.narrow(0, 0, half));
    torch::Tensor x2 = train_images_u8.index_select(0, idx.narrow(0, half, half));

    namespace F = torch::nn::functional;
    const int64_t steps_per_epoch = half / cfg.batch_size;
    int64_t collapse_run = 0;

    for (int64_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        auto ord1 = seeded_permutation(half, cfg.seed ^ (0x443100ull + static_cast<uint64_t>(epoch)));
        auto ord2 = seeded_permutation(half, cfg.seed ^ (0x443200ull + static_cast<uint64_t>(epoch)));
        double g_sum = 0.0, d_sum = 0.0;

        for (int64_t step = 0; step < steps_per_epoch; ++step) {
            auto take = [&](const torch::Tensor& pool, const std::vector<int64_t>& ord) {
                std::vector<int64_t> ids(ord.begin() + step * cfg.batch_size,
                                         ord.begin() + (step + 1) * cfg.batch_size);
                return normalize(pool.index_select(0, torch::tensor(ids, torch::kInt64)));
            };
            torch::Tensor real = take(x1, ord1);
            torch::Tensor cipher;
            {
                torch::NoGradGuard ng;
                cipher = cipher_fn(take(x2, ord2)).detach();
            }

            torch::Tensor fake = result.generator->forward(cipher);

            opt_d.zero_grad();
            torch::Tensor d_real = disc->forward(real);
            torch::Tensor d_fake = disc->forward(fake.detach());
            torch::Tensor loss_d = F::binary_cross_entropy(d_real, torch::ones_like(d_real)) +
                                   F::binary_cross_entropy(d_fake, torch::zeros_like(d_fake));
            loss_d.backward();
            opt_d.step();

            opt_g.zero_grad();
            torch::Tensor d_gen = disc->forward(fake);
            torch::Tensor loss_g = F::binary_cross_entropy(d_gen, torch::ones_like(d_gen));
            loss_g.backward();
            opt_g.step();

            g_sum += loss_g.item<double>();
            d_sum += loss_d.item<double>();
        }

        const double g_mean = g_sum / steps_per_epoch;
        const double d_mean = d_sum / steps_per_epoch;
        result.gen_loss_per_epoch.push_back(g_mean);
        result.disc_loss_per_epoch.push_back(d_mean);

        if (d_mean < cfg.collapse_threshold) {
            if (++collapse_run >= cfg.collapse_patience) {
                result.warnings.push_back("discriminator collapse at epoch " +
                                          std::to_string(epoch));
                collapse_run = 0;
            }
        } else {
            collapse_run = 0;
        }
        std::printf("[gan-attack] epoch %4lld  g=%.4f d=%.4f\n", static_cast<long long>(epoch),
                    g_mean, d_mean);
        std::fflush(stdout);
    }
    return result;
}

namespace {

torch::Tensor montage_row(const std::vector<torch::Tensor>& imgs, int64_t pad = 2) {
    const int64_t h = imgs.front().size(1), w = imgs.front().size(2);
    const int64_t cols = static_cast<int64_t>(imgs.size());
    torch::Tensor canvas =
        torch::full({3, h + 2 * pad, cols * w + (cols + 1) * pad}, 255, torch::kUInt8);
    for (int64_t c = 0; c < cols; ++c)
        canvas.narrow(1, pad, h)
            .narrow(2, pad + c * (w + pad), w)
            .copy_(imgs[static_cast<size_t>(c)]);
    return canvas;
}

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

}  // namespace

AttackReport run_attack(const std::string& method, const torch::Tensor& targets01,
                        const torch::Tensor& plains01, const AttackParams& params) {
    TORCH_CHECK(targets01.sizes() == plains01.sizes(),
                "run_attack: target/plain shape mismatch");
    TORCH_CHECK(method == "fr" || method == "gan", "run_attack: method must be fr or gan");
    torch::NoGradGuard no_grad;

    torch::Tensor cipher_u8 = denormalize(targets01);
    torch::Tensor recon01;
    AttackReport report;
    report.method = method;
    report.target = params.target;

    if (method == "fr") {
        torch::Tensor cand0 = normalize(fr_attack(cipher_u8, 0, params.literal_floor));
        torch::Tensor cand1 = normalize(fr_attack(cipher_u8, 1, params.literal_floor));
        const double p0 = psnr_per_image(plains01, cand0).mean().item<double>();
        const double p1 = psnr_per_image(plains01, cand1).mean().item<double>();
        report.fr_bit = p0 >= p1 ? 0 : 1;
        recon01 = report.fr_bit == 0 ? cand0 : cand1;
    } else {
        TORCH_CHECK(params.generator, "run_attack: gan method requires a trained generator");
        TransformNet generator = params.generator;
        generator->eval();
        recon01 = generator->forward(normalize(cipher_u8));
    }

    torch::Tensor ppi = psnr_per_image(plains01, recon01);
    torch::Tensor spi = ssim_per_image(plains01, recon01);
    for (int64_t i = 0; i < ppi.size(0); ++i) {
        report.psnr_per_image.push_back(ppi[i].item<double>());
        report.ssim_per_image.push_back(spi[i].item<double>());
    }
    report.mean_psnr = mean_of(report.psnr_per_image);
    report.mean_ssim = mean_of(report.ssim_per_image);

    if (!params.out_dir.empty()) {
        fs::create_directories(params.out_dir);
        const int64_t g = std::min<int64_t>(params.grid_images, plains01.size(0));
        std::vector<torch::Tensor> rows;
        for (int64_t i = 0; i < g; ++i) {
            rows.push_back(montage_row(
                {denormalize(plains01[i]), cipher_u8[i], denormalize(recon01[i])}));
        }
        torch::Tensor grid = torch::cat(rows, 1);
        const fs::path grid_path =
            params.out_dir / (method + "_" + params.target + "_grid.ppm");
        write_ppm(grid_path, grid);
        report.grid_paths.push_back(grid_path);
    }
    return report;
}

void write_attack_csv(const AttackReport& report, const fs::path& path) {
    std::ofstream out(path, std::ios::trunc);
    out << "method,target,image,psnr,ssim\n";
    char buf[128];
    for (size_t i = 0; i < report.psnr_per_image.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%s,%s,%zu,%.6f,%.6f\n", report.method.c_str(),
                      report.target.c_str(), i, report.psnr_per_image[i],
                      report.ssim_per_image[i]);
        out << buf;
    }
}

void write_attack_summary(const AttackReport& report, const fs::path& path) {
    std::ofstream out(path, std::ios::trunc);
    out << "attack method: " << report.method << "\n";
    out << "target images: " << report.target << "\n";
    out << "images: " << report.psnr_per_image.size() << "\n";
    if (report.fr_bit >= 0) out << "fr leading bit: " << report.fr_bit << "\n";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "mean psnr: %.6f\n", report.mean_psnr);
    out << buf;
    std::snprintf(buf, sizeof(buf), "mean ssim: %.6f\n", report.mean_ssim);
    out << buf;
    for (const auto& p : report.grid_paths) out << "grid: " << p.string() << "\n";
}

}  // namespace djescc
