#pragma once

#include <torch/torch.h>

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "djescc/models.hpp"

namespace djescc {

// Bijective permutation over the n = h*w*c component positions,
// reproducible from the seed.
struct ShuffleKey {
    torch::Tensor perm;  // (n) int64
    torch::Tensor inv;   // inverse permutation
    uint64_t seed = 0;

    int64_t n() const { return perm.size(0); }
    static ShuffleKey make(int64_t n, uint64_t seed);
};

// Permutes every image's flattened components. Works on uint8 or float,
// (C,H,W) or (N,C,H,W); preserves the multiset of component values.
torch::Tensor keyed_shuffle_encrypt(const torch::Tensor& img, const ShuffleKey& key);
torch::Tensor keyed_shuffle_decrypt(const torch::Tensor& img, const ShuffleKey& key);

// 255 - v per component; involution.
torch::Tensor pixel_invert(const torch::Tensor& img_u8);

// FR attack (ciphertext only): flip each 8-bit component whose leading bit
// differs from b by XOR with 255. literal_floor reads the algorithm's
// floor notation literally (compares floor(value) to b) for fidelity audits.
torch::Tensor fr_attack(const torch::Tensor& cipher_u8, int b, bool literal_floor = false);

// Plain-domain images in [0,1] -> cipher images in [0,1].
using CipherFn = std::function<torch::Tensor(const torch::Tensor&)>;

// Three conv layers, kernel 2, stride 2, channels 16,16,32, leaky ReLU,
// then a dense layer with sigmoid on the flattened features.
struct DiscriminatorImpl : torch::nn::Module {
    DiscriminatorImpl(int64_t in_channels, int64_t height, int64_t width);
    torch::Tensor forward(torch::Tensor x);

    torch::nn::Conv2d c1{nullptr}, c2{nullptr}, c3{nullptr};
    torch::nn::Linear fc{nullptr};
};
TORCH_MODULE(Discriminator);

struct GanAttackConfig {
    int64_t epochs = 600;
    double lr = 1e-4;
    int64_t batch_size = 64;
    int64_t generator_base_width = 32;
    uint64_t seed = 1;
    double collapse_threshold = 1e-6;
    int64_t collapse_patience = 20;
};

struct GanAttackResult {
    TransformNet generator{nullptr};
    std::vector<std::string> warnings;
    std::vector<double> gen_loss_per_epoch;
    std::vector<double> disc_loss_per_epoch;
};

// Unpaired GAN attack: the plain set is split into disjoint equal halves
// X1/X2, X2 is pushed through the encryption oracle, and generator and
// discriminator are updated alternately (non-saturating loss). The
// attacker never sees (plain, cipher) pairs.
GanAttackResult gan_attack_train(const CipherFn& cipher_fn,
                                 const torch::Tensor& train_images_u8,
                                 const GanAttackConfig& cfg);

struct AttackReport {
    std::string method;  // fr | gan
    std::string target;  // encrypted | decoded
    std::vector<double> psnr_per_image;
    std::vector<double> ssim_per_image;
    double mean_psnr = 0.0;
    double mean_ssim = 0.0;
    int fr_bit = -1;  // winning b for the FR attack
    std::vector<std::filesystem::path> grid_paths;
};

struct AttackParams {
    std::string target = "encrypted";    // encrypted | decoded
    std::filesystem::path out_dir;       // empty: no grid export
    int64_t grid_images = 8;
    TransformNet generator{nullptr};     // required for method "gan"
    bool literal_floor = false;
};

// Runs the attack on cipher images (quantized to 8 bits first — the attack
// sees what crosses the wire) and scores reconstructions against plains.
// FR evaluates both b in {0,1} and reports the better by mean PSNR.
AttackReport run_attack(const std::string& method, const torch::Tensor& targets01,
                        const torch::Tensor& plains01, const AttackParams& params);

void write_attack_csv(const AttackReport& report, const std::filesystem::path& path);
void write_attack_summary(const AttackReport& report, const std::filesystem::path& path);

}  // namespace djescc
