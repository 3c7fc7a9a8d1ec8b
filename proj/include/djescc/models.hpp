#pragma once

#include <torch/torch.h>

#include <filesystem>
#include <string>
#include <vector>

#include "djescc/channel.hpp"
#include "djescc/image_data.hpp"

namespace djescc {

// Shallow 2-level U-Net shared by the encryption net, the decryption net
// and the GAN-attack generator: two 3x3 conv+PReLU blocks, 2x down,
// bottleneck, 2x up with skip concatenation, two conv blocks, final 1x1
// conv + sigmoid. Fully convolutional, same-size output.
struct TransformNetImpl : torch::nn::Module {
    TransformNetImpl(int64_t in_channels = 3, int64_t out_channels = 3,
                     int64_t base_width = 32);
    torch::Tensor forward(torch::Tensor x);

    torch::nn::Conv2d enc_a{nullptr}, enc_b{nullptr};
    torch::nn::Conv2d mid_a{nullptr}, mid_b{nullptr};
    torch::nn::Conv2d dec_a{nullptr}, dec_b{nullptr}, head{nullptr};
    torch::nn::ConvTranspose2d up{nullptr};
    torch::nn::MaxPool2d pool{nullptr};
    torch::nn::PReLU act_enc_a{nullptr}, act_enc_b{nullptr}, act_mid_a{nullptr},
        act_mid_b{nullptr}, act_up{nullptr}, act_dec_a{nullptr}, act_dec_b{nullptr};
};
TORCH_MODULE(TransformNet);

// DJSCC encoder: five 5x5 conv+PReLU stages with strides (2,2,1,1,1) and
// widths (base,2b,2b,2b,t), base 16 by default, then flatten, complex
// packing and per-image power normalization. k = h*w*t/32 per image.
struct EncoderImpl : torch::nn::Module {
    EncoderImpl(int64_t in_channels, int64_t t, int64_t base = 16);
    SymbolBlock forward(torch::Tensor y);

    int64_t t;
    torch::nn::Conv2d c1{nullptr}, c2{nullptr}, c3{nullptr}, c4{nullptr}, c5{nullptr};
    torch::nn::PReLU a1{nullptr}, a2{nullptr}, a3{nullptr}, a4{nullptr}, a5{nullptr};
};
TORCH_MODULE(Encoder);

// Mirror of the encoder: five 5x5 transposed-conv stages, strides
// (1,1,1,2,2), widths (2b,2b,2b,base,out), PReLU x4 then sigmoid.
struct DecoderImpl : torch::nn::Module {
    DecoderImpl(int64_t out_channels, int64_t t, int64_t base = 16);
    torch::Tensor forward(const SymbolBlock& zhat, int64_t height, int64_t width);

    int64_t t;
    int64_t out_channels;
    torch::nn::ConvTranspose2d d1{nullptr}, d2{nullptr}, d3{nullptr}, d4{nullptr}, d5{nullptr};
    torch::nn::PReLU a1{nullptr}, a2{nullptr}, a3{nullptr}, a4{nullptr};
};
TORCH_MODULE(Decoder);

int64_t symbols_per_image(int64_t height, int64_t width, int64_t t);

struct FeatureExtractorConfig {
    int64_t cut_blocks = 3;    // trunk blocks kept for feature extraction
    double width_mult = 1.0;   // 1.0 = faithful VGG16-bn widths
    int64_t in_channels = 3;
};

// VGG16-bn convolutional trunk (13 convs in 5 blocks, each conv followed by
// batch norm and ReLU, max-pool per block). forward() runs the first
// cut_blocks blocks. Always evaluated in inference mode once frozen;
// gradients still flow to the input.
struct VggTrunkImpl : torch::nn::Module {
    explicit VggTrunkImpl(const FeatureExtractorConfig& cfg);
    torch::Tensor forward(torch::Tensor x);
    torch::Tensor forward_all(torch::Tensor x);  // all five blocks

    FeatureExtractorConfig cfg;
    std::vector<torch::nn::Sequential> blocks;
};
TORCH_MODULE(VggTrunk);

struct VggClassifierImpl : torch::nn::Module {
    VggClassifierImpl(const FeatureExtractorConfig& cfg, int64_t num_classes);
    torch::Tensor forward(torch::Tensor x);

    VggTrunk trunk{nullptr};
    torch::nn::AdaptiveAvgPool2d pool{nullptr};
    torch::nn::Linear fc{nullptr};
};
TORCH_MODULE(VggClassifier);

// Frozen feature extractor. Identical inputs yield identical features.
class FeatureExtractor {
public:
    FeatureExtractor() = default;
    FeatureExtractor(VggTrunk trunk, FeatureExtractorConfig cfg);

    torch::Tensor extract(const torch::Tensor& img01) const;
    int64_t feature_count(int64_t height, int64_t width) const;  // m
    void to(torch::Dtype dtype);
    bool loaded() const { return trunk_.get() != nullptr; }
    const FeatureExtractorConfig& config() const { return cfg_; }
    VggTrunk trunk() const { return trunk_; }

    void save(const std::filesystem::path& dir) const;
    static FeatureExtractor load(const std::filesystem::path& dir,
                                 int64_t cut_override = -1);

private:
    VggTrunk trunk_{nullptr};
    FeatureExtractorConfig cfg_;
};

struct PretrainConfig {
    int64_t epochs = 30;
    int64_t batch_size = 128;
    double lr = 1e-3;
    uint64_t seed = 1;
    FeatureExtractorConfig extractor;
};

struct PretrainResult {
    double test_accuracy = 0.0;
    std::filesystem::path checkpoint_dir;
};

// Trains a VGG16-bn classifier on the labeled split, records test accuracy,
// and saves the convolutional trunk as the frozen extractor psi.
PretrainResult pretrain_feature_extractor(const DatasetSplit& train,
                                          const DatasetSplit& test,
                                          const PretrainConfig& cfg,
                                          const std::filesystem::path& out_dir);

// How the owner/recipient transform is realized. Learned is the DJESCC
// method; the others are fixed-op baselines trained as plain DJSCC in the
// transformed domain.
enum class CipherVariant { Learned, KeyedShuffle, PixelInvert, Identity };

std::string to_string(CipherVariant v);
CipherVariant cipher_variant_from_string(const std::string& s);

// The four parameter sets of Eq. 11 plus their hyperparameters. For
// non-Learned variants the encryption/decryption nets are absent and the
// fixed op (keyed by shuffle_seed) stands in.
struct ModelBundle {
    TransformNet encryption{nullptr};
    Encoder encoder{nullptr};
    Decoder decoder{nullptr};
    TransformNet decryption{nullptr};

    int64_t t = 16;
    int64_t in_channels = 3;
    double lambda_e = 0.0;
    double lambda_d = 0.0;
    CipherVariant variant = CipherVariant::Learned;
    uint64_t shuffle_seed = 0;
    std::string config_hash;

    double bandwidth_ratio() const { return static_cast<double>(t) / 96.0; }
    std::vector<torch::Tensor> trainable_parameters() const;
    void to(torch::Dtype dtype);
    void train(bool on = true);
    void eval();

    static ModelBundle create(int64_t t, double lambda_e, double lambda_d,
                              uint64_t init_seed, int64_t in_channels = 3,
                              CipherVariant variant = CipherVariant::Learned,
                              uint64_t shuffle_seed = 0);

    void save(const std::filesystem::path& dir) const;
    static ModelBundle load(const std::filesystem::path& dir);

    // Key-distribution split: each sub-bundle is independently loadable.
    void export_encryption(const std::filesystem::path& dir) const;
    void export_decryption(const std::filesystem::path& dir) const;
    void export_codec(const std::filesystem::path& dir) const;
};

// Eq. 1: y = e_mu(x), same shape as x, values in [0,1].
torch::Tensor encrypt_forward(const ModelBundle& bundle, const torch::Tensor& x);
// Eq. 2 (+ power constraint): z = f_theta(y).
SymbolBlock encode_forward(const ModelBundle& bundle, const torch::Tensor& y);
// Eq. 4: yhat = g_phi(zhat).
torch::Tensor decode_forward(const ModelBundle& bundle, const SymbolBlock& zhat,
                             int64_t height, int64_t width);
// Eq. 5: xhat = d_nu(yhat).
torch::Tensor decrypt_forward(const ModelBundle& bundle, const torch::Tensor& yhat);

}  // namespace djescc
