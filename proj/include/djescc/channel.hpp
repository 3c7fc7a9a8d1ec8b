#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <random>

namespace djescc {

// A block of k complex channel symbols per image, stored as the real
// tensor (N, 2k): first half real parts, second half imaginary parts.
// Gradients flow through `iq`.
struct SymbolBlock {
    torch::Tensor iq;  // (N, 2k) float
    int64_t k = 0;

    int64_t batch() const { return iq.size(0); }
    torch::Tensor real_parts() const { return iq.narrow(1, 0, k); }
    torch::Tensor imag_parts() const { return iq.narrow(1, k, k); }
    torch::Tensor as_complex() const;  // (N, k) complex
};

enum class SnrMode { TrainSample, FixedTest };

struct ChannelConfig {
    double snr_db_min = 0.0;
    double snr_db_max = 20.0;
    SnrMode mode = SnrMode::TrainSample;
};

// Flattened reals (N, 2k) -> complex symbols by the half-split convention.
SymbolBlock pack_complex(const torch::Tensor& reals);
// Exact inverse of pack_complex.
torch::Tensor unpack_complex(const SymbolBlock& block);

// Per-image average power, (N) tensor: (1/k) sum |z_i|^2.
torch::Tensor average_power(const SymbolBlock& block);

// Scales each image's block to unit average power. Zero-energy input is a
// degenerate case and throws.
SymbolBlock power_normalize(const SymbolBlock& raw);

// sigma^2 = 10^(-snr_db/10) under unit signal power.
double snr_to_sigma2(double snr_db);

// z + w with w circularly symmetric complex Gaussian, variance sigma2 per
// symbol (sigma2/2 per I/Q component). Differentiable, additive.
SymbolBlock awgn_apply(const SymbolBlock& z, double sigma2, torch::Generator& gen);
// Per-image noise power, sigma2: (N) tensor.
SymbolBlock awgn_apply(const SymbolBlock& z, const torch::Tensor& sigma2, torch::Generator& gen);

double sample_snr(const ChannelConfig& cfg, std::mt19937_64& rng);

}  // namespace djescc
