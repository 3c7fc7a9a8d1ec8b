#include "djescc/channel.hpp"

#include <cmath>

namespace djescc {

torch::Tensor SymbolBlock::as_complex() const {
    return torch::complex(real_parts(), imag_parts());
}

SymbolBlock pack_complex(const torch::Tensor& reals) {
    TORCH_CHECK(reals.dim() == 2, "pack_complex: expected (N, 2k), got dim ", reals.dim());
    TORCH_CHECK(reals.size(1) % 2 == 0, "pack_complex: odd length ", reals.size(1));
    return SymbolBlock{reals, reals.size(1) / 2};
}

torch::Tensor unpack_complex(const SymbolBlock& block) { return block.iq; }

torch::Tensor average_power(const SymbolBlock& block) {
    // sum of re^2 + im^2 over the iq vector equals sum |z_i|^2
    return block.iq.square().sum(1) / static_cast<double>(block.k);
}

SymbolBlock power_normalize(const SymbolBlock& raw) {
    torch::Tensor energy = raw.iq.square().sum(1, /*keepdim=*/true);
    TORCH_CHECK(energy.gt(0).all().item<bool>(), "power_normalize: zero-energy block");
    torch::Tensor scale = torch::sqrt(static_cast<double>(raw.k) / energy);
    return SymbolBlock{raw.iq * scale, raw.k};
}

double snr_to_sigma2(double snr_db) {
    TORCH_CHECK(std::isfinite(snr_db), "snr_to_sigma2: snr_db must be finite");
    return std::pow(10.0, -snr_db / 10.0);
}

SymbolBlock awgn_apply(const SymbolBlock& z, double sigma2, torch::Generator& gen) {
    TORCH_CHECK(sigma2 >= 0.0, "awgn_apply: sigma2 must be non-negative, got ", sigma2);
    if (sigma2 == 0.0) return z;
    // sigma2 per complex symbol, sigma2/2 per I/Q component
    torch::Tensor noise =
        torch::randn(z.iq.sizes(), gen, z.iq.options()) * std::sqrt(sigma2 / 2.0);
    return SymbolBlock{z.iq + noise, z.k};
}

SymbolBlock awgn_apply(const SymbolBlock& z, const torch::Tensor& sigma2, torch::Generator& gen) {
    TORCH_CHECK(sigma2.dim() == 1 && sigma2.size(0) == z.batch(),
                "awgn_apply: sigma2 must be (N)");
    TORCH_CHECK(sigma2.ge(0).all().item<bool>(), "awgn_apply: sigma2 must be non-negative");
    torch::Tensor scale = (sigma2.to(z.iq.dtype()) / 2.0).sqrt().unsqueeze(1);
    torch::Tensor noise = torch::randn(z.iq.sizes(), gen, z.iq.options()) * scale;
    return SymbolBlock{z.iq + noise, z.k};
}

double sample_snr(const ChannelConfig& cfg, std::mt19937_64& rng) {
    TORCH_CHECK(cfg.snr_db_min <= cfg.snr_db_max, "sample_snr: snr_db_min > snr_db_max");
    if (cfg.mode == SnrMode::FixedTest || cfg.snr_db_min == cfg.snr_db_max)
        return cfg.snr_db_min;
    std::uniform_real_distribution<double> dist(cfg.snr_db_min, cfg.snr_db_max);
    return dist(rng);
}

}  // namespace djescc
