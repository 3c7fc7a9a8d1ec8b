#pragma once

#include <torch/torch.h>

#include "djescc/models.hpp"

namespace djescc {

// Per-batch loss terms. l_total = l_r - lambda_e*l_e - lambda_d*l_d holds
// exactly; total keeps the autograd graph.
struct LossBreakdown {
    torch::Tensor total;
    double l_r = 0.0;
    double l_e = 0.0;
    double l_d = 0.0;
    double l_total = 0.0;
};

// Mean squared error between plain and decrypted images, (1/n)||x - xhat||^2
// averaged over the batch.
torch::Tensor recon_loss(const torch::Tensor& x, const torch::Tensor& xhat);

// Feature distance (1/m)||h(a) - h(b)||^2 averaged over the batch. Used for
// L_e (b = encrypted) and L_d (b = decoded).
torch::Tensor feature_loss(const torch::Tensor& a, const torch::Tensor& b,
                           const FeatureExtractor& psi);

// L_total = L_r - lambda_e*L_e - lambda_d*L_d. Feature terms enter the
// graph only when their weight is nonzero, so at lambda_e = lambda_d = 0
// the gradient of total is identically the gradient of L_r.
LossBreakdown total_loss(const torch::Tensor& x, const torch::Tensor& y,
                         const torch::Tensor& yhat, const torch::Tensor& xhat,
                         double lambda_e, double lambda_d,
                         const FeatureExtractor& psi);

// 10*log10(255^2 / MSE) with MSE in the 0..255 domain; inputs are [0,1]
// tensors. Identical images report +inf.
double psnr(const torch::Tensor& a, const torch::Tensor& b);

// Single-scale SSIM, 11x11 Gaussian window sigma 1.5, K1=0.01, K2=0.03,
// dynamic range 255, averaged over channels and batch.
double ssim(const torch::Tensor& a, const torch::Tensor& b);

// Per-image variants over a batch, (N) float64 tensors.
torch::Tensor psnr_per_image(const torch::Tensor& a, const torch::Tensor& b);
torch::Tensor ssim_per_image(const torch::Tensor& a, const torch::Tensor& b);

}  // namespace djescc
