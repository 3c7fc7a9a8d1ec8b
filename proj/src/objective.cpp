#include "djescc/objective.hpp"

#include <cmath>
#include <limits>

namespace djescc {

torch::Tensor recon_loss(const torch::Tensor& x, const torch::Tensor& xhat) {
    TORCH_CHECK(x.sizes() == xhat.sizes(), "recon_loss: shape mismatch ", x.sizes(), " vs ",
                xhat.sizes());
    return torch::mse_loss(xhat, x);
}

torch::Tensor feature_loss(const torch::Tensor& a, const torch::Tensor& b,
                           const FeatureExtractor& psi) {
    TORCH_CHECK(a.sizes() == b.sizes(), "feature_loss: shape mismatch");
    TORCH_CHECK(psi.loaded(), "feature_loss: extractor missing");
    // mse over all feature elements equals the batch mean of (1/m)||ha-hb||^2
    return torch::mse_loss(psi.extract(a), psi.extract(b));
}

LossBreakdown total_loss(const torch::Tensor& x, const torch::Tensor& y,
                         const torch::Tensor& yhat, const torch::Tensor& xhat, double lambda_e,
                         double lambda_d, const FeatureExtractor& psi) {
    TORCH_CHECK(lambda_e >= 0.0 && lambda_d >= 0.0, "total_loss: negative weight");

    LossBreakdown out;
    torch::Tensor lr = recon_loss(x, xhat);
    torch::Tensor total = lr;
    out.l_r = lr.item<double>();

    // Feature terms enter the graph only with nonzero weight; at lambda = 0
    // the gradient of total is exactly the gradient of L_r.
    if (lambda_e > 0.0) {
        torch::Tensor le = feature_loss(x, y, psi);
        total = total - lambda_e * le;
        out.l_e = le.item<double>();
    }
    if (lambda_d > 0.0) {
        torch::Tensor ld = feature_loss(x, yhat, psi);
        total = total - lambda_d * ld;
        out.l_d = ld.item<double>();
    }
    out.total = total;
    out.l_total = out.l_r - lambda_e * out.l_e - lambda_d * out.l_d;
    return out;
}

torch::Tensor psnr_per_image(const torch::Tensor& a, const torch::Tensor& b) {
    TORCH_CHECK(a.sizes() == b.sizes(), "psnr: shape mismatch");
    TORCH_CHECK(a.dim() == 4, "psnr: expected (N,C,H,W)");
    torch::Tensor diff = (a.to(torch::kFloat64) - b.to(torch::kFloat64)) * 255.0;
    torch::Tensor mse = diff.square().flatten(1).mean(1);
    return 10.0 * torch::log10(255.0 * 255.0 / mse);  // mse 0 -> +inf
}

double psnr(const torch::Tensor& a, const torch::Tensor& b) {
    torch::Tensor pa = a, pb = b;
    if (pa.dim() == 3) pa = pa.unsqueeze(0);
    if (pb.dim() == 3) pb = pb.unsqueeze(0);
    torch::Tensor diff = (pa.to(torch::kFloat64) - pb.to(torch::kFloat64)) * 255.0;
    const double mse = diff.square().mean().item<double>();
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(255.0 * 255.0 / mse);
}

namespace {

torch::Tensor gaussian_window(int64_t size, double sigma, torch::Dtype dtype) {
    torch::Tensor coords = torch::arange(size, dtype) - static_cast<double>(size - 1) / 2.0;
    torch::Tensor g = torch::exp(-coords.square() / (2.0 * sigma * sigma));
    g = g / g.sum();
    return torch::outer(g, g);
}

}  // namespace

torch::Tensor ssim_per_image(const torch::Tensor& a, const torch::Tensor& b) {
    TORCH_CHECK(a.sizes() == b.sizes(), "ssim: shape mismatch");
    TORCH_CHECK(a.dim() == 4, "ssim: expected (N,C,H,W)");
    constexpr int64_t kWindow = 11;
    constexpr double kSigma = 1.5;
    constexpr double kL = 255.0;
    constexpr double kC1 = (0.01 * kL) * (0.01 * kL);
    constexpr double kC2 = (0.03 * kL) * (0.03 * kL);
    TORCH_CHECK(a.size(2) >= kWindow && a.size(3) >= kWindow,
                "ssim: image smaller than the ", kWindow, "-pixel window");

    const int64_t channels = a.size(1);
    torch::Tensor x = a.to(torch::kFloat64) * kL;
    torch::Tensor y = b.to(torch::kFloat64) * kL;
    torch::Tensor w =
        gaussian_window(kWindow, kSigma, torch::kFloat64).expand({channels, 1, kWindow, kWindow});

    namespace F = torch::nn::functional;
    auto filt = [&](const torch::Tensor& t) {
        return F::conv2d(t, w, F::Conv2dFuncOptions().groups(channels));
    };

    torch::Tensor mu_x = filt(x);
    torch::Tensor mu_y = filt(y);
    torch::Tensor var_x = filt(x * x) - mu_x.square();
    torch::Tensor var_y = filt(y * y) - mu_y.square();
    torch::Tensor cov = filt(x * y) - mu_x * mu_y;

    torch::Tensor num = (2.0 * mu_x * mu_y + kC1) * (2.0 * cov + kC2);
    torch::Tensor den = (mu_x.square() + mu_y.square() + kC1) * (var_x + var_y + kC2);
    return (num / den).flatten(1).mean(1);
}

double ssim(const torch::Tensor& a, const torch::Tensor& b) {
    torch::Tensor pa = a, pb = b;
    if (pa.dim() == 3) pa = pa.unsqueeze(0);
    if (pb.dim() == 3) pb = pb.unsqueeze(0);
    return ssim_per_image(pa, pb).mean().item<double>();
}

}  // namespace djescc
