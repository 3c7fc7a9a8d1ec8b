#pragma once

#include <torch/torch.h>

#include <filesystem>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "djescc/channel.hpp"
#include "djescc/image_data.hpp"
#include "djescc/models.hpp"
#include "djescc/objective.hpp"

namespace djescc {

// Fully determines a training run (Eq. 11 with the paper's schedule).
struct ExperimentConfig {
    std::string run_id = "run";
    std::string dataset = "cifar10";
    std::string train_split = "train";
    std::string test_split = "test";
    std::filesystem::path cache_dir = "data";
    std::filesystem::path extractor_dir;

    int64_t t = 16;
    double lambda_e = 0.0;
    double lambda_d = 0.0;
    int64_t in_channels = 3;
    CipherVariant variant = CipherVariant::Learned;
    uint64_t shuffle_seed = 7;

    double snr_db_min = 0.0;
    double snr_db_max = 20.0;
    bool snr_per_image = false;  // default: one SNR draw per batch

    int64_t epochs = 500;
    int64_t batch_size = 64;
    double initial_lr = 1e-3;
    int64_t plateau_patience = 10;
    double plateau_factor = 0.1;
    double plateau_min_delta = 1e-4;

    uint64_t seed = 1;
    std::vector<double> eval_snrs = {0.0, 5.0, 10.0, 15.0, 20.0};
    int64_t eval_repeats = 10;

    int64_t train_subset = -1;  // cap on training images, -1 = all
    int64_t eval_subset = -1;

    std::string config_hash;  // hash of the source config file

    void validate() const;
};

struct EpochLogRow {
    int64_t epoch = 0;
    double l_r = 0.0, l_e = 0.0, l_d = 0.0, l_total = 0.0;
    double lr = 0.0;
};

// One full transmission x -> y -> z -> zhat -> yhat -> xhat. When
// quantize_boundaries is set, y and yhat pass through an 8-bit round trip
// (the owner->provider and provider->recipient file boundaries).
struct TransmissionResult {
    torch::Tensor y;
    torch::Tensor yhat;
    torch::Tensor xhat;
};
TransmissionResult transmit_once(const ModelBundle& bundle, const torch::Tensor& x01,
                                 double snr_db, torch::Generator& noise_gen,
                                 bool quantize_boundaries = false);

// One Adam update on (mu, theta, phi, nu) against L_total with a fresh SNR
// draw. Aborts with a diagnostic dump when the loss is non-finite.
LossBreakdown train_step(ModelBundle& bundle, torch::optim::Adam& opt,
                         const torch::Tensor& batch01, const ExperimentConfig& cfg,
                         const FeatureExtractor& psi, std::mt19937_64& snr_rng,
                         torch::Generator& noise_gen);

// Reduce-on-plateau: after `patience` epochs without the monitored loss
// improving by at least min_delta, the learning rate is multiplied by
// `factor` and the stagnation counter restarts.
class PlateauScheduler {
public:
    PlateauScheduler(double initial_lr, int64_t patience, double factor, double min_delta);
    double observe(double loss);  // returns the lr in effect afterwards
    double lr() const { return lr_; }

    std::string serialize() const;
    static PlateauScheduler deserialize(const std::string& text);

private:
    double lr_;
    int64_t patience_;
    double factor_;
    double min_delta_;
    double best_ = std::numeric_limits<double>::infinity();
    int64_t since_improve_ = 0;
};

struct TrainResult {
    ModelBundle bundle;
    std::vector<EpochLogRow> log;
    std::filesystem::path run_dir;
};

// Trains a bundle under the SNR distribution with the reduce-on-plateau
// schedule; persists best and final checkpoints plus the per-epoch CSV log.
// Resumes from run_dir/resume/ when present (config hash must match).
// stop_after_epochs simulates an interruption for resume testing.
TrainResult fit(const ExperimentConfig& cfg, const DatasetSplit& train,
                const FeatureExtractor& psi, const std::filesystem::path& run_dir,
                int64_t stop_after_epochs = -1);

struct MetricRow {
    std::string run_id;
    double snr_db = 0.0;
    int64_t repeat = 0;
    double psnr = 0.0;
    double ssim = 0.0;
    double l_e = 0.0;
    double l_d = 0.0;
};

struct SnrSummary {
    double snr_db = 0.0;
    double mean_psnr = 0.0;
    double mean_ssim = 0.0;
    double mean_psnr_xy = 0.0;     // PSNR(plain, encrypted) privacy indicator
    double mean_psnr_xyhat = 0.0;  // PSNR(plain, decoded)
    double mean_l_e = 0.0;
    double mean_l_d = 0.0;
};

struct EvalTable {
    std::string run_id;
    bool quantized = false;
    std::vector<MetricRow> rows;
    std::vector<SnrSummary> summary;
};

// Transmits every image eval_repeats times per SNR with independent noise,
// deterministic in (seed, snr index, repeat).
EvalTable evaluate(const ModelBundle& bundle, const DatasetSplit& test,
                   const std::vector<double>& eval_snrs, int64_t eval_repeats,
                   uint64_t seed, const FeatureExtractor& psi,
                   const std::string& run_id = "run", int64_t subset = -1,
                   bool quantize_boundaries = false);

void write_metrics_csv(const EvalTable& table, const std::filesystem::path& path);
void write_summary_csv(const EvalTable& table, const std::filesystem::path& path);

// Fig. 9-style panel: plain / encrypted / decoded / decrypted columns for
// a handful of test images at each eval SNR, one PPM per SNR.
void export_sample_grids(const ModelBundle& bundle, const torch::Tensor& images01,
                         const std::vector<double>& snrs, uint64_t seed,
                         const std::filesystem::path& out_dir);

}  // namespace djescc
