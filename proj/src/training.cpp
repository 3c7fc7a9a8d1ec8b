#include "djescc/training.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace djescc {

namespace {

uint64_t mix64(uint64_t a, uint64_t b) {
    uint64_t x = a ^ (b + 0x9e3779b97f4a7c15ull + (a << 6) + (a >> 2));
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    return x ^ (x >> 31);
}

torch::Generator make_cpu_generator(uint64_t seed) {
    auto gen = at::detail::createCPUGenerator(seed);
    return gen;
}

std::string format_double(double v, int precision = 6) {
    char buf[64];
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    std::snprintf(buf, sizeof(buf), "%.*f", precision, v);
    return buf;
}

double finite_mean(const torch::Tensor& per_image) {
    return per_image.mean().item<double>();
}

}  // namespace

void ExperimentConfig::validate() const {
    TORCH_CHECK(epochs >= 1, "config: epochs must be >= 1");
    TORCH_CHECK(eval_repeats >= 1, "config: eval_repeats must be >= 1");
    TORCH_CHECK(plateau_factor > 0.0 && plateau_factor < 1.0,
                "config: plateau_factor must be in (0,1)");
    TORCH_CHECK(lambda_e >= 0.0 && lambda_d >= 0.0, "config: loss weights must be >= 0");
    TORCH_CHECK(snr_db_min <= snr_db_max, "config: snr_db_min > snr_db_max");
    TORCH_CHECK(batch_size >= 1, "config: batch_size must be >= 1");
}

TransmissionResult transmit_once(const ModelBundle& bundle, const torch::Tensor& x01,
                                 double snr_db, torch::Generator& noise_gen,
                                 bool quantize_boundaries) {
    TransmissionResult out;
    out.y = encrypt_forward(bundle, x01);
    torch::Tensor y_tx = quantize_boundaries ? normalize(denormalize(out.y)) : out.y;
    SymbolBlock z = encode_forward(bundle, y_tx);
    SymbolBlock zhat = awgn_apply(z, snr_to_sigma2(snr_db), noise_gen);
    out.yhat = decode_forward(bundle, zhat, x01.size(2), x01.size(3));
    torch::Tensor yhat_rx = quantize_boundaries ? normalize(denormalize(out.yhat)) : out.yhat;
    out.xhat = decrypt_forward(bundle, yhat_rx);
    return out;
}

LossBreakdown train_step(ModelBundle& bundle, torch::optim::Adam& opt,
                         const torch::Tensor& batch01, const ExperimentConfig& cfg,
                         const FeatureExtractor& psi, std::mt19937_64& snr_rng,
                         torch::Generator& noise_gen) {
    bundle.train();
    opt.zero_grad();

    ChannelConfig ch{cfg.snr_db_min, cfg.snr_db_max, SnrMode::TrainSample};
    torch::Tensor x = batch01;
    torch::Tensor y = encrypt_forward(bundle, x);
    SymbolBlock z = encode_forward(bundle, y);

    double snr_db = 0.0;
    SymbolBlock zhat;
    if (cfg.snr_per_image) {
        std::vector<double> sigma2(static_cast<size_t>(x.size(0)));
        double snr_sum = 0.0;
        for (auto& s : sigma2) {
            const double snr = sample_snr(ch, snr_rng);
            snr_sum += snr;
            s = snr_to_sigma2(snr);
        }
        snr_db = snr_sum / static_cast<double>(sigma2.size());
        zhat = awgn_apply(z, torch::tensor(sigma2, z.iq.options()), noise_gen);
    } else {
        snr_db = sample_snr(ch, snr_rng);
        zhat = awgn_apply(z, snr_to_sigma2(snr_db), noise_gen);
    }

    torch::Tensor yhat = decode_forward(bundle, zhat, x.size(2), x.size(3));
    torch::Tensor xhat = decrypt_forward(bundle, yhat);

    LossBreakdown lb = total_loss(x, y, yhat, xhat, bundle.lambda_e, bundle.lambda_d, psi);
    if (!std::isfinite(lb.l_total)) {
        const fs::path dump = fs::temp_directory_path() / "djescc_nonfinite_batch.pt";
        torch::save(x, dump.string());
        TORCH_CHECK(false, "non-finite training loss (l_r=", lb.l_r, ", l_e=", lb.l_e,
                    ", l_d=", lb.l_d, ") at snr_db=", snr_db, "; offending batch dumped to ",
                    dump.string());
    }
    lb.total.backward();
    opt.step();
    return lb;
}

PlateauScheduler::PlateauScheduler(double initial_lr, int64_t patience, double factor,
                                   double min_delta)
    : lr_(initial_lr), patience_(patience), factor_(factor), min_delta_(min_delta) {}

double PlateauScheduler::observe(double loss) {
    if (loss < best_ - min_delta_) {
        best_ = loss;
        since_improve_ = 0;
    } else {
        ++since_improve_;
        if (since_improve_ >= patience_) {
            lr_ *= factor_;
            since_improve_ = 0;
        }
    }
    return lr_;
}

std::string PlateauScheduler::serialize() const {
    json j = {{"lr", lr_},       {"patience", patience_},          {"factor", factor_},
              {"min_delta", min_delta_}, {"best", best_},          {"since", since_improve_}};
    return j.dump();
}

PlateauScheduler PlateauScheduler::deserialize(const std::string& text) {
    json j = json::parse(text);
    PlateauScheduler s(j.at("lr").get<double>(), j.at("patience").get<int64_t>(),
                       j.at("factor").get<double>(), j.at("min_delta").get<double>());
    s.best_ = j.at("best").get<double>();
    s.since_improve_ = j.at("since").get<int64_t>();
    return s;
}

namespace {

void set_lr(torch::optim::Adam& opt, double lr) {
    for (auto& group : opt.param_groups())
        static_cast<torch::optim::AdamOptions&>(group.options()).lr(lr);
}

void write_log_csv(const fs::path& path, const std::vector<EpochLogRow>& rows) {
    std::ofstream out(path, std::ios::trunc);
    out << "epoch,l_r,l_e,l_d,l_total,lr\n";
    for (const auto& r : rows) {
        out << r.epoch << "," << format_double(r.l_r) << "," << format_double(r.l_e) << ","
            << format_double(r.l_d) << "," << format_double(r.l_total) << ","
            << format_double(r.lr, 8) << "\n";
    }
}

struct ResumeState {
    int64_t next_epoch = 0;
    double best_loss = std::numeric_limits<double>::infinity();
};

void save_resume(const fs::path& dir, const ModelBundle& bundle, torch::optim::Adam& opt,
                 const std::mt19937_64& snr_rng, torch::Generator& noise_gen,
                 const PlateauScheduler& sched, const std::vector<EpochLogRow>& log,
                 const ResumeState& st, const std::string& config_hash) {
    fs::create_directories(dir);
    bundle.save(dir / "bundle");
    torch::save(opt, (dir / "optimizer.pt").string());
    {
        std::ostringstream ss;
        ss << snr_rng;
        std::ofstream out(dir / "snr_rng.txt", std::ios::trunc);
        out << ss.str();
    }
    torch::save(noise_gen.get_state(), (dir / "noise_state.pt").string());
    {
        std::ofstream out(dir / "scheduler.json", std::ios::trunc);
        out << sched.serialize();
    }
    {
        json j = {{"next_epoch", st.next_epoch},
                  {"best_loss", st.best_loss},
                  {"config_hash", config_hash}};
        std::ofstream out(dir / "state.json", std::ios::trunc);
        out << j.dump(2);
    }
    write_log_csv(dir / "log.csv", log);
}

std::vector<EpochLogRow> read_log_csv(const fs::path& path) {
    std::vector<EpochLogRow> rows;
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        EpochLogRow r;
        std::sscanf(line.c_str(), "%" SCNd64 ",%lf,%lf,%lf,%lf,%lf", &r.epoch, &r.l_r, &r.l_e,
                    &r.l_d, &r.l_total, &r.lr);
        rows.push_back(r);
    }
    return rows;
}

}  // namespace

TrainResult fit(const ExperimentConfig& cfg, const DatasetSplit& train,
                const FeatureExtractor& psi, const fs::path& run_dir,
                int64_t stop_after_epochs) {
    cfg.validate();
    if (cfg.lambda_e > 0.0 || cfg.lambda_d > 0.0)
        TORCH_CHECK(psi.loaded(), "fit: feature extractor required for lambda > 0");
    fs::create_directories(run_dir);

    torch::Tensor images = train.images;
    if (cfg.train_subset > 0 && cfg.train_subset < images.size(0))
        images = images.narrow(0, 0, cfg.train_subset);

    ModelBundle bundle;
    torch::optim::Adam* opt_ptr = nullptr;
    std::mt19937_64 snr_rng(mix64(cfg.seed, 0x534e52ull));
    torch::Generator noise_gen = make_cpu_generator(mix64(cfg.seed, 0x4e4f495345ull));
    PlateauScheduler sched(cfg.initial_lr, cfg.plateau_patience, cfg.plateau_factor,
                           cfg.plateau_min_delta);
    std::vector<EpochLogRow> log;
    ResumeState st;

    const fs::path resume_dir = run_dir / "resume";
    std::unique_ptr<torch::optim::Adam> opt;

    if (fs::exists(resume_dir / "state.json")) {
        std::ifstream in(resume_dir / "state.json");
        json j;
        in >> j;
        const std::string saved_hash = j.value("config_hash", "");
        if (saved_hash != cfg.config_hash)
            throw std::runtime_error("refusing to resume: config hash mismatch (checkpoint " +
                                     saved_hash + ", config " + cfg.config_hash + ")");
        st.next_epoch = j.at("next_epoch").get<int64_t>();
        st.best_loss = j.at("best_loss").get<double>();

        bundle = ModelBundle::load(resume_dir / "bundle");
        opt = std::make_unique<torch::optim::Adam>(bundle.trainable_parameters(),
                                                   torch::optim::AdamOptions(cfg.initial_lr));
        torch::load(*opt, (resume_dir / "optimizer.pt").string());
        {
            std::ifstream rin(resume_dir / "snr_rng.txt");
            rin >> snr_rng;
        }
        {
            torch::Tensor state;
            torch::load(state, (resume_dir / "noise_state.pt").string());
            noise_gen.set_state(state);
        }
        {
            std::ifstream sin(resume_dir / "scheduler.json");
            std::stringstream ss;
            ss << sin.rdbuf();
            sched = PlateauScheduler::deserialize(ss.str());
        }
        log = read_log_csv(resume_dir / "log.csv");
        set_lr(*opt, sched.lr());
    } else {
        bundle = ModelBundle::create(cfg.t, cfg.lambda_e, cfg.lambda_d,
                                     mix64(cfg.seed, 0x494e4954ull), cfg.in_channels,
                                     cfg.variant, cfg.shuffle_seed);
        bundle.config_hash = cfg.config_hash;
        opt = std::make_unique<torch::optim::Adam>(bundle.trainable_parameters(),
                                                   torch::optim::AdamOptions(cfg.initial_lr));
    }
    opt_ptr = opt.get();

    BatchIterator it(images, cfg.batch_size, mix64(cfg.seed, 0x4241544348ull));

    const int64_t stop_at =
        stop_after_epochs > 0 ? std::min(cfg.epochs, st.next_epoch + stop_after_epochs)
                              : cfg.epochs;

    for (int64_t epoch = st.next_epoch; epoch < stop_at; ++epoch) {
        it.start_epoch(epoch);
        torch::Tensor batch;
        double sum_r = 0.0, sum_e = 0.0, sum_d = 0.0, sum_t = 0.0;
        int64_t steps = 0;
        while (it.next(batch)) {
            LossBreakdown lb = train_step(bundle, *opt_ptr, batch, cfg, psi, snr_rng, noise_gen);
            sum_r += lb.l_r;
            sum_e += lb.l_e;
            sum_d += lb.l_d;
            sum_t += lb.l_total;
            ++steps;
        }
        EpochLogRow row;
        row.epoch = epoch;
        row.l_r = sum_r / steps;
        row.l_e = sum_e / steps;
        row.l_d = sum_d / steps;
        row.l_total = sum_t / steps;
        row.lr = sched.lr();
        log.push_back(row);

        const double lr_after = sched.observe(row.l_total);
        set_lr(*opt_ptr, lr_after);

        if (row.l_total < st.best_loss) {
            st.best_loss = row.l_total;
            bundle.save(run_dir / "checkpoints" / "best");
        }
        st.next_epoch = epoch + 1;
        save_resume(resume_dir, bundle, *opt_ptr, snr_rng, noise_gen, sched, log, st,
                    cfg.config_hash);
        write_log_csv(run_dir / "log.csv", log);
        std::printf("[fit %s] epoch %4lld  l_r=%.5f l_e=%.4f l_d=%.4f l_total=%+.5f lr=%g\n",
                    cfg.run_id.c_str(), static_cast<long long>(epoch), row.l_r, row.l_e, row.l_d,
                    row.l_total, row.lr);
        std::fflush(stdout);
    }

    bundle.save(run_dir / "checkpoints" / "final");
    return TrainResult{std::move(bundle), std::move(log), run_dir};
}

EvalTable evaluate(const ModelBundle& bundle, const DatasetSplit& test,
                   const std::vector<double>& eval_snrs, int64_t eval_repeats, uint64_t seed,
                   const FeatureExtractor& psi, const std::string& run_id, int64_t subset,
                   bool quantize_boundaries) {
    TORCH_CHECK(eval_repeats >= 1, "evaluate: eval_repeats must be >= 1");
    ModelBundle& b = const_cast<ModelBundle&>(bundle);
    b.eval();
    torch::NoGradGuard no_grad;

    torch::Tensor images = test.images;
    if (subset > 0 && subset < images.size(0)) images = images.narrow(0, 0, subset);
    const int64_t n = images.size(0);
    constexpr int64_t kChunk = 128;

    EvalTable table;
    table.run_id = run_id;
    table.quantized = quantize_boundaries;

    for (size_t si = 0; si < eval_snrs.size(); ++si) {
        const double snr_db = eval_snrs[si];
        double snr_psnr = 0.0, snr_ssim = 0.0, snr_xy = 0.0, snr_xyhat = 0.0;
        double snr_le = 0.0, snr_ld = 0.0;

        for (int64_t rep = 0; rep < eval_repeats; ++rep) {
            torch::Generator gen =
                make_cpu_generator(mix64(seed, mix64(static_cast<uint64_t>(si) + 1,
                                                     static_cast<uint64_t>(rep) + 1)));
            double sum_psnr = 0.0, sum_ssim = 0.0, sum_xy = 0.0, sum_xyhat = 0.0;
            double sum_le = 0.0, sum_ld = 0.0;

            for (int64_t at = 0; at < n; at += kChunk) {
                const int64_t take = std::min(kChunk, n - at);
                torch::Tensor x = normalize(images.narrow(0, at, take));
                TransmissionResult tr = transmit_once(b, x, snr_db, gen, quantize_boundaries);

                sum_psnr += psnr_per_image(x, tr.xhat).sum().item<double>();
                sum_ssim += ssim_per_image(x, tr.xhat).sum().item<double>();
                sum_xy += psnr_per_image(x, tr.y).sum().item<double>();
                sum_xyhat += psnr_per_image(x, tr.yhat).sum().item<double>();
                if (psi.loaded()) {
                    sum_le += feature_loss(x, tr.y, psi).item<double>() * take;
                    sum_ld += feature_loss(x, tr.yhat, psi).item<double>() * take;
                }
            }

            MetricRow row;
            row.run_id = run_id;
            row.snr_db = snr_db;
            row.repeat = rep;
            row.psnr = sum_psnr / n;
            row.ssim = sum_ssim / n;
            row.l_e = sum_le / n;
            row.l_d = sum_ld / n;
            table.rows.push_back(row);

            snr_psnr += row.psnr;
            snr_ssim += row.ssim;
            snr_xy += sum_xy / n;
            snr_xyhat += sum_xyhat / n;
            snr_le += row.l_e;
            snr_ld += row.l_d;
        }

        SnrSummary s;
        s.snr_db = snr_db;
        s.mean_psnr = snr_psnr / eval_repeats;
        s.mean_ssim = snr_ssim / eval_repeats;
        s.mean_psnr_xy = snr_xy / eval_repeats;
        s.mean_psnr_xyhat = snr_xyhat / eval_repeats;
        s.mean_l_e = snr_le / eval_repeats;
        s.mean_l_d = snr_ld / eval_repeats;
        table.summary.push_back(s);
    }
    return table;
}

void write_metrics_csv(const EvalTable& table, const fs::path& path) {
    std::ofstream out(path, std::ios::trunc);
    out << "run_id,snr_db,repeat,psnr,ssim,l_e,l_d\n";
    for (const auto& r : table.rows) {
        out << r.run_id << "," << format_double(r.snr_db, 2) << "," << r.repeat << ","
            << format_double(r.psnr) << "," << format_double(r.ssim) << ","
            << format_double(r.l_e) << "," << format_double(r.l_d) << "\n";
    }
}

void write_summary_csv(const EvalTable& table, const fs::path& path) {
    std::ofstream out(path, std::ios::trunc);
    out << "run_id,snr_db,mean_psnr,mean_ssim,mean_psnr_xy,mean_psnr_xyhat,mean_l_e,mean_l_d\n";
    for (const auto& s : table.summary) {
        out << table.run_id << "," << format_double(s.snr_db, 2) << ","
            << format_double(s.mean_psnr) << "," << format_double(s.mean_ssim) << ","
            << format_double(s.mean_psnr_xy) << "," << format_double(s.mean_psnr_xyhat) << ","
            << format_double(s.mean_l_e) << "," << format_double(s.mean_l_d) << "\n";
    }
}

namespace {

// rows of images pasted side by side on a white canvas
torch::Tensor montage(const std::vector<std::vector<torch::Tensor>>& grid, int64_t pad = 2) {
    const int64_t rows = static_cast<int64_t>(grid.size());
    const int64_t cols = static_cast<int64_t>(grid.front().size());
    const int64_t h = grid.front().front().size(1);
    const int64_t w = grid.front().front().size(2);
    torch::Tensor canvas = torch::full({3, rows * h + (rows + 1) * pad, cols * w + (cols + 1) * pad},
                                       255, torch::kUInt8);
    for (int64_t r = 0; r < rows; ++r) {
        for (int64_t c = 0; c < cols; ++c) {
            const int64_t y0 = pad + r * (h + pad);
            const int64_t x0 = pad + c * (w + pad);
            canvas.narrow(1, y0, h).narrow(2, x0, w).copy_(grid[static_cast<size_t>(r)][static_cast<size_t>(c)]);
        }
    }
    return canvas;
}

}  // namespace

void export_sample_grids(const ModelBundle& bundle, const torch::Tensor& images01,
                         const std::vector<double>& snrs, uint64_t seed,
                         const fs::path& out_dir) {
    fs::create_directories(out_dir);
    ModelBundle& b = const_cast<ModelBundle&>(bundle);
    b.eval();
    torch::NoGradGuard no_grad;

    for (size_t si = 0; si < snrs.size(); ++si) {
        torch::Generator gen = make_cpu_generator(mix64(seed, 0xfeed0000ull + si));
        TransmissionResult tr = transmit_once(b, images01, snrs[si], gen, false);
        std::vector<std::vector<torch::Tensor>> grid;
        for (int64_t i = 0; i < images01.size(0); ++i) {
            grid.push_back({denormalize(images01[i]), denormalize(tr.y[i]),
                            denormalize(tr.yhat[i]), denormalize(tr.xhat[i])});
        }
        char name[64];
        std::snprintf(name, sizeof(name), "grid_snr%02.0f.ppm", snrs[si]);
        write_ppm(out_dir / name, montage(grid));
    }
}

}  // namespace djescc
