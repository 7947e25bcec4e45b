// Acceptance run: one PASS/FAIL line per criterion.
// Usage: acceptance [criterion numbers...]   (default: all)

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <limits>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "csi_inpaint/common.hpp"
#include "csi_inpaint/dataset_io.hpp"
#include "csi_inpaint/experiments.hpp"
#include "csi_inpaint/metrics.hpp"
#include "csi_inpaint/model.hpp"
#include "csi_inpaint/pipeline.hpp"
#include "csi_inpaint/preprocess.hpp"
#include "csi_inpaint/scene_sim.hpp"
#include "csi_inpaint/train.hpp"

using namespace csi_inpaint;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

std::string fmt(double v, int digits = 4) {
    std::ostringstream os;
    os.precision(digits);
    os << v;
    return os.str();
}

fs::path work_root() {
    static const fs::path root = [] {
        std::random_device rd;
        const auto p = fs::temp_directory_path() / ("csi_acceptance_" + std::to_string(rd()));
        fs::create_directories(p);
        return p;
    }();
    return root;
}

void log(const std::string& msg) { std::fprintf(stderr, "  %s\n", msg.c_str()); }

// ---------------------------------------------------------------- oracles

std::vector<std::size_t> nearest_linear(const std::vector<double>& img, const std::vector<double>& csi) {
    std::vector<std::size_t> out;
    for (double t : img) {
        std::size_t best = 0;
        double best_d = std::abs(csi[0] - t);
        for (std::size_t j = 1; j < csi.size(); ++j) {
            const double d = std::abs(csi[j] - t);
            if (d < best_d) {
                best_d = d;
                best = j;
            }
        }
        out.push_back(best);
    }
    return out;
}

double psnr_oracle(const std::vector<float>& a, const std::vector<float>& b) {
    long double se = 0;
    for (std::size_t i = 0; i < a.size(); ++i) se += (static_cast<long double>(a[i]) - b[i]) * (static_cast<long double>(a[i]) - b[i]);
    const long double mse = se / a.size();
    if (mse == 0) return kPsnrCap;
    return std::min<double>(kPsnrCap, static_cast<double>(10.0L * std::log10(1.0L / mse)));
}

double ssim_oracle(const std::vector<float>& a, const std::vector<float>& b, int h, int w) {
    const int win = 7;
    const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
    double total = 0;
    int count = 0;
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y + win <= h; ++y)
            for (int x = 0; x + win <= w; ++x) {
                std::vector<double> u, v;
                for (int dy = 0; dy < win; ++dy)
                    for (int dx = 0; dx < win; ++dx) {
                        u.push_back(a[((y + dy) * w + x + dx) * 3 + c]);
                        v.push_back(b[((y + dy) * w + x + dx) * 3 + c]);
                    }
                const double n = static_cast<double>(u.size());
                double mu = 0, mv = 0;
                for (std::size_t i = 0; i < u.size(); ++i) {
                    mu += u[i];
                    mv += v[i];
                }
                mu /= n;
                mv /= n;
                double vu = 0, vv = 0, cov = 0;
                for (std::size_t i = 0; i < u.size(); ++i) {
                    vu += (u[i] - mu) * (u[i] - mu);
                    vv += (v[i] - mv) * (v[i] - mv);
                    cov += (u[i] - mu) * (v[i] - mv);
                }
                vu /= n;
                vv /= n;
                cov /= n;
                total += ((2 * mu * mv + c1) * (2 * cov + c2)) / ((mu * mu + mv * mv + c1) * (vu + vv + c2));
                ++count;
            }
    return total / count;
}

// ---------------------------------------------------------------- fixtures

/// Default office scene stretched to 33 s: 40 windows, 32 of them in the training split.
SceneConfig fixture_scene() {
    auto s = default_scene(11);
    s.duration = 33.0;
    return s;
}

/// Two pedestrians on separate loops: A near sensor 1, B near sensor 3.
SceneConfig two_pedestrian_scene() {
    auto s = default_scene(12);
    s.duration = 33.0;
    s.pedestrians = {elliptical_loop({1.6, 1.5}, {0.9, 0.5}, 6.0, Motion::counterclockwise_loop, 0.0, 64, 0, {0.85f, 0.15f, 0.1f}),
                     elliptical_loop({4.4, 2.7}, {0.9, 0.5}, 7.0, Motion::clockwise_loop, 0.0, 64, 1, {0.1f, 0.3f, 0.9f})};
    return s;
}

int fixture_epochs() { return 80; }

/// Desk-scale network and windows; the loss weights SSIM fully and batches are small.
PipelineConfig fixture_pipeline() {
    PipelineConfig c;
    c.seed = 3;
    c.mask.seed = 3;
    c.training.seed = 3;
    c.training.epochs = fixture_epochs();
    c.training.batch_size = 2;
    c.training.ssim_weight = 1.0;
    return c;
}

const Dataset& load_or_make(const std::string& name, const SceneConfig& scene) {
    static std::map<std::string, Dataset> cache;
    if (auto it = cache.find(name); it != cache.end()) return it->second;
    const fs::path dir = work_root() / name;
    if (!fs::exists(dir / "manifest.json")) generate_dataset(scene, dir);
    return cache.emplace(name, load_dataset(dir)).first->second;
}

struct FixtureRun {
    PreparedData data;
    TrainOutcome trained;
    Evaluation eval;
    double seconds = 0;
};

/// Trains on the fixture once per (mode, pca) and evaluates on the training split.
const FixtureRun& fixture_run(Mode mode, std::optional<int> pca_k, int epochs = fixture_epochs()) {
    static std::map<std::string, FixtureRun> cache;
    const std::string key = to_string(mode) + "/" + (pca_k ? std::to_string(*pca_k) : "none") + "/" + std::to_string(epochs);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
    auto cfg = fixture_pipeline();
    cfg.preprocess.pca_k = pca_k;
    cfg.training.epochs = epochs;
    FixtureRun r;
    const auto t0 = Clock::now();
    r.data = prepare_data(load_or_make("fixture", fixture_scene()), cfg, mode, log);
    TrainOptions opts;
    opts.on_epoch = [&](int epoch, double loss) {
        if (epoch % 20 == 0) log(key + " epoch " + std::to_string(epoch) + " loss " + fmt(loss));
    };
    r.trained = train_model(r.data, opts);
    r.eval = evaluate(r.trained.model, r.data.train, r.data.features, mode, r.data.mask.fill_value, key);
    r.seconds = seconds_since(t0);
    log(key + ": train SSIM " + fmt(r.eval.record.mean_ssim) + ", PSNR " + fmt(r.eval.record.mean_psnr) + " dB, " +
        fmt(r.seconds, 3) + " s");
    return cache.emplace(key, std::move(r)).first->second;
}

// ---------------------------------------------------------------- criteria

Outcome c1_isochronization() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(101);
    int mismatches = 0;
    for (int inst = 0; inst < 1000; ++inst) {
        const int n_img = std::uniform_int_distribution<int>(1, 120)(rng);
        const int n_csi = std::uniform_int_distribution<int>(1, 1200)(rng);
        const bool grid = inst % 3 == 0;  // coarse grids produce exact ties
        std::uniform_real_distribution<double> u(-1.0, 13.0);
        std::vector<double> img(static_cast<std::size_t>(n_img)), csi(static_cast<std::size_t>(n_csi));
        for (auto& t : img) t = grid ? std::floor(u(rng) * 4) / 4 : u(rng);
        for (auto& t : csi) t = grid ? std::floor(u(rng) * 2 + 2) / 2 : u(rng) * 0.8 + 1.0;
        std::sort(img.begin(), img.end());
        std::sort(csi.begin(), csi.end());
        if (isochronize(img, csi) != nearest_linear(img, csi)) ++mismatches;
    }
    const double secs = seconds_since(t0);
    return {mismatches == 0 && secs < 10.0, std::to_string(mismatches) + " mismatches in 1000 instances, " + fmt(secs, 3) + " s"};
}

Outcome c2_metrics() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(202);
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    double worst_p = 0, worst_s = 0;
    for (int i = 0; i < 100; ++i) {
        std::vector<float> a(16 * 16 * 3), b(a.size());
        const float noise = 0.02f + 0.3f * static_cast<float>(i % 10) / 10.0f;
        for (std::size_t k = 0; k < a.size(); ++k) {
            a[k] = u(rng);
            b[k] = i % 4 == 0 ? u(rng) : std::clamp(a[k] + noise * (u(rng) - 0.5f), 0.0f, 1.0f);
        }
        if (i == 7) b = a;
        worst_p = std::max(worst_p, std::abs(psnr(a, b) - psnr_oracle(a, b)));
        worst_s = std::max(worst_s, std::abs(ssim(a, b, 16, 16, 3) - ssim_oracle(a, b, 16, 16)));
    }
    const double secs = seconds_since(t0);
    return {worst_p <= 1e-9 && worst_s <= 1e-6 && secs < 30.0,
            "max |dPSNR| " + fmt(worst_p, 3) + ", max |dSSIM| " + fmt(worst_s, 3) + ", " + fmt(secs, 3) + " s"};
}

AmplitudeTensor as_amplitude(const std::vector<std::vector<double>>& rows) {
    AmplitudeTensor t;
    t.frames = static_cast<int>(rows.size());
    t.n_subcarriers = static_cast<int>(rows[0].size());
    for (const auto& r : rows)
        for (double v : r) t.values.push_back(static_cast<float>(v));
    return t;
}

Outcome c3_pca() {
    std::mt19937_64 rng(303);
    std::normal_distribution<double> g(0.0, 1.0);

    // Full rank: 400 rows over 12 features with distinct scales.
    std::vector<std::vector<double>> full(400, std::vector<double>(12));
    for (auto& r : full)
        for (std::size_t j = 0; j < 12; ++j) r[j] = 3.0 + g(rng) * (1.0 + static_cast<double>(j));
    const auto amp = as_amplitude(full);
    const auto model = fit_pca(std::span(&amp, 1), 12);
    const auto back = pca_inverse_transform(model, pca_transform(model, amp));
    double num = 0, den = 0;
    for (std::size_t i = 0; i < amp.values.size(); ++i) {
        num += std::pow(static_cast<double>(back.values[i]) - amp.values[i], 2);
        den += std::pow(static_cast<double>(amp.values[i]), 2);
    }
    const double rel = std::sqrt(num / den);

    // Rank 3 in 16 dimensions.
    std::vector<std::vector<double>> basis(3, std::vector<double>(16));
    for (auto& b : basis)
        for (auto& v : b) v = g(rng);
    std::vector<std::vector<double>> low(500, std::vector<double>(16, 0.0));
    for (auto& r : low) {
        const double z[3] = {4.0 * g(rng), 2.0 * g(rng), 1.0 * g(rng)};
        for (std::size_t j = 0; j < 16; ++j) r[j] = 1.5 + z[0] * basis[0][j] + z[1] * basis[1][j] + z[2] * basis[2][j];
    }
    const auto low_amp = as_amplitude(low);
    const auto m3 = fit_pca(std::span(&low_amp, 1), 3);
    double explained = 0;
    for (double v : m3.explained_variance_ratio) explained += v;

    double worst = 0;
    for (const auto* m : {&model, &m3})
        for (int i = 0; i < m->k(); ++i)
            for (int j = 0; j < m->k(); ++j) {
                double dot = 0;
                for (int f = 0; f < m->n_features(); ++f) dot += m->components[i][f] * m->components[j][f];
                worst = std::max(worst, std::abs(dot - (i == j ? 1.0 : 0.0)));
            }
    return {rel < 1e-6 && explained >= 0.99 && worst <= 1e-6,
            "round-trip rel err " + fmt(rel, 3) + ", rank-3 explained " + fmt(explained, 6) + ", orthonormality err " + fmt(worst, 3)};
}

/// 8x8 frames, 4x4 patches, embed 8, one layer per encoder.
ModelConfig micro_config() {
    ModelConfig c;
    c.image_height = 8;
    c.image_width = 8;
    c.patch_size = 4;
    c.embed_dim = 8;
    c.n_heads = 2;
    c.n_layers_img = 1;
    c.n_layers_csi = 1;
    c.attn_window = 2;
    c.csi_feature_dim = 3;
    c.n_sensors = 2;
    c.l_img = 2;
    c.l_csi = 20;
    c.csi_patch_len = 10;
    c.reduced_img_dim = 3;
    c.reduced_csi_dim = 2;
    c.decoder_channels = {4, 4};
    return c;
}

Outcome c4_gradients() {
    const auto t0 = Clock::now();
    const auto c = micro_config();
    auto model = build_model(c, 404);
    model->to(torch::kFloat64);
    torch::manual_seed(404);
    const auto opts = torch::TensorOptions().dtype(torch::kFloat64);
    const auto gt = torch::rand({2, c.l_img, 8, 8, 3}, opts);
    ModelInput in;
    in.mask = (torch::rand({2, c.l_img, 8, 8}, opts) < 0.6).to(torch::kFloat64);
    in.defective = gt * (1 - in.mask.unsqueeze(-1));
    in.csi = torch::randn({2, c.n_sensors, c.l_csi, c.csi_feature_dim}, opts);
    const auto loss_fn = [&] { return reconstruction_loss(model(in, Mode::multimodal), gt, 0.2); };

    model->zero_grad();
    loss_fn().backward();
    const double eps = 1e-5;
    double worst = 0;
    std::string worst_name;
    std::int64_t checked = 0;
    torch::NoGradGuard guard;
    for (const auto& item : model->named_parameters()) {
        auto flat = item.value().view({-1});
        const auto grad = item.value().grad().view({-1});
        for (std::int64_t i = 0; i < flat.numel(); ++i) {
            const double orig = flat[i].item<double>();
            flat[i] = orig + eps;
            const double up = loss_fn().item<double>();
            flat[i] = orig - eps;
            const double down = loss_fn().item<double>();
            flat[i] = orig;
            const double numeric = (up - down) / (2 * eps), analytic = grad[i].item<double>();
            // Relative to the larger magnitude, with a floor for gradients that are zero up to rounding.
            const double err = std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-7});
            if (err > worst) {
                worst = err;
                worst_name = item.key() + "[" + std::to_string(i) + "]";
            }
            ++checked;
        }
    }
    const double secs = seconds_since(t0);
    return {worst <= 1e-3 && secs < 300.0, std::to_string(checked) + " parameters, worst rel err " + fmt(worst, 3) + " at " +
                                               worst_name + ", " + fmt(secs, 3) + " s"};
}

Outcome c5_overfit() {
    const auto& r = fixture_run(Mode::multimodal, 10);
    const bool shape_ok = r.data.train.size() == 32 && r.data.mask.kind == MaskKind::rectangle && r.data.mask.coverage == 0.9 &&
                          r.data.model_config.image_height == 64;
    const auto& losses = r.trained.meta.state.epoch_losses;
    const bool decreasing = losses.size() >= 30 && losses[29] < losses[0];
    return {shape_ok && decreasing && r.eval.record.mean_ssim >= 0.85 && fixture_epochs() <= 200 && r.seconds < 900.0,
            std::to_string(r.data.train.size()) + " training samples, " + std::to_string(fixture_epochs()) +
                " epochs, train mean SSIM " + fmt(r.eval.record.mean_ssim) + ", PSNR " + fmt(r.eval.record.mean_psnr) +
                " dB, loss " + fmt(losses.front()) + " -> " + fmt(losses.back()) + ", " + fmt(r.seconds, 3) + " s"};
}

Outcome c6_rf_only() {
    const auto& r = fixture_run(Mode::rf_only, 10);
    const auto bg = fixture_scene().style.background;
    const auto errors = centroid_errors(r.data.train, r.eval.restored, bg);
    int scored = 0, within = 0;
    std::vector<double> finite;
    for (double e : errors) {
        if (std::isnan(e)) continue;
        ++scored;
        if (e <= 4.0) ++within;
        finite.push_back(e);
    }
    std::sort(finite.begin(), finite.end());
    const double frac = scored ? static_cast<double>(within) / scored : 0.0;
    const bool full = r.data.mask.kind == MaskKind::full;
    return {full && scored > 0 && frac >= 0.8,
            std::to_string(within) + "/" + std::to_string(scored) + " samples within 4 px (" + fmt(100 * frac, 3) +
                "%), median error " + (finite.empty() ? "n/a" : fmt(finite[finite.size() / 2], 3)) + " px, train SSIM " +
                fmt(r.eval.record.mean_ssim)};
}

Outcome c7_pca_ablation() {
    auto m = fixture_pipeline().model;
    m.n_sensors = 4;
    m.csi_feature_dim = 64;
    const auto wide = csi_input_layer_parameters(m);
    auto wide_model = build_model(m, 0);
    const bool formula_ok = wide == count_parameters(*wide_model->csi_encoder->input_projection);
    m.csi_feature_dim = 10;
    const auto narrow = csi_input_layer_parameters(m);
    const double reduction = 1.0 - static_cast<double>(narrow) / static_cast<double>(wide);

    const auto& with_pca = fixture_run(Mode::multimodal, 10);
    const auto& without = fixture_run(Mode::multimodal, std::nullopt);
    const double drop = without.eval.record.mean_ssim - with_pca.eval.record.mean_ssim;
    const bool dims_ok = without.data.model_config.csi_feature_dim == 64 && with_pca.data.model_config.csi_feature_dim == 10;
    return {formula_ok && dims_ok && reduction >= 0.8 && drop <= 0.05,
            "input layer " + std::to_string(wide) + " -> " + std::to_string(narrow) + " parameters (" + fmt(100 * reduction, 3) +
                "% fewer), whole model " + std::to_string(without.trained.parameters) + " -> " +
                std::to_string(with_pca.trained.parameters) + "; SSIM no-PCA " + fmt(without.eval.record.mean_ssim) +
                " vs k=10 " + fmt(with_pca.eval.record.mean_ssim) + " (drop " + fmt(drop, 3) + "), train time " +
                fmt(without.trained.seconds, 3) + " s vs " + fmt(with_pca.trained.seconds, 3) + " s"};
}

Outcome c8_fusion() {
    const auto& ds = load_or_make("two_pedestrians", two_pedestrian_scene());
    ExperimentConfig exp;
    exp.name = "fusion";
    exp.kind = ExperimentKind::sensor_study;
    exp.dataset = work_root() / "two_pedestrians";
    exp.output_dir = work_root() / "fusion";
    exp.sensor_subsets = {{1, 2, 3, 4}, {1}, {2}, {3}, {4}};
    exp.eval_split = Split::train;
    exp.base = fixture_pipeline();
    RunHooks hooks;
    hooks.log = log;
    const auto results = run_experiment(exp, ds, hooks);

    double all = std::numeric_limits<double>::quiet_NaN(), best_single = -1;
    std::string singles, footprint;
    bool ok = results.size() == 5;
    for (const auto& r : results) {
        if (r.failed) {
            ok = false;
            continue;
        }
        const auto n = r.point.config.sensors.size();
        if (n == 4)
            all = r.record.mean_ssim;
        else {
            best_single = std::max(best_single, r.record.mean_ssim);
            singles += (singles.empty() ? "" : ", ") + r.point.label + " " + fmt(r.record.mean_ssim);
        }
        if (r.footprint_mse.size() == 2)
            footprint += (footprint.empty() ? "" : ", ") + r.point.label + " A " + fmt(r.footprint_mse[0], 3) + " B " +
                         fmt(r.footprint_mse[1], 3);
    }
    ok = ok && std::isfinite(all) && all >= best_single - 0.02;
    return {ok, "all sensors " + fmt(all) + "; " + singles + "; footprint MSE: " + footprint};
}

Outcome c9_mode_isolation() {
    torch::NoGradGuard guard;
    const auto c = fixture_pipeline().model;
    auto model = build_model(c, 909);
    torch::manual_seed(909);
    ModelInput in;
    const auto gt = torch::rand({2, c.l_img, c.image_height, c.image_width, 3});
    in.mask = torch::zeros({2, c.l_img, c.image_height, c.image_width});
    in.mask.index_put_({torch::indexing::Slice(), torch::indexing::Slice(), torch::indexing::Slice(10, 50),
                        torch::indexing::Slice(8, 40)},
                       1.0);
    in.defective = gt * (1 - in.mask.unsqueeze(-1));
    in.csi = torch::randn({2, c.n_sensors, c.l_csi, c.csi_feature_dim});

    ModelInput csi_changed = in;
    csi_changed.csi = in.csi + torch::randn_like(in.csi);
    ModelInput pixels_changed = in;
    pixels_changed.defective = in.defective + in.mask.unsqueeze(-1) * torch::rand_like(in.defective);

    const bool image_only = torch::equal(model(in, Mode::image_only), model(csi_changed, Mode::image_only));
    const bool rf_only = torch::equal(model(in, Mode::rf_only), model(pixels_changed, Mode::rf_only));
    // The perturbations are live in the mode that reads them.
    const bool live = !torch::equal(model(in, Mode::multimodal), model(csi_changed, Mode::multimodal)) &&
                      !torch::equal(model(in, Mode::image_only), model(pixels_changed, Mode::image_only));
    return {image_only && rf_only && live, std::string("image-only invariant to CSI: ") + (image_only ? "yes" : "no") +
                                               ", rf-only invariant to masked pixels: " + (rf_only ? "yes" : "no") +
                                               ", perturbations affect the other modes: " + (live ? "yes" : "no")};
}

bool same_bytes(const fs::path& a, const fs::path& b) {
    std::ifstream ia(a, std::ios::binary), ib(b, std::ios::binary);
    return std::equal(std::istreambuf_iterator<char>(ia), {}, std::istreambuf_iterator<char>(ib), {});
}

Outcome c10_determinism() {
    // Datasets.
    auto scene = default_scene(5);
    scene.duration = 6.0;
    const fs::path a = work_root() / "det_a", b = work_root() / "det_b";
    generate_dataset(scene, a);
    generate_dataset(scene, b);
    int files = 0, differing = 0;
    for (const auto& e : fs::directory_iterator(a)) {
        ++files;
        if (!same_bytes(e.path(), b / e.path().filename())) ++differing;
    }

    // First-epoch losses.
    PipelineConfig cfg = fixture_pipeline();
    cfg.training.epochs = 1;
    cfg.windows = {8, 40, 8};
    cfg.model.l_csi = 40;
    const auto ds = load_dataset(a);
    std::vector<double> first;
    for (int run = 0; run < 2; ++run) first.push_back(train_model(prepare_data(ds, cfg, Mode::multimodal)).meta.state.epoch_losses[0]);

    // Sweep resume.
    ExperimentConfig exp;
    exp.name = "resume";
    exp.kind = ExperimentKind::window_sweep;
    exp.dataset = a;
    exp.output_dir = work_root() / "resume";
    exp.l_csi_values = {20, 40};
    exp.eval_split = Split::train;
    exp.base = cfg;
    RunHooks hooks;
    hooks.log = log;
    const auto firstpass = run_experiment(exp, ds, hooks);
    int rerun = 0;
    hooks.before_point = [&](const SweepPoint&) {
        ++rerun;
        return true;
    };
    const auto second = run_experiment(exp, ds, hooks);
    const auto rows = ResultsTable(exp.output_dir / "resume.csv").rows().size();
    const bool first_ok = std::none_of(firstpass.begin(), firstpass.end(), [](const PointResult& r) { return r.skipped || r.failed; });
    const bool sweep_ok = first_ok && rerun == 0 && rows == 2 && std::all_of(second.begin(), second.end(), [](const PointResult& r) { return r.skipped; });

    return {files > 0 && differing == 0 && first[0] == first[1] && sweep_ok,
            std::to_string(files - differing) + "/" + std::to_string(files) + " dataset files identical, first-epoch losses " +
                fmt(first[0], 17) + " / " + fmt(first[1], 17) + ", resumed sweep retrained " + std::to_string(rerun) +
                " of " + std::to_string(rows) + " completed points"};
}

}  // namespace

int main(int argc, char** argv) {
    torch::set_num_threads(1);
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"isochronization matches linear-scan oracle", c1_isochronization},
        {"PSNR/SSIM match brute-force oracles", c2_metrics},
        {"PCA round trip, rank recovery, orthonormality", c3_pca},
        {"gradient check on micro config", c4_gradients},
        {"multimodal overfit fixture", c5_overfit},
        {"rf-only localization on fixture", c6_rf_only},
        {"PCA ablation", c7_pca_ablation},
        {"sensor fusion union property", c8_fusion},
        {"mode isolation", c9_mode_isolation},
        {"determinism and sweep resume", c10_determinism},
    };
    std::set<int> selected;
    for (int i = 1; i < argc; ++i) selected.insert(std::stoi(argv[i]));

    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i) + 1;
        if (!selected.empty() && !selected.count(id)) continue;
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        if (!o.pass) ++failed;
        std::printf("[%s] %2d %s: %s\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first.c_str(), o.detail.c_str());
        std::fflush(stdout);
    }
    std::error_code ec;
    fs::remove_all(work_root(), ec);
    return failed ? 1 : 0;
}
