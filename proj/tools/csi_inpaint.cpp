// csi_inpaint: simulate, preprocess, train, eval, sweep and report.

#include <torch/torch.h>

#include <chrono>
#include <ctime>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "csi_inpaint/checkpoint.hpp"
#include "csi_inpaint/common.hpp"
#include "csi_inpaint/config.hpp"
#include "csi_inpaint/dataset_io.hpp"
#include "csi_inpaint/experiments.hpp"
#include "csi_inpaint/image_io.hpp"
#include "csi_inpaint/pipeline.hpp"
#include "csi_inpaint/scene_sim.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace csi_inpaint;

namespace {

constexpr const char* kToolVersion = "0.1.0";

std::string utc_now() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void log(const std::string& m) { std::cerr << m << "\n"; }

void write_json(const fs::path& path, const json& j) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream os(tmp);
        if (!os) throw IoError("cannot write " + path.string());
        os << j.dump(2) << "\n";
        if (!os) throw IoError("cannot write " + path.string());
    }
    fs::rename(tmp, path);
}

/// Provenance record written before any work, then completed on success.
class RunManifest {
public:
    RunManifest(fs::path path, std::string command, const std::string& config_path, const json& resolved,
                std::uint64_t seed, std::vector<fs::path> outputs)
        : path_(std::move(path)) {
        json outs = json::array();
        for (const auto& o : outputs) outs.push_back(o.string());
        j_ = {{"command", std::move(command)},
              {"config_path", config_path},
              {"config_hash", config_hash(resolved)},
              {"resolved_config", resolved},
              {"seed", seed},
              {"tool_version", kToolVersion},
              {"started_at", utc_now()},
              {"finished_at", nullptr},
              {"status", "running"},
              {"outputs", outs}};
        write_json(path_, j_);
    }

    void finish(const std::string& status = "ok", const json& extra = json::object()) {
        j_["finished_at"] = utc_now();
        j_["status"] = status;
        for (auto it = extra.begin(); it != extra.end(); ++it) j_[it.key()] = it.value();
        write_json(path_, j_);
    }

private:
    fs::path path_;
    json j_;
};

PipelineConfig load_pipeline(const std::string& path) {
    return path.empty() ? pipeline_from_json(json::object()) : pipeline_from_json(read_json_file(path));
}

void override_seed(PipelineConfig& c, std::uint64_t seed) {
    c.seed = seed;
    c.training.seed = seed;
    c.mask.seed = seed;
}

void write_loss_csv(const fs::path& path, const std::vector<double>& losses) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot write " + path.string());
    os << "epoch,loss\n";
    os.precision(10);
    for (std::size_t i = 0; i < losses.size(); ++i) os << i + 1 << "," << losses[i] << "\n";
}

void write_metrics_csv(const fs::path& path, const MetricsRecord& r, int frames_per_sample) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot write " + path.string());
    os.precision(10);
    os << "sample,frame,psnr,ssim\n";
    for (std::size_t i = 0; i < r.psnr_values.size(); ++i)
        os << i / static_cast<std::size_t>(frames_per_sample) << "," << i % static_cast<std::size_t>(frames_per_sample)
           << "," << r.psnr_values[i] << "," << r.ssim_values[i] << "\n";
}

// ---------------------------------------------------------------------------

struct SimulateArgs {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
};

int cmd_simulate(const SimulateArgs& a) {
    SceneConfig scene = a.config.empty() ? default_scene() : scene_from_json(read_json_file(a.config));
    if (a.seed) scene.room.seed = *a.seed;
    const json resolved = to_json(scene);
    RunManifest manifest(fs::path(a.out) / "run_manifest.json", "simulate", a.config, resolved, scene.room.seed,
                         {fs::path(a.out) / "manifest.json"});
    const DatasetManifest m = generate_dataset(scene, a.out);
    std::size_t frames = 0;
    for (const auto& c : m.cameras) frames += c.frames;
    log("wrote " + std::to_string(m.cameras.size()) + " camera stream(s), " + std::to_string(m.sensors.size()) +
        " CSI stream(s) to " + a.out);
    manifest.finish("ok", {{"image_frames", frames}});
    return 0;
}

struct PreprocessArgs {
    std::string dataset;
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
};

int cmd_preprocess(const PreprocessArgs& a) {
    PipelineConfig cfg = load_pipeline(a.config);
    if (a.seed) override_seed(cfg, *a.seed);
    const fs::path out(a.out);
    RunManifest manifest(out.string() + ".manifest.json", "preprocess", a.config, to_json(cfg), cfg.seed, {out});
    const Dataset dataset = load_dataset(a.dataset);
    const PreparedData data = prepare_data(dataset, cfg, Mode::multimodal, log);
    write_json(out, data.features.to_json());
    log("fitted preprocessing on " + std::to_string(data.train.size()) + " training windows; feature dim " +
        std::to_string(data.features.feature_dim()));
    manifest.finish();
    return 0;
}

struct TrainArgs {
    std::string dataset;
    std::string config;
    std::string mode = "multimodal";
    std::string out;
    std::string resume;
    std::optional<int> epochs;
    std::optional<std::uint64_t> seed;
    int checkpoint_every = 0;
};

int cmd_train(const TrainArgs& a) {
    PipelineConfig cfg = load_pipeline(a.config);
    if (a.seed) override_seed(cfg, *a.seed);
    if (a.epochs) {
        cfg.training.epochs = *a.epochs;
        cfg.training.validate();
    }
    const Mode mode = parse_mode(a.mode);
    const fs::path out(a.out);
    const fs::path loss_csv = out.string() + ".loss.csv";
    json resolved = to_json(cfg);
    resolved["mode"] = to_string(mode);
    RunManifest manifest(out.string() + ".manifest.json", "train", a.config, resolved, cfg.seed, {out, loss_csv});

    const Dataset dataset = load_dataset(a.dataset);
    std::optional<LoadedCheckpoint> resume;
    if (!a.resume.empty()) resume = load_checkpoint(a.resume);
    const PreparedData data = resume ? prepare_data(dataset, cfg, mode, resume->meta.features)
                                     : prepare_data(dataset, cfg, mode, log);
    if (data.mode == Mode::rf_only && resume) log("rf-only mode: forcing a full mask regardless of the configured mask");

    TrainOptions opts;
    opts.checkpoint_out = out;
    opts.resume = resume ? &*resume : nullptr;
    opts.checkpoint_every = a.checkpoint_every;
    opts.extra = {{"config_hash", config_hash(resolved)}};
    opts.on_epoch = [&](int epoch, double loss) {
        std::ostringstream os;
        os << "epoch " << epoch << "/" << cfg.training.epochs << " loss " << loss;
        log(os.str());
    };
    const TrainOutcome outcome = train_model(data, opts);
    write_loss_csv(loss_csv, outcome.meta.state.epoch_losses);
    log("trained " + std::to_string(outcome.parameters) + " parameters in " + std::to_string(outcome.seconds) + " s");
    manifest.finish("ok", {{"parameters", outcome.parameters}, {"train_seconds", outcome.seconds}});
    return 0;
}

struct EvalArgs {
    std::string dataset;
    std::string checkpoint;
    std::string split = "test";
    std::string out;
};

int cmd_eval(const EvalArgs& a) {
    const fs::path out = a.out.empty() ? fs::path(a.checkpoint).parent_path() / "eval" : fs::path(a.out);
    LoadedCheckpoint ckpt = load_checkpoint(a.checkpoint);
    if (!ckpt.meta.extra.contains("pipeline_config"))
        throw CheckpointMismatch("checkpoint " + a.checkpoint + " does not record its pipeline config");
    const PipelineConfig cfg = pipeline_from_json(ckpt.meta.extra.at("pipeline_config"));
    const Split split = parse_split(a.split);
    json resolved = to_json(cfg);
    resolved["mode"] = to_string(ckpt.meta.mode);
    resolved["split"] = a.split;
    resolved["checkpoint"] = fs::absolute(a.checkpoint).lexically_normal().string();
    RunManifest manifest(out / "run_manifest.json", "eval", a.checkpoint, resolved, cfg.seed,
                         {out / "metrics.json", out / "metrics.csv", out / "grid.png"});

    const Dataset dataset = load_dataset(a.dataset);
    for (const auto& [id, stats] : ckpt.meta.features.stats())
        if (std::none_of(dataset.csi.begin(), dataset.csi.end(), [&](const CsiSequence& s) { return s.sensor_id == id; }))
            throw CheckpointMismatch("checkpoint expects sensor " + std::to_string(id) + ", absent from " + a.dataset);
    PreparedData data;
    try {
        data = prepare_data(dataset, cfg, ckpt.meta.mode, ckpt.meta.features);
    } catch (const ConfigError& e) {
        throw CheckpointMismatch(std::string("checkpoint does not fit this dataset: ") + e.what());
    }
    if (to_json(data.model_config) != to_json(ckpt.meta.model_config))
        throw CheckpointMismatch("dataset-derived model shape differs from the checkpoint's");
    const auto& samples = data.split(split);
    if (samples.empty()) throw ConfigError("split '" + a.split + "' is empty");

    Evaluation ev = evaluate(ckpt.model, samples, ckpt.meta.features, ckpt.meta.mode, data.mask.fill_value,
                             config_hash(resolved));
    ev.record.config_summary = {{"split", a.split}, {"checkpoint", a.checkpoint}, {"sensors", data.sensor_ids}};
    write_json(out / "metrics.json", ev.record.to_json());
    write_metrics_csv(out / "metrics.csv", ev.record, cfg.windows.l_img);
    write_sample_grid(out / "grid.png", samples, ev.restored);
    std::cout << "mean PSNR " << ev.record.mean_psnr << " dB, mean SSIM " << ev.record.mean_ssim << " over "
              << ev.record.psnr_values.size() << " frames\n";
    manifest.finish();
    return 0;
}

struct SweepArgs {
    std::string experiment;
    std::string out;
};

int cmd_sweep(const SweepArgs& a) {
    ExperimentConfig exp = experiment_from_json(read_json_file(a.experiment));
    if (!a.out.empty()) exp.output_dir = a.out;
    RunManifest manifest(exp.output_dir / (exp.name + ".manifest.json"), "sweep", a.experiment, to_json(exp), exp.seed,
                         {exp.output_dir / (exp.name + ".csv"), exp.output_dir / exp.name});
    const Dataset dataset = load_dataset(exp.dataset);
    RunHooks hooks;
    hooks.log = log;
    const auto results = run_experiment(exp, dataset, hooks);
    int failed = 0, skipped = 0;
    for (const auto& r : results) {
        failed += r.failed;
        skipped += r.skipped;
    }
    std::cout << results.size() << " point(s): " << results.size() - failed - skipped << " run, " << skipped
              << " skipped, " << failed << " failed\n";
    for (const auto& r : results)
        if (r.failed) std::cout << "  failed " << r.point.label << ": " << r.error << "\n";
    manifest.finish(failed ? "partial" : "ok", {{"failed_points", failed}});
    return failed ? 6 : 0;
}

struct ReportArgs {
    std::string results;
    std::string out;
    std::string metric = "mean_ssim";
};

int cmd_report(const ReportArgs& a) {
    const ResultsTable table(a.results);
    if (!fs::exists(a.results)) throw IoError("results file " + a.results + " does not exist");
    auto rows = table.rows();
    if (rows.empty()) throw ConfigError("results file " + a.results + " has no rows");
    if (!rows.front().count(a.metric)) throw ConfigError("unknown metric column '" + a.metric + "'");
    std::stable_sort(rows.begin(), rows.end(), [&](const auto& x, const auto& y) {
        return std::stod(x.at(a.metric)) > std::stod(y.at(a.metric));
    });
    std::cout << "rank  label                mode         " << a.metric << "    config_hash\n";
    std::vector<double> values;
    int rank = 1;
    for (const auto& r : rows) {
        std::printf("%-5d %-20s %-12s %-12s %s\n", rank++, r.at("label").c_str(), r.at("mode").c_str(),
                    r.at(a.metric).c_str(), r.at("config_hash").c_str());
        values.push_back(std::stod(r.at(a.metric)));
    }
    if (!a.out.empty()) {
        write_png(a.out, bar_chart(values));
        log("wrote " + a.out);
    }
    return 0;
}

int print_config(const std::string& which) {
    if (which == "scene") std::cout << to_json(default_scene()).dump(2) << "\n";
    else if (which == "pipeline") std::cout << to_json(pipeline_from_json(json::object())).dump(2) << "\n";
    else if (which == "experiment") {
        ExperimentConfig e;
        e.name = "window_sweep";
        e.kind = ExperimentKind::window_sweep;
        e.dataset = "data/office";
        e.l_csi_values = {10, 50, 100, 150};
        e.base = pipeline_from_json(json::object());
        std::cout << to_json(e).dump(2) << "\n";
    } else {
        throw ConfigError("--print-config takes scene, pipeline or experiment");
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    torch::set_num_threads(1);
    CLI::App app{"Camera and WiFi CSI fusion for occluded-frame inpainting"};
    app.require_subcommand(0, 1);
    app.set_version_flag("--version", kToolVersion);
    std::string print_which;
    app.add_option("--print-config", print_which, "Print the default config (scene, pipeline or experiment) and exit");

    SimulateArgs sim;
    auto* s = app.add_subcommand("simulate", "Generate a synthetic camera + CSI dataset");
    s->add_option("--config", sim.config, "Scene config JSON (default: built-in office scene)");
    s->add_option("--out", sim.out, "Output dataset directory")->required();
    s->add_option("--seed", sim.seed, "Override the scene seed");

    PreprocessArgs pre;
    auto* p = app.add_subcommand("preprocess", "Fit subcarrier cleaning, PCA and normalization; write them as JSON");
    p->add_option("--dataset", pre.dataset, "Dataset directory")->required();
    p->add_option("--config", pre.config, "Pipeline config JSON");
    p->add_option("--out", pre.out, "Output JSON")->required();
    p->add_option("--seed", pre.seed, "Override every seed");

    TrainArgs tr;
    auto* t = app.add_subcommand("train", "Train the inpainting model");
    t->add_option("--dataset", tr.dataset, "Dataset directory")->required();
    t->add_option("--config", tr.config, "Pipeline config JSON");
    t->add_option("--mode", tr.mode, "multimodal, image-only or rf-only");
    t->add_option("--out", tr.out, "Checkpoint path")->required();
    t->add_option("--resume", tr.resume, "Continue from this checkpoint");
    t->add_option("--epochs", tr.epochs, "Override the total epoch count");
    t->add_option("--seed", tr.seed, "Override every seed");
    t->add_option("--checkpoint-every", tr.checkpoint_every, "Also checkpoint every N epochs");

    EvalArgs ev;
    auto* e = app.add_subcommand("eval", "Evaluate a checkpoint on a split");
    e->add_option("--dataset", ev.dataset, "Dataset directory")->required();
    e->add_option("--checkpoint", ev.checkpoint, "Checkpoint path")->required();
    e->add_option("--split", ev.split, "train, val or test");
    e->add_option("--out", ev.out, "Output directory (default: <checkpoint dir>/eval)");

    SweepArgs sw;
    auto* w = app.add_subcommand("sweep", "Run an experiment config");
    w->add_option("--experiment", sw.experiment, "Experiment config JSON")->required();
    w->add_option("--out", sw.out, "Override the output directory");

    ReportArgs rep;
    auto* r = app.add_subcommand("report", "Rank the rows of a results CSV");
    r->add_option("--results", rep.results, "Results CSV")->required();
    r->add_option("--metric", rep.metric, "Column to rank by");
    r->add_option("--out", rep.out, "Optional bar-chart PNG");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        const int rc = app.exit(err);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (!print_which.empty()) return print_config(print_which);
        if (s->parsed()) return cmd_simulate(sim);
        if (p->parsed()) return cmd_preprocess(pre);
        if (t->parsed()) return cmd_train(tr);
        if (e->parsed()) return cmd_eval(ev);
        if (w->parsed()) return cmd_sweep(sw);
        if (r->parsed()) return cmd_report(rep);
        std::cerr << app.help();
        return 2;
    } catch (const ConfigError& err) {
        std::cerr << "config error: " << err.what() << "\n";
        return 2;
    } catch (const CorruptionError& err) {
        std::cerr << "corrupt data: " << err.what() << "\n";
        return 3;
    } catch (const IoError& err) {
        std::cerr << "I/O error: " << err.what() << "\n";
        return 3;
    } catch (const DivergenceError& err) {
        std::cerr << "training diverged: " << err.what() << "\n";
        return 4;
    } catch (const CheckpointMismatch& err) {
        std::cerr << "checkpoint mismatch: " << err.what() << "\n";
        return 5;
    } catch (const std::filesystem::filesystem_error& err) {
        std::cerr << "I/O error: " << err.what() << "\n";
        return 3;
    }
}
