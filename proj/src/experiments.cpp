#include "csi_inpaint/experiments.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "csi_inpaint/common.hpp"
#include "csi_inpaint/image_io.hpp"

namespace csi_inpaint {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string kind_name(ExperimentKind k) {
    switch (k) {
        case ExperimentKind::mode_comparison: return "mode-comparison";
        case ExperimentKind::window_sweep: return "window-sweep";
        case ExperimentKind::pca_ablation: return "pca-ablation";
        case ExperimentKind::sensor_study: return "sensor-study";
    }
    return "mode-comparison";
}

ExperimentKind parse_kind(const std::string& s) {
    if (s == "mode-comparison") return ExperimentKind::mode_comparison;
    if (s == "window-sweep") return ExperimentKind::window_sweep;
    if (s == "pca-ablation") return ExperimentKind::pca_ablation;
    if (s == "sensor-study") return ExperimentKind::sensor_study;
    throw ConfigError("field 'kind' must be mode-comparison, window-sweep, pca-ablation or sensor-study");
}

std::string split_name(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::val: return "val";
        case Split::test: return "test";
    }
    return "test";
}

std::string join(const std::vector<int>& v, char sep = ';') {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? std::string(1, sep) : "") + std::to_string(v[i]);
    return out;
}

std::string fmt_double(double v) {
    std::ostringstream os;
    os.precision(10);
    os << v;
    return os.str();
}

}  // namespace

void ExperimentConfig::validate(const Dataset& dataset) const {
    std::set<int> ids;
    for (const auto& s : dataset.csi) ids.insert(s.sensor_id);
    const auto check = [&](const std::vector<int>& subset, const std::string& where) {
        for (int id : subset)
            if (!ids.count(id)) throw ConfigError(where + " references sensor " + std::to_string(id) + " absent from the dataset");
    };
    check(base.sensors, "pipeline.sensors");
    for (const auto& s : sensor_subsets) {
        if (s.empty()) throw ConfigError("sensor_subsets entries must be non-empty");
        check(s, "sensor_subsets");
    }
    if (modes.empty()) throw ConfigError("modes must be non-empty");
    if (kind == ExperimentKind::window_sweep && l_csi_values.empty()) throw ConfigError("l_csi_values must be non-empty");
    if (kind == ExperimentKind::pca_ablation && pca_k_values.empty()) throw ConfigError("pca_k_values must be non-empty");
    if (kind == ExperimentKind::sensor_study && sensor_subsets.empty()) throw ConfigError("sensor_subsets must be non-empty");
}

ExperimentConfig experiment_from_json(const json& j) {
    if (!j.is_object()) throw ConfigError("experiment config must be a JSON object");
    ExperimentConfig c;
    try {
        c.name = j.value("name", c.name);
        if (!j.contains("kind")) throw ConfigError("missing required field 'kind'");
        c.kind = parse_kind(j.at("kind").get<std::string>());
        if (!j.contains("dataset")) throw ConfigError("missing required field 'dataset'");
        c.dataset = j.at("dataset").get<std::string>();
        c.output_dir = j.value("output_dir", c.output_dir.string());
        if (j.contains("modes")) {
            c.modes.clear();
            for (const auto& m : j.at("modes")) c.modes.push_back(parse_mode(m.get<std::string>()));
        }
        c.l_csi_values = j.value("l_csi_values", c.l_csi_values);
        if (j.contains("pca_k_values"))
            for (const auto& k : j.at("pca_k_values")) {
                if (k.is_null() || (k.is_string() && k.get<std::string>() == "none")) c.pca_k_values.emplace_back();
                else c.pca_k_values.emplace_back(k.get<int>());
            }
        c.sensor_subsets = j.value("sensor_subsets", c.sensor_subsets);
        c.eval_split = parse_split(j.value("eval_split", std::string("test")));
        c.seed = j.value("seed", std::uint64_t{0});
        json pipeline = j.value("pipeline", json::object());
        if (!pipeline.contains("seed")) pipeline["seed"] = c.seed;
        c.base = pipeline_from_json(pipeline);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("experiment config has a field of the wrong type: ") + e.what());
    }
    return c;
}

json to_json(const ExperimentConfig& c) {
    json modes = json::array();
    for (auto m : c.modes) modes.push_back(to_string(m));
    json ks = json::array();
    for (const auto& k : c.pca_k_values) ks.push_back(k ? json(*k) : json("none"));
    return {{"name", c.name},
            {"kind", kind_name(c.kind)},
            {"dataset", c.dataset.string()},
            {"output_dir", c.output_dir.string()},
            {"modes", modes},
            {"l_csi_values", c.l_csi_values},
            {"pca_k_values", ks},
            {"sensor_subsets", c.sensor_subsets},
            {"eval_split", split_name(c.eval_split)},
            {"seed", c.seed},
            {"pipeline", to_json(c.base)}};
}

ResultsTable::ResultsTable(fs::path path) : path_(std::move(path)) {}

const std::vector<std::string>& ResultsTable::columns() {
    static const std::vector<std::string> cols = {"run_id",     "config_hash", "seed",      "experiment", "kind",
                                                  "label",      "mode",        "L",         "k",          "n_sensors",
                                                  "sensors",    "mean_psnr",   "mean_ssim", "parameters", "csi_input_parameters",
                                                  "train_seconds", "footprint_mse"};
    return cols;
}

std::vector<std::map<std::string, std::string>> ResultsTable::rows() const {
    std::vector<std::map<std::string, std::string>> out;
    std::ifstream is(path_);
    if (!is) return out;
    std::string line;
    std::vector<std::string> header;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string f;
        while (std::getline(ss, f, ',')) fields.push_back(f);
        if (header.empty()) {
            header = fields;
            continue;
        }
        std::map<std::string, std::string> row;
        for (std::size_t i = 0; i < header.size(); ++i) row[header[i]] = i < fields.size() ? fields[i] : std::string();
        out.push_back(std::move(row));
    }
    return out;
}

bool ResultsTable::contains(const std::string& config_hash) const {
    for (const auto& row : rows()) {
        const auto it = row.find("config_hash");
        if (it != row.end() && it->second == config_hash) return true;
    }
    return false;
}

void ResultsTable::append(const std::map<std::string, std::string>& row) const {
    if (path_.has_parent_path()) fs::create_directories(path_.parent_path());
    const int fd = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
    if (fd < 0) throw IoError("cannot open " + path_.string() + " for appending");
    if (::flock(fd, LOCK_EX) != 0) {
        ::close(fd);
        throw IoError("cannot lock " + path_.string());
    }
    std::string text;
    if (::lseek(fd, 0, SEEK_END) == 0) {
        for (std::size_t i = 0; i < columns().size(); ++i) text += (i ? "," : "") + columns()[i];
        text += "\n";
    }
    for (std::size_t i = 0; i < columns().size(); ++i) {
        const auto it = row.find(columns()[i]);
        text += (i ? "," : "") + (it == row.end() ? std::string() : it->second);
    }
    text += "\n";
    const auto written = ::write(fd, text.data(), text.size());
    ::flock(fd, LOCK_UN);
    ::close(fd);
    if (written != static_cast<ssize_t>(text.size())) throw IoError("short write to " + path_.string());
}

std::vector<SweepPoint> expand_points(const ExperimentConfig& c) {
    std::vector<SweepPoint> points;
    const Mode mode = c.modes.front();
    switch (c.kind) {
        case ExperimentKind::mode_comparison:
            for (auto m : c.modes) points.push_back({to_string(m), m, c.base});
            break;
        case ExperimentKind::window_sweep:
            for (int l : c.l_csi_values) {
                SweepPoint p{"L=" + std::to_string(l), mode, c.base};
                p.config.windows.l_csi = l;
                p.config.model.l_csi = l;
                points.push_back(std::move(p));
            }
            break;
        case ExperimentKind::pca_ablation:
            for (const auto& k : c.pca_k_values) {
                SweepPoint p{k ? "k=" + std::to_string(*k) : "k=none", mode, c.base};
                p.config.preprocess.pca_k = k;
                points.push_back(std::move(p));
            }
            break;
        case ExperimentKind::sensor_study:
            for (const auto& subset : c.sensor_subsets) {
                SweepPoint p{"sensors=" + join(subset), mode, c.base};
                p.config.sensors = subset;
                points.push_back(std::move(p));
            }
            break;
    }
    return points;
}

std::string point_hash(const ExperimentConfig& c, const SweepPoint& p) {
    const json resolved = {{"dataset", fs::absolute(c.dataset).lexically_normal().string()},
                           {"eval_split", split_name(c.eval_split)},
                           {"mode", to_string(p.mode)},
                           {"pipeline", to_json(p.config)}};
    return config_hash(resolved);
}

std::int64_t csi_input_layer_parameters(const ModelConfig& m) {
    return static_cast<std::int64_t>(m.csi_token_dim()) * m.embed_dim + m.embed_dim;
}

std::vector<double> centroid_errors(const std::vector<SyncedSample>& samples, const torch::Tensor& restored,
                                    const std::array<float, 3>& background, double threshold) {
    const auto out = restored.contiguous();
    std::vector<double> errors;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& s = samples[i];
        const std::size_t frame = static_cast<std::size_t>(s.height) * s.width * 3;
        double sum = 0.0;
        int frames = 0;
        for (int f = 0; f < s.l_img; ++f) {
            const float* gt = s.gt_window.data() + static_cast<std::size_t>(f) * frame;
            const float* re = out.data_ptr<float>() + (i * static_cast<std::size_t>(s.l_img) + static_cast<std::size_t>(f)) * frame;
            const auto centroid = [&](const float* img, double& cy, double& cx) {
                double n = 0;
                cy = cx = 0;
                for (int y = 0; y < s.height; ++y)
                    for (int x = 0; x < s.width; ++x) {
                        const float* px = img + (static_cast<std::size_t>(y) * s.width + x) * 3;
                        double d = 0;
                        for (int c = 0; c < 3; ++c) d = std::max(d, static_cast<double>(std::abs(px[c] - background[static_cast<std::size_t>(c)])));
                        if (d > threshold) {
                            cy += y;
                            cx += x;
                            n += 1;
                        }
                    }
                if (n > 0) {
                    cy /= n;
                    cx /= n;
                }
                return n > 0;
            };
            double gy, gx, ry, rx;
            if (!centroid(gt, gy, gx)) continue;
            ++frames;
            if (!centroid(re, ry, rx)) {
                sum = std::numeric_limits<double>::infinity();
                continue;
            }
            sum += std::hypot(gy - ry, gx - rx);
        }
        errors.push_back(frames ? sum / frames : std::numeric_limits<double>::quiet_NaN());
    }
    return errors;
}

std::vector<double> footprint_mse(const Dataset& dataset, int camera_id, const std::vector<SyncedSample>& samples,
                                  const torch::Tensor& restored) {
    if (dataset.manifest.scene.is_null() || dataset.manifest.scene.empty()) return {};
    const SceneConfig scene = scene_from_json(dataset.manifest.scene);
    const ImageSequence* images = nullptr;
    for (const auto& seq : dataset.images)
        if (seq.camera_id == camera_id) images = &seq;
    if (!images) return {};
    const auto& camera = scene.room.cameras.at(static_cast<std::size_t>(camera_id));
    const auto out = restored.contiguous();
    std::vector<double> sums(scene.pedestrians.size(), 0.0);
    std::vector<int> counts(scene.pedestrians.size(), 0);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& s = samples[i];
        const std::size_t plane = static_cast<std::size_t>(s.height) * s.width;
        for (int f = 0; f < s.l_img; ++f) {
            const double t = images->timestamps[s.plan.image_begin + static_cast<std::size_t>(f)];
            const float* gt = s.gt_window.data() + static_cast<std::size_t>(f) * plane * 3;
            const float* re = out.data_ptr<float>() + (i * static_cast<std::size_t>(s.l_img) + static_cast<std::size_t>(f)) * plane * 3;
            const std::uint8_t* mask = s.mask_window.data() + static_cast<std::size_t>(f) * plane;
            for (std::size_t p = 0; p < scene.pedestrians.size(); ++p) {
                const auto fp = pedestrian_footprint(camera, scene.pedestrians[p].position_at(t), scene.style);
                double se = 0.0;
                std::size_t n = 0;
                for (std::size_t k = 0; k < plane; ++k)
                    if (fp[k] && mask[k])
                        for (int c = 0; c < 3; ++c) {
                            const double d = re[k * 3 + static_cast<std::size_t>(c)] - gt[k * 3 + static_cast<std::size_t>(c)];
                            se += d * d;
                            ++n;
                        }
                if (n > 0) {
                    sums[p] += se / static_cast<double>(n);
                    ++counts[p];
                }
            }
        }
    }
    std::vector<double> out_mse;
    for (std::size_t p = 0; p < sums.size(); ++p)
        out_mse.push_back(counts[p] ? sums[p] / counts[p] : std::numeric_limits<double>::quiet_NaN());
    return out_mse;
}

namespace {

void write_plots(const ExperimentConfig& c, const std::vector<PointResult>& results, const fs::path& dir) {
    std::vector<double> ssim_values;
    for (const auto& r : results)
        if (!r.failed && !r.record.ssim_values.empty()) ssim_values.push_back(r.record.mean_ssim);
    if (ssim_values.empty()) return;
    if (c.kind == ExperimentKind::window_sweep) {
        Series ssim_curve{"mean SSIM", {}, {}};
        Series psnr_curve{"mean PSNR", {}, {}};
        for (const auto& r : results) {
            if (r.failed || r.record.ssim_values.empty()) continue;
            ssim_curve.x.push_back(r.point.config.windows.l_csi);
            ssim_curve.y.push_back(r.record.mean_ssim);
            psnr_curve.x.push_back(r.point.config.windows.l_csi);
            psnr_curve.y.push_back(r.record.mean_psnr);
        }
        write_png(dir / "ssim_vs_L.png", line_plot({ssim_curve}));
        write_png(dir / "psnr_vs_L.png", line_plot({psnr_curve}));
    } else {
        write_png(dir / "mean_ssim.png", bar_chart(ssim_values));
    }
}

}  // namespace

std::vector<PointResult> run_experiment(const ExperimentConfig& c, const Dataset& dataset, const RunHooks& hooks) {
    c.validate(dataset);
    const auto log = [&](const std::string& m) {
        if (hooks.log) hooks.log(m);
    };
    const fs::path dir = c.output_dir / c.name;
    fs::create_directories(dir);
    const ResultsTable table(c.output_dir / (c.name + ".csv"));

    std::vector<PointResult> results;
    for (const auto& point : expand_points(c)) {
        PointResult r;
        r.point = point;
        r.config_hash = point_hash(c, point);
        const fs::path run_json = dir / (r.config_hash + ".json");
        if (table.contains(r.config_hash)) {
            r.skipped = true;
            if (fs::exists(run_json)) {
                std::ifstream is(run_json);
                const json j = json::parse(is);
                r.record = MetricsRecord::from_json(j.at("metrics"));
                r.parameters = j.value("parameters", std::int64_t{0});
                r.csi_input_parameters = j.value("csi_input_parameters", std::int64_t{0});
                r.train_seconds = j.value("train_seconds", 0.0);
                r.footprint_mse = j.value("footprint_mse", std::vector<double>{});
            }
            log("skip " + point.label + " (" + r.config_hash + "): results row exists");
            results.push_back(std::move(r));
            continue;
        }
        if (hooks.before_point && !hooks.before_point(point)) {
            log("run interrupted before " + point.label);
            break;
        }
        try {
            log("run " + point.label + " (" + r.config_hash + ")");
            const PreparedData data = prepare_data(dataset, point.config, point.mode, log);
            TrainOptions opts;
            opts.on_epoch = hooks.on_epoch;
            opts.extra = {{"config_hash", r.config_hash}, {"experiment", c.name}};
            TrainOutcome outcome = train_model(data, opts);
            r.parameters = outcome.parameters;
            r.csi_input_parameters = csi_input_layer_parameters(data.model_config);
            r.train_seconds = outcome.seconds;
            const auto& eval_samples = data.split(c.eval_split);
            Evaluation ev = evaluate(outcome.model, eval_samples, data.features, point.mode, data.mask.fill_value, r.config_hash);
            ev.record.config_summary = {{"label", point.label},
                                        {"L", point.config.windows.l_csi},
                                        {"k", point.config.preprocess.pca_k ? json(*point.config.preprocess.pca_k) : json("none")},
                                        {"sensors", data.sensor_ids},
                                        {"seed", point.config.seed}};
            r.record = ev.record;
            if (c.kind == ExperimentKind::sensor_study)
                r.footprint_mse = footprint_mse(dataset, point.config.camera_id, eval_samples, ev.restored);
            write_sample_grid(dir / (r.config_hash + "_grid.png"), eval_samples, ev.restored);

            json run = {{"metrics", r.record.to_json()},
                        {"config", to_json(point.config)},
                        {"mode", to_string(point.mode)},
                        {"parameters", r.parameters},
                        {"csi_input_parameters", r.csi_input_parameters},
                        {"train_seconds", r.train_seconds},
                        {"epoch_losses", outcome.meta.state.epoch_losses},
                        {"footprint_mse", r.footprint_mse}};
            std::ofstream(run_json) << run.dump(2) << "\n";

            std::vector<std::string> fp;
            for (double v : r.footprint_mse) fp.push_back(fmt_double(v));
            std::string fp_text;
            for (std::size_t i = 0; i < fp.size(); ++i) fp_text += (i ? ";" : "") + fp[i];
            table.append({{"run_id", r.config_hash},
                          {"config_hash", r.config_hash},
                          {"seed", std::to_string(point.config.seed)},
                          {"experiment", c.name},
                          {"kind", kind_name(c.kind)},
                          {"label", point.label},
                          {"mode", to_string(point.mode)},
                          {"L", std::to_string(point.config.windows.l_csi)},
                          {"k", point.config.preprocess.pca_k ? std::to_string(*point.config.preprocess.pca_k) : "none"},
                          {"n_sensors", std::to_string(data.sensor_ids.size())},
                          {"sensors", join(data.sensor_ids)},
                          {"mean_psnr", fmt_double(r.record.mean_psnr)},
                          {"mean_ssim", fmt_double(r.record.mean_ssim)},
                          {"parameters", std::to_string(r.parameters)},
                          {"csi_input_parameters", std::to_string(r.csi_input_parameters)},
                          {"train_seconds", fmt_double(r.train_seconds)},
                          {"footprint_mse", fp_text}});
            log(point.label + ": mean PSNR " + fmt_double(r.record.mean_psnr) + " dB, mean SSIM " + fmt_double(r.record.mean_ssim));
        } catch (const ConfigError& e) {
            if (c.kind == ExperimentKind::window_sweep) {
                log("warning: skipping infeasible point " + point.label + ": " + e.what());
                r.skipped = true;
                r.error = e.what();
            } else {
                r.failed = true;
                r.error = e.what();
                log("point " + point.label + " failed: " + r.error);
            }
        } catch (const std::exception& e) {
            r.failed = true;
            r.error = e.what();
            log("point " + point.label + " failed: " + r.error);
        }
        results.push_back(std::move(r));
    }
    write_plots(c, results, dir);
    return results;
}

}  // namespace csi_inpaint
