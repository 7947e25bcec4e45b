#include "csi_inpaint/pipeline.hpp"

#include <chrono>
#include <cmath>

#include "csi_inpaint/common.hpp"
#include "csi_inpaint/image_io.hpp"
#include "csi_inpaint/masking.hpp"

namespace csi_inpaint {

Split parse_split(std::string_view text) {
    if (text == "train") return Split::train;
    if (text == "val") return Split::val;
    if (text == "test") return Split::test;
    throw ConfigError("unknown split '" + std::string(text) + "' (expected train, val or test)");
}

const std::vector<SyncedSample>& PreparedData::split(Split s) const {
    switch (s) {
        case Split::train: return train;
        case Split::val: return val;
        case Split::test: return test;
    }
    return test;
}

namespace {

PreparedData window_and_split(const Dataset& dataset, const PipelineConfig& config, Mode mode,
                              const std::function<void(const std::string&)>& notice) {
    PreparedData d;
    d.config = config;
    d.mode = mode;
    d.mask = config.mask;
    if (mode == Mode::rf_only && config.mask.kind != MaskKind::full) {
        d.mask.kind = MaskKind::full;
        d.mask.coverage = 1.0;
        if (notice) notice("rf-only mode: forcing a full mask regardless of the configured mask");
    }
    const ImageSequence* images = nullptr;
    for (const auto& seq : dataset.images)
        if (seq.camera_id == config.camera_id) images = &seq;
    if (!images) throw ConfigError("dataset has no camera " + std::to_string(config.camera_id));
    if (config.sensors.empty()) {
        for (const auto& s : dataset.csi) d.sensor_ids.push_back(s.sensor_id);
    } else {
        d.sensor_ids = config.sensors;
    }
    const auto csi = select_sensors(dataset, d.sensor_ids);
    auto samples = window_samples(*images, csi, config.windows);
    if (samples.empty()) throw ConfigError("no complete windows fit the dataset");
    for (std::size_t i = 0; i < samples.size(); ++i) mask_sample(samples[i], d.mask, i);

    const auto n = samples.size();
    auto n_train = static_cast<std::size_t>(std::floor(config.split.train * static_cast<double>(n) + 1e-9));
    n_train = std::clamp<std::size_t>(n_train, 1, n);
    auto n_val = std::min(n - n_train, static_cast<std::size_t>(std::floor(config.split.val * static_cast<double>(n) + 1e-9)));
    for (std::size_t i = 0; i < n; ++i) {
        auto& dst = i < n_train ? d.train : (i < n_train + n_val ? d.val : d.test);
        dst.push_back(std::move(samples[i]));
    }
    return d;
}

void resolve_model(PreparedData& d) {
    d.model_config = d.config.model;
    d.model_config.csi_feature_dim = d.features.feature_dim();
    d.model_config.n_sensors = static_cast<int>(d.sensor_ids.size());
    d.model_config.l_img = d.config.windows.l_img;
    d.model_config.l_csi = d.config.windows.l_csi;
    const auto& s = d.train.front();
    d.model_config.image_height = s.height;
    d.model_config.image_width = s.width;
    d.model_config.validate();
}

}  // namespace

PreparedData prepare_data(const Dataset& dataset, const PipelineConfig& config, Mode mode,
                          const std::function<void(const std::string&)>& notice) {
    PreparedData d = window_and_split(dataset, config, mode, notice);
    d.features = FeaturePipeline::fit(d.train, config.preprocess);
    resolve_model(d);
    return d;
}

PreparedData prepare_data(const Dataset& dataset, const PipelineConfig& config, Mode mode, const FeaturePipeline& features) {
    PreparedData d = window_and_split(dataset, config, mode, {});
    d.features = features;
    resolve_model(d);
    return d;
}

TensorSet to_tensors(const std::vector<SyncedSample>& samples, const FeaturePipeline& features, float fill_value) {
    if (samples.empty()) throw ConfigError("cannot build tensors from an empty split");
    const auto& s0 = samples.front();
    const auto n = static_cast<std::int64_t>(samples.size());
    const std::int64_t l = s0.l_img, h = s0.height, w = s0.width;
    const std::int64_t sensors = static_cast<std::int64_t>(s0.csi_windows.size());
    const std::int64_t f = features.feature_dim();
    TensorSet t;
    t.fill_value = fill_value;
    t.gt = torch::empty({n, l, h, w, 3});
    t.defective = torch::empty({n, l, h, w, 3});
    t.mask = torch::empty({n, l, h, w});
    t.csi = torch::empty({n, sensors, s0.l_csi, f});
    for (std::int64_t i = 0; i < n; ++i) {
        const auto& s = samples[static_cast<std::size_t>(i)];
        std::copy(s.gt_window.begin(), s.gt_window.end(), t.gt[i].data_ptr<float>());
        std::copy(s.defective_window.begin(), s.defective_window.end(), t.defective[i].data_ptr<float>());
        std::copy(s.mask_window.begin(), s.mask_window.end(), t.mask[i].data_ptr<float>());
        const auto feats = features.transform(s);
        std::copy(feats.begin(), feats.end(), t.csi[i].data_ptr<float>());
    }
    return t;
}

TrainOutcome train_model(const PreparedData& data, const TrainOptions& options) {
    TrainOutcome out;
    out.meta.model_config = data.model_config;
    out.meta.features = data.features;
    out.meta.mode = data.mode;
    out.meta.train_config = data.config.training;
    out.meta.mask = data.mask;
    out.meta.extra = options.extra;
    out.meta.extra["sensor_ids"] = data.sensor_ids;
    out.meta.extra["pipeline_config"] = to_json(data.config);

    if (options.resume) {
        if (to_json(options.resume->meta.model_config) != to_json(data.model_config))
            throw CheckpointMismatch("resume checkpoint was trained with a different model config");
        if (options.resume->meta.mode != data.mode) throw CheckpointMismatch("resume checkpoint was trained in another mode");
        out.model = options.resume->model;
    } else {
        out.model = build_model(data.model_config, data.config.training.seed);
    }
    Trainer trainer(out.model, data.config.training, data.mode);
    if (options.resume) {
        restore_optimizer(*options.resume, out.model, trainer.optimizer());
        trainer.state() = options.resume->meta.state;
    }
    out.parameters = count_parameters(*out.model);

    const TensorSet tensors = to_tensors(data.train, data.features, data.mask.fill_value);
    const auto start = std::chrono::steady_clock::now();
    const auto save = [&] {
        if (!options.checkpoint_out) return;
        out.meta.state = trainer.state();
        save_checkpoint(*options.checkpoint_out, out.meta, out.model, &trainer.optimizer());
    };
    trainer.fit(tensors, [&](int epoch, double loss) {
        if (options.on_epoch) options.on_epoch(epoch, loss);
        if (options.checkpoint_every > 0 && epoch % options.checkpoint_every == 0) save();
    });
    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    out.meta.state = trainer.state();
    save();
    return out;
}

Evaluation evaluate(CsiInpainter& model, const std::vector<SyncedSample>& samples, const FeaturePipeline& features,
                    Mode mode, float fill_value, std::string run_id) {
    if (samples.empty()) throw ConfigError("evaluation split is empty");
    const TensorSet t = to_tensors(samples, features, fill_value);
    Evaluation ev;
    ev.restored = predict(model, t, mode).contiguous();
    std::vector<double> p, s;
    const auto& s0 = samples.front();
    const std::size_t frame = static_cast<std::size_t>(s0.height) * s0.width * 3;
    const float* out = ev.restored.data_ptr<float>();
    for (std::size_t i = 0; i < samples.size(); ++i)
        for (int f = 0; f < s0.l_img; ++f) {
            const std::size_t off = (i * static_cast<std::size_t>(s0.l_img) + static_cast<std::size_t>(f)) * frame;
            const std::span<const float> restored(out + off, frame);
            const std::span<const float> gt(samples[i].gt_window.data() + static_cast<std::size_t>(f) * frame, frame);
            p.push_back(psnr(restored, gt));
            s.push_back(ssim(restored, gt, s0.height, s0.width, 3));
        }
    ev.record = aggregate_metrics(std::move(p), std::move(s), std::move(run_id), to_string(mode));
    return ev;
}

void write_sample_grid(const std::filesystem::path& path, const std::vector<SyncedSample>& samples,
                       const torch::Tensor& restored, int max_rows) {
    if (samples.empty()) return;
    const auto& s0 = samples.front();
    const std::size_t frame = static_cast<std::size_t>(s0.height) * s0.width * 3;
    const auto out = restored.contiguous();
    std::vector<std::vector<float>> errors;
    std::vector<std::span<const float>> tiles;
    int rows = 0;
    for (std::size_t i = 0; i < samples.size() && rows < max_rows; ++i, ++rows) {
        // Last frame of each window.
        const std::size_t f = static_cast<std::size_t>(s0.l_img - 1);
        const float* r = out.data_ptr<float>() + (i * static_cast<std::size_t>(s0.l_img) + f) * frame;
        const float* g = samples[i].gt_window.data() + f * frame;
        std::vector<float> err(frame);
        for (std::size_t k = 0; k < frame; ++k) err[k] = std::abs(r[k] - g[k]);
        errors.push_back(std::move(err));
        tiles.emplace_back(g, frame);
        tiles.emplace_back(samples[i].defective_window.data() + f * frame, frame);
        tiles.emplace_back(r, frame);
        tiles.emplace_back(errors.back().data(), frame);
    }
    write_png(path, tile_grid(tiles, s0.height, s0.width, 4));
}

}  // namespace csi_inpaint
