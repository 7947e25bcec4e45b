#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "csi_inpaint/checkpoint.hpp"
#include "csi_inpaint/config.hpp"
#include "csi_inpaint/dataset_io.hpp"
#include "csi_inpaint/metrics.hpp"
#include "csi_inpaint/model.hpp"
#include "csi_inpaint/preprocess.hpp"
#include "csi_inpaint/train.hpp"

namespace csi_inpaint {

enum class Split { train, val, test };
Split parse_split(std::string_view text);

/// Masked, windowed, chronologically split samples plus the feature pipeline
/// fitted on the training split.
struct PreparedData {
    PipelineConfig config;
    Mode mode = Mode::multimodal;
    MaskSpec mask;  // effective mask (full for rf-only)
    std::vector<int> sensor_ids;
    std::vector<SyncedSample> train, val, test;
    FeaturePipeline features;
    ModelConfig model_config;  // config.model with data-dependent dims filled in

    const std::vector<SyncedSample>& split(Split s) const;
};

/// Windows the configured camera against the configured sensors, masks each
/// window, splits chronologically and fits preprocessing on the train split.
/// rf-only forces a full mask; `notice` receives a message when that happens.
PreparedData prepare_data(const Dataset& dataset, const PipelineConfig& config, Mode mode,
                          const std::function<void(const std::string&)>& notice = {});

/// Same, reusing an already fitted feature pipeline (evaluation path).
PreparedData prepare_data(const Dataset& dataset, const PipelineConfig& config, Mode mode, const FeaturePipeline& features);

TensorSet to_tensors(const std::vector<SyncedSample>& samples, const FeaturePipeline& features, float fill_value);

struct TrainOutcome {
    Checkpoint meta;
    CsiInpainter model{nullptr};
    double seconds = 0.0;
    std::int64_t parameters = 0;
};

struct TrainOptions {
    std::optional<std::filesystem::path> checkpoint_out;
    const LoadedCheckpoint* resume = nullptr;
    int checkpoint_every = 0;  // epochs; 0 = only at the end
    std::function<void(int, double)> on_epoch;
    nlohmann::json extra = nlohmann::json::object();
};

TrainOutcome train_model(const PreparedData& data, const TrainOptions& options = {});

struct Evaluation {
    MetricsRecord record;
    torch::Tensor restored;  // (N, L, H, W, 3)
};

/// Per-frame PSNR/SSIM of the restored windows against ground truth.
Evaluation evaluate(CsiInpainter& model, const std::vector<SyncedSample>& samples, const FeaturePipeline& features,
                    Mode mode, float fill_value, std::string run_id = {});

/// Grid with one row per sample (its last frame) and four columns:
/// ground truth, defective input, restored output, absolute error.
void write_sample_grid(const std::filesystem::path& path, const std::vector<SyncedSample>& samples,
                       const torch::Tensor& restored, int max_rows = 8);

}  // namespace csi_inpaint
