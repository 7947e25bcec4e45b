#pragma once

#include <filesystem>
#include <optional>

#include <json.hpp>

#include "csi_inpaint/config.hpp"
#include "csi_inpaint/model.hpp"
#include "csi_inpaint/preprocess.hpp"
#include "csi_inpaint/train.hpp"

namespace csi_inpaint {

/// Single-file archive:
///   8 bytes   magic "CSICKPT1"
///   8 bytes   little-endian uint64 header length
///   header    JSON: model config, preprocessing artifacts, training state,
///             tensor index [{name, shape, offset, count}]
///   payload   little-endian float32 arrays at the indexed offsets
struct Checkpoint {
    ModelConfig model_config;
    FeaturePipeline features;
    Mode mode = Mode::multimodal;
    TrainConfig train_config;
    MaskSpec mask;
    TrainState state;
    nlohmann::json extra = nlohmann::json::object();  // run metadata (config hash, sensor ids, ...)
};

/// Writes weights (and Adam moments when an optimizer is given).
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& meta, CsiInpainter& model,
                     torch::optim::Adam* optimizer = nullptr);

struct LoadedCheckpoint {
    Checkpoint meta;
    CsiInpainter model{nullptr};
    std::map<std::string, torch::Tensor> optimizer_tensors;  // "exp_avg/<param>", "exp_avg_sq/<param>"
    std::int64_t optimizer_step = 0;
};

/// Throws CheckpointMismatch when a stored tensor is missing or misshapen, and
/// CorruptionError for truncated or malformed files.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

/// Copies stored Adam moments into a freshly constructed optimizer.
void restore_optimizer(const LoadedCheckpoint& loaded, CsiInpainter& model, torch::optim::Adam& optimizer);

}  // namespace csi_inpaint
