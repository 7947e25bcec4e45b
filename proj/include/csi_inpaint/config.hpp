#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "csi_inpaint/dataset_io.hpp"
#include "csi_inpaint/masking.hpp"
#include "csi_inpaint/preprocess.hpp"
#include "csi_inpaint/scene_sim.hpp"

namespace csi_inpaint {

inline constexpr int kConfigVersion = 1;

enum class Mode { multimodal, image_only, rf_only };

std::string to_string(Mode mode);
Mode parse_mode(std::string_view text);

struct ModelConfig {
    int image_height = 64;
    int image_width = 64;
    int patch_size = 8;
    int embed_dim = 32;
    int n_heads = 4;
    int n_layers_img = 4;  // alternating window / shifted-window blocks
    int n_layers_csi = 2;
    int attn_window = 4;   // patches per window side
    int mlp_ratio = 2;
    int csi_feature_dim = 10;
    int n_sensors = 4;
    int l_img = 8;
    int l_csi = 80;
    int csi_patch_len = 10;
    int reduced_img_dim = 16;
    int reduced_csi_dim = 16;
    std::vector<int> decoder_channels{48, 32, 16};  // one per 2x upsampling stage

    int grid_height() const { return image_height / patch_size; }
    int grid_width() const { return image_width / patch_size; }
    int csi_tokens_per_sensor() const { return l_csi / csi_patch_len; }
    int csi_token_dim() const { return csi_patch_len * csi_feature_dim; }
    int fused_channels() const { return reduced_img_dim + reduced_csi_dim + 3 + 1; }

    /// Throws ConfigError naming the violated constraint.
    void validate() const;
};

struct TrainConfig {
    int epochs = 200;
    int batch_size = 8;
    double learning_rate = 1e-3;
    bool cosine_decay = true;
    double ssim_weight = 0.2;  // loss = MAE + ssim_weight * (1 - SSIM)
    double grad_clip = 1.0;    // max global grad norm; <= 0 disables
    std::uint64_t seed = 0;

    void validate() const;
};

struct SplitConfig {
    double train = 0.8;  // chronological fractions of the window list
    double val = 0.1;
};

/// Everything needed to turn a dataset into trained/evaluated models.
struct PipelineConfig {
    int version = kConfigVersion;
    int camera_id = 0;
    std::vector<int> sensors;  // empty = every sensor in the dataset
    WindowSpec windows{8, 80, 8};
    MaskSpec mask;
    PreprocessConfig preprocess;
    ModelConfig model;
    TrainConfig training;
    SplitConfig split;
    std::uint64_t seed = 0;
};

nlohmann::json to_json(const SceneConfig& scene);
nlohmann::json to_json(const PipelineConfig& config);
nlohmann::json to_json(const ModelConfig& config);
nlohmann::json to_json(const MaskSpec& spec);

/// Parsers report the dotted path of the offending field, e.g.
/// "missing required field 'room.width'".
SceneConfig scene_from_json(const nlohmann::json& j);
PipelineConfig pipeline_from_json(const nlohmann::json& j);
ModelConfig model_config_from_json(const nlohmann::json& j);
MaskSpec mask_from_json(const nlohmann::json& j);

/// Parses a JSON file, reporting syntax errors with line and column.
nlohmann::json read_json_file(const std::filesystem::path& path);

/// FNV-1a of the canonical (sorted-key) dump of a resolved config.
std::string config_hash(const nlohmann::json& resolved);

}  // namespace csi_inpaint
