#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "csi_inpaint/config.hpp"
#include "csi_inpaint/dataset_io.hpp"
#include "csi_inpaint/metrics.hpp"
#include "csi_inpaint/pipeline.hpp"

namespace csi_inpaint {

enum class ExperimentKind { mode_comparison, window_sweep, pca_ablation, sensor_study };

struct ExperimentConfig {
    std::string name = "experiment";
    ExperimentKind kind = ExperimentKind::mode_comparison;
    std::filesystem::path dataset;
    std::filesystem::path output_dir = "results";
    std::vector<Mode> modes{Mode::multimodal};
    std::vector<int> l_csi_values;                 // window sweep
    std::vector<std::optional<int>> pca_k_values;  // pca ablation; nullopt = no PCA
    std::vector<std::vector<int>> sensor_subsets;  // sensor study
    Split eval_split = Split::test;
    PipelineConfig base;
    std::uint64_t seed = 0;

    /// Throws ConfigError; sensor ids are checked against the dataset.
    void validate(const Dataset& dataset) const;
};

ExperimentConfig experiment_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ExperimentConfig& config);

/// One trained-and-evaluated configuration.
struct SweepPoint {
    std::string label;
    Mode mode = Mode::multimodal;
    PipelineConfig config;
};

struct PointResult {
    SweepPoint point;
    std::string config_hash;
    bool skipped = false;  // a results row already existed
    bool failed = false;
    std::string error;
    MetricsRecord record;
    std::int64_t parameters = 0;
    std::int64_t csi_input_parameters = 0;
    double train_seconds = 0.0;
    std::vector<double> footprint_mse;  // per pedestrian, sensor study only
};

/// Append-only results CSV guarded by an exclusive flock.
class ResultsTable {
public:
    explicit ResultsTable(std::filesystem::path path);

    static const std::vector<std::string>& columns();
    bool contains(const std::string& config_hash) const;
    std::vector<std::map<std::string, std::string>> rows() const;
    void append(const std::map<std::string, std::string>& row) const;
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

/// Expands an experiment into its sweep points (in order).
std::vector<SweepPoint> expand_points(const ExperimentConfig& config);

/// Resolved-config hash identifying a point across reruns.
std::string point_hash(const ExperimentConfig& config, const SweepPoint& point);

struct RunHooks {
    std::function<void(const std::string&)> log;
    /// Called before each non-skipped point; returning false aborts the run
    /// (used to simulate an interrupted sweep).
    std::function<bool(const SweepPoint&)> before_point;
    std::function<void(int, double)> on_epoch;
};

/// Trains and evaluates every point missing from <output_dir>/<name>.csv,
/// writes per-run JSON, and the plots for the experiment kind.
std::vector<PointResult> run_experiment(const ExperimentConfig& config, const Dataset& dataset, const RunHooks& hooks = {});

/// Parameters of the CSI encoder's input projection: token_dim * embed_dim + embed_dim.
std::int64_t csi_input_layer_parameters(const ModelConfig& config);

/// Pixel centroid distance between each frame's restored foreground and its
/// ground-truth foreground (pixels differing from `background` by more than
/// `threshold` in any channel). Frames without ground-truth foreground are
/// skipped; an empty restored foreground counts as +infinity.
/// Returns one mean error per sample.
std::vector<double> centroid_errors(const std::vector<SyncedSample>& samples, const torch::Tensor& restored,
                                    const std::array<float, 3>& background, double threshold = 0.15);

/// Masked-region MSE restricted to each pedestrian's footprint, averaged over
/// the sample frames where the footprint is non-empty. Needs the scene recorded in the manifest.
std::vector<double> footprint_mse(const Dataset& dataset, int camera_id, const std::vector<SyncedSample>& samples,
                                  const torch::Tensor& restored);

}  // namespace csi_inpaint
