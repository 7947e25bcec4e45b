#pragma once

#include <complex>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

namespace csi_inpaint {

struct CsiSequence;
struct SyncedSample;

/// Non-negative (T, n_tx, n_rx, n_subcarriers) tensor. Also used for
/// post-PCA features, where the last axis holds components.
struct AmplitudeTensor {
    int frames = 0;
    int n_tx = 1;
    int n_rx = 1;
    int n_subcarriers = 0;
    std::vector<float> values;

    std::size_t rows() const { return static_cast<std::size_t>(frames) * n_tx * n_rx; }
    std::span<const float> row(std::size_t r) const { return {values.data() + r * n_subcarriers, static_cast<std::size_t>(n_subcarriers)}; }
};

AmplitudeTensor extract_amplitude(std::span<const std::complex<float>> csi, int frames, int n_tx, int n_rx, int n_subcarriers);
AmplitudeTensor extract_amplitude(const CsiSequence& csi);

/// Per-subcarrier variance over all (T, tx, rx) rows.
std::vector<double> subcarrier_variance(const AmplitudeTensor& amp);

struct CleanResult {
    AmplitudeTensor amplitude;
    std::vector<int> kept;
};

/// Drops subcarriers whose temporal variance is <= variance_floor.
CleanResult clean_subcarriers(const AmplitudeTensor& amp, double variance_floor);

AmplitudeTensor select_subcarriers(const AmplitudeTensor& amp, std::span<const int> kept);

struct PcaModel {
    std::vector<double> mean;                      // (n_features)
    std::vector<std::vector<double>> components;   // (k, n_features), orthonormal rows
    std::vector<double> explained_variance_ratio;  // (k), non-increasing

    int n_features() const { return static_cast<int>(mean.size()); }
    int k() const { return static_cast<int>(components.size()); }

    nlohmann::json to_json() const;
    static PcaModel from_json(const nlohmann::json& j);
};

/// PCA over the last axis, pooling every row of every tensor. Component signs
/// make each row's largest-magnitude coordinate positive.
PcaModel fit_pca(std::span<const AmplitudeTensor> data, int k);

/// Centered projection; result has n_subcarriers == model.k().
AmplitudeTensor pca_transform(const PcaModel& model, const AmplitudeTensor& amp);
AmplitudeTensor pca_inverse_transform(const PcaModel& model, const AmplitudeTensor& projected);

struct NormalizationStats {
    std::vector<double> mean;
    std::vector<double> std;

    nlohmann::json to_json() const;
    static NormalizationStats from_json(const nlohmann::json& j);
};

/// Statistics over rows (T) for each of the `features` trailing values.
NormalizationStats fit_normalization(std::span<const std::vector<float>> data, int features);

/// z-score with training statistics; features whose std is 0 are only centered.
std::vector<float> normalize(std::span<const float> data, const NormalizationStats& stats);

struct PreprocessConfig {
    double variance_floor = 1e-12;
    std::optional<int> pca_k = 10;  // nullopt = keep every cleaned subcarrier
};

/// amplitude -> subcarrier cleaning -> optional PCA -> per-sensor z-score.
/// Fitted on training samples only, then applied unchanged everywhere else.
class FeaturePipeline {
public:
    FeaturePipeline() = default;

    static FeaturePipeline fit(std::span<const SyncedSample> train, const PreprocessConfig& config);

    /// Per-sensor features for one sample, (n_sensors, L_csi, feature_dim) row-major.
    std::vector<float> transform(const SyncedSample& sample) const;

    /// Unnormalized features of one sensor window, (L_csi, feature_dim).
    std::vector<float> raw_features(const SyncedSample& sample, std::size_t sensor_slot) const;

    int feature_dim() const;
    const std::vector<int>& kept() const { return kept_; }
    const std::optional<PcaModel>& pca() const { return pca_; }
    const std::map<int, NormalizationStats>& stats() const { return stats_; }
    int n_tx() const { return n_tx_; }
    int n_rx() const { return n_rx_; }
    int n_subcarriers() const { return n_subcarriers_; }

    nlohmann::json to_json() const;
    static FeaturePipeline from_json(const nlohmann::json& j);

private:
    PreprocessConfig config_;
    int n_tx_ = 1;
    int n_rx_ = 1;
    int n_subcarriers_ = 0;
    std::vector<int> kept_;
    std::optional<PcaModel> pca_;
    std::map<int, NormalizationStats> stats_;  // by sensor id
};

}  // namespace csi_inpaint
