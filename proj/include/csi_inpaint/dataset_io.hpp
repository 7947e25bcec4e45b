#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace csi_inpaint {

inline constexpr int kManifestVersion = 1;

struct ImageSequence {
    int camera_id = 0;
    int height = 0;
    int width = 0;
    std::vector<double> timestamps;
    std::vector<float> frames;  // (T, H, W, 3)

    std::size_t size() const { return timestamps.size(); }
    std::size_t frame_elements() const { return static_cast<std::size_t>(height) * width * 3; }
    std::span<const float> frame(std::size_t i) const;
    void validate() const;
};

struct CsiSequence {
    int sensor_id = 0;
    int n_tx = 1;
    int n_rx = 1;
    int n_subcarriers = 0;
    std::vector<double> timestamps;
    std::vector<std::complex<float>> values;  // (T, tx, rx, subcarrier)

    std::size_t size() const { return timestamps.size(); }
    std::size_t frame_elements() const { return static_cast<std::size_t>(n_tx) * n_rx * n_subcarriers; }
    std::span<const std::complex<float>> frame(std::size_t i) const;
    void validate() const;
};

struct CameraStreamInfo {
    int camera_id = 0;
    std::size_t frames = 0;
    int height = 0;
    int width = 0;
    std::string image_file;
    std::string timestamp_file;
};

struct SensorStreamInfo {
    int sensor_id = 0;
    std::size_t frames = 0;
    int n_tx = 1;
    int n_rx = 1;
    int n_subcarriers = 0;
    std::string csi_file;
    std::string timestamp_file;
};

struct DatasetManifest {
    int version = kManifestVersion;
    double duration = 0.0;
    double camera_rate = 0.0;
    double csi_rate = 0.0;
    std::uint64_t seed = 0;
    std::vector<CameraStreamInfo> cameras;
    std::vector<SensorStreamInfo> sensors;
    nlohmann::json scene;  // generating SceneConfig, if synthetic

    nlohmann::json to_json() const;
    static DatasetManifest from_json(const nlohmann::json& j);
};

struct Dataset {
    DatasetManifest manifest;
    std::vector<ImageSequence> images;
    std::vector<CsiSequence> csi;

    const CsiSequence& sensor(int sensor_id) const;
};

/// Writes every stream as raw little-endian binaries plus manifest.json.
DatasetManifest save_dataset(const std::filesystem::path& dir, const std::vector<ImageSequence>& images,
                             const std::vector<CsiSequence>& csi, DatasetManifest manifest);

/// Throws CorruptionError when a binary's byte count disagrees with the manifest.
Dataset load_dataset(const std::filesystem::path& dir);

/// One row per CSI frame: timestamp, then 2*n_tx*n_rx*n_subcarriers floats (real, imag interleaved).
CsiSequence load_csi_csv(const std::filesystem::path& path, int sensor_id, int n_tx, int n_rx, int n_subcarriers);

/// For every image timestamp, the index of the nearest CSI timestamp
/// (ties go to the earlier index, out-of-span images clamp to the ends).
std::vector<std::size_t> isochronize(std::span<const double> image_ts, std::span<const double> csi_ts);

struct WindowSpec {
    int l_img = 8;
    int l_csi = 80;
    int stride = 8;
};

struct SensorWindow {
    int sensor_id = 0;
    std::size_t csi_begin = 0;  // first CSI frame of the window
    std::vector<std::pair<std::size_t, std::size_t>> alignment;  // image index -> CSI index
};

/// Index-only description of one SyncedSample.
struct WindowPlan {
    std::size_t image_begin = 0;
    std::vector<SensorWindow> sensors;
};

/// Windows start at 0, stride, ...; each sensor's CSI window is the l_csi frames
/// ending at the CSI index aligned to the window's last image. Windows whose CSI
/// would start before frame 0 are skipped.
std::vector<WindowPlan> plan_windows(const ImageSequence& images, std::span<const CsiSequence> csi,
                                     const WindowSpec& spec);

struct SyncedSample {
    int l_img = 0;
    int height = 0;
    int width = 0;
    int l_csi = 0;
    std::vector<float> gt_window;               // (L_img, H, W, 3)
    std::vector<float> defective_window;        // (L_img, H, W, 3)
    std::vector<std::uint8_t> mask_window;      // (L_img, H, W), 1 = occluded
    std::vector<int> sensor_ids;
    std::vector<std::vector<std::complex<float>>> csi_windows;  // per sensor (L_csi, tx, rx, sc)
    int n_tx = 1;
    int n_rx = 1;
    int n_subcarriers = 0;
    WindowPlan plan;
};

/// Materializes a plan; defective_window starts as a copy of gt and the mask is empty.
SyncedSample make_sample(const WindowPlan& plan, const ImageSequence& images, std::span<const CsiSequence> csi,
                         const WindowSpec& spec);

std::vector<SyncedSample> window_samples(const ImageSequence& images, std::span<const CsiSequence> csi,
                                         const WindowSpec& spec);

/// Selects the CSI sequences for the given sensor ids, in that order.
std::vector<CsiSequence> select_sensors(const Dataset& dataset, std::span<const int> sensor_ids);

}  // namespace csi_inpaint
