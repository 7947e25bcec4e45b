#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "csi_inpaint/common.hpp"

namespace csi_inpaint {

using Rgb = std::array<float, 3>;

struct CameraPose {
    Vec2 position;
    Vec2 view_direction{0.0, 1.0};
    double field_of_view = 1.745329;  // radians
    int height = 64;
    int width = 64;
};

struct SensorPose {
    int sensor_id = 0;
    Vec2 position;
};

struct RoomConfig {
    double width = 6.0;
    double depth = 4.0;
    std::vector<CameraPose> cameras;
    std::vector<SensorPose> sensors;
    Vec2 tx_position;
    std::uint64_t seed = 0;

    /// Throws ConfigError describing the first violated invariant.
    void validate() const;
    bool contains(Vec2 p) const;
    const SensorPose& sensor(int sensor_id) const;
};

enum class Motion { clockwise_loop, counterclockwise_loop, straight_line };

struct Waypoint {
    double time = 0.0;
    Vec2 position;
};

/// Piecewise-linear path. Loop motions repeat with `loop_period`: the lap runs
/// through the waypoints and closes back to the first one at t = loop_period.
struct PedestrianTrajectory {
    int pedestrian_id = 0;
    Rgb color{0.8f, 0.1f, 0.1f};
    std::vector<Waypoint> waypoints;
    Motion motion = Motion::straight_line;
    double loop_period = 0.0;

    void validate(const RoomConfig& room) const;
    Vec2 position_at(double t) const;
};

/// Rectangular lap inset `margin` from the walls, walked at constant speed.
PedestrianTrajectory rectangular_loop(const RoomConfig& room, double margin, double period, Motion direction,
                                      int pedestrian_id = 0, Rgb color = {0.8f, 0.1f, 0.1f});

/// Elliptical lap sampled at `n_points` vertices.
PedestrianTrajectory elliptical_loop(Vec2 center, Vec2 radii, double period, Motion direction, double phase = 0.0,
                                     int n_points = 64, int pedestrian_id = 0, Rgb color = {0.8f, 0.1f, 0.1f});

/// One position per tick t = i / rate, i in [0, round(duration * rate)).
std::vector<Vec2> generate_trajectory(const PedestrianTrajectory& trajectory, double duration, double rate);

struct ChannelParams {
    int n_tx = 1;
    int n_rx = 1;
    int n_subcarriers = 64;
    std::vector<double> carrier_wavelengths;  // one per subcarrier; empty = derive from band
    double reflection_gain = 1.0;
    double noise_std = 0.0;
    double csi_rate = 100.0;
    double camera_rate = 10.0;
    double min_path_length = 0.1;
    double center_frequency = 5.18e9;
    double bandwidth = 80e6;

    void validate() const;
    /// carrier_wavelengths if given, else a linear frequency grid across the band.
    std::vector<double> wavelengths() const;
};

struct PedestrianState {
    Vec2 position;
    Rgb color;
};

struct RenderStyle {
    Rgb background{0.5f, 0.5f, 0.5f};
    double body_width = 0.5;
    double body_height = 1.7;
    double camera_height = 1.2;
    double near_plane = 0.1;
};

struct ImageFrame {
    double timestamp = 0.0;
    int height = 0;
    int width = 0;
    std::vector<float> pixels;  // HWC, RGB in [0,1]
};

struct CsiFrame {
    double timestamp = 0.0;
    int n_tx = 0;
    int n_rx = 0;
    int n_subcarriers = 0;
    std::vector<std::complex<float>> values;  // (tx, rx, subcarrier) row-major
};

/// Horizontal pixel extent [left, right) and vertical [top, bottom) of a
/// pedestrian as seen by a camera; empty when behind the camera or out of view.
struct ScreenRect {
    double left = 0, right = 0, top = 0, bottom = 0;
    double depth = 0;
    bool visible = false;
};

ScreenRect project_pedestrian(const CameraPose& camera, Vec2 position, const RenderStyle& style = {});

ImageFrame render_frame(const RoomConfig& room, std::size_t camera_index, std::span<const PedestrianState> pedestrians,
                        const RenderStyle& style = {});

/// Boolean footprint (H*W) of a single pedestrian, ignoring occlusion by others.
std::vector<std::uint8_t> pedestrian_footprint(const CameraPose& camera, Vec2 position, const RenderStyle& style = {});

CsiFrame synth_csi_frame(const RoomConfig& room, int sensor_id, std::span<const PedestrianState> pedestrians,
                         const ChannelParams& params, std::mt19937_64& rng);

struct SceneConfig {
    RoomConfig room;
    std::vector<PedestrianTrajectory> pedestrians;
    ChannelParams channel;
    RenderStyle style;
    double duration = 30.0;
};

struct DatasetManifest;

/// Writes image and CSI streams plus manifest.json under out_dir.
DatasetManifest generate_dataset(const SceneConfig& scene, const std::filesystem::path& out_dir);

std::vector<PedestrianState> pedestrian_states_at(std::span<const PedestrianTrajectory> pedestrians, double t);

/// Desk-scale office: 6x4 m room, one camera on the near wall, 4 sensors, one looping pedestrian.
SceneConfig default_scene(std::uint64_t seed = 0);

}  // namespace csi_inpaint
