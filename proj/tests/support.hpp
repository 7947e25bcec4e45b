#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "csi_inpaint/config.hpp"
#include "csi_inpaint/scene_sim.hpp"

namespace test_support {

namespace fs = std::filesystem;

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag = "csi") {
        std::random_device rd;
        path_ = fs::temp_directory_path() / (tag + "_" + std::to_string(rd()) + std::to_string(rd()));
        fs::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const fs::path& path() const { return path_; }
    fs::path operator/(const std::string& name) const { return path_ / name; }

private:
    fs::path path_;
};

/// 4x3 m room, one 32x32 camera, two sensors, one looping pedestrian, 6 s.
inline csi_inpaint::SceneConfig tiny_scene(std::uint64_t seed = 7) {
    using namespace csi_inpaint;
    SceneConfig s;
    s.room.width = 4.0;
    s.room.depth = 3.0;
    s.room.seed = seed;
    CameraPose cam;
    cam.position = {2.0, 0.0};
    cam.view_direction = {0.0, 1.0};
    cam.height = 32;
    cam.width = 32;
    s.room.cameras = {cam};
    s.room.sensors = {{1, {0.3, 0.3}}, {2, {3.7, 2.7}}};
    s.room.tx_position = {0.2, 2.8};
    s.channel.n_subcarriers = 16;
    s.channel.noise_std = 0.01;
    s.pedestrians = {elliptical_loop({2.0, 1.6}, {1.2, 0.6}, 4.0, Motion::counterclockwise_loop)};
    s.duration = 6.0;
    return s;
}

/// Small network and short windows matching tiny_scene.
inline csi_inpaint::PipelineConfig tiny_pipeline() {
    using namespace csi_inpaint;
    PipelineConfig c;
    c.windows = {4, 40, 4};
    c.model.image_height = 32;
    c.model.image_width = 32;
    c.model.patch_size = 8;
    c.model.embed_dim = 16;
    c.model.n_heads = 2;
    c.model.n_layers_img = 2;
    c.model.n_layers_csi = 1;
    c.model.attn_window = 2;
    c.model.reduced_img_dim = 4;
    c.model.reduced_csi_dim = 4;
    c.model.decoder_channels = {8, 8, 8};
    c.model.l_img = 4;
    c.model.l_csi = 40;
    c.model.csi_patch_len = 10;
    c.preprocess.pca_k = 4;
    c.training.epochs = 2;
    c.training.batch_size = 4;
    return c;
}

}  // namespace test_support
