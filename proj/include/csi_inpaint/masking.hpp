#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace csi_inpaint {

enum class MaskKind { rectangle, full, random_blocks };

struct MaskSpec {
    MaskKind kind = MaskKind::rectangle;
    double coverage = 0.9;
    float fill_value = 0.0f;
    std::uint64_t seed = 0;
    bool per_frame = false;  // fresh mask for every frame of a window

    void validate() const;
};

using Mask = std::vector<std::uint8_t>;  // (H, W), 1 = occluded

/// Occluded fraction lands within 2% of `coverage` (exact for full, rectangle
/// is snapped to the closest h x w box). Deterministic per seed.
Mask build_mask(const MaskSpec& spec, int height, int width);

/// Sets occluded pixels of every (H, W, channels) frame to fill_value.
std::vector<float> apply_mask(std::span<const float> frames, std::span<const std::uint8_t> mask, int height, int width,
                              int channels, float fill_value);

double mask_coverage(std::span<const std::uint8_t> mask);

struct SyncedSample;

/// Fills sample.defective_window and sample.mask_window. `sample_index` feeds
/// the seed so each window gets its own occluder.
void mask_sample(SyncedSample& sample, const MaskSpec& spec, std::uint64_t sample_index);

}  // namespace csi_inpaint
