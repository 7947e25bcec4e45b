#include "csi_inpaint/masking.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "csi_inpaint/common.hpp"
#include "csi_inpaint/dataset_io.hpp"

namespace csi_inpaint {

void MaskSpec::validate() const {
    if (!(coverage >= 0.0 && coverage <= 1.0)) throw ConfigError("mask coverage must lie in [0, 1]");
    if (!(fill_value >= 0.0f && fill_value <= 1.0f)) throw ConfigError("mask fill_value must lie in [0, 1]");
}

namespace {

Mask rectangle_mask(double coverage, int height, int width, std::mt19937_64& rng) {
    Mask m(static_cast<std::size_t>(height) * width, 0);
    const double target = coverage * height * width;
    if (target < 0.5) return m;
    // Best h x w box with the image's aspect ratio.
    int best_h = 0, best_w = 0;
    double best_err = 1e300;
    for (int h = 1; h <= height; ++h) {
        const int w = std::clamp(static_cast<int>(std::lround(target / h)), 1, width);
        const double err = std::abs(h * static_cast<double>(w) - target) +
                           1e-6 * std::abs(h / static_cast<double>(height) - w / static_cast<double>(width));
        if (err < best_err) {
            best_err = err;
            best_h = h;
            best_w = w;
        }
    }
    const int top = std::uniform_int_distribution<int>(0, height - best_h)(rng);
    const int left = std::uniform_int_distribution<int>(0, width - best_w)(rng);
    for (int y = top; y < top + best_h; ++y)
        for (int x = left; x < left + best_w; ++x) m[static_cast<std::size_t>(y) * width + x] = 1;
    return m;
}

Mask random_block_mask(double coverage, int height, int width, std::mt19937_64& rng) {
    Mask m(static_cast<std::size_t>(height) * width, 0);
    const auto target = static_cast<std::size_t>(std::llround(coverage * height * width));
    const int block = std::max(1, std::min(height, width) / 8);
    const int rows = (height + block - 1) / block;
    const int cols = (width + block - 1) / block;
    std::vector<int> order(static_cast<std::size_t>(rows) * cols);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::size_t count = 0;
    for (int cell : order) {
        const int by = (cell / cols) * block;
        const int bx = (cell % cols) * block;
        for (int y = by; y < std::min(height, by + block); ++y)
            for (int x = bx; x < std::min(width, bx + block); ++x) {
                if (count == target) return m;
                m[static_cast<std::size_t>(y) * width + x] = 1;
                ++count;
            }
    }
    return m;
}

}  // namespace

Mask build_mask(const MaskSpec& spec, int height, int width) {
    spec.validate();
    if (height < 1 || width < 1) throw ConfigError("mask shape must be at least 1x1");
    std::mt19937_64 rng(derive_seed(spec.seed, "mask"));
    switch (spec.kind) {
        case MaskKind::full:
            return Mask(static_cast<std::size_t>(height) * width, 1);
        case MaskKind::rectangle:
            return rectangle_mask(spec.coverage, height, width, rng);
        case MaskKind::random_blocks:
            return random_block_mask(spec.coverage, height, width, rng);
    }
    throw ConfigError("unknown mask kind");
}

std::vector<float> apply_mask(std::span<const float> frames, std::span<const std::uint8_t> mask, int height, int width,
                              int channels, float fill_value) {
    const std::size_t plane = static_cast<std::size_t>(height) * width;
    if (mask.size() != plane) throw ConfigError("mask shape does not match frame spatial shape");
    const std::size_t frame_size = plane * static_cast<std::size_t>(channels);
    if (frame_size == 0 || frames.size() % frame_size != 0) throw ConfigError("frame buffer is not a whole number of frames");
    std::vector<float> out(frames.begin(), frames.end());
    for (std::size_t f = 0; f < frames.size(); f += frame_size)
        for (std::size_t p = 0; p < plane; ++p)
            if (mask[p])
                for (int c = 0; c < channels; ++c) out[f + p * channels + static_cast<std::size_t>(c)] = fill_value;
    return out;
}

double mask_coverage(std::span<const std::uint8_t> mask) {
    if (mask.empty()) return 0.0;
    const auto n = std::count_if(mask.begin(), mask.end(), [](std::uint8_t v) { return v != 0; });
    return static_cast<double>(n) / static_cast<double>(mask.size());
}

void mask_sample(SyncedSample& sample, const MaskSpec& spec, std::uint64_t sample_index) {
    const std::size_t plane = static_cast<std::size_t>(sample.height) * sample.width;
    const std::size_t frame_size = plane * 3;
    sample.mask_window.assign(plane * static_cast<std::size_t>(sample.l_img), 0);
    sample.defective_window.resize(sample.gt_window.size());
    Mask mask;
    for (int f = 0; f < sample.l_img; ++f) {
        if (f == 0 || spec.per_frame) {
            MaskSpec s = spec;
            s.seed = spec.per_frame ? derive_seed(spec.seed, "frame", sample_index * 4096 + static_cast<std::uint64_t>(f))
                                    : derive_seed(spec.seed, "window", sample_index);
            mask = build_mask(s, sample.height, sample.width);
        }
        const std::span<const float> gt(sample.gt_window.data() + f * frame_size, frame_size);
        const auto defective = apply_mask(gt, mask, sample.height, sample.width, 3, spec.fill_value);
        std::copy(defective.begin(), defective.end(), sample.defective_window.begin() + static_cast<std::ptrdiff_t>(f * frame_size));
        std::copy(mask.begin(), mask.end(), sample.mask_window.begin() + static_cast<std::ptrdiff_t>(f * plane));
    }
}

}  // namespace csi_inpaint
