#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace csi_inpaint {

/// RGB float canvas, HWC in [0,1].
struct Canvas {
    int height = 0;
    int width = 0;
    std::vector<float> pixels;

    Canvas() = default;
    Canvas(int h, int w, float value = 1.0f) : height(h), width(w), pixels(static_cast<std::size_t>(h) * w * 3, value) {}

    void set(int y, int x, float r, float g, float b);
    void blit(std::span<const float> image, int h, int w, int top, int left);
};

void write_png(const std::filesystem::path& path, const Canvas& canvas);

/// Rows of equally sized HWC tiles, `columns` per row, separated by `gap` white pixels.
Canvas tile_grid(const std::vector<std::span<const float>>& tiles, int tile_h, int tile_w, int columns, int gap = 2);

struct Series {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
};

/// Axes-and-polyline chart with point markers; axis limits fit the data.
Canvas line_plot(const std::vector<Series>& series, int height = 240, int width = 360);

/// One bar per value, normalized to the largest value.
Canvas bar_chart(std::span<const double> values, int height = 240, int width = 360);

}  // namespace csi_inpaint
