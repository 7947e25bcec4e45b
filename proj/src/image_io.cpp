#include "csi_inpaint/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

#include <png.h>

#include "csi_inpaint/common.hpp"

namespace csi_inpaint {

void Canvas::set(int y, int x, float r, float g, float b) {
    if (y < 0 || x < 0 || y >= height || x >= width) return;
    float* p = &pixels[(static_cast<std::size_t>(y) * width + x) * 3];
    p[0] = r;
    p[1] = g;
    p[2] = b;
}

void Canvas::blit(std::span<const float> image, int h, int w, int top, int left) {
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const float* s = &image[(static_cast<std::size_t>(y) * w + x) * 3];
            set(top + y, left + x, s[0], s[1], s[2]);
        }
}

void write_png(const std::filesystem::path& path, const Canvas& canvas) {
    std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.c_str(), "wb"), &std::fclose);
    if (!fp) throw IoError("cannot open " + path.string() + " for writing");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw IoError("libpng initialization failed for " + path.string());
    }
    std::vector<png_byte> row(static_cast<std::size_t>(canvas.width) * 3);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("PNG encoding failed for " + path.string());
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(canvas.width), static_cast<png_uint_32>(canvas.height), 8,
                 PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < canvas.height; ++y) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            const float v = canvas.pixels[static_cast<std::size_t>(y) * row.size() + i];
            row[i] = static_cast<png_byte>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
        }
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

Canvas tile_grid(const std::vector<std::span<const float>>& tiles, int tile_h, int tile_w, int columns, int gap) {
    if (tiles.empty() || columns < 1) return Canvas(1, 1);
    const int rows = static_cast<int>((tiles.size() + columns - 1) / columns);
    Canvas c(rows * tile_h + (rows + 1) * gap, columns * tile_w + (columns + 1) * gap);
    for (std::size_t i = 0; i < tiles.size(); ++i) {
        const int r = static_cast<int>(i) / columns, col = static_cast<int>(i) % columns;
        c.blit(tiles[i], tile_h, tile_w, gap + r * (tile_h + gap), gap + col * (tile_w + gap));
    }
    return c;
}

namespace {

void draw_line(Canvas& c, double x0, double y0, double x1, double y1, float r, float g, float b) {
    const int steps = static_cast<int>(std::max(std::abs(x1 - x0), std::abs(y1 - y0))) + 1;
    for (int i = 0; i <= steps; ++i) {
        const double t = static_cast<double>(i) / steps;
        c.set(static_cast<int>(std::lround(y0 + t * (y1 - y0))), static_cast<int>(std::lround(x0 + t * (x1 - x0))), r, g, b);
    }
}

constexpr float kPalette[][3] = {{0.12f, 0.47f, 0.71f}, {0.84f, 0.15f, 0.16f}, {0.17f, 0.63f, 0.17f}, {0.58f, 0.40f, 0.74f}};

}  // namespace

Canvas line_plot(const std::vector<Series>& series, int height, int width) {
    Canvas c(height, width);
    const int m = 24;
    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (const auto& s : series)
        for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
            xmin = std::min(xmin, s.x[i]);
            xmax = std::max(xmax, s.x[i]);
            ymin = std::min(ymin, s.y[i]);
            ymax = std::max(ymax, s.y[i]);
        }
    if (xmin > xmax) return c;
    if (xmax == xmin) xmax = xmin + 1;
    if (ymax == ymin) ymax = ymin + 1;
    const auto px = [&](double x) { return m + (x - xmin) / (xmax - xmin) * (width - 2 * m); };
    const auto py = [&](double y) { return height - m - (y - ymin) / (ymax - ymin) * (height - 2 * m); };
    draw_line(c, m, height - m, width - m, height - m, 0, 0, 0);
    draw_line(c, m, m, m, height - m, 0, 0, 0);
    for (std::size_t k = 0; k < series.size(); ++k) {
        const auto* col = kPalette[k % 4];
        const auto& s = series[k];
        for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
            if (i > 0) draw_line(c, px(s.x[i - 1]), py(s.y[i - 1]), px(s.x[i]), py(s.y[i]), col[0], col[1], col[2]);
            for (int dy = -2; dy <= 2; ++dy)
                for (int dx = -2; dx <= 2; ++dx)
                    c.set(static_cast<int>(py(s.y[i])) + dy, static_cast<int>(px(s.x[i])) + dx, col[0], col[1], col[2]);
        }
    }
    return c;
}

Canvas bar_chart(std::span<const double> values, int height, int width) {
    Canvas c(height, width);
    if (values.empty()) return c;
    const double vmax = std::max(1e-12, *std::max_element(values.begin(), values.end()));
    const int m = 16;
    const int slot = (width - 2 * m) / static_cast<int>(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        const int h = static_cast<int>(std::max(0.0, values[i]) / vmax * (height - 2 * m));
        const auto* col = kPalette[i % 4];
        for (int y = height - m - h; y < height - m; ++y)
            for (int x = m + static_cast<int>(i) * slot + slot / 6; x < m + static_cast<int>(i + 1) * slot - slot / 6; ++x)
                c.set(y, x, col[0], col[1], col[2]);
    }
    return c;
}

}  // namespace csi_inpaint
