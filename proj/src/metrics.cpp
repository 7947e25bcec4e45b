#include "csi_inpaint/metrics.hpp"

#include <cmath>
#include <numeric>

#include "csi_inpaint/common.hpp"

namespace csi_inpaint {

double psnr(std::span<const float> a, std::span<const float> b) {
    if (a.size() != b.size()) throw ConfigError("psnr inputs differ in shape");
    if (a.empty()) throw ConfigError("psnr inputs are empty");
    double se = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        se += d * d;
    }
    const double mse = se / static_cast<double>(a.size());
    if (mse == 0.0) return kPsnrCap;
    return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

double ssim(std::span<const float> a, std::span<const float> b, int height, int width, int channels,
            const SsimParams& p) {
    if (a.size() != b.size()) throw ConfigError("ssim inputs differ in shape");
    if (a.size() != static_cast<std::size_t>(height) * width * channels) throw ConfigError("ssim buffer does not match H x W x C");
    if (height < p.window || width < p.window)
        throw ConfigError("ssim needs images of at least " + std::to_string(p.window) + "x" + std::to_string(p.window));
    const double c1 = (p.k1 * p.data_range) * (p.k1 * p.data_range);
    const double c2 = (p.k2 * p.data_range) * (p.k2 * p.data_range);
    const int w = p.window;
    const double n = static_cast<double>(w) * w;

    // Summed-area tables of x, y, x^2, y^2, xy for one channel.
    const std::size_t stride = static_cast<std::size_t>(width) + 1;
    std::vector<double> sx((height + 1) * stride), sy(sx.size()), sxx(sx.size()), syy(sx.size()), sxy(sx.size());
    const auto box = [&](const std::vector<double>& t, int y, int x) {
        return t[(y + w) * stride + x + w] - t[y * stride + x + w] - t[(y + w) * stride + x] + t[y * stride + x];
    };

    double total = 0.0;
    for (int c = 0; c < channels; ++c) {
        for (int y = 0; y < height; ++y)
            for (int x = 0; x < width; ++x) {
                const std::size_t src = (static_cast<std::size_t>(y) * width + x) * channels + c;
                const double u = a[src], v = b[src];
                const std::size_t i = (y + 1) * stride + x + 1;
                const std::size_t up = y * stride + x + 1, left = (y + 1) * stride + x, diag = y * stride + x;
                sx[i] = u + sx[up] + sx[left] - sx[diag];
                sy[i] = v + sy[up] + sy[left] - sy[diag];
                sxx[i] = u * u + sxx[up] + sxx[left] - sxx[diag];
                syy[i] = v * v + syy[up] + syy[left] - syy[diag];
                sxy[i] = u * v + sxy[up] + sxy[left] - sxy[diag];
            }
        double channel_sum = 0.0;
        for (int y = 0; y + w <= height; ++y)
            for (int x = 0; x + w <= width; ++x) {
                const double mx = box(sx, y, x) / n, my = box(sy, y, x) / n;
                const double vx = box(sxx, y, x) / n - mx * mx;
                const double vy = box(syy, y, x) / n - my * my;
                const double cov = box(sxy, y, x) / n - mx * my;
                channel_sum += ((2 * mx * my + c1) * (2 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
            }
        total += channel_sum / (static_cast<double>(height - w + 1) * (width - w + 1));
    }
    return total / channels;
}

nlohmann::json MetricsRecord::to_json() const {
    return {{"run_id", run_id},
            {"mode", mode},
            {"config", config_summary},
            {"mean_psnr", mean_psnr},
            {"mean_ssim", mean_ssim},
            {"psnr", psnr_values},
            {"ssim", ssim_values},
            {"ssim_params", {{"window", ssim_params.window}, {"k1", ssim_params.k1}, {"k2", ssim_params.k2}}},
            {"psnr_cap_db", kPsnrCap}};
}

MetricsRecord MetricsRecord::from_json(const nlohmann::json& j) {
    MetricsRecord r;
    r.run_id = j.at("run_id").get<std::string>();
    r.mode = j.at("mode").get<std::string>();
    r.config_summary = j.value("config", nlohmann::json::object());
    r.mean_psnr = j.at("mean_psnr").get<double>();
    r.mean_ssim = j.at("mean_ssim").get<double>();
    r.psnr_values = j.at("psnr").get<std::vector<double>>();
    r.ssim_values = j.at("ssim").get<std::vector<double>>();
    if (j.contains("ssim_params")) {
        const auto& sp = j["ssim_params"];
        r.ssim_params.window = sp.at("window").get<int>();
        r.ssim_params.k1 = sp.at("k1").get<double>();
        r.ssim_params.k2 = sp.at("k2").get<double>();
    }
    return r;
}

MetricsRecord aggregate_metrics(std::vector<double> psnr_values, std::vector<double> ssim_values, std::string run_id,
                                std::string mode) {
    if (psnr_values.empty() || ssim_values.empty()) throw ConfigError("cannot aggregate an empty metrics list");
    if (psnr_values.size() != ssim_values.size()) throw ConfigError("psnr and ssim lists differ in length");
    MetricsRecord r;
    r.run_id = std::move(run_id);
    r.mode = std::move(mode);
    r.mean_psnr = std::accumulate(psnr_values.begin(), psnr_values.end(), 0.0) / static_cast<double>(psnr_values.size());
    r.mean_ssim = std::accumulate(ssim_values.begin(), ssim_values.end(), 0.0) / static_cast<double>(ssim_values.size());
    r.psnr_values = std::move(psnr_values);
    r.ssim_values = std::move(ssim_values);
    return r;
}

}  // namespace csi_inpaint
