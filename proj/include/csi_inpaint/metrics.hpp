#pragma once

#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace csi_inpaint {

inline constexpr double kPsnrCap = 100.0;

/// 10 log10(1 / MSE) for data range 1; identical inputs give kPsnrCap.
double psnr(std::span<const float> a, std::span<const float> b);

struct SsimParams {
    int window = 7;
    double k1 = 0.01;
    double k2 = 0.03;
    double data_range = 1.0;
};

/// Mean SSIM over every valid (fully inside) window x window uniform window,
/// computed per channel on HWC images and averaged across channels. Local
/// statistics use population (1/N) moments.
double ssim(std::span<const float> a, std::span<const float> b, int height, int width, int channels,
            const SsimParams& params = {});

struct MetricsRecord {
    std::string run_id;
    std::string mode;
    nlohmann::json config_summary = nlohmann::json::object();
    double mean_psnr = 0.0;
    double mean_ssim = 0.0;
    std::vector<double> psnr_values;
    std::vector<double> ssim_values;
    SsimParams ssim_params;

    nlohmann::json to_json() const;
    static MetricsRecord from_json(const nlohmann::json& j);
};

/// Arithmetic means of the per-sample lists (capped PSNR values count as 100 dB).
MetricsRecord aggregate_metrics(std::vector<double> psnr_values, std::vector<double> ssim_values,
                                std::string run_id = {}, std::string mode = {});

}  // namespace csi_inpaint
