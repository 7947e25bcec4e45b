#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "csi_inpaint/common.hpp"
#include "csi_inpaint/metrics.hpp"

using namespace csi_inpaint;

namespace {

double psnr_oracle(const std::vector<float>& a, const std::vector<float>& b) {
    long double se = 0;
    for (std::size_t i = 0; i < a.size(); ++i) se += (static_cast<long double>(a[i]) - b[i]) * (static_cast<long double>(a[i]) - b[i]);
    const long double mse = se / a.size();
    return mse == 0 ? 100.0 : static_cast<double>(10.0L * std::log10(1.0L / mse));
}

// Every 7x7 window summed explicitly.
double ssim_oracle(const std::vector<float>& a, const std::vector<float>& b, int h, int w, int ch) {
    const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
    const int win = 7;
    double total = 0;
    for (int c = 0; c < ch; ++c) {
        double sum = 0;
        int count = 0;
        for (int y = 0; y + win <= h; ++y)
            for (int x = 0; x + win <= w; ++x) {
                double ma = 0, mb = 0;
                for (int dy = 0; dy < win; ++dy)
                    for (int dx = 0; dx < win; ++dx) {
                        const std::size_t i = (static_cast<std::size_t>(y + dy) * w + (x + dx)) * ch + c;
                        ma += a[i];
                        mb += b[i];
                    }
                ma /= win * win;
                mb /= win * win;
                double va = 0, vb = 0, cov = 0;
                for (int dy = 0; dy < win; ++dy)
                    for (int dx = 0; dx < win; ++dx) {
                        const std::size_t i = (static_cast<std::size_t>(y + dy) * w + (x + dx)) * ch + c;
                        va += (a[i] - ma) * (a[i] - ma);
                        vb += (b[i] - mb) * (b[i] - mb);
                        cov += (a[i] - ma) * (b[i] - mb);
                    }
                va /= win * win;
                vb /= win * win;
                cov /= win * win;
                sum += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
                ++count;
            }
        total += sum / count;
    }
    return total / ch;
}

std::vector<float> random_image(std::mt19937_64& rng, std::size_t n) {
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    std::vector<float> v(n);
    for (auto& x : v) x = u(rng);
    return v;
}

}  // namespace

TEST_CASE("psnr") {
    std::vector<float> zeros(48, 0.0f), ones(48, 1.0f);
    CHECK(psnr(zeros, zeros) == kPsnrCap);
    CHECK(psnr(zeros, ones) == doctest::Approx(0.0));
    std::mt19937_64 rng(1);
    for (int i = 0; i < 20; ++i) {
        const auto a = random_image(rng, 8 * 8 * 3), b = random_image(rng, 8 * 8 * 3);
        CHECK(std::abs(psnr(a, b) - psnr_oracle(a, b)) < 1e-9);
        CHECK(psnr(a, b) == psnr(b, a));
    }
    CHECK_THROWS_AS(psnr(zeros, std::vector<float>(3, 0.0f)), ConfigError);
}

TEST_CASE("psnr decreases with noise") {
    std::mt19937_64 rng(9);
    const auto img = random_image(rng, 16 * 16 * 3);
    double previous = 1e9;
    for (double sd : {0.01, 0.05, 0.1, 0.2}) {
        std::vector<double> trials;
        for (int t = 0; t < 20; ++t) {
            std::normal_distribution<float> n(0.0f, static_cast<float>(sd));
            auto noisy = img;
            for (auto& v : noisy) v += n(rng);
            trials.push_back(psnr(img, noisy));
        }
        std::nth_element(trials.begin(), trials.begin() + 10, trials.end());
        CHECK(trials[10] <= previous);
        previous = trials[10];
    }
}

TEST_CASE("ssim") {
    std::mt19937_64 rng(2);
    SUBCASE("identity") {
        for (int i = 0; i < 10; ++i) {
            const auto a = random_image(rng, 16 * 16 * 3);
            CHECK(ssim(a, a, 16, 16, 3) == 1.0);
        }
        const std::vector<float> flat(16 * 16 * 3, 0.3f);
        CHECK(ssim(flat, flat, 16, 16, 3) == 1.0);
    }
    SUBCASE("against the brute-force oracle") {
        for (int i = 0; i < 20; ++i) {
            const auto a = random_image(rng, 16 * 16 * 3), b = random_image(rng, 16 * 16 * 3);
            CHECK(std::abs(ssim(a, b, 16, 16, 3) - ssim_oracle(a, b, 16, 16, 3)) < 1e-6);
            CHECK(std::abs(ssim(a, b, 16, 16, 3) - ssim(b, a, 16, 16, 3)) < 1e-12);
        }
        const auto a = random_image(rng, 9 * 20), b = random_image(rng, 9 * 20);
        CHECK(std::abs(ssim(a, b, 9, 20, 1) - ssim_oracle(a, b, 9, 20, 1)) < 1e-6);
    }
    SUBCASE("inverted binary image is anti-correlated") {
        std::vector<float> a(16 * 16), inv(16 * 16);
        for (std::size_t i = 0; i < a.size(); ++i) {
            a[i] = static_cast<float>(rng() % 2);
            inv[i] = 1.0f - a[i];
        }
        CHECK(ssim(a, inv, 16, 16, 1) < 0.0);
    }
    SUBCASE("errors") {
        const std::vector<float> small(6 * 6 * 3, 0.0f);
        CHECK_THROWS_AS(ssim(small, small, 6, 6, 3), ConfigError);
        CHECK_THROWS_AS(ssim(small, std::vector<float>(5, 0.0f), 6, 6, 3), ConfigError);
    }
}

TEST_CASE("aggregation") {
    auto r = aggregate_metrics({30.0, 40.0}, {0.5, 0.7});
    CHECK(r.mean_psnr == 35.0);
    CHECK(r.mean_ssim == doctest::Approx(0.6));
    r = aggregate_metrics({27.5}, {0.9});
    CHECK(r.mean_psnr == 27.5);
    r = aggregate_metrics({20.0, kPsnrCap}, {1.0, 1.0});
    CHECK(r.mean_psnr == 60.0);
    CHECK_THROWS_AS(aggregate_metrics({}, {}), ConfigError);

    const auto j = r.to_json();
    const auto back = MetricsRecord::from_json(j);
    CHECK(back.psnr_values == r.psnr_values);
    CHECK(back.mean_psnr == r.mean_psnr);
    CHECK(j.at("ssim_params").at("window") == 7);
}
