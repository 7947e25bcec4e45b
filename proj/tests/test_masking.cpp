#include <doctest.h>

#include <random>

#include "csi_inpaint/common.hpp"
#include "csi_inpaint/dataset_io.hpp"
#include "csi_inpaint/masking.hpp"

using namespace csi_inpaint;

TEST_CASE("mask shapes and coverage") {
    MaskSpec spec;
    spec.kind = MaskKind::full;
    auto m = build_mask(spec, 64, 64);
    CHECK(std::count(m.begin(), m.end(), 1) == 4096);

    spec.kind = MaskKind::rectangle;
    spec.coverage = 0.0;
    m = build_mask(spec, 64, 64);
    CHECK(std::count(m.begin(), m.end(), 1) == 0);

    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        spec.seed = seed;
        spec.coverage = 0.9;
        spec.kind = MaskKind::rectangle;
        m = build_mask(spec, 64, 64);
        const auto n = std::count(m.begin(), m.end(), 1);
        CHECK(n >= 3604);
        CHECK(n <= 3768);
        // One solid rectangle: the bounding box holds exactly the occluded count.
        int top = 64, bottom = -1, left = 64, right = -1;
        for (int y = 0; y < 64; ++y)
            for (int x = 0; x < 64; ++x)
                if (m[static_cast<std::size_t>(y * 64 + x)]) {
                    top = std::min(top, y);
                    bottom = std::max(bottom, y);
                    left = std::min(left, x);
                    right = std::max(right, x);
                }
        CHECK((bottom - top + 1) * (right - left + 1) == n);

        spec.kind = MaskKind::random_blocks;
        for (double cov : {0.1, 0.5, 0.9}) {
            spec.coverage = cov;
            CHECK(mask_coverage(build_mask(spec, 64, 64)) == doctest::Approx(cov).epsilon(0.02 / cov));
            CHECK(std::abs(mask_coverage(build_mask(spec, 17, 23)) - cov) <= 0.02);
        }
    }
}

TEST_CASE("masks are reproducible per seed") {
    MaskSpec a;
    a.seed = 5;
    a.coverage = 0.4;
    MaskSpec b = a;
    CHECK(build_mask(a, 32, 32) == build_mask(b, 32, 32));
    b.seed = 6;
    a.kind = b.kind = MaskKind::random_blocks;
    CHECK(build_mask(a, 32, 32) != build_mask(b, 32, 32));
}

TEST_CASE("invalid specs") {
    MaskSpec s;
    s.coverage = 1.5;
    CHECK_THROWS_AS(build_mask(s, 8, 8), ConfigError);
    s.coverage = 0.5;
    s.fill_value = 2.0f;
    CHECK_THROWS_AS(build_mask(s, 8, 8), ConfigError);
    s.fill_value = 0.0f;
    CHECK_THROWS_AS(build_mask(s, 0, 8), ConfigError);
}

TEST_CASE("apply_mask") {
    std::mt19937 rng(2);
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    const int h = 6, w = 5;
    std::vector<float> frames(2 * h * w * 3);
    for (auto& v : frames) v = u(rng);
    Mask none(h * w, 0), all(h * w, 1), some(h * w, 0);
    for (std::size_t i = 0; i < some.size(); ++i) some[i] = rng() % 2;

    CHECK(apply_mask(frames, none, h, w, 3, 0.0f) == frames);
    for (float v : apply_mask(frames, all, h, w, 3, 0.0f)) CHECK(v == 0.0f);
    const auto out = apply_mask(frames, some, h, w, 3, 0.25f);
    for (std::size_t f = 0; f < 2; ++f)
        for (std::size_t p = 0; p < some.size(); ++p)
            for (std::size_t c = 0; c < 3; ++c) {
                const std::size_t i = (f * some.size() + p) * 3 + c;
                CHECK(out[i] == (some[p] ? 0.25f : frames[i]));
            }
    CHECK(apply_mask(out, some, h, w, 3, 0.25f) == out);
    CHECK_THROWS_AS(apply_mask(frames, Mask(7, 0), h, w, 3, 0.0f), ConfigError);
}

TEST_CASE("window masking") {
    SyncedSample s;
    s.l_img = 3;
    s.height = 8;
    s.width = 8;
    s.gt_window.assign(3 * 8 * 8 * 3, 0.0f);
    for (std::size_t i = 0; i < s.gt_window.size(); ++i) s.gt_window[i] = static_cast<float>(i % 97) / 97.0f;

    MaskSpec spec;
    spec.coverage = 0.5;
    spec.kind = MaskKind::random_blocks;
    spec.seed = 4;
    mask_sample(s, spec, 0);
    const std::size_t plane = 64;
    for (int f = 1; f < 3; ++f)
        CHECK(std::equal(s.mask_window.begin(), s.mask_window.begin() + plane, s.mask_window.begin() + f * plane));
    SyncedSample t = s;
    mask_sample(t, spec, 1);
    CHECK(t.mask_window != s.mask_window);

    spec.per_frame = true;
    mask_sample(s, spec, 0);
    CHECK(!std::equal(s.mask_window.begin(), s.mask_window.begin() + plane, s.mask_window.begin() + plane));

    spec.kind = MaskKind::full;
    mask_sample(s, spec, 0);
    for (float v : s.defective_window) CHECK(v == 0.0f);
}
