#include "torch_doctest.hpp"

#include <cmath>
#include <fstream>
#include <vector>

#include <torch/torch.h>

#include "csi_inpaint/checkpoint.hpp"
#include "csi_inpaint/common.hpp"
#include "csi_inpaint/metrics.hpp"
#include "csi_inpaint/model.hpp"
#include "csi_inpaint/train.hpp"
#include "support.hpp"

using namespace csi_inpaint;
using torch::indexing::Slice;

namespace {

ModelConfig tiny_model() {
    auto c = test_support::tiny_pipeline().model;
    c.n_sensors = 2;
    c.csi_feature_dim = 4;
    return c;
}

/// 16x16 frames, 2x2 patch grid, two frames per window.
ModelConfig micro_model() {
    ModelConfig c;
    c.image_height = 16;
    c.image_width = 16;
    c.patch_size = 8;
    c.embed_dim = 8;
    c.n_heads = 2;
    c.n_layers_img = 2;
    c.n_layers_csi = 1;
    c.attn_window = 2;
    c.csi_feature_dim = 3;
    c.n_sensors = 2;
    c.l_img = 2;
    c.l_csi = 20;
    c.csi_patch_len = 10;
    c.reduced_img_dim = 2;
    c.reduced_csi_dim = 2;
    c.decoder_channels = {4, 4, 4};
    return c;
}

TensorSet random_set(const ModelConfig& c, int n, std::uint64_t seed) {
    torch::manual_seed(seed);
    TensorSet t;
    t.gt = torch::rand({n, c.l_img, c.image_height, c.image_width, 3});
    t.mask = (torch::rand({n, c.l_img, c.image_height, c.image_width}) < 0.5).to(torch::kFloat32);
    t.defective = t.gt * (1 - t.mask.unsqueeze(-1));
    t.csi = torch::randn({n, c.n_sensors, c.l_csi, c.csi_feature_dim});
    return t;
}

ModelInput all_inputs(const TensorSet& t) { return t.input(torch::arange(t.size())); }

}  // namespace

TEST_CASE("token counts") {
    torch::NoGradGuard guard;
    const auto c = tiny_model();
    auto enc = PatchEncoder(c);
    const auto t = random_set(c, 2, 1);
    const auto tokens = enc(t.defective, t.mask);
    CHECK(tokens.sizes() == torch::IntArrayRef({2, c.l_img * 16, c.embed_dim}));

    const auto seg = csi_segment(t.csi, c.csi_patch_len);
    CHECK(seg.sizes() == torch::IntArrayRef({2, 2 * 4, 10 * 4}));
    for (int s = 0; s < 2; ++s)
        for (int j = 0; j < 4; ++j) {
            const auto expect = t.csi.index({1, s, Slice(j * 10, (j + 1) * 10)}).reshape({-1});
            CHECK(torch::equal(seg.index({1, s * 4 + j}), expect));
        }
    CHECK_THROWS_AS(csi_segment(torch::zeros({1, 2, 45, 4}), 10), ConfigError);
}

TEST_CASE("csi encoder is permutation equivariant") {
    torch::NoGradGuard guard;
    torch::manual_seed(3);
    const auto c = tiny_model();
    auto enc = CsiEncoder(c);
    const auto tokens = torch::randn({2, 8, c.csi_token_dim()});
    const auto perm = torch::randperm(8, torch::kLong);
    const auto a = enc(tokens).index_select(1, perm);
    const auto b = enc(tokens.index_select(1, perm));
    CHECK(torch::allclose(a, b, 1e-5, 1e-6));
}

TEST_CASE("window attention stays inside its window") {
    torch::NoGradGuard guard;
    torch::manual_seed(5);
    const auto c = tiny_model();  // 4x4 grid, 2x2 windows
    auto enc = ImageEncoder(c);
    const auto tokens = torch::randn({1, c.l_img * 16, c.embed_dim});
    auto bumped = tokens.clone();
    bumped.index_put_({0, 0}, bumped.index({0, 0}) + 1.0);

    const auto a = enc->encode_blocks(tokens, 1), b = enc->encode_blocks(bumped, 1);
    const auto diff = (a - b).abs().amax(-1);  // (L, 4, 4)
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x) {
            const bool inside = y < 2 && x < 2;
            CHECK((diff.index({0, y, x}).item<float>() > 0) == inside);
        }
    for (int f = 1; f < c.l_img; ++f) CHECK(diff.index({f}).max().item<float>() == 0.0f);

    // The shifted block carries information across the window border.
    const auto d2 = (enc->encode_blocks(tokens, 2) - enc->encode_blocks(bumped, 2)).abs().amax(-1);
    CHECK(d2.index({0, 2, 2}).item<float>() > 0);
}

TEST_CASE("shifted window mask") {
    const auto m = shifted_window_mask(4, 4, 2, 1);
    CHECK(m.sizes() == torch::IntArrayRef({4, 4, 4}));
    CHECK(m.index({0}).sum().item<int64_t>() == 0);
    CHECK(m.index({3}).sum().item<int64_t>() == 12);
    CHECK(m.index({1}).sum().item<int64_t>() == 8);

    const auto x = torch::arange(2 * 4 * 4 * 3, torch::kFloat32).view({2, 4, 4, 3});
    CHECK(torch::equal(window_reverse(window_partition(x, 2), 2, 4, 4), x));
}

TEST_CASE("patch merging and aggregator shapes") {
    torch::NoGradGuard guard;
    const auto c = tiny_model();
    auto merge = PatchMerging(c.embed_dim);
    CHECK(merge(torch::randn({3, 4, 4, c.embed_dim})).sizes() == torch::IntArrayRef({3, 2, 2, 2 * c.embed_dim}));

    auto agg = Aggregator(c);
    const auto t = random_set(c, 2, 2);
    const auto img = torch::randn({2 * c.l_img, 2, 2, 2 * c.embed_dim});
    const auto csi = torch::randn({2, c.n_sensors * c.csi_tokens_per_sensor(), c.embed_dim});
    const auto fused = agg(img, csi, t.defective, t.mask);
    CHECK(fused.sizes() == torch::IntArrayRef({2 * c.l_img, c.fused_channels(), 4, 4}));
    CHECK(c.fused_channels() == 4 + 4 + 4);

    // The tail channels are the block-averaged defective frame and mask.
    const auto pooled = fused.index({0, Slice(8, 12)});
    const auto raw0 = torch::cat({t.defective.index({0, 0}), t.mask.index({0, 0}).unsqueeze(-1)}, -1);
    CHECK(std::abs(pooled.index({0, 0, 0}).item<float>() - raw0.index({Slice(0, 8), Slice(0, 8), 0}).mean().item<float>()) < 1e-6);
    CHECK(std::abs(pooled.index({3, 1, 2}).item<float>() - raw0.index({Slice(8, 16), Slice(16, 24), 3}).mean().item<float>()) < 1e-6);

    // A CSI token only reaches the CSI channels of the frame it overlaps.
    auto bumped = csi.clone();
    bumped.index_put_({1, 4 + 2}, bumped.index({1, 4 + 2}) + 1.0);  // sample 1, sensor 2, token 2
    const auto diff = (agg(img, bumped, t.defective, t.mask) - fused).abs().amax({2, 3});  // (B*L, C)
    for (int n = 0; n < 2 * c.l_img; ++n) {
        const bool hit = n == c.l_img + 2;
        CHECK((diff.index({n, Slice(4, 8)}).max().item<float>() > 0) == hit);
        CHECK(diff.index({n, Slice(0, 4)}).max().item<float>() == 0.0f);
        CHECK(diff.index({n, Slice(8, 12)}).max().item<float>() == 0.0f);
    }
}

TEST_CASE("decoder passthrough and output range") {
    torch::NoGradGuard guard;
    torch::manual_seed(8);
    const auto c = tiny_model();
    auto dec = Decoder(c);
    const auto fused = torch::randn({3, c.fused_channels(), 4, 4});
    const auto raw = torch::rand({3, 4, 32, 32});
    auto out = dec(fused, raw);
    CHECK(out.sizes() == torch::IntArrayRef({3, 3, 32, 32}));
    CHECK(out.min().item<float>() >= 0.0f);
    CHECK(out.max().item<float>() <= 1.0f);

    dec->set_passthrough();
    out = dec(fused * 10, raw);
    const auto a = out.reshape({-1}), b = raw.index({Slice(), Slice(0, 3)}).reshape({-1});
    const auto corr = torch::corrcoef(torch::stack({a, b})).index({0, 1}).item<double>();
    CHECK(corr > 0.99);
}

TEST_CASE("modes isolate their inputs") {
    torch::NoGradGuard guard;
    const auto c = tiny_model();
    auto model = build_model(c, 11);
    const auto t = random_set(c, 2, 4);
    auto other = random_set(c, 2, 5);
    const auto in = all_inputs(t);

    ModelInput swap_img = in, swap_csi = in;
    swap_img.defective = other.defective;
    swap_img.mask = other.mask;
    swap_csi.csi = other.csi;

    CHECK(torch::equal(model(in, Mode::rf_only), model(swap_img, Mode::rf_only)));
    CHECK(!torch::equal(model(in, Mode::rf_only), model(swap_csi, Mode::rf_only)));
    CHECK(torch::equal(model(in, Mode::image_only), model(swap_csi, Mode::image_only)));
    CHECK(!torch::equal(model(in, Mode::image_only), model(swap_img, Mode::image_only)));
    CHECK(!torch::equal(model(in, Mode::multimodal), model(swap_csi, Mode::multimodal)));
    CHECK(!torch::equal(model(in, Mode::multimodal), model(swap_img, Mode::multimodal)));

    const auto out = model(in, Mode::multimodal);
    CHECK(out.sizes() == t.gt.sizes());

    ModelInput bad = in;
    bad.csi = torch::zeros({2, 3, c.l_csi, c.csi_feature_dim});
    CHECK_THROWS_AS(model(bad, Mode::multimodal), ConfigError);
}

TEST_CASE("parameter counting") {
    torch::nn::Linear lin(4, 3);
    CHECK(count_parameters(*lin) == 15);

    auto c = tiny_model();
    auto a = build_model(c, 1);
    c.csi_feature_dim = 8;
    auto b = build_model(c, 1);
    CHECK(count_parameters(*b) - count_parameters(*a) == 4 * c.csi_patch_len * c.embed_dim);
    CHECK(count_parameters(*a->csi_encoder->input_projection) == c.csi_patch_len * 4 * c.embed_dim + c.embed_dim);

    auto x = build_model(tiny_model(), 1), y = build_model(tiny_model(), 1);
    const auto px = x->parameters(), py = y->parameters();
    for (std::size_t i = 0; i < px.size(); ++i) CHECK(torch::equal(px[i], py[i]));
}

TEST_CASE("reconstruction loss") {
    torch::manual_seed(2);
    const auto a = torch::rand({2, 2, 16, 16, 3}), b = torch::rand({2, 2, 16, 16, 3});
    CHECK(reconstruction_loss(a, b, 0.0).item<double>() == doctest::Approx((a - b).abs().mean().item<double>()));
    CHECK(reconstruction_loss(a, a, 0.2).item<double>() == doctest::Approx(0.0).epsilon(1e-6));

    // Differentiable SSIM agrees with the reference metric.
    const auto fa = a.index({0, 0}).contiguous(), fb = b.index({0, 0}).contiguous();
    const double ref = ssim({fa.data_ptr<float>(), 768}, {fb.data_ptr<float>(), 768}, 16, 16, 3);
    const double got = ssim_torch(fa.permute({2, 0, 1}).unsqueeze(0), fb.permute({2, 0, 1}).unsqueeze(0)).item<double>();
    CHECK(got == doctest::Approx(ref).epsilon(1e-5));
    const double expect = (a - b).abs().mean().item<double>() + 0.5 * (1.0 - ssim_torch(a.view({-1, 16, 16, 3}).permute({0, 3, 1, 2}),
                                                                                        b.view({-1, 16, 16, 3}).permute({0, 3, 1, 2}))
                                                                               .item<double>());
    CHECK(reconstruction_loss(a, b, 0.5).item<double>() == doctest::Approx(expect).epsilon(1e-6));
}

TEST_CASE("gradients match central differences") {
    const auto c = micro_model();
    auto model = build_model(c, 21);
    model->to(torch::kFloat64);
    const auto data = random_set(c, 2, 9).to(torch::kFloat64);
    const auto in = all_inputs(data);
    const auto loss_fn = [&] { return reconstruction_loss(model(in, Mode::multimodal), data.gt, 0.2); };

    model->zero_grad();
    loss_fn().backward();

    std::mt19937_64 rng(4);
    int checked = 0;
    for (const auto& item : model->named_parameters()) {
        auto p = item.value();
        const auto grad = p.grad();
        for (int trial = 0; trial < 2; ++trial) {
            const auto flat = std::uniform_int_distribution<std::int64_t>(0, p.numel() - 1)(rng);
            const double analytic = grad.view({-1})[flat].item<double>();
            const double eps = 1e-6;
            double numeric;
            {
                torch::NoGradGuard guard;
                auto v = p.view({-1});
                const double orig = v[flat].item<double>();
                v[flat] = orig + eps;
                const double up = loss_fn().item<double>();
                v[flat] = orig - eps;
                const double down = loss_fn().item<double>();
                v[flat] = orig;
                numeric = (up - down) / (2 * eps);
            }
            const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
            INFO(item.key(), "[", flat, "] analytic ", analytic, " numeric ", numeric);
            CHECK(std::abs(analytic - numeric) / scale < 1e-3);
            ++checked;
        }
    }
    CHECK(checked > 40);
}

TEST_CASE("training is deterministic") {
    const auto c = tiny_model();
    const auto data = random_set(c, 6, 3);
    TrainConfig tc;
    tc.epochs = 2;
    tc.batch_size = 4;
    tc.seed = 5;
    Trainer a(build_model(c, 5), tc, Mode::multimodal), b(build_model(c, 5), tc, Mode::multimodal);
    const auto& sa = a.fit(data);
    const auto& sb = b.fit(data);
    CHECK(sa.epochs_done == 2);
    CHECK(sa.epoch_losses == sb.epoch_losses);
    CHECK(std::isfinite(sa.epoch_losses[0]));

    CHECK(a.learning_rate_at(0) == doctest::Approx(tc.learning_rate));
    CHECK(a.learning_rate_at(1) < a.learning_rate_at(0));
}

TEST_CASE("training reduces loss on a fixed batch") {
    const auto c = micro_model();
    auto data = random_set(c, 4, 1);
    data.gt = data.gt * 0.0 + 0.3;
    TrainConfig tc;
    tc.epochs = 80;
    tc.cosine_decay = false;
    tc.batch_size = 4;
    tc.learning_rate = 1e-2;
    Trainer t(build_model(c, 2), tc, Mode::multimodal);
    const auto& s = t.fit(data);
    CHECK(s.epoch_losses.back() < 0.5 * s.epoch_losses.front());
}

TEST_CASE("checkpoints") {
    test_support::TempDir dir;
    const auto c = tiny_model();
    const auto data = random_set(c, 4, 6);
    TrainConfig tc;
    tc.epochs = 1;
    tc.batch_size = 2;
    Trainer trainer(build_model(c, 3), tc, Mode::image_only);
    trainer.fit(data);

    Checkpoint meta;
    meta.model_config = c;
    meta.mode = Mode::image_only;
    meta.train_config = tc;
    meta.state = trainer.state();
    meta.extra["note"] = "x";
    const auto path = dir / "m.ckpt";
    save_checkpoint(path, meta, trainer.model(), &trainer.optimizer());

    auto loaded = load_checkpoint(path);
    CHECK(loaded.meta.mode == Mode::image_only);
    CHECK(loaded.meta.state.epoch_losses == trainer.state().epoch_losses);
    CHECK(loaded.meta.extra["note"] == "x");
    CHECK(loaded.optimizer_step > 0);
    CHECK(!loaded.optimizer_tensors.empty());
    {
        torch::NoGradGuard guard;
        const auto in = all_inputs(data);
        CHECK(torch::equal(loaded.model(in, Mode::image_only), trainer.model()(in, Mode::image_only)));
    }

    // Resumed training continues exactly where the uninterrupted run would be.
    tc.epochs = 2;
    Trainer straight(build_model(c, 3), tc, Mode::image_only);
    straight.fit(data);
    Trainer resumed(loaded.model, tc, Mode::image_only);
    restore_optimizer(loaded, resumed.model(), resumed.optimizer());
    resumed.state() = loaded.meta.state;
    resumed.fit(data);
    CHECK(resumed.state().epoch_losses[1] == doctest::Approx(straight.state().epoch_losses[1]).epsilon(1e-5));

    SUBCASE("truncated") {
        const auto size = std::filesystem::file_size(path);
        std::filesystem::resize_file(path, size - 100);
        CHECK_THROWS_AS(load_checkpoint(path), CorruptionError);
        std::filesystem::resize_file(path, 12);
        CHECK_THROWS_AS(load_checkpoint(path), CorruptionError);
    }
    SUBCASE("not a checkpoint") {
        std::ofstream(dir / "junk.ckpt") << "hello world, definitely not weights";
        CHECK_THROWS_AS(load_checkpoint(dir / "junk.ckpt"), CorruptionError);
        CHECK_THROWS_AS(load_checkpoint(dir / "absent.ckpt"), IoError);
    }
    SUBCASE("shape mismatch") {
        std::ifstream is(path, std::ios::binary);
        std::string bytes((std::istreambuf_iterator<char>(is)), {});
        std::uint64_t len;
        std::memcpy(&len, bytes.data() + 8, 8);
        auto header = nlohmann::json::parse(bytes.substr(16, len));
        header["model_config"]["embed_dim"] = 32;
        const auto text = header.dump();
        const std::uint64_t new_len = text.size();
        std::string out = bytes.substr(0, 8);
        out.append(reinterpret_cast<const char*>(&new_len), 8);
        out += text;
        out += bytes.substr(16 + len);
        std::ofstream(path, std::ios::binary | std::ios::trunc) << out;
        CHECK_THROWS_AS(load_checkpoint(path), CheckpointMismatch);
    }
}
