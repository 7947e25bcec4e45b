#include "csi_inpaint/model.hpp"

#include <cmath>
#include <limits>

#include "csi_inpaint/common.hpp"

namespace csi_inpaint {

namespace F = torch::nn::functional;
using torch::indexing::Slice;

torch::Tensor csi_segment(const torch::Tensor& csi, int csi_patch_len) {
    if (csi.dim() != 4) throw ConfigError("csi_segment expects (B, sensors, L_csi, features)");
    const auto b = csi.size(0), s = csi.size(1), l = csi.size(2), f = csi.size(3);
    if (csi_patch_len < 1 || l % csi_patch_len != 0)
        throw ConfigError("L_csi = " + std::to_string(l) + " is not divisible by csi_patch_len = " + std::to_string(csi_patch_len));
    return csi.contiguous().view({b, s * (l / csi_patch_len), csi_patch_len * f});
}

MultiHeadAttentionImpl::MultiHeadAttentionImpl(int dim, int heads) : heads_(heads) {
    qkv_ = register_module("qkv", torch::nn::Linear(dim, 3 * dim));
    proj_ = register_module("proj", torch::nn::Linear(dim, dim));
}

torch::Tensor MultiHeadAttentionImpl::forward(const torch::Tensor& x, const torch::Tensor& blocked) {
    const auto n = x.size(0), t = x.size(1), c = x.size(2);
    const auto d = c / heads_;
    const auto qkv = qkv_(x).view({n, t, 3, heads_, d}).permute({2, 0, 3, 1, 4});
    const auto q = qkv[0], k = qkv[1], v = qkv[2];
    auto scores = torch::matmul(q, k.transpose(-2, -1)) / std::sqrt(static_cast<double>(d));
    if (blocked.defined()) {
        const auto w = blocked.size(0);
        scores = scores.view({n / w, w, heads_, t, t})
                     .masked_fill(blocked.unsqueeze(1).unsqueeze(0), -std::numeric_limits<double>::infinity())
                     .view({n, heads_, t, t});
    }
    const auto out = torch::matmul(torch::softmax(scores, -1), v).transpose(1, 2).reshape({n, t, c});
    return proj_(out);
}

MlpImpl::MlpImpl(int dim, int hidden) {
    fc1_ = register_module("fc1", torch::nn::Linear(dim, hidden));
    fc2_ = register_module("fc2", torch::nn::Linear(hidden, dim));
}

torch::Tensor MlpImpl::forward(const torch::Tensor& x) { return fc2_(F::gelu(fc1_(x))); }

TransformerBlockImpl::TransformerBlockImpl(int dim, int heads, int mlp_ratio) {
    norm1_ = register_module("norm1", torch::nn::LayerNorm(torch::nn::LayerNormOptions({dim})));
    attn_ = register_module("attn", MultiHeadAttention(dim, heads));
    norm2_ = register_module("norm2", torch::nn::LayerNorm(torch::nn::LayerNormOptions({dim})));
    mlp_ = register_module("mlp", Mlp(dim, dim * mlp_ratio));
}

torch::Tensor TransformerBlockImpl::forward(const torch::Tensor& x) {
    auto h = x + attn_(norm1_(x));
    return h + mlp_(norm2_(h));
}

torch::Tensor window_partition(const torch::Tensor& x, int window) {
    const auto n = x.size(0), gh = x.size(1), gw = x.size(2), c = x.size(3);
    return x.view({n, gh / window, window, gw / window, window, c})
        .permute({0, 1, 3, 2, 4, 5})
        .reshape({-1, window * window, c});
}

torch::Tensor window_reverse(const torch::Tensor& windows, int window, int grid_h, int grid_w) {
    const auto c = windows.size(2);
    return windows.view({-1, grid_h / window, grid_w / window, window, window, c})
        .permute({0, 1, 3, 2, 4, 5})
        .reshape({-1, grid_h, grid_w, c});
}

torch::Tensor shifted_window_mask(int grid_h, int grid_w, int window, int shift) {
    auto labels = torch::zeros({1, grid_h, grid_w, 1});
    const int hs[4] = {0, grid_h - window, grid_h - shift, grid_h};
    const int ws[4] = {0, grid_w - window, grid_w - shift, grid_w};
    float id = 0;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            labels.index_put_({Slice(), Slice(hs[i], hs[i + 1]), Slice(ws[j], ws[j + 1]), Slice()}, id);
            id += 1;
        }
    const auto flat = window_partition(labels, window).squeeze(-1);  // (windows, window^2)
    return flat.unsqueeze(2) != flat.unsqueeze(1);
}

SwinBlockImpl::SwinBlockImpl(int dim, int heads, int mlp_ratio, int grid_h, int grid_w, int window, int shift)
    : grid_h_(grid_h), grid_w_(grid_w), window_(window), shift_(shift) {
    norm1_ = register_module("norm1", torch::nn::LayerNorm(torch::nn::LayerNormOptions({dim})));
    attn_ = register_module("attn", MultiHeadAttention(dim, heads));
    norm2_ = register_module("norm2", torch::nn::LayerNorm(torch::nn::LayerNormOptions({dim})));
    mlp_ = register_module("mlp", Mlp(dim, dim * mlp_ratio));
    if (shift_ > 0) blocked_ = register_buffer("blocked", shifted_window_mask(grid_h, grid_w, window, shift));
}

torch::Tensor SwinBlockImpl::forward(const torch::Tensor& x) {
    auto h = norm1_(x);
    if (shift_ > 0) h = torch::roll(h, {-shift_, -shift_}, {1, 2});
    h = window_reverse(attn_(window_partition(h, window_), shift_ > 0 ? blocked_ : torch::Tensor{}), window_, grid_h_,
                       grid_w_);
    if (shift_ > 0) h = torch::roll(h, {shift_, shift_}, {1, 2});
    auto y = x + h;
    return y + mlp_(norm2_(y));
}

PatchMergingImpl::PatchMergingImpl(int dim) {
    norm_ = register_module("norm", torch::nn::LayerNorm(torch::nn::LayerNormOptions({4 * dim})));
    reduce_ = register_module("reduce", torch::nn::Linear(torch::nn::LinearOptions(4 * dim, 2 * dim).bias(false)));
}

torch::Tensor PatchMergingImpl::forward(const torch::Tensor& x) {
    const auto x0 = x.index({Slice(), Slice(0, torch::indexing::None, 2), Slice(0, torch::indexing::None, 2)});
    const auto x1 = x.index({Slice(), Slice(1, torch::indexing::None, 2), Slice(0, torch::indexing::None, 2)});
    const auto x2 = x.index({Slice(), Slice(0, torch::indexing::None, 2), Slice(1, torch::indexing::None, 2)});
    const auto x3 = x.index({Slice(), Slice(1, torch::indexing::None, 2), Slice(1, torch::indexing::None, 2)});
    return reduce_(norm_(torch::cat({x0, x1, x2, x3}, -1)));
}

PatchEncoderImpl::PatchEncoderImpl(const ModelConfig& config) : config_(config) {
    config.validate();
    const int p = config.patch_size;
    projection = register_module("projection", torch::nn::Linear(p * p * 4, config.embed_dim));
    positional = register_parameter(
        "positional", torch::randn({1, config.l_img * config.grid_height() * config.grid_width(), config.embed_dim}) * 0.02);
}

torch::Tensor PatchEncoderImpl::forward(const torch::Tensor& defective, const torch::Tensor& mask) {
    const int p = config_.patch_size, gh = config_.grid_height(), gw = config_.grid_width();
    const auto b = defective.size(0), l = defective.size(1);
    const auto x = torch::cat({defective, mask.unsqueeze(-1)}, -1)
                       .view({b, l, gh, p, gw, p, 4})
                       .permute({0, 1, 2, 4, 3, 5, 6})
                       .reshape({b, l * gh * gw, p * p * 4});
    return projection(x) + positional;
}

CsiEncoderImpl::CsiEncoderImpl(const ModelConfig& config) {
    input_projection = register_module("input_projection", torch::nn::Linear(config.csi_token_dim(), config.embed_dim));
    blocks_ = register_module("blocks", torch::nn::ModuleList());
    for (int i = 0; i < config.n_layers_csi; ++i) blocks_->push_back(TransformerBlock(config.embed_dim, config.n_heads, config.mlp_ratio));
    norm_ = register_module("norm", torch::nn::LayerNorm(torch::nn::LayerNormOptions({config.embed_dim})));
}

torch::Tensor CsiEncoderImpl::forward(const torch::Tensor& tokens) {
    auto x = input_projection(tokens);
    for (const auto& block : *blocks_) x = block->as<TransformerBlock>()->forward(x);
    return norm_(x);
}

ImageEncoderImpl::ImageEncoderImpl(const ModelConfig& config) : config_(config) {
    const int gh = config.grid_height(), gw = config.grid_width(), w = config.attn_window;
    // Shifting is a no-op when one window already spans the grid.
    const int shift = (w < gh || w < gw) ? w / 2 : 0;
    blocks_ = register_module("blocks", torch::nn::ModuleList());
    for (int i = 0; i < config.n_layers_img; ++i)
        blocks_->push_back(SwinBlock(config.embed_dim, config.n_heads, config.mlp_ratio, gh, gw, w, i % 2 ? shift : 0));
    merge_ = register_module("merge", PatchMerging(config.embed_dim));
}

torch::Tensor ImageEncoderImpl::encode_blocks(const torch::Tensor& tokens, int n_blocks) {
    const auto b = tokens.size(0);
    auto x = tokens.reshape({b * config_.l_img, config_.grid_height(), config_.grid_width(), tokens.size(2)});
    int i = 0;
    for (const auto& block : *blocks_) {
        if (n_blocks >= 0 && i++ >= n_blocks) break;
        x = block->as<SwinBlock>()->forward(x);
    }
    return x;
}

torch::Tensor ImageEncoderImpl::forward(const torch::Tensor& tokens) { return merge_(encode_blocks(tokens)); }

AggregatorImpl::AggregatorImpl(const ModelConfig& config) : config_(config) {
    reduce_img_ = register_module("reduce_img", torch::nn::Linear(2 * config.embed_dim, config.reduced_img_dim));
    reduce_csi_ = register_module("reduce_csi", torch::nn::Linear(config.n_sensors * config.embed_dim,
                                                                  config.reduced_csi_dim * config.grid_height() * config.grid_width()));
}

torch::Tensor AggregatorImpl::forward(const torch::Tensor& image_features, const torch::Tensor& csi_features,
                                      const torch::Tensor& defective, const torch::Tensor& mask) {
    const int gh = config_.grid_height(), gw = config_.grid_width(), l = config_.l_img;
    const auto b = defective.size(0);
    const auto n = b * l;

    const auto img = F::interpolate(reduce_img_(image_features).permute({0, 3, 1, 2}),
                                    F::InterpolateFuncOptions().size(std::vector<int64_t>{gh, gw}).mode(torch::kNearest));

    // CSI tokens: one time bin per image frame, sensors kept side by side.
    const int s = config_.n_sensors, e = config_.embed_dim;
    auto csi = csi_features.view({b, s, config_.csi_tokens_per_sensor(), e}).permute({0, 1, 3, 2}).reshape({b, s * e, -1});
    csi = F::adaptive_avg_pool1d(csi, F::AdaptiveAvgPool1dFuncOptions(l)).permute({0, 2, 1}).reshape({n, s * e});
    csi = reduce_csi_(csi).view({n, config_.reduced_csi_dim, gh, gw});

    const auto raw = torch::cat({defective, mask.unsqueeze(-1)}, -1)
                         .reshape({n, config_.image_height, config_.image_width, 4})
                         .permute({0, 3, 1, 2});
    const auto pooled = F::avg_pool2d(raw, F::AvgPool2dFuncOptions(config_.patch_size));
    return torch::cat({img, csi, pooled}, 1);
}

DecoderImpl::DecoderImpl(const ModelConfig& config) {
    const auto& ch = config.decoder_channels;
    const auto conv = [](int in, int out, int k) {
        return torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, k).padding(k / 2));
    };
    input_conv_ = register_module("input_conv", conv(config.fused_channels(), ch.front(), 3));
    stages_ = register_module("stages", torch::nn::ModuleList());
    for (std::size_t i = 0; i < ch.size(); ++i) stages_->push_back(conv(ch[i], ch[std::min(i + 1, ch.size() - 1)], 3));
    head_ = register_module("head", conv(ch.back(), 3, 3));
    skip = register_module("skip", conv(4, 3, 1));
}

torch::Tensor DecoderImpl::forward(const torch::Tensor& fused, const torch::Tensor& raw) {
    auto h = F::gelu(input_conv_(fused));
    for (const auto& stage : *stages_) {
        h = F::interpolate(h, F::InterpolateFuncOptions().scale_factor(std::vector<double>{2.0, 2.0}).mode(torch::kNearest));
        h = F::gelu(stage->as<torch::nn::Conv2d>()->forward(h));
    }
    return torch::sigmoid(head_(h) + skip(raw));
}

void DecoderImpl::set_passthrough() {
    torch::NoGradGuard guard;
    for (auto& p : input_conv_->parameters()) p.zero_();
    for (auto& p : stages_->parameters()) p.zero_();
    for (auto& p : head_->parameters()) p.zero_();
    skip->weight.zero_();
    skip->bias.zero_();
    for (int c = 0; c < 3; ++c) skip->weight.index_put_({c, c, 0, 0}, 1.0);
}

CsiInpainterImpl::CsiInpainterImpl(const ModelConfig& config) : config_(config) {
    config_.validate();
    patch_encoder = register_module("patch_encoder", PatchEncoder(config_));
    csi_encoder = register_module("csi_encoder", CsiEncoder(config_));
    image_encoder = register_module("image_encoder", ImageEncoder(config_));
    aggregator = register_module("aggregator", Aggregator(config_));
    decoder = register_module("decoder", Decoder(config_));
}

torch::Tensor CsiInpainterImpl::forward(const ModelInput& input, Mode mode) {
    const auto& c = config_;
    if (input.defective.dim() != 5 || input.defective.size(1) != c.l_img || input.defective.size(2) != c.image_height ||
        input.defective.size(3) != c.image_width || input.defective.size(4) != 3)
        throw ConfigError("defective window must be (B, L_img, H, W, 3) matching the model config");
    const auto b = input.defective.size(0);
    if (input.mask.dim() != 4 || input.mask.size(0) != b || input.mask.size(1) != c.l_img)
        throw ConfigError("mask must be (B, L_img, H, W)");
    if (input.csi.dim() != 4 || input.csi.size(0) != b || input.csi.size(1) != c.n_sensors || input.csi.size(2) != c.l_csi ||
        input.csi.size(3) != c.csi_feature_dim)
        throw ConfigError("CSI window must be (B, n_sensors, L_csi, csi_feature_dim) matching the model config");

    auto defective = input.defective;
    auto mask = input.mask.to(defective.dtype());
    auto csi = input.csi;
    if (mode == Mode::rf_only) {
        mask = torch::ones_like(mask);
        defective = torch::full_like(defective, input.fill_value);
    } else if (mode == Mode::image_only) {
        csi = torch::zeros_like(csi);
    }

    const auto image_features = image_encoder(patch_encoder(defective, mask));
    const auto csi_features = csi_encoder(csi_segment(csi, c.csi_patch_len));
    const auto fused = aggregator(image_features, csi_features, defective, mask);
    const auto raw = torch::cat({defective, mask.unsqueeze(-1)}, -1)
                         .reshape({b * c.l_img, c.image_height, c.image_width, 4})
                         .permute({0, 3, 1, 2});
    const auto out = decoder(fused, raw);
    return out.permute({0, 2, 3, 1}).reshape({b, c.l_img, c.image_height, c.image_width, 3});
}

CsiInpainter build_model(const ModelConfig& config, std::uint64_t seed) {
    torch::manual_seed(derive_seed(seed, "init"));
    return CsiInpainter(config);
}

std::int64_t count_parameters(torch::nn::Module& module) {
    std::int64_t n = 0;
    for (const auto& p : module.parameters())
        if (p.requires_grad()) n += p.numel();
    return n;
}

}  // namespace csi_inpaint
