#pragma once

#include <cstdint>

#include <torch/torch.h>

#include "csi_inpaint/config.hpp"

namespace csi_inpaint {

/// Batched network input.
struct ModelInput {
    torch::Tensor defective;  // (B, L_img, H, W, 3)
    torch::Tensor mask;       // (B, L_img, H, W), 1 = occluded
    torch::Tensor csi;        // (B, n_sensors, L_csi, csi_feature_dim)
    float fill_value = 0.0f;
};

/// Splits each sensor's time axis into contiguous csi_patch_len-frame patches
/// and flattens every patch into one token. No parameters, no positional code.
/// (B, S, L_csi, F) -> (B, S * L_csi / csi_patch_len, csi_patch_len * F), sensor-major.
torch::Tensor csi_segment(const torch::Tensor& csi, int csi_patch_len);

/// Multi-head self-attention over (N, T, C) with an optional boolean mask
/// (W, T, T), true = blocked, broadcast over N in groups of W.
class MultiHeadAttentionImpl : public torch::nn::Module {
public:
    MultiHeadAttentionImpl(int dim, int heads);
    torch::Tensor forward(const torch::Tensor& x, const torch::Tensor& blocked = {});

private:
    int heads_;
    torch::nn::Linear qkv_{nullptr}, proj_{nullptr};
};
TORCH_MODULE(MultiHeadAttention);

class MlpImpl : public torch::nn::Module {
public:
    MlpImpl(int dim, int hidden);
    torch::Tensor forward(const torch::Tensor& x);

private:
    torch::nn::Linear fc1_{nullptr}, fc2_{nullptr};
};
TORCH_MODULE(Mlp);

/// Pre-norm Transformer block with full self-attention.
class TransformerBlockImpl : public torch::nn::Module {
public:
    TransformerBlockImpl(int dim, int heads, int mlp_ratio);
    torch::Tensor forward(const torch::Tensor& x);

private:
    torch::nn::LayerNorm norm1_{nullptr}, norm2_{nullptr};
    MultiHeadAttention attn_{nullptr};
    Mlp mlp_{nullptr};
};
TORCH_MODULE(TransformerBlock);

/// Windowed self-attention block over a (N, gh, gw, C) grid. With shift > 0 the
/// grid is cyclically rolled and attention across the wrap seam is masked.
class SwinBlockImpl : public torch::nn::Module {
public:
    SwinBlockImpl(int dim, int heads, int mlp_ratio, int grid_h, int grid_w, int window, int shift);
    torch::Tensor forward(const torch::Tensor& x);
    int shift() const { return shift_; }

private:
    int grid_h_, grid_w_, window_, shift_;
    torch::nn::LayerNorm norm1_{nullptr}, norm2_{nullptr};
    MultiHeadAttention attn_{nullptr};
    Mlp mlp_{nullptr};
    torch::Tensor blocked_;
};
TORCH_MODULE(SwinBlock);

/// (N, gh, gw, C) -> (N, gh/2, gw/2, 2C) via 2x2 concatenation, LayerNorm, linear.
class PatchMergingImpl : public torch::nn::Module {
public:
    explicit PatchMergingImpl(int dim);
    torch::Tensor forward(const torch::Tensor& x);

private:
    torch::nn::LayerNorm norm_{nullptr};
    torch::nn::Linear reduce_{nullptr};
};
TORCH_MODULE(PatchMerging);

/// (N, gh, gw, C) <-> (N * windows, window^2, C)
torch::Tensor window_partition(const torch::Tensor& x, int window);
torch::Tensor window_reverse(const torch::Tensor& windows, int window, int grid_h, int grid_w);

/// Region-label mask used by shifted windows: (windows, window^2, window^2), true = blocked.
torch::Tensor shifted_window_mask(int grid_h, int grid_w, int window, int shift);

class PatchEncoderImpl : public torch::nn::Module {
public:
    explicit PatchEncoderImpl(const ModelConfig& config);
    /// (B, L, H, W, 3) + (B, L, H, W) -> (B, L * gh * gw, embed_dim)
    torch::Tensor forward(const torch::Tensor& defective, const torch::Tensor& mask);

    torch::nn::Linear projection{nullptr};
    torch::Tensor positional;

private:
    ModelConfig config_;
};
TORCH_MODULE(PatchEncoder);

class CsiEncoderImpl : public torch::nn::Module {
public:
    explicit CsiEncoderImpl(const ModelConfig& config);
    /// (B, tokens, token_dim) -> (B, tokens, embed_dim)
    torch::Tensor forward(const torch::Tensor& tokens);

    torch::nn::Linear input_projection{nullptr};

private:
    torch::nn::ModuleList blocks_;
    torch::nn::LayerNorm norm_{nullptr};
};
TORCH_MODULE(CsiEncoder);

class ImageEncoderImpl : public torch::nn::Module {
public:
    explicit ImageEncoderImpl(const ModelConfig& config);
    /// (B, L * gh * gw, C) -> (B * L, gh/2, gw/2, 2C)
    torch::Tensor forward(const torch::Tensor& tokens);
    /// Grid after the attention blocks, before merging: (B * L, gh, gw, C).
    torch::Tensor encode_blocks(const torch::Tensor& tokens, int n_blocks = -1);

private:
    ModelConfig config_;
    torch::nn::ModuleList blocks_;
    PatchMerging merge_{nullptr};
};
TORCH_MODULE(ImageEncoder);

class AggregatorImpl : public torch::nn::Module {
public:
    explicit AggregatorImpl(const ModelConfig& config);
    /// -> (B * L, C_fused, gh, gw), channels ordered [image | csi | rgb | mask].
    torch::Tensor forward(const torch::Tensor& image_features, const torch::Tensor& csi_features,
                          const torch::Tensor& defective, const torch::Tensor& mask);

private:
    ModelConfig config_;
    torch::nn::Linear reduce_img_{nullptr}, reduce_csi_{nullptr};
};
TORCH_MODULE(Aggregator);

class DecoderImpl : public torch::nn::Module {
public:
    explicit DecoderImpl(const ModelConfig& config);
    /// fused (B * L, C_fused, gh, gw) + raw input (B * L, 4, H, W) -> (B * L, 3, H, W) in [0,1]
    torch::Tensor forward(const torch::Tensor& fused, const torch::Tensor& raw);

    /// Zeroes the conv trunk and makes the skip projection pass RGB straight through.
    void set_passthrough();

    torch::nn::Conv2d skip{nullptr};

private:
    torch::nn::Conv2d input_conv_{nullptr}, head_{nullptr};
    torch::nn::ModuleList stages_;
};
TORCH_MODULE(Decoder);

class CsiInpainterImpl : public torch::nn::Module {
public:
    explicit CsiInpainterImpl(const ModelConfig& config);

    /// (B, L, H, W, 3) restored window.
    torch::Tensor forward(const ModelInput& input, Mode mode);

    const ModelConfig& config() const { return config_; }

    PatchEncoder patch_encoder{nullptr};
    CsiEncoder csi_encoder{nullptr};
    ImageEncoder image_encoder{nullptr};
    Aggregator aggregator{nullptr};
    Decoder decoder{nullptr};

private:
    ModelConfig config_;
};
TORCH_MODULE(CsiInpainter);

/// Seeds parameter initialization so equal seeds build identical networks.
CsiInpainter build_model(const ModelConfig& config, std::uint64_t seed);

std::int64_t count_parameters(torch::nn::Module& module);

}  // namespace csi_inpaint
