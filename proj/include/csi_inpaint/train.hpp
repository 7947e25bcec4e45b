#pragma once

#include <functional>
#include <optional>
#include <vector>

#include <torch/torch.h>

#include "csi_inpaint/config.hpp"
#include "csi_inpaint/metrics.hpp"
#include "csi_inpaint/model.hpp"

namespace csi_inpaint {

/// Differentiable counterpart of metrics::ssim: uniform window, valid
/// positions only, population moments, mean over channels and positions.
/// Inputs (N, C, H, W).
torch::Tensor ssim_torch(const torch::Tensor& a, const torch::Tensor& b, const SsimParams& params = {});

/// MAE over every pixel + ssim_weight * (1 - SSIM). Windows are (B, L, H, W, 3).
torch::Tensor reconstruction_loss(const torch::Tensor& restored, const torch::Tensor& target, double ssim_weight);

/// Stacked training tensors; every sample shares the model's shapes.
struct TensorSet {
    torch::Tensor gt;         // (N, L, H, W, 3)
    torch::Tensor defective;  // (N, L, H, W, 3)
    torch::Tensor mask;       // (N, L, H, W)
    torch::Tensor csi;        // (N, S, L_csi, F)
    float fill_value = 0.0f;

    std::int64_t size() const { return gt.defined() ? gt.size(0) : 0; }
    ModelInput input(const torch::Tensor& index) const;
    TensorSet to(torch::Dtype dtype) const;
};

struct TrainState {
    int epochs_done = 0;
    std::vector<double> epoch_losses;
};

/// Adam with per-epoch cosine learning-rate decay and global-norm clipping.
class Trainer {
public:
    Trainer(CsiInpainter model, TrainConfig config, Mode mode);

    /// Trains until config.epochs epochs have run in total (resumable).
    /// The callback sees (epoch, mean loss) after every epoch.
    const TrainState& fit(const TensorSet& data, const std::function<void(int, double)>& on_epoch = {});

    /// Runs a single epoch; throws DivergenceError on a non-finite loss.
    double run_epoch(const TensorSet& data);

    double learning_rate_at(int epoch) const;

    CsiInpainter& model() { return model_; }
    torch::optim::Adam& optimizer() { return *optimizer_; }
    TrainState& state() { return state_; }
    const TrainConfig& config() const { return config_; }
    Mode mode() const { return mode_; }

private:
    CsiInpainter model_;
    TrainConfig config_;
    Mode mode_;
    std::unique_ptr<torch::optim::Adam> optimizer_;
    TrainState state_;
};

/// Restores a batch without tracking gradients, in chunks of batch_size.
torch::Tensor predict(CsiInpainter& model, const TensorSet& data, Mode mode, int batch_size = 8);

}  // namespace csi_inpaint
