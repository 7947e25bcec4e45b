#include "csi_inpaint/train.hpp"

#include <cmath>
#include <numbers>

#include <ATen/CPUGeneratorImpl.h>

#include "csi_inpaint/common.hpp"

namespace csi_inpaint {

namespace F = torch::nn::functional;

torch::Tensor ssim_torch(const torch::Tensor& a, const torch::Tensor& b, const SsimParams& params) {
    const double c1 = std::pow(params.k1 * params.data_range, 2);
    const double c2 = std::pow(params.k2 * params.data_range, 2);
    const auto pool = [&](const torch::Tensor& t) {
        return F::avg_pool2d(t, F::AvgPool2dFuncOptions(params.window).stride(1));
    };
    const auto mx = pool(a), my = pool(b);
    const auto vx = pool(a * a) - mx * mx;
    const auto vy = pool(b * b) - my * my;
    const auto cov = pool(a * b) - mx * my;
    const auto map = ((2 * mx * my + c1) * (2 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
    return map.mean();
}

torch::Tensor reconstruction_loss(const torch::Tensor& restored, const torch::Tensor& target, double ssim_weight) {
    auto loss = (restored - target).abs().mean();
    if (ssim_weight != 0.0) {
        const auto to_nchw = [](const torch::Tensor& t) {
            return t.reshape({-1, t.size(-3), t.size(-2), t.size(-1)}).permute({0, 3, 1, 2});
        };
        loss = loss + ssim_weight * (1.0 - ssim_torch(to_nchw(restored), to_nchw(target)));
    }
    return loss;
}

ModelInput TensorSet::input(const torch::Tensor& index) const {
    return {defective.index_select(0, index), mask.index_select(0, index), csi.index_select(0, index), fill_value};
}

TensorSet TensorSet::to(torch::Dtype dtype) const {
    return {gt.to(dtype), defective.to(dtype), mask.to(dtype), csi.to(dtype), fill_value};
}

Trainer::Trainer(CsiInpainter model, TrainConfig config, Mode mode)
    : model_(std::move(model)), config_(config), mode_(mode) {
    config_.validate();
    optimizer_ = std::make_unique<torch::optim::Adam>(model_->parameters(),
                                                      torch::optim::AdamOptions(config_.learning_rate));
}

double Trainer::learning_rate_at(int epoch) const {
    if (!config_.cosine_decay) return config_.learning_rate;
    return config_.learning_rate * 0.5 * (1.0 + std::cos(std::numbers::pi * epoch / config_.epochs));
}

double Trainer::run_epoch(const TensorSet& data) {
    if (data.size() == 0) throw ConfigError("training split is empty");
    const int epoch = state_.epochs_done;
    for (auto& group : optimizer_->param_groups())
        static_cast<torch::optim::AdamOptions&>(group.options()).lr(learning_rate_at(epoch));

    // Shuffle order depends only on (seed, epoch), so resumed runs replay it.
    auto gen = at::make_generator<at::CPUGeneratorImpl>(derive_seed(config_.seed, "shuffle", static_cast<std::uint64_t>(epoch)));
    const auto order = torch::randperm(data.size(), gen, torch::kLong);

    model_->train();
    double total = 0.0;
    std::int64_t seen = 0;
    for (std::int64_t start = 0; start < data.size(); start += config_.batch_size) {
        const auto idx = order.slice(0, start, std::min<std::int64_t>(start + config_.batch_size, data.size()));
        optimizer_->zero_grad();
        const auto restored = model_->forward(data.input(idx), mode_);
        const auto loss = reconstruction_loss(restored, data.gt.index_select(0, idx), config_.ssim_weight);
        const double value = loss.item<double>();
        if (!std::isfinite(value))
            throw DivergenceError("non-finite training loss at epoch " + std::to_string(epoch + 1) + ", batch starting at " +
                                  std::to_string(start));
        loss.backward();
        if (config_.grad_clip > 0.0) torch::nn::utils::clip_grad_norm_(model_->parameters(), config_.grad_clip);
        optimizer_->step();
        total += value * static_cast<double>(idx.size(0));
        seen += idx.size(0);
    }
    const double mean = total / static_cast<double>(seen);
    state_.epoch_losses.push_back(mean);
    ++state_.epochs_done;
    return mean;
}

const TrainState& Trainer::fit(const TensorSet& data, const std::function<void(int, double)>& on_epoch) {
    while (state_.epochs_done < config_.epochs) {
        const double loss = run_epoch(data);
        if (on_epoch) on_epoch(state_.epochs_done, loss);
    }
    return state_;
}

torch::Tensor predict(CsiInpainter& model, const TensorSet& data, Mode mode, int batch_size) {
    torch::NoGradGuard guard;
    model->eval();
    std::vector<torch::Tensor> parts;
    for (std::int64_t start = 0; start < data.size(); start += batch_size) {
        const auto idx = torch::arange(start, std::min<std::int64_t>(start + batch_size, data.size()), torch::kLong);
        parts.push_back(model->forward(data.input(idx), mode));
    }
    return torch::cat(parts, 0);
}

}  // namespace csi_inpaint
