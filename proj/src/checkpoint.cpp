#include "csi_inpaint/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "csi_inpaint/common.hpp"

namespace csi_inpaint {

namespace {

constexpr char kMagic[8] = {'C', 'S', 'I', 'C', 'K', 'P', 'T', '1'};

nlohmann::json train_json(const TrainConfig& t) {
    return {{"epochs", t.epochs},           {"batch_size", t.batch_size}, {"learning_rate", t.learning_rate},
            {"cosine_decay", t.cosine_decay}, {"ssim_weight", t.ssim_weight}, {"grad_clip", t.grad_clip},
            {"seed", t.seed}};
}

TrainConfig train_from_json(const nlohmann::json& j) {
    TrainConfig t;
    t.epochs = j.at("epochs").get<int>();
    t.batch_size = j.at("batch_size").get<int>();
    t.learning_rate = j.at("learning_rate").get<double>();
    t.cosine_decay = j.at("cosine_decay").get<bool>();
    t.ssim_weight = j.at("ssim_weight").get<double>();
    t.grad_clip = j.at("grad_clip").get<double>();
    t.seed = j.at("seed").get<std::uint64_t>();
    return t;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& meta, CsiInpainter& model,
                     torch::optim::Adam* optimizer) {
    std::vector<std::pair<std::string, torch::Tensor>> tensors;
    for (const auto& item : model->named_parameters()) tensors.emplace_back("param/" + item.key(), item.value());
    for (const auto& item : model->named_buffers()) tensors.emplace_back("buffer/" + item.key(), item.value());
    std::int64_t step = 0;
    if (optimizer) {
        auto& state = optimizer->state();
        for (const auto& item : model->named_parameters()) {
            const auto it = state.find(item.value().unsafeGetTensorImpl());
            if (it == state.end()) continue;
            auto& s = static_cast<torch::optim::AdamParamState&>(*it->second);
            tensors.emplace_back("exp_avg/" + item.key(), s.exp_avg());
            tensors.emplace_back("exp_avg_sq/" + item.key(), s.exp_avg_sq());
            step = s.step();
        }
    }

    nlohmann::json header;
    header["format"] = "csi-inpainter checkpoint";
    header["model_config"] = to_json(meta.model_config);
    header["features"] = meta.features.to_json();
    header["mode"] = to_string(meta.mode);
    header["train_config"] = train_json(meta.train_config);
    header["mask"] = to_json(meta.mask);
    header["epochs_done"] = meta.state.epochs_done;
    header["epoch_losses"] = meta.state.epoch_losses;
    header["optimizer_step"] = step;
    header["extra"] = meta.extra;
    nlohmann::json index = nlohmann::json::array();
    std::uint64_t offset = 0;
    std::vector<torch::Tensor> payload;
    for (const auto& [name, t] : tensors) {
        const auto f32 = t.detach().to(torch::kFloat32).contiguous();
        index.push_back({{"name", name}, {"shape", f32.sizes().vec()}, {"offset", offset}, {"count", f32.numel()}});
        offset += static_cast<std::uint64_t>(f32.numel()) * sizeof(float);
        payload.push_back(f32);
    }
    header["tensors"] = index;
    const std::string text = header.dump();

    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw IoError("cannot open " + tmp.string() + " for writing");
        const std::uint64_t len = text.size();
        os.write(kMagic, sizeof kMagic);
        os.write(reinterpret_cast<const char*>(&len), sizeof len);
        os.write(text.data(), static_cast<std::streamsize>(text.size()));
        for (const auto& t : payload)
            os.write(reinterpret_cast<const char*>(t.data_ptr<float>()), static_cast<std::streamsize>(t.numel() * sizeof(float)));
        if (!os) throw IoError("write failed for " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot move checkpoint into place at " + path.string() + ": " + ec.message());
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path.string());
    char magic[8];
    std::uint64_t len = 0;
    is.read(magic, sizeof magic);
    is.read(reinterpret_cast<char*>(&len), sizeof len);
    if (!is || std::memcmp(magic, kMagic, sizeof kMagic) != 0) throw CorruptionError(path.string() + " is not a checkpoint archive");
    std::string text(len, '\0');
    is.read(text.data(), static_cast<std::streamsize>(len));
    if (!is) throw CorruptionError(path.string() + ": truncated header");
    const std::uint64_t payload_start = sizeof kMagic + sizeof len + len;

    LoadedCheckpoint out;
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(text);
        out.meta.model_config = model_config_from_json(header.at("model_config"));
        out.meta.features = FeaturePipeline::from_json(header.at("features"));
        out.meta.mode = parse_mode(header.at("mode").get<std::string>());
        out.meta.train_config = train_from_json(header.at("train_config"));
        out.meta.mask = mask_from_json(header.at("mask"));
        out.meta.state.epochs_done = header.at("epochs_done").get<int>();
        out.meta.state.epoch_losses = header.at("epoch_losses").get<std::vector<double>>();
        out.meta.extra = header.value("extra", nlohmann::json::object());
        out.optimizer_step = header.value("optimizer_step", std::int64_t{0});
    } catch (const nlohmann::json::exception& e) {
        throw CorruptionError(path.string() + ": malformed header (" + e.what() + ")");
    }

    out.model = CsiInpainter(out.meta.model_config);
    std::map<std::string, torch::Tensor> targets;
    for (const auto& item : out.model->named_parameters()) targets["param/" + item.key()] = item.value();
    for (const auto& item : out.model->named_buffers()) targets["buffer/" + item.key()] = item.value();

    torch::NoGradGuard guard;
    std::size_t restored = 0;
    for (const auto& entry : header.at("tensors")) {
        const auto name = entry.at("name").get<std::string>();
        const auto shape = entry.at("shape").get<std::vector<std::int64_t>>();
        const auto count = entry.at("count").get<std::int64_t>();
        auto data = torch::empty(shape, torch::kFloat32);
        if (data.numel() != count) throw CorruptionError(path.string() + ": tensor " + name + " has inconsistent shape");
        is.seekg(static_cast<std::streamoff>(payload_start + entry.at("offset").get<std::uint64_t>()));
        is.read(reinterpret_cast<char*>(data.data_ptr<float>()), static_cast<std::streamsize>(count * sizeof(float)));
        if (!is) throw CorruptionError(path.string() + ": truncated payload at tensor " + name);
        if (name.starts_with("exp_avg")) {
            out.optimizer_tensors[name] = data;
            continue;
        }
        const auto it = targets.find(name);
        if (it == targets.end()) throw CheckpointMismatch(path.string() + ": unexpected tensor " + name);
        if (it->second.sizes() != data.sizes())
            throw CheckpointMismatch(path.string() + ": tensor " + name + " has a different shape than the model");
        it->second.copy_(data);
        ++restored;
    }
    if (restored != targets.size()) throw CheckpointMismatch(path.string() + ": checkpoint is missing model tensors");
    return out;
}

void restore_optimizer(const LoadedCheckpoint& loaded, CsiInpainter& model, torch::optim::Adam& optimizer) {
    auto& state = optimizer.state();
    for (const auto& item : model->named_parameters()) {
        const auto m = loaded.optimizer_tensors.find("exp_avg/" + item.key());
        const auto v = loaded.optimizer_tensors.find("exp_avg_sq/" + item.key());
        if (m == loaded.optimizer_tensors.end() || v == loaded.optimizer_tensors.end()) continue;
        auto s = std::make_unique<torch::optim::AdamParamState>();
        s->step(loaded.optimizer_step);
        s->exp_avg(m->second.clone());
        s->exp_avg_sq(v->second.clone());
        state[item.value().unsafeGetTensorImpl()] = std::move(s);
    }
}

}  // namespace csi_inpaint
