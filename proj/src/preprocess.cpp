#include "csi_inpaint/preprocess.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "csi_inpaint/common.hpp"
#include "csi_inpaint/dataset_io.hpp"

namespace csi_inpaint {

AmplitudeTensor extract_amplitude(std::span<const std::complex<float>> csi, int frames, int n_tx, int n_rx,
                                  int n_subcarriers) {
    AmplitudeTensor a{frames, n_tx, n_rx, n_subcarriers, {}};
    if (csi.size() != a.rows() * static_cast<std::size_t>(n_subcarriers))
        throw ConfigError("CSI buffer does not match (T, n_tx, n_rx, n_subcarriers)");
    a.values.resize(csi.size());
    std::transform(csi.begin(), csi.end(), a.values.begin(), [](std::complex<float> z) { return std::abs(z); });
    return a;
}

AmplitudeTensor extract_amplitude(const CsiSequence& csi) {
    return extract_amplitude(csi.values, static_cast<int>(csi.size()), csi.n_tx, csi.n_rx, csi.n_subcarriers);
}

std::vector<double> subcarrier_variance(const AmplitudeTensor& amp) {
    const auto n = static_cast<std::size_t>(amp.n_subcarriers);
    std::vector<double> mean(n, 0.0), var(n, 0.0);
    const std::size_t rows = amp.rows();
    if (rows == 0) return var;
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t k = 0; k < n; ++k) mean[k] += amp.values[r * n + k];
    for (auto& m : mean) m /= static_cast<double>(rows);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t k = 0; k < n; ++k) {
            const double d = amp.values[r * n + k] - mean[k];
            var[k] += d * d;
        }
    for (auto& v : var) v /= static_cast<double>(rows);
    return var;
}

AmplitudeTensor select_subcarriers(const AmplitudeTensor& amp, std::span<const int> kept) {
    AmplitudeTensor out{amp.frames, amp.n_tx, amp.n_rx, static_cast<int>(kept.size()), {}};
    out.values.reserve(amp.rows() * kept.size());
    for (std::size_t r = 0; r < amp.rows(); ++r) {
        const auto row = amp.row(r);
        for (int k : kept) {
            if (k < 0 || k >= amp.n_subcarriers) throw ConfigError("kept subcarrier index out of range");
            out.values.push_back(row[static_cast<std::size_t>(k)]);
        }
    }
    return out;
}

CleanResult clean_subcarriers(const AmplitudeTensor& amp, double variance_floor) {
    if (!(variance_floor >= 0.0)) throw ConfigError("variance_floor must be non-negative");
    const auto var = subcarrier_variance(amp);
    CleanResult res;
    for (int k = 0; k < amp.n_subcarriers; ++k)
        if (var[static_cast<std::size_t>(k)] > variance_floor) res.kept.push_back(k);
    if (res.kept.empty()) throw ConfigError("every subcarrier fell below the variance floor");
    res.amplitude = select_subcarriers(amp, res.kept);
    return res;
}

nlohmann::json PcaModel::to_json() const {
    return {{"mean", mean}, {"components", components}, {"explained_variance_ratio", explained_variance_ratio}};
}

PcaModel PcaModel::from_json(const nlohmann::json& j) {
    PcaModel m;
    m.mean = j.at("mean").get<std::vector<double>>();
    m.components = j.at("components").get<std::vector<std::vector<double>>>();
    m.explained_variance_ratio = j.at("explained_variance_ratio").get<std::vector<double>>();
    for (const auto& c : m.components)
        if (c.size() != m.mean.size()) throw ConfigError("PCA component length does not match mean length");
    return m;
}

PcaModel fit_pca(std::span<const AmplitudeTensor> data, int k) {
    if (data.empty()) throw ConfigError("PCA needs non-empty fit data");
    const int f = data.front().n_subcarriers;
    if (k < 1 || k > f) throw ConfigError("PCA k = " + std::to_string(k) + " must lie in [1, " + std::to_string(f) + "]");
    std::size_t n = 0;
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(f);
    for (const auto& t : data) {
        if (t.n_subcarriers != f) throw ConfigError("PCA fit tensors disagree on feature count");
        for (std::size_t r = 0; r < t.rows(); ++r) {
            const auto row = t.row(r);
            for (int c = 0; c < f; ++c) mean[c] += row[static_cast<std::size_t>(c)];
            ++n;
        }
    }
    if (n < 2) throw ConfigError("PCA needs at least two samples");
    mean /= static_cast<double>(n);
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(f, f);
    Eigen::VectorXd x(f);
    for (const auto& t : data)
        for (std::size_t r = 0; r < t.rows(); ++r) {
            const auto row = t.row(r);
            for (int c = 0; c < f; ++c) x[c] = row[static_cast<std::size_t>(c)] - mean[c];
            cov.selfadjointView<Eigen::Lower>().rankUpdate(x);
        }
    cov = cov.selfadjointView<Eigen::Lower>();
    cov /= static_cast<double>(n - 1);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    if (eig.info() != Eigen::Success) throw ConfigError("PCA eigendecomposition failed");
    const Eigen::VectorXd values = eig.eigenvalues().cwiseMax(0.0);
    const double total = values.sum();

    PcaModel m;
    m.mean.assign(mean.data(), mean.data() + f);
    for (int i = 0; i < k; ++i) {
        const int col = f - 1 - i;  // eigenvalues ascend
        Eigen::VectorXd v = eig.eigenvectors().col(col);
        Eigen::Index arg = 0;
        v.cwiseAbs().maxCoeff(&arg);
        if (v[arg] < 0) v = -v;
        m.components.emplace_back(v.data(), v.data() + f);
        m.explained_variance_ratio.push_back(total > 0 ? values[col] / total : 0.0);
    }
    return m;
}

AmplitudeTensor pca_transform(const PcaModel& model, const AmplitudeTensor& amp) {
    if (amp.n_subcarriers != model.n_features())
        throw ConfigError("PCA model expects " + std::to_string(model.n_features()) + " subcarriers, input has " +
                          std::to_string(amp.n_subcarriers));
    const auto f = static_cast<std::size_t>(model.n_features());
    const auto k = static_cast<std::size_t>(model.k());
    AmplitudeTensor out{amp.frames, amp.n_tx, amp.n_rx, model.k(), std::vector<float>(amp.rows() * k)};
    for (std::size_t r = 0; r < amp.rows(); ++r) {
        const auto row = amp.row(r);
        for (std::size_t c = 0; c < k; ++c) {
            double acc = 0.0;
            for (std::size_t i = 0; i < f; ++i) acc += (row[i] - model.mean[i]) * model.components[c][i];
            out.values[r * k + c] = static_cast<float>(acc);
        }
    }
    return out;
}

AmplitudeTensor pca_inverse_transform(const PcaModel& model, const AmplitudeTensor& projected) {
    if (projected.n_subcarriers != model.k()) throw ConfigError("projected tensor width does not match PCA k");
    const auto f = static_cast<std::size_t>(model.n_features());
    const auto k = static_cast<std::size_t>(model.k());
    AmplitudeTensor out{projected.frames, projected.n_tx, projected.n_rx, model.n_features(),
                        std::vector<float>(projected.rows() * f)};
    for (std::size_t r = 0; r < projected.rows(); ++r)
        for (std::size_t i = 0; i < f; ++i) {
            double acc = model.mean[i];
            for (std::size_t c = 0; c < k; ++c) acc += projected.values[r * k + c] * model.components[c][i];
            out.values[r * f + i] = static_cast<float>(acc);
        }
    return out;
}

nlohmann::json NormalizationStats::to_json() const { return {{"mean", mean}, {"std", std}}; }

NormalizationStats NormalizationStats::from_json(const nlohmann::json& j) {
    return {j.at("mean").get<std::vector<double>>(), j.at("std").get<std::vector<double>>()};
}

NormalizationStats fit_normalization(std::span<const std::vector<float>> data, int features) {
    const auto f = static_cast<std::size_t>(features);
    std::vector<double> sum(f, 0.0), sq(f, 0.0);
    std::size_t n = 0;
    for (const auto& block : data) {
        if (block.size() % f != 0) throw ConfigError("normalization data is not a whole number of feature rows");
        for (std::size_t i = 0; i < block.size(); ++i) sum[i % f] += block[i];
        n += block.size() / f;
    }
    if (n == 0) throw ConfigError("normalization needs at least one row");
    NormalizationStats s;
    s.mean.resize(f);
    s.std.resize(f);
    for (std::size_t c = 0; c < f; ++c) s.mean[c] = sum[c] / static_cast<double>(n);
    for (const auto& block : data)
        for (std::size_t i = 0; i < block.size(); ++i) {
            const double d = block[i] - s.mean[i % f];
            sq[i % f] += d * d;
        }
    for (std::size_t c = 0; c < f; ++c) s.std[c] = std::sqrt(sq[c] / static_cast<double>(n));
    return s;
}

std::vector<float> normalize(std::span<const float> data, const NormalizationStats& stats) {
    const std::size_t f = stats.mean.size();
    if (f == 0 || data.size() % f != 0) throw ConfigError("data width does not match normalization statistics");
    std::vector<float> out(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        const std::size_t c = i % f;
        const double centered = data[i] - stats.mean[c];
        const double sd = stats.std[c];
        out[i] = static_cast<float>(sd > 0.0 && std::isfinite(sd) ? centered / sd : centered);
    }
    return out;
}

std::vector<float> FeaturePipeline::raw_features(const SyncedSample& sample, std::size_t sensor_slot) const {
    if (sample.n_tx != n_tx_ || sample.n_rx != n_rx_ || sample.n_subcarriers != n_subcarriers_)
        throw ConfigError("sample CSI shape does not match the fitted feature pipeline");
    const auto amp = extract_amplitude(sample.csi_windows.at(sensor_slot), sample.l_csi, sample.n_tx, sample.n_rx,
                                       sample.n_subcarriers);
    auto cleaned = select_subcarriers(amp, kept_);
    if (pca_) cleaned = pca_transform(*pca_, cleaned);
    return std::move(cleaned.values);
}

FeaturePipeline FeaturePipeline::fit(std::span<const SyncedSample> train, const PreprocessConfig& config) {
    if (train.empty()) throw ConfigError("feature pipeline needs a non-empty training split");
    FeaturePipeline p;
    p.config_ = config;
    const auto& first = train.front();
    p.n_tx_ = first.n_tx;
    p.n_rx_ = first.n_rx;
    p.n_subcarriers_ = first.n_subcarriers;

    // Pool every training window of every sensor; a subcarrier survives only if
    // it is live on all sensors, so every sensor shares one feature layout.
    std::map<int, std::vector<AmplitudeTensor>> by_sensor;
    for (const auto& s : train)
        for (std::size_t k = 0; k < s.csi_windows.size(); ++k)
            by_sensor[s.sensor_ids[k]].push_back(
                extract_amplitude(s.csi_windows[k], s.l_csi, s.n_tx, s.n_rx, s.n_subcarriers));
    std::vector<bool> live(static_cast<std::size_t>(p.n_subcarriers_), true);
    for (const auto& [id, windows] : by_sensor) {
        AmplitudeTensor pooled{0, p.n_tx_, p.n_rx_, p.n_subcarriers_, {}};
        for (const auto& w : windows) {
            pooled.frames += w.frames;
            pooled.values.insert(pooled.values.end(), w.values.begin(), w.values.end());
        }
        const auto var = subcarrier_variance(pooled);
        for (std::size_t k = 0; k < var.size(); ++k)
            if (!(var[k] > config.variance_floor)) live[k] = false;
    }
    for (int k = 0; k < p.n_subcarriers_; ++k)
        if (live[static_cast<std::size_t>(k)]) p.kept_.push_back(k);
    if (p.kept_.empty()) throw ConfigError("every subcarrier fell below the variance floor");

    if (config.pca_k) {
        std::vector<AmplitudeTensor> cleaned;
        for (const auto& [id, windows] : by_sensor)
            for (const auto& w : windows) cleaned.push_back(select_subcarriers(w, p.kept_));
        p.pca_ = fit_pca(cleaned, *config.pca_k);
    }
    for (std::size_t k = 0; k < first.sensor_ids.size(); ++k) {
        std::vector<std::vector<float>> blocks;
        for (const auto& s : train) blocks.push_back(p.raw_features(s, k));
        p.stats_[first.sensor_ids[k]] = fit_normalization(blocks, p.feature_dim());
    }
    return p;
}

int FeaturePipeline::feature_dim() const {
    return n_tx_ * n_rx_ * (pca_ ? pca_->k() : static_cast<int>(kept_.size()));
}

std::vector<float> FeaturePipeline::transform(const SyncedSample& sample) const {
    std::vector<float> out;
    out.reserve(sample.csi_windows.size() * static_cast<std::size_t>(sample.l_csi) * static_cast<std::size_t>(feature_dim()));
    for (std::size_t k = 0; k < sample.csi_windows.size(); ++k) {
        const auto it = stats_.find(sample.sensor_ids[k]);
        if (it == stats_.end())
            throw ConfigError("feature pipeline was not fitted on sensor " + std::to_string(sample.sensor_ids[k]));
        const auto z = normalize(raw_features(sample, k), it->second);
        out.insert(out.end(), z.begin(), z.end());
    }
    return out;
}

nlohmann::json FeaturePipeline::to_json() const {
    nlohmann::json j;
    j["variance_floor"] = config_.variance_floor;
    j["pca_k"] = config_.pca_k ? nlohmann::json(*config_.pca_k) : nlohmann::json(nullptr);
    j["n_tx"] = n_tx_;
    j["n_rx"] = n_rx_;
    j["n_subcarriers"] = n_subcarriers_;
    j["kept"] = kept_;
    j["pca"] = pca_ ? pca_->to_json() : nlohmann::json(nullptr);
    nlohmann::json stats = nlohmann::json::object();
    for (const auto& [id, s] : stats_) stats[std::to_string(id)] = s.to_json();
    j["normalization"] = stats;
    return j;
}

FeaturePipeline FeaturePipeline::from_json(const nlohmann::json& j) {
    FeaturePipeline p;
    p.config_.variance_floor = j.at("variance_floor").get<double>();
    if (!j.at("pca_k").is_null()) p.config_.pca_k = j.at("pca_k").get<int>();
    else p.config_.pca_k.reset();
    p.n_tx_ = j.at("n_tx").get<int>();
    p.n_rx_ = j.at("n_rx").get<int>();
    p.n_subcarriers_ = j.at("n_subcarriers").get<int>();
    p.kept_ = j.at("kept").get<std::vector<int>>();
    if (!j.at("pca").is_null()) p.pca_ = PcaModel::from_json(j.at("pca"));
    for (const auto& [key, value] : j.at("normalization").items()) p.stats_[std::stoi(key)] = NormalizationStats::from_json(value);
    return p;
}

}  // namespace csi_inpaint
