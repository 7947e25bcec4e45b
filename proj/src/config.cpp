#include "csi_inpaint/config.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "csi_inpaint/common.hpp"

namespace csi_inpaint {

using nlohmann::json;

std::string to_string(Mode mode) {
    switch (mode) {
        case Mode::multimodal: return "multimodal";
        case Mode::image_only: return "image-only";
        case Mode::rf_only: return "rf-only";
    }
    return "unknown";
}

Mode parse_mode(std::string_view text) {
    if (text == "multimodal") return Mode::multimodal;
    if (text == "image-only") return Mode::image_only;
    if (text == "rf-only") return Mode::rf_only;
    throw ConfigError("unknown mode '" + std::string(text) + "' (expected multimodal, image-only or rf-only)");
}

void ModelConfig::validate() const {
    const auto fail = [](const std::string& m) { throw ConfigError("model: " + m); };
    if (image_height < 1 || image_width < 1 || patch_size < 1) fail("image_size and patch_size must be positive");
    if (image_height % patch_size || image_width % patch_size) fail("image size must be divisible by patch_size");
    if ((patch_size & (patch_size - 1)) != 0) fail("patch_size must be a power of two");
    if (embed_dim < 1 || n_heads < 1 || embed_dim % n_heads) fail("embed_dim must be divisible by n_heads");
    if (attn_window < 1 || grid_height() % attn_window || grid_width() % attn_window)
        fail("attn_window must divide the patch grid");
    if (grid_height() % 2 || grid_width() % 2) fail("patch grid must be even for patch merging");
    if (n_layers_img < 1 || n_layers_csi < 1) fail("layer counts must be at least 1");
    if (mlp_ratio < 1) fail("mlp_ratio must be at least 1");
    if (csi_feature_dim < 1 || n_sensors < 1) fail("csi_feature_dim and n_sensors must be positive");
    if (l_img < 1 || l_csi < 1 || csi_patch_len < 1) fail("window lengths must be positive");
    if (l_csi % csi_patch_len) fail("L_csi must be divisible by csi_patch_len");
    if (reduced_img_dim < 1 || reduced_csi_dim < 1) fail("reduced dims must be positive");
    int stages = 0;
    for (int p = patch_size; p > 1; p /= 2) ++stages;
    if (static_cast<int>(decoder_channels.size()) != stages)
        fail("decoder_channels needs one entry per upsampling stage (" + std::to_string(stages) + " for patch_size " +
             std::to_string(patch_size) + ")");
    for (int c : decoder_channels)
        if (c < 1) fail("decoder channel counts must be positive");
}

void TrainConfig::validate() const {
    if (epochs < 1) throw ConfigError("training.epochs must be at least 1");
    if (batch_size < 1) throw ConfigError("training.batch_size must be at least 1");
    if (!(learning_rate > 0.0)) throw ConfigError("training.learning_rate must be positive");
    if (!(ssim_weight >= 0.0)) throw ConfigError("training.ssim_weight must be non-negative");
}

namespace {

// Tracks the dotted path so every error names the field.
class Reader {
public:
    Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError("field '" + label() + "' must be an object");
    }

    template <typename T>
    T required(const std::string& key) const {
        if (!j_.contains(key)) throw ConfigError("missing required field '" + at(key) + "'");
        return get<T>(key);
    }

    template <typename T>
    T optional(const std::string& key, T fallback) const {
        if (!j_.contains(key) || j_.at(key).is_null()) return fallback;
        return get<T>(key);
    }

    bool has(const std::string& key) const { return j_.contains(key); }
    Reader child(const std::string& key) const { return Reader(j_.at(key), at(key)); }
    const json& raw(const std::string& key) const { return j_.at(key); }
    std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

private:
    std::string label() const { return path_.empty() ? "<root>" : path_; }

    template <typename T>
    T get(const std::string& key) const {
        try {
            return j_.at(key).get<T>();
        } catch (const json::exception&) {
            throw ConfigError("field '" + at(key) + "' has the wrong type (got " + j_.at(key).type_name() + ")");
        }
    }

    const json& j_;
    std::string path_;
};

Vec2 read_vec2(const Reader& r, const std::string& key) {
    const auto v = r.required<std::vector<double>>(key);
    if (v.size() != 2) throw ConfigError("field '" + r.at(key) + "' must be a [x, y] pair");
    return {v[0], v[1]};
}

json vec2(Vec2 v) { return json::array({v.x, v.y}); }

std::string motion_name(Motion m) {
    switch (m) {
        case Motion::clockwise_loop: return "clockwise-loop";
        case Motion::counterclockwise_loop: return "counterclockwise-loop";
        case Motion::straight_line: return "straight-line";
    }
    return "straight-line";
}

Motion parse_motion(const std::string& s, const std::string& field) {
    if (s == "clockwise-loop") return Motion::clockwise_loop;
    if (s == "counterclockwise-loop") return Motion::counterclockwise_loop;
    if (s == "straight-line") return Motion::straight_line;
    throw ConfigError("field '" + field + "' must be clockwise-loop, counterclockwise-loop or straight-line");
}

std::string mask_kind_name(MaskKind k) {
    switch (k) {
        case MaskKind::rectangle: return "rectangle";
        case MaskKind::full: return "full";
        case MaskKind::random_blocks: return "random-blocks";
    }
    return "rectangle";
}

}  // namespace

json to_json(const SceneConfig& s) {
    json j;
    j["version"] = kConfigVersion;
    json cams = json::array();
    for (const auto& c : s.room.cameras)
        cams.push_back({{"position", vec2(c.position)},
                        {"view_direction", vec2(c.view_direction)},
                        {"field_of_view", c.field_of_view},
                        {"image_size", {c.height, c.width}}});
    json sensors = json::array();
    for (const auto& sp : s.room.sensors) sensors.push_back({{"sensor_id", sp.sensor_id}, {"position", vec2(sp.position)}});
    j["room"] = {{"width", s.room.width},   {"depth", s.room.depth},         {"cameras", cams},
                 {"sensors", sensors},     {"tx_position", vec2(s.room.tx_position)}, {"seed", s.room.seed}};
    json peds = json::array();
    for (const auto& p : s.pedestrians) {
        json w = json::array();
        for (const auto& wp : p.waypoints) w.push_back({{"time", wp.time}, {"position", vec2(wp.position)}});
        peds.push_back({{"pedestrian_id", p.pedestrian_id},
                        {"color", p.color},
                        {"motion", motion_name(p.motion)},
                        {"loop_period", p.loop_period},
                        {"waypoints", w}});
    }
    j["pedestrians"] = peds;
    const auto& c = s.channel;
    j["channel"] = {{"n_tx", c.n_tx},
                    {"n_rx", c.n_rx},
                    {"n_subcarriers", c.n_subcarriers},
                    {"carrier_wavelengths", c.carrier_wavelengths},
                    {"reflection_gain", c.reflection_gain},
                    {"noise_std", c.noise_std},
                    {"csi_rate", c.csi_rate},
                    {"camera_rate", c.camera_rate},
                    {"min_path_length", c.min_path_length},
                    {"center_frequency", c.center_frequency},
                    {"bandwidth", c.bandwidth}};
    j["style"] = {{"background", s.style.background},
                  {"body_width", s.style.body_width},
                  {"body_height", s.style.body_height},
                  {"camera_height", s.style.camera_height}};
    j["duration"] = s.duration;
    return j;
}

SceneConfig scene_from_json(const json& root) {
    const Reader r(root, "");
    if (r.optional<int>("version", kConfigVersion) != kConfigVersion)
        throw ConfigError("field 'version': unsupported scene config version");
    SceneConfig s;
    if (!r.has("room")) throw ConfigError("missing required field 'room'");
    const Reader room = r.child("room");
    s.room.width = room.required<double>("width");
    s.room.depth = room.required<double>("depth");
    s.room.tx_position = read_vec2(room, "tx_position");
    s.room.seed = room.optional<std::uint64_t>("seed", 0);
    if (!room.has("cameras")) throw ConfigError("missing required field 'room.cameras'");
    for (std::size_t i = 0; i < room.raw("cameras").size(); ++i) {
        const Reader c(room.raw("cameras")[i], room.at("cameras") + "[" + std::to_string(i) + "]");
        CameraPose cam;
        cam.position = read_vec2(c, "position");
        cam.view_direction = c.has("view_direction") ? read_vec2(c, "view_direction") : Vec2{0.0, 1.0};
        cam.field_of_view = c.optional<double>("field_of_view", cam.field_of_view);
        const auto size = c.optional<std::vector<int>>("image_size", {64, 64});
        if (size.size() != 2) throw ConfigError("field '" + c.at("image_size") + "' must be [height, width]");
        cam.height = size[0];
        cam.width = size[1];
        s.room.cameras.push_back(cam);
    }
    if (!room.has("sensors")) throw ConfigError("missing required field 'room.sensors'");
    for (std::size_t i = 0; i < room.raw("sensors").size(); ++i) {
        const Reader c(room.raw("sensors")[i], room.at("sensors") + "[" + std::to_string(i) + "]");
        s.room.sensors.push_back({c.required<int>("sensor_id"), read_vec2(c, "position")});
    }
    if (r.has("pedestrians"))
        for (std::size_t i = 0; i < r.raw("pedestrians").size(); ++i) {
            const std::string base = "pedestrians[" + std::to_string(i) + "]";
            const Reader p(r.raw("pedestrians")[i], base);
            PedestrianTrajectory t;
            t.pedestrian_id = p.optional<int>("pedestrian_id", static_cast<int>(i));
            t.color = p.optional<Rgb>("color", t.color);
            t.motion = parse_motion(p.optional<std::string>("motion", "straight-line"), p.at("motion"));
            t.loop_period = p.optional<double>("loop_period", 0.0);
            if (p.has("ellipse") || p.has("rectangle")) {
                if (t.motion == Motion::straight_line)
                    throw ConfigError("field '" + p.at("motion") + "' must be a loop for ellipse/rectangle paths");
                const double period = p.required<double>("loop_period");
                if (p.has("ellipse")) {
                    const Reader e = p.child("ellipse");
                    t = elliptical_loop(read_vec2(e, "center"), read_vec2(e, "radii"), period, t.motion,
                                        e.optional<double>("phase", 0.0), e.optional<int>("n_points", 64), t.pedestrian_id,
                                        t.color);
                } else {
                    const Reader e = p.child("rectangle");
                    t = rectangular_loop(s.room, e.required<double>("margin"), period, t.motion, t.pedestrian_id, t.color);
                }
                s.pedestrians.push_back(std::move(t));
                continue;
            }
            if (!p.has("waypoints")) throw ConfigError("missing required field '" + p.at("waypoints") + "'");
            for (std::size_t k = 0; k < p.raw("waypoints").size(); ++k) {
                const Reader w(p.raw("waypoints")[k], p.at("waypoints") + "[" + std::to_string(k) + "]");
                t.waypoints.push_back({w.required<double>("time"), read_vec2(w, "position")});
            }
            s.pedestrians.push_back(std::move(t));
        }
    if (r.has("channel")) {
        const Reader c = r.child("channel");
        auto& ch = s.channel;
        ch.n_tx = c.optional("n_tx", ch.n_tx);
        ch.n_rx = c.optional("n_rx", ch.n_rx);
        ch.n_subcarriers = c.optional("n_subcarriers", ch.n_subcarriers);
        ch.carrier_wavelengths = c.optional("carrier_wavelengths", ch.carrier_wavelengths);
        ch.reflection_gain = c.optional("reflection_gain", ch.reflection_gain);
        ch.noise_std = c.optional("noise_std", ch.noise_std);
        ch.csi_rate = c.optional("csi_rate", ch.csi_rate);
        ch.camera_rate = c.optional("camera_rate", ch.camera_rate);
        ch.min_path_length = c.optional("min_path_length", ch.min_path_length);
        ch.center_frequency = c.optional("center_frequency", ch.center_frequency);
        ch.bandwidth = c.optional("bandwidth", ch.bandwidth);
    }
    if (r.has("style")) {
        const Reader c = r.child("style");
        s.style.background = c.optional("background", s.style.background);
        s.style.body_width = c.optional("body_width", s.style.body_width);
        s.style.body_height = c.optional("body_height", s.style.body_height);
        s.style.camera_height = c.optional("camera_height", s.style.camera_height);
    }
    s.duration = r.required<double>("duration");
    s.room.validate();
    s.channel.validate();
    for (const auto& p : s.pedestrians) p.validate(s.room);
    return s;
}

json to_json(const ModelConfig& m) {
    return {{"image_size", {m.image_height, m.image_width}},
            {"patch_size", m.patch_size},
            {"embed_dim", m.embed_dim},
            {"n_heads", m.n_heads},
            {"n_layers_img", m.n_layers_img},
            {"n_layers_csi", m.n_layers_csi},
            {"attn_window", m.attn_window},
            {"mlp_ratio", m.mlp_ratio},
            {"csi_feature_dim", m.csi_feature_dim},
            {"n_sensors", m.n_sensors},
            {"l_img", m.l_img},
            {"l_csi", m.l_csi},
            {"csi_patch_len", m.csi_patch_len},
            {"reduced_img_dim", m.reduced_img_dim},
            {"reduced_csi_dim", m.reduced_csi_dim},
            {"decoder_channels", m.decoder_channels}};
}

ModelConfig model_config_from_json(const json& j) {
    const Reader r(j, "model");
    ModelConfig m;
    const auto size = r.optional<std::vector<int>>("image_size", {m.image_height, m.image_width});
    if (size.size() != 2) throw ConfigError("field 'model.image_size' must be [height, width]");
    m.image_height = size[0];
    m.image_width = size[1];
    m.patch_size = r.optional("patch_size", m.patch_size);
    m.embed_dim = r.optional("embed_dim", m.embed_dim);
    m.n_heads = r.optional("n_heads", m.n_heads);
    m.n_layers_img = r.optional("n_layers_img", m.n_layers_img);
    m.n_layers_csi = r.optional("n_layers_csi", m.n_layers_csi);
    m.attn_window = r.optional("attn_window", m.attn_window);
    m.mlp_ratio = r.optional("mlp_ratio", m.mlp_ratio);
    m.csi_feature_dim = r.optional("csi_feature_dim", m.csi_feature_dim);
    m.n_sensors = r.optional("n_sensors", m.n_sensors);
    m.l_img = r.optional("l_img", m.l_img);
    m.l_csi = r.optional("l_csi", m.l_csi);
    m.csi_patch_len = r.optional("csi_patch_len", m.csi_patch_len);
    m.reduced_img_dim = r.optional("reduced_img_dim", m.reduced_img_dim);
    m.reduced_csi_dim = r.optional("reduced_csi_dim", m.reduced_csi_dim);
    m.decoder_channels = r.optional("decoder_channels", m.decoder_channels);
    return m;
}

json to_json(const MaskSpec& m) {
    return {{"kind", mask_kind_name(m.kind)},
            {"coverage", m.coverage},
            {"fill_value", m.fill_value},
            {"seed", m.seed},
            {"per_frame", m.per_frame}};
}

MaskSpec mask_from_json(const json& j) {
    const Reader r(j, "mask");
    MaskSpec m;
    const auto kind = r.optional<std::string>("kind", "rectangle");
    if (kind == "rectangle") m.kind = MaskKind::rectangle;
    else if (kind == "full") m.kind = MaskKind::full;
    else if (kind == "random-blocks") m.kind = MaskKind::random_blocks;
    else throw ConfigError("field 'mask.kind' must be rectangle, full or random-blocks");
    m.coverage = r.optional("coverage", m.coverage);
    m.fill_value = r.optional("fill_value", m.fill_value);
    m.seed = r.optional<std::uint64_t>("seed", m.seed);
    m.per_frame = r.optional("per_frame", m.per_frame);
    m.validate();
    return m;
}

json to_json(const PipelineConfig& c) {
    json j;
    j["version"] = c.version;
    j["camera_id"] = c.camera_id;
    j["sensors"] = c.sensors;
    j["windows"] = {{"l_img", c.windows.l_img}, {"l_csi", c.windows.l_csi}, {"stride", c.windows.stride}};
    j["mask"] = to_json(c.mask);
    j["preprocess"] = {{"variance_floor", c.preprocess.variance_floor},
                       {"pca_k", c.preprocess.pca_k ? json(*c.preprocess.pca_k) : json(nullptr)}};
    j["model"] = to_json(c.model);
    j["training"] = {{"epochs", c.training.epochs},
                     {"batch_size", c.training.batch_size},
                     {"learning_rate", c.training.learning_rate},
                     {"cosine_decay", c.training.cosine_decay},
                     {"ssim_weight", c.training.ssim_weight},
                     {"grad_clip", c.training.grad_clip},
                     {"seed", c.training.seed}};
    j["split"] = {{"train", c.split.train}, {"val", c.split.val}};
    j["seed"] = c.seed;
    return j;
}

PipelineConfig pipeline_from_json(const json& j) {
    const Reader r(j, "");
    PipelineConfig c;
    c.version = r.optional("version", kConfigVersion);
    if (c.version != kConfigVersion) throw ConfigError("field 'version': unsupported config version " + std::to_string(c.version));
    c.camera_id = r.optional("camera_id", c.camera_id);
    c.sensors = r.optional("sensors", c.sensors);
    c.seed = r.optional<std::uint64_t>("seed", c.seed);
    if (r.has("windows")) {
        const Reader w = r.child("windows");
        c.windows.l_img = w.optional("l_img", c.windows.l_img);
        c.windows.l_csi = w.optional("l_csi", c.windows.l_csi);
        c.windows.stride = w.optional("stride", c.windows.stride);
    }
    if (r.has("mask")) c.mask = mask_from_json(r.raw("mask"));
    if (!r.has("mask") || !r.raw("mask").contains("seed")) c.mask.seed = c.seed;
    if (r.has("preprocess")) {
        const Reader p = r.child("preprocess");
        c.preprocess.variance_floor = p.optional("variance_floor", c.preprocess.variance_floor);
        if (p.has("pca_k")) {
            const auto& v = p.raw("pca_k");
            if (v.is_null() || (v.is_string() && v.get<std::string>() == "none")) c.preprocess.pca_k.reset();
            else c.preprocess.pca_k = p.required<int>("pca_k");
        }
    }
    if (r.has("model")) c.model = model_config_from_json(r.raw("model"));
    if (r.has("training")) {
        const Reader t = r.child("training");
        c.training.epochs = t.optional("epochs", c.training.epochs);
        c.training.batch_size = t.optional("batch_size", c.training.batch_size);
        c.training.learning_rate = t.optional("learning_rate", c.training.learning_rate);
        c.training.cosine_decay = t.optional("cosine_decay", c.training.cosine_decay);
        c.training.ssim_weight = t.optional("ssim_weight", c.training.ssim_weight);
        c.training.grad_clip = t.optional("grad_clip", c.training.grad_clip);
        c.training.seed = t.optional<std::uint64_t>("seed", c.seed);
    } else {
        c.training.seed = c.seed;
    }
    if (r.has("split")) {
        const Reader s = r.child("split");
        c.split.train = s.optional("train", c.split.train);
        c.split.val = s.optional("val", c.split.val);
    }
    if (!(c.split.train > 0.0) || c.split.val < 0.0 || c.split.train + c.split.val > 1.0)
        throw ConfigError("field 'split': fractions must satisfy train > 0, val >= 0, train + val <= 1");
    // Window lengths drive the model's temporal shape.
    c.model.l_img = c.windows.l_img;
    c.model.l_csi = c.windows.l_csi;
    c.training.validate();
    return c;
}

json read_json_file(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open " + path.string());
    std::stringstream buf;
    buf << is.rdbuf();
    const std::string text = buf.str();
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        std::size_t line = 1, col = 1;
        for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
            if (text[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
        throw ConfigError(path.string() + ":" + std::to_string(line) + ":" + std::to_string(col) + ": invalid JSON (" +
                          e.what() + ")");
    }
}

std::string config_hash(const json& resolved) { return hex64(fnv1a(resolved.dump())); }

}  // namespace csi_inpaint
