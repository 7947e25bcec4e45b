#include "csi_inpaint/dataset_io.hpp"

#include <algorithm>
#include <bit>
#include <fstream>
#include <sstream>

#include "csi_inpaint/common.hpp"

namespace csi_inpaint {

static_assert(std::endian::native == std::endian::little, "binary streams are written in native little-endian order");

namespace fs = std::filesystem;

std::span<const float> ImageSequence::frame(std::size_t i) const {
    return {frames.data() + i * frame_elements(), frame_elements()};
}

std::span<const std::complex<float>> CsiSequence::frame(std::size_t i) const {
    return {values.data() + i * frame_elements(), frame_elements()};
}

namespace {

void check_increasing(const std::vector<double>& ts, const std::string& what) {
    for (std::size_t i = 1; i < ts.size(); ++i)
        if (!(ts[i] > ts[i - 1])) throw ConfigError(what + " timestamps must be strictly increasing (index " + std::to_string(i) + ")");
}

}  // namespace

void ImageSequence::validate() const {
    check_increasing(timestamps, "camera " + std::to_string(camera_id));
    if (frames.size() != size() * frame_elements())
        throw ConfigError("camera " + std::to_string(camera_id) + " frame tensor does not match timestamp count");
}

void CsiSequence::validate() const {
    check_increasing(timestamps, "sensor " + std::to_string(sensor_id));
    if (values.size() != size() * frame_elements())
        throw ConfigError("sensor " + std::to_string(sensor_id) + " value tensor does not match timestamp count");
}

nlohmann::json DatasetManifest::to_json() const {
    nlohmann::json j;
    j["version"] = version;
    j["duration"] = duration;
    j["camera_rate"] = camera_rate;
    j["csi_rate"] = csi_rate;
    j["seed"] = seed;
    j["byte_order"] = "little";
    j["element_types"] = {{"image", "float32"}, {"csi", "complex64 as interleaved float32 (real, imag)"}, {"timestamps", "float64"}};
    j["cameras"] = nlohmann::json::array();
    for (const auto& c : cameras)
        j["cameras"].push_back({{"camera_id", c.camera_id},
                                {"frames", c.frames},
                                {"shape", {c.frames, c.height, c.width, 3}},
                                {"height", c.height},
                                {"width", c.width},
                                {"image_file", c.image_file},
                                {"timestamp_file", c.timestamp_file}});
    j["sensors"] = nlohmann::json::array();
    for (const auto& s : sensors)
        j["sensors"].push_back({{"sensor_id", s.sensor_id},
                                {"frames", s.frames},
                                {"shape", {s.frames, s.n_tx, s.n_rx, s.n_subcarriers}},
                                {"n_tx", s.n_tx},
                                {"n_rx", s.n_rx},
                                {"n_subcarriers", s.n_subcarriers},
                                {"csi_file", s.csi_file},
                                {"timestamp_file", s.timestamp_file}});
    j["scene"] = scene;
    return j;
}

DatasetManifest DatasetManifest::from_json(const nlohmann::json& j) {
    DatasetManifest m;
    try {
        m.version = j.at("version").get<int>();
        if (m.version != kManifestVersion)
            throw CorruptionError("unsupported manifest version " + std::to_string(m.version) + " (expected " +
                                  std::to_string(kManifestVersion) + ")");
        m.duration = j.at("duration").get<double>();
        m.camera_rate = j.at("camera_rate").get<double>();
        m.csi_rate = j.at("csi_rate").get<double>();
        m.seed = j.at("seed").get<std::uint64_t>();
        for (const auto& c : j.at("cameras"))
            m.cameras.push_back({c.at("camera_id").get<int>(), c.at("frames").get<std::size_t>(), c.at("height").get<int>(),
                                 c.at("width").get<int>(), c.at("image_file").get<std::string>(),
                                 c.at("timestamp_file").get<std::string>()});
        for (const auto& s : j.at("sensors"))
            m.sensors.push_back({s.at("sensor_id").get<int>(), s.at("frames").get<std::size_t>(), s.at("n_tx").get<int>(),
                                 s.at("n_rx").get<int>(), s.at("n_subcarriers").get<int>(),
                                 s.at("csi_file").get<std::string>(), s.at("timestamp_file").get<std::string>()});
        m.scene = j.value("scene", nlohmann::json::object());
    } catch (const nlohmann::json::exception& e) {
        throw CorruptionError(std::string("manifest.json is not schema-valid: ") + e.what());
    }
    return m;
}

const CsiSequence& Dataset::sensor(int sensor_id) const {
    for (const auto& s : csi)
        if (s.sensor_id == sensor_id) return s;
    throw ConfigError("dataset has no sensor " + std::to_string(sensor_id));
}

namespace {

template <typename T>
void write_raw(const fs::path& path, const std::vector<T>& data) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open " + path.string() + " for writing");
    os.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size() * sizeof(T)));
    if (!os) throw IoError("write failed for " + path.string());
}

template <typename T>
std::vector<T> read_raw(const fs::path& path, std::size_t expected_elements) {
    std::error_code ec;
    const auto bytes = fs::file_size(path, ec);
    if (ec) throw IoError("cannot stat " + path.string() + ": " + ec.message());
    const std::size_t expected_bytes = expected_elements * sizeof(T);
    if (bytes != expected_bytes)
        throw CorruptionError(path.string() + " holds " + std::to_string(bytes) + " bytes but the manifest implies " +
                              std::to_string(expected_bytes));
    std::vector<T> out(expected_elements);
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path.string());
    is.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(expected_bytes));
    if (!is) throw IoError("read failed for " + path.string());
    return out;
}

}  // namespace

DatasetManifest save_dataset(const fs::path& dir, const std::vector<ImageSequence>& images,
                             const std::vector<CsiSequence>& csi, DatasetManifest manifest) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
    manifest.cameras.clear();
    manifest.sensors.clear();
    for (const auto& seq : images) {
        seq.validate();
        CameraStreamInfo info{seq.camera_id, seq.size(), seq.height, seq.width,
                              "camera" + std::to_string(seq.camera_id) + ".img",
                              "camera" + std::to_string(seq.camera_id) + ".ts"};
        write_raw(dir / info.image_file, seq.frames);
        write_raw(dir / info.timestamp_file, seq.timestamps);
        manifest.cameras.push_back(std::move(info));
    }
    for (const auto& seq : csi) {
        seq.validate();
        SensorStreamInfo info{seq.sensor_id, seq.size(), seq.n_tx, seq.n_rx, seq.n_subcarriers,
                              "sensor" + std::to_string(seq.sensor_id) + ".csi",
                              "sensor" + std::to_string(seq.sensor_id) + ".ts"};
        write_raw(dir / info.csi_file, seq.values);
        write_raw(dir / info.timestamp_file, seq.timestamps);
        manifest.sensors.push_back(std::move(info));
    }
    const fs::path mpath = dir / "manifest.json";
    std::ofstream os(mpath, std::ios::trunc);
    if (!os) throw IoError("cannot open " + mpath.string() + " for writing");
    os << manifest.to_json().dump(2) << "\n";
    if (!os) throw IoError("write failed for " + mpath.string());
    return manifest;
}

Dataset load_dataset(const fs::path& dir) {
    const fs::path mpath = dir / "manifest.json";
    std::ifstream is(mpath);
    if (!is) throw IoError("cannot open " + mpath.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(is);
    } catch (const nlohmann::json::parse_error& e) {
        throw CorruptionError(mpath.string() + " is not valid JSON: " + e.what());
    }
    Dataset ds;
    ds.manifest = DatasetManifest::from_json(j);
    for (const auto& c : ds.manifest.cameras) {
        ImageSequence seq;
        seq.camera_id = c.camera_id;
        seq.height = c.height;
        seq.width = c.width;
        seq.frames = read_raw<float>(dir / c.image_file, c.frames * seq.frame_elements());
        seq.timestamps = read_raw<double>(dir / c.timestamp_file, c.frames);
        ds.images.push_back(std::move(seq));
    }
    for (const auto& s : ds.manifest.sensors) {
        CsiSequence seq;
        seq.sensor_id = s.sensor_id;
        seq.n_tx = s.n_tx;
        seq.n_rx = s.n_rx;
        seq.n_subcarriers = s.n_subcarriers;
        seq.values = read_raw<std::complex<float>>(dir / s.csi_file, s.frames * seq.frame_elements());
        seq.timestamps = read_raw<double>(dir / s.timestamp_file, s.frames);
        ds.csi.push_back(std::move(seq));
    }
    return ds;
}

CsiSequence load_csi_csv(const fs::path& path, int sensor_id, int n_tx, int n_rx, int n_subcarriers) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open " + path.string());
    CsiSequence seq;
    seq.sensor_id = sensor_id;
    seq.n_tx = n_tx;
    seq.n_rx = n_rx;
    seq.n_subcarriers = n_subcarriers;
    const std::size_t expected = 1 + 2 * seq.frame_elements();
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream fields(line);
        std::vector<double> row;
        double v = 0.0;
        while (fields >> v) row.push_back(v);
        if (!fields.eof())
            throw CorruptionError(path.string() + ":" + std::to_string(line_no) + ": non-numeric field");
        if (row.size() != expected)
            throw CorruptionError(path.string() + ":" + std::to_string(line_no) + ": expected " + std::to_string(expected) +
                                  " fields, found " + std::to_string(row.size()));
        seq.timestamps.push_back(row[0]);
        for (std::size_t i = 1; i < row.size(); i += 2)
            seq.values.emplace_back(static_cast<float>(row[i]), static_cast<float>(row[i + 1]));
    }
    try {
        seq.validate();
    } catch (const ConfigError& e) {
        throw CorruptionError(path.string() + ": " + e.what());
    }
    return seq;
}

std::vector<std::size_t> isochronize(std::span<const double> image_ts, std::span<const double> csi_ts) {
    if (image_ts.empty() || csi_ts.empty()) throw ConfigError("isochronize needs non-empty timestamp lists");
    std::vector<std::size_t> out;
    out.reserve(image_ts.size());
    for (double t : image_ts) {
        // First CSI timestamp >= t; the nearest is it or its predecessor.
        const auto it = std::lower_bound(csi_ts.begin(), csi_ts.end(), t);
        if (it == csi_ts.end()) {
            out.push_back(static_cast<std::size_t>(std::lower_bound(csi_ts.begin(), csi_ts.end(), csi_ts.back()) - csi_ts.begin()));
        } else if (it == csi_ts.begin() || *it - t < t - *(it - 1)) {
            out.push_back(static_cast<std::size_t>(it - csi_ts.begin()));
        } else {
            // Repeated timestamps resolve to their first occurrence.
            out.push_back(static_cast<std::size_t>(std::lower_bound(csi_ts.begin(), it, *(it - 1)) - csi_ts.begin()));
        }
    }
    return out;
}

std::vector<WindowPlan> plan_windows(const ImageSequence& images, std::span<const CsiSequence> csi, const WindowSpec& spec) {
    if (spec.l_img < 1 || spec.l_csi < 1 || spec.stride < 1) throw ConfigError("window lengths and stride must be at least 1");
    if (csi.empty()) throw ConfigError("windowing needs at least one CSI sequence");
    std::vector<std::vector<std::size_t>> maps;
    for (const auto& s : csi) {
        if (static_cast<std::size_t>(spec.l_csi) > s.size())
            throw ConfigError("L_csi = " + std::to_string(spec.l_csi) + " exceeds the " + std::to_string(s.size()) +
                              "-frame CSI sequence of sensor " + std::to_string(s.sensor_id));
        maps.push_back(isochronize(images.timestamps, s.timestamps));
    }
    std::vector<WindowPlan> plans;
    const auto l_img = static_cast<std::size_t>(spec.l_img);
    for (std::size_t begin = 0; begin + l_img <= images.size(); begin += static_cast<std::size_t>(spec.stride)) {
        WindowPlan plan;
        plan.image_begin = begin;
        bool underflow = false;
        for (std::size_t s = 0; s < csi.size(); ++s) {
            const std::size_t end = maps[s][begin + l_img - 1];
            if (end + 1 < static_cast<std::size_t>(spec.l_csi)) {
                underflow = true;
                break;
            }
            SensorWindow w;
            w.sensor_id = csi[s].sensor_id;
            w.csi_begin = end + 1 - static_cast<std::size_t>(spec.l_csi);
            for (std::size_t i = begin; i < begin + l_img; ++i) w.alignment.emplace_back(i, maps[s][i]);
            plan.sensors.push_back(std::move(w));
        }
        if (!underflow) plans.push_back(std::move(plan));
    }
    return plans;
}

SyncedSample make_sample(const WindowPlan& plan, const ImageSequence& images, std::span<const CsiSequence> csi,
                         const WindowSpec& spec) {
    SyncedSample s;
    s.l_img = spec.l_img;
    s.l_csi = spec.l_csi;
    s.height = images.height;
    s.width = images.width;
    const std::size_t fe = images.frame_elements();
    const auto first = images.frames.begin() + static_cast<std::ptrdiff_t>(plan.image_begin * fe);
    s.gt_window.assign(first, first + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(spec.l_img) * fe));
    s.defective_window = s.gt_window;
    s.mask_window.assign(static_cast<std::size_t>(spec.l_img) * images.height * images.width, 0);
    s.n_tx = csi.front().n_tx;
    s.n_rx = csi.front().n_rx;
    s.n_subcarriers = csi.front().n_subcarriers;
    for (std::size_t k = 0; k < csi.size(); ++k) {
        const auto& seq = csi[k];
        if (seq.frame_elements() != csi.front().frame_elements())
            throw ConfigError("all sensors in a sample must share one CSI frame shape");
        const std::size_t ce = seq.frame_elements();
        const auto b = seq.values.begin() + static_cast<std::ptrdiff_t>(plan.sensors[k].csi_begin * ce);
        s.csi_windows.emplace_back(b, b + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(spec.l_csi) * ce));
        s.sensor_ids.push_back(seq.sensor_id);
    }
    s.plan = plan;
    return s;
}

std::vector<SyncedSample> window_samples(const ImageSequence& images, std::span<const CsiSequence> csi,
                                         const WindowSpec& spec) {
    std::vector<SyncedSample> out;
    for (const auto& plan : plan_windows(images, csi, spec)) out.push_back(make_sample(plan, images, csi, spec));
    return out;
}

std::vector<CsiSequence> select_sensors(const Dataset& dataset, std::span<const int> sensor_ids) {
    std::vector<CsiSequence> out;
    for (int id : sensor_ids) out.push_back(dataset.sensor(id));
    return out;
}

}  // namespace csi_inpaint
