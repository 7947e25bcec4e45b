#include "csi_inpaint/scene_sim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <sstream>

#include "csi_inpaint/config.hpp"
#include "csi_inpaint/dataset_io.hpp"

namespace csi_inpaint {

namespace {

constexpr double kSpeedOfLight = 299792458.0;
constexpr double kPositionTolerance = 1e-9;

std::string fmt_pos(Vec2 p) {
    std::ostringstream os;
    os << "(" << p.x << ", " << p.y << ")";
    return os.str();
}

// Twice the signed polygon area; negative for clockwise in x-right/y-up axes.
double signed_area2(const std::vector<Waypoint>& w) {
    double s = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        const Vec2 a = w[i].position;
        const Vec2 b = w[(i + 1) % w.size()].position;
        s += a.x * b.y - b.x * a.y;
    }
    return s;
}

Vec2 lerp(Vec2 a, Vec2 b, double u) { return a + u * (b - a); }

}  // namespace

bool RoomConfig::contains(Vec2 p) const {
    return p.x >= -kPositionTolerance && p.x <= width + kPositionTolerance && p.y >= -kPositionTolerance &&
           p.y <= depth + kPositionTolerance;
}

const SensorPose& RoomConfig::sensor(int sensor_id) const {
    for (const auto& s : sensors) {
        if (s.sensor_id == sensor_id) return s;
    }
    throw ConfigError("unknown sensor id " + std::to_string(sensor_id));
}

void RoomConfig::validate() const {
    if (!(width > 0.0) || !(depth > 0.0)) throw ConfigError("room width and depth must be positive");
    if (cameras.empty()) throw ConfigError("room needs at least one camera");
    if (sensors.empty()) throw ConfigError("room needs at least one sensor");
    if (!contains(tx_position)) throw ConfigError("transmitter " + fmt_pos(tx_position) + " lies outside the room");
    for (std::size_t i = 0; i < cameras.size(); ++i) {
        const auto& c = cameras[i];
        if (!contains(c.position))
            throw ConfigError("camera " + std::to_string(i) + " at " + fmt_pos(c.position) + " lies outside the room");
        if (!(c.field_of_view > 0.0) || !(c.field_of_view < std::numbers::pi))
            throw ConfigError("camera " + std::to_string(i) + " field_of_view must lie in (0, pi)");
        if (c.height <= 0 || c.width <= 0) throw ConfigError("camera " + std::to_string(i) + " image size must be positive");
        if (std::abs(norm(c.view_direction) - 1.0) > 1e-6)
            throw ConfigError("camera " + std::to_string(i) + " view_direction must be a unit vector");
    }
    std::set<int> ids;
    for (const auto& s : sensors) {
        if (!ids.insert(s.sensor_id).second) throw ConfigError("duplicate sensor id " + std::to_string(s.sensor_id));
        if (!contains(s.position))
            throw ConfigError("sensor " + std::to_string(s.sensor_id) + " at " + fmt_pos(s.position) +
                              " lies outside the room");
    }
}

void PedestrianTrajectory::validate(const RoomConfig& room) const {
    const std::string who = "pedestrian " + std::to_string(pedestrian_id);
    if (waypoints.empty()) throw ConfigError(who + " has no waypoints");
    for (std::size_t i = 0; i < waypoints.size(); ++i) {
        if (!room.contains(waypoints[i].position))
            throw ConfigError(who + " waypoint " + std::to_string(i) + " at " + fmt_pos(waypoints[i].position) +
                              " lies outside the " + std::to_string(room.width) + " x " + std::to_string(room.depth) +
                              " room");
        if (i > 0 && !(waypoints[i].time > waypoints[i - 1].time))
            throw ConfigError(who + " waypoint times must be strictly increasing (index " + std::to_string(i) + ")");
    }
    if (motion != Motion::straight_line) {
        if (waypoints.front().time != 0.0) throw ConfigError(who + " loop must start at time 0");
        if (!(loop_period > waypoints.back().time))
            throw ConfigError(who + " loop_period must exceed the last waypoint time");
        if (waypoints.size() >= 3) {
            const double area = signed_area2(waypoints);
            if (motion == Motion::clockwise_loop && area > 0)
                throw ConfigError(who + " is declared clockwise but its waypoints run counterclockwise");
            if (motion == Motion::counterclockwise_loop && area < 0)
                throw ConfigError(who + " is declared counterclockwise but its waypoints run clockwise");
        }
    }
}

Vec2 PedestrianTrajectory::position_at(double t) const {
    if (waypoints.size() == 1) return waypoints.front().position;
    if (motion != Motion::straight_line) {
        t = std::fmod(t, loop_period);
        if (t < 0) t += loop_period;
        const Waypoint& last = waypoints.back();
        if (t >= last.time) {
            const double u = (t - last.time) / (loop_period - last.time);
            return lerp(last.position, waypoints.front().position, u);
        }
    }
    if (t <= waypoints.front().time) return waypoints.front().position;
    if (t >= waypoints.back().time) return waypoints.back().position;
    const auto it = std::upper_bound(waypoints.begin(), waypoints.end(), t,
                                     [](double v, const Waypoint& w) { return v < w.time; });
    const Waypoint& b = *it;
    const Waypoint& a = *(it - 1);
    return lerp(a.position, b.position, (t - a.time) / (b.time - a.time));
}

namespace {

PedestrianTrajectory loop_from_vertices(std::vector<Vec2> vertices, double period, Motion direction, int id, Rgb color) {
    double total = 0.0;
    for (std::size_t i = 0; i < vertices.size(); ++i) total += distance(vertices[i], vertices[(i + 1) % vertices.size()]);
    PedestrianTrajectory tr;
    tr.pedestrian_id = id;
    tr.color = color;
    tr.motion = direction;
    tr.loop_period = period;
    double acc = 0.0;
    for (std::size_t i = 0; i < vertices.size(); ++i) {
        tr.waypoints.push_back({period * acc / total, vertices[i]});
        acc += distance(vertices[i], vertices[(i + 1) % vertices.size()]);
    }
    return tr;
}

}  // namespace

PedestrianTrajectory rectangular_loop(const RoomConfig& room, double margin, double period, Motion direction,
                                      int pedestrian_id, Rgb color) {
    if (direction == Motion::straight_line) throw ConfigError("rectangular_loop needs a loop motion");
    const double x0 = margin, x1 = room.width - margin, y0 = margin, y1 = room.depth - margin;
    std::vector<Vec2> v = {{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}};  // counterclockwise
    if (direction == Motion::clockwise_loop) std::reverse(v.begin() + 1, v.end());
    return loop_from_vertices(std::move(v), period, direction, pedestrian_id, color);
}

PedestrianTrajectory elliptical_loop(Vec2 center, Vec2 radii, double period, Motion direction, double phase,
                                     int n_points, int pedestrian_id, Rgb color) {
    if (direction == Motion::straight_line) throw ConfigError("elliptical_loop needs a loop motion");
    const double sign = direction == Motion::counterclockwise_loop ? 1.0 : -1.0;
    std::vector<Vec2> v;
    for (int i = 0; i < n_points; ++i) {
        const double a = phase + sign * 2.0 * std::numbers::pi * i / n_points;
        v.push_back({center.x + radii.x * std::cos(a), center.y + radii.y * std::sin(a)});
    }
    return loop_from_vertices(std::move(v), period, direction, pedestrian_id, color);
}

std::vector<Vec2> generate_trajectory(const PedestrianTrajectory& trajectory, double duration, double rate) {
    if (!(duration > 0.0)) throw ConfigError("trajectory duration must be positive");
    if (!(rate > 0.0)) throw ConfigError("trajectory rate must be positive");
    const auto n = static_cast<std::size_t>(std::llround(duration * rate));
    std::vector<Vec2> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(trajectory.position_at(static_cast<double>(i) / rate));
    return out;
}

void ChannelParams::validate() const {
    if (n_tx < 1 || n_rx < 1) throw ConfigError("n_tx and n_rx must be at least 1");
    if (n_subcarriers < 1) throw ConfigError("n_subcarriers must be at least 1");
    if (!carrier_wavelengths.empty() && carrier_wavelengths.size() != static_cast<std::size_t>(n_subcarriers))
        throw ConfigError("carrier_wavelengths must list one wavelength per subcarrier");
    if (!(csi_rate > camera_rate)) throw ConfigError("csi_rate must exceed camera_rate");
    if (!(camera_rate > 0.0)) throw ConfigError("camera_rate must be positive");
    if (!(noise_std >= 0.0)) throw ConfigError("noise_std must be non-negative");
    if (!(min_path_length > 0.0)) throw ConfigError("min_path_length must be positive");
}

std::vector<double> ChannelParams::wavelengths() const {
    if (!carrier_wavelengths.empty()) return carrier_wavelengths;
    std::vector<double> out(static_cast<std::size_t>(n_subcarriers));
    for (int k = 0; k < n_subcarriers; ++k) {
        const double frac = n_subcarriers == 1 ? 0.5 : static_cast<double>(k) / (n_subcarriers - 1);
        out[static_cast<std::size_t>(k)] = kSpeedOfLight / (center_frequency + bandwidth * (frac - 0.5));
    }
    return out;
}

ScreenRect project_pedestrian(const CameraPose& camera, Vec2 position, const RenderStyle& style) {
    ScreenRect r;
    const Vec2 rel = position - camera.position;
    const Vec2 right{camera.view_direction.y, -camera.view_direction.x};
    const double z = dot(rel, camera.view_direction);
    const double x = dot(rel, right);
    const double half_tan = std::tan(camera.field_of_view / 2.0);
    if (z <= style.near_plane || std::abs(x / z) > half_tan) return r;
    const double focal = (camera.width / 2.0) / half_tan;
    const double u = camera.width / 2.0 + focal * x / z;
    const double half_w = focal * style.body_width / (2.0 * z);
    r.left = u - half_w;
    r.right = u + half_w;
    r.top = camera.height / 2.0 - focal * (style.body_height - style.camera_height) / z;
    r.bottom = camera.height / 2.0 + focal * style.camera_height / z;
    r.depth = z;
    r.visible = true;
    return r;
}

namespace {

// Pixel (row, col) is covered when its center lies inside the rectangle.
template <typename F>
void for_each_covered(const ScreenRect& r, int height, int width, F&& f) {
    if (!r.visible) return;
    const int c0 = std::max(0, static_cast<int>(std::ceil(r.left - 0.5)));
    const int c1 = std::min(width, static_cast<int>(std::ceil(r.right - 0.5)));
    const int r0 = std::max(0, static_cast<int>(std::ceil(r.top - 0.5)));
    const int r1 = std::min(height, static_cast<int>(std::ceil(r.bottom - 0.5)));
    for (int y = r0; y < r1; ++y)
        for (int x = c0; x < c1; ++x) f(y, x);
}

}  // namespace

ImageFrame render_frame(const RoomConfig& room, std::size_t camera_index, std::span<const PedestrianState> pedestrians,
                        const RenderStyle& style) {
    if (camera_index >= room.cameras.size()) throw ConfigError("camera index out of range");
    const CameraPose& cam = room.cameras[camera_index];
    ImageFrame frame;
    frame.height = cam.height;
    frame.width = cam.width;
    frame.pixels.resize(static_cast<std::size_t>(cam.height) * cam.width * 3);
    for (std::size_t i = 0; i < frame.pixels.size(); i += 3)
        std::copy(style.background.begin(), style.background.end(), frame.pixels.begin() + static_cast<std::ptrdiff_t>(i));

    std::vector<std::pair<ScreenRect, Rgb>> visible;
    for (const auto& p : pedestrians) {
        ScreenRect r = project_pedestrian(cam, p.position, style);
        if (r.visible) visible.emplace_back(r, p.color);
    }
    // Painter's order: farthest first.
    std::stable_sort(visible.begin(), visible.end(),
                     [](const auto& a, const auto& b) { return a.first.depth > b.first.depth; });
    for (const auto& [rect, color] : visible) {
        for_each_covered(rect, cam.height, cam.width, [&](int y, int x) {
            float* px = &frame.pixels[(static_cast<std::size_t>(y) * cam.width + x) * 3];
            px[0] = color[0];
            px[1] = color[1];
            px[2] = color[2];
        });
    }
    return frame;
}

std::vector<std::uint8_t> pedestrian_footprint(const CameraPose& camera, Vec2 position, const RenderStyle& style) {
    std::vector<std::uint8_t> out(static_cast<std::size_t>(camera.height) * camera.width, 0);
    for_each_covered(project_pedestrian(camera, position, style), camera.height, camera.width,
                     [&](int y, int x) { out[static_cast<std::size_t>(y) * camera.width + x] = 1; });
    return out;
}

CsiFrame synth_csi_frame(const RoomConfig& room, int sensor_id, std::span<const PedestrianState> pedestrians,
                         const ChannelParams& params, std::mt19937_64& rng) {
    const SensorPose& sensor = room.sensor(sensor_id);
    const std::vector<double> lambdas = params.wavelengths();
    const double center_lambda = kSpeedOfLight / params.center_frequency;
    const double spacing = center_lambda / 2.0;
    const auto clamp_len = [&](double d) { return std::max(d, params.min_path_length); };

    CsiFrame f;
    f.n_tx = params.n_tx;
    f.n_rx = params.n_rx;
    f.n_subcarriers = params.n_subcarriers;
    f.values.resize(static_cast<std::size_t>(params.n_tx) * params.n_rx * params.n_subcarriers);

    std::normal_distribution<double> gauss(0.0, params.noise_std / std::numbers::sqrt2);
    std::size_t idx = 0;
    for (int t = 0; t < params.n_tx; ++t) {
        const Vec2 tx = room.tx_position + Vec2{(t - (params.n_tx - 1) / 2.0) * spacing, 0.0};
        for (int r = 0; r < params.n_rx; ++r) {
            const Vec2 rx = sensor.position + Vec2{(r - (params.n_rx - 1) / 2.0) * spacing, 0.0};
            const double d0 = clamp_len(distance(tx, rx));
            for (int k = 0; k < params.n_subcarriers; ++k) {
                const double wavenumber = 2.0 * std::numbers::pi / lambdas[static_cast<std::size_t>(k)];
                std::complex<double> h = std::polar(1.0 / d0, -wavenumber * d0);
                for (const auto& p : pedestrians) {
                    const double d1 = clamp_len(distance(tx, p.position));
                    const double d2 = clamp_len(distance(p.position, rx));
                    h += std::polar(params.reflection_gain / (d1 * d2), -wavenumber * (d1 + d2));
                }
                if (params.noise_std > 0.0) h += std::complex<double>(gauss(rng), gauss(rng));
                f.values[idx++] = std::complex<float>(h);
            }
        }
    }
    return f;
}

std::vector<PedestrianState> pedestrian_states_at(std::span<const PedestrianTrajectory> pedestrians, double t) {
    std::vector<PedestrianState> out;
    out.reserve(pedestrians.size());
    for (const auto& p : pedestrians) out.push_back({p.position_at(t), p.color});
    return out;
}

DatasetManifest generate_dataset(const SceneConfig& scene, const std::filesystem::path& out_dir) {
    scene.room.validate();
    scene.channel.validate();
    for (const auto& p : scene.pedestrians) p.validate(scene.room);
    if (!(scene.duration > 0.0)) throw ConfigError("duration must be positive");

    const auto& ch = scene.channel;
    const auto n_img = static_cast<std::size_t>(std::llround(scene.duration * ch.camera_rate));
    const auto n_csi = static_cast<std::size_t>(std::llround(scene.duration * ch.csi_rate));

    std::vector<ImageSequence> images;
    for (std::size_t c = 0; c < scene.room.cameras.size(); ++c) {
        const auto& cam = scene.room.cameras[c];
        ImageSequence seq;
        seq.camera_id = static_cast<int>(c);
        seq.height = cam.height;
        seq.width = cam.width;
        seq.timestamps.resize(n_img);
        seq.frames.reserve(n_img * seq.frame_elements());
        for (std::size_t i = 0; i < n_img; ++i) {
            const double t = static_cast<double>(i) / ch.camera_rate;
            seq.timestamps[i] = t;
            const auto states = pedestrian_states_at(scene.pedestrians, t);
            const ImageFrame frame = render_frame(scene.room, c, states, scene.style);
            seq.frames.insert(seq.frames.end(), frame.pixels.begin(), frame.pixels.end());
        }
        images.push_back(std::move(seq));
    }

    std::vector<CsiSequence> csi;
    for (const auto& sensor : scene.room.sensors) {
        const std::string purpose = "csi/" + std::to_string(sensor.sensor_id);
        // Each sensor runs its own clock, offset by a fraction of one CSI period.
        std::mt19937_64 clock_rng(derive_seed(scene.room.seed, purpose + "/clock"));
        const double offset = std::uniform_real_distribution<double>(0.0, 1.0 / ch.csi_rate)(clock_rng);
        CsiSequence seq;
        seq.sensor_id = sensor.sensor_id;
        seq.n_tx = ch.n_tx;
        seq.n_rx = ch.n_rx;
        seq.n_subcarriers = ch.n_subcarriers;
        seq.timestamps.resize(n_csi);
        seq.values.reserve(n_csi * seq.frame_elements());
        for (std::size_t i = 0; i < n_csi; ++i) {
            const double t = offset + static_cast<double>(i) / ch.csi_rate;
            seq.timestamps[i] = t;
            std::mt19937_64 rng(derive_seed(scene.room.seed, purpose, i));
            const auto states = pedestrian_states_at(scene.pedestrians, t);
            const CsiFrame frame = synth_csi_frame(scene.room, sensor.sensor_id, states, ch, rng);
            seq.values.insert(seq.values.end(), frame.values.begin(), frame.values.end());
        }
        csi.push_back(std::move(seq));
    }

    DatasetManifest manifest;
    manifest.duration = scene.duration;
    manifest.camera_rate = ch.camera_rate;
    manifest.csi_rate = ch.csi_rate;
    manifest.seed = scene.room.seed;
    manifest.scene = to_json(scene);
    return save_dataset(out_dir, images, csi, std::move(manifest));
}

SceneConfig default_scene(std::uint64_t seed) {
    SceneConfig s;
    s.room.width = 6.0;
    s.room.depth = 4.0;
    s.room.seed = seed;
    CameraPose cam;
    cam.position = {3.0, 0.0};
    cam.view_direction = {0.0, 1.0};
    cam.field_of_view = 100.0 * std::numbers::pi / 180.0;
    s.room.cameras = {cam};
    s.room.tx_position = {0.2, 3.8};
    s.room.sensors = {{1, {0.5, 0.5}}, {2, {5.5, 0.5}}, {3, {5.5, 3.5}}, {4, {3.0, 3.9}}};
    s.pedestrians = {elliptical_loop({3.0, 2.2}, {1.8, 0.9}, 8.0, Motion::counterclockwise_loop, 0.0, 64, 0,
                                     {0.85f, 0.15f, 0.1f})};
    s.channel = ChannelParams{};
    s.duration = 30.0;
    return s;
}

}  // namespace csi_inpaint
