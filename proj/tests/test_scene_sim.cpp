#include <doctest.h>

#include <cmath>
#include <complex>
#include <fstream>
#include <iterator>
#include <numbers>

#include "csi_inpaint/dataset_io.hpp"
#include "csi_inpaint/scene_sim.hpp"
#include "support.hpp"

using namespace csi_inpaint;

namespace {

RoomConfig office() { return default_scene().room; }

std::vector<char> slurp(const std::filesystem::path& p) {
    std::ifstream is(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(is), {}};
}

// Closed-form multipath sum for a 1x1 link.
std::complex<double> expected_csi(Vec2 tx, Vec2 rx, const std::vector<Vec2>& peds, double gain, double lambda,
                                  double min_len) {
    const auto len = [&](Vec2 a, Vec2 b) { return std::max(std::hypot(a.x - b.x, a.y - b.y), min_len); };
    const double k = 2.0 * std::numbers::pi / lambda;
    const double d0 = len(tx, rx);
    std::complex<double> h = std::exp(std::complex<double>(0, -k * d0)) / d0;
    for (const Vec2 p : peds) {
        const double d1 = len(tx, p), d2 = len(p, rx);
        h += gain * std::exp(std::complex<double>(0, -k * (d1 + d2))) / (d1 * d2);
    }
    return h;
}

}  // namespace

TEST_CASE("constant trajectory from a single waypoint") {
    PedestrianTrajectory t;
    t.waypoints = {{0.0, {1.0, 1.0}}};
    const auto pos = generate_trajectory(t, 1.0, 10.0);
    REQUIRE(pos.size() == 10);
    for (const auto& p : pos) CHECK(p == Vec2{1.0, 1.0});
}

TEST_CASE("straight line interpolates linearly") {
    PedestrianTrajectory t;
    t.waypoints = {{0.0, {0.0, 0.0}}, {1.0, {1.0, 0.0}}};
    const auto pos = generate_trajectory(t, 1.0, 10.0);
    CHECK(pos[5].x == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(pos[5].y == 0.0);
}

TEST_CASE("clockwise loop around the room closes after one period") {
    const RoomConfig room = office();
    const auto t = rectangular_loop(room, 0.5, 10.0, Motion::clockwise_loop);
    t.validate(room);
    const Vec2 a = t.position_at(0.0), b = t.position_at(10.0);
    CHECK(distance(a, b) < 1e-6);
    const auto pos = generate_trajectory(t, 10.0 + 1e-9, 10.0);
    CHECK(distance(pos.front(), t.position_at(10.0)) < 1e-6);
}

TEST_CASE("loop speed is constant along the path") {
    const RoomConfig room = office();
    const auto t = rectangular_loop(room, 0.5, 10.0, Motion::counterclockwise_loop);
    const double perimeter = 2.0 * (5.0 + 3.0);
    const auto pos = generate_trajectory(t, 10.0, 100.0);
    for (std::size_t i = 1; i < pos.size(); ++i) CHECK(distance(pos[i - 1], pos[i]) <= perimeter / 1000.0 + 1e-9);
}

TEST_CASE("trajectory validation rejects bad waypoints") {
    const RoomConfig room = office();
    PedestrianTrajectory t;
    t.waypoints = {{0.0, {1.0, 1.0}}, {1.0, {7.0, 1.0}}};
    CHECK_THROWS_WITH_AS(t.validate(room), doctest::Contains("outside"), ConfigError);
    t.waypoints = {{0.0, {1.0, 1.0}}, {0.0, {2.0, 1.0}}};
    CHECK_THROWS_WITH_AS(t.validate(room), doctest::Contains("strictly increasing"), ConfigError);
    auto loop = rectangular_loop(room, 0.5, 8.0, Motion::clockwise_loop);
    loop.motion = Motion::counterclockwise_loop;
    CHECK_THROWS_WITH_AS(loop.validate(room), doctest::Contains("clockwise"), ConfigError);
    CHECK_THROWS_AS(generate_trajectory(t, 0.0, 10.0), ConfigError);
}

TEST_CASE("room validation") {
    RoomConfig room = office();
    CHECK_NOTHROW(room.validate());
    room.sensors.push_back({1, {1.0, 1.0}});
    CHECK_THROWS_WITH_AS(room.validate(), doctest::Contains("duplicate sensor id 1"), ConfigError);
    room = office();
    room.cameras[0].field_of_view = std::numbers::pi;
    CHECK_THROWS_AS(room.validate(), ConfigError);
    room = office();
    room.sensors[0].position = {-1.0, 0.5};
    CHECK_THROWS_WITH_AS(room.validate(), doctest::Contains("outside"), ConfigError);
}

TEST_CASE("rendering") {
    const RoomConfig room = office();
    const RenderStyle style;
    const auto& cam = room.cameras[0];

    SUBCASE("empty scene is pure background") {
        const auto f = render_frame(room, 0, {});
        for (std::size_t i = 0; i < f.pixels.size(); ++i) CHECK(f.pixels[i] == style.background[i % 3]);
    }
    SUBCASE("pedestrian on the optical axis is centred") {
        const auto r = project_pedestrian(cam, cam.position + 2.0 * cam.view_direction);
        REQUIRE(r.visible);
        CHECK((r.left + r.right) / 2.0 == doctest::Approx(cam.width / 2.0));
        const auto fp = pedestrian_footprint(cam, cam.position + 2.0 * cam.view_direction);
        int left = cam.width, right = -1;
        for (int y = 0; y < cam.height; ++y)
            for (int x = 0; x < cam.width; ++x)
                if (fp[static_cast<std::size_t>(y * cam.width + x)]) {
                    left = std::min(left, x);
                    right = std::max(right, x);
                }
        CHECK(left + right == cam.width - 1);
    }
    SUBCASE("doubling the distance halves the width") {
        const auto width_px = [&](double z) {
            const auto fp = pedestrian_footprint(cam, cam.position + z * cam.view_direction);
            const int row = cam.height / 2;
            int n = 0;
            for (int x = 0; x < cam.width; ++x) n += fp[static_cast<std::size_t>(row * cam.width + x)];
            return n;
        };
        const double half_tan = std::tan(cam.field_of_view / 2.0);
        const double focal = cam.width / 2.0 / half_tan;
        CHECK(std::abs(width_px(1.0) - focal * style.body_width / 1.0) <= 1.0);
        CHECK(std::abs(width_px(2.0) - focal * style.body_width / 2.0) <= 1.0);
        CHECK(std::abs(width_px(2.0) - width_px(1.0) / 2.0) <= 1.0);
    }
    SUBCASE("coverage inside and outside the frustum") {
        const PedestrianState inside{{3.0, 2.0}, {1.0f, 0.0f, 0.0f}};
        const PedestrianState behind{{3.0, -0.5}, {1.0f, 0.0f, 0.0f}};
        const auto a = render_frame(room, 0, std::vector{inside});
        const auto b = render_frame(room, 0, std::vector{behind});
        const auto bg = render_frame(room, 0, {});
        int changed_a = 0, changed_b = 0;
        for (std::size_t i = 0; i < bg.pixels.size(); ++i) {
            changed_a += a.pixels[i] != bg.pixels[i];
            changed_b += b.pixels[i] != bg.pixels[i];
        }
        CHECK(changed_a > 0);
        CHECK(changed_b == 0);
    }
    SUBCASE("nearer pedestrian is painted over a farther one") {
        const Vec2 near = cam.position + 1.5 * cam.view_direction, far = cam.position + 3.0 * cam.view_direction;
        const std::vector<PedestrianState> peds{{near, {1.0f, 0.0f, 0.0f}}, {far, {0.0f, 0.0f, 1.0f}}};
        const auto f = render_frame(room, 0, peds);
        const std::size_t centre = (static_cast<std::size_t>(cam.height / 2) * cam.width + cam.width / 2) * 3;
        CHECK(f.pixels[centre] == 1.0f);
        CHECK(f.pixels[centre + 2] == 0.0f);
    }
}

TEST_CASE("CSI follows the closed-form multipath sum") {
    const RoomConfig room = office();
    ChannelParams p;
    std::mt19937_64 rng(1);
    const std::vector<Vec2> peds{{2.0, 2.0}, {4.0, 1.5}};
    std::vector<PedestrianState> states;
    for (const auto& q : peds) states.push_back({q, {1, 0, 0}});
    const auto f = synth_csi_frame(room, 2, states, p, rng);
    REQUIRE(f.values.size() == 64);
    CHECK(f.n_tx == 1);
    CHECK(f.n_rx == 1);
    const auto lambdas = p.wavelengths();
    for (int k = 0; k < 64; ++k) {
        const double freq = 5.18e9 + 80e6 * (k / 63.0 - 0.5);
        CHECK(lambdas[static_cast<std::size_t>(k)] == doctest::Approx(299792458.0 / freq).epsilon(1e-12));
        const auto want = expected_csi(room.tx_position, room.sensor(2).position, peds, 1.0, 299792458.0 / freq, 0.1);
        const auto got = std::complex<double>(f.values[static_cast<std::size_t>(k)]);
        CHECK(std::abs(got - want) < 1e-5);
    }
}

TEST_CASE("CSI physical sanity") {
    const RoomConfig room = office();
    ChannelParams p;
    std::mt19937_64 rng(3);

    SUBCASE("static empty room is constant") {
        const auto a = synth_csi_frame(room, 1, {}, p, rng);
        const auto b = synth_csi_frame(room, 1, {}, p, rng);
        CHECK(a.values == b.values);
        for (const auto& v : a.values) CHECK(std::abs(v) > 0.0f);
    }
    SUBCASE("moving a pedestrian changes the CSI") {
        const std::vector<PedestrianState> a{{{2.0, 2.0}, {1, 0, 0}}}, b{{{2.05, 2.0}, {1, 0, 0}}};
        const auto fa = synth_csi_frame(room, 1, a, p, rng), fb = synth_csi_frame(room, 1, b, p, rng);
        double change = 0.0;
        for (std::size_t k = 0; k < fa.values.size(); ++k) change = std::max(change, double(std::abs(std::abs(fa.values[k]) - std::abs(fb.values[k]))));
        CHECK(change > 0.0);
    }
    SUBCASE("nearby pedestrians perturb more than distant ones") {
        const auto empty = synth_csi_frame(room, 1, {}, p, rng);
        const auto perturbation = [&](Vec2 q) {
            const auto f = synth_csi_frame(room, 1, std::vector<PedestrianState>{{q, {1, 0, 0}}}, p, rng);
            double s = 0.0;
            for (std::size_t k = 0; k < f.values.size(); ++k) s += std::pow(std::abs(f.values[k]) - std::abs(empty.values[k]), 2);
            return std::sqrt(s);
        };
        // Sensor 1 sits at (0.5, 0.5), the transmitter at (0.2, 3.8).
        CHECK(perturbation({0.7, 1.0}) > perturbation({5.5, 2.0}));
    }
    SUBCASE("grazing a sensor stays finite") {
        const auto f = synth_csi_frame(room, 1, std::vector<PedestrianState>{{room.sensor(1).position, {1, 0, 0}}}, p, rng);
        for (const auto& v : f.values) CHECK(std::isfinite(std::abs(v)));
    }
    SUBCASE("MIMO shape") {
        p.n_tx = 2;
        p.n_rx = 3;
        const auto f = synth_csi_frame(room, 1, {}, p, rng);
        CHECK(f.values.size() == 2u * 3u * 64u);
    }
    SUBCASE("noise has the requested spread") {
        p.noise_std = 0.1;
        const auto clean = [&] {
            ChannelParams q = p;
            q.noise_std = 0.0;
            return synth_csi_frame(room, 1, {}, q, rng);
        }();
        double power = 0.0;
        std::size_t n = 0;
        for (int i = 0; i < 200; ++i) {
            const auto f = synth_csi_frame(room, 1, {}, p, rng);
            for (std::size_t k = 0; k < f.values.size(); ++k, ++n) power += std::norm(std::complex<double>(f.values[k] - clean.values[k]));
        }
        CHECK(std::sqrt(power / n) == doctest::Approx(0.1).epsilon(0.03));
    }
    SUBCASE("unknown sensor") { CHECK_THROWS_AS(synth_csi_frame(room, 99, {}, p, rng), ConfigError); }
}

TEST_CASE("generated dataset: counts, clocks and determinism") {
    test_support::TempDir dir;
    auto scene = test_support::tiny_scene();
    const auto m = generate_dataset(scene, dir / "a");
    REQUIRE(m.cameras.size() == 1);
    CHECK(m.cameras[0].frames == 60);
    REQUIRE(m.sensors.size() == 2);
    CHECK(m.sensors[0].frames == 600);

    const Dataset ds = load_dataset(dir / "a");
    for (const auto& s : ds.csi) {
        const double offset = s.timestamps[0];
        CHECK(offset >= 0.0);
        CHECK(offset < 0.01);
        CHECK(s.timestamps[1] - s.timestamps[0] == doctest::Approx(0.01));
    }
    CHECK(ds.csi[0].timestamps[0] != ds.csi[1].timestamps[0]);

    generate_dataset(scene, dir / "b");
    for (const auto& f : std::filesystem::directory_iterator(dir / "a"))
        CHECK(slurp(f.path()) == slurp(dir / "b" / f.path().filename()));

    scene.room.seed += 1;
    generate_dataset(scene, dir / "c");
    CHECK(slurp(dir / "a" / "sensor1.csi") != slurp(dir / "c" / "sensor1.csi"));
}

TEST_CASE("rate arithmetic") {
    test_support::TempDir dir;
    auto scene = test_support::tiny_scene();
    scene.duration = 2.0;
    scene.channel.csi_rate = 500.0;
    const auto m = generate_dataset(scene, dir / "d");
    CHECK(m.cameras[0].frames == 20);
    CHECK(m.sensors[0].frames == 1000);
}
