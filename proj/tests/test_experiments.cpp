#include "torch_doctest.hpp"

#include <cmath>
#include <thread>

#include "csi_inpaint/common.hpp"
#include "csi_inpaint/experiments.hpp"
#include "csi_inpaint/pipeline.hpp"
#include "csi_inpaint/scene_sim.hpp"
#include "support.hpp"

using namespace csi_inpaint;
namespace fs = std::filesystem;

namespace {

const test_support::TempDir& data_dir() {
    static const test_support::TempDir dir("exp_data");
    static const bool made = [] {
        generate_dataset(test_support::tiny_scene(), dir / "ds");
        return true;
    }();
    (void)made;
    return dir;
}

const Dataset& tiny_dataset() {
    static const Dataset ds = load_dataset(data_dir() / "ds");
    return ds;
}

ExperimentConfig tiny_experiment(const test_support::TempDir& out, ExperimentKind kind) {
    ExperimentConfig c;
    c.name = "t";
    c.kind = kind;
    c.dataset = data_dir() / "ds";
    c.output_dir = out.path();
    c.base = test_support::tiny_pipeline();
    c.base.training.epochs = 1;
    c.eval_split = Split::val;
    return c;
}

/// Background-only frame with a solid square of side `side` at (y0, x0).
SyncedSample square_sample(int size, int y0, int x0, int side, std::array<float, 3> bg) {
    SyncedSample s;
    s.l_img = 1;
    s.height = size;
    s.width = size;
    s.gt_window.resize(static_cast<std::size_t>(size * size * 3));
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x)
            for (int c = 0; c < 3; ++c) {
                const bool fg = side > 0 && y >= y0 && y < y0 + side && x >= x0 && x < x0 + side;
                s.gt_window[static_cast<std::size_t>((y * size + x) * 3 + c)] = fg ? 0.9f : bg[static_cast<std::size_t>(c)];
            }
    return s;
}

torch::Tensor as_restored(const std::vector<SyncedSample>& samples) {
    std::vector<torch::Tensor> parts;
    for (const auto& s : samples)
        parts.push_back(torch::from_blob(const_cast<float*>(s.gt_window.data()), {1, s.l_img, s.height, s.width, 3}).clone());
    return torch::cat(parts);
}

}  // namespace

TEST_CASE("prepared data") {
    const auto& ds = tiny_dataset();
    const auto cfg = test_support::tiny_pipeline();
    const auto multi = prepare_data(ds, cfg, Mode::multimodal);
    const std::size_t n = multi.train.size() + multi.val.size() + multi.test.size();
    REQUIRE(n > 8);
    CHECK(multi.train.size() == static_cast<std::size_t>(std::floor(n * cfg.split.train)));
    CHECK(multi.sensor_ids == std::vector<int>{1, 2});
    CHECK(multi.model_config.n_sensors == 2);
    CHECK(multi.model_config.csi_feature_dim == 4);
    CHECK(multi.train.back().plan.image_begin < multi.val.front().plan.image_begin);
    CHECK(multi.val.back().plan.image_begin < multi.test.front().plan.image_begin);
    CHECK(mask_coverage(std::span(multi.train[0].mask_window).first(32 * 32)) == doctest::Approx(0.9).epsilon(0.03));

    std::string notice;
    const auto rf = prepare_data(ds, cfg, Mode::rf_only, [&](const std::string& m) { notice = m; });
    CHECK(notice.find("full") != std::string::npos);
    CHECK(rf.mask.kind == MaskKind::full);
    for (auto v : rf.test[0].mask_window) CHECK(v == 1);

    auto bad = cfg;
    bad.sensors = {1, 9};
    CHECK_THROWS_AS(prepare_data(ds, bad, Mode::multimodal), ConfigError);

    const auto t = to_tensors(multi.test, multi.features, 0.0f);
    CHECK(t.csi.sizes() == torch::IntArrayRef({static_cast<int64_t>(multi.test.size()), 2, 40, 4}));
    CHECK(t.gt.sizes() == torch::IntArrayRef({static_cast<int64_t>(multi.test.size()), 4, 32, 32, 3}));
}

TEST_CASE("train, evaluate and grid") {
    test_support::TempDir out;
    const auto data = prepare_data(tiny_dataset(), test_support::tiny_pipeline(), Mode::multimodal);
    TrainOptions opts;
    opts.checkpoint_out = out / "m.ckpt";
    auto trained = train_model(data, opts);
    CHECK(fs::exists(out / "m.ckpt"));
    CHECK(trained.meta.extra["sensor_ids"] == nlohmann::json::array({1, 2}));
    CHECK(trained.parameters == count_parameters(*trained.model));

    const auto ev = evaluate(trained.model, data.test, data.features, Mode::multimodal, 0.0f, "r");
    CHECK(ev.record.psnr_values.size() == data.test.size() * 4);
    CHECK(ev.record.mean_ssim <= 1.0);
    CHECK(ev.restored.size(0) == static_cast<int64_t>(data.test.size()));
    write_sample_grid(out / "g.png", data.test, ev.restored, 2);
    CHECK(fs::file_size(out / "g.png") > 100);

    // Identity restoration leaves nothing inside any footprint.
    const auto fp = footprint_mse(tiny_dataset(), 0, data.test, as_restored(data.test));
    REQUIRE(fp.size() == 1);
    CHECK(fp[0] == doctest::Approx(0.0));
}

TEST_CASE("sweep expansion") {
    test_support::TempDir out;
    auto c = tiny_experiment(out, ExperimentKind::window_sweep);
    c.l_csi_values = {20, 40, 60, 80};
    const auto pts = expand_points(c);
    REQUIRE(pts.size() == 4);
    CHECK(pts[2].label == "L=60");
    CHECK(pts[2].config.windows.l_csi == 60);
    CHECK(pts[2].config.model.l_csi == 60);
    CHECK(point_hash(c, pts[0]) != point_hash(c, pts[1]));
    CHECK(point_hash(c, pts[0]) == point_hash(c, expand_points(c)[0]));

    c.kind = ExperimentKind::pca_ablation;
    c.pca_k_values = {std::nullopt, 3};
    CHECK(expand_points(c)[0].label == "k=none");
    CHECK(expand_points(c)[1].config.preprocess.pca_k == 3);

    c.kind = ExperimentKind::sensor_study;
    c.sensor_subsets = {{1}, {1, 2}};
    CHECK(expand_points(c)[1].label == "sensors=1;2");

    c.kind = ExperimentKind::mode_comparison;
    c.modes = {Mode::multimodal, Mode::rf_only, Mode::image_only};
    CHECK(expand_points(c).size() == 3);

    const auto j = to_json(c);
    const auto back = experiment_from_json(j);
    CHECK(to_json(back) == j);
    CHECK_THROWS_AS(experiment_from_json(nlohmann::json::parse(R"({"kind": "mode-comparison"})")), ConfigError);
    c.sensor_subsets = {{5}};
    c.kind = ExperimentKind::sensor_study;
    CHECK_THROWS_AS(c.validate(tiny_dataset()), ConfigError);
}

TEST_CASE("window sweep writes one row per feasible L and resumes") {
    test_support::TempDir out;
    auto c = tiny_experiment(out, ExperimentKind::window_sweep);
    c.l_csi_values = {20, 40, 60, 100000};
    std::vector<std::string> logs;
    RunHooks hooks;
    hooks.log = [&](const std::string& m) { logs.push_back(m); };
    const auto results = run_experiment(c, tiny_dataset(), hooks);
    REQUIRE(results.size() == 4);
    CHECK(!results[0].failed);
    CHECK(results[3].skipped);
    CHECK(results[3].error.find("100000") != std::string::npos);

    const ResultsTable table(out / "t.csv");
    const auto rows = table.rows();
    REQUIRE(rows.size() == 3);
    CHECK(rows[1].at("L") == "40");
    CHECK(rows[1].at("kind") == "window-sweep");
    CHECK(std::stoll(rows[0].at("csi_input_parameters")) == 10 * 4 * 16 + 16);
    CHECK(fs::exists(out / "t" / "ssim_vs_L.png"));
    CHECK(fs::exists(out / "t" / "psnr_vs_L.png"));
    CHECK(fs::exists(out / "t" / (results[0].config_hash + ".json")));

    const auto again = run_experiment(c, tiny_dataset(), hooks);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(again[i].skipped);
        CHECK(again[i].record.mean_ssim == doctest::Approx(results[i].record.mean_ssim));
    }
    CHECK(table.rows().size() == 3);
}

TEST_CASE("interrupted sweep only fills in missing points") {
    test_support::TempDir out;
    auto c = tiny_experiment(out, ExperimentKind::mode_comparison);
    c.modes = {Mode::image_only, Mode::multimodal};
    int started = 0;
    RunHooks stop;
    stop.before_point = [&](const SweepPoint&) { return ++started < 2; };
    run_experiment(c, tiny_dataset(), stop);
    const ResultsTable table(out / "t.csv");
    REQUIRE(table.rows().size() == 1);
    CHECK(table.rows()[0].at("mode") == "image-only");

    std::vector<std::string> trained;
    RunHooks watch;
    watch.before_point = [&](const SweepPoint& p) {
        trained.push_back(p.label);
        return true;
    };
    const auto results = run_experiment(c, tiny_dataset(), watch);
    CHECK(trained == std::vector<std::string>{"multimodal"});
    CHECK(results[0].skipped);
    REQUIRE(table.rows().size() == 2);
    CHECK(table.rows()[1].at("mode") == "multimodal");
    CHECK(fs::exists(out / "t" / "mean_ssim.png"));
}

TEST_CASE("csi input layer size") {
    auto m = test_support::tiny_pipeline().model;
    m.csi_feature_dim = 7;
    m.n_sensors = 3;
    auto model = build_model(m, 0);
    CHECK(csi_input_layer_parameters(m) == count_parameters(*model->csi_encoder->input_projection));
    CHECK(csi_input_layer_parameters(m) == 10 * 7 * 16 + 16);
}

TEST_CASE("centroid errors") {
    const std::array<float, 3> bg{0.2f, 0.2f, 0.2f};
    std::vector<SyncedSample> gt{square_sample(16, 2, 2, 4, bg), square_sample(16, 0, 0, 0, bg)};
    std::vector<SyncedSample> shifted{square_sample(16, 5, 6, 4, bg), square_sample(16, 1, 1, 2, bg)};
    auto err = centroid_errors(gt, as_restored(shifted), bg);
    REQUIRE(err.size() == 2);
    CHECK(err[0] == doctest::Approx(5.0));
    CHECK(std::isnan(err[1]));

    err = centroid_errors(gt, as_restored(gt), bg);
    CHECK(err[0] == 0.0);

    std::vector<SyncedSample> empty{square_sample(16, 0, 0, 0, bg), square_sample(16, 0, 0, 0, bg)};
    err = centroid_errors(gt, as_restored(empty), bg);
    CHECK(std::isinf(err[0]));
}

TEST_CASE("concurrent appends stay intact") {
    test_support::TempDir out;
    const ResultsTable table(out / "r.csv");
    std::vector<std::thread> workers;
    for (int w = 0; w < 4; ++w)
        workers.emplace_back([&, w] {
            for (int i = 0; i < 25; ++i)
                table.append({{"run_id", std::to_string(w) + "-" + std::to_string(i)}, {"config_hash", std::to_string(w * 100 + i)}});
        });
    for (auto& t : workers) t.join();
    const auto rows = table.rows();
    CHECK(rows.size() == 100);
    std::set<std::string> ids;
    for (const auto& r : rows) {
        CHECK(r.size() == ResultsTable::columns().size());
        ids.insert(r.at("run_id"));
    }
    CHECK(ids.size() == 100);
    CHECK(table.contains("307"));
    CHECK(!table.contains("999"));
}

TEST_CASE("shipped configs parse") {
    const fs::path dir = CSI_CONFIG_DIR;
    int n = 0;
    for (const auto& e : fs::directory_iterator(dir)) {
        const auto j = read_json_file(e.path());
        INFO(e.path().filename().string());
        if (j.contains("kind"))
            CHECK_NOTHROW(experiment_from_json(j));
        else if (j.contains("room"))
            CHECK_NOTHROW(scene_from_json(j));
        else
            CHECK_NOTHROW(pipeline_from_json(j));
        ++n;
    }
    CHECK(n >= 7);
    const auto fixture = pipeline_from_json(read_json_file(dir / "fixture_pipeline.json"));
    CHECK(fixture.training.batch_size == 2);
    const auto two = scene_from_json(read_json_file(dir / "two_pedestrian_scene.json"));
    CHECK(two.pedestrians.size() == 2);
}
