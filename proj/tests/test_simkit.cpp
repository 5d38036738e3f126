#include <doctest.h>

#include <cmath>
#include <numeric>

#include "terra/errors.hpp"
#include "terra/predictor.hpp"
#include "terra/simkit.hpp"

using namespace terra;

namespace {

std::vector<TerrainClassSpec> two_classes(double rough_a = 0.0, double rough_b = 2.0,
                                          double power_a = 50.0, double power_b = 100.0) {
    return {
        {"alpha", 0.4, 0.08, 8.0, rough_a, 0.1, power_a, false},
        {"beta", 0.6, 0.2, 12.0, rough_b, 0.5, power_b, false},
    };
}

std::vector<Eigen::Vector2d> straight_path(double y, double x0, double x1) {
    return {Eigen::Vector2d(x0, y), Eigen::Vector2d(x1, y)};
}

double mean_of(const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / v.size();
}

}  // namespace

TEST_CASE("generate_scene: half split, determinism, texture statistics") {
    const Scene scene = generate_scene(two_classes(), SceneLayout::half_split, 5, 40.0, 64);
    for (int j = 0; j < 64; ++j) {
        for (int i = 0; i < 64; ++i) {
            CHECK(scene.class_map[j * 64 + i] == (i < 32 ? 0 : 1));
        }
    }
    CHECK(scene.class_at(10.0, 20.0) == 0);
    CHECK(scene.class_at(30.0, 20.0) == 1);

    const Scene again = generate_scene(two_classes(), SceneLayout::half_split, 5, 40.0, 64);
    CHECK(scene.class_map == again.class_map);
    for (double x : {3.7, 11.2, 28.9}) {
        CHECK(scene.texture(x, x * 0.7, true, false) ==
              doctest::Approx(again.texture(x, x * 0.7, true, false)));
    }

    // large-area texture mean stays near the class base gray (within 2/255)
    double acc = 0;
    int n = 0;
    for (double y = 2.0; y < 38.0; y += 0.21) {
        for (double x = 2.0; x < 18.0; x += 0.21) {
            acc += scene.texture(x, y, true, false);
            ++n;
        }
    }
    CHECK(std::abs(acc / n - 0.4) < 2.0 / 255.0);

    const Scene blocks = generate_scene(two_classes(), SceneLayout::blocks, 5, 40.0, 64);
    const Scene voronoi = generate_scene(two_classes(), SceneLayout::voronoi, 5, 40.0, 64);
    for (const Scene& s : {blocks, voronoi}) {
        bool saw0 = false, saw1 = false;
        for (int c : s.class_map) {
            saw0 = saw0 || c == 0;
            saw1 = saw1 || c == 1;
        }
        CHECK(saw0);
        CHECK(saw1);
    }
}

TEST_CASE("simulate_traverse: zero-roughness class produces negligible bandpower") {
    const Scene scene = generate_scene(two_classes(0.0, 2.0), SceneLayout::half_split, 7, 40.0, 64);
    const SensorBundle bundle =
        simulate_traverse(scene, straight_path(20.0, 2.0, 18.0), TraverseConfig{}, 3);

    const WindowSpec spec;
    const WelchConfig cfg;
    for (double t = 2.0; t < 8.0; t += 1.0) {
        CHECK(bandpower(t, bundle.imu_az, spec, cfg) < 1e-3);
    }
    CHECK_THROWS_AS(
        simulate_traverse(scene, straight_path(20.0, -3.0, 10.0), TraverseConfig{}, 3),
        PathOutOfScene);
}

TEST_CASE("simulate_traverse: metric ordering and power separation across classes") {
    const Scene scene = generate_scene(two_classes(1.0, 2.0, 50.0, 100.0),
                                       SceneLayout::half_split, 11, 40.0, 64);
    const TraverseConfig cfg;

    const SensorBundle a = simulate_traverse(scene, straight_path(20.0, 2.0, 18.0), cfg, 21);
    const SensorBundle b = simulate_traverse(scene, straight_path(20.0, 22.0, 38.0), cfg, 22);

    std::vector<double> queries;
    for (double t = 1.0; t <= 9.0; t += 0.08) queries.push_back(t);  // 100 windows

    const WindowSpec spec;
    const WelchConfig welch;
    const MetricSeries mza = vibration_metric(a.imu_az, spec, welch, queries);
    const MetricSeries mzb = vibration_metric(b.imu_az, spec, welch, queries);
    CHECK(mean_of(mzb.values) > mean_of(mza.values));

    const MetricSeries mpa = energy_metric(a.power_current, a.power_voltage, spec, queries);
    const MetricSeries mpb = energy_metric(b.power_current, b.power_voltage, spec, queries);
    // +50 W over a 1 s window adds 50 J
    CHECK(mean_of(mpb.values) - mean_of(mpa.values) == doctest::Approx(50.0).epsilon(0.08));

    // all metric series stay non-negative and finite on these fixtures
    const MetricSeries mwa = bumpiness_metric(a.imu_wx, a.imu_wy, queries);
    for (const MetricSeries* m : {&mza, &mzb, &mpa, &mpb, &mwa}) {
        for (double v : m->values) {
            CHECK(std::isfinite(v));
            CHECK(v >= 0.0);
        }
    }
}

TEST_CASE("simulated a_z bandpower scales with roughness squared") {
    const Scene scene = generate_scene(two_classes(1.0, 2.0), SceneLayout::half_split, 13, 40.0, 64);
    const TraverseConfig cfg;
    const SensorBundle a = simulate_traverse(scene, straight_path(20.0, 2.0, 18.0), cfg, 31);
    const SensorBundle b = simulate_traverse(scene, straight_path(20.0, 22.0, 38.0), cfg, 31);

    const WindowSpec spec;
    const WelchConfig welch;
    std::vector<double> ba, bb;
    for (double t = 0.6; t <= 10.0; t += 0.19) {  // ~50 windows
        ba.push_back(bandpower(t, a.imu_az, spec, welch));
        bb.push_back(bandpower(t, b.imu_az, spec, welch));
    }
    CHECK(mean_of(bb) / mean_of(ba) == doctest::Approx(4.0).epsilon(0.15));
}

TEST_CASE("render_aerial: crop oracle, gsd scaling, determinism") {
    const Scene scene = generate_scene(two_classes(), SceneLayout::blocks, 17, 40.0, 64);
    const Eigen::Vector2d lo(10.0, 10.0), hi(16.0, 16.0);
    const GeoImage geo = render_aerial(scene, lo, hi, 0.02);
    CHECK(geo.image.width == 300);
    CHECK(geo.image.height == 300);

    const GeoImage dense = render_aerial(scene, lo, hi, 0.01);
    CHECK(dense.image.width == 600);

    const GeoImage again = render_aerial(scene, lo, hi, 0.02);
    CHECK(geo.image.data == again.image.data);

    // extracted footprint matches the scene texture sampled directly
    PatchFootprint fp;
    fp.center = Eigen::Vector2d(13.0, 13.0);
    fp.yaw = 0.3;
    fp.side = 1.5;
    const PatchResult patch = extract_patch(geo.image, nullptr, geo.frame(), fp, 48);
    const double c = std::cos(fp.yaw), s = std::sin(fp.yaw);
    double max_diff = 0;
    for (int j = 0; j < 48; ++j) {
        const double fa = (0.5 - (j + 0.5) / 48.0) * fp.side;
        for (int i = 0; i < 48; ++i) {
            const double fb = (0.5 - (i + 0.5) / 48.0) * fp.side;
            const double x = fp.center.x() + c * fa - s * fb;
            const double y = fp.center.y() + s * fa + c * fb;
            max_diff = std::max(max_diff,
                                std::abs(patch.patch.at(i, j) - scene.texture(x, y, true, false)));
        }
    }
    CHECK(max_diff < 0.03);  // bilinear interpolation tolerance at 2 cm gsd
}

TEST_CASE("render_fpv: footprint blur kills high frequencies with distance") {
    // uniform texture everywhere: any difference comes from the rendering
    const std::vector<TerrainClassSpec> uniform{
        {"a", 0.5, 0.25, 16.0, 1.0, 0.2, 100.0, false},
        {"b", 0.5, 0.25, 16.0, 1.0, 0.2, 100.0, false},
    };
    const Scene scene = generate_scene(uniform, SceneLayout::half_split, 23, 40.0, 64);
    const FpvRig rig = FpvRig::standard();
    const ImageF fpv = render_fpv(scene, 5.0, 20.0, 0.0, rig.camera, rig.cam_from_robot,
                                  rig.robot_height);

    const RigidTransform cam_from_ground = compose(
        rig.cam_from_robot,
        inverse(ground_from_attitude(AttitudeSample{0, 0, 0}, rig.robot_height)));
    const BevResult bev = bev_resample(fpv, cam_from_ground, rig.camera, GroundGrid{});
    const GroundImageFrame frame = GroundImageFrame::from_grid(GroundGrid{});

    const auto band_energy = [&](double ahead) {
        PatchFootprint fp;
        fp.center = Eigen::Vector2d(ahead, 0.0);
        fp.side = 1.5;
        const PatchResult p = extract_patch(bev.image, &bev.mask, frame, fp, 64);
        const FeatureVector f = extract_features(p.patch);
        return f.values[35];  // finest Laplacian band
    };
    CHECK(band_energy(9.0) < band_energy(3.0));

    // determinism
    const ImageF fpv2 = render_fpv(scene, 5.0, 20.0, 0.0, rig.camera, rig.cam_from_robot,
                                   rig.robot_height);
    CHECK(fpv.data == fpv2.data);

    // level pose on flat ground: the top image row is sky
    for (int u = 0; u < fpv.width; ++u) CHECK(fpv.at(u, 0) == doctest::Approx(0.85));
}

TEST_CASE("occlusion flag changes aerial texture only on occluder cells") {
    const Scene scene = generate_scene(preset_classes("occlusion"), SceneLayout::blocks, 29,
                                       40.0, 64);
    int occluder_diffs = 0, open_diffs = 0;
    for (double y = 1.0; y < 39.0; y += 0.8) {
        for (double x = 1.0; x < 39.0; x += 0.8) {
            const double plain = scene.texture(x, y, true, false);
            const double revealed = scene.texture(x, y, true, true);
            const bool differs = std::abs(plain - revealed) > 1e-12;
            if (scene.spec_at(x, y).occluder) {
                occluder_diffs += differs;
            } else {
                open_diffs += differs;
            }
            // FPV never sees through, flag or not
            CHECK(scene.texture(x, y, false, false) ==
                  doctest::Approx(scene.texture(x, y, false, true)));
        }
    }
    CHECK(open_diffs == 0);
    CHECK(occluder_diffs > 100);

    // occluder classes are indistinguishable from each other in FPV
    const Scene occ = scene;
    double veg_a = -1, veg_b = -1;
    for (double x = 0.5; x < 39.0; x += 0.1) {
        if (occ.spec_at(x, 20.0).name == "veg_smooth") veg_a = occ.texture(x, 20.0, false, true);
        if (occ.spec_at(x, 20.0).name == "veg_rough") veg_b = occ.texture(x, 20.0, false, true);
    }
    // same shared texture field, so values at the same coordinate would match;
    // sample statistics agree instead
    CHECK(veg_a >= 0.0);
    CHECK(veg_b >= 0.0);
}

TEST_CASE("build_dataset: closed-loop records with referential label integrity") {
    const Scene scene = generate_scene(two_classes(0.8, 2.2, 60.0, 200.0),
                                       SceneLayout::half_split, 31, 40.0, 64);
    DatasetBuildConfig cfg;
    cfg.seed = 41;
    cfg.ugv_frame_interval = 1.0;
    cfg.uav_frame_interval = 2.0;
    const BuiltDataset data = build_dataset(scene, straight_path(20.0, 4.0, 18.0), cfg);

    CHECK(data.records.size() > 20);
    size_t ugv_views = 0, uav_views = 0;
    for (const PatchRecord& rec : data.records) {
        REQUIRE(!rec.views.empty());
        // labels equal label_at_pose of the smoothed series at the POI time
        CHECK(rec.labels[0] == doctest::Approx(label_at_pose(data.metrics.m_z, rec.timestamp)));
        CHECK(rec.labels[1] ==
              doctest::Approx(label_at_pose(data.metrics.m_omega, rec.timestamp)));
        CHECK(rec.labels[2] == doctest::Approx(label_at_pose(data.metrics.m_p, rec.timestamp)));
        for (const PatchView& v : rec.views) {
            if (v.source == "ugv") {
                ++ugv_views;
                if (v.in_comparison) CHECK(v.camera_distance <= 5.0);
            } else {
                ++uav_views;
            }
            CHECK(v.patch.width == cfg.patch_resolution);
        }
    }
    CHECK(ugv_views > 20);
    CHECK(uav_views > 20);

    // POI spacing is exact within straight intervals
    const auto intervals = filter_straight_segments(data.sensors.odom_t, data.sensors.odom_vl,
                                                    data.sensors.odom_vr);
    const auto pois = sample_pois(data.sensors.trajectory, intervals, cfg.poi_spacing);
    for (size_t i = 1; i < pois.size(); ++i) {
        CHECK(std::abs(pois[i].arc_length - pois[i - 1].arc_length - 0.3) < 1e-6);
    }
}

TEST_CASE("spearman rank correlation") {
    CHECK(spearman({1, 2, 3, 4}, {10, 20, 30, 40}) == doctest::Approx(1.0));
    CHECK(spearman({1, 2, 3, 4}, {9, 7, 5, 3}) == doctest::Approx(-1.0));
    CHECK(std::abs(spearman({1, 2, 3, 4, 5, 6}, {3, 1, 4, 1, 5, 9})) < 1.0);
}
