#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "terra/errors.hpp"
#include "terra/geometry.hpp"
#include "terra/simkit.hpp"
#include "oracles.hpp"

using namespace terra;

namespace {

RigidTransform random_transform(std::mt19937_64& rng, const std::string& from,
                                const std::string& to) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    RigidTransform t;
    t.rotation = Eigen::Quaterniond(u(rng), u(rng), u(rng), u(rng)).normalized();
    t.translation = Eigen::Vector3d(u(rng), u(rng), u(rng)) * 3.0;
    t.from_frame = from;
    t.to_frame = to;
    return t;
}

// camera at `height` above z=0, optical axis parallel to the ground (+x)
RigidTransform horizontal_camera(double height) {
    Eigen::Matrix3d ground_from_cam;
    ground_from_cam.col(0) = Eigen::Vector3d(0, -1, 0);  // cam x right
    ground_from_cam.col(1) = Eigen::Vector3d(0, 0, -1);  // cam y down
    ground_from_cam.col(2) = Eigen::Vector3d(1, 0, 0);   // cam z forward
    RigidTransform g_from_c;
    g_from_c.rotation = Eigen::Quaterniond(ground_from_cam);
    g_from_c.translation = Eigen::Vector3d(0, 0, height);
    g_from_c.from_frame = kFrameCamera;
    g_from_c.to_frame = kFrameGround;
    return inverse(g_from_c);
}

// nadir camera at `height`, image x along ground x
RigidTransform nadir_camera(double height) {
    Eigen::Matrix3d ground_from_cam;
    ground_from_cam.col(0) = Eigen::Vector3d(1, 0, 0);
    ground_from_cam.col(1) = Eigen::Vector3d(0, -1, 0);
    ground_from_cam.col(2) = Eigen::Vector3d(0, 0, -1);
    RigidTransform g_from_c;
    g_from_c.rotation = Eigen::Quaterniond(ground_from_cam);
    g_from_c.translation = Eigen::Vector3d(0, 0, height);
    g_from_c.from_frame = kFrameCamera;
    g_from_c.to_frame = kFrameGround;
    return inverse(g_from_c);
}

MarkerObservation square_marker(const Eigen::Vector2d& center, double side_px, double rot = 0.0,
                                double perimeter_m = 1.4) {
    const double h = side_px / 2.0;
    const std::array<Eigen::Vector2d, 4> local{Eigen::Vector2d(h, -h), Eigen::Vector2d(h, h),
                                               Eigen::Vector2d(-h, h), Eigen::Vector2d(-h, -h)};
    MarkerObservation m;
    m.known_perimeter = perimeter_m;
    const double c = std::cos(rot), s = std::sin(rot);
    for (int i = 0; i < 4; ++i) {
        m.corners[i] = center + Eigen::Vector2d(c * local[i].x() - s * local[i].y(),
                                                s * local[i].x() + c * local[i].y());
    }
    return m;
}

}  // namespace

TEST_CASE("compose: identity, inverse, translations, frame tags") {
    std::mt19937_64 rng(42);
    const RigidTransform t = random_transform(rng, "a", "b");

    const RigidTransform id_t = compose(RigidTransform::identity("b"), t);
    CHECK(id_t.rotation.angularDistance(t.rotation) < 1e-12);
    CHECK((id_t.translation - t.translation).norm() < 1e-12);
    CHECK(id_t.from_frame == "a");
    CHECK(id_t.to_frame == "b");

    const RigidTransform round = compose(t, inverse(t));
    CHECK(std::abs(std::abs(round.rotation.w()) - 1.0) < 1e-9);
    CHECK(std::abs(round.rotation.x()) < 1e-9);
    CHECK(std::abs(round.rotation.y()) < 1e-9);
    CHECK(std::abs(round.rotation.z()) < 1e-9);
    CHECK(round.translation.norm() < 1e-9);

    RigidTransform ta = RigidTransform::identity("x");
    ta.translation = Eigen::Vector3d(1, 0, 0);
    ta.from_frame = "y";
    RigidTransform tb = RigidTransform::identity("y");
    tb.translation = Eigen::Vector3d(0, 2, 0);
    tb.from_frame = "z";
    const RigidTransform tc = compose(ta, tb);
    CHECK((tc.translation - Eigen::Vector3d(1, 2, 0)).norm() < 1e-12);

    CHECK_THROWS_AS(compose(t, t), FrameMismatch);
}

TEST_CASE("compose is associative on random triples") {
    std::mt19937_64 rng(7);
    for (int i = 0; i < 200; ++i) {
        const RigidTransform a = random_transform(rng, "b", "top");
        const RigidTransform b = random_transform(rng, "c", "b");
        const RigidTransform c = random_transform(rng, "d", "c");
        const RigidTransform left = compose(compose(a, b), c);
        const RigidTransform right = compose(a, compose(b, c));
        CHECK(left.rotation.angularDistance(right.rotation) < 1e-9);
        CHECK((left.translation - right.translation).norm() < 1e-9);
    }
}

TEST_CASE("ground_from_attitude: level, pitch-only, roll-only") {
    const RigidTransform level = ground_from_attitude({0.0, 0.0, 0.0}, 0.5);
    CHECK(level.rotation.angularDistance(Eigen::Quaterniond::Identity()) < 1e-12);
    CHECK((level.translation - Eigen::Vector3d(0, 0, 0.5)).norm() < 1e-12);
    CHECK(level.from_frame == kFrameRobot);
    CHECK(level.to_frame == kFrameGround);

    const double p = 0.3;
    const RigidTransform pitched = ground_from_attitude({0.0, 0.0, p}, 0.5);
    const Eigen::Vector3d x_in_ground = pitched.rotation * Eigen::Vector3d::UnitX();
    CHECK(x_in_ground.z() == doctest::Approx(-std::sin(p)).epsilon(1e-12));

    const double r = 0.2;
    const RigidTransform rolled = ground_from_attitude({0.0, r, 0.0}, 0.5);
    const Eigen::Vector3d y_in_ground = rolled.rotation * Eigen::Vector3d::UnitY();
    CHECK(y_in_ground.z() == doctest::Approx(std::sin(r)).epsilon(1e-12));

    CHECK_THROWS(ground_from_attitude({0.0, 1.6, 0.0}, 0.5));
}

TEST_CASE("project_ground_point: principal point, offset, behind camera") {
    const CameraModel cam{500, 500, 320, 240, 640, 480};
    RigidTransform cam_from_ground = RigidTransform::identity(kFrameGround);
    cam_from_ground.to_frame = kFrameCamera;

    const Eigen::Vector2d center = project_ground_point({0, 0, 1}, cam_from_ground, cam);
    CHECK(center.x() == doctest::Approx(320.0).epsilon(1e-12));
    CHECK(center.y() == doctest::Approx(240.0).epsilon(1e-12));

    const Eigen::Vector2d off = project_ground_point({0.1, 0, 1}, cam_from_ground, cam);
    CHECK(off.x() == doctest::Approx(370.0).epsilon(1e-12));
    CHECK(off.y() == doctest::Approx(240.0).epsilon(1e-12));

    CHECK_THROWS_AS(project_ground_point({0, 0, -1}, cam_from_ground, cam), BehindCamera);
}

TEST_CASE("projection round-trip through the ground plane") {
    const CameraModel cam{400, 420, 200, 150, 400, 300};
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> tilt(-0.5, 0.5);
    std::uniform_real_distribution<double> px(20.0, 380.0);
    std::uniform_real_distribution<double> py(160.0, 290.0);  // below the horizon

    int checked = 0;
    for (int i = 0; i < 500; ++i) {
        RigidTransform cam_from_ground = horizontal_camera(1.0 + i % 5);
        const Eigen::Quaterniond jitter(Eigen::AngleAxisd(tilt(rng), Eigen::Vector3d::UnitX()));
        cam_from_ground.rotation = (jitter * cam_from_ground.rotation).normalized();

        const Eigen::Vector2d pixel(px(rng), py(rng));
        Eigen::Vector3d q;
        try {
            q = back_project_to_ground(pixel, cam_from_ground, cam);
        } catch (const NoGroundIntersection&) {
            continue;
        }
        const Eigen::Vector2d re = project_ground_point(q, cam_from_ground, cam);
        const Eigen::Vector3d q2 = back_project_to_ground(re, cam_from_ground, cam);
        CHECK((re - pixel).norm() < 1e-6);
        CHECK((q2 - q).norm() < 1e-6);
        ++checked;
    }
    CHECK(checked > 300);
}

TEST_CASE("bev_resample reproduces a checkerboard under a nadir camera") {
    const CameraModel cam{300, 300, 160, 120, 320, 240};
    const RigidTransform cam_from_ground = nadir_camera(5.0);
    const double square = 0.5;
    const auto checker = [&](double x, double y) {
        const int ix = static_cast<int>(std::floor(x / square));
        const int iy = static_cast<int>(std::floor(y / square));
        return ((ix + iy) % 2 + 2) % 2 == 0 ? 0.25f : 0.75f;
    };

    // render the source image from the analytic ground texture
    ImageF source(cam.width, cam.height, 1);
    for (int v = 0; v < cam.height; ++v) {
        for (int u = 0; u < cam.width; ++u) {
            const Eigen::Vector3d g =
                back_project_to_ground({double(u), double(v)}, cam_from_ground, cam);
            source.at(u, v) = checker(g.x(), g.y());
        }
    }

    GroundGrid grid;
    grid.origin = Eigen::Vector2d(-1.5, -1.5);
    grid.cell_size = 0.05;
    grid.width = 60;
    grid.height = 60;
    const BevResult bev = bev_resample(source, cam_from_ground, cam, grid);

    int compared = 0;
    for (int j = 0; j < grid.height; ++j) {
        for (int i = 0; i < grid.width; ++i) {
            REQUIRE(bev.mask.at(i, j) == 1);
            const Eigen::Vector2d c = grid.cell_center(i, j);
            // skip cells near checker edges where bilinear mixes the two tones
            const double dx = std::abs(std::remainder(c.x(), square));
            const double dy = std::abs(std::remainder(c.y(), square));
            if (dx < 0.06 || dy < 0.06) continue;
            CHECK(std::abs(bev.image.at(i, j) - checker(c.x(), c.y())) <= 1.0 / 255.0);
            ++compared;
        }
    }
    CHECK(compared > 1000);
}

TEST_CASE("bev_resample masks cells behind the camera") {
    const CameraModel cam{300, 300, 160, 120, 320, 240};
    const RigidTransform cam_from_ground = horizontal_camera(1.0);
    ImageF source(cam.width, cam.height, 1, 0.5f);
    GroundGrid grid;
    grid.origin = Eigen::Vector2d(-4.0, -1.0);
    grid.cell_size = 0.25;
    grid.width = 8;  // covers x in [-4, -2]: behind the camera
    grid.height = 8;
    const BevResult bev = bev_resample(source, cam_from_ground, cam, grid);
    for (int j = 0; j < grid.height; ++j) {
        for (int i = 0; i < grid.width; ++i) CHECK(bev.mask.at(i, j) == 0);
    }
}

TEST_CASE("ground_pixel_footprint: quadratic growth and nadir uniformity") {
    const CameraModel cam{1000, 1000, 320, 240, 640, 480};
    const RigidTransform cam_from_ground = horizontal_camera(1.0);

    const auto footprint_at = [&](double d) {
        const Eigen::Vector2d px =
            project_ground_point(Eigen::Vector3d(d, 0, 0), cam_from_ground, cam);
        return ground_pixel_footprint(cam_from_ground, cam, px);
    };

    // d^2 / (f h) at d = 10
    CHECK(footprint_at(10.0).along_view == doctest::Approx(0.1).epsilon(0.02));
    // doubling the distance quadruples the along-view extent
    CHECK(footprint_at(10.0).along_view / footprint_at(5.0).along_view ==
          doctest::Approx(4.0).epsilon(0.05));

    // quadratic fit over [2, 15] m
    std::vector<double> ds, ys;
    for (double d = 2.0; d <= 15.0; d += 0.5) {
        ds.push_back(d);
        ys.push_back(footprint_at(d).along_view);
    }
    double num = 0, den = 0;
    for (size_t i = 0; i < ds.size(); ++i) {
        num += ys[i] * ds[i] * ds[i];
        den += ds[i] * ds[i] * ds[i] * ds[i];
    }
    const double c = num / den;
    double ss_res = 0, ss_tot = 0, mean = 0;
    for (double y : ys) mean += y;
    mean /= ys.size();
    for (size_t i = 0; i < ds.size(); ++i) {
        ss_res += (ys[i] - c * ds[i] * ds[i]) * (ys[i] - c * ds[i] * ds[i]);
        ss_tot += (ys[i] - mean) * (ys[i] - mean);
    }
    CHECK(1.0 - ss_res / ss_tot > 0.99);

    // nadir aerial camera at 10 m altitude, f = 2732: uniform ~3.66 mm
    const CameraModel aerial{2732, 2732, 320, 240, 640, 480};
    const RigidTransform nadir = nadir_camera(10.0);
    for (const auto& px : {Eigen::Vector2d(320, 240), Eigen::Vector2d(100, 60),
                           Eigen::Vector2d(600, 400)}) {
        const PixelFootprint fp = ground_pixel_footprint(nadir, aerial, px);
        CHECK(fp.along_view == doctest::Approx(10.0 / 2732.0).epsilon(1e-9));
        CHECK(fp.cross_view == doctest::Approx(10.0 / 2732.0).epsilon(1e-9));
    }

    // ray parallel to the plane
    const Eigen::Vector2d horizon(320.0, 240.0);
    CHECK_THROWS_AS(ground_pixel_footprint(cam_from_ground, cam, horizon),
                    NoGroundIntersection);
}

TEST_CASE("aerial_gsd_and_heading: scale, rotation, degeneracy") {
    const MarkerObservation m = square_marker({200, 200}, 100.0);
    const MarkerGeoref g = aerial_gsd_and_heading(m);
    CHECK(g.gsd == doctest::Approx(1.4 / 400.0).epsilon(1e-12));
    CHECK((g.center - Eigen::Vector2d(200, 200)).norm() < 1e-9);

    const MarkerGeoref g90 = aerial_gsd_and_heading(square_marker({200, 200}, 100.0, M_PI_2));
    const double shift = std::remainder(g90.heading - g.heading, 2.0 * std::numbers::pi);
    CHECK(std::abs(std::abs(shift) - M_PI_2) < 1e-9);

    MarkerObservation collapsed;
    collapsed.corners = {Eigen::Vector2d(5, 5), Eigen::Vector2d(5, 5), Eigen::Vector2d(5, 5),
                         Eigen::Vector2d(5, 5)};
    CHECK_THROWS_AS(aerial_gsd_and_heading(collapsed), DegenerateMarker);
}

TEST_CASE("aerial_gsd_and_heading is invariant to uniform image scaling") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.2, 2.0);
    std::uniform_real_distribution<double> rot(-3.0, 3.0);
    for (int i = 0; i < 50; ++i) {
        const double s = u(rng);
        MarkerObservation m = square_marker({140, 90}, 60.0, rot(rng));
        MarkerObservation scaled = m;
        for (auto& corner : scaled.corners) corner *= s;
        const MarkerGeoref a = aerial_gsd_and_heading(m);
        const MarkerGeoref b = aerial_gsd_and_heading(scaled);
        CHECK(b.gsd == doctest::Approx(a.gsd / s).epsilon(1e-9));
        CHECK(std::abs(std::remainder(b.heading - a.heading, 2.0 * std::numbers::pi)) < 1e-9);
    }
}

TEST_CASE("extract_patch: constant source, coverage rejection") {
    ImageF source(100, 100, 1, 0.6f);
    GroundGrid grid;
    grid.origin = Eigen::Vector2d(0, 0);
    grid.cell_size = 0.05;
    grid.width = 100;
    grid.height = 100;
    const GroundImageFrame frame = GroundImageFrame::from_grid(grid);

    PatchFootprint inside;
    inside.center = Eigen::Vector2d(2.5, 2.5);
    inside.yaw = 0.4;
    inside.side = 1.5;
    const PatchResult res = extract_patch(source, nullptr, frame, inside, 64);
    CHECK(res.coverage == doctest::Approx(1.0));
    for (float v : res.patch.data) CHECK(v == doctest::Approx(0.6).epsilon(1e-6));

    PatchFootprint outside = inside;
    outside.center = Eigen::Vector2d(0.0, 2.5);  // half the footprint off the raster
    CHECK_THROWS_AS(extract_patch(source, nullptr, frame, outside, 64), InsufficientCoverage);
}

TEST_CASE("extract_patch rigid-motion equivariance vs supersampled NN oracle") {
    // smooth source texture so interpolation error stays below 2 gray levels
    ImageF source(160, 160, 1);
    for (int y = 0; y < 160; ++y) {
        for (int x = 0; x < 160; ++x) {
            source.at(x, y) =
                static_cast<float>(0.5 + 0.45 * value_noise(x * 0.045, y * 0.045, 99));
        }
    }
    GroundGrid grid;
    grid.origin = Eigen::Vector2d(-1.6, -1.6);
    grid.cell_size = 0.02;
    grid.width = 160;
    grid.height = 160;
    const GroundImageFrame frame = GroundImageFrame::from_grid(grid);

    for (double theta : {0.35, -0.8, 1.3}) {
        PatchFootprint rotated;
        rotated.center = Eigen::Vector2d(0, 0);  // raster center
        rotated.yaw = theta;
        rotated.side = 1.5;
        const PatchResult a = extract_patch(source, nullptr, frame, rotated, 48);

        const ImageF counter = oracles::nn_rotate(source, -theta, 8);
        PatchFootprint axis = rotated;
        axis.yaw = 0.0;
        const PatchResult b = extract_patch(counter, nullptr, frame, axis, 48);

        double max_diff = 0;
        for (size_t i = 0; i < a.patch.data.size(); ++i) {
            max_diff = std::max(max_diff, std::abs(double(a.patch.data[i]) - b.patch.data[i]));
        }
        CHECK(max_diff <= 2.0 / 255.0);
    }
}
