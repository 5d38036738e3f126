#include "terra/geometry.hpp"

#include <cmath>

#include "terra/errors.hpp"

namespace terra {

RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
    if (a.from_frame != b.to_frame) {
        throw FrameMismatch("compose: '" + a.from_frame + "' != '" + b.to_frame + "'");
    }
    RigidTransform out;
    out.rotation = (a.rotation * b.rotation).normalized();
    out.translation = a.rotation * b.translation + a.translation;
    out.from_frame = b.from_frame;
    out.to_frame = a.to_frame;
    return out;
}

RigidTransform inverse(const RigidTransform& t) {
    RigidTransform out;
    out.rotation = t.rotation.conjugate().normalized();
    out.translation = -(out.rotation * t.translation);
    out.from_frame = t.to_frame;
    out.to_frame = t.from_frame;
    return out;
}

RigidTransform ground_from_attitude(const AttitudeSample& att, double robot_height) {
    constexpr double kHalfPi = 1.5707963267948966;
    if (std::abs(att.roll) >= kHalfPi || std::abs(att.pitch) >= kHalfPi) {
        throw std::invalid_argument("ground_from_attitude: attitude outside driving range");
    }
    RigidTransform out;
    out.rotation = Eigen::Quaterniond(Eigen::AngleAxisd(att.pitch, Eigen::Vector3d::UnitY()) *
                                      Eigen::AngleAxisd(att.roll, Eigen::Vector3d::UnitX()))
                       .normalized();
    out.translation = Eigen::Vector3d(0.0, 0.0, robot_height);
    out.from_frame = kFrameRobot;
    out.to_frame = kFrameGround;
    return out;
}

Eigen::Vector2d project_ground_point(const Eigen::Vector3d& p_ground,
                                     const RigidTransform& cam_from_ground,
                                     const CameraModel& cam) {
    const Eigen::Vector3d p = cam_from_ground.apply(p_ground);
    if (p.z() <= 1e-6) {
        throw BehindCamera("project_ground_point: depth " + std::to_string(p.z()));
    }
    return {cam.fx * p.x() / p.z() + cam.cx, cam.fy * p.y() / p.z() + cam.cy};
}

std::optional<Eigen::Vector3d> try_back_project_to_ground(const Eigen::Vector2d& pixel,
                                                          const RigidTransform& cam_from_ground,
                                                          const CameraModel& cam) {
    const RigidTransform ground_from_cam = inverse(cam_from_ground);
    const Eigen::Vector3d origin = ground_from_cam.translation;
    const Eigen::Vector3d ray_cam((pixel.x() - cam.cx) / cam.fx,
                                  (pixel.y() - cam.cy) / cam.fy, 1.0);
    const Eigen::Vector3d dir = ground_from_cam.rotation * ray_cam;
    if (std::abs(dir.z()) < 1e-12) return std::nullopt;
    const double t = -origin.z() / dir.z();
    if (t <= 0.0) return std::nullopt;
    return origin + t * dir;
}

Eigen::Vector3d back_project_to_ground(const Eigen::Vector2d& pixel,
                                       const RigidTransform& cam_from_ground,
                                       const CameraModel& cam) {
    const auto p = try_back_project_to_ground(pixel, cam_from_ground, cam);
    if (!p) {
        throw NoGroundIntersection("pixel ray misses the ground plane ahead of the camera");
    }
    return *p;
}

BevResult bev_resample(const ImageF& image, const RigidTransform& cam_from_ground,
                       const CameraModel& cam, const GroundGrid& grid) {
    BevResult out;
    out.image = ImageF(grid.width, grid.height, image.channels, 0.0f);
    out.mask = ImageU8(grid.width, grid.height, 1, 0);

    // hoist the transform into matrix form; this loop dominates extraction time
    const Eigen::Matrix3d R = cam_from_ground.rotation.toRotationMatrix();
    const Eigen::Vector3d t = cam_from_ground.translation;

    for (int j = 0; j < grid.height; ++j) {
        for (int i = 0; i < grid.width; ++i) {
            const Eigen::Vector2d g = grid.cell_center(i, j);
            const Eigen::Vector3d p = R * Eigen::Vector3d(g.x(), g.y(), 0.0) + t;
            if (p.z() <= 1e-6) continue;
            const double u = cam.fx * p.x() / p.z() + cam.cx;
            const double v = cam.fy * p.y() / p.z() + cam.cy;
            if (!in_support(image, u, v)) continue;
            for (int c = 0; c < image.channels; ++c) {
                out.image.at(i, j, c) = static_cast<float>(bilinear(image, u, v, c));
            }
            out.mask.at(i, j) = 1;
        }
    }
    return out;
}

PixelFootprint ground_pixel_footprint(const RigidTransform& cam_from_ground,
                                      const CameraModel& cam,
                                      const Eigen::Vector2d& pixel) {
    const Eigen::Vector3d up = back_project_to_ground(pixel + Eigen::Vector2d(0, -0.5), cam_from_ground, cam);
    const Eigen::Vector3d dn = back_project_to_ground(pixel + Eigen::Vector2d(0, 0.5), cam_from_ground, cam);
    const Eigen::Vector3d lf = back_project_to_ground(pixel + Eigen::Vector2d(-0.5, 0), cam_from_ground, cam);
    const Eigen::Vector3d rt = back_project_to_ground(pixel + Eigen::Vector2d(0.5, 0), cam_from_ground, cam);
    return {(dn - up).norm(), (rt - lf).norm()};
}

MarkerGeoref aerial_gsd_and_heading(const MarkerObservation& m) {
    if (m.known_perimeter <= 0.0) {
        throw DegenerateMarker("known_perimeter must be positive");
    }
    double perimeter_px = 0.0;
    for (int i = 0; i < 4; ++i) {
        perimeter_px += (m.corners[(i + 1) % 4] - m.corners[i]).norm();
    }
    if (perimeter_px < 4.0) {
        throw DegenerateMarker("marker perimeter " + std::to_string(perimeter_px) + " px");
    }
    MarkerGeoref out;
    out.gsd = m.known_perimeter / perimeter_px;
    out.center = 0.25 * (m.corners[0] + m.corners[1] + m.corners[2] + m.corners[3]);
    const Eigen::Vector2d rear_mid = 0.5 * (m.corners[2] + m.corners[3]);
    const Eigen::Vector2d v = out.center - rear_mid;
    if (v.norm() < 1e-9) {
        throw DegenerateMarker("marker heading undefined");
    }
    out.heading = std::atan2(v.y(), v.x());
    return out;
}

GroundImageFrame GroundImageFrame::from_grid(const GroundGrid& grid) {
    GroundImageFrame f;
    f.A = Eigen::Matrix2d::Identity() / grid.cell_size;
    f.anchor_world = grid.origin;
    f.anchor_px = Eigen::Vector2d(-0.5, -0.5);
    return f;
}

GroundImageFrame GroundImageFrame::from_marker(const MarkerGeoref& georef,
                                               const Eigen::Vector2d& robot_world_xy,
                                               double robot_yaw) {
    // forward image direction is the marker heading; world-left maps to the
    // heading rotated -90 deg in pixel axes (y-down chirality)
    const Eigen::Vector2d u_f(std::cos(georef.heading), std::sin(georef.heading));
    const Eigen::Vector2d u_l(std::sin(georef.heading), -std::cos(georef.heading));
    Eigen::Matrix2d basis;
    basis.col(0) = u_f;
    basis.col(1) = u_l;
    Eigen::Matrix2d world_to_heading;
    world_to_heading << std::cos(robot_yaw), std::sin(robot_yaw),
        -std::sin(robot_yaw), std::cos(robot_yaw);
    GroundImageFrame f;
    f.A = basis * world_to_heading / georef.gsd;
    f.anchor_world = robot_world_xy;
    f.anchor_px = georef.center;
    return f;
}

std::optional<PatchResult> try_extract_patch(const ImageF& source, const ImageU8* mask,
                                             const GroundImageFrame& frame,
                                             const PatchFootprint& footprint,
                                             int out_resolution, double min_coverage) {
    if (footprint.side <= 0.0 || out_resolution < 1 || source.empty()) return std::nullopt;

    PatchResult res;
    res.patch = ImageF(out_resolution, out_resolution, source.channels, 0.0f);
    const double c = std::cos(footprint.yaw);
    const double s = std::sin(footprint.yaw);
    int valid = 0;
    for (int j = 0; j < out_resolution; ++j) {
        // +x (forward) at the top row, +y (left) at the left column
        const double a = (0.5 - (j + 0.5) / out_resolution) * footprint.side;
        for (int i = 0; i < out_resolution; ++i) {
            const double b = (0.5 - (i + 0.5) / out_resolution) * footprint.side;
            const Eigen::Vector2d w = footprint.center + Eigen::Vector2d(c * a - s * b, s * a + c * b);
            const Eigen::Vector2d px = frame.to_pixel(w);
            const bool ok = in_support(source, px.x(), px.y()) &&
                            (mask == nullptr || mask_supports(*mask, px.x(), px.y()));
            if (!ok) continue;
            for (int ch = 0; ch < source.channels; ++ch) {
                res.patch.at(i, j, ch) = static_cast<float>(bilinear(source, px.x(), px.y(), ch));
            }
            ++valid;
        }
    }
    res.coverage = static_cast<double>(valid) / (static_cast<double>(out_resolution) * out_resolution);
    if (res.coverage < min_coverage) return std::nullopt;
    return res;
}

PatchResult extract_patch(const ImageF& source, const ImageU8* mask,
                          const GroundImageFrame& frame, const PatchFootprint& footprint,
                          int out_resolution, double min_coverage) {
    auto res = try_extract_patch(source, mask, frame, footprint, out_resolution, min_coverage);
    if (!res) {
        throw InsufficientCoverage("patch coverage below " + std::to_string(min_coverage));
    }
    return *res;
}

}  // namespace terra
