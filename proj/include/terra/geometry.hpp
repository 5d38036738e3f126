#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>
#include <optional>
#include <string>

#include "terra/image.hpp"

namespace terra {

// Frame conventions: ground frame Z-up with origin on the local ground plane,
// robot frame X-forward / Y-left / Z-up, camera frame Z-forward / X-right /
// Y-down. BEV grids live in the robot heading frame (yaw = 0 by construction).
inline constexpr const char* kFrameGround = "ground";
inline constexpr const char* kFrameRobot = "robot";
inline constexpr const char* kFrameCamera = "camera";

/// SE(3) transform carrying frame tags. Maps point coordinates expressed in
/// `from_frame` into `to_frame`.
struct RigidTransform {
    Eigen::Quaterniond rotation{1.0, 0.0, 0.0, 0.0};
    Eigen::Vector3d translation{0.0, 0.0, 0.0};
    std::string from_frame;
    std::string to_frame;

    Eigen::Vector3d apply(const Eigen::Vector3d& p) const {
        return rotation * p + translation;
    }

    static RigidTransform identity(const std::string& frame) {
        return RigidTransform{Eigen::Quaterniond::Identity(), Eigen::Vector3d::Zero(), frame, frame};
    }
};

/// a(b(x)): requires a.from_frame == b.to_frame; result maps b.from -> a.to.
RigidTransform compose(const RigidTransform& a, const RigidTransform& b);
RigidTransform inverse(const RigidTransform& t);

/// Rectified pinhole camera.
struct CameraModel {
    double fx = 0, fy = 0, cx = 0, cy = 0;
    int width = 0, height = 0;

    bool valid() const {
        return fx > 0 && fy > 0 && cx >= 0 && cx < width && cy >= 0 && cy < height;
    }
};

struct AttitudeSample {
    double timestamp = 0;  // seconds
    double roll = 0;       // radians
    double pitch = 0;      // radians
};

/// Square fiducial marker seen in an aerial image. Corners are pixel
/// coordinates ordered clockwise from the marker's front-left.
struct MarkerObservation {
    std::array<Eigen::Vector2d, 4> corners;
    double known_perimeter = 1.4;  // meters
};

/// Target raster for BEV resampling, in the ground frame. Cell (i, j) covers
/// [origin + (i, j) * cell_size, origin + (i+1, j+1) * cell_size).
struct GroundGrid {
    Eigen::Vector2d origin{0.0, -6.0};  // meters, ground frame
    double cell_size = 0.02;            // meters per cell
    int width = 600;
    int height = 600;

    Eigen::Vector2d cell_center(int i, int j) const {
        return origin + Eigen::Vector2d((i + 0.5) * cell_size, (j + 0.5) * cell_size);
    }
};

/// Transform from the robot frame to the local ground frame, built from IMU
/// roll/pitch. Rotation is Ry(pitch) * Rx(roll); yaw is identically zero,
/// translation lifts the robot origin to robot_height above the plane.
RigidTransform ground_from_attitude(const AttitudeSample& att, double robot_height);

/// Pinhole projection of a ground-frame point. Throws BehindCamera for
/// camera-frame depth <= 1e-6 m.
Eigen::Vector2d project_ground_point(const Eigen::Vector3d& p_ground,
                                     const RigidTransform& cam_from_ground,
                                     const CameraModel& cam);

/// Intersection of the pixel's viewing ray with the z = 0 ground plane.
/// Throws NoGroundIntersection if the ray misses the plane ahead of the camera.
Eigen::Vector3d back_project_to_ground(const Eigen::Vector2d& pixel,
                                       const RigidTransform& cam_from_ground,
                                       const CameraModel& cam);

/// Non-throwing variant; nullopt when the ray misses the plane.
std::optional<Eigen::Vector3d> try_back_project_to_ground(const Eigen::Vector2d& pixel,
                                                          const RigidTransform& cam_from_ground,
                                                          const CameraModel& cam);

struct BevResult {
    ImageF image;
    ImageU8 mask;  // 1 where the grid cell saw valid source pixels
};

/// Resample a camera image onto a ground-plane grid (locally flat ground
/// hypothesis). Projection failures are recorded in the mask, never thrown.
BevResult bev_resample(const ImageF& image, const RigidTransform& cam_from_ground,
                       const CameraModel& cam, const GroundGrid& grid);

/// Ground extents covered by one pixel, from back-projected edge midpoints.
/// along_view differences the vertical pixel pair, cross_view the horizontal.
struct PixelFootprint {
    double along_view = 0;  // meters
    double cross_view = 0;  // meters
};
PixelFootprint ground_pixel_footprint(const RigidTransform& cam_from_ground,
                                      const CameraModel& cam,
                                      const Eigen::Vector2d& pixel);

struct MarkerGeoref {
    double gsd = 0;      // meters per pixel
    double heading = 0;  // radians, image frame (x right, y down)
    Eigen::Vector2d center{0, 0};  // pixel
};

/// Scale and heading of an aerial image from the marker's known perimeter.
/// Heading is the direction from the rear-edge midpoint through the center.
MarkerGeoref aerial_gsd_and_heading(const MarkerObservation& m);

/// Affine similarity mapping ground/world plane coordinates to source pixels:
/// pixel = A * (w - anchor_world) + anchor_px.
struct GroundImageFrame {
    Eigen::Matrix2d A = Eigen::Matrix2d::Identity();
    Eigen::Vector2d anchor_world{0, 0};
    Eigen::Vector2d anchor_px{0, 0};

    Eigen::Vector2d to_pixel(const Eigen::Vector2d& w) const {
        return A * (w - anchor_world) + anchor_px;
    }

    /// Pixel frame of a BEV raster produced with `grid`.
    static GroundImageFrame from_grid(const GroundGrid& grid);

    /// Pixel frame of an aerial image. The image is assumed to have the
    /// standard viewed-from-above chirality (y down): a displacement to the
    /// robot's left maps to the marker heading rotated -90 deg in pixel axes.
    static GroundImageFrame from_marker(const MarkerGeoref& georef,
                                        const Eigen::Vector2d& robot_world_xy,
                                        double robot_yaw);
};

/// Oriented square footprint on the ground/world plane. Output patches put
/// the +x (yaw) direction at the top row and the +y (left) direction at the
/// left column.
struct PatchFootprint {
    Eigen::Vector2d center{0, 0};
    double yaw = 0;
    double side = 1.5;  // meters
};

struct PatchResult {
    ImageF patch;
    double coverage = 0;  // share of samples inside the source (and mask)
};

/// Resample an oriented footprint from a georeferenced raster at
/// out_resolution^2 via bilinear sampling. nullptr mask means all-valid.
/// Returns nullopt when coverage < min_coverage.
std::optional<PatchResult> try_extract_patch(const ImageF& source, const ImageU8* mask,
                                             const GroundImageFrame& frame,
                                             const PatchFootprint& footprint,
                                             int out_resolution, double min_coverage = 0.95);

/// Throwing wrapper: InsufficientCoverage when the patch is rejected.
PatchResult extract_patch(const ImageF& source, const ImageU8* mask,
                          const GroundImageFrame& frame, const PatchFootprint& footprint,
                          int out_resolution, double min_coverage = 0.95);

}  // namespace terra
