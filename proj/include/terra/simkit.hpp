#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "terra/dataset.hpp"
#include "terra/geometry.hpp"
#include "terra/mapping.hpp"
#include "terra/signals.hpp"

namespace terra {

/// One synthetic terrain class: texture parameters plus the ground-truth
/// interaction statistics the sensors reproduce.
struct TerrainClassSpec {
    std::string name;
    double base_gray = 0.5;
    double noise_amp = 0.1;     // texture amplitude
    double spatial_freq = 8.0;  // texture cycles per meter
    double roughness = 0.5;     // induced a_z std, m/s^2
    double bumpiness = 0.2;     // induced w_x/w_y std, rad/s
    double power_draw = 100.0;  // watts above baseline
    bool occluder = false;      // tall-vegetation analog
};

enum class SceneLayout { half_split, blocks, voronoi };

struct Scene {
    double world_size = 60.0;  // meters; world is [0, world_size]^2
    int grid_n = 64;           // class map resolution
    std::vector<int> class_map;
    std::vector<TerrainClassSpec> classes;
    std::uint64_t seed = 0;

    int class_at(double x, double y) const;
    const TerrainClassSpec& spec_at(double x, double y) const;

    /// Procedural ground texture in [0, 1]. Occluder cells show a shared
    /// occluder texture unless (aerial_view && occlusion_study): the aerial
    /// view then reveals the distinguishing ground texture.
    double texture(double x, double y, bool aerial_view, bool occlusion_study) const;

    double roughness_at(double x, double y) const { return spec_at(x, y).roughness; }
    double bumpiness_at(double x, double y) const { return spec_at(x, y).bumpiness; }
    double power_at(double x, double y) const { return spec_at(x, y).power_draw; }
};

Scene generate_scene(const std::vector<TerrainClassSpec>& specs, SceneLayout layout,
                     std::uint64_t seed, double world_size = 60.0, int grid_n = 64);

struct TraverseConfig {
    double speed = 1.5;        // m/s
    double traj_rate = 10.0;   // Hz
    double odom_rate = 20.0;   // Hz
    double imu_rate = 100.0;   // Hz
    double power_rate = 10.0;  // Hz
    double track_width = 1.2;  // meters, wheel base for v_l/v_r
    double baseline_power = 150.0;  // watts
    double nominal_voltage = 54.0;  // volts
    double accel_noise_floor = 0.005;  // m/s^2, added after band-shaping
};

struct SensorBundle {
    std::vector<TrajectorySample> trajectory;
    TimeSeries imu_ax, imu_ay, imu_az, imu_wx, imu_wy, imu_wz;
    TimeSeries power_current, power_voltage;
    std::vector<double> odom_t, odom_vl, odom_vr;
    double duration = 0;  // seconds
};

/// Drive the polyline at constant speed and synthesize proprioception:
/// a_z and w_x/w_y are band-shaped (1-30 Hz) white noise with std given by
/// the local class, I*V reproduces baseline + class power draw.
SensorBundle simulate_traverse(const Scene& scene, const std::vector<Eigen::Vector2d>& path,
                               const TraverseConfig& cfg, std::uint64_t seed);

/// Uniform-GSD nadir rendering of the scene texture over a world rectangle.
GeoImage render_aerial(const Scene& scene, const Eigen::Vector2d& region_min,
                       const Eigen::Vector2d& region_max, double gsd,
                       bool occlusion_study = false);

/// Perspective rendering of the ground texture for a robot at (x, y, yaw),
/// roll = pitch = 0. Each pixel averages the texture over its ground
/// footprint, reproducing the vanishing-pixel-density blur; rays above the
/// horizon get a sky value.
ImageF render_fpv(const Scene& scene, double x, double y, double yaw,
                  const CameraModel& cam, const RigidTransform& cam_from_robot,
                  double robot_height);

/// Camera rig used by the synthetic UGV.
struct FpvRig {
    CameraModel camera;
    RigidTransform cam_from_robot;  // robot -> camera
    double robot_height = 0.4;

    static FpvRig standard();  // 320x240 f=260, 0.8 m above ground, 15 deg down
};

struct DatasetBuildConfig {
    double poi_spacing = 0.3;         // meters
    double ugv_frame_interval = 1.0;  // seconds; <= 0 disables UGV imaging
    double uav_frame_interval = 2.0;  // seconds; <= 0 disables UAV imaging
    double uav_window_half = 6.0;     // meters, aerial frame half extent
    double uav_gsd = 0.02;            // meters per pixel
    double marker_side = 0.35;        // meters (1.4 m perimeter)
    bool occlusion_study = false;
    int patch_resolution = 64;
    double patch_side = 1.5;
    double max_ugv_distance = 5.0;
    double max_ugv_candidate_distance = 12.0;
    double label_rate = 10.0;  // Hz grid for the metric series
    WindowSpec window;
    WelchConfig welch;
    TraverseConfig traverse;
    FpvRig rig = FpvRig::standard();
    std::uint64_t seed = 1;
};

struct BuiltDataset {
    SensorBundle sensors;
    MetricTriple metrics;
    std::vector<UgvFrame> ugv_frames;
    std::vector<UavFrame> uav_frames;
    std::vector<PatchRecord> records;
};

/// Closed loop: traverse, render frames, compute labels, extract records.
BuiltDataset build_dataset(const Scene& scene, const std::vector<Eigen::Vector2d>& path,
                           const DatasetBuildConfig& cfg);

/// File-based variant emitting exactly what the extraction pipeline ingests:
/// imu.csv, power.csv, odometry.csv, trajectory.csv, frames.jsonl + PNGs,
/// and terrain_map.json with the class layout.
void write_simulation(const Scene& scene, const std::vector<Eigen::Vector2d>& path,
                      const DatasetBuildConfig& cfg, const std::string& out_dir);

enum class AblationKind { distance, blur, occlusion };

struct AblationConfig {
    std::uint64_t seed = 7;
    int epochs = 120;
    int batch_size = 32;
    double learning_rate = 1e-3;
    int metric_index = 0;  // m_z
    std::string out_dir;   // when set: report.csv + report.png are written
};

struct AblationRow {
    double x = 0;       // distance bin center / simulated distance / subset id
    double rmse = 0;
    int n = 0;          // evaluated samples
    std::string label;  // bin or subset name
};

struct AblationReport {
    AblationKind kind;
    std::vector<AblationRow> rows;
    std::map<std::string, double> extras;  // e.g. spearman, improvement
};

AblationReport run_ablation(AblationKind kind, const AblationConfig& cfg);

/// Spearman rank correlation (average ranks on ties).
double spearman(const std::vector<double>& a, const std::vector<double>& b);

/// Deterministic value-noise field in [-1, 1].
double value_noise(double x, double y, std::uint64_t seed);

/// Named class sets: "two_class", "texture_detail" (uniform mean gray, only
/// high-frequency texture carries the labels), "occlusion" (two occluder
/// classes sharing one occluder texture).
std::vector<TerrainClassSpec> preset_classes(const std::string& name);

const char* ablation_name(AblationKind kind);

}  // namespace terra
