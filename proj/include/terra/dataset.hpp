#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "terra/geometry.hpp"
#include "terra/signals.hpp"

namespace terra {

struct TrajectorySample {
    double timestamp = 0;
    Eigen::Vector3d position{0, 0, 0};  // world frame, meters
    double yaw = 0;                     // radians
    double speed_cmd = 0;               // m/s
};

struct TimeInterval {
    double t0 = 0;
    double t1 = 0;
};

struct PointOfInterest {
    int id = 0;
    double x = 0, y = 0, yaw = 0;  // world pose
    double timestamp = 0;          // interpolated
    double arc_length = 0;         // meters from trajectory start
};

struct PatchView {
    std::string source;   // "ugv" | "uav"
    std::string frame_id;
    double camera_distance = 0;  // horizontal meters, UGV views
    bool in_comparison = true;   // false for UGV views beyond the distance cap
    ImageF patch;
    std::string path;  // relative PNG path once persisted
};

struct PatchRecord {
    int poi_id = 0;
    double timestamp = 0;
    double x = 0, y = 0, yaw = 0;
    std::string terrain = "unknown";
    std::vector<PatchView> views;
    std::array<double, 3> labels{0, 0, 0};       // m_z, m_omega, m_p (raw)
    std::array<double, 3> labels_norm{0, 0, 0};  // min-max normalized
};

struct FoldAssignment {
    int k = 0;
    std::map<int, int> fold_of;  // poi_id -> fold index

    int fold(int poi_id) const { return fold_of.at(poi_id); }
};

/// Cross-validation protocol. The stated 5-fold / 90-10 combination is
/// inconsistent (5 folds imply 80/20), so both interpretations exist: the
/// default trains on 9 of 10 folds and evaluates 5 of them, the alternative
/// is plain k-fold.
struct CvProtocol {
    int k = 10;
    std::vector<int> eval_folds{0, 1, 2, 3, 4};

    static CvProtocol paper_9010() { return {10, {0, 1, 2, 3, 4}}; }
    static CvProtocol plain_k(int k);
};

/// Intervals where |v_l - v_r| / max(|v_l|, |v_r|, eps) < threshold and both
/// wheel speeds exceed 0.1 m/s. Interval bounds are sample timestamps.
std::vector<TimeInterval> filter_straight_segments(const std::vector<double>& timestamps,
                                                   const std::vector<double>& v_left,
                                                   const std::vector<double>& v_right,
                                                   double threshold = 0.1);

/// Arc-length resampling of the trajectory inside the straight intervals.
/// Pose and timestamp are interpolated linearly between bracketing samples,
/// yaw along the shortest arc. Arc length restarts counting POIs at each
/// interval's first in-range sample.
std::vector<PointOfInterest> sample_pois(const std::vector<TrajectorySample>& traj,
                                         const std::vector<TimeInterval>& intervals,
                                         double spacing = 0.3);

/// Linear pose interpolation between bracketing samples (yaw along the
/// shortest arc). Throws OutOfSupport outside the trajectory span.
TrajectorySample interpolate_pose(const std::vector<TrajectorySample>& traj, double t);

struct UgvFrame {
    std::string frame_id;
    double timestamp = 0;
    ImageF image;
    AttitudeSample attitude;
    double x = 0, y = 0, yaw = 0;  // robot world pose at capture time
};

struct UavFrame {
    std::string frame_id;
    double timestamp = 0;
    ImageF image;
    MarkerObservation marker;
    double robot_x = 0, robot_y = 0, robot_yaw = 0;  // marker pose at capture time
};

struct ExtractionConfig {
    CameraModel ugv_camera;
    RigidTransform cam_from_robot;  // robot -> camera
    double robot_height = 0.5;
    GroundGrid bev_grid;
    double patch_side = 1.5;        // meters
    int patch_resolution = 64;      // pixels
    double max_ugv_distance = 5.0;  // comparison-set cap, meters
    double max_ugv_candidate_distance = 12.0;  // beyond this a view is not attempted
    double min_coverage = 0.95;
    // optional terrain tag lookup for report breakdowns
    std::function<std::string(double, double)> terrain_lookup;
};

struct MetricTriple {
    MetricSeries m_z;
    MetricSeries m_omega;
    MetricSeries m_p;
};

/// Extract co-registered UGV/UAV patches at every POI and attach labels.
/// Per-view failures are skipped; a record is kept only if at least one view
/// succeeded and all three labels are in range.
std::vector<PatchRecord> build_patch_records(const std::vector<PointOfInterest>& pois,
                                             const std::vector<UgvFrame>& ugv_frames,
                                             const std::vector<UavFrame>& uav_frames,
                                             const ExtractionConfig& config,
                                             const MetricTriple& labels);

struct LabelStats {
    std::array<double, 3> min{0, 0, 0};
    std::array<double, 3> max{1, 1, 1};

    double normalize(int metric, double raw) const;
    double denormalize(int metric, double norm) const;
};

/// Min-max normalization. Without precomputed stats they are derived from
/// `records` (the training set); evaluation data normalized with foreign
/// stats is clamped to [0, 1]. Throws DegenerateRange when max == min.
LabelStats normalize_labels(std::vector<PatchRecord>& records,
                            const std::optional<LabelStats>& stats = std::nullopt);

/// Deterministic shuffle + round-robin fold assignment.
FoldAssignment make_folds(const std::vector<PatchRecord>& records, int k, std::uint64_t seed);

/// Uniform random choice among the record's views of `source` (UGV views
/// restricted to the comparison subset). Throws NoViews.
const PatchView& sample_training_view(const PatchRecord& record, const std::string& source,
                                      std::mt19937_64& rng);

// --- persistence -----------------------------------------------------------
// Layout: <dir>/records.json plus one directory per POI id holding
// {source}_{frame_id}.png views. folds.json stores a FoldAssignment.

void save_records(const std::vector<PatchRecord>& records, const std::string& dir);
std::vector<PatchRecord> load_records(const std::string& dir, bool load_images = true);
void save_folds(const FoldAssignment& folds, const std::string& path);
FoldAssignment load_folds(const std::string& path);

}  // namespace terra
