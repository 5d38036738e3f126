#include "terra/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include <nlohmann/json.hpp>

#include "terra/errors.hpp"

namespace terra {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

constexpr double kEps = 1e-9;

double wrap_pi(double a) {
    while (a > std::numbers::pi) a -= 2.0 * std::numbers::pi;
    while (a <= -std::numbers::pi) a += 2.0 * std::numbers::pi;
    return a;
}

double lerp_yaw(double a, double b, double u) {
    return wrap_pi(a + wrap_pi(b - a) * u);
}

Eigen::Vector2d rotate2(double angle, const Eigen::Vector2d& v) {
    const double c = std::cos(angle), s = std::sin(angle);
    return {c * v.x() - s * v.y(), s * v.x() + c * v.y()};
}

}  // namespace

CvProtocol CvProtocol::plain_k(int k) {
    CvProtocol p;
    p.k = k;
    p.eval_folds.clear();
    for (int i = 0; i < k; ++i) p.eval_folds.push_back(i);
    return p;
}

std::vector<TimeInterval> filter_straight_segments(const std::vector<double>& timestamps,
                                                   const std::vector<double>& v_left,
                                                   const std::vector<double>& v_right,
                                                   double threshold) {
    if (timestamps.size() != v_left.size() || timestamps.size() != v_right.size()) {
        throw std::invalid_argument("filter_straight_segments: series size mismatch");
    }
    std::vector<TimeInterval> intervals;
    bool open = false;
    TimeInterval cur;
    for (size_t i = 0; i < timestamps.size(); ++i) {
        const double denom = std::max({std::abs(v_left[i]), std::abs(v_right[i]), 1e-6});
        const bool straight = std::abs(v_left[i] - v_right[i]) / denom < threshold &&
                              v_left[i] > 0.1 && v_right[i] > 0.1;
        if (straight && !open) {
            cur.t0 = timestamps[i];
            open = true;
        }
        if (straight) cur.t1 = timestamps[i];
        if (!straight && open) {
            intervals.push_back(cur);
            open = false;
        }
    }
    if (open) intervals.push_back(cur);
    return intervals;
}

std::vector<PointOfInterest> sample_pois(const std::vector<TrajectorySample>& traj,
                                         const std::vector<TimeInterval>& intervals,
                                         double spacing) {
    if (spacing <= 0.0) throw std::invalid_argument("sample_pois: spacing must be > 0");
    std::vector<PointOfInterest> pois;
    if (traj.size() < 2) return pois;

    // global 2D arc length along the full trajectory
    std::vector<double> arc(traj.size(), 0.0);
    for (size_t i = 1; i < traj.size(); ++i) {
        arc[i] = arc[i - 1] + (traj[i].position.head<2>() - traj[i - 1].position.head<2>()).norm();
    }

    int next_id = 0;
    for (const TimeInterval& iv : intervals) {
        // trajectory samples covered by this interval
        size_t first = 0;
        while (first < traj.size() && traj[first].timestamp < iv.t0 - kEps) ++first;
        size_t last = first;
        while (last + 1 < traj.size() && traj[last + 1].timestamp <= iv.t1 + kEps) ++last;
        if (first >= traj.size() || last <= first) continue;

        size_t seg = first;
        for (int k = 0;; ++k) {
            const double s = arc[first] + k * spacing;
            if (s > arc[last] + 1e-9) break;
            while (seg + 1 < last && arc[seg + 1] < s) ++seg;
            const double span = arc[seg + 1] - arc[seg];
            const double u = span > kEps ? (s - arc[seg]) / span : 0.0;

            PointOfInterest poi;
            poi.id = next_id++;
            const Eigen::Vector3d p =
                (1.0 - u) * traj[seg].position + u * traj[seg + 1].position;
            poi.x = p.x();
            poi.y = p.y();
            poi.yaw = lerp_yaw(traj[seg].yaw, traj[seg + 1].yaw, u);
            poi.timestamp =
                (1.0 - u) * traj[seg].timestamp + u * traj[seg + 1].timestamp;
            poi.arc_length = s;
            pois.push_back(poi);
        }
    }
    return pois;
}

TrajectorySample interpolate_pose(const std::vector<TrajectorySample>& traj, double t) {
    if (traj.empty() || t < traj.front().timestamp - kEps || t > traj.back().timestamp + kEps) {
        throw OutOfSupport("interpolate_pose: t outside trajectory span");
    }
    const auto it = std::lower_bound(
        traj.begin(), traj.end(), t,
        [](const TrajectorySample& s, double v) { return s.timestamp < v; });
    if (it == traj.begin()) return traj.front();
    if (it == traj.end()) return traj.back();
    const auto& b = *it;
    const auto& a = *(it - 1);
    const double u = (t - a.timestamp) / (b.timestamp - a.timestamp);
    TrajectorySample out;
    out.timestamp = t;
    out.position = (1.0 - u) * a.position + u * b.position;
    out.yaw = lerp_yaw(a.yaw, b.yaw, u);
    out.speed_cmd = (1.0 - u) * a.speed_cmd + u * b.speed_cmd;
    return out;
}

std::vector<PatchRecord> build_patch_records(const std::vector<PointOfInterest>& pois,
                                             const std::vector<UgvFrame>& ugv_frames,
                                             const std::vector<UavFrame>& uav_frames,
                                             const ExtractionConfig& config,
                                             const MetricTriple& labels) {
    std::map<int, PatchRecord> by_poi;
    for (const PointOfInterest& poi : pois) {
        PatchRecord rec;
        rec.poi_id = poi.id;
        rec.timestamp = poi.timestamp;
        rec.x = poi.x;
        rec.y = poi.y;
        rec.yaw = poi.yaw;
        try {
            rec.labels = {label_at_pose(labels.m_z, poi.timestamp),
                          label_at_pose(labels.m_omega, poi.timestamp),
                          label_at_pose(labels.m_p, poi.timestamp)};
        } catch (const OutOfSupport&) {
            continue;  // no label, no record
        }
        if (config.terrain_lookup) rec.terrain = config.terrain_lookup(poi.x, poi.y);
        by_poi.emplace(poi.id, std::move(rec));
    }

    const GroundImageFrame grid_frame = GroundImageFrame::from_grid(config.bev_grid);
    const double candidate_radius =
        config.max_ugv_candidate_distance + config.patch_side;

    for (const UgvFrame& frame : ugv_frames) {
        BevResult bev;
        bool bev_ready = false;
        RigidTransform cam_from_ground;
        Eigen::Vector2d cam_world(0, 0);
        const Eigen::Vector2d robot_xy(frame.x, frame.y);

        for (auto& [id, rec] : by_poi) {
            const Eigen::Vector2d poi_xy(rec.x, rec.y);
            if ((poi_xy - robot_xy).norm() > candidate_radius) continue;
            if (!bev_ready) {
                // one BEV per frame, built lazily so empty neighborhoods cost nothing
                try {
                    const RigidTransform ground_from_robot =
                        ground_from_attitude(frame.attitude, config.robot_height);
                    cam_from_ground =
                        compose(config.cam_from_robot, inverse(ground_from_robot));
                    bev = bev_resample(frame.image, cam_from_ground, config.ugv_camera,
                                       config.bev_grid);
                    const Eigen::Vector3d cam_ground = inverse(cam_from_ground).translation;
                    cam_world = robot_xy + rotate2(frame.yaw, cam_ground.head<2>());
                    bev_ready = true;
                } catch (const std::exception&) {
                    break;  // bad frame, skip all of it
                }
            }
            PatchFootprint fp;
            fp.center = rotate2(-frame.yaw, poi_xy - robot_xy);
            fp.yaw = wrap_pi(rec.yaw - frame.yaw);
            fp.side = config.patch_side;
            auto patch = try_extract_patch(bev.image, &bev.mask, grid_frame, fp,
                                           config.patch_resolution, config.min_coverage);
            if (!patch) continue;
            const double dist = (poi_xy - cam_world).norm();
            if (dist > config.max_ugv_candidate_distance) continue;
            PatchView view;
            view.source = "ugv";
            view.frame_id = frame.frame_id;
            view.camera_distance = dist;
            view.in_comparison = dist <= config.max_ugv_distance;
            view.patch = std::move(patch->patch);
            rec.views.push_back(std::move(view));
        }
    }

    for (const UavFrame& frame : uav_frames) {
        MarkerGeoref georef;
        try {
            georef = aerial_gsd_and_heading(frame.marker);
        } catch (const DegenerateMarker&) {
            continue;
        }
        const Eigen::Vector2d robot_xy(frame.robot_x, frame.robot_y);
        const GroundImageFrame gif =
            GroundImageFrame::from_marker(georef, robot_xy, frame.robot_yaw);
        const double margin = config.patch_side / georef.gsd;

        for (auto& [id, rec] : by_poi) {
            const Eigen::Vector2d poi_xy(rec.x, rec.y);
            const Eigen::Vector2d px = gif.to_pixel(poi_xy);
            if (px.x() < -margin || px.y() < -margin || px.x() > frame.image.width + margin ||
                px.y() > frame.image.height + margin) {
                continue;
            }
            PatchFootprint fp;
            fp.center = poi_xy;
            fp.yaw = rec.yaw;
            fp.side = config.patch_side;
            auto patch = try_extract_patch(frame.image, nullptr, gif, fp,
                                           config.patch_resolution, config.min_coverage);
            if (!patch) continue;
            PatchView view;
            view.source = "uav";
            view.frame_id = frame.frame_id;
            view.camera_distance = (poi_xy - robot_xy).norm();
            view.in_comparison = true;
            view.patch = std::move(patch->patch);
            rec.views.push_back(std::move(view));
        }
    }

    std::vector<PatchRecord> records;
    records.reserve(by_poi.size());
    for (auto& [id, rec] : by_poi) {
        if (!rec.views.empty()) records.push_back(std::move(rec));
    }
    return records;
}

double LabelStats::normalize(int metric, double raw) const {
    const double span = max[metric] - min[metric];
    return std::clamp((raw - min[metric]) / span, 0.0, 1.0);
}

double LabelStats::denormalize(int metric, double norm) const {
    return min[metric] + norm * (max[metric] - min[metric]);
}

LabelStats normalize_labels(std::vector<PatchRecord>& records,
                            const std::optional<LabelStats>& stats) {
    LabelStats s;
    if (stats) {
        s = *stats;
    } else {
        if (records.empty()) throw DegenerateRange("normalize_labels: no records");
        for (int m = 0; m < 3; ++m) {
            s.min[m] = std::numeric_limits<double>::infinity();
            s.max[m] = -std::numeric_limits<double>::infinity();
        }
        for (const PatchRecord& r : records) {
            for (int m = 0; m < 3; ++m) {
                s.min[m] = std::min(s.min[m], r.labels[m]);
                s.max[m] = std::max(s.max[m], r.labels[m]);
            }
        }
        for (int m = 0; m < 3; ++m) {
            if (!(s.max[m] - s.min[m] > 1e-12)) {
                throw DegenerateRange(std::string("normalize_labels: metric ") +
                                      metric_name(static_cast<MetricKind>(m)) +
                                      " has a degenerate range");
            }
        }
    }
    for (PatchRecord& r : records) {
        for (int m = 0; m < 3; ++m) r.labels_norm[m] = s.normalize(m, r.labels[m]);
    }
    return s;
}

FoldAssignment make_folds(const std::vector<PatchRecord>& records, int k, std::uint64_t seed) {
    if (k < 2) throw std::invalid_argument("make_folds: k must be >= 2");
    if (static_cast<int>(records.size()) < k) {
        throw TooFewRecords("make_folds: " + std::to_string(records.size()) + " records < k=" +
                            std::to_string(k));
    }
    std::vector<int> ids;
    ids.reserve(records.size());
    for (const auto& r : records) ids.push_back(r.poi_id);
    std::sort(ids.begin(), ids.end());
    std::mt19937_64 rng(seed);
    std::shuffle(ids.begin(), ids.end(), rng);

    FoldAssignment folds;
    folds.k = k;
    for (size_t i = 0; i < ids.size(); ++i) {
        folds.fold_of[ids[i]] = static_cast<int>(i % k);
    }
    return folds;
}

const PatchView& sample_training_view(const PatchRecord& record, const std::string& source,
                                      std::mt19937_64& rng) {
    std::vector<int> idx;
    for (int v = 0; v < static_cast<int>(record.views.size()); ++v) {
        const PatchView& view = record.views[v];
        if (view.source != source) continue;
        if (source == "ugv" && !view.in_comparison) continue;
        idx.push_back(v);
    }
    if (idx.empty()) {
        throw NoViews("record " + std::to_string(record.poi_id) + " has no '" + source +
                      "' views");
    }
    std::sort(idx.begin(), idx.end(), [&](int a, int b) {
        return record.views[a].frame_id < record.views[b].frame_id;
    });
    std::uniform_int_distribution<size_t> pick(0, idx.size() - 1);
    return record.views[idx[pick(rng)]];
}

void save_records(const std::vector<PatchRecord>& records, const std::string& dir) {
    fs::create_directories(dir);
    json manifest;
    manifest["records"] = json::array();
    char poi_dir[32];
    for (const PatchRecord& rec : records) {
        std::snprintf(poi_dir, sizeof(poi_dir), "poi_%06d", rec.poi_id);
        fs::create_directories(fs::path(dir) / poi_dir);
        json rj;
        rj["poi_id"] = rec.poi_id;
        rj["t"] = rec.timestamp;
        rj["x"] = rec.x;
        rj["y"] = rec.y;
        rj["yaw"] = rec.yaw;
        rj["terrain"] = rec.terrain;
        rj["labels"] = rec.labels;
        rj["labels_norm"] = rec.labels_norm;
        rj["views"] = json::array();
        for (const PatchView& view : rec.views) {
            const std::string rel =
                std::string(poi_dir) + "/" + view.source + "_" + view.frame_id + ".png";
            write_png(fs::path(dir) / rel, to_u8(view.patch));
            json vj;
            vj["source"] = view.source;
            vj["frame_id"] = view.frame_id;
            vj["camera_distance"] = view.camera_distance;
            vj["in_comparison"] = view.in_comparison;
            vj["path"] = rel;
            rj["views"].push_back(std::move(vj));
        }
        manifest["records"].push_back(std::move(rj));
    }
    std::ofstream out(fs::path(dir) / "records.json");
    if (!out) throw IoError("cannot write records.json in " + dir);
    out << manifest.dump(2) << "\n";
}

std::vector<PatchRecord> load_records(const std::string& dir, bool load_images) {
    std::ifstream in(fs::path(dir) / "records.json");
    if (!in) throw IoError("cannot open records.json in " + dir);
    json manifest = json::parse(in);

    std::vector<PatchRecord> records;
    for (const auto& rj : manifest.at("records")) {
        PatchRecord rec;
        rec.poi_id = rj.at("poi_id").get<int>();
        rec.timestamp = rj.at("t").get<double>();
        rec.x = rj.at("x").get<double>();
        rec.y = rj.at("y").get<double>();
        rec.yaw = rj.at("yaw").get<double>();
        rec.terrain = rj.at("terrain").get<std::string>();
        rec.labels = rj.at("labels").get<std::array<double, 3>>();
        rec.labels_norm = rj.at("labels_norm").get<std::array<double, 3>>();
        for (const auto& vj : rj.at("views")) {
            PatchView view;
            view.source = vj.at("source").get<std::string>();
            view.frame_id = vj.at("frame_id").get<std::string>();
            view.camera_distance = vj.at("camera_distance").get<double>();
            view.in_comparison = vj.at("in_comparison").get<bool>();
            view.path = vj.at("path").get<std::string>();
            if (load_images) view.patch = to_float(read_png(fs::path(dir) / view.path));
            rec.views.push_back(std::move(view));
        }
        records.push_back(std::move(rec));
    }
    return records;
}

void save_folds(const FoldAssignment& folds, const std::string& path) {
    json j;
    j["k"] = folds.k;
    j["assignment"] = json::object();
    for (const auto& [id, fold] : folds.fold_of) {
        j["assignment"][std::to_string(id)] = fold;
    }
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << j.dump(2) << "\n";
}

FoldAssignment load_folds(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    json j = json::parse(in);
    FoldAssignment folds;
    folds.k = j.at("k").get<int>();
    for (const auto& [key, value] : j.at("assignment").items()) {
        folds.fold_of[std::stoi(key)] = value.get<int>();
    }
    return folds;
}

}  // namespace terra
