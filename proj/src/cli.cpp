#include "terra/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "terra/errors.hpp"
#include "terra/mapping.hpp"
#include "terra/planner.hpp"
#include "terra/predictor.hpp"
#include "terra/simkit.hpp"

namespace terra::cli {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitDegenerate = 3;

void check_keys(const json& obj, const std::string& where,
                std::initializer_list<const char*> allowed) {
    if (!obj.is_object()) throw ConfigError(where + ": expected an object");
    for (const auto& [key, value] : obj.items()) {
        if (std::find_if(allowed.begin(), allowed.end(),
                         [&](const char* k) { return key == k; }) == allowed.end()) {
            throw ConfigError(where + ": unknown key '" + key + "'");
        }
    }
}

template <typename T>
void maybe(const json& obj, const char* key, T& target) {
    if (obj.contains(key)) target = obj.at(key).get<T>();
}

// ---------------------------------------------------------------------------
// CSV input

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> columns;

    const std::vector<double>& col(const std::string& name) const {
        for (size_t i = 0; i < header.size(); ++i) {
            if (header[i] == name) return columns[i];
        }
        throw IoError("missing CSV column '" + name + "'");
    }
    size_t rows() const { return columns.empty() ? 0 : columns[0].size(); }
};

CsvTable read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    CsvTable table;
    std::string line;
    if (!std::getline(in, line)) throw IoError(path + ": empty file");
    std::stringstream hs(line);
    std::string cell;
    while (std::getline(hs, cell, ',')) table.header.push_back(cell);
    table.columns.resize(table.header.size());
    size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::stringstream ls(line);
        size_t c = 0;
        while (std::getline(ls, cell, ',')) {
            if (c >= table.columns.size()) break;
            try {
                table.columns[c].push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw IoError(path + ":" + std::to_string(line_no) + ": bad number '" + cell +
                              "'");
            }
            ++c;
        }
        if (c != table.columns.size()) {
            throw IoError(path + ":" + std::to_string(line_no) + ": expected " +
                          std::to_string(table.columns.size()) + " fields");
        }
    }
    return table;
}

double infer_rate(const std::vector<double>& t) {
    if (t.size() < 2) throw IoError("need at least two samples to infer a rate");
    std::vector<double> dt(t.size() - 1);
    for (size_t i = 0; i + 1 < t.size(); ++i) dt[i] = t[i + 1] - t[i];
    std::nth_element(dt.begin(), dt.begin() + dt.size() / 2, dt.end());
    return 1.0 / dt[dt.size() / 2];
}

TimeSeries make_series(const std::vector<double>& t, const std::vector<double>& v) {
    TimeSeries ts;
    ts.timestamps = t;
    ts.values = v;
    ts.nominal_rate = infer_rate(t);
    ts.validate();
    return ts;
}

// ---------------------------------------------------------------------------
// shared pipeline configuration (config file + flag overrides; flags win)

struct PipelineConfig {
    WindowSpec window;
    WelchConfig welch;
    TrainConfig train;
    SlidingWindowSpec sliding;
    double label_rate = 10.0;
    double smooth_sigma = kDefaultSmoothingSigma;
    double poi_spacing = 0.3;
    int patch_resolution = 64;
    double patch_side = 1.5;
    double max_ugv_distance = 5.0;
    double max_ugv_candidate_distance = 12.0;
    double min_coverage = 0.95;
    double straight_threshold = 0.1;
    double bev_forward = 12.0;
    double bev_lateral = 6.0;
    double bev_cell = 0.02;
    double map_cell = 0.25;
    double feasibility_threshold = 0.8;
    int connectivity = 8;
    std::uint64_t seed = 1;
};

PipelineConfig load_pipeline_config(const std::string& path) {
    PipelineConfig cfg;
    if (path.empty()) return cfg;
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path);
    json j = json::parse(in);
    check_keys(j, "config",
               {"window", "welch", "train", "sliding_window", "labels", "extraction", "map",
                "plan", "seed", "scene", "path", "build"});
    if (j.contains("window")) {
        const json& w = j["window"];
        check_keys(w, "window", {"robot_length", "speed"});
        maybe(w, "robot_length", cfg.window.robot_length);
        maybe(w, "speed", cfg.window.speed);
    }
    if (j.contains("welch")) {
        const json& w = j["welch"];
        check_keys(w, "welch",
                   {"segment_length", "overlap_fraction", "window_function", "f_min", "f_max"});
        maybe(w, "segment_length", cfg.welch.segment_length);
        maybe(w, "overlap_fraction", cfg.welch.overlap_fraction);
        maybe(w, "window_function", cfg.welch.window_function);
        maybe(w, "f_min", cfg.welch.f_min);
        maybe(w, "f_max", cfg.welch.f_max);
    }
    if (j.contains("train")) {
        const json& t = j["train"];
        check_keys(t, "train",
                   {"batch_size", "learning_rate", "epochs", "l2", "hidden", "optimizer",
                    "paper_profile"});
        bool paper = false;
        maybe(t, "paper_profile", paper);
        if (paper) cfg.train = TrainConfig::paper_defaults();
        maybe(t, "batch_size", cfg.train.batch_size);
        maybe(t, "learning_rate", cfg.train.learning_rate);
        maybe(t, "epochs", cfg.train.epochs);
        maybe(t, "l2", cfg.train.l2);
        maybe(t, "hidden", cfg.train.hidden);
        maybe(t, "optimizer", cfg.train.optimizer);
    }
    if (j.contains("sliding_window")) {
        const json& s = j["sliding_window"];
        check_keys(s, "sliding_window", {"patch_side", "stride"});
        maybe(s, "patch_side", cfg.sliding.patch_side);
        maybe(s, "stride", cfg.sliding.stride);
    }
    if (j.contains("labels")) {
        const json& l = j["labels"];
        check_keys(l, "labels", {"rate", "smooth_sigma"});
        maybe(l, "rate", cfg.label_rate);
        maybe(l, "smooth_sigma", cfg.smooth_sigma);
    }
    if (j.contains("extraction")) {
        const json& e = j["extraction"];
        check_keys(e, "extraction",
                   {"poi_spacing", "patch_resolution", "max_ugv_distance",
                    "max_ugv_candidate_distance", "min_coverage", "straight_threshold",
                    "bev_forward", "bev_lateral", "bev_cell", "patch_side"});
        maybe(e, "poi_spacing", cfg.poi_spacing);
        maybe(e, "patch_resolution", cfg.patch_resolution);
        maybe(e, "patch_side", cfg.patch_side);
        maybe(e, "max_ugv_distance", cfg.max_ugv_distance);
        maybe(e, "max_ugv_candidate_distance", cfg.max_ugv_candidate_distance);
        maybe(e, "min_coverage", cfg.min_coverage);
        maybe(e, "straight_threshold", cfg.straight_threshold);
        maybe(e, "bev_forward", cfg.bev_forward);
        maybe(e, "bev_lateral", cfg.bev_lateral);
        maybe(e, "bev_cell", cfg.bev_cell);
    }
    if (j.contains("map")) {
        const json& m = j["map"];
        check_keys(m, "map", {"cell_size"});
        maybe(m, "cell_size", cfg.map_cell);
    }
    if (j.contains("plan")) {
        const json& p = j["plan"];
        check_keys(p, "plan", {"feasibility_threshold", "connectivity"});
        maybe(p, "feasibility_threshold", cfg.feasibility_threshold);
        maybe(p, "connectivity", cfg.connectivity);
    }
    maybe(j, "seed", cfg.seed);
    return cfg;
}

struct Calibration {
    CameraModel camera;
    RigidTransform cam_from_robot;
    double robot_height = 0.4;
    double marker_perimeter = 1.4;
};

Calibration load_calibration(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open calibration " + path);
    json j = json::parse(in);
    check_keys(j, "calibration",
               {"camera", "robot_from_camera", "robot_height", "marker_perimeter"});
    Calibration cal;
    const json& c = j.at("camera");
    check_keys(c, "camera", {"fx", "fy", "cx", "cy", "width", "height"});
    cal.camera.fx = c.at("fx").get<double>();
    cal.camera.fy = c.at("fy").get<double>();
    cal.camera.cx = c.at("cx").get<double>();
    cal.camera.cy = c.at("cy").get<double>();
    cal.camera.width = c.at("width").get<int>();
    cal.camera.height = c.at("height").get<int>();
    if (!cal.camera.valid()) throw ConfigError("calibration: invalid camera intrinsics");

    const json& rc = j.at("robot_from_camera");
    check_keys(rc, "robot_from_camera", {"quaternion", "translation"});
    const auto q = rc.at("quaternion").get<std::vector<double>>();
    const auto t = rc.at("translation").get<std::vector<double>>();
    if (q.size() != 4 || t.size() != 3) {
        throw ConfigError("calibration: quaternion needs 4 values, translation 3");
    }
    RigidTransform robot_from_cam;
    robot_from_cam.rotation = Eigen::Quaterniond(q[0], q[1], q[2], q[3]).normalized();
    robot_from_cam.translation = Eigen::Vector3d(t[0], t[1], t[2]);
    robot_from_cam.from_frame = kFrameCamera;
    robot_from_cam.to_frame = kFrameRobot;
    cal.cam_from_robot = inverse(robot_from_cam);
    maybe(j, "robot_height", cal.robot_height);
    maybe(j, "marker_perimeter", cal.marker_perimeter);
    return cal;
}

// ---------------------------------------------------------------------------
// subcommands

struct SimulateArgs {
    std::string config;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
};

int cmd_simulate(const SimulateArgs& args) {
    std::ifstream in(args.config);
    if (!in) throw ConfigError("cannot open config " + args.config);
    json j = json::parse(in);
    const PipelineConfig pipeline = load_pipeline_config(args.config);

    if (!j.contains("scene")) throw ConfigError("simulate: config needs a 'scene' section");
    const json& sj = j["scene"];
    check_keys(sj, "scene", {"preset", "classes", "layout", "world_size", "grid_n"});
    double world_size = 44.0;
    int grid_n = 64;
    maybe(sj, "world_size", world_size);
    maybe(sj, "grid_n", grid_n);

    std::vector<TerrainClassSpec> classes;
    if (sj.contains("preset")) {
        classes = preset_classes(sj.at("preset").get<std::string>());
    } else if (sj.contains("classes")) {
        for (const json& cj : sj.at("classes")) {
            check_keys(cj, "scene.classes[]",
                       {"name", "base_gray", "noise_amp", "spatial_freq", "roughness",
                        "bumpiness", "power_draw", "occluder"});
            TerrainClassSpec spec;
            spec.name = cj.at("name").get<std::string>();
            maybe(cj, "base_gray", spec.base_gray);
            maybe(cj, "noise_amp", spec.noise_amp);
            maybe(cj, "spatial_freq", spec.spatial_freq);
            maybe(cj, "roughness", spec.roughness);
            maybe(cj, "bumpiness", spec.bumpiness);
            maybe(cj, "power_draw", spec.power_draw);
            maybe(cj, "occluder", spec.occluder);
            classes.push_back(std::move(spec));
        }
    } else {
        throw ConfigError("simulate: scene needs 'preset' or 'classes'");
    }
    SceneLayout layout = SceneLayout::blocks;
    if (sj.contains("layout")) {
        const std::string name = sj.at("layout").get<std::string>();
        if (name == "half_split") layout = SceneLayout::half_split;
        else if (name == "blocks") layout = SceneLayout::blocks;
        else if (name == "voronoi") layout = SceneLayout::voronoi;
        else throw ConfigError("simulate: unknown layout '" + name + "'");
    }

    DatasetBuildConfig build;
    build.seed = args.seed.value_or(pipeline.seed);
    build.poi_spacing = pipeline.poi_spacing;
    build.patch_resolution = pipeline.patch_resolution;
    build.patch_side = pipeline.patch_side;
    build.max_ugv_distance = pipeline.max_ugv_distance;
    build.max_ugv_candidate_distance = pipeline.max_ugv_candidate_distance;
    build.label_rate = pipeline.label_rate;
    build.window = pipeline.window;
    build.welch = pipeline.welch;
    if (j.contains("build")) {
        const json& b = j["build"];
        check_keys(b, "build",
                   {"ugv_frame_interval", "uav_frame_interval", "uav_window_half", "uav_gsd",
                    "marker_side", "occlusion_study", "speed"});
        maybe(b, "ugv_frame_interval", build.ugv_frame_interval);
        maybe(b, "uav_frame_interval", build.uav_frame_interval);
        maybe(b, "uav_window_half", build.uav_window_half);
        maybe(b, "uav_gsd", build.uav_gsd);
        maybe(b, "marker_side", build.marker_side);
        maybe(b, "occlusion_study", build.occlusion_study);
        maybe(b, "speed", build.traverse.speed);
    }

    std::vector<Eigen::Vector2d> path;
    if (j.contains("path")) {
        for (const json& pj : j.at("path")) {
            path.emplace_back(pj.at(0).get<double>(), pj.at(1).get<double>());
        }
    } else {
        const double margin = 6.0;
        const int rows = 4;
        const double step = (world_size - 2 * margin) / (rows - 1);
        for (int r = 0; r < rows; ++r) {
            const double y = margin + r * step;
            if (r % 2 == 0) {
                path.emplace_back(margin, y);
                path.emplace_back(world_size - margin, y);
            } else {
                path.emplace_back(world_size - margin, y);
                path.emplace_back(margin, y);
            }
        }
    }

    const Scene scene = generate_scene(classes, layout, build.seed, world_size, grid_n);
    write_simulation(scene, path, build, args.out_dir);
    std::printf("simulate: wrote sensor bundle and frames to %s\n", args.out_dir.c_str());
    return kExitOk;
}

struct GenLabelsArgs {
    std::string imu, power, out, config;
};

int cmd_gen_labels(const GenLabelsArgs& args) {
    const PipelineConfig cfg = load_pipeline_config(args.config);
    const CsvTable imu = read_csv(args.imu);
    const CsvTable power = read_csv(args.power);

    const TimeSeries az = make_series(imu.col("t"), imu.col("az"));
    const TimeSeries wx = make_series(imu.col("t"), imu.col("wx"));
    const TimeSeries wy = make_series(imu.col("t"), imu.col("wy"));
    const TimeSeries current = make_series(power.col("t"), power.col("current"));
    const TimeSeries voltage = make_series(power.col("t"), power.col("voltage"));

    const double alpha = cfg.window.alpha();
    const double t0 = std::max(az.timestamps.front(), current.timestamps.front()) + alpha;
    const double t1 = std::min(az.timestamps.back(), current.timestamps.back()) - alpha;
    if (t1 <= t0) throw WindowOutOfRange("gen-labels: series shorter than one window");
    std::vector<double> grid;
    for (long i = 0;; ++i) {
        const double t = t0 + i / cfg.label_rate;
        if (t > t1 + 1e-9) break;
        grid.push_back(t);
    }

    MetricTriple m;
    m.m_z = vibration_metric(az, cfg.window, cfg.welch, grid, cfg.smooth_sigma);
    m.m_omega = bumpiness_metric(wx, wy, grid, cfg.smooth_sigma);
    m.m_p = energy_metric(current, voltage, cfg.window, grid, cfg.smooth_sigma);
    write_labels_csv(args.out, m);

    const auto mean = [](const std::vector<double>& v) {
        double s = 0;
        for (double x : v) s += x;
        return v.empty() ? 0.0 : s / v.size();
    };
    std::printf("gen-labels: %zu samples  mean m_z=%.4f  mean m_omega=%.4f  mean m_p=%.2f J\n",
                grid.size(), mean(m.m_z.values), mean(m.m_omega.values), mean(m.m_p.values));
    return kExitOk;
}

struct ExtractArgs {
    std::string data_dir, calibration, labels, out_dir, config;
};

int cmd_extract(const ExtractArgs& args) {
    const PipelineConfig cfg = load_pipeline_config(args.config);
    const Calibration cal = load_calibration(args.calibration);

    const CsvTable traj_csv = read_csv((fs::path(args.data_dir) / "trajectory.csv").string());
    std::vector<TrajectorySample> traj;
    for (size_t i = 0; i < traj_csv.rows(); ++i) {
        TrajectorySample s;
        s.timestamp = traj_csv.col("t")[i];
        s.position = Eigen::Vector3d(traj_csv.col("x")[i], traj_csv.col("y")[i],
                                     traj_csv.col("z")[i]);
        s.yaw = traj_csv.col("yaw")[i];
        traj.push_back(s);
    }

    const CsvTable odom = read_csv((fs::path(args.data_dir) / "odometry.csv").string());
    const auto intervals = filter_straight_segments(odom.col("t"), odom.col("v_left"),
                                                    odom.col("v_right"),
                                                    cfg.straight_threshold);
    const auto pois = sample_pois(traj, intervals, cfg.poi_spacing);

    const MetricTriple labels = read_labels_csv(args.labels);

    // frames.jsonl: one frame per line, UGV lines carry roll/pitch, UAV lines
    // carry marker corners
    std::vector<UgvFrame> ugv_frames;
    std::vector<UavFrame> uav_frames;
    std::ifstream jsonl(fs::path(args.data_dir) / "frames.jsonl");
    if (!jsonl) throw IoError("cannot open frames.jsonl in " + args.data_dir);
    std::string line;
    size_t line_no = 0;
    while (std::getline(jsonl, line)) {
        ++line_no;
        if (line.empty()) continue;
        json fj = json::parse(line);
        check_keys(fj, "frames.jsonl:" + std::to_string(line_no),
                   {"path", "t", "source", "frame_id", "roll", "pitch", "marker_corners",
                    "marker_perimeter"});
        const double t = fj.at("t").get<double>();
        TrajectorySample pose;
        try {
            pose = interpolate_pose(traj, t);
        } catch (const OutOfSupport&) {
            std::fprintf(stderr, "extract: frame at t=%.3f outside trajectory, skipped\n", t);
            continue;
        }
        ImageF image;
        try {
            image = to_float(read_png((fs::path(args.data_dir) / fj.at("path").get<std::string>()).string()));
        } catch (const IoError& e) {
            std::fprintf(stderr, "extract: %s, frame skipped\n", e.what());
            continue;
        }
        const std::string source = fj.at("source").get<std::string>();
        if (source == "ugv") {
            UgvFrame f;
            f.frame_id = fj.at("frame_id").get<std::string>();
            f.timestamp = t;
            f.image = std::move(image);
            f.attitude = AttitudeSample{t, fj.value("roll", 0.0), fj.value("pitch", 0.0)};
            f.x = pose.position.x();
            f.y = pose.position.y();
            f.yaw = pose.yaw;
            ugv_frames.push_back(std::move(f));
        } else if (source == "uav") {
            UavFrame f;
            f.frame_id = fj.at("frame_id").get<std::string>();
            f.timestamp = t;
            f.image = std::move(image);
            const json& corners = fj.at("marker_corners");
            if (corners.size() != 4) throw ConfigError("frames.jsonl: need 4 marker corners");
            for (int i = 0; i < 4; ++i) {
                f.marker.corners[i] = Eigen::Vector2d(corners[i][0].get<double>(),
                                                      corners[i][1].get<double>());
            }
            f.marker.known_perimeter = fj.value("marker_perimeter", cal.marker_perimeter);
            f.robot_x = pose.position.x();
            f.robot_y = pose.position.y();
            f.robot_yaw = pose.yaw;
            uav_frames.push_back(std::move(f));
        } else {
            throw ConfigError("frames.jsonl: unknown source '" + source + "'");
        }
    }

    ExtractionConfig ex;
    ex.ugv_camera = cal.camera;
    ex.cam_from_robot = cal.cam_from_robot;
    ex.robot_height = cal.robot_height;
    ex.bev_grid.origin = Eigen::Vector2d(0.0, -cfg.bev_lateral);
    ex.bev_grid.cell_size = cfg.bev_cell;
    ex.bev_grid.width = static_cast<int>(std::lround(cfg.bev_forward / cfg.bev_cell));
    ex.bev_grid.height = static_cast<int>(std::lround(2.0 * cfg.bev_lateral / cfg.bev_cell));
    ex.patch_side = cfg.patch_side;
    ex.patch_resolution = cfg.patch_resolution;
    ex.max_ugv_distance = cfg.max_ugv_distance;
    ex.max_ugv_candidate_distance = cfg.max_ugv_candidate_distance;
    ex.min_coverage = cfg.min_coverage;

    // optional terrain tags from the simulated scene layout
    Scene tag_scene;
    const fs::path tmap_path = fs::path(args.data_dir) / "terrain_map.json";
    if (fs::exists(tmap_path)) {
        std::ifstream tm(tmap_path);
        json tj = json::parse(tm);
        tag_scene.world_size = tj.at("world_size").get<double>();
        tag_scene.grid_n = tj.at("grid_n").get<int>();
        tag_scene.class_map = tj.at("class_map").get<std::vector<int>>();
        for (const auto& name : tj.at("classes")) {
            TerrainClassSpec spec;
            spec.name = name.get<std::string>();
            tag_scene.classes.push_back(std::move(spec));
        }
        ex.terrain_lookup = [scene = std::move(tag_scene)](double x, double y) {
            return scene.spec_at(x, y).name;
        };
    }

    std::vector<PatchRecord> records =
        build_patch_records(pois, ugv_frames, uav_frames, ex, labels);
    if (!records.empty()) normalize_labels(records);
    save_records(records, args.out_dir);

    json report;
    report["pois"] = pois.size();
    report["records"] = records.size();
    size_t ugv_views = 0, uav_views = 0;
    for (const auto& r : records) {
        for (const auto& v : r.views) (v.source == "ugv" ? ugv_views : uav_views) += 1;
    }
    report["ugv_views"] = ugv_views;
    report["uav_views"] = uav_views;
    std::ofstream rep(fs::path(args.out_dir) / "extract_report.json");
    rep << report.dump(2) << "\n";
    std::printf("extract: %zu POIs -> %zu records (%zu ugv views, %zu uav views)\n",
                pois.size(), records.size(), ugv_views, uav_views);
    return kExitOk;
}

struct TrainArgs {
    std::string records_dir, source = "uav", metric = "m_z", out_dir, protocol = "paper",
                config;
    std::optional<std::uint64_t> seed;
    std::optional<int> epochs;
};

CvProtocol protocol_by_name(const std::string& name) {
    if (name == "paper") return CvProtocol::paper_9010();
    if (name == "k5") return CvProtocol::plain_k(5);
    throw ConfigError("unknown protocol '" + name + "' (use paper|k5)");
}

int cmd_train(const TrainArgs& args) {
    const PipelineConfig cfg = load_pipeline_config(args.config);
    TrainConfig tc = cfg.train;
    tc.seed = args.seed.value_or(cfg.seed);
    if (args.epochs) tc.epochs = *args.epochs;
    const int metric_index = static_cast<int>(metric_from_name(args.metric));
    const CvProtocol protocol = protocol_by_name(args.protocol);

    std::vector<PatchRecord> records = load_records(args.records_dir);
    const FoldAssignment folds = make_folds(records, protocol.k, tc.seed);
    const TrainResult result =
        train(records, args.source, metric_index, folds, protocol, tc);

    fs::create_directories(args.out_dir);
    save_folds(folds, (fs::path(args.out_dir) / "folds.json").string());
    for (size_t i = 0; i < result.models.size(); ++i) {
        char name[64];
        std::snprintf(name, sizeof(name), "model_f%d.json", protocol.eval_folds[i]);
        save_model(result.models[i], (fs::path(args.out_dir) / name).string());
    }
    json report;
    report["source"] = args.source;
    report["metric"] = args.metric;
    report["protocol"] = args.protocol;
    report["seed"] = tc.seed;
    report["epochs"] = tc.epochs;
    report["eval_folds"] = protocol.eval_folds;
    json finals = json::array();
    for (const auto& curve : result.loss_curves) finals.push_back(curve.back());
    report["final_loss"] = std::move(finals);
    std::ofstream rep(fs::path(args.out_dir) / "train_report.json");
    rep << report.dump(2) << "\n";

    std::printf("train: %s/%s, %zu folds\n", args.source.c_str(), args.metric.c_str(),
                result.models.size());
    for (size_t i = 0; i < result.loss_curves.size(); ++i) {
        std::printf("  fold %d: final loss %.6f\n", protocol.eval_folds[i],
                    result.loss_curves[i].back());
    }
    return kExitOk;
}

struct EvalArgs {
    std::string records_dir, models_dir, out;
};

int cmd_eval(const EvalArgs& args) {
    std::ifstream rep_in(fs::path(args.models_dir) / "train_report.json");
    if (!rep_in) throw ConfigError("cannot open train_report.json in " + args.models_dir);
    json train_report = json::parse(rep_in);
    const std::string source = train_report.at("source").get<std::string>();
    const std::string metric = train_report.at("metric").get<std::string>();
    const CvProtocol protocol = protocol_by_name(train_report.at("protocol").get<std::string>());

    const std::vector<PatchRecord> records = load_records(args.records_dir);
    const FoldAssignment folds =
        load_folds((fs::path(args.models_dir) / "folds.json").string());
    std::vector<RegressorModel> models;
    for (int fold : protocol.eval_folds) {
        char name[64];
        std::snprintf(name, sizeof(name), "model_f%d.json", fold);
        models.push_back(load_model((fs::path(args.models_dir) / name).string()));
    }

    const EvalReport report = evaluate(models, records, source,
                                       static_cast<int>(metric_from_name(metric)), folds,
                                       protocol);

    json out;
    out["source"] = report.source;
    out["metric"] = metric;
    out["mean_rmse"] = report.mean_rmse;
    out["per_fold_rmse"] = report.per_fold_rmse;
    out["per_terrain"] = json::object();
    for (const auto& [tag, val] : report.per_terrain) {
        out["per_terrain"][tag] = {{"rmse", val.first}, {"n", val.second}};
    }
    std::ofstream of(args.out);
    if (!of) throw IoError("cannot write " + args.out);
    of << out.dump(2) << "\n";

    std::printf("Prediction RMSE (%s, %s)\n", source.c_str(), metric.c_str());
    std::printf("  %-16s %10s %8s\n", "terrain", "rmse", "n");
    for (const auto& [tag, val] : report.per_terrain) {
        std::printf("  %-16s %10.4f %8d\n", tag.c_str(), val.first, val.second);
    }
    std::printf("  %-16s %10.4f\n", "whole", report.mean_rmse);
    return kExitOk;
}

struct MapArgs {
    std::string image, georef, model, out_dir, config;
};

int cmd_map(const MapArgs& args) {
    const PipelineConfig cfg = load_pipeline_config(args.config);
    const GeoImage geo = load_geoimage(args.image, args.georef);
    const RegressorModel model = load_model(args.model);

    const std::vector<Tile> tiles = tile_image(geo, cfg.sliding, cfg.patch_resolution,
                                               cfg.min_coverage);
    const CostMap map = predict_map(tiles, model, cfg.map_cell);

    fs::create_directories(args.out_dir);
    export_map(map, (fs::path(args.out_dir) / "map.png").string(),
               (fs::path(args.out_dir) / "map.json").string());
    dump_map_csv(map, (fs::path(args.out_dir) / "map.csv").string());

    int observed = 0;
    for (int c : map.count) observed += c > 0 ? 1 : 0;
    std::printf("map: %zu tiles -> %dx%d cells (%d observed)\n", tiles.size(), map.width,
                map.height, observed);
    return kExitOk;
}

struct PlanArgs {
    std::string map_png, map_json, out_dir, mode = "metric", config;
    std::vector<double> start, goal;
};

int cmd_plan(const PlanArgs& args) {
    const PipelineConfig cfg = load_pipeline_config(args.config);
    if (args.start.size() != 2 || args.goal.size() != 2) {
        throw ConfigError("plan: --start and --goal need two coordinates each");
    }
    const CostMap map = import_map(args.map_png, args.map_json);
    PlanRequest req;
    req.start = Eigen::Vector2d(args.start[0], args.start[1]);
    req.goal = Eigen::Vector2d(args.goal[0], args.goal[1]);
    req.feasibility_threshold = cfg.feasibility_threshold;
    req.connectivity = cfg.connectivity;
    if (args.mode == "metric") req.mode = PlanMode::metric_optimal;
    else if (args.mode == "shortest") req.mode = PlanMode::shortest_feasible;
    else throw ConfigError("plan: unknown mode '" + args.mode + "' (use metric|shortest)");

    const PathPlan result = plan(map, req);
    fs::create_directories(args.out_dir);
    save_plan_csv(result, map, req, (fs::path(args.out_dir) / "plan.csv").string());
    render_plan_overlay(map, {&result}, (fs::path(args.out_dir) / "overlay.png").string());

    const PathMetrics pm = path_metrics(result, map);
    json report;
    report["mode"] = args.mode;
    report["total_cost"] = result.total_cost;
    report["total_length"] = result.total_length;
    report["mean_cell_cost"] = pm.mean_cell_cost;
    report["max_cell_cost"] = pm.max_cell_cost;
    report["waypoints"] = result.waypoints.size();
    std::ofstream rep(fs::path(args.out_dir) / "plan_report.json");
    rep << report.dump(2) << "\n";
    std::printf("plan: %zu waypoints, cost %.4f, length %.2f m, max cell %.3f\n",
                result.waypoints.size(), result.total_cost, result.total_length,
                pm.max_cell_cost);
    return kExitOk;
}

struct AblateArgs {
    std::string kind, out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<int> epochs;
};

int cmd_ablate(const AblateArgs& args) {
    AblationKind kind;
    if (args.kind == "distance") kind = AblationKind::distance;
    else if (args.kind == "blur") kind = AblationKind::blur;
    else if (args.kind == "occlusion") kind = AblationKind::occlusion;
    else throw ConfigError("ablate: unknown kind '" + args.kind + "'");

    AblationConfig cfg;
    cfg.out_dir = args.out_dir;
    if (args.seed) cfg.seed = *args.seed;
    if (args.epochs) cfg.epochs = *args.epochs;

    const AblationReport report = run_ablation(kind, cfg);
    std::printf("ablate %s\n  %-14s %10s %8s\n", args.kind.c_str(), "bin", "rmse", "n");
    for (const auto& row : report.rows) {
        std::printf("  %-14s %10.4f %8d\n", row.label.c_str(), row.rmse, row.n);
    }
    for (const auto& [key, value] : report.extras) {
        std::printf("  %s = %.4f\n", key.c_str(), value);
    }
    return kExitOk;
}

}  // namespace

void write_labels_csv(const std::string& path, const MetricTriple& metrics) {
    if (metrics.m_z.timestamps != metrics.m_omega.timestamps ||
        metrics.m_z.timestamps != metrics.m_p.timestamps) {
        throw std::invalid_argument("write_labels_csv: metric grids differ");
    }
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << "t,m_z,m_omega,m_p\n";
    char buf[160];
    for (size_t i = 0; i < metrics.m_z.timestamps.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.10g,%.10g,%.10g,%.10g\n",
                      metrics.m_z.timestamps[i], metrics.m_z.values[i],
                      metrics.m_omega.values[i], metrics.m_p.values[i]);
        out << buf;
    }
}

MetricTriple read_labels_csv(const std::string& path) {
    const CsvTable table = read_csv(path);
    MetricTriple m;
    m.m_z.timestamps = table.col("t");
    m.m_z.values = table.col("m_z");
    m.m_z.kind = MetricKind::vibration;
    m.m_omega.timestamps = table.col("t");
    m.m_omega.values = table.col("m_omega");
    m.m_omega.kind = MetricKind::bumpiness;
    m.m_p.timestamps = table.col("t");
    m.m_p.values = table.col("m_p");
    m.m_p.kind = MetricKind::energy;
    return m;
}

int run(int argc, const char* const* argv) {
    CLI::App app{"aerial-ground terrain property toolkit"};
    app.require_subcommand(1);

    SimulateArgs sim;
    auto* simulate = app.add_subcommand("simulate", "generate a synthetic dataset bundle");
    simulate->add_option("--config", sim.config, "scene/pipeline config JSON")->required();
    simulate->add_option("--out", sim.out_dir, "output directory")->required();
    simulate->add_option("--seed", sim.seed, "seed override");

    GenLabelsArgs gl;
    auto* gen = app.add_subcommand("gen-labels", "compute metric labels from sensor CSVs");
    gen->add_option("--imu", gl.imu, "imu.csv")->required();
    gen->add_option("--power", gl.power, "power.csv")->required();
    gen->add_option("--out", gl.out, "labels.csv output")->required();
    gen->add_option("--config", gl.config, "pipeline config JSON");

    ExtractArgs ex;
    auto* extract = app.add_subcommand("extract", "extract labeled terrain patches");
    extract->add_option("--data", ex.data_dir, "bundle directory")->required();
    extract->add_option("--calib", ex.calibration, "calibration JSON")->required();
    extract->add_option("--labels", ex.labels, "labels.csv")->required();
    extract->add_option("--out", ex.out_dir, "records output directory")->required();
    extract->add_option("--config", ex.config, "pipeline config JSON");

    TrainArgs tr;
    auto* train_cmd = app.add_subcommand("train", "train per-fold patch regressors");
    train_cmd->add_option("--records", tr.records_dir, "records directory")->required();
    train_cmd->add_option("--source", tr.source, "ugv|uav");
    train_cmd->add_option("--metric", tr.metric, "m_z|m_omega|m_p");
    train_cmd->add_option("--out", tr.out_dir, "model output directory")->required();
    train_cmd->add_option("--protocol", tr.protocol, "paper|k5");
    train_cmd->add_option("--seed", tr.seed, "seed override");
    train_cmd->add_option("--epochs", tr.epochs, "epoch override");
    train_cmd->add_option("--config", tr.config, "pipeline config JSON");

    EvalArgs ev;
    auto* eval_cmd = app.add_subcommand("eval", "held-out RMSE report");
    eval_cmd->add_option("--records", ev.records_dir, "records directory")->required();
    eval_cmd->add_option("--models", ev.models_dir, "trained model directory")->required();
    eval_cmd->add_option("--out", ev.out, "eval_report.json output")->required();

    MapArgs mp;
    auto* map_cmd = app.add_subcommand("map", "build a cost map from an aerial image");
    map_cmd->add_option("--image", mp.image, "aerial PNG")->required();
    map_cmd->add_option("--georef", mp.georef, "georeference JSON")->required();
    map_cmd->add_option("--model", mp.model, "model JSON")->required();
    map_cmd->add_option("--out", mp.out_dir, "output directory")->required();
    map_cmd->add_option("--config", mp.config, "pipeline config JSON");

    PlanArgs pl;
    auto* plan_cmd = app.add_subcommand("plan", "plan a path over a cost map");
    plan_cmd->add_option("--map-png", pl.map_png, "cost map PNG")->required();
    plan_cmd->add_option("--map-json", pl.map_json, "cost map sidecar JSON")->required();
    plan_cmd->add_option("--start", pl.start, "start x y")->expected(2)->required();
    plan_cmd->add_option("--goal", pl.goal, "goal x y")->expected(2)->required();
    plan_cmd->add_option("--mode", pl.mode, "metric|shortest");
    plan_cmd->add_option("--out", pl.out_dir, "output directory")->required();
    plan_cmd->add_option("--config", pl.config, "pipeline config JSON");

    AblateArgs ab;
    auto* ablate = app.add_subcommand("ablate", "run a viewpoint ablation study");
    ablate->add_option("kind", ab.kind, "distance|blur|occlusion")->required();
    ablate->add_option("--out", ab.out_dir, "report directory")->required();
    ablate->add_option("--seed", ab.seed, "seed override");
    ablate->add_option("--epochs", ab.epochs, "epoch override");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitInput;
    }

    try {
        if (simulate->parsed()) return cmd_simulate(sim);
        if (gen->parsed()) return cmd_gen_labels(gl);
        if (extract->parsed()) return cmd_extract(ex);
        if (train_cmd->parsed()) return cmd_train(tr);
        if (eval_cmd->parsed()) return cmd_eval(ev);
        if (map_cmd->parsed()) return cmd_map(mp);
        if (plan_cmd->parsed()) return cmd_plan(pl);
        if (ablate->parsed()) return cmd_ablate(ab);
    } catch (const NoPath& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitDegenerate;
    } catch (const EmptyMap& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitDegenerate;
    } catch (const DegenerateRange& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitDegenerate;
    } catch (const json::exception& e) {
        std::fprintf(stderr, "input error: %s\n", e.what());
        return kExitInput;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "input error: %s\n", e.what());
        return kExitInput;
    }
    return kExitInput;
}

}  // namespace terra::cli
