#include "terra/simkit.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>

#include <nlohmann/json.hpp>

#include "terra/errors.hpp"
#include "terra/fft.hpp"
#include "terra/predictor.hpp"

namespace terra {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

// shared texture of every occluder class: the FPV cannot tell them apart
constexpr double kOccluderBase = 0.62;
constexpr double kOccluderAmp = 0.22;
constexpr double kOccluderFreq = 16.0;
constexpr std::uint64_t kOccluderSalt = 0xa5a5a5a5ull;

constexpr double kSkyValue = 0.85;

std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

double lattice_value(int xi, int yi, std::uint64_t seed) {
    std::uint64_t h = splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(
                                     static_cast<std::uint32_t>(xi)) |
                                 (static_cast<std::uint64_t>(static_cast<std::uint32_t>(yi)) << 32)));
    return static_cast<double>(h >> 11) * (2.0 / 9007199254740992.0) - 1.0;  // [-1, 1)
}

double smoothstep(double t) { return t * t * (3.0 - 2.0 * t); }

double wrap_pi(double a) {
    while (a > std::numbers::pi) a -= 2.0 * std::numbers::pi;
    while (a <= -std::numbers::pi) a += 2.0 * std::numbers::pi;
    return a;
}

double lerp_yaw(double a, double b, double u) { return wrap_pi(a + wrap_pi(b - a) * u); }

Eigen::Vector2d rotate2(double angle, const Eigen::Vector2d& v) {
    const double c = std::cos(angle), s = std::sin(angle);
    return {c * v.x() - s * v.y(), s * v.x() + c * v.y()};
}

// two-octave value noise, roughly [-1, 1]
double fbm(double x, double y, std::uint64_t seed) {
    return (value_noise(x, y, seed) + 0.5 * value_noise(2.0 * x, 2.0 * y, seed ^ 0x51ed270bull)) /
           1.5;
}

// zero-phase band-pass via FFT mask
std::vector<double> bandpass(const std::vector<double>& x, double rate, double f_lo, double f_hi) {
    const int n = static_cast<int>(x.size());
    std::vector<std::complex<double>> spec(n / 2 + 1);
    detail::real_fft(x, spec.data());
    for (int k = 0; k < static_cast<int>(spec.size()); ++k) {
        const double f = k * rate / n;
        if (f < f_lo || f > f_hi) spec[k] = 0.0;
    }
    std::vector<double> out;
    detail::real_ifft(spec, out, n);
    return out;
}

/// Constant-speed traversal of a polyline with yaw blended over +-0.5 m
/// around the vertices so turns span several odometry samples.
class PathSampler {
  public:
    PathSampler(const std::vector<Eigen::Vector2d>& pts, double blend = 0.5)
        : pts_(pts), blend_(blend) {
        if (pts_.size() < 2) throw std::invalid_argument("path needs >= 2 waypoints");
        cum_.resize(pts_.size(), 0.0);
        for (size_t i = 1; i < pts_.size(); ++i) {
            cum_[i] = cum_[i - 1] + (pts_[i] - pts_[i - 1]).norm();
        }
    }

    double total() const { return cum_.back(); }

    Eigen::Vector2d pos(double s) const {
        s = std::clamp(s, 0.0, total());
        const size_t k = segment(s);
        const double span = cum_[k + 1] - cum_[k];
        const double u = span > 1e-12 ? (s - cum_[k]) / span : 0.0;
        return (1.0 - u) * pts_[k] + u * pts_[k + 1];
    }

    double yaw(double s) const {
        s = std::clamp(s, 0.0, total());
        const size_t k = segment(s);
        double y = seg_yaw(k);
        if (k > 0 && s - cum_[k] < blend_) {
            const double u = 0.5 + 0.5 * (s - cum_[k]) / blend_;
            y = lerp_yaw(seg_yaw(k - 1), seg_yaw(k), u);
        } else if (k + 2 < pts_.size() && cum_[k + 1] - s < blend_) {
            const double u = 0.5 * (1.0 - (cum_[k + 1] - s) / blend_);
            y = lerp_yaw(seg_yaw(k), seg_yaw(k + 1), u);
        }
        return y;
    }

    double yaw_rate(double s, double speed) const {
        const double ds = 0.01;
        return wrap_pi(yaw(s + ds) - yaw(s - ds)) / (2.0 * ds) * speed;
    }

  private:
    size_t segment(double s) const {
        size_t k = 0;
        while (k + 2 < pts_.size() && cum_[k + 1] < s) ++k;
        return k;
    }
    double seg_yaw(size_t k) const {
        const Eigen::Vector2d d = pts_[k + 1] - pts_[k];
        return std::atan2(d.y(), d.x());
    }

    std::vector<Eigen::Vector2d> pts_;
    std::vector<double> cum_;
    double blend_;
};

std::vector<double> time_grid(double t0, double t1, double rate) {
    std::vector<double> out;
    const long n = static_cast<long>(std::floor((t1 - t0) * rate + 1e-9));
    out.reserve(n + 1);
    for (long i = 0; i <= n; ++i) out.push_back(t0 + i / rate);
    return out;
}

}  // namespace

double value_noise(double x, double y, std::uint64_t seed) {
    const double fx = std::floor(x);
    const double fy = std::floor(y);
    const int xi = static_cast<int>(fx);
    const int yi = static_cast<int>(fy);
    const double tx = smoothstep(x - fx);
    const double ty = smoothstep(y - fy);
    const double v00 = lattice_value(xi, yi, seed);
    const double v10 = lattice_value(xi + 1, yi, seed);
    const double v01 = lattice_value(xi, yi + 1, seed);
    const double v11 = lattice_value(xi + 1, yi + 1, seed);
    return (1.0 - ty) * ((1.0 - tx) * v00 + tx * v10) + ty * ((1.0 - tx) * v01 + tx * v11);
}

int Scene::class_at(double x, double y) const {
    const double cell = world_size / grid_n;
    const int i = std::clamp(static_cast<int>(x / cell), 0, grid_n - 1);
    const int j = std::clamp(static_cast<int>(y / cell), 0, grid_n - 1);
    return class_map[static_cast<size_t>(j) * grid_n + i];
}

const TerrainClassSpec& Scene::spec_at(double x, double y) const {
    return classes[class_at(x, y)];
}

double Scene::texture(double x, double y, bool aerial_view, bool occlusion_study) const {
    const int c = class_at(x, y);
    const TerrainClassSpec& spec = classes[c];
    const bool show_occluder = spec.occluder && !(aerial_view && occlusion_study);
    double base, amp, freq;
    std::uint64_t salt;
    if (show_occluder) {
        base = kOccluderBase;
        amp = kOccluderAmp;
        freq = kOccluderFreq;
        salt = kOccluderSalt;  // class-independent on purpose
    } else {
        base = spec.base_gray;
        amp = spec.noise_amp;
        freq = spec.spatial_freq;
        salt = splitmix64(static_cast<std::uint64_t>(c) + 1);
    }
    return std::clamp(base + amp * fbm(x * freq, y * freq, seed ^ salt), 0.0, 1.0);
}

Scene generate_scene(const std::vector<TerrainClassSpec>& specs, SceneLayout layout,
                     std::uint64_t seed, double world_size, int grid_n) {
    if (specs.size() < 2) throw std::invalid_argument("generate_scene: need >= 2 classes");
    Scene scene;
    scene.world_size = world_size;
    scene.grid_n = grid_n;
    scene.classes = specs;
    scene.seed = seed;
    scene.class_map.assign(static_cast<size_t>(grid_n) * grid_n, 0);

    std::mt19937_64 rng(seed);
    switch (layout) {
        case SceneLayout::half_split: {
            for (int j = 0; j < grid_n; ++j) {
                for (int i = 0; i < grid_n; ++i) {
                    scene.class_map[static_cast<size_t>(j) * grid_n + i] =
                        i < grid_n / 2 ? 0 : 1;
                }
            }
            break;
        }
        case SceneLayout::blocks: {
            // blocks of ~1/8 world size, uniformly random class
            const int block = std::max(1, grid_n / 8);
            std::uniform_int_distribution<int> pick(0, static_cast<int>(specs.size()) - 1);
            for (int bj = 0; bj * block < grid_n; ++bj) {
                for (int bi = 0; bi * block < grid_n; ++bi) {
                    const int c = pick(rng);
                    for (int j = bj * block; j < std::min(grid_n, (bj + 1) * block); ++j) {
                        for (int i = bi * block; i < std::min(grid_n, (bi + 1) * block); ++i) {
                            scene.class_map[static_cast<size_t>(j) * grid_n + i] = c;
                        }
                    }
                }
            }
            break;
        }
        case SceneLayout::voronoi: {
            const int n_sites = static_cast<int>(specs.size()) * 6;
            std::uniform_real_distribution<double> coord(0.0, world_size);
            std::uniform_int_distribution<int> pick(0, static_cast<int>(specs.size()) - 1);
            std::vector<Eigen::Vector2d> sites;
            std::vector<int> site_class;
            for (int s = 0; s < n_sites; ++s) {
                sites.emplace_back(coord(rng), coord(rng));
                site_class.push_back(s < static_cast<int>(specs.size())
                                         ? s  // every class owns at least one site
                                         : pick(rng));
            }
            const double cell = world_size / grid_n;
            for (int j = 0; j < grid_n; ++j) {
                for (int i = 0; i < grid_n; ++i) {
                    const Eigen::Vector2d p((i + 0.5) * cell, (j + 0.5) * cell);
                    int best = 0;
                    double best_d = std::numeric_limits<double>::infinity();
                    for (int s = 0; s < n_sites; ++s) {
                        const double d = (sites[s] - p).squaredNorm();
                        if (d < best_d) {
                            best_d = d;
                            best = s;
                        }
                    }
                    scene.class_map[static_cast<size_t>(j) * grid_n + i] = site_class[best];
                }
            }
            break;
        }
    }
    return scene;
}

SensorBundle simulate_traverse(const Scene& scene, const std::vector<Eigen::Vector2d>& path,
                               const TraverseConfig& cfg, std::uint64_t seed) {
    for (const auto& p : path) {
        if (p.x() < 1.0 || p.y() < 1.0 || p.x() > scene.world_size - 1.0 ||
            p.y() > scene.world_size - 1.0) {
            throw PathOutOfScene("waypoint outside scene (1 m margin)");
        }
    }
    const PathSampler sampler(path);
    const double duration = sampler.total() / cfg.speed;

    SensorBundle bundle;
    bundle.duration = duration;
    std::mt19937_64 rng(splitmix64(seed));
    std::normal_distribution<double> normal(0.0, 1.0);

    for (double t : time_grid(0.0, duration, cfg.traj_rate)) {
        const double s = cfg.speed * t;
        TrajectorySample ts;
        ts.timestamp = t;
        ts.position = Eigen::Vector3d(sampler.pos(s).x(), sampler.pos(s).y(), 0.0);
        ts.yaw = sampler.yaw(s);
        ts.speed_cmd = cfg.speed;
        bundle.trajectory.push_back(ts);
    }

    bundle.odom_t = time_grid(0.0, duration, cfg.odom_rate);
    for (double t : bundle.odom_t) {
        const double s = cfg.speed * t;
        const double wz = sampler.yaw_rate(s, cfg.speed);
        bundle.odom_vl.push_back(cfg.speed - 0.5 * wz * cfg.track_width + 0.003 * normal(rng));
        bundle.odom_vr.push_back(cfg.speed + 0.5 * wz * cfg.track_width + 0.003 * normal(rng));
    }

    // IMU: class-local noise std, band-shaped into the 1-30 Hz analysis band
    const std::vector<double> imu_t = time_grid(0.0, duration, cfg.imu_rate);
    const size_t n_imu = imu_t.size();
    std::vector<double> raw_az(n_imu), raw_wx(n_imu), raw_wy(n_imu);
    for (size_t i = 0; i < n_imu; ++i) {
        const Eigen::Vector2d p = sampler.pos(cfg.speed * imu_t[i]);
        raw_az[i] = scene.roughness_at(p.x(), p.y()) * normal(rng);
        raw_wx[i] = scene.bumpiness_at(p.x(), p.y()) * normal(rng);
        raw_wy[i] = scene.bumpiness_at(p.x(), p.y()) * normal(rng);
    }
    std::vector<double> az = bandpass(raw_az, cfg.imu_rate, 1.0, 30.0);
    std::vector<double> wx = bandpass(raw_wx, cfg.imu_rate, 1.0, 30.0);
    std::vector<double> wy = bandpass(raw_wy, cfg.imu_rate, 1.0, 30.0);
    for (size_t i = 0; i < n_imu; ++i) az[i] += cfg.accel_noise_floor * normal(rng);

    auto fill = [&](TimeSeries& ts, std::vector<double> values, double rate) {
        ts.timestamps = imu_t;
        ts.values = std::move(values);
        ts.nominal_rate = rate;
    };
    fill(bundle.imu_az, std::move(az), cfg.imu_rate);
    fill(bundle.imu_wx, std::move(wx), cfg.imu_rate);
    fill(bundle.imu_wy, std::move(wy), cfg.imu_rate);
    std::vector<double> ax(n_imu), ay(n_imu), wz_sig(n_imu);
    for (size_t i = 0; i < n_imu; ++i) {
        ax[i] = 0.02 * normal(rng);
        ay[i] = 0.02 * normal(rng);
        wz_sig[i] = sampler.yaw_rate(cfg.speed * imu_t[i], cfg.speed) + 0.002 * normal(rng);
    }
    fill(bundle.imu_ax, std::move(ax), cfg.imu_rate);
    fill(bundle.imu_ay, std::move(ay), cfg.imu_rate);
    fill(bundle.imu_wz, std::move(wz_sig), cfg.imu_rate);

    // battery: I*V = baseline + class draw + noise
    const std::vector<double> pw_t = time_grid(0.0, duration, cfg.power_rate);
    TimeSeries current, voltage;
    current.timestamps = pw_t;
    voltage.timestamps = pw_t;
    current.nominal_rate = cfg.power_rate;
    voltage.nominal_rate = cfg.power_rate;
    for (double t : pw_t) {
        const Eigen::Vector2d p = sampler.pos(cfg.speed * t);
        const double v = cfg.nominal_voltage + 0.05 * normal(rng);
        const double watts =
            cfg.baseline_power + scene.power_at(p.x(), p.y()) + 3.0 * normal(rng);
        voltage.values.push_back(v);
        current.values.push_back(watts / v);
    }
    bundle.power_current = std::move(current);
    bundle.power_voltage = std::move(voltage);
    return bundle;
}

GeoImage render_aerial(const Scene& scene, const Eigen::Vector2d& region_min,
                       const Eigen::Vector2d& region_max, double gsd, bool occlusion_study) {
    if (gsd <= 0.0) throw std::invalid_argument("render_aerial: gsd must be > 0");
    GeoImage geo;
    geo.world_min = region_min;
    geo.gsd = gsd;
    const int w = std::max(1, static_cast<int>(std::ceil((region_max.x() - region_min.x()) / gsd - 1e-9)));
    const int h = std::max(1, static_cast<int>(std::ceil((region_max.y() - region_min.y()) / gsd - 1e-9)));
    geo.image = ImageF(w, h, 1);
    const double y_max = region_min.y() + h * gsd;
    for (int v = 0; v < h; ++v) {
        const double y = y_max - (v + 0.5) * gsd;
        for (int u = 0; u < w; ++u) {
            const double x = region_min.x() + (u + 0.5) * gsd;
            geo.image.at(u, v) = static_cast<float>(scene.texture(x, y, true, occlusion_study));
        }
    }
    return geo;
}

FpvRig FpvRig::standard() {
    FpvRig rig;
    rig.camera = CameraModel{260.0, 260.0, 160.0, 120.0, 320, 240};
    rig.robot_height = 0.4;

    // camera 0.4 m ahead of and 0.4 m above the base link, pitched 15 deg down
    const double pitch_down = 15.0 * std::numbers::pi / 180.0;
    Eigen::Matrix3d robot_from_cam;
    const Eigen::Vector3d cam_z(std::cos(pitch_down), 0.0, -std::sin(pitch_down));
    const Eigen::Vector3d cam_x(0.0, -1.0, 0.0);
    const Eigen::Vector3d cam_y = cam_z.cross(cam_x);
    robot_from_cam.col(0) = cam_x;
    robot_from_cam.col(1) = cam_y;
    robot_from_cam.col(2) = cam_z;

    RigidTransform robot_from_cam_t;
    robot_from_cam_t.rotation = Eigen::Quaterniond(robot_from_cam).normalized();
    robot_from_cam_t.translation = Eigen::Vector3d(0.4, 0.0, 0.4);
    robot_from_cam_t.from_frame = kFrameCamera;
    robot_from_cam_t.to_frame = kFrameRobot;
    rig.cam_from_robot = inverse(robot_from_cam_t);
    return rig;
}

ImageF render_fpv(const Scene& scene, double x, double y, double yaw,
                  const CameraModel& cam, const RigidTransform& cam_from_robot,
                  double robot_height) {
    const RigidTransform ground_from_robot =
        ground_from_attitude(AttitudeSample{0.0, 0.0, 0.0}, robot_height);
    const RigidTransform cam_from_ground = compose(cam_from_robot, inverse(ground_from_robot));

    // lattice of pixel-corner ground intersections, shared between neighbors
    const int lw = cam.width + 1;
    const int lh = cam.height + 1;
    std::vector<Eigen::Vector2d> lattice(static_cast<size_t>(lw) * lh);
    std::vector<char> hit(static_cast<size_t>(lw) * lh, 0);
    for (int v = 0; v < lh; ++v) {
        for (int u = 0; u < lw; ++u) {
            const auto g = try_back_project_to_ground(
                Eigen::Vector2d(u - 0.5, v - 0.5), cam_from_ground, cam);
            if (g && g->head<2>().norm() < 120.0) {  // clip near-horizon rays
                lattice[static_cast<size_t>(v) * lw + u] =
                    Eigen::Vector2d(x, y) + rotate2(yaw, g->head<2>());
                hit[static_cast<size_t>(v) * lw + u] = 1;
            }
        }
    }

    ImageF im(cam.width, cam.height, 1, static_cast<float>(kSkyValue));
    for (int v = 0; v < cam.height; ++v) {
        for (int u = 0; u < cam.width; ++u) {
            const size_t i00 = static_cast<size_t>(v) * lw + u;
            const size_t i10 = i00 + 1;
            const size_t i01 = i00 + lw;
            const size_t i11 = i01 + 1;
            if (!(hit[i00] && hit[i10] && hit[i01] && hit[i11])) continue;
            const Eigen::Vector2d& w00 = lattice[i00];
            const Eigen::Vector2d& w10 = lattice[i10];
            const Eigen::Vector2d& w01 = lattice[i01];
            const Eigen::Vector2d& w11 = lattice[i11];
            const double extent =
                std::max({(w10 - w00).norm(), (w01 - w00).norm(), (w11 - w10).norm(),
                          (w11 - w01).norm()});
            // integrate the texture over the pixel's ground footprint
            const int k = std::clamp(static_cast<int>(std::ceil(extent / 0.015)), 1, 6);
            double acc = 0.0;
            for (int b = 0; b < k; ++b) {
                const double tb = (b + 0.5) / k;
                const Eigen::Vector2d left = (1.0 - tb) * w00 + tb * w01;
                const Eigen::Vector2d right = (1.0 - tb) * w10 + tb * w11;
                for (int a = 0; a < k; ++a) {
                    const double ta = (a + 0.5) / k;
                    const Eigen::Vector2d w = (1.0 - ta) * left + ta * right;
                    acc += scene.texture(w.x(), w.y(), false, false);
                }
            }
            im.at(u, v) = static_cast<float>(acc / (k * k));
        }
    }
    return im;
}

namespace {

std::vector<double> label_grid(const SensorBundle& bundle, const DatasetBuildConfig& cfg) {
    const double alpha = cfg.window.alpha();
    const double t0 = bundle.imu_az.timestamps.front() + alpha;
    const double t1 = bundle.imu_az.timestamps.back() - alpha;
    if (t1 <= t0) throw WindowOutOfRange("traverse shorter than one label window");
    return time_grid(t0, t1, cfg.label_rate);
}

std::string frame_name(const char* prefix, int index) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%s_%06d", prefix, index);
    return buf;
}

std::array<Eigen::Vector2d, 4> marker_world_corners(const Eigen::Vector2d& robot_xy,
                                                    double yaw, double side) {
    // clockwise from front-left in the robot frame (x forward, y left)
    const std::array<Eigen::Vector2d, 4> local{
        Eigen::Vector2d(side / 2, side / 2), Eigen::Vector2d(side / 2, -side / 2),
        Eigen::Vector2d(-side / 2, -side / 2), Eigen::Vector2d(-side / 2, side / 2)};
    std::array<Eigen::Vector2d, 4> world;
    for (int i = 0; i < 4; ++i) world[i] = robot_xy + rotate2(yaw, local[i]);
    return world;
}

struct FrameSet {
    std::vector<UgvFrame> ugv;
    std::vector<UavFrame> uav;
    std::vector<GeoImage> uav_geo;  // parallel to uav, used when persisting
};

FrameSet render_frames(const Scene& scene, const PathSampler& sampler,
                       const DatasetBuildConfig& cfg, double duration) {
    FrameSet frames;
    const double speed = cfg.traverse.speed;

    if (cfg.ugv_frame_interval > 0.0) {
        int index = 0;
        for (double t = 0.0; t <= duration + 1e-9; t += cfg.ugv_frame_interval) {
            const double s = speed * t;
            UgvFrame f;
            f.frame_id = frame_name("ugv", index++);
            f.timestamp = t;
            f.x = sampler.pos(s).x();
            f.y = sampler.pos(s).y();
            f.yaw = sampler.yaw(s);
            f.attitude = AttitudeSample{t, 0.0, 0.0};
            f.image = render_fpv(scene, f.x, f.y, f.yaw, cfg.rig.camera, cfg.rig.cam_from_robot,
                                 cfg.rig.robot_height);
            frames.ugv.push_back(std::move(f));
        }
    }

    if (cfg.uav_frame_interval > 0.0) {
        int index = 0;
        for (double t = 0.0; t <= duration + 1e-9; t += cfg.uav_frame_interval) {
            const double s = speed * t;
            const Eigen::Vector2d robot = sampler.pos(s);
            const double yaw = sampler.yaw(s);
            // hovering drift keeps the marker off the image center
            const Eigen::Vector2d drift(0.4 * std::sin(0.31 * t), 0.4 * std::cos(0.23 * t));
            const Eigen::Vector2d center = robot + drift;
            const Eigen::Vector2d half(cfg.uav_window_half, cfg.uav_window_half);
            GeoImage geo = render_aerial(scene, center - half, center + half, cfg.uav_gsd,
                                         cfg.occlusion_study);

            UavFrame f;
            f.frame_id = frame_name("uav", index++);
            f.timestamp = t;
            f.robot_x = robot.x();
            f.robot_y = robot.y();
            f.robot_yaw = yaw;
            const auto corners = marker_world_corners(robot, yaw, cfg.marker_side);
            const GroundImageFrame gif = geo.frame();
            for (int i = 0; i < 4; ++i) f.marker.corners[i] = gif.to_pixel(corners[i]);
            f.marker.known_perimeter = 4.0 * cfg.marker_side;
            f.image = geo.image;
            frames.uav.push_back(std::move(f));
            frames.uav_geo.push_back(std::move(geo));
        }
    }
    return frames;
}

MetricTriple compute_metrics(const SensorBundle& bundle, const DatasetBuildConfig& cfg) {
    const std::vector<double> grid = label_grid(bundle, cfg);
    MetricTriple m;
    m.m_z = vibration_metric(bundle.imu_az, cfg.window, cfg.welch, grid);
    m.m_omega = bumpiness_metric(bundle.imu_wx, bundle.imu_wy, grid);
    m.m_p = energy_metric(bundle.power_current, bundle.power_voltage, cfg.window, grid);
    return m;
}

ExtractionConfig extraction_config(const Scene& scene, const DatasetBuildConfig& cfg) {
    ExtractionConfig ex;
    ex.ugv_camera = cfg.rig.camera;
    ex.cam_from_robot = cfg.rig.cam_from_robot;
    ex.robot_height = cfg.rig.robot_height;
    ex.patch_side = cfg.patch_side;
    ex.patch_resolution = cfg.patch_resolution;
    ex.max_ugv_distance = cfg.max_ugv_distance;
    ex.max_ugv_candidate_distance = cfg.max_ugv_candidate_distance;
    ex.terrain_lookup = [&scene](double x, double y) { return scene.spec_at(x, y).name; };
    return ex;
}

}  // namespace

BuiltDataset build_dataset(const Scene& scene, const std::vector<Eigen::Vector2d>& path,
                           const DatasetBuildConfig& cfg) {
    BuiltDataset out;
    out.sensors = simulate_traverse(scene, path, cfg.traverse, cfg.seed);
    out.metrics = compute_metrics(out.sensors, cfg);

    const PathSampler sampler(path);
    FrameSet frames = render_frames(scene, sampler, cfg, out.sensors.duration);
    out.ugv_frames = std::move(frames.ugv);
    out.uav_frames = std::move(frames.uav);

    const std::vector<TimeInterval> intervals = filter_straight_segments(
        out.sensors.odom_t, out.sensors.odom_vl, out.sensors.odom_vr);
    const std::vector<PointOfInterest> pois =
        sample_pois(out.sensors.trajectory, intervals, cfg.poi_spacing);

    out.records = build_patch_records(pois, out.ugv_frames, out.uav_frames,
                                      extraction_config(scene, cfg), out.metrics);
    return out;
}

namespace {

void write_csv(const std::string& path, const std::string& header,
               const std::vector<const std::vector<double>*>& columns) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << header << "\n";
    const size_t n = columns.front()->size();
    char buf[64];
    for (size_t i = 0; i < n; ++i) {
        for (size_t c = 0; c < columns.size(); ++c) {
            std::snprintf(buf, sizeof(buf), "%.10g", (*columns[c])[i]);
            out << buf << (c + 1 < columns.size() ? "," : "\n");
        }
    }
}

}  // namespace

void write_simulation(const Scene& scene, const std::vector<Eigen::Vector2d>& path,
                      const DatasetBuildConfig& cfg, const std::string& out_dir) {
    fs::create_directories(fs::path(out_dir) / "frames");
    const SensorBundle bundle = simulate_traverse(scene, path, cfg.traverse, cfg.seed);

    write_csv(fs::path(out_dir) / "imu.csv", "t,ax,ay,az,wx,wy,wz",
              {&bundle.imu_ax.timestamps, &bundle.imu_ax.values, &bundle.imu_ay.values,
               &bundle.imu_az.values, &bundle.imu_wx.values, &bundle.imu_wy.values,
               &bundle.imu_wz.values});
    write_csv(fs::path(out_dir) / "power.csv", "t,current,voltage",
              {&bundle.power_current.timestamps, &bundle.power_current.values,
               &bundle.power_voltage.values});
    write_csv(fs::path(out_dir) / "odometry.csv", "t,v_left,v_right",
              {&bundle.odom_t, &bundle.odom_vl, &bundle.odom_vr});
    {
        std::vector<double> t, x, y, z, yaw;
        for (const auto& s : bundle.trajectory) {
            t.push_back(s.timestamp);
            x.push_back(s.position.x());
            y.push_back(s.position.y());
            z.push_back(s.position.z());
            yaw.push_back(s.yaw);
        }
        write_csv(fs::path(out_dir) / "trajectory.csv", "t,x,y,z,yaw", {&t, &x, &y, &z, &yaw});
    }

    const PathSampler sampler(path);
    const FrameSet frames = render_frames(scene, sampler, cfg, bundle.duration);
    std::ofstream jsonl(fs::path(out_dir) / "frames.jsonl");
    if (!jsonl) throw IoError("cannot write frames.jsonl");
    for (const UgvFrame& f : frames.ugv) {
        const std::string rel = "frames/" + f.frame_id + ".png";
        write_png(fs::path(out_dir) / rel, to_u8(f.image));
        json j;
        j["path"] = rel;
        j["t"] = f.timestamp;
        j["source"] = "ugv";
        j["frame_id"] = f.frame_id;
        j["roll"] = f.attitude.roll;
        j["pitch"] = f.attitude.pitch;
        jsonl << j.dump() << "\n";
    }
    for (const UavFrame& f : frames.uav) {
        const std::string rel = "frames/" + f.frame_id + ".png";
        write_png(fs::path(out_dir) / rel, to_u8(f.image));
        json j;
        j["path"] = rel;
        j["t"] = f.timestamp;
        j["source"] = "uav";
        j["frame_id"] = f.frame_id;
        json corners = json::array();
        for (const auto& c : f.marker.corners) corners.push_back({c.x(), c.y()});
        j["marker_corners"] = std::move(corners);
        j["marker_perimeter"] = f.marker.known_perimeter;
        jsonl << j.dump() << "\n";
    }

    // full-coverage orthophoto of the traversed area for map building
    {
        Eigen::Vector2d lo = path.front(), hi = path.front();
        for (const auto& p : path) {
            lo = lo.cwiseMin(p);
            hi = hi.cwiseMax(p);
        }
        const Eigen::Vector2d margin(cfg.uav_window_half, cfg.uav_window_half);
        const GeoImage geo = render_aerial(scene, lo - margin, hi + margin,
                                           cfg.uav_gsd, cfg.occlusion_study);
        save_geoimage(geo, (fs::path(out_dir) / "aerial_full.png").string(),
                      (fs::path(out_dir) / "aerial_full.json").string());
    }

    json tmap;
    tmap["world_size"] = scene.world_size;
    tmap["grid_n"] = scene.grid_n;
    json class_names = json::array();
    for (const auto& c : scene.classes) class_names.push_back(c.name);
    tmap["classes"] = std::move(class_names);
    tmap["class_map"] = scene.class_map;
    std::ofstream tm(fs::path(out_dir) / "terrain_map.json");
    if (!tm) throw IoError("cannot write terrain_map.json");
    tm << tmap.dump() << "\n";

    // calibration consumed by the extraction pipeline
    json calib;
    calib["camera"] = {{"fx", cfg.rig.camera.fx},     {"fy", cfg.rig.camera.fy},
                       {"cx", cfg.rig.camera.cx},     {"cy", cfg.rig.camera.cy},
                       {"width", cfg.rig.camera.width}, {"height", cfg.rig.camera.height}};
    const RigidTransform robot_from_cam = inverse(cfg.rig.cam_from_robot);
    calib["robot_from_camera"] = {
        {"quaternion",
         {robot_from_cam.rotation.w(), robot_from_cam.rotation.x(),
          robot_from_cam.rotation.y(), robot_from_cam.rotation.z()}},
        {"translation",
         {robot_from_cam.translation.x(), robot_from_cam.translation.y(),
          robot_from_cam.translation.z()}}};
    calib["robot_height"] = cfg.rig.robot_height;
    calib["marker_perimeter"] = 4.0 * cfg.marker_side;
    std::ofstream cal(fs::path(out_dir) / "calibration.json");
    if (!cal) throw IoError("cannot write calibration.json");
    cal << calib.dump(2) << "\n";
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size() || a.size() < 2) {
        throw std::invalid_argument("spearman: need two equal-length series");
    }
    const auto ranks = [](const std::vector<double>& x) {
        const size_t n = x.size();
        std::vector<size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](size_t i, size_t j) { return x[i] < x[j]; });
        std::vector<double> r(n);
        size_t i = 0;
        while (i < n) {
            size_t j = i;
            while (j + 1 < n && x[order[j + 1]] == x[order[i]]) ++j;
            const double avg = (static_cast<double>(i) + j) / 2.0 + 1.0;
            for (size_t k = i; k <= j; ++k) r[order[k]] = avg;
            i = j + 1;
        }
        return r;
    };
    const std::vector<double> ra = ranks(a);
    const std::vector<double> rb = ranks(b);
    const double n = static_cast<double>(a.size());
    double ma = 0, mb = 0;
    for (size_t i = 0; i < a.size(); ++i) {
        ma += ra[i];
        mb += rb[i];
    }
    ma /= n;
    mb /= n;
    double cov = 0, va = 0, vb = 0;
    for (size_t i = 0; i < a.size(); ++i) {
        cov += (ra[i] - ma) * (rb[i] - mb);
        va += (ra[i] - ma) * (ra[i] - ma);
        vb += (rb[i] - mb) * (rb[i] - mb);
    }
    return cov / std::sqrt(va * vb);
}

const char* ablation_name(AblationKind kind) {
    switch (kind) {
        case AblationKind::distance: return "distance";
        case AblationKind::blur: return "blur";
        case AblationKind::occlusion: return "occlusion";
    }
    return "?";
}

namespace {

// texture-detail classes: identical mean gray so only high-frequency texture
// carries the label signal, which distance/blur destroy
std::vector<TerrainClassSpec> texture_detail_classes() {
    return {
        {"fine", 0.5, 0.05, 22.0, 0.3, 0.10, 40.0, false},
        {"mild", 0.5, 0.13, 15.0, 0.9, 0.30, 110.0, false},
        {"coarse", 0.5, 0.22, 9.0, 1.8, 0.60, 190.0, false},
        {"rocky", 0.5, 0.32, 5.0, 3.0, 1.00, 280.0, false},
    };
}

std::vector<TerrainClassSpec> occlusion_classes() {
    return {
        {"open_smooth", 0.42, 0.08, 10.0, 0.4, 0.12, 60.0, false},
        {"open_rough", 0.58, 0.24, 7.0, 2.2, 0.70, 220.0, false},
        {"veg_smooth", 0.35, 0.10, 12.0, 0.5, 0.15, 80.0, true},
        {"veg_rough", 0.72, 0.30, 6.0, 2.8, 0.95, 300.0, true},
    };
}

}  // namespace

std::vector<TerrainClassSpec> preset_classes(const std::string& name) {
    if (name == "two_class") {
        return {
            {"smooth", 0.35, 0.06, 8.0, 0.4, 0.15, 60.0, false},
            {"rough", 0.65, 0.25, 14.0, 2.5, 0.90, 260.0, false},
        };
    }
    if (name == "texture_detail") return texture_detail_classes();
    if (name == "occlusion") return occlusion_classes();
    throw std::invalid_argument("unknown class preset '" + name + "'");
}

namespace {

std::vector<Eigen::Vector2d> serpentine_path(double world, double margin, int rows) {
    std::vector<Eigen::Vector2d> pts;
    const double step = (world - 2.0 * margin) / std::max(1, rows - 1);
    for (int r = 0; r < rows; ++r) {
        const double y = margin + r * step;
        if (r % 2 == 0) {
            pts.emplace_back(margin, y);
            pts.emplace_back(world - margin, y);
        } else {
            pts.emplace_back(world - margin, y);
            pts.emplace_back(margin, y);
        }
    }
    return pts;
}

void write_ablation_report(const AblationReport& report, const std::string& out_dir);

AblationReport distance_ablation(const AblationConfig& cfg) {
    Scene scene = generate_scene(texture_detail_classes(), SceneLayout::blocks, cfg.seed, 44.0, 64);
    DatasetBuildConfig build;
    build.seed = cfg.seed;
    build.uav_frame_interval = 0.0;  // UGV-only study
    build.ugv_frame_interval = 1.0;
    BuiltDataset data = build_dataset(scene, serpentine_path(44.0, 6.0, 4), build);

    FoldAssignment folds = make_folds(data.records, 5, cfg.seed);
    const CvProtocol protocol = CvProtocol::plain_k(5);
    TrainConfig tc;
    tc.epochs = cfg.epochs;
    tc.batch_size = cfg.batch_size;
    tc.learning_rate = cfg.learning_rate;
    tc.seed = cfg.seed;
    // all UGV views up to 10 m join the training pool
    const ViewFilter filter = [](const PatchView& v) {
        return v.source == "ugv" && v.camera_distance <= 10.0;
    };
    TrainResult trained =
        train(data.records, "ugv", cfg.metric_index, folds, protocol, tc, filter);

    // per-distance-bin evaluation on held-out views
    constexpr int kFirstBin = 2, kLastBin = 9;  // [2,3) .. [9,10)
    std::vector<double> sq(kLastBin - kFirstBin + 1, 0.0);
    std::vector<int> n(kLastBin - kFirstBin + 1, 0);
    for (size_t mi = 0; mi < trained.models.size(); ++mi) {
        const int fold = protocol.eval_folds[mi];
        for (const PatchRecord& rec : data.records) {
            if (folds.fold(rec.poi_id) != fold) continue;
            for (const PatchView& view : rec.views) {
                if (!filter(view)) continue;
                const int bin = static_cast<int>(std::floor(view.camera_distance));
                if (bin < kFirstBin || bin > kLastBin) continue;
                const double pred = forward(trained.models[mi], extract_features(view.patch));
                const double target = trained.models[mi].label_stats.normalize(
                    cfg.metric_index, rec.labels[cfg.metric_index]);
                sq[bin - kFirstBin] += (pred - target) * (pred - target);
                n[bin - kFirstBin] += 1;
            }
        }
    }

    AblationReport report;
    report.kind = AblationKind::distance;
    std::vector<double> xs, rmses;
    for (int bin = kFirstBin; bin <= kLastBin; ++bin) {
        const int i = bin - kFirstBin;
        if (n[i] == 0) continue;
        AblationRow row;
        row.x = bin + 0.5;
        row.rmse = std::sqrt(sq[i] / n[i]);
        row.n = n[i];
        row.label = std::to_string(bin) + "-" + std::to_string(bin + 1) + "m";
        report.rows.push_back(row);
        xs.push_back(row.x);
        rmses.push_back(row.rmse);
    }
    report.extras["spearman"] = spearman(xs, rmses);
    return report;
}

AblationReport blur_ablation(const AblationConfig& cfg) {
    Scene scene = generate_scene(texture_detail_classes(), SceneLayout::blocks, cfg.seed, 44.0, 64);
    DatasetBuildConfig build;
    build.seed = cfg.seed;
    build.ugv_frame_interval = 0.0;  // aerial-only study
    build.uav_frame_interval = 2.0;
    BuiltDataset data = build_dataset(scene, serpentine_path(44.0, 6.0, 4), build);

    FoldAssignment folds = make_folds(data.records, 5, cfg.seed);
    const CvProtocol protocol = CvProtocol::plain_k(5);
    TrainConfig tc;
    tc.epochs = cfg.epochs;
    tc.batch_size = cfg.batch_size;
    tc.learning_rate = cfg.learning_rate;
    tc.seed = cfg.seed;

    // equivalent-distance kernel: sigma matched to the UGV pixel footprint
    const FpvRig rig = FpvRig::standard();
    const RigidTransform cam_from_ground = compose(
        rig.cam_from_robot,
        inverse(ground_from_attitude(AttitudeSample{0, 0, 0}, rig.robot_height)));
    const double patch_pitch = build.patch_side / build.patch_resolution;

    AblationReport report;
    report.kind = AblationKind::blur;
    for (int d = 1; d <= 10; ++d) {
        const Eigen::Vector2d px = project_ground_point(
            Eigen::Vector3d(static_cast<double>(d), 0.0, 0.0), cam_from_ground, rig.camera);
        const PixelFootprint fp = ground_pixel_footprint(cam_from_ground, rig.camera, px);
        const double sigma_v = fp.along_view / (2.0 * patch_pitch);
        const double sigma_h = fp.cross_view / (2.0 * patch_pitch);

        std::vector<PatchRecord> blurred = data.records;
        for (PatchRecord& rec : blurred) {
            for (PatchView& view : rec.views) {
                // dominantly vertical kernel on the patch's forward axis
                view.patch = gaussian_blur(view.patch, sigma_h, sigma_v);
            }
        }
        TrainResult trained = train(blurred, "uav", cfg.metric_index, folds, protocol, tc);
        const EvalReport ev =
            evaluate(trained.models, blurred, "uav", cfg.metric_index, folds, protocol);

        AblationRow row;
        row.x = d;
        row.rmse = ev.mean_rmse;
        row.label = std::to_string(d) + "m";
        for (const auto& [tag, val] : ev.per_terrain) row.n += val.second;
        report.rows.push_back(row);
    }
    report.extras["rmse_1m"] = report.rows.front().rmse;
    report.extras["rmse_10m"] = report.rows.back().rmse;
    return report;
}

double occluder_rmse(const EvalReport& ev, const Scene& scene) {
    double sq = 0;
    int n = 0;
    for (const auto& [tag, val] : ev.per_terrain) {
        for (const auto& spec : scene.classes) {
            if (spec.name == tag && spec.occluder) {
                sq += val.first * val.first * val.second;
                n += val.second;
            }
        }
    }
    if (n == 0) throw TooFewRecords("no occluder-class records evaluated");
    return std::sqrt(sq / n);
}

AblationReport occlusion_ablation(const AblationConfig& cfg) {
    Scene scene = generate_scene(occlusion_classes(), SceneLayout::blocks, cfg.seed, 44.0, 64);
    DatasetBuildConfig build;
    build.seed = cfg.seed;
    build.occlusion_study = true;  // aerial view resolves occluder-class ground texture
    build.ugv_frame_interval = 1.0;
    build.uav_frame_interval = 2.0;
    BuiltDataset data = build_dataset(scene, serpentine_path(44.0, 6.0, 4), build);

    const CvProtocol protocol = CvProtocol::plain_k(5);
    TrainConfig tc;
    tc.epochs = cfg.epochs;
    tc.batch_size = cfg.batch_size;
    tc.learning_rate = cfg.learning_rate;
    tc.seed = cfg.seed;

    // records that carry both viewpoints keep the comparison fair
    std::vector<PatchRecord> both;
    for (const PatchRecord& rec : data.records) {
        bool has_ugv = false, has_uav = false;
        for (const auto& v : rec.views) {
            has_ugv = has_ugv || (v.source == "ugv" && v.in_comparison);
            has_uav = has_uav || v.source == "uav";
        }
        if (has_ugv && has_uav) both.push_back(rec);
    }
    FoldAssignment both_folds = make_folds(both, 5, cfg.seed);

    TrainResult uav_models = train(both, "uav", cfg.metric_index, both_folds, protocol, tc);
    TrainResult ugv_models = train(both, "ugv", cfg.metric_index, both_folds, protocol, tc);
    const EvalReport uav_ev =
        evaluate(uav_models.models, both, "uav", cfg.metric_index, both_folds, protocol);
    const EvalReport ugv_ev =
        evaluate(ugv_models.models, both, "ugv", cfg.metric_index, both_folds, protocol);

    const double uav_rmse = occluder_rmse(uav_ev, scene);
    const double ugv_rmse = occluder_rmse(ugv_ev, scene);

    AblationReport report;
    report.kind = AblationKind::occlusion;
    report.rows.push_back({0.0, uav_rmse, 0, "uav_occluder"});
    report.rows.push_back({1.0, ugv_rmse, 0, "ugv_occluder"});
    report.extras["uav_rmse"] = uav_rmse;
    report.extras["ugv_rmse"] = ugv_rmse;
    report.extras["improvement"] = (ugv_rmse - uav_rmse) / ugv_rmse;
    return report;
}

void render_report_chart(const AblationReport& report, const std::string& path) {
    const int w = 480, h = 320, margin = 40;
    ImageU8 im(w, h, 3, 255);
    double x_min = report.rows.front().x, x_max = x_min;
    double y_min = report.rows.front().rmse, y_max = y_min;
    for (const auto& r : report.rows) {
        x_min = std::min(x_min, r.x);
        x_max = std::max(x_max, r.x);
        y_min = std::min(y_min, r.rmse);
        y_max = std::max(y_max, r.rmse);
    }
    if (x_max - x_min < 1e-12) x_max = x_min + 1.0;
    if (y_max - y_min < 1e-12) y_max = y_min + 1.0;
    const auto to_px = [&](double x, double y) {
        const int px = margin + static_cast<int>((x - x_min) / (x_max - x_min) * (w - 2 * margin));
        const int py = h - margin - static_cast<int>((y - y_min) / (y_max - y_min) * (h - 2 * margin));
        return std::pair<int, int>(px, py);
    };
    const auto put = [&](int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
        if (x < 0 || x >= w || y < 0 || y >= h) return;
        im.at(x, y, 0) = r;
        im.at(x, y, 1) = g;
        im.at(x, y, 2) = b;
    };
    for (int x = margin; x < w - margin; ++x) put(x, h - margin, 0, 0, 0);
    for (int y = margin; y < h - margin; ++y) put(margin, y, 0, 0, 0);
    for (size_t i = 0; i + 1 < report.rows.size(); ++i) {
        auto [x0, y0] = to_px(report.rows[i].x, report.rows[i].rmse);
        auto [x1, y1] = to_px(report.rows[i + 1].x, report.rows[i + 1].rmse);
        const int steps = std::max(std::abs(x1 - x0), std::abs(y1 - y0));
        for (int s = 0; s <= steps; ++s) {
            const double u = steps > 0 ? static_cast<double>(s) / steps : 0.0;
            put(static_cast<int>(std::lround(x0 + u * (x1 - x0))),
                static_cast<int>(std::lround(y0 + u * (y1 - y0))), 200, 40, 40);
        }
    }
    for (const auto& r : report.rows) {
        auto [x, y] = to_px(r.x, r.rmse);
        for (int dy = -2; dy <= 2; ++dy)
            for (int dx = -2; dx <= 2; ++dx) put(x + dx, y + dy, 40, 40, 200);
    }
    write_png(path, im);
}

void write_ablation_report(const AblationReport& report, const std::string& out_dir) {
    fs::create_directories(out_dir);
    std::ofstream csv(fs::path(out_dir) / "report.csv");
    if (!csv) throw IoError("cannot write ablation report.csv");
    csv << "x,label,rmse,n\n";
    char buf[128];
    for (const auto& r : report.rows) {
        std::snprintf(buf, sizeof(buf), "%.10g,%s,%.10g,%d\n", r.x, r.label.c_str(), r.rmse, r.n);
        csv << buf;
    }
    json j;
    j["kind"] = ablation_name(report.kind);
    j["rows"] = json::array();
    for (const auto& r : report.rows) {
        j["rows"].push_back({{"x", r.x}, {"label", r.label}, {"rmse", r.rmse}, {"n", r.n}});
    }
    j["extras"] = report.extras;
    std::ofstream jf(fs::path(out_dir) / "report.json");
    jf << j.dump(2) << "\n";
    render_report_chart(report, (fs::path(out_dir) / "report.png").string());
}

}  // namespace

AblationReport run_ablation(AblationKind kind, const AblationConfig& cfg) {
    AblationReport report;
    switch (kind) {
        case AblationKind::distance: report = distance_ablation(cfg); break;
        case AblationKind::blur: report = blur_ablation(cfg); break;
        case AblationKind::occlusion: report = occlusion_ablation(cfg); break;
    }
    if (!cfg.out_dir.empty()) write_ablation_report(report, cfg.out_dir);
    return report;
}

}  // namespace terra
