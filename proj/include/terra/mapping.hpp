#pragma once

#include <Eigen/Core>

#include <string>
#include <vector>

#include "terra/geometry.hpp"
#include "terra/predictor.hpp"
#include "terra/signals.hpp"

namespace terra {

/// Georeferenced grid of accumulated predictions. origin is the world
/// coordinate of cell (0,0)'s minimum corner; cell (i, j) covers
/// [origin + (i, j) * cell_size, origin + (i+1, j+1) * cell_size).
struct CostMap {
    int width = 0, height = 0;
    double cell_size = 0.25;  // meters
    Eigen::Vector2d origin{0, 0};
    std::vector<double> sum;
    std::vector<int> count;
    MetricKind metric_kind = MetricKind::vibration;

    size_t index(int i, int j) const { return static_cast<size_t>(j) * width + i; }
    bool in_bounds(int i, int j) const { return i >= 0 && i < width && j >= 0 && j < height; }
    bool observed(int i, int j) const { return count[index(i, j)] > 0; }
    double value(int i, int j) const { return sum[index(i, j)] / count[index(i, j)]; }
    Eigen::Vector2d cell_center(int i, int j) const {
        return origin + Eigen::Vector2d((i + 0.5) * cell_size, (j + 0.5) * cell_size);
    }
};

struct SlidingWindowSpec {
    double patch_side = 1.5;  // meters
    double stride = 0.75;     // meters
};

/// North-up orthophoto: pixel (u, v) maps to world
/// (world_min.x + (u+0.5)*gsd, world_max.y - (v+0.5)*gsd).
struct GeoImage {
    ImageF image;
    Eigen::Vector2d world_min{0, 0};
    double gsd = 0.02;  // meters per pixel

    Eigen::Vector2d world_max() const {
        return world_min + gsd * Eigen::Vector2d(image.width, image.height);
    }
    GroundImageFrame frame() const;
    double sample_world(double x, double y, int c = 0) const;
    bool contains_world(double x, double y) const;
};

struct Tile {
    PatchFootprint footprint;
    ImageF patch;
};

/// Axis-aligned sliding-window footprints at stride spacing; edge tiles with
/// insufficient coverage are skipped.
std::vector<Tile> tile_image(const GeoImage& geo, const SlidingWindowSpec& spec,
                             int patch_resolution = 64, double min_coverage = 0.95);

/// Predict every tile and average the predictions into map cells covered by
/// each footprint. Throws SchemaMismatch on extractor/model disagreement.
CostMap predict_map(const std::vector<Tile>& tiles, const RegressorModel& model,
                    double cell_size = 0.25);

/// 16-bit grayscale PNG (value v -> 1 + round(v * 65534), no-data -> 0) plus
/// a JSON sidecar with georeferencing. Throws EmptyMap when nothing observed.
void export_map(const CostMap& map, const std::string& png_path,
                const std::string& json_path);
CostMap import_map(const std::string& png_path, const std::string& json_path);

/// (x, y, value) rows for observed cells.
void dump_map_csv(const CostMap& map, const std::string& path);

/// 8-bit PNG + JSON sidecar (world_min, gsd) for orthophoto interchange.
void save_geoimage(const GeoImage& geo, const std::string& png_path,
                   const std::string& json_path);
GeoImage load_geoimage(const std::string& png_path, const std::string& json_path);

}  // namespace terra
