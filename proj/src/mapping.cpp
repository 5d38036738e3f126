#include "terra/mapping.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "terra/errors.hpp"

namespace terra {

namespace {
using json = nlohmann::ordered_json;
}

GroundImageFrame GeoImage::frame() const {
    // y-down raster of a north-up orthophoto
    GroundImageFrame f;
    f.A << 1.0 / gsd, 0.0, 0.0, -1.0 / gsd;
    f.anchor_world = world_min;
    f.anchor_px = Eigen::Vector2d(-0.5, image.height - 0.5);
    return f;
}

double GeoImage::sample_world(double x, double y, int c) const {
    const Eigen::Vector2d px = frame().to_pixel({x, y});
    return bilinear(image, px.x(), px.y(), c);
}

bool GeoImage::contains_world(double x, double y) const {
    const Eigen::Vector2d px = frame().to_pixel({x, y});
    return in_support(image, px.x(), px.y());
}

std::vector<Tile> tile_image(const GeoImage& geo, const SlidingWindowSpec& spec,
                             int patch_resolution, double min_coverage) {
    if (spec.stride <= 0.0 || spec.stride > spec.patch_side) {
        throw std::invalid_argument("tile_image: need 0 < stride <= patch_side");
    }
    std::vector<Tile> tiles;
    const Eigen::Vector2d lo = geo.world_min;
    const Eigen::Vector2d hi = geo.world_max();
    const GroundImageFrame frame = geo.frame();
    constexpr double kEdgeEps = 1e-9;

    for (double y0 = lo.y(); y0 + spec.patch_side <= hi.y() + kEdgeEps; y0 += spec.stride) {
        for (double x0 = lo.x(); x0 + spec.patch_side <= hi.x() + kEdgeEps; x0 += spec.stride) {
            PatchFootprint fp;
            fp.center = Eigen::Vector2d(x0 + spec.patch_side / 2.0, y0 + spec.patch_side / 2.0);
            fp.yaw = 0.0;
            fp.side = spec.patch_side;
            auto res = try_extract_patch(geo.image, nullptr, frame, fp, patch_resolution,
                                         min_coverage);
            if (!res) continue;
            tiles.push_back({fp, std::move(res->patch)});
        }
    }
    return tiles;
}

CostMap predict_map(const std::vector<Tile>& tiles, const RegressorModel& model,
                    double cell_size) {
    CostMap map;
    map.cell_size = cell_size;
    map.metric_kind = model.metric_kind;
    if (tiles.empty()) return map;

    Eigen::Vector2d lo(std::numeric_limits<double>::infinity(),
                       std::numeric_limits<double>::infinity());
    Eigen::Vector2d hi = -lo;
    for (const auto& t : tiles) {
        const double half = t.footprint.side / 2.0;
        lo = lo.cwiseMin(t.footprint.center - Eigen::Vector2d(half, half));
        hi = hi.cwiseMax(t.footprint.center + Eigen::Vector2d(half, half));
    }
    map.origin = lo;
    map.width = std::max(1, static_cast<int>(std::ceil((hi.x() - lo.x()) / cell_size - 1e-9)));
    map.height = std::max(1, static_cast<int>(std::ceil((hi.y() - lo.y()) / cell_size - 1e-9)));
    map.sum.assign(static_cast<size_t>(map.width) * map.height, 0.0);
    map.count.assign(static_cast<size_t>(map.width) * map.height, 0);

    for (const auto& tile : tiles) {
        const double pred = forward(model, extract_features(tile.patch));
        const double half = tile.footprint.side / 2.0;
        const Eigen::Vector2d fmin = tile.footprint.center - Eigen::Vector2d(half, half);
        const Eigen::Vector2d fmax = tile.footprint.center + Eigen::Vector2d(half, half);
        // cells whose centers fall inside the footprint
        const int i0 = std::max(0, static_cast<int>(std::floor((fmin.x() - map.origin.x()) / cell_size - 0.5 - 1e-9)) + 1);
        const int j0 = std::max(0, static_cast<int>(std::floor((fmin.y() - map.origin.y()) / cell_size - 0.5 - 1e-9)) + 1);
        for (int j = j0; j < map.height; ++j) {
            if (map.cell_center(0, j).y() >= fmax.y() - 1e-9) break;
            for (int i = i0; i < map.width; ++i) {
                if (map.cell_center(i, 0).x() >= fmax.x() - 1e-9) break;
                map.sum[map.index(i, j)] += pred;
                map.count[map.index(i, j)] += 1;
            }
        }
    }
    return map;
}

void export_map(const CostMap& map, const std::string& png_path, const std::string& json_path) {
    bool any = false;
    for (int c : map.count) any = any || c > 0;
    if (!any || map.width <= 0) throw EmptyMap("export_map: no observed cells");

    // row 0 of the PNG is the map's maximum-y row (north up)
    ImageU16 im(map.width, map.height, 1);
    for (int j = 0; j < map.height; ++j) {
        for (int i = 0; i < map.width; ++i) {
            const int row = map.height - 1 - j;
            if (!map.observed(i, j)) {
                im.at(i, row) = 0;
            } else {
                const double v = std::clamp(map.value(i, j), 0.0, 1.0);
                im.at(i, row) = static_cast<std::uint16_t>(1 + std::lround(v * 65534.0));
            }
        }
    }
    write_png16(png_path, im);

    json j;
    j["origin"] = {map.origin.x(), map.origin.y()};
    j["cell_size"] = map.cell_size;
    j["width"] = map.width;
    j["height"] = map.height;
    j["metric_kind"] = metric_name(map.metric_kind);
    j["no_data"] = 0;
    j["value_offset"] = 1;
    j["value_scale"] = 65534;
    j["row_order"] = "north_up";
    std::ofstream out(json_path);
    if (!out) throw IoError("cannot write " + json_path);
    out << j.dump(2) << "\n";
}

CostMap import_map(const std::string& png_path, const std::string& json_path) {
    std::ifstream in(json_path);
    if (!in) throw IoError("cannot open " + json_path);
    json j = json::parse(in);

    CostMap map;
    map.origin = Eigen::Vector2d(j.at("origin")[0].get<double>(), j.at("origin")[1].get<double>());
    map.cell_size = j.at("cell_size").get<double>();
    map.width = j.at("width").get<int>();
    map.height = j.at("height").get<int>();
    map.metric_kind = metric_from_name(j.at("metric_kind").get<std::string>());
    const double offset = j.at("value_offset").get<double>();
    const double scale = j.at("value_scale").get<double>();

    const ImageU16 im = read_png16(png_path);
    if (im.width != map.width || im.height != map.height) {
        throw IoError("import_map: PNG size does not match sidecar");
    }
    map.sum.assign(static_cast<size_t>(map.width) * map.height, 0.0);
    map.count.assign(static_cast<size_t>(map.width) * map.height, 0);
    for (int j2 = 0; j2 < map.height; ++j2) {
        for (int i = 0; i < map.width; ++i) {
            const std::uint16_t raw = im.at(i, map.height - 1 - j2);
            if (raw == 0) continue;
            map.sum[map.index(i, j2)] = (raw - offset) / scale;
            map.count[map.index(i, j2)] = 1;
        }
    }
    return map;
}

void save_geoimage(const GeoImage& geo, const std::string& png_path,
                   const std::string& json_path) {
    write_png(png_path, to_u8(geo.image));
    json j;
    j["world_min"] = {geo.world_min.x(), geo.world_min.y()};
    j["gsd"] = geo.gsd;
    std::ofstream out(json_path);
    if (!out) throw IoError("cannot write " + json_path);
    out << j.dump(2) << "\n";
}

GeoImage load_geoimage(const std::string& png_path, const std::string& json_path) {
    std::ifstream in(json_path);
    if (!in) throw IoError("cannot open " + json_path);
    json j = json::parse(in);
    GeoImage geo;
    geo.image = to_float(read_png(png_path));
    geo.world_min = Eigen::Vector2d(j.at("world_min")[0].get<double>(),
                                    j.at("world_min")[1].get<double>());
    geo.gsd = j.at("gsd").get<double>();
    return geo;
}

void dump_map_csv(const CostMap& map, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << "x,y,value\n";
    char buf[128];
    for (int j = 0; j < map.height; ++j) {
        for (int i = 0; i < map.width; ++i) {
            if (!map.observed(i, j)) continue;
            const Eigen::Vector2d c = map.cell_center(i, j);
            std::snprintf(buf, sizeof(buf), "%.10g,%.10g,%.10g\n", c.x(), c.y(), map.value(i, j));
            out << buf;
        }
    }
}

}  // namespace terra
