#include "terra/planner.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <queue>

#include "terra/errors.hpp"

namespace terra {

namespace {

struct CellIndex {
    int i = 0, j = 0;
};

CellIndex world_to_cell(const CostMap& map, const Eigen::Vector2d& w) {
    return {static_cast<int>(std::floor((w.x() - map.origin.x()) / map.cell_size)),
            static_cast<int>(std::floor((w.y() - map.origin.y()) / map.cell_size))};
}

}  // namespace

PathPlan plan(const CostMap& map, const PlanRequest& req) {
    if ((req.start - req.goal).norm() < 1e-12) {
        throw std::invalid_argument("plan: start == goal");
    }
    if (req.connectivity != 4 && req.connectivity != 8) {
        throw std::invalid_argument("plan: connectivity must be 4 or 8");
    }
    if (req.feasibility_threshold <= 0.0 || req.feasibility_threshold > 1.0) {
        throw std::invalid_argument("plan: feasibility_threshold must be in (0, 1]");
    }

    const CellIndex s = world_to_cell(map, req.start);
    const CellIndex g = world_to_cell(map, req.goal);
    for (const CellIndex& c : {s, g}) {
        if (!map.in_bounds(c.i, c.j) || !map.observed(c.i, c.j)) {
            throw UnobservedEndpoint("plan: endpoint cell unobserved");
        }
    }
    const auto passable = [&](int i, int j) {
        return map.observed(i, j) && map.value(i, j) <= req.feasibility_threshold;
    };
    if (!passable(s.i, s.j) || !passable(g.i, g.j)) {
        throw NoPath("plan: endpoint cell impassable");
    }

    const int n = map.width * map.height;
    const int start_id = static_cast<int>(map.index(s.i, s.j));
    const int goal_id = static_cast<int>(map.index(g.i, g.j));
    std::vector<double> dist(n, std::numeric_limits<double>::infinity());
    std::vector<int> prev(n, -1);
    using QueueEntry = std::pair<double, int>;  // (cost, cell id): deterministic ties
    std::priority_queue<QueueEntry, std::vector<QueueEntry>, std::greater<>> queue;
    dist[start_id] = 0.0;
    queue.push({0.0, start_id});

    const int di8[8] = {1, -1, 0, 0, 1, 1, -1, -1};
    const int dj8[8] = {0, 0, 1, -1, 1, -1, 1, -1};
    const bool metric = req.mode == PlanMode::metric_optimal;

    while (!queue.empty()) {
        const auto [d, id] = queue.top();
        queue.pop();
        if (d > dist[id] + 1e-15) continue;
        if (id == goal_id) break;
        const int i = id % map.width;
        const int j = id / map.width;
        const double v_here = map.value(i, j);
        for (int k = 0; k < req.connectivity; ++k) {
            const int ni = i + di8[k];
            const int nj = j + dj8[k];
            if (!map.in_bounds(ni, nj) || !passable(ni, nj)) continue;
            const double step = map.cell_size * (k < 4 ? 1.0 : std::numbers::sqrt2);
            const double w = step * (metric ? 0.5 * (v_here + map.value(ni, nj)) : 1.0);
            const int nid = static_cast<int>(map.index(ni, nj));
            if (dist[id] + w < dist[nid] - 1e-15) {
                dist[nid] = dist[id] + w;
                prev[nid] = id;
                queue.push({dist[nid], nid});
            }
        }
    }

    if (!std::isfinite(dist[goal_id])) {
        throw NoPath("plan: goal unreachable");
    }

    PathPlan out;
    out.total_cost = dist[goal_id];
    std::vector<int> chain;
    for (int id = goal_id; id != -1; id = prev[id]) chain.push_back(id);
    std::reverse(chain.begin(), chain.end());
    for (size_t c = 0; c < chain.size(); ++c) {
        const int i = chain[c] % map.width;
        const int j = chain[c] / map.width;
        out.waypoints.push_back(map.cell_center(i, j));
        if (c > 0) out.total_length += (out.waypoints[c] - out.waypoints[c - 1]).norm();
    }
    return out;
}

PathMetrics path_metrics(const PathPlan& plan, const CostMap& map) {
    PathMetrics m;
    m.length = plan.total_length;
    double sum = 0;
    for (const auto& w : plan.waypoints) {
        const CellIndex c = world_to_cell(map, w);
        const double v = map.value(c.i, c.j);
        sum += v;
        m.max_cell_cost = std::max(m.max_cell_cost, v);
    }
    if (!plan.waypoints.empty()) m.mean_cell_cost = sum / plan.waypoints.size();
    return m;
}

void save_plan_csv(const PathPlan& plan, const CostMap& map, const PlanRequest& req,
                   const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << "x,y,cumulative_cost\n";
    const bool metric = req.mode == PlanMode::metric_optimal;
    char buf[160];
    double cum = 0;
    for (size_t i = 0; i < plan.waypoints.size(); ++i) {
        if (i > 0) {
            const double step = (plan.waypoints[i] - plan.waypoints[i - 1]).norm();
            const CellIndex a = world_to_cell(map, plan.waypoints[i - 1]);
            const CellIndex b = world_to_cell(map, plan.waypoints[i]);
            cum += step * (metric ? 0.5 * (map.value(a.i, a.j) + map.value(b.i, b.j)) : 1.0);
        }
        std::snprintf(buf, sizeof(buf), "%.10g,%.10g,%.10g\n", plan.waypoints[i].x(),
                      plan.waypoints[i].y(), cum);
        out << buf;
    }
}

void render_plan_overlay(const CostMap& map, const std::vector<const PathPlan*>& plans,
                         const std::string& png_path) {
    const int scale = std::max(1, 512 / std::max(map.width, map.height));
    ImageU8 im(map.width * scale, map.height * scale, 3);
    for (int j = 0; j < map.height; ++j) {
        for (int i = 0; i < map.width; ++i) {
            std::uint8_t r = 40, g = 40, b = 60;  // unobserved
            if (map.observed(i, j)) {
                const auto v = static_cast<std::uint8_t>(
                    std::lround(std::clamp(map.value(i, j), 0.0, 1.0) * 255.0));
                r = g = b = v;
            }
            const int row0 = (map.height - 1 - j) * scale;  // north up
            for (int dy = 0; dy < scale; ++dy) {
                for (int dx = 0; dx < scale; ++dx) {
                    im.at(i * scale + dx, row0 + dy, 0) = r;
                    im.at(i * scale + dx, row0 + dy, 1) = g;
                    im.at(i * scale + dx, row0 + dy, 2) = b;
                }
            }
        }
    }
    const std::array<std::array<std::uint8_t, 3>, 3> palette{
        {{220, 40, 40}, {40, 120, 220}, {40, 200, 80}}};
    for (size_t p = 0; p < plans.size(); ++p) {
        const auto& color = palette[p % palette.size()];
        for (const auto& w : plans[p]->waypoints) {
            const int i = static_cast<int>(std::floor((w.x() - map.origin.x()) / map.cell_size));
            const int j = static_cast<int>(std::floor((w.y() - map.origin.y()) / map.cell_size));
            if (!map.in_bounds(i, j)) continue;
            const int row0 = (map.height - 1 - j) * scale;
            for (int dy = 0; dy < scale; ++dy) {
                for (int dx = 0; dx < scale; ++dx) {
                    im.at(i * scale + dx, row0 + dy, 0) = color[0];
                    im.at(i * scale + dx, row0 + dy, 1) = color[1];
                    im.at(i * scale + dx, row0 + dy, 2) = color[2];
                }
            }
        }
    }
    write_png(png_path, im);
}

}  // namespace terra
