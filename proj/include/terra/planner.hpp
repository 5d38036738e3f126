#pragma once

#include <Eigen/Core>

#include <string>
#include <vector>

#include "terra/mapping.hpp"

namespace terra {

enum class PlanMode { metric_optimal, shortest_feasible };

struct PlanRequest {
    Eigen::Vector2d start{0, 0};
    Eigen::Vector2d goal{0, 0};
    PlanMode mode = PlanMode::metric_optimal;
    double feasibility_threshold = 0.8;  // normalized cost in (0, 1]
    int connectivity = 8;                // 4 or 8
};

struct PathPlan {
    std::vector<Eigen::Vector2d> waypoints;  // cell centers, world coords
    double total_cost = 0;
    double total_length = 0;  // meters
};

/// Dijkstra over the cost-map grid. Edge weight is the euclidean step length
/// times the mean of the endpoint cell values (metric_optimal) or times 1
/// (shortest_feasible). Cells with value > threshold or zero count are
/// impassable in both modes. Throws UnobservedEndpoint / NoPath.
PathPlan plan(const CostMap& map, const PlanRequest& req);

struct PathMetrics {
    double length = 0;
    double mean_cell_cost = 0;
    double max_cell_cost = 0;
};

PathMetrics path_metrics(const PathPlan& plan, const CostMap& map);

/// Waypoint dump: x, y, cumulative_cost rows.
void save_plan_csv(const PathPlan& plan, const CostMap& map, const PlanRequest& req,
                   const std::string& path);

/// Cost map rendered gray with the path overlaid in red, start/goal marked.
void render_plan_overlay(const CostMap& map, const std::vector<const PathPlan*>& plans,
                         const std::string& png_path);

}  // namespace terra
