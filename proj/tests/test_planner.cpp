#include <doctest.h>

#include <cmath>
#include <random>

#include "terra/errors.hpp"
#include "terra/planner.hpp"
#include "oracles.hpp"

using namespace terra;

namespace {

CostMap grid_map(int w, int h, const std::vector<double>& values, double cell = 0.25) {
    CostMap map;
    map.width = w;
    map.height = h;
    map.cell_size = cell;
    map.origin = Eigen::Vector2d(0, 0);
    map.sum = values;
    map.count.assign(values.size(), 1);
    return map;
}

CostMap random_map(std::mt19937_64& rng, int w, int h) {
    std::uniform_real_distribution<double> value(0.05, 1.0);
    std::uniform_real_distribution<double> hole(0.0, 1.0);
    std::vector<double> cells(static_cast<size_t>(w) * h);
    CostMap map = grid_map(w, h, cells);
    for (size_t i = 0; i < cells.size(); ++i) {
        map.sum[i] = value(rng);
        if (hole(rng) < 0.12) map.count[i] = 0;  // unobserved patches
    }
    return map;
}

PlanRequest request(const CostMap& map, int si, int sj, int gi, int gj, PlanMode mode) {
    PlanRequest req;
    req.start = map.cell_center(si, sj);
    req.goal = map.cell_center(gi, gj);
    req.mode = mode;
    return req;
}

}  // namespace

TEST_CASE("plan: uniform map gives a straight diagonal of minimal cost") {
    const int n = 5;
    const double c = 0.4;
    const CostMap map = grid_map(n, n, std::vector<double>(n * n, c));
    const PathPlan p = plan(map, request(map, 0, 0, 4, 4, PlanMode::metric_optimal));
    // pure diagonal: 4 steps of cell*sqrt(2)
    CHECK(p.total_length == doctest::Approx(4 * 0.25 * std::numbers::sqrt2).epsilon(1e-12));
    CHECK(p.total_cost == doctest::Approx(p.total_length * c).epsilon(1e-12));
    CHECK(p.waypoints.size() == 5);

    const PathPlan sf = plan(map, request(map, 0, 0, 4, 4, PlanMode::shortest_feasible));
    CHECK(sf.total_cost == doctest::Approx(p.total_length).epsilon(1e-12));
}

TEST_CASE("plan: high-cost center is avoided, matching exhaustive enumeration") {
    std::vector<double> cells(9, 0.1);
    cells[4] = 0.7;  // center
    const CostMap map = grid_map(3, 3, cells);
    const PathPlan p = plan(map, request(map, 0, 1, 2, 1, PlanMode::metric_optimal));
    for (const auto& w : p.waypoints) {
        const int i = static_cast<int>(w.x() / 0.25);
        const int j = static_cast<int>(w.y() / 0.25);
        CHECK(!(i == 1 && j == 1));
    }
    const double oracle =
        oracles::brute_force_min_cost(map, 0, 1, 2, 1, true, 0.8, 8);
    CHECK(p.total_cost == doctest::Approx(oracle).epsilon(1e-9));
}

TEST_CASE("plan: enclosed goal raises NoPath; unobserved endpoint rejected") {
    std::vector<double> cells(25, 0.1);
    const int ring[] = {6, 7, 8, 11, 13, 16, 17, 18};
    for (int i : ring) cells[i] = 0.95;  // above the 0.8 threshold
    const CostMap map = grid_map(5, 5, cells);
    CHECK_THROWS_AS(plan(map, request(map, 0, 0, 2, 2, PlanMode::metric_optimal)), NoPath);

    CostMap holes = map;
    holes.count[0] = 0;
    CHECK_THROWS_AS(plan(holes, request(holes, 0, 0, 4, 4, PlanMode::metric_optimal)),
                    UnobservedEndpoint);

    CHECK_THROWS(plan(map, request(map, 1, 1, 1, 1, PlanMode::metric_optimal)));
}

TEST_CASE("path_metrics: diagonal edge, uniform costs, two-cell aggregate") {
    const CostMap uniform = grid_map(3, 3, std::vector<double>(9, 0.3));
    PathPlan diag;
    diag.waypoints = {uniform.cell_center(0, 0), uniform.cell_center(1, 1)};
    diag.total_length = (diag.waypoints[1] - diag.waypoints[0]).norm();
    const PathMetrics dm = path_metrics(diag, uniform);
    CHECK(dm.length == doctest::Approx(0.25 * std::numbers::sqrt2).epsilon(1e-12));
    CHECK(dm.mean_cell_cost == doctest::Approx(0.3).epsilon(1e-12));
    CHECK(dm.max_cell_cost == doctest::Approx(0.3).epsilon(1e-12));

    CostMap two = grid_map(2, 1, {0.2, 0.6});
    PathPlan walk;
    walk.waypoints = {two.cell_center(0, 0), two.cell_center(1, 0)};
    walk.total_length = 0.25;
    const PathMetrics wm = path_metrics(walk, two);
    CHECK(wm.mean_cell_cost == doctest::Approx(0.4).epsilon(1e-12));
    CHECK(wm.max_cell_cost == doctest::Approx(0.6).epsilon(1e-12));
}

TEST_CASE("plan matches brute-force enumeration on random maps") {
    std::mt19937_64 rng(2024);
    int solved = 0;
    for (int trial = 0; trial < 40; ++trial) {
        const int w = 3 + static_cast<int>(rng() % 4);  // 3..6
        const int h = 3 + static_cast<int>(rng() % 4);
        const CostMap map = random_map(rng, w, h);
        const bool metric = trial % 2 == 0;
        if (!map.observed(0, 0) || !map.observed(w - 1, h - 1)) continue;

        const double oracle = oracles::brute_force_min_cost(map, 0, 0, w - 1, h - 1, metric,
                                                            0.8, 8);
        const PlanRequest req = request(map, 0, 0, w - 1, h - 1,
                                        metric ? PlanMode::metric_optimal
                                               : PlanMode::shortest_feasible);
        if (std::isinf(oracle)) {
            CHECK_THROWS(plan(map, req));
        } else {
            const PathPlan p = plan(map, req);
            CHECK(p.total_cost == doctest::Approx(oracle).epsilon(1e-9));
            ++solved;
        }
    }
    CHECK(solved > 15);
}

TEST_CASE("plan properties: cost monotonicity, symmetry, mode ordering") {
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 15; ++trial) {
        CostMap map = random_map(rng, 6, 6);
        if (!map.observed(0, 0) || !map.observed(5, 5)) continue;
        PlanRequest fwd = request(map, 0, 0, 5, 5, PlanMode::metric_optimal);
        PathPlan base;
        try {
            base = plan(map, fwd);
        } catch (const NoPath&) {
            continue;
        }

        // symmetry
        PlanRequest rev = fwd;
        std::swap(rev.start, rev.goal);
        CHECK(plan(map, rev).total_cost == doctest::Approx(base.total_cost).epsilon(1e-9));

        // raising one passable cell's cost never lowers the optimum
        CostMap raised = map;
        const size_t idx = rng() % raised.sum.size();
        if (raised.count[idx] > 0) {
            raised.sum[idx] = std::min(1.0, raised.sum[idx] + 0.2);
            try {
                const double raised_cost = plan(raised, fwd).total_cost;
                CHECK(raised_cost >= base.total_cost - 1e-9);
            } catch (const NoPath&) {
                // raising a cell may sever the only corridor or an endpoint
            }
        }

        // the shortest-feasible baseline costs at least as much in metric terms
        PlanRequest sf = fwd;
        sf.mode = PlanMode::shortest_feasible;
        const PathPlan baseline = plan(map, sf);
        double metric_cost = 0;
        for (size_t i = 1; i < baseline.waypoints.size(); ++i) {
            const auto a = baseline.waypoints[i - 1];
            const auto b = baseline.waypoints[i];
            const int ai = static_cast<int>(a.x() / 0.25), aj = static_cast<int>(a.y() / 0.25);
            const int bi = static_cast<int>(b.x() / 0.25), bj = static_cast<int>(b.y() / 0.25);
            metric_cost += (b - a).norm() * 0.5 * (map.value(ai, aj) + map.value(bi, bj));
        }
        CHECK(base.total_cost <= metric_cost + 1e-9);
    }
}
