// Test-only oracles, deliberately independent of the library implementation
// paths they check: naive DFT instead of FFTW/Welch, nearest-neighbor
// supersampling instead of bilinear warping, exhaustive path enumeration
// instead of Dijkstra.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <vector>

#include "terra/image.hpp"
#include "terra/mapping.hpp"
#include "terra/planner.hpp"

namespace oracles {

// one-sided PSD by direct O(n^2) DFT, rectangular window, full length;
// normalized so sum(psd) * rate/n equals the mean square of x
inline std::vector<double> naive_psd(const std::vector<double>& x, double rate,
                                     std::vector<double>* frequencies = nullptr) {
    const int n = static_cast<int>(x.size());
    const int bins = n / 2 + 1;
    std::vector<double> psd(bins);
    if (frequencies) frequencies->resize(bins);
    for (int k = 0; k < bins; ++k) {
        double re = 0, im = 0;
        for (int i = 0; i < n; ++i) {
            const double phase = 2.0 * std::numbers::pi * k * i / n;
            re += x[i] * std::cos(phase);
            im -= x[i] * std::sin(phase);
        }
        const bool doubled = k != 0 && !(n % 2 == 0 && k == n / 2);
        psd[k] = (doubled ? 2.0 : 1.0) * (re * re + im * im) / (rate * n);
        if (frequencies) (*frequencies)[k] = k * rate / n;
    }
    return psd;
}

inline double naive_bandpower(const std::vector<double>& x, double rate, double f_min,
                              double f_max) {
    std::vector<double> freqs;
    const std::vector<double> psd = naive_psd(x, rate, &freqs);
    const double df = rate / static_cast<double>(x.size());
    double b = 0;
    for (size_t k = 0; k < psd.size(); ++k) {
        if (freqs[k] >= f_min - 1e-12 && freqs[k] <= f_max + 1e-12) b += psd[k] * df;
    }
    return b;
}

// rotate a raster by angle about its center with nearest-neighbor lookup at
// ss x ss supersampling per output pixel
inline terra::ImageF nn_rotate(const terra::ImageF& src, double angle, int ss = 8) {
    terra::ImageF out(src.width, src.height, src.channels, 0.0f);
    const double cx = (src.width - 1) / 2.0;
    const double cy = (src.height - 1) / 2.0;
    const double c = std::cos(-angle), s = std::sin(-angle);
    for (int y = 0; y < out.height; ++y) {
        for (int x = 0; x < out.width; ++x) {
            for (int ch = 0; ch < src.channels; ++ch) {
                double acc = 0;
                int count = 0;
                for (int sy = 0; sy < ss; ++sy) {
                    for (int sx = 0; sx < ss; ++sx) {
                        const double px = x + (sx + 0.5) / ss - 0.5;
                        const double py = y + (sy + 0.5) / ss - 0.5;
                        const double rx = c * (px - cx) - s * (py - cy) + cx;
                        const double ry = s * (px - cx) + c * (py - cy) + cy;
                        const int nx = static_cast<int>(std::lround(rx));
                        const int ny = static_cast<int>(std::lround(ry));
                        if (nx < 0 || ny < 0 || nx >= src.width || ny >= src.height) continue;
                        acc += src.at(nx, ny, ch);
                        ++count;
                    }
                }
                out.at(x, y, ch) = count > 0 ? static_cast<float>(acc / count) : 0.0f;
            }
        }
    }
    return out;
}

// minimum path cost over all simple paths (DFS with cost pruning; pruning is
// sound because edge weights are non-negative)
inline double brute_force_min_cost(const terra::CostMap& map, int si, int sj, int gi, int gj,
                                   bool metric, double threshold, int connectivity) {
    const auto passable = [&](int i, int j) {
        return map.in_bounds(i, j) && map.observed(i, j) && map.value(i, j) <= threshold;
    };
    if (!passable(si, sj) || !passable(gi, gj)) {
        return std::numeric_limits<double>::infinity();
    }
    const int di8[8] = {1, -1, 0, 0, 1, 1, -1, -1};
    const int dj8[8] = {0, 0, 1, -1, 1, -1, 1, -1};
    std::vector<char> visited(static_cast<size_t>(map.width) * map.height, 0);
    double best = std::numeric_limits<double>::infinity();

    const std::function<void(int, int, double)> dfs = [&](int i, int j, double cost) {
        if (cost >= best) return;
        if (i == gi && j == gj) {
            best = cost;
            return;
        }
        visited[map.index(i, j)] = 1;
        for (int k = 0; k < connectivity; ++k) {
            const int ni = i + di8[k];
            const int nj = j + dj8[k];
            if (!passable(ni, nj) || visited[map.index(ni, nj)]) continue;
            const double step = map.cell_size * (k < 4 ? 1.0 : std::numbers::sqrt2);
            const double w =
                step * (metric ? 0.5 * (map.value(i, j) + map.value(ni, nj)) : 1.0);
            dfs(ni, nj, cost + w);
        }
        visited[map.index(i, j)] = 0;
    };
    dfs(si, sj, 0.0);
    return best;
}

}  // namespace oracles
