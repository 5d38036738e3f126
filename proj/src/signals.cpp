#include "terra/signals.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

#include "terra/errors.hpp"
#include "terra/fft.hpp"

namespace terra {

namespace {

constexpr double kTimeEps = 1e-9;

std::vector<double> hann_window(int n) {
    std::vector<double> w(n);
    for (int i = 0; i < n; ++i) {
        w[i] = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * i / n));
    }
    return w;
}

// first/last sample index inside [t0, t1]; throws when the window leaves support
std::pair<size_t, size_t> window_indices(const std::vector<double>& t, double t0, double t1) {
    if (t.empty() || t.front() > t0 + kTimeEps || t.back() < t1 - kTimeEps) {
        throw WindowOutOfRange("window [" + std::to_string(t0) + ", " + std::to_string(t1) +
                               "] outside series support");
    }
    const auto lo = std::lower_bound(t.begin(), t.end(), t0 - kTimeEps);
    const auto hi = std::upper_bound(t.begin(), t.end(), t1 + kTimeEps);
    return {static_cast<size_t>(lo - t.begin()), static_cast<size_t>(hi - t.begin() - 1)};
}

size_t nearest_index(const std::vector<double>& t, double q) {
    const auto it = std::lower_bound(t.begin(), t.end(), q);
    if (it == t.begin()) return 0;
    if (it == t.end()) return t.size() - 1;
    const size_t hi = static_cast<size_t>(it - t.begin());
    return (q - t[hi - 1] <= t[hi] - q) ? hi - 1 : hi;
}

}  // namespace

void TimeSeries::validate() const {
    if (timestamps.size() != values.size()) {
        throw std::invalid_argument("TimeSeries: timestamp/value size mismatch");
    }
    if (timestamps.size() < 2) {
        throw std::invalid_argument("TimeSeries: need at least two samples");
    }
    std::vector<double> dt(timestamps.size() - 1);
    for (size_t i = 0; i + 1 < timestamps.size(); ++i) {
        dt[i] = timestamps[i + 1] - timestamps[i];
        if (dt[i] <= 0.0) {
            throw std::invalid_argument("TimeSeries: timestamps not strictly increasing");
        }
    }
    std::nth_element(dt.begin(), dt.begin() + dt.size() / 2, dt.end());
    const double median_rate = 1.0 / dt[dt.size() / 2];
    if (nominal_rate <= 0.0 ||
        std::abs(median_rate - nominal_rate) / nominal_rate >= 0.05) {
        throw std::invalid_argument("TimeSeries: median rate " + std::to_string(median_rate) +
                                    " Hz inconsistent with nominal " +
                                    std::to_string(nominal_rate) + " Hz");
    }
}

const char* metric_name(MetricKind kind) {
    switch (kind) {
        case MetricKind::vibration: return "m_z";
        case MetricKind::bumpiness: return "m_omega";
        case MetricKind::energy: return "m_p";
    }
    return "?";
}

MetricKind metric_from_name(const std::string& name) {
    if (name == "m_z") return MetricKind::vibration;
    if (name == "m_omega") return MetricKind::bumpiness;
    if (name == "m_p") return MetricKind::energy;
    throw std::invalid_argument("unknown metric '" + name + "'");
}

PsdResult welch_psd(std::span<const double> x, double rate, const WelchConfig& cfg) {
    const int n = static_cast<int>(x.size());
    const int seg = cfg.segment_length;
    if (seg < 8) throw TooFewSamples("segment_length must be >= 8");
    if (n < seg) {
        throw TooFewSamples("welch_psd: " + std::to_string(n) + " samples < segment length " +
                            std::to_string(seg));
    }
    if (cfg.overlap_fraction < 0.0 || cfg.overlap_fraction >= 1.0) {
        throw std::invalid_argument("overlap_fraction must be in [0, 1)");
    }

    const int hop = std::max(1, seg - static_cast<int>(std::floor(seg * cfg.overlap_fraction)));
    const std::vector<double> w = hann_window(seg);
    double w_sq = 0.0;
    for (double v : w) w_sq += v * v;

    const int n_bins = seg / 2 + 1;
    std::vector<double> acc(n_bins, 0.0);
    std::vector<double> seg_buf(seg);
    std::vector<std::complex<double>> spec(n_bins);

    int n_segments = 0;
    for (int start = 0; start + seg <= n; start += hop) {
        for (int i = 0; i < seg; ++i) seg_buf[i] = w[i] * x[start + i];
        detail::real_fft(seg_buf, spec.data());
        for (int k = 0; k < n_bins; ++k) acc[k] += std::norm(spec[k]);
        ++n_segments;
    }

    PsdResult out;
    out.bin_width = rate / seg;
    out.frequencies.resize(n_bins);
    out.psd.resize(n_bins);
    const double norm = 1.0 / (rate * w_sq * n_segments);
    for (int k = 0; k < n_bins; ++k) {
        out.frequencies[k] = k * out.bin_width;
        const bool one_sided_double = k != 0 && !(seg % 2 == 0 && k == seg / 2);
        out.psd[k] = acc[k] * norm * (one_sided_double ? 2.0 : 1.0);
    }
    return out;
}

double bandpower(double t, const TimeSeries& series, const WindowSpec& spec,
                 const WelchConfig& cfg) {
    const double alpha = spec.alpha();
    const auto [i0, i1] = window_indices(series.timestamps, t - alpha, t + alpha);
    const size_t n = i1 - i0 + 1;

    WelchConfig clamped = cfg;
    clamped.segment_length = std::min<int>(cfg.segment_length, static_cast<int>(n));
    const PsdResult res = welch_psd(
        std::span<const double>(series.values.data() + i0, n), series.nominal_rate, clamped);

    double b = 0.0;
    for (size_t k = 0; k < res.psd.size(); ++k) {
        if (res.frequencies[k] >= cfg.f_min - kTimeEps && res.frequencies[k] <= cfg.f_max + kTimeEps) {
            b += res.psd[k] * res.bin_width;
        }
    }
    return b;
}

MetricSeries vibration_metric(const TimeSeries& a_z, const WindowSpec& spec,
                              const WelchConfig& cfg, std::span<const double> query_times,
                              double smooth_sigma) {
    MetricSeries m;
    m.kind = MetricKind::vibration;
    m.timestamps.assign(query_times.begin(), query_times.end());
    m.values.reserve(query_times.size());
    for (double t : query_times) {
        m.values.push_back(std::log1p(bandpower(t, a_z, spec, cfg)));
    }
    return smooth_sigma > 0.0 ? smooth_metric(m, smooth_sigma) : m;
}

MetricSeries bumpiness_metric(const TimeSeries& w_x, const TimeSeries& w_y,
                              std::span<const double> query_times, double smooth_sigma) {
    if (w_x.timestamps != w_y.timestamps) {
        throw std::invalid_argument("bumpiness_metric: w_x/w_y timestamps differ");
    }
    MetricSeries m;
    m.kind = MetricKind::bumpiness;
    m.timestamps.assign(query_times.begin(), query_times.end());
    m.values.reserve(query_times.size());
    for (double t : query_times) {
        if (t < w_x.timestamps.front() - kTimeEps || t > w_x.timestamps.back() + kTimeEps) {
            throw OutOfSupport("bumpiness query " + std::to_string(t) + " outside series");
        }
        const size_t i = nearest_index(w_x.timestamps, t);
        m.values.push_back(std::hypot(w_x.values[i], w_y.values[i]));
    }
    return smooth_sigma > 0.0 ? smooth_metric(m, smooth_sigma) : m;
}

MetricSeries energy_metric(const TimeSeries& current, const TimeSeries& voltage,
                           const WindowSpec& spec, std::span<const double> query_times,
                           double smooth_sigma) {
    constexpr double kPairTolerance = 0.06;  // seconds

    // instantaneous power at the current stream's timestamps
    std::vector<double> pt, pw;
    pt.reserve(current.size());
    pw.reserve(current.size());
    for (size_t i = 0; i < current.size(); ++i) {
        const size_t j = nearest_index(voltage.timestamps, current.timestamps[i]);
        if (std::abs(voltage.timestamps[j] - current.timestamps[i]) > kPairTolerance) continue;
        pt.push_back(current.timestamps[i]);
        pw.push_back(current.values[i] * voltage.values[j]);
    }
    if (pt.size() < 2) throw WindowOutOfRange("energy_metric: no aligned current/voltage samples");

    std::vector<double> dt(pt.size());
    for (size_t i = 0; i + 1 < pt.size(); ++i) dt[i] = pt[i + 1] - pt[i];
    dt.back() = dt[pt.size() - 2];

    const double alpha = spec.alpha();
    MetricSeries m;
    m.kind = MetricKind::energy;
    m.timestamps.assign(query_times.begin(), query_times.end());
    m.values.reserve(query_times.size());
    for (double t : query_times) {
        const auto [i0, i1] = window_indices(pt, t - alpha, t + alpha);
        double e = 0.0;
        for (size_t i = i0; i <= i1; ++i) e += pw[i] * dt[i];
        m.values.push_back(e);
    }
    return smooth_sigma > 0.0 ? smooth_metric(m, smooth_sigma) : m;
}

MetricSeries smooth_metric(const MetricSeries& m, double sigma) {
    if (sigma <= 0.0) throw std::invalid_argument("smooth_metric: sigma must be > 0");
    MetricSeries out;
    out.kind = m.kind;
    out.timestamps = m.timestamps;
    out.values.resize(m.values.size());

    const double radius = 3.0 * sigma;
    const double inv_two_sq = 1.0 / (2.0 * sigma * sigma);
    const auto& t = m.timestamps;
    for (size_t i = 0; i < t.size(); ++i) {
        const auto lo = std::lower_bound(t.begin(), t.end(), t[i] - radius - kTimeEps);
        const auto hi = std::upper_bound(t.begin(), t.end(), t[i] + radius + kTimeEps);
        double num = 0.0, den = 0.0;
        for (auto it = lo; it != hi; ++it) {
            const size_t j = static_cast<size_t>(it - t.begin());
            const double d = t[j] - t[i];
            const double g = std::exp(-d * d * inv_two_sq);
            num += g * m.values[j];
            den += g;
        }
        out.values[i] = num / den;
    }
    return out;
}

double label_at_pose(const MetricSeries& metric, double t) {
    const auto& ts = metric.timestamps;
    if (ts.empty() || t < ts.front() - kTimeEps || t > ts.back() + kTimeEps) {
        throw OutOfSupport("label_at_pose: t=" + std::to_string(t) + " outside metric support");
    }
    const auto it = std::lower_bound(ts.begin(), ts.end(), t);
    if (it == ts.begin()) return metric.values.front();
    if (it == ts.end()) return metric.values.back();
    const size_t hi = static_cast<size_t>(it - ts.begin());
    const size_t lo = hi - 1;
    const double u = (t - ts[lo]) / (ts[hi] - ts[lo]);
    return (1.0 - u) * metric.values[lo] + u * metric.values[hi];
}

}  // namespace terra
