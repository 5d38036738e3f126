#pragma once

#include <span>
#include <string>
#include <vector>

namespace terra {

/// Uniformly sampled scalar signal. Timestamps must be strictly increasing
/// and the median rate must stay within 5% of nominal_rate.
struct TimeSeries {
    std::vector<double> timestamps;  // seconds
    std::vector<double> values;
    double nominal_rate = 0;  // Hz

    void validate() const;  // throws std::invalid_argument on violation
    size_t size() const { return timestamps.size(); }
};

/// Evaluation window W = [t - alpha, t + alpha]: the time the robot needs to
/// traverse its own length.
struct WindowSpec {
    double robot_length = 1.5;  // meters
    double speed = 1.5;         // m/s

    double alpha() const { return robot_length / (2.0 * speed); }
};

struct WelchConfig {
    int segment_length = 128;       // samples
    double overlap_fraction = 0.5;  // in [0, 1)
    std::string window_function = "hann";
    double f_min = 1.0;   // Hz
    double f_max = 30.0;  // Hz
};

enum class MetricKind { vibration, bumpiness, energy };

const char* metric_name(MetricKind kind);
MetricKind metric_from_name(const std::string& name);

struct MetricSeries {
    std::vector<double> timestamps;
    std::vector<double> values;
    MetricKind kind = MetricKind::vibration;
};

struct PsdResult {
    std::vector<double> frequencies;  // Hz, bins 0..L/2
    std::vector<double> psd;          // power per Hz, one-sided
    double bin_width = 0;             // Hz
};

/// One-sided Welch PSD: mean of Hann-windowed, overlapped periodograms,
/// normalized so the rectangle-rule integral over [0, rate/2] equals the
/// mean square of x (within windowing bias). Throws TooFewSamples when
/// x.size() < cfg.segment_length.
PsdResult welch_psd(std::span<const double> x, double rate, const WelchConfig& cfg);

/// Rectangle-rule integral of welch_psd over [f_min, f_max], computed on the
/// samples inside [t - alpha, t + alpha]. The segment length is clamped to
/// the window length so short windows stay valid.
double bandpower(double t, const TimeSeries& series, const WindowSpec& spec,
                 const WelchConfig& cfg);

constexpr double kDefaultSmoothingSigma = 0.5;  // seconds

/// M_z(t) = ln(1 + B(t)), Gaussian-smoothed. smooth_sigma <= 0 skips smoothing.
MetricSeries vibration_metric(const TimeSeries& a_z, const WindowSpec& spec,
                              const WelchConfig& cfg, std::span<const double> query_times,
                              double smooth_sigma = kDefaultSmoothingSigma);

/// M_omega(t) = ||(w_x, w_y)|| at the nearest sample, Gaussian-smoothed.
/// w_x and w_y must share timestamps.
MetricSeries bumpiness_metric(const TimeSeries& w_x, const TimeSeries& w_y,
                              std::span<const double> query_times,
                              double smooth_sigma = kDefaultSmoothingSigma);

/// M_p(t) = sum over [t - alpha, t + alpha] of I*V*dt, joules. Current and
/// voltage samples are paired by nearest timestamp within 60 ms; unmatched
/// samples are dropped.
MetricSeries energy_metric(const TimeSeries& current, const TimeSeries& voltage,
                           const WindowSpec& spec, std::span<const double> query_times,
                           double smooth_sigma = kDefaultSmoothingSigma);

/// Convolution with a discretized Gaussian truncated at 3 sigma, kernel
/// renormalized over the valid support at the edges. Timestamps unchanged.
MetricSeries smooth_metric(const MetricSeries& m, double sigma);

/// Linear interpolation of the metric at time t. Throws OutOfSupport.
double label_at_pose(const MetricSeries& metric, double t);

}  // namespace terra
