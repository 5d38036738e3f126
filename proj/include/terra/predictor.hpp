#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "terra/dataset.hpp"
#include "terra/image.hpp"

namespace terra {

/// Deterministic texture features standing in for a learned backbone.
/// Layout (41 values, schema "tex41/v1"):
///   [0..8]   per-channel mean, std, cuberoot(mean |x-mu|^3)  (gray replicated)
///   [9..24]  16-bin intensity histogram, sum 1
///   [25..26] gradient magnitude mean, std
///   [27..34] 8-bin gradient orientation histogram (mod pi, magnitude weighted)
///   [35..38] Laplacian pyramid band RMS energies, levels 0..3
///   [39..40] mean of per-row variances, mean of per-column variances
inline constexpr int kFeatureDim = 41;
inline constexpr const char* kFeatureSchema = "tex41/v1";

struct FeatureVector {
    std::string schema_id = kFeatureSchema;
    Eigen::VectorXd values;
};

/// Throws BadPatchShape unless the patch is square, >= 16 px and 1- or
/// 3-channel.
FeatureVector extract_features(const ImageF& patch);

struct FeatureStats {
    Eigen::VectorXd mean;
    Eigen::VectorXd std;
};

struct DenseLayer {
    Eigen::MatrixXd W;  // (out, in)
    Eigen::VectorXd b;
};

/// Standardize -> affine+relu hidden layers -> affine -> sigmoid.
struct RegressorModel {
    std::string schema_id = kFeatureSchema;
    MetricKind metric_kind = MetricKind::vibration;
    FeatureStats feature_stats;
    std::vector<DenseLayer> layers;  // F -> hidden... -> 1
    LabelStats label_stats;          // normalization used during training

    int input_dim() const { return layers.empty() ? 0 : static_cast<int>(layers.front().W.cols()); }
};

/// Prediction strictly inside (0, 1). Throws SchemaMismatch.
double forward(const RegressorModel& model, const FeatureVector& features);

struct TrainConfig {
    int batch_size = 32;
    double learning_rate = 1e-3;
    int epochs = 200;
    std::uint64_t seed = 0;
    double l2 = 0.0;
    std::vector<int> hidden{64, 32};
    std::string optimizer = "adam";  // "adam" | "sgd"

    // batch 256 / lr 5e-5 profile used by the reference training setup
    static TrainConfig paper_defaults() {
        TrainConfig cfg;
        cfg.batch_size = 256;
        cfg.learning_rate = 5e-5;
        return cfg;
    }
};

using ViewFilter = std::function<bool(const PatchView&)>;

/// Views of `source`; UGV views restricted to the comparison subset.
ViewFilter default_view_filter(const std::string& source);

struct TrainResult {
    std::vector<RegressorModel> models;            // parallel to protocol.eval_folds
    std::vector<std::vector<double>> loss_curves;  // per fold, per epoch
};

/// Mini-batch training with per-epoch seeded shuffling and random view
/// sampling; one model per evaluated fold, trained on the records outside
/// that fold. Labels are min-max normalized with training-split stats.
TrainResult train(const std::vector<PatchRecord>& records, const std::string& source,
                  int metric_index, const FoldAssignment& folds, const CvProtocol& protocol,
                  const TrainConfig& cfg, const ViewFilter& filter = nullptr);

struct EvalReport {
    std::string source;
    int metric_index = 0;
    std::vector<double> per_fold_rmse;
    double mean_rmse = 0;
    std::map<std::string, std::pair<double, int>> per_terrain;  // tag -> (rmse, n)
};

/// Held-out RMSE on normalized labels; each record is scored only by the
/// model of the fold holding it out, on its first eligible view by frame_id.
EvalReport evaluate(const std::vector<RegressorModel>& models,
                    const std::vector<PatchRecord>& records, const std::string& source,
                    int metric_index, const FoldAssignment& folds, const CvProtocol& protocol,
                    const ViewFilter& filter = nullptr);

/// Central finite differences of the MSE loss (fixed target 0.25) against the
/// analytic gradient; returns the max relative error over all parameters.
double finite_difference_check(const RegressorModel& model, const FeatureVector& features,
                               double epsilon = 1e-5);

/// Seeded uniform +-sqrt(6/(fan_in+fan_out)) weight init, zero biases.
RegressorModel init_model(int input_dim, const std::vector<int>& hidden, std::uint64_t seed,
                          MetricKind metric_kind = MetricKind::vibration);

void save_model(const RegressorModel& model, const std::string& path);
RegressorModel load_model(const std::string& path);

}  // namespace terra
