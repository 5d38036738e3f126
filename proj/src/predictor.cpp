#include "terra/predictor.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <future>
#include <numbers>
#include <numeric>
#include <random>

#include <nlohmann/json.hpp>

#include "terra/errors.hpp"

namespace terra {

namespace {

using json = nlohmann::ordered_json;

ImageF to_gray(const ImageF& im) {
    if (im.channels == 1) return im;
    ImageF g(im.width, im.height, 1);
    for (int y = 0; y < im.height; ++y) {
        for (int x = 0; x < im.width; ++x) {
            double acc = 0;
            for (int c = 0; c < im.channels; ++c) acc += im.at(x, y, c);
            g.at(x, y) = static_cast<float>(acc / im.channels);
        }
    }
    return g;
}

ImageF box_downsample(const ImageF& im) {
    ImageF out(im.width / 2, im.height / 2, 1);
    for (int y = 0; y < out.height; ++y) {
        for (int x = 0; x < out.width; ++x) {
            out.at(x, y) = 0.25f * (im.at(2 * x, 2 * y) + im.at(2 * x + 1, 2 * y) +
                                    im.at(2 * x, 2 * y + 1) + im.at(2 * x + 1, 2 * y + 1));
        }
    }
    return out;
}

ImageF bilinear_upsample(const ImageF& im, int w, int h) {
    ImageF out(w, h, 1);
    for (int y = 0; y < h; ++y) {
        const double sy = std::clamp((y - 0.5) / 2.0, 0.0, im.height - 1.0);
        for (int x = 0; x < w; ++x) {
            const double sx = std::clamp((x - 0.5) / 2.0, 0.0, im.width - 1.0);
            out.at(x, y) = static_cast<float>(bilinear(im, sx, sy));
        }
    }
    return out;
}

double sigmoid_clamped(double z) {
    const double p = 1.0 / (1.0 + std::exp(-std::clamp(z, -500.0, 500.0)));
    return std::clamp(p, 1e-15, 1.0 - 1e-15);
}

// Batched forward pass keeping pre-activations for backprop. Columns are
// samples.
struct ForwardTrace {
    std::vector<Eigen::MatrixXd> activations;  // [0] = standardized input
    Eigen::RowVectorXd predictions;
};

Eigen::MatrixXd standardize(const RegressorModel& m, const Eigen::MatrixXd& x) {
    Eigen::ArrayXd inv_std = m.feature_stats.std.array().max(1e-8).inverse();
    return (x.array().colwise() - m.feature_stats.mean.array()).colwise() * inv_std;
}

ForwardTrace forward_batch(const RegressorModel& m, const Eigen::MatrixXd& x) {
    ForwardTrace tr;
    tr.activations.reserve(m.layers.size() + 1);
    tr.activations.push_back(standardize(m, x));
    for (size_t l = 0; l + 1 < m.layers.size(); ++l) {
        Eigen::MatrixXd z =
            (m.layers[l].W * tr.activations.back()).colwise() + m.layers[l].b;
        tr.activations.push_back(z.array().max(0.0).matrix());
    }
    const auto& out = m.layers.back();
    Eigen::RowVectorXd z = (out.W * tr.activations.back()).row(0);
    z.array() += out.b(0);
    tr.predictions = z.unaryExpr([](double v) { return sigmoid_clamped(v); });
    return tr;
}

struct Gradients {
    std::vector<Eigen::MatrixXd> dW;
    std::vector<Eigen::VectorXd> db;
};

Gradients zero_like(const RegressorModel& m) {
    Gradients g;
    for (const auto& layer : m.layers) {
        g.dW.push_back(Eigen::MatrixXd::Zero(layer.W.rows(), layer.W.cols()));
        g.db.push_back(Eigen::VectorXd::Zero(layer.b.size()));
    }
    return g;
}

// MSE loss gradient via backprop; returns the batch loss.
double backward_batch(const RegressorModel& m, const ForwardTrace& tr,
                      const Eigen::RowVectorXd& targets, double l2, Gradients& g) {
    const double n = static_cast<double>(targets.size());
    const Eigen::RowVectorXd err = tr.predictions - targets;
    double loss = err.squaredNorm() / n;

    // sigmoid output layer
    Eigen::RowVectorXd dz =
        (2.0 / n) * err.cwiseProduct(tr.predictions.cwiseProduct(
                        (1.0 - tr.predictions.array()).matrix()));

    Eigen::MatrixXd delta = dz;  // (1, n)
    for (int l = static_cast<int>(m.layers.size()) - 1; l >= 0; --l) {
        g.dW[l] = delta * tr.activations[l].transpose();
        g.db[l] = delta.rowwise().sum();
        if (l2 > 0.0) {
            g.dW[l] += 2.0 * l2 * m.layers[l].W;
            loss += l2 * m.layers[l].W.squaredNorm();
        }
        if (l > 0) {
            delta = (m.layers[l].W.transpose() * delta).cwiseProduct(
                (tr.activations[l].array() > 0.0).cast<double>().matrix());
        }
    }
    return loss;
}

struct AdamState {
    std::vector<Eigen::MatrixXd> mW, vW;
    std::vector<Eigen::VectorXd> mb, vb;
    long step = 0;

    explicit AdamState(const RegressorModel& m) {
        for (const auto& layer : m.layers) {
            mW.push_back(Eigen::MatrixXd::Zero(layer.W.rows(), layer.W.cols()));
            vW.push_back(Eigen::MatrixXd::Zero(layer.W.rows(), layer.W.cols()));
            mb.push_back(Eigen::VectorXd::Zero(layer.b.size()));
            vb.push_back(Eigen::VectorXd::Zero(layer.b.size()));
        }
    }
};

constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

void apply_update(RegressorModel& m, const Gradients& g, AdamState& adam,
                  const TrainConfig& cfg) {
    if (cfg.optimizer == "sgd") {
        for (size_t l = 0; l < m.layers.size(); ++l) {
            m.layers[l].W -= cfg.learning_rate * g.dW[l];
            m.layers[l].b -= cfg.learning_rate * g.db[l];
        }
        return;
    }
    ++adam.step;
    const double bc1 = 1.0 - std::pow(kAdamBeta1, adam.step);
    const double bc2 = 1.0 - std::pow(kAdamBeta2, adam.step);
    for (size_t l = 0; l < m.layers.size(); ++l) {
        adam.mW[l] = kAdamBeta1 * adam.mW[l] + (1.0 - kAdamBeta1) * g.dW[l];
        adam.vW[l] = kAdamBeta2 * adam.vW[l] + (1.0 - kAdamBeta2) * g.dW[l].cwiseProduct(g.dW[l]);
        adam.mb[l] = kAdamBeta1 * adam.mb[l] + (1.0 - kAdamBeta1) * g.db[l];
        adam.vb[l] = kAdamBeta2 * adam.vb[l] + (1.0 - kAdamBeta2) * g.db[l].cwiseProduct(g.db[l]);
        m.layers[l].W -= (cfg.learning_rate * (adam.mW[l] / bc1).array() /
                          ((adam.vW[l] / bc2).array().sqrt() + kAdamEps))
                             .matrix();
        m.layers[l].b -= (cfg.learning_rate * (adam.mb[l] / bc1).array() /
                          ((adam.vb[l] / bc2).array().sqrt() + kAdamEps))
                             .matrix();
    }
}

std::uint64_t fold_seed(std::uint64_t base, int fold) {
    // splitmix64 step keeps per-fold streams decorrelated
    std::uint64_t z = base + 0x9e3779b97f4a7c15ull * (static_cast<std::uint64_t>(fold) + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

// eligible view indices per record, sorted by frame_id for determinism
std::vector<std::vector<int>> eligible_views(const std::vector<PatchRecord>& records,
                                             const ViewFilter& filter) {
    std::vector<std::vector<int>> out(records.size());
    for (size_t r = 0; r < records.size(); ++r) {
        std::vector<int> idx;
        for (int v = 0; v < static_cast<int>(records[r].views.size()); ++v) {
            if (filter(records[r].views[v])) idx.push_back(v);
        }
        std::sort(idx.begin(), idx.end(), [&](int a, int b) {
            return records[r].views[a].frame_id < records[r].views[b].frame_id;
        });
        out[r] = std::move(idx);
    }
    return out;
}

}  // namespace

FeatureVector extract_features(const ImageF& patch) {
    if (patch.empty() || patch.width != patch.height || patch.width < 16 ||
        (patch.channels != 1 && patch.channels != 3)) {
        throw BadPatchShape("extract_features: need square >=16 px, 1 or 3 channels");
    }
    const int n = patch.width;
    const ImageF gray = to_gray(patch);

    FeatureVector f;
    f.values = Eigen::VectorXd::Zero(kFeatureDim);
    int k = 0;

    // per-channel mean / std / skew proxy, grayscale replicated to 3 channels
    for (int c = 0; c < 3; ++c) {
        const int ch = patch.channels == 3 ? c : 0;
        double mean = 0;
        for (int y = 0; y < n; ++y)
            for (int x = 0; x < n; ++x) mean += patch.at(x, y, ch);
        mean /= n * n;
        double var = 0, cube = 0;
        for (int y = 0; y < n; ++y) {
            for (int x = 0; x < n; ++x) {
                const double d = patch.at(x, y, ch) - mean;
                var += d * d;
                cube += std::abs(d * d * d);
            }
        }
        var /= n * n;
        cube /= n * n;
        f.values[k++] = mean;
        f.values[k++] = std::sqrt(var);
        f.values[k++] = std::cbrt(cube);
    }

    // 16-bin intensity histogram
    {
        std::array<double, 16> hist{};
        for (int y = 0; y < n; ++y) {
            for (int x = 0; x < n; ++x) {
                const int bin = std::clamp(static_cast<int>(gray.at(x, y) * 16.0), 0, 15);
                hist[bin] += 1.0;
            }
        }
        for (double h : hist) f.values[k++] = h / (n * n);
    }

    // gradient magnitude stats + orientation histogram (mod pi)
    {
        double sum = 0, sum_sq = 0;
        std::array<double, 8> orient{};
        double total_mag = 0;
        int count = 0;
        for (int y = 1; y < n - 1; ++y) {
            for (int x = 1; x < n - 1; ++x) {
                const double gx = 0.5 * (gray.at(x + 1, y) - gray.at(x - 1, y));
                const double gy = 0.5 * (gray.at(x, y + 1) - gray.at(x, y - 1));
                const double mag = std::hypot(gx, gy);
                sum += mag;
                sum_sq += mag * mag;
                ++count;
                if (mag > 1e-12) {
                    double theta = std::atan2(gy, gx);
                    if (theta < 0) theta += std::numbers::pi;
                    if (theta >= std::numbers::pi) theta -= std::numbers::pi;
                    const int bin =
                        std::clamp(static_cast<int>(theta / std::numbers::pi * 8.0), 0, 7);
                    orient[bin] += mag;
                    total_mag += mag;
                }
            }
        }
        const double mean = sum / count;
        f.values[k++] = mean;
        f.values[k++] = std::sqrt(std::max(0.0, sum_sq / count - mean * mean));
        for (double o : orient) f.values[k++] = total_mag > 0 ? o / total_mag : 0.0;
    }

    // Laplacian pyramid band energies
    {
        ImageF level = gray;
        for (int l = 0; l < 4; ++l) {
            const ImageF next = box_downsample(level);
            const ImageF up = bilinear_upsample(next, level.width, level.height);
            double acc = 0;
            for (size_t i = 0; i < level.data.size(); ++i) {
                const double d = level.data[i] - up.data[i];
                acc += d * d;
            }
            f.values[k++] = std::sqrt(acc / level.data.size());
            level = next;
        }
    }

    // mean of per-row / per-column variances
    {
        double row_acc = 0, col_acc = 0;
        for (int y = 0; y < n; ++y) {
            double mean = 0, sq = 0;
            for (int x = 0; x < n; ++x) {
                mean += gray.at(x, y);
                sq += static_cast<double>(gray.at(x, y)) * gray.at(x, y);
            }
            mean /= n;
            row_acc += std::max(0.0, sq / n - mean * mean);
        }
        for (int x = 0; x < n; ++x) {
            double mean = 0, sq = 0;
            for (int y = 0; y < n; ++y) {
                mean += gray.at(x, y);
                sq += static_cast<double>(gray.at(x, y)) * gray.at(x, y);
            }
            mean /= n;
            col_acc += std::max(0.0, sq / n - mean * mean);
        }
        f.values[k++] = row_acc / n;
        f.values[k++] = col_acc / n;
    }

    return f;
}

double forward(const RegressorModel& model, const FeatureVector& features) {
    if (features.schema_id != model.schema_id ||
        features.values.size() != model.input_dim()) {
        throw SchemaMismatch("forward: feature schema '" + features.schema_id +
                             "' does not match model '" + model.schema_id + "'");
    }
    return forward_batch(model, features.values).predictions(0);
}

ViewFilter default_view_filter(const std::string& source) {
    return [source](const PatchView& v) {
        if (v.source != source) return false;
        return source != "ugv" || v.in_comparison;
    };
}

RegressorModel init_model(int input_dim, const std::vector<int>& hidden, std::uint64_t seed,
                          MetricKind metric_kind) {
    RegressorModel m;
    m.metric_kind = metric_kind;
    m.feature_stats.mean = Eigen::VectorXd::Zero(input_dim);
    m.feature_stats.std = Eigen::VectorXd::Ones(input_dim);

    std::mt19937_64 rng(seed);
    int fan_in = input_dim;
    std::vector<int> dims = hidden;
    dims.push_back(1);
    for (int out_dim : dims) {
        const double bound = std::sqrt(6.0 / (fan_in + out_dim));
        std::uniform_real_distribution<double> dist(-bound, bound);
        DenseLayer layer;
        layer.W = Eigen::MatrixXd(out_dim, fan_in);
        for (int r = 0; r < out_dim; ++r)
            for (int c = 0; c < fan_in; ++c) layer.W(r, c) = dist(rng);
        layer.b = Eigen::VectorXd::Zero(out_dim);
        m.layers.push_back(std::move(layer));
        fan_in = out_dim;
    }
    return m;
}

namespace {

struct FoldTask {
    RegressorModel model;
    std::vector<double> curve;
};

FoldTask train_one_fold(const std::vector<PatchRecord>& records,
                        const std::vector<std::vector<int>>& views,
                        const std::vector<Eigen::VectorXd>* feature_cache,
                        const std::vector<std::vector<int>>& cache_index,
                        int metric_index, const FoldAssignment& folds, int eval_fold,
                        const TrainConfig& cfg, MetricKind kind) {
    std::vector<int> train_records;
    for (int r = 0; r < static_cast<int>(records.size()); ++r) {
        if (folds.fold(records[r].poi_id) != eval_fold && !views[r].empty()) {
            train_records.push_back(r);
        }
    }
    if (train_records.empty()) throw TooFewRecords("fold has no training records");

    // label stats from the training split only
    LabelStats stats;
    stats.min[metric_index] = std::numeric_limits<double>::infinity();
    stats.max[metric_index] = -std::numeric_limits<double>::infinity();
    for (int r : train_records) {
        stats.min[metric_index] = std::min(stats.min[metric_index], records[r].labels[metric_index]);
        stats.max[metric_index] = std::max(stats.max[metric_index], records[r].labels[metric_index]);
    }
    if (stats.max[metric_index] <= stats.min[metric_index]) {
        throw DegenerateRange("training labels are constant");
    }

    // feature standardization stats over every eligible training view
    const int dim = static_cast<int>((*feature_cache)[0].size());
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(dim);
    Eigen::VectorXd sq = Eigen::VectorXd::Zero(dim);
    long n_views = 0;
    for (int r : train_records) {
        for (size_t vi = 0; vi < views[r].size(); ++vi) {
            const Eigen::VectorXd& f = (*feature_cache)[cache_index[r][vi]];
            mean += f;
            sq += f.cwiseProduct(f);
            ++n_views;
        }
    }
    mean /= static_cast<double>(n_views);

    std::uint64_t seed = fold_seed(cfg.seed, eval_fold);
    FoldTask task;
    task.model = init_model(dim, cfg.hidden, seed, kind);
    task.model.feature_stats.mean = mean;
    task.model.feature_stats.std =
        ((sq / static_cast<double>(n_views)) - mean.cwiseProduct(mean))
            .cwiseMax(0.0)
            .cwiseSqrt();
    task.model.label_stats = stats;

    AdamState adam(task.model);
    std::mt19937_64 rng(seed ^ 0x5bf0ff3e7c0e2a1bull);
    std::vector<int> order = train_records;
    const int batch = std::max(1, cfg.batch_size);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        // shuffled batches, one random view per record per epoch
        std::shuffle(order.begin(), order.end(), rng);
        std::vector<std::pair<int, int>> batch_pairs(order.size());
        for (size_t i = 0; i < order.size(); ++i) {
            const auto& vs = views[order[i]];
            std::uniform_int_distribution<size_t> pick(0, vs.size() - 1);
            batch_pairs[i] = {order[i], cache_index[order[i]][pick(rng)]};
        }

        double epoch_loss = 0;
        int n_batches = 0;
        for (size_t start = 0; start < batch_pairs.size(); start += batch) {
            const int bs = static_cast<int>(std::min<size_t>(batch, batch_pairs.size() - start));
            Eigen::MatrixXd x(dim, bs);
            Eigen::RowVectorXd y(bs);
            for (int i = 0; i < bs; ++i) {
                const auto& [rec, cache_id] = batch_pairs[start + i];
                x.col(i) = (*feature_cache)[cache_id];
                y(i) = stats.normalize(metric_index, records[rec].labels[metric_index]);
            }
            ForwardTrace tr = forward_batch(task.model, x);
            Gradients g = zero_like(task.model);
            const double loss = backward_batch(task.model, tr, y, cfg.l2, g);
            if (!std::isfinite(loss)) {
                throw NonFiniteLoss("fold " + std::to_string(eval_fold) + " epoch " +
                                    std::to_string(epoch) + ": loss " + std::to_string(loss));
            }
            apply_update(task.model, g, adam, cfg);
            epoch_loss += loss;
            ++n_batches;
        }
        task.curve.push_back(epoch_loss / std::max(1, n_batches));
    }
    return task;
}

}  // namespace

TrainResult train(const std::vector<PatchRecord>& records, const std::string& source,
                  int metric_index, const FoldAssignment& folds, const CvProtocol& protocol,
                  const TrainConfig& cfg, const ViewFilter& filter) {
    if (metric_index < 0 || metric_index > 2) {
        throw std::invalid_argument("metric_index must be 0..2");
    }
    const ViewFilter f = filter ? filter : default_view_filter(source);
    const auto views = eligible_views(records, f);

    // shared feature cache: one entry per eligible view
    std::vector<Eigen::VectorXd> cache;
    std::vector<std::vector<int>> cache_index(records.size());
    for (size_t r = 0; r < records.size(); ++r) {
        for (int v : views[r]) {
            cache_index[r].push_back(static_cast<int>(cache.size()));
            cache.push_back(extract_features(records[r].views[v].patch).values);
        }
    }
    if (cache.empty()) throw NoViews("train: no eligible '" + source + "' views");

    const MetricKind kind = static_cast<MetricKind>(metric_index);
    std::vector<std::future<FoldTask>> futures;
    futures.reserve(protocol.eval_folds.size());
    for (int fold : protocol.eval_folds) {
        futures.push_back(std::async(std::launch::async, [&, fold] {
            return train_one_fold(records, views, &cache, cache_index, metric_index, folds,
                                  fold, cfg, kind);
        }));
    }

    TrainResult out;
    for (auto& fut : futures) {
        FoldTask task = fut.get();
        out.models.push_back(std::move(task.model));
        out.loss_curves.push_back(std::move(task.curve));
    }
    return out;
}

EvalReport evaluate(const std::vector<RegressorModel>& models,
                    const std::vector<PatchRecord>& records, const std::string& source,
                    int metric_index, const FoldAssignment& folds, const CvProtocol& protocol,
                    const ViewFilter& filter) {
    if (models.size() != protocol.eval_folds.size()) {
        throw std::invalid_argument("evaluate: one model per evaluated fold required");
    }
    const ViewFilter f = filter ? filter : default_view_filter(source);
    const auto views = eligible_views(records, f);

    EvalReport report;
    report.source = source;
    report.metric_index = metric_index;
    std::map<std::string, std::pair<double, int>> terrain_acc;  // tag -> (sq sum, n)

    for (size_t mi = 0; mi < models.size(); ++mi) {
        const int fold = protocol.eval_folds[mi];
        double sq_sum = 0;
        int n = 0;
        for (size_t r = 0; r < records.size(); ++r) {
            if (folds.fold(records[r].poi_id) != fold || views[r].empty()) continue;
            FeatureVector fv;
            fv.values = extract_features(records[r].views[views[r].front()].patch).values;
            const double pred = forward(models[mi], fv);
            const double target =
                models[mi].label_stats.normalize(metric_index, records[r].labels[metric_index]);
            const double err = pred - target;
            sq_sum += err * err;
            ++n;
            auto& acc = terrain_acc[records[r].terrain];
            acc.first += err * err;
            acc.second += 1;
        }
        report.per_fold_rmse.push_back(n > 0 ? std::sqrt(sq_sum / n) : 0.0);
    }
    report.mean_rmse =
        std::accumulate(report.per_fold_rmse.begin(), report.per_fold_rmse.end(), 0.0) /
        std::max<size_t>(1, report.per_fold_rmse.size());
    for (const auto& [tag, acc] : terrain_acc) {
        report.per_terrain[tag] = {acc.second > 0 ? std::sqrt(acc.first / acc.second) : 0.0,
                                   acc.second};
    }
    return report;
}

double finite_difference_check(const RegressorModel& model, const FeatureVector& features,
                               double epsilon) {
    if (epsilon < 1e-7 || epsilon > 1e-3) {
        throw std::invalid_argument("epsilon outside [1e-7, 1e-3]");
    }
    constexpr double kTarget = 0.25;
    Eigen::RowVectorXd y(1);
    y(0) = kTarget;

    RegressorModel m = model;  // perturbed copy
    const auto loss_at = [&]() {
        const ForwardTrace tr = forward_batch(m, features.values);
        const double err = tr.predictions(0) - kTarget;
        return err * err;
    };

    ForwardTrace tr = forward_batch(m, features.values);
    Gradients g = zero_like(m);
    backward_batch(m, tr, y, 0.0, g);

    double max_rel = 0;
    for (size_t l = 0; l < m.layers.size(); ++l) {
        auto check_param = [&](double& p, double analytic) {
            const double saved = p;
            p = saved + epsilon;
            const double lp = loss_at();
            p = saved - epsilon;
            const double lm = loss_at();
            p = saved;
            const double numeric = (lp - lm) / (2.0 * epsilon);
            const double rel = std::abs(analytic - numeric) /
                               std::max({std::abs(analytic), std::abs(numeric), 1e-6});
            max_rel = std::max(max_rel, rel);
        };
        for (int r = 0; r < m.layers[l].W.rows(); ++r)
            for (int c = 0; c < m.layers[l].W.cols(); ++c)
                check_param(m.layers[l].W(r, c), g.dW[l](r, c));
        for (int r = 0; r < m.layers[l].b.size(); ++r)
            check_param(m.layers[l].b(r), g.db[l](r));
    }
    return max_rel;
}

void save_model(const RegressorModel& model, const std::string& path) {
    json j;
    j["schema_id"] = model.schema_id;
    j["metric_kind"] = metric_name(model.metric_kind);
    j["feature_mean"] = std::vector<double>(model.feature_stats.mean.begin(),
                                            model.feature_stats.mean.end());
    j["feature_std"] = std::vector<double>(model.feature_stats.std.begin(),
                                           model.feature_stats.std.end());
    j["label_min"] = model.label_stats.min;
    j["label_max"] = model.label_stats.max;
    j["layers"] = json::array();
    for (const auto& layer : model.layers) {
        json lj;
        lj["rows"] = layer.W.rows();
        lj["cols"] = layer.W.cols();
        std::vector<double> w;  // row-major
        w.reserve(layer.W.size());
        for (int r = 0; r < layer.W.rows(); ++r)
            for (int c = 0; c < layer.W.cols(); ++c) w.push_back(layer.W(r, c));
        lj["weights"] = w;
        lj["bias"] = std::vector<double>(layer.b.begin(), layer.b.end());
        j["layers"].push_back(std::move(lj));
    }
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << j.dump(2) << "\n";
}

RegressorModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    json j = json::parse(in);

    RegressorModel m;
    m.schema_id = j.at("schema_id").get<std::string>();
    m.metric_kind = metric_from_name(j.at("metric_kind").get<std::string>());
    const auto mean = j.at("feature_mean").get<std::vector<double>>();
    const auto stdv = j.at("feature_std").get<std::vector<double>>();
    m.feature_stats.mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), mean.size());
    m.feature_stats.std = Eigen::Map<const Eigen::VectorXd>(stdv.data(), stdv.size());
    m.label_stats.min = j.at("label_min").get<std::array<double, 3>>();
    m.label_stats.max = j.at("label_max").get<std::array<double, 3>>();
    for (const auto& lj : j.at("layers")) {
        DenseLayer layer;
        const int rows = lj.at("rows").get<int>();
        const int cols = lj.at("cols").get<int>();
        const auto w = lj.at("weights").get<std::vector<double>>();
        if (static_cast<int>(w.size()) != rows * cols) {
            throw IoError(path + ": layer weight size mismatch");
        }
        layer.W = Eigen::MatrixXd(rows, cols);
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < cols; ++c) layer.W(r, c) = w[r * cols + c];
        const auto b = lj.at("bias").get<std::vector<double>>();
        layer.b = Eigen::Map<const Eigen::VectorXd>(b.data(), b.size());
        m.layers.push_back(std::move(layer));
    }
    return m;
}

}  // namespace terra
