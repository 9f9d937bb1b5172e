#include <algorithm>
#include <cmath>
#include <numeric>

#include "xrumap/baselines.hpp"
#include "xrumap/errors.hpp"
#include "xrumap/eval.hpp"
#include "xrumap/manifold.hpp"
#include "xrumap/metrics.hpp"
#include "xrumap/rng.hpp"

namespace xrumap {

double EvalReport::scalar(const std::string& name) const {
    for (const auto& [key, value] : scalars)
        if (key == name) return value;
    throw DataError("EvalReport: no scalar named '" + name + "'");
}

bool EvalReport::has_scalar(const std::string& name) const {
    for (const auto& [key, value] : scalars)
        if (key == name) return true;
    return false;
}

std::vector<int> labels_from_mask(const HyperCube& mask) {
    std::vector<int> labels(mask.height * mask.width);
    for (std::size_t i = 0; i < labels.size(); ++i)
        labels[i] = mask.data[i] != 0.0f ? 1 : 0;
    return labels;
}

namespace {

Matrix pool_rows(const Matrix& m) {
    Matrix out(1, m.cols());
    if (m.rows() == 0) return out;
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t c = 0; c < m.cols(); ++c) out(0, c) += m(i, c);
    for (std::size_t c = 0; c < m.cols(); ++c)
        out(0, c) /= static_cast<double>(m.rows());
    return out;
}

}  // namespace

EvalReport evaluate_pixelwise(const ShallowModel& model,
                              const std::vector<Matrix>& features,
                              const SampleSet& reference,
                              const EvalOptions& options) {
    if (features.size() != reference.size())
        throw DataError("evaluate_pixelwise: cube count mismatch");
    if (features.empty()) throw DataError("evaluate_pixelwise: empty input");

    EvalReport report;
    report.task = options.task;
    report.dims = features.front().cols();

    if (options.task == "segmentation") {
        if (model.kind != ShallowModel::Kind::Classifier)
            throw DataError("evaluate_pixelwise: segmentation needs a classifier");
        double iou_sum = 0.0, dice_sum = 0.0, acc_sum = 0.0;
        std::vector<double> pooled_feature;
        std::vector<std::vector<double>> pooled_columns(report.dims);
        std::vector<int> pooled_labels;
        for (std::size_t cube = 0; cube < features.size(); ++cube) {
            const HyperCube& mask = reference.masks[cube];
            const Matrix& f = features[cube];
            if (f.rows() != mask.height * mask.width)
                throw DataError("evaluate_pixelwise: pixel count mismatch");
            const std::vector<int> truth = labels_from_mask(mask);
            const std::vector<int> predicted = shallow_classify(model, f);

            MaskPair pair;
            pair.height = mask.height;
            pair.width = mask.width;
            pair.predicted.resize(truth.size());
            pair.reference.resize(truth.size());
            std::size_t correct = 0;
            for (std::size_t i = 0; i < truth.size(); ++i) {
                pair.predicted[i] = predicted[i] != 0;
                pair.reference[i] = truth[i] != 0;
                correct += predicted[i] == truth[i];
            }
            iou_sum += iou(pair);
            dice_sum += dice(pair);
            acc_sum += static_cast<double>(correct) /
                       static_cast<double>(truth.size());

            for (std::size_t i = 0; i < truth.size(); ++i) {
                pooled_labels.push_back(truth[i]);
                for (std::size_t c = 0; c < report.dims; ++c)
                    pooled_columns[c].push_back(f(i, c));
            }
        }
        const double n = static_cast<double>(features.size());
        report.scalars.emplace_back("iou", iou_sum / n);
        report.scalars.emplace_back("dice", dice_sum / n);
        report.scalars.emplace_back("accuracy", acc_sum / n);
        for (std::size_t c = 0; c < report.dims; ++c)
            report.component_mi.push_back(mutual_information(
                pooled_columns[c], pooled_labels, options.mi_bins));
        return report;
    }

    if (options.task != "regression")
        throw ConfigError("evaluate_pixelwise: unknown task '" + options.task +
                          "'");
    if (model.kind != ShallowModel::Kind::Regressor)
        throw DataError("evaluate_pixelwise: regression needs a regressor");
    if (reference.targets.rows() != reference.size())
        throw DataError("evaluate_pixelwise: missing regression targets");

    Matrix pooled(features.size(), report.dims);
    for (std::size_t cube = 0; cube < features.size(); ++cube) {
        const Matrix row = pool_rows(features[cube]);
        for (std::size_t c = 0; c < report.dims; ++c)
            pooled(cube, c) = row(0, c);
    }
    const Matrix predictions = shallow_predict(model, pooled);
    const std::size_t m = reference.targets.cols();
    if (predictions.cols() != m)
        throw DataError("evaluate_pixelwise: target width mismatch");

    std::vector<double> scores(m);
    std::vector<double> p_col(features.size()), t_col(features.size());
    for (std::size_t j = 0; j < m; ++j) {
        for (std::size_t i = 0; i < features.size(); ++i) {
            p_col[i] = predictions(i, j);
            t_col[i] = reference.targets(i, j);
        }
        scores[j] = s_score(p_col, t_col);
        const std::string name = j < reference.target_names.size()
                                     ? reference.target_names[j]
                                     : "t" + std::to_string(j);
        report.scalars.emplace_back("s_" + name, scores[j]);
    }
    report.scalars.emplace_back("sh", sh_score(scores));

    if (options.target_weights.size() == m) {
        RegressionBatch batch;
        batch.predictions = predictions;
        batch.targets = reference.targets;
        batch.weights = options.target_weights;
        report.scalars.emplace_back("weighted_loss", weighted_loss(batch));
    }
    return report;
}

namespace {

Matrix concat_rows(const std::vector<Matrix>& parts) {
    std::size_t rows = 0, cols = 0;
    for (const Matrix& m : parts) {
        rows += m.rows();
        cols = m.cols();
    }
    Matrix out(rows, cols);
    std::size_t at = 0;
    for (const Matrix& m : parts) {
        std::copy(m.data(), m.data() + m.size(), out.data() + at * cols);
        at += m.rows();
    }
    return out;
}

Matrix subsample_rows(const Matrix& m, std::size_t cap, Rng& rng) {
    if (m.rows() <= cap) return m;
    // Partial Fisher-Yates over row indices.
    std::vector<std::uint32_t> idx(m.rows());
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t i = 0; i < cap; ++i) {
        const std::size_t j = i + rng.below(m.rows() - i);
        std::swap(idx[i], idx[j]);
    }
    std::sort(idx.begin(), idx.begin() + cap);
    Matrix out(cap, m.cols());
    for (std::size_t i = 0; i < cap; ++i)
        std::copy(m.row(idx[i]).begin(), m.row(idx[i]).end(),
                  out.row(i).begin());
    return out;
}

struct Standardizer {
    std::vector<double> mean, scale;

    void fit(const Matrix& x) {
        mean.assign(x.cols(), 0.0);
        scale.assign(x.cols(), 1.0);
        if (x.rows() < 2) return;
        for (std::size_t i = 0; i < x.rows(); ++i)
            for (std::size_t c = 0; c < x.cols(); ++c) mean[c] += x(i, c);
        for (std::size_t c = 0; c < x.cols(); ++c)
            mean[c] /= static_cast<double>(x.rows());
        std::vector<double> var(x.cols(), 0.0);
        for (std::size_t i = 0; i < x.rows(); ++i)
            for (std::size_t c = 0; c < x.cols(); ++c) {
                const double d = x(i, c) - mean[c];
                var[c] += d * d;
            }
        for (std::size_t c = 0; c < x.cols(); ++c) {
            const double sd =
                std::sqrt(var[c] / static_cast<double>(x.rows() - 1));
            scale[c] = sd > 1e-12 ? sd : 1.0;
        }
    }

    void apply(Matrix& x) const {
        for (std::size_t i = 0; i < x.rows(); ++i)
            for (std::size_t c = 0; c < x.cols(); ++c)
                x(i, c) = (x(i, c) - mean[c]) / scale[c];
    }
};

}  // namespace

ReducedFeatures reduce_method(const std::string& method,
                              const std::vector<Matrix>& train,
                              const std::vector<Matrix>& test,
                              const CompareConfig& cfg, std::uint64_t seed) {
    ReducedFeatures out;
    const std::size_t bands = train.front().cols();

    if (method == "raw") {
        out.train = train;
        out.test = test;
        out.dims = bands;
        return out;
    }

    const Matrix all_train = concat_rows(train);
    out.dims = cfg.dims;
    if (cfg.dims > bands)
        throw ConfigError("compare: dims exceeds band count");

    if (method == "pca") {
        const PcaModel model = pca_fit(all_train, cfg.dims);
        for (const Matrix& m : train) out.train.push_back(pca_transform(model, m));
        for (const Matrix& m : test) out.test.push_back(pca_transform(model, m));
        out.evr = model.explained_variance_ratio;
        return out;
    }
    if (method == "nmf") {
        const NmfFit fit = nmf_fit(all_train, cfg.dims, cfg.nmf_iters, seed);
        for (const Matrix& m : train)
            out.train.push_back(nmf_transform(fit.model, m, cfg.nmf_iters));
        for (const Matrix& m : test)
            out.test.push_back(nmf_transform(fit.model, m, cfg.nmf_iters));
        return out;
    }

    Rng rng(seed);
    const Matrix fit_data = subsample_rows(all_train, cfg.fit_cap, rng);
    UmapParams params;
    params.n_neighbors = cfg.umap_neighbors;
    params.min_dist = cfg.umap_min_dist;
    params.target_dim = static_cast<int>(cfg.dims);
    params.n_epochs = cfg.umap_epochs;
    params.negative_sample_rate = cfg.umap_negative_rate;
    params.init = cfg.umap_init;
    params.seed = seed;

    if (method == "umap") {
        const UmapModel model =
            umap_fit(fit_data, params, nullptr, cfg.threads);
        for (const Matrix& m : train)
            out.train.push_back(umap_transform(model, m, cfg.refine_epochs,
                                               seed + 1, cfg.threads));
        for (const Matrix& m : test)
            out.test.push_back(umap_transform(model, m, cfg.refine_epochs,
                                              seed + 1, cfg.threads));
        return out;
    }
    if (method == "parametric-umap") {
        NeighborGraph graph =
            knn_graph(fit_data, params.n_neighbors, cfg.threads);
        calibrate_bandwidths(graph, params.n_neighbors);
        const FuzzySet fs = fuzzy_simplicial_set(graph);
        const auto [a, b] = fit_curve(params.min_dist, params.spread);
        TrainConfig tc;
        tc.batch_edges = cfg.parametric_batch;
        tc.epochs = cfg.parametric_epochs;
        tc.step_size = cfg.parametric_step;
        tc.negative_sample_rate = cfg.umap_negative_rate;
        tc.seed = seed;
        tc.target_dim = cfg.dims;
        const TrainResult tr = train_parametric(fit_data, fs, tc, a, b);
        for (const Matrix& m : train)
            out.train.push_back(encoder_forward(tr.net, m));
        for (const Matrix& m : test)
            out.test.push_back(encoder_forward(tr.net, m));
        return out;
    }
    throw ConfigError("compare: unknown method '" + method + "'");
}

double CompareResult::aggregate_mean(const std::string& method,
                                     const std::string& metric) const {
    for (const auto& a : aggregates)
        if (a.method == method && a.metric == metric) return a.mean;
    throw DataError("compare: no aggregate for " + method + "/" + metric);
}

CompareResult compare_methods(const SampleSet& train, const SampleSet& test,
                              const CompareConfig& cfg) {
    if (train.size() == 0 || test.size() == 0)
        throw DataError("compare: empty train or test set");
    if (cfg.runs == 0) throw ConfigError("compare: runs must be positive");
    const bool segmentation = cfg.task == "segmentation";
    if (!segmentation && cfg.task != "regression")
        throw ConfigError("compare: unknown task '" + cfg.task + "'");
    if (train.masks.size() != train.size() ||
        test.masks.size() != test.size())
        throw DataError("compare: every cube needs a mask");

    // Pixel matrices: all pixels for segmentation, masked for regression.
    std::vector<Matrix> train_feats, test_feats;
    std::vector<int> train_labels;
    for (std::size_t i = 0; i < train.size(); ++i) {
        const HyperCube* mask = segmentation ? nullptr : &train.masks[i];
        train_feats.push_back(flatten_pixels(train.cubes[i], mask));
        if (segmentation) {
            const auto labels = labels_from_mask(train.masks[i]);
            train_labels.insert(train_labels.end(), labels.begin(),
                                labels.end());
        }
    }
    for (std::size_t i = 0; i < test.size(); ++i) {
        const HyperCube* mask = segmentation ? nullptr : &test.masks[i];
        test_feats.push_back(flatten_pixels(test.cubes[i], mask));
    }

    EvalOptions eval_options = cfg.eval;
    eval_options.task = cfg.task;

    CompareResult result;
    result.runs = cfg.runs;
    result.dims = cfg.dims;

    for (const std::string& method : cfg.methods) {
        for (std::size_t run = 0; run < cfg.runs; ++run) {
            const std::uint64_t seed = cfg.master_seed + run;
            ReducedFeatures reduced =
                reduce_method(method, train_feats, test_feats, cfg, seed);

            Standardizer std_;
            std_.fit(concat_rows(reduced.train));
            for (Matrix& m : reduced.train) std_.apply(m);
            for (Matrix& m : reduced.test) std_.apply(m);

            ShallowModel model;
            if (segmentation) {
                model = fit_shallow_classifier(concat_rows(reduced.train),
                                               train_labels,
                                               cfg.shallow_epochs,
                                               cfg.shallow_step, seed);
            } else {
                Matrix pooled(train.size(), reduced.dims);
                for (std::size_t i = 0; i < reduced.train.size(); ++i) {
                    const Matrix row = pool_rows(reduced.train[i]);
                    for (std::size_t c = 0; c < reduced.dims; ++c)
                        pooled(i, c) = row(0, c);
                }
                model = fit_shallow_regressor(pooled, train.targets,
                                              cfg.shallow_epochs,
                                              cfg.shallow_step, seed);
            }

            EvalReport report =
                evaluate_pixelwise(model, reduced.test, test, eval_options);
            report.method = method;
            report.seed = seed;
            report.component_evr = reduced.evr;

            for (const auto& [metric, value] : report.scalars)
                result.rows.push_back(
                    {method, reduced.dims, run, metric, value});
        }
    }

    // Aggregate in first-appearance order for reproducible emission.
    std::vector<std::pair<std::string, std::string>> keys;
    for (const CompareRow& row : result.rows) {
        const auto key = std::make_pair(row.method, row.metric);
        if (std::find(keys.begin(), keys.end(), key) == keys.end())
            keys.push_back(key);
    }
    for (const auto& [method, metric] : keys) {
        std::vector<double> values;
        for (const CompareRow& row : result.rows)
            if (row.method == method && row.metric == metric)
                values.push_back(row.value);
        CompareAggregate agg;
        agg.method = method;
        agg.metric = metric;
        for (double v : values) agg.mean += v;
        agg.mean /= static_cast<double>(values.size());
        if (values.size() > 1) {
            double ss = 0.0;
            for (double v : values) {
                const double d = v - agg.mean;
                ss += d * d;
            }
            agg.stddev = std::sqrt(ss / static_cast<double>(values.size() - 1));
            agg.stderr_ =
                agg.stddev / std::sqrt(static_cast<double>(values.size()));
        }
        result.aggregates.push_back(agg);
    }
    return result;
}

}  // namespace xrumap
