#ifndef XRUMAP_EVAL_HPP
#define XRUMAP_EVAL_HPP

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "xrumap/dataset.hpp"
#include "xrumap/matrix.hpp"
#include "xrumap/parametric.hpp"

namespace xrumap {

// Shallow per-pixel stand-in for the downstream networks: a softmax
// classifier or a linear regressor over reduced features.
struct ShallowModel {
    enum class Kind { Classifier, Regressor };
    Kind kind = Kind::Classifier;
    Matrix weights;  // [D+1][K], bias row last
    std::vector<double> loss_trace;
};

// Full-batch gradient descent with step halving whenever the loss would
// increase, so the recorded trace is non-increasing.
ShallowModel fit_shallow_classifier(const Matrix& x,
                                    std::span<const int> labels,
                                    std::size_t epochs, double step,
                                    std::uint64_t seed);

ShallowModel fit_shallow_regressor(const Matrix& x, const Matrix& targets,
                                   std::size_t epochs, double step,
                                   std::uint64_t seed);

// Class probabilities (classifier) or predicted values (regressor).
Matrix shallow_predict(const ShallowModel& model, const Matrix& x);

std::vector<int> shallow_classify(const ShallowModel& model, const Matrix& x);

struct EvalReport {
    std::string task;    // "segmentation" | "regression"
    std::string method;  // reducer name
    std::size_t dims = 0;
    std::uint64_t seed = 0;
    std::vector<std::pair<std::string, double>> scalars;
    std::vector<double> component_mi;   // per reduced component, bits
    std::vector<double> component_evr;  // per component, when available

    double scalar(const std::string& name) const;
    bool has_scalar(const std::string& name) const;
};

struct EvalOptions {
    std::string task = "segmentation";
    std::vector<double> target_weights = {0.5, 5.0, 5.0};
    int mi_bins = 32;
};

// Segmentation: per-cube IoU/Dice/accuracy averaged over cubes, plus
// per-component mutual information against the pixel labels. Regression:
// per-cube pooled features scored with S_i, SH and the weighted loss.
// `features` carries one matrix per cube: all pixels for segmentation,
// mask-selected pixels for regression.
EvalReport evaluate_pixelwise(const ShallowModel& model,
                              const std::vector<Matrix>& features,
                              const SampleSet& reference,
                              const EvalOptions& options);

struct CompareConfig {
    std::vector<std::string> methods = {"raw", "pca", "nmf", "umap"};
    std::size_t dims = 5;
    std::size_t runs = 10;
    std::uint64_t master_seed = 0;
    std::string task = "segmentation";

    // Reducer knobs.
    int umap_neighbors = 15;
    double umap_min_dist = 0.1;
    int umap_epochs = 200;
    int umap_negative_rate = 5;
    std::string umap_init = "spectral";
    std::size_t fit_cap = 4096;  // max pixels used to fit umap/parametric
    int refine_epochs = 0;
    std::size_t nmf_iters = 200;
    std::size_t parametric_epochs = 30;
    std::size_t parametric_batch = 256;
    double parametric_step = 1e-3;

    // Shallow evaluator knobs.
    std::size_t shallow_epochs = 300;
    double shallow_step = 0.5;

    EvalOptions eval;
    int threads = 1;
};

struct CompareRow {
    std::string method;
    std::size_t dims = 0;
    std::size_t run = 0;
    std::string metric;
    double value = 0.0;
};

struct CompareAggregate {
    std::string method;
    std::string metric;
    double mean = 0.0;
    double stddev = 0.0;  // sample standard deviation over runs
    double stderr_ = 0.0;
};

struct CompareResult {
    std::vector<CompareRow> rows;
    std::vector<CompareAggregate> aggregates;
    std::size_t dims = 0;
    std::size_t runs = 0;

    double aggregate_mean(const std::string& method,
                          const std::string& metric) const;
};

// The repeated-runs protocol: per (method, run), reduce train/test pixels,
// fit the shallow evaluator, score the test set, then aggregate mean and
// both deviation statistics. Run r uses seed master_seed + r.
CompareResult compare_methods(const SampleSet& train, const SampleSet& test,
                              const CompareConfig& config);

struct ReducedFeatures {
    std::vector<Matrix> train, test;  // one matrix per cube
    std::size_t dims = 0;
    std::vector<double> evr;  // filled for pca
};

// One reducer applied to per-cube pixel matrices: raw (identity), pca, nmf,
// umap or parametric-umap, with fitting knobs taken from the config.
ReducedFeatures reduce_method(const std::string& method,
                              const std::vector<Matrix>& train,
                              const std::vector<Matrix>& test,
                              const CompareConfig& config, std::uint64_t seed);

std::vector<int> labels_from_mask(const HyperCube& mask);

}  // namespace xrumap

#endif
