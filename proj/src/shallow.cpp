#include <algorithm>
#include <cmath>
#include <set>

#include "xrumap/errors.hpp"
#include "xrumap/eval.hpp"

namespace xrumap {

namespace {

// Predictions with an implicit all-ones bias column appended to x.
Matrix affine_apply(const Matrix& weights, const Matrix& x) {
    const std::size_t d = weights.rows() - 1;
    const std::size_t k = weights.cols();
    if (x.cols() != d)
        throw DataError("shallow model: feature width does not match model");
    Matrix out(x.rows(), k);
    for (std::size_t i = 0; i < x.rows(); ++i)
        for (std::size_t o = 0; o < k; ++o) {
            double s = weights(d, o);
            for (std::size_t f = 0; f < d; ++f)
                s += x(i, f) * weights(f, o);
            out(i, o) = s;
        }
    return out;
}

void softmax_rows(Matrix& m) {
    for (std::size_t i = 0; i < m.rows(); ++i) {
        double mx = m(i, 0);
        for (std::size_t j = 1; j < m.cols(); ++j) mx = std::max(mx, m(i, j));
        double sum = 0.0;
        for (std::size_t j = 0; j < m.cols(); ++j) {
            m(i, j) = std::exp(m(i, j) - mx);
            sum += m(i, j);
        }
        for (std::size_t j = 0; j < m.cols(); ++j) m(i, j) /= sum;
    }
}

double cross_entropy(const Matrix& weights, const Matrix& x,
                     std::span<const int> labels) {
    Matrix p = affine_apply(weights, x);
    softmax_rows(p);
    double loss = 0.0;
    for (std::size_t i = 0; i < x.rows(); ++i)
        loss -= std::log(std::max(p(i, labels[i]), 1e-300));
    return loss / static_cast<double>(x.rows());
}

double mse(const Matrix& weights, const Matrix& x, const Matrix& targets) {
    const Matrix p = affine_apply(weights, x);
    double loss = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double d = p.data()[i] - targets.data()[i];
        loss += d * d;
    }
    return loss / static_cast<double>(p.size());
}

// Shared descent loop: grad() fills the gradient for the current weights,
// loss() evaluates a candidate. Backtracking halves the step until the loss
// stops increasing, so the recorded trace is monotone.
template <typename LossFn, typename GradFn>
void descend(Matrix& weights, std::vector<double>& trace, std::size_t epochs,
             double step, LossFn&& loss, GradFn&& grad) {
    Matrix g(weights.rows(), weights.cols());
    double current = loss(weights);
    trace.push_back(current);
    for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
        grad(weights, g);
        bool accepted = false;
        for (int tries = 0; tries < 40; ++tries) {
            Matrix cand = weights;
            for (std::size_t i = 0; i < cand.size(); ++i)
                cand.data()[i] -= step * g.data()[i];
            const double cand_loss = loss(cand);
            if (cand_loss <= current) {
                weights = std::move(cand);
                current = cand_loss;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        trace.push_back(current);
        if (!accepted) break;  // step underflow; stationary enough
    }
}

}  // namespace

ShallowModel fit_shallow_classifier(const Matrix& x,
                                    std::span<const int> labels,
                                    std::size_t epochs, double step,
                                    std::uint64_t seed) {
    (void)seed;  // zero init; the fit is deterministic by construction
    const std::size_t n = x.rows();
    if (n == 0 || labels.size() != n)
        throw DataError("fit_shallow_classifier: label count mismatch");
    int max_label = 0;
    std::set<int> distinct;
    for (int l : labels) {
        if (l < 0) throw DataError("fit_shallow_classifier: negative label");
        distinct.insert(l);
        max_label = std::max(max_label, l);
    }
    if (distinct.size() < 2)
        throw DataError(
            "fit_shallow_classifier: need at least two distinct classes");
    const std::size_t k = static_cast<std::size_t>(max_label) + 1;
    if (n < k) throw DataError("fit_shallow_classifier: fewer samples than classes");
    for (std::size_t i = 0; i < x.size(); ++i)
        if (!std::isfinite(x.data()[i]))
            throw DataError("fit_shallow_classifier: non-finite feature");

    ShallowModel model;
    model.kind = ShallowModel::Kind::Classifier;
    model.weights = Matrix(x.cols() + 1, k);

    const double inv_n = 1.0 / static_cast<double>(n);
    descend(
        model.weights, model.loss_trace, epochs, step,
        [&](const Matrix& w) { return cross_entropy(w, x, labels); },
        [&](const Matrix& w, Matrix& g) {
            Matrix p = affine_apply(w, x);
            softmax_rows(p);
            std::fill(g.data(), g.data() + g.size(), 0.0);
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t o = 0; o < k; ++o) {
                    const double resid =
                        (p(i, o) - (labels[i] == static_cast<int>(o) ? 1.0
                                                                     : 0.0)) *
                        inv_n;
                    for (std::size_t f = 0; f < x.cols(); ++f)
                        g(f, o) += resid * x(i, f);
                    g(x.cols(), o) += resid;
                }
            }
        });
    return model;
}

ShallowModel fit_shallow_regressor(const Matrix& x, const Matrix& targets,
                                   std::size_t epochs, double step,
                                   std::uint64_t seed) {
    (void)seed;
    const std::size_t n = x.rows();
    if (n == 0 || targets.rows() != n)
        throw DataError("fit_shallow_regressor: target count mismatch");
    for (std::size_t i = 0; i < x.size(); ++i)
        if (!std::isfinite(x.data()[i]))
            throw DataError("fit_shallow_regressor: non-finite feature");

    const std::size_t k = targets.cols();
    ShallowModel model;
    model.kind = ShallowModel::Kind::Regressor;
    model.weights = Matrix(x.cols() + 1, k);

    const double scale = 2.0 / static_cast<double>(n * k);
    descend(
        model.weights, model.loss_trace, epochs, step,
        [&](const Matrix& w) { return mse(w, x, targets); },
        [&](const Matrix& w, Matrix& g) {
            const Matrix p = affine_apply(w, x);
            std::fill(g.data(), g.data() + g.size(), 0.0);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t o = 0; o < k; ++o) {
                    const double resid = (p(i, o) - targets(i, o)) * scale;
                    for (std::size_t f = 0; f < x.cols(); ++f)
                        g(f, o) += resid * x(i, f);
                    g(x.cols(), o) += resid;
                }
        });
    return model;
}

Matrix shallow_predict(const ShallowModel& model, const Matrix& x) {
    Matrix out = affine_apply(model.weights, x);
    if (model.kind == ShallowModel::Kind::Classifier) softmax_rows(out);
    return out;
}

std::vector<int> shallow_classify(const ShallowModel& model, const Matrix& x) {
    if (model.kind != ShallowModel::Kind::Classifier)
        throw DataError("shallow_classify: model is not a classifier");
    const Matrix p = shallow_predict(model, x);
    std::vector<int> labels(p.rows());
    for (std::size_t i = 0; i < p.rows(); ++i) {
        std::size_t best = 0;
        for (std::size_t j = 1; j < p.cols(); ++j)
            if (p(i, j) > p(i, best)) best = j;
        labels[i] = static_cast<int>(best);
    }
    return labels;
}

}  // namespace xrumap
