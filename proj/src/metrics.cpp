#include "xrumap/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "xrumap/errors.hpp"

namespace xrumap {

double s_score(std::span<const double> predictions,
               std::span<const double> targets) {
    if (predictions.size() != targets.size())
        throw DataError("s_score: prediction/target length mismatch");
    if (predictions.empty()) throw DataError("s_score: empty input");
    double abs_err = 0.0, target_sum = 0.0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        abs_err += std::abs(predictions[i] - targets[i]);
        target_sum += targets[i];
    }
    if (target_sum <= 0.0)
        throw DataError("s_score: target column sum must be positive");
    return std::exp(-abs_err / target_sum);
}

double sh_score(std::span<const double> scores) {
    if (scores.empty()) throw DataError("sh_score: no scores");
    double prod = 1.0, sum = 0.0;
    for (double s : scores) {
        if (s < 0.0 || s > 1.0)
            throw DataError("sh_score: score outside [0, 1]");
        prod *= s;
        sum += s;
    }
    if (sum <= 0.0) throw DataError("sh_score: all scores are zero");
    return static_cast<double>(scores.size()) * prod / sum;
}

double weighted_loss(const RegressionBatch& batch) {
    const Matrix& p = batch.predictions;
    const Matrix& t = batch.targets;
    if (p.rows() != t.rows() || p.cols() != t.cols())
        throw DataError("weighted_loss: prediction/target shape mismatch");
    if (batch.weights.size() != p.cols())
        throw DataError("weighted_loss: weight count does not match targets");
    if (p.rows() == 0) throw DataError("weighted_loss: empty batch");

    double total = 0.0;
    for (std::size_t i = 0; i < p.rows(); ++i)
        for (std::size_t j = 0; j < p.cols(); ++j) {
            if (t(i, j) == 0.0)
                throw DataError("weighted_loss: zero target value at sample " +
                                std::to_string(i));
            const double rel = (p(i, j) - t(i, j)) / t(i, j);
            total += batch.weights[j] * rel * rel;
        }
    return total / static_cast<double>(p.rows());
}

namespace {

struct MaskCounts {
    std::size_t inter = 0, a = 0, b = 0;
};

MaskCounts count_masks(const MaskPair& masks) {
    if (masks.predicted.size() != masks.reference.size() ||
        masks.predicted.size() != masks.height * masks.width)
        throw DataError("mask pair shape mismatch");
    MaskCounts c;
    for (std::size_t i = 0; i < masks.predicted.size(); ++i) {
        const bool pa = masks.predicted[i] != 0;
        const bool pb = masks.reference[i] != 0;
        c.a += pa;
        c.b += pb;
        c.inter += pa && pb;
    }
    return c;
}

}  // namespace

double iou(const MaskPair& masks) {
    const MaskCounts c = count_masks(masks);
    const std::size_t uni = c.a + c.b - c.inter;
    if (uni == 0) return 1.0;
    return static_cast<double>(c.inter) / static_cast<double>(uni);
}

double dice(const MaskPair& masks) {
    const MaskCounts c = count_masks(masks);
    if (c.a + c.b == 0) return 1.0;
    return 2.0 * static_cast<double>(c.inter) /
           static_cast<double>(c.a + c.b);
}

double mutual_information(std::span<const double> feature,
                          std::span<const int> labels, int bins,
                          bool quantile_bins) {
    const std::size_t n = feature.size();
    if (n != labels.size())
        throw DataError("mutual_information: feature/label length mismatch");
    if (n < 2) throw DataError("mutual_information: need at least 2 samples");
    if (bins < 1) throw DataError("mutual_information: bins must be >= 1");

    int max_label = 0;
    for (int l : labels) {
        if (l < 0) throw DataError("mutual_information: negative label");
        max_label = std::max(max_label, l);
    }
    const int n_labels = max_label + 1;

    std::vector<int> bin_of(n, 0);
    if (quantile_bins) {
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            if (feature[a] != feature[b]) return feature[a] < feature[b];
            return a < b;
        });
        for (std::size_t r = 0; r < n; ++r)
            bin_of[order[r]] = static_cast<int>(
                std::min<std::size_t>(bins - 1, r * bins / n));
    } else {
        const auto [mn_it, mx_it] =
            std::minmax_element(feature.begin(), feature.end());
        const double mn = *mn_it, mx = *mx_it;
        if (mx > mn) {
            const double scale = bins / (mx - mn);
            for (std::size_t i = 0; i < n; ++i)
                bin_of[i] = std::min(
                    bins - 1, static_cast<int>((feature[i] - mn) * scale));
        }
    }

    std::vector<double> joint(static_cast<std::size_t>(bins) * n_labels, 0.0);
    std::vector<double> px(bins, 0.0), py(n_labels, 0.0);
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        joint[static_cast<std::size_t>(bin_of[i]) * n_labels + labels[i]] +=
            inv_n;
        px[bin_of[i]] += inv_n;
        py[labels[i]] += inv_n;
    }

    double mi = 0.0;
    for (int b = 0; b < bins; ++b)
        for (int l = 0; l < n_labels; ++l) {
            const double pxy = joint[static_cast<std::size_t>(b) * n_labels + l];
            if (pxy > 0.0)
                mi += pxy * std::log2(pxy / (px[b] * py[l]));
        }
    return mi < 0.0 ? 0.0 : mi;
}

namespace {

// Neighbor ranks by (distance, index); rank 1 is the nearest other point.
std::vector<std::size_t> rank_order(const Matrix& x, std::size_t i) {
    const std::size_t n = x.rows();
    std::vector<double> d(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (std::size_t c = 0; c < x.cols(); ++c) {
            const double diff = x(i, c) - x(j, c);
            s += diff * diff;
        }
        d[j] = s;
    }
    std::vector<std::size_t> order;
    order.reserve(n - 1);
    for (std::size_t j = 0; j < n; ++j)
        if (j != i) order.push_back(j);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (d[a] != d[b]) return d[a] < d[b];
        return a < b;
    });
    return order;
}

}  // namespace

double trustworthiness(const Matrix& x_high, const Matrix& y_low, int k) {
    const std::size_t n = x_high.rows();
    if (y_low.rows() != n)
        throw DataError("trustworthiness: row count mismatch");
    if (k < 1 || static_cast<std::size_t>(2 * k) >= n)
        throw DataError("trustworthiness: k must satisfy 1 <= k < N/2");

    double penalty = 0.0;
    std::vector<std::size_t> high_rank(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto high_order = rank_order(x_high, i);
        const auto low_order = rank_order(y_low, i);
        for (std::size_t r = 0; r < high_order.size(); ++r)
            high_rank[high_order[r]] = r + 1;
        for (int r = 0; r < k; ++r) {
            const std::size_t j = low_order[static_cast<std::size_t>(r)];
            const std::size_t rank = high_rank[j];
            if (rank > static_cast<std::size_t>(k))
                penalty += static_cast<double>(rank - k);
        }
    }
    const double nd = static_cast<double>(n);
    const double kd = static_cast<double>(k);
    return 1.0 - penalty * 2.0 / (nd * kd * (2.0 * nd - 3.0 * kd - 1.0));
}

}  // namespace xrumap
