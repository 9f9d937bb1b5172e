#ifndef XRUMAP_METRICS_HPP
#define XRUMAP_METRICS_HPP

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "xrumap/matrix.hpp"

namespace xrumap {

// Per-target regression score: exp(-sum|p - t| / sum t), in (0, 1].
double s_score(std::span<const double> predictions,
               std::span<const double> targets);

// Aggregate of per-target scores: M * prod(S) / sum(S), in [0, 1].
double sh_score(std::span<const double> scores);

struct RegressionBatch {
    Matrix predictions;  // [N][M]
    Matrix targets;      // [N][M], every column sum > 0
    std::vector<std::string> target_names;
    std::vector<double> weights;  // [M]
};

// Mean over samples of sum_i w_i ((p_i - t_i) / t_i)^2.
double weighted_loss(const RegressionBatch& batch);

struct MaskPair {
    std::size_t height = 0, width = 0;
    std::vector<std::uint8_t> predicted;  // values in {0, 1}
    std::vector<std::uint8_t> reference;
};

// |A n B| / |A u B| and 2|A n B| / (|A| + |B|); both-empty pairs score 1.
double iou(const MaskPair& masks);
double dice(const MaskPair& masks);

// Plug-in mutual information in bits between a binned feature and integer
// labels. Equal-width bins over [min, max] by default; quantile bins behind
// the flag. A constant feature occupies one bin and scores 0.
double mutual_information(std::span<const double> feature,
                          std::span<const int> labels, int bins = 32,
                          bool quantile_bins = false);

// Standard trustworthiness: penalizes points that enter a low-dimensional
// k-neighborhood from far away in high-dimensional rank order. Ties break by
// lower point index in both spaces.
double trustworthiness(const Matrix& x_high, const Matrix& y_low, int k);

}  // namespace xrumap

#endif
