#ifndef XRUMAP_BASELINES_HPP
#define XRUMAP_BASELINES_HPP

#include <cstdint>
#include <vector>

#include "xrumap/matrix.hpp"

namespace xrumap {

struct PcaModel {
    std::vector<double> mean;                      // [C]
    std::vector<double> scale;                     // [C], all 1 unless standardized
    Matrix components;                             // [D][C], row-orthonormal
    std::vector<double> explained_variance_ratio;  // [D], non-increasing
    bool standardized = false;
};

// Top-D principal directions of (optionally per-band standardized) X via
// eigendecomposition of the C x C covariance. Each component's
// largest-magnitude entry is flipped positive.
PcaModel pca_fit(const Matrix& x, std::size_t dim, bool unit_variance = false);

// (X - mean) / scale projected onto the components: N x D.
Matrix pca_transform(const PcaModel& model, const Matrix& x);

// Back-projection from component space to band space.
Matrix pca_inverse(const PcaModel& model, const Matrix& y);

struct NmfModel {
    Matrix basis;  // [D][C], non-negative
    std::size_t rank = 0;
    double reconstruction_error = 0.0;  // Frobenius
    std::vector<double> error_trace;    // per recorded iteration
};

struct NmfFit {
    NmfModel model;
    Matrix weights;  // [N][D]
};

// Multiplicative-update NMF minimizing ||X - W B||_F. Stops at the iteration
// cap or when the relative error improvement drops below 1e-6.
NmfFit nmf_fit(const Matrix& x, std::size_t rank, std::size_t iters,
               std::uint64_t seed);

// Non-negative weights for new rows with the basis held fixed.
Matrix nmf_transform(const NmfModel& model, const Matrix& x,
                     std::size_t iters);

}  // namespace xrumap

#endif
