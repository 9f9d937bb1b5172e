#ifndef XRUMAP_MANIFOLD_HPP
#define XRUMAP_MANIFOLD_HPP

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "xrumap/matrix.hpp"

namespace xrumap {

inline constexpr double kMinSigma = 1e-3;
inline constexpr double kMaxSigma = 1e6;
inline constexpr double kWeightDropThreshold = 1e-9;
inline constexpr double kGradClip = 4.0;

struct UmapParams {
    int n_neighbors = 15;
    double min_dist = 0.1;
    double spread = 1.0;
    int target_dim = 2;
    int n_epochs = 200;
    double learning_rate = 1.0;  // decays linearly to 0
    int negative_sample_rate = 5;
    std::uint64_t seed = 0;
    std::string metric = "euclidean";
    std::string init = "spectral";  // or "random"
};

struct NeighborGraph {
    std::size_t n = 0;
    std::size_t k = 0;
    std::vector<std::uint32_t> indices;  // [N][k], no self-indices
    std::vector<double> distances;       // [N][k], ascending per row
    std::vector<double> rho;             // [N]
    std::vector<double> sigma;           // [N]

    std::uint32_t index(std::size_t i, std::size_t j) const {
        return indices[i * k + j];
    }
    double distance(std::size_t i, std::size_t j) const {
        return distances[i * k + j];
    }
};

struct FuzzyEdge {
    std::uint32_t i = 0, j = 0;  // i < j
    double weight = 0.0;         // in (0, 1]
};

// Symmetric membership graph stored once per unordered pair.
struct FuzzySet {
    std::size_t n = 0;
    std::vector<FuzzyEdge> edges;  // sorted by (i, j)
};

struct Embedding {
    Matrix coords;  // [N][D]
    UmapParams params;
    double curve_a = 0.0, curve_b = 0.0;
};

// Exact brute-force Euclidean k-NN; ties broken by lower index.
NeighborGraph knn_graph(const Matrix& x, int k, int threads = 1);

// Fills rho (smallest positive neighbor distance) and sigma solving
// sum_j exp(-max(0, d_ij - rho_i) / sigma_i) = log2(k) by bisection.
void calibrate_bandwidths(NeighborGraph& graph, int k);

// Directed memberships exp(-max(0, d - rho_i) / sigma_i), symmetrized by the
// probabilistic t-conorm A + A^T - A o A^T; weights <= 1e-9 dropped.
FuzzySet fuzzy_simplicial_set(const NeighborGraph& graph);

// Least-squares coefficients (a, b) of 1 / (1 + a d^(2b)) against the
// min_dist/spread target curve over 300 samples of d in [0, 3*spread].
std::pair<double, double> fit_curve(double min_dist, double spread);

enum class InitMode { Spectral, Random };

struct InitInfo {
    bool spectral_ok = false;
    std::size_t graph_components = 0;
    std::string warning;
};

// Spectral mode: nontrivial eigenvectors of the symmetric normalized graph
// Laplacian by power iteration with deflation, scaled to stddev 0.1 plus
// uniform noise 1e-4. Falls back to random (uniform in [-10, 10]^D) when the
// solver fails within 5N iterations or the graph splits into > 10 components.
Matrix initialize_embedding(const FuzzySet& fs, std::size_t d,
                            std::uint64_t seed, InitMode mode,
                            InitInfo* info = nullptr);

struct EmbeddingTrace {
    // Sampled cross-entropy on a frozen edge/negative set, one entry per epoch.
    std::vector<double> epoch_loss;
};

// Edge-sampled stochastic layout optimization (epoch-per-sample schedule,
// attractive + negative-sampled repulsive updates, gradient clip +-4, linear
// learning-rate decay). Sequential mode (threads == 1) is deterministic for a
// given seed; threads > 1 runs unsynchronized updates and is not.
Embedding optimize_embedding(const FuzzySet& fs, Matrix coords,
                             const UmapParams& params,
                             EmbeddingTrace* trace = nullptr, int threads = 1);

// Fitted model: everything umap_transform needs for out-of-sample projection.
struct UmapModel {
    UmapParams params;
    double curve_a = 0.0, curve_b = 0.0;
    Matrix train_data;  // [N][C]
    Matrix embedding;   // [N][D]
    NeighborGraph graph;
    FuzzySet fuzzy;     // kept in memory for parametric training; not serialized
    InitInfo init_info;
};

UmapModel umap_fit(const Matrix& x, const UmapParams& params,
                   EmbeddingTrace* trace = nullptr, int threads = 1);

// New points start at the membership-weighted mean of their k nearest
// training points' coordinates (exact duplicates snap to the matching
// training point), optionally refined by SGD with training coords frozen.
Matrix umap_transform(const UmapModel& model, const Matrix& x_new,
                      int refine_epochs = 0, std::uint64_t seed = 0,
                      int threads = 1);

}  // namespace xrumap

#endif
