#include <algorithm>
#include <cmath>
#include <thread>

#include "xrumap/errors.hpp"
#include "xrumap/manifold.hpp"
#include "xrumap/rng.hpp"

namespace xrumap {

namespace {

void validate_params(const UmapParams& p) {
    if (p.n_neighbors < 2) throw ConfigError("umap: n_neighbors must be >= 2");
    if (p.target_dim < 1) throw ConfigError("umap: target_dim must be >= 1");
    if (p.min_dist < 0.0 || p.spread <= 0.0 ||
        p.min_dist >= 3.0 * p.spread)
        throw ConfigError("umap: require 0 <= min_dist < 3*spread");
    if (p.negative_sample_rate < 1)
        throw ConfigError("umap: negative_sample_rate must be >= 1");
    if (p.metric != "euclidean")
        throw ConfigError("umap: unsupported metric '" + p.metric + "'");
    if (p.init != "spectral" && p.init != "random")
        throw ConfigError("umap: init must be 'spectral' or 'random'");
}

// k nearest training rows for each query row (query points are not members
// of the training set, so no self-exclusion).
void knn_query(const Matrix& train, const Matrix& query, std::size_t k,
               std::vector<std::uint32_t>& indices,
               std::vector<double>& distances, int threads) {
    const std::size_t n = train.rows(), m = query.rows(), c = train.cols();
    indices.resize(m * k);
    distances.resize(m * k);

    const auto run_rows = [&](std::size_t lo, std::size_t hi) {
        std::vector<std::pair<double, std::uint32_t>> cand(n);
        for (std::size_t q = lo; q < hi; ++q) {
            for (std::size_t j = 0; j < n; ++j) {
                double s = 0.0;
                for (std::size_t f = 0; f < c; ++f) {
                    const double d = query(q, f) - train(j, f);
                    s += d * d;
                }
                cand[j] = {s, static_cast<std::uint32_t>(j)};
            }
            std::partial_sort(cand.begin(), cand.begin() + k, cand.end());
            for (std::size_t t = 0; t < k; ++t) {
                indices[q * k + t] = cand[t].second;
                distances[q * k + t] = std::sqrt(cand[t].first);
            }
        }
    };

    if (threads <= 1 || m < 64) {
        run_rows(0, m);
    } else {
        const std::size_t nt = std::min<std::size_t>(threads, m);
        const std::size_t chunk = (m + nt - 1) / nt;
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < nt; ++t) {
            const std::size_t lo = t * chunk, hi = std::min(m, lo + chunk);
            if (lo >= hi) break;
            pool.emplace_back([&, lo, hi] { run_rows(lo, hi); });
        }
        for (auto& th : pool) th.join();
    }
}

}  // namespace

UmapModel umap_fit(const Matrix& x, const UmapParams& params,
                   EmbeddingTrace* trace, int threads) {
    validate_params(params);
    if (x.rows() <= static_cast<std::size_t>(params.n_neighbors))
        throw DataError("umap_fit: need more rows than n_neighbors");

    UmapModel model;
    model.params = params;
    model.train_data = x;
    model.graph = knn_graph(x, params.n_neighbors, threads);
    calibrate_bandwidths(model.graph, params.n_neighbors);
    model.fuzzy = fuzzy_simplicial_set(model.graph);

    const InitMode mode =
        params.init == "random" ? InitMode::Random : InitMode::Spectral;
    Matrix coords = initialize_embedding(
        model.fuzzy, static_cast<std::size_t>(params.target_dim), params.seed,
        mode, &model.init_info);

    Embedding emb =
        optimize_embedding(model.fuzzy, std::move(coords), params, trace,
                           threads);
    model.curve_a = emb.curve_a;
    model.curve_b = emb.curve_b;
    model.embedding = std::move(emb.coords);
    return model;
}

Matrix umap_transform(const UmapModel& model, const Matrix& x_new,
                      int refine_epochs, std::uint64_t seed, int threads) {
    if (x_new.cols() != model.train_data.cols())
        throw DataError("umap_transform: column count does not match model");
    if (x_new.rows() == 0) return Matrix(0, model.embedding.cols());

    const std::size_t k = model.graph.k;
    const std::size_t m = x_new.rows();
    const std::size_t d = model.embedding.cols();
    const std::size_t n_train = model.train_data.rows();

    std::vector<std::uint32_t> indices;
    std::vector<double> distances;
    knn_query(model.train_data, x_new, k, indices, distances, threads);

    // Smoothed-kNN calibration for the new points, same contract as training.
    NeighborGraph q;
    q.n = m;
    q.k = k;
    q.indices = indices;
    q.distances = distances;
    calibrate_bandwidths(q, static_cast<int>(k));

    Matrix coords(m, d);
    std::vector<double> memb(k);
    for (std::size_t i = 0; i < m; ++i) {
        // Exact duplicates of training points reuse their coordinates.
        if (q.distance(i, 0) == 0.0) {
            std::size_t zeros = 0;
            for (std::size_t t = 0; t < k && q.distance(i, t) == 0.0; ++t)
                ++zeros;
            for (std::size_t c = 0; c < d; ++c) {
                double s = 0.0;
                for (std::size_t t = 0; t < zeros; ++t)
                    s += model.embedding(q.index(i, t), c);
                coords(i, c) = s / static_cast<double>(zeros);
            }
            continue;
        }
        double total = 0.0;
        for (std::size_t t = 0; t < k; ++t) {
            const double diff = q.distance(i, t) - q.rho[i];
            memb[t] = diff > 0.0 ? std::exp(-diff / q.sigma[i]) : 1.0;
            total += memb[t];
        }
        for (std::size_t c = 0; c < d; ++c) {
            double s = 0.0;
            for (std::size_t t = 0; t < k; ++t)
                s += memb[t] * model.embedding(q.index(i, t), c);
            coords(i, c) = s / total;
        }
    }

    if (refine_epochs <= 0) return coords;

    // SGD refinement against frozen training coordinates. Each new point is
    // independent, so per-point streams keep any schedule deterministic.
    const double a = model.curve_a, b = model.curve_b;
    const int neg_rate = std::max(1, model.params.negative_sample_rate);
    Rng root(seed);

    const auto refine_point = [&](std::size_t i) {
        Rng rng = root.fork(i);
        std::vector<double> weight(k), eps(k), next(k), eps_neg(k), next_neg(k);
        double max_w = 0.0;
        for (std::size_t t = 0; t < k; ++t) {
            const double diff = q.distance(i, t) - q.rho[i];
            weight[t] = diff > 0.0 ? std::exp(-diff / q.sigma[i]) : 1.0;
            max_w = std::max(max_w, weight[t]);
        }
        for (std::size_t t = 0; t < k; ++t) {
            eps[t] = max_w / weight[t];
            next[t] = eps[t];
            eps_neg[t] = eps[t] / neg_rate;
            next_neg[t] = eps_neg[t];
        }
        for (int epoch = 0; epoch < refine_epochs; ++epoch) {
            const double alpha = model.params.learning_rate *
                                 (1.0 - static_cast<double>(epoch) /
                                            static_cast<double>(refine_epochs));
            for (std::size_t t = 0; t < k; ++t) {
                if (next[t] > epoch) continue;
                const std::uint32_t j = q.index(i, t);
                double s = 0.0;
                for (std::size_t c = 0; c < d; ++c) {
                    const double diff = coords(i, c) - model.embedding(j, c);
                    s += diff * diff;
                }
                if (s > 0.0) {
                    const double g0 = (-2.0 * a * b * std::pow(s, b - 1.0)) /
                                      (a * std::pow(s, b) + 1.0);
                    for (std::size_t c = 0; c < d; ++c)
                        coords(i, c) += alpha * std::clamp(
                            g0 * (coords(i, c) - model.embedding(j, c)),
                            -kGradClip, kGradClip);
                }
                next[t] += eps[t];
                const int n_neg = std::max(
                    0, static_cast<int>((epoch - next_neg[t]) / eps_neg[t]));
                for (int r = 0; r < n_neg; ++r) {
                    const std::size_t other = rng.below(n_train);
                    double sn = 0.0;
                    for (std::size_t c = 0; c < d; ++c) {
                        const double diff =
                            coords(i, c) - model.embedding(other, c);
                        sn += diff * diff;
                    }
                    const double g0 = 2.0 * b / ((0.001 + sn) *
                                                 (a * std::pow(sn, b) + 1.0));
                    for (std::size_t c = 0; c < d; ++c)
                        coords(i, c) += alpha * std::clamp(
                            g0 * (coords(i, c) - model.embedding(other, c)),
                            -kGradClip, kGradClip);
                }
                next_neg[t] += n_neg * eps_neg[t];
            }
        }
    };

    if (threads <= 1 || m < 64) {
        for (std::size_t i = 0; i < m; ++i) refine_point(i);
    } else {
        const std::size_t nt = std::min<std::size_t>(threads, m);
        const std::size_t chunk = (m + nt - 1) / nt;
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < nt; ++t) {
            const std::size_t lo = t * chunk, hi = std::min(m, lo + chunk);
            if (lo >= hi) break;
            pool.emplace_back([&, lo, hi] {
                for (std::size_t i = lo; i < hi; ++i) refine_point(i);
            });
        }
        for (auto& th : pool) th.join();
    }

    for (std::size_t i = 0; i < coords.size(); ++i)
        if (!std::isfinite(coords.data()[i]))
            throw NumericalError("umap_transform: non-finite coordinate");
    return coords;
}

}  // namespace xrumap
