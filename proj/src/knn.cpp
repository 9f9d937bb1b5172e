#include <algorithm>
#include <cmath>
#include <thread>

#include "xrumap/errors.hpp"
#include "xrumap/manifold.hpp"

namespace xrumap {

namespace {

void knn_rows(const Matrix& x, std::size_t row_begin, std::size_t row_end,
              int k, NeighborGraph& graph) {
    const std::size_t n = x.rows();
    const std::size_t c = x.cols();
    // (distance^2, index) candidates; ties resolved by lower index.
    std::vector<std::pair<double, std::uint32_t>> cand;
    cand.reserve(n - 1);
    for (std::size_t i = row_begin; i < row_end; ++i) {
        cand.clear();
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            double s = 0.0;
            for (std::size_t f = 0; f < c; ++f) {
                const double d = x(i, f) - x(j, f);
                s += d * d;
            }
            cand.emplace_back(s, static_cast<std::uint32_t>(j));
        }
        std::partial_sort(cand.begin(), cand.begin() + k, cand.end());
        for (int m = 0; m < k; ++m) {
            graph.indices[i * k + m] = cand[m].second;
            graph.distances[i * k + m] = std::sqrt(cand[m].first);
        }
    }
}

}  // namespace

NeighborGraph knn_graph(const Matrix& x, int k, int threads) {
    const std::size_t n = x.rows();
    if (k < 2) throw DataError("knn_graph: k must be >= 2");
    if (static_cast<std::size_t>(k) >= n)
        throw DataError("knn_graph: k must be smaller than the point count");
    for (std::size_t i = 0; i < x.size(); ++i)
        if (!std::isfinite(x.data()[i]))
            throw DataError("knn_graph: non-finite input row");

    NeighborGraph graph;
    graph.n = n;
    graph.k = static_cast<std::size_t>(k);
    graph.indices.resize(n * graph.k);
    graph.distances.resize(n * graph.k);

    // Per-query results are independent, so the output is identical for any
    // thread count.
    if (threads <= 1 || n < 256) {
        knn_rows(x, 0, n, k, graph);
    } else {
        const std::size_t nt = std::min<std::size_t>(threads, n);
        std::vector<std::thread> pool;
        pool.reserve(nt);
        const std::size_t chunk = (n + nt - 1) / nt;
        for (std::size_t t = 0; t < nt; ++t) {
            const std::size_t lo = t * chunk;
            const std::size_t hi = std::min(n, lo + chunk);
            if (lo >= hi) break;
            pool.emplace_back(
                [&, lo, hi] { knn_rows(x, lo, hi, k, graph); });
        }
        for (auto& th : pool) th.join();
    }
    return graph;
}

void calibrate_bandwidths(NeighborGraph& graph, int k) {
    if (graph.k != static_cast<std::size_t>(k))
        throw DataError("calibrate_bandwidths: k does not match graph");
    const double target = std::log2(static_cast<double>(k));
    graph.rho.assign(graph.n, 0.0);
    graph.sigma.assign(graph.n, kMinSigma);

    for (std::size_t i = 0; i < graph.n; ++i) {
        double rho = 0.0;
        for (std::size_t m = 0; m < graph.k; ++m) {
            const double d = graph.distance(i, m);
            if (d > 0.0) {
                rho = d;
                break;
            }
        }
        graph.rho[i] = rho;

        const auto weight_sum = [&](double sigma) {
            double s = 0.0;
            for (std::size_t m = 0; m < graph.k; ++m) {
                const double d = graph.distance(i, m) - rho;
                s += d > 0.0 ? std::exp(-d / sigma) : 1.0;
            }
            return s;
        };

        // weight_sum is increasing in sigma, from the count of d <= rho up
        // to k; bisect, then clamp to [kMinSigma, kMaxSigma].
        double lo = 1e-12, hi = kMaxSigma;
        if (weight_sum(lo) >= target) {
            graph.sigma[i] = kMinSigma;
            continue;
        }
        if (weight_sum(hi) < target) {
            graph.sigma[i] = kMaxSigma;
            continue;
        }
        double mid = 0.5 * (lo + hi);
        for (int it = 0; it < 64; ++it) {
            mid = 0.5 * (lo + hi);
            if (hi - lo < 1e-5) break;
            if (weight_sum(mid) >= target)
                hi = mid;
            else
                lo = mid;
        }
        graph.sigma[i] = std::clamp(mid, kMinSigma, kMaxSigma);
    }
}

}  // namespace xrumap
