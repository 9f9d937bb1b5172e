#include <algorithm>
#include <cmath>
#include <thread>

#include "xrumap/errors.hpp"
#include "xrumap/manifold.hpp"
#include "xrumap/rng.hpp"

namespace xrumap {

namespace {

struct DirectedEdges {
    std::vector<std::uint32_t> head, tail;
    std::vector<double> weight;
    double max_weight = 0.0;

    std::size_t size() const { return head.size(); }
};

DirectedEdges expand_directed(const FuzzySet& fs) {
    DirectedEdges e;
    e.head.reserve(fs.edges.size() * 2);
    e.tail.reserve(fs.edges.size() * 2);
    e.weight.reserve(fs.edges.size() * 2);
    for (const FuzzyEdge& edge : fs.edges) {
        e.head.push_back(edge.i);
        e.tail.push_back(edge.j);
        e.weight.push_back(edge.weight);
        e.head.push_back(edge.j);
        e.tail.push_back(edge.i);
        e.weight.push_back(edge.weight);
        e.max_weight = std::max(e.max_weight, edge.weight);
    }
    return e;
}

inline double clip_grad(double v) {
    return std::clamp(v, -kGradClip, kGradClip);
}

// Frozen evaluation set for the per-epoch sampled cross-entropy trace.
struct LossProbe {
    std::vector<std::size_t> edge_ids;
    std::vector<std::uint32_t> negatives;  // negative targets per edge
    int negatives_per_edge = 0;

    double evaluate(const Matrix& coords, const DirectedEdges& edges,
                    double a, double b) const {
        const std::size_t d = coords.cols();
        double loss = 0.0;
        for (std::size_t m = 0; m < edge_ids.size(); ++m) {
            const std::size_t e = edge_ids[m];
            const std::uint32_t i = edges.head[e];
            const std::uint32_t j = edges.tail[e];
            double s = 0.0;
            for (std::size_t c = 0; c < d; ++c) {
                const double diff = coords(i, c) - coords(j, c);
                s += diff * diff;
            }
            const double q = 1.0 / (1.0 + a * std::pow(s, b));
            loss -= edges.weight[e] * std::log(q + 1e-12);
            // Negative terms carry the edge weight as well: the sampler
            // draws an edge's negatives at the edge's own frequency.
            for (int r = 0; r < negatives_per_edge; ++r) {
                const std::uint32_t neg =
                    negatives[m * negatives_per_edge + r];
                if (neg == i) continue;
                double sn = 0.0;
                for (std::size_t c = 0; c < d; ++c) {
                    const double diff = coords(i, c) - coords(neg, c);
                    sn += diff * diff;
                }
                const double qn = 1.0 / (1.0 + a * std::pow(sn, b));
                loss -= edges.weight[e] * std::log(1.0 - qn + 1e-12);
            }
        }
        return loss / static_cast<double>(edge_ids.size());
    }
};

LossProbe make_probe(const DirectedEdges& edges, std::size_t n, Rng rng,
                     int negatives_per_edge) {
    LossProbe probe;
    probe.negatives_per_edge = negatives_per_edge;
    const std::size_t count = std::min<std::size_t>(2000, edges.size());
    probe.edge_ids.resize(count);
    for (std::size_t m = 0; m < count; ++m)
        probe.edge_ids[m] = rng.below(edges.size());
    probe.negatives.resize(count * negatives_per_edge);
    for (auto& v : probe.negatives)
        v = static_cast<std::uint32_t>(rng.below(n));
    return probe;
}

struct SgdSchedule {
    std::vector<double> epochs_per_sample;
    std::vector<double> epoch_of_next_sample;
    std::vector<double> epochs_per_negative;
    std::vector<double> epoch_of_next_negative;
};

SgdSchedule make_schedule(const DirectedEdges& edges, int negative_rate) {
    SgdSchedule s;
    const std::size_t m = edges.size();
    s.epochs_per_sample.resize(m);
    for (std::size_t e = 0; e < m; ++e)
        s.epochs_per_sample[e] = edges.max_weight / edges.weight[e];
    s.epoch_of_next_sample = s.epochs_per_sample;
    s.epochs_per_negative.resize(m);
    for (std::size_t e = 0; e < m; ++e)
        s.epochs_per_negative[e] =
            s.epochs_per_sample[e] / std::max(1, negative_rate);
    s.epoch_of_next_negative = s.epochs_per_negative;
    return s;
}

// One epoch of attract/repulse updates over a contiguous edge range.
void run_edge_range(Matrix& coords, const DirectedEdges& edges,
                    SgdSchedule& sched, std::size_t lo, std::size_t hi,
                    double epoch, double alpha, double a, double b,
                    std::size_t n, Rng& rng) {
    const std::size_t d = coords.cols();
    for (std::size_t e = lo; e < hi; ++e) {
        if (sched.epoch_of_next_sample[e] > epoch) continue;

        const std::uint32_t i = edges.head[e];
        const std::uint32_t j = edges.tail[e];
        double s = 0.0;
        for (std::size_t c = 0; c < d; ++c) {
            const double diff = coords(i, c) - coords(j, c);
            s += diff * diff;
        }
        if (s > 0.0) {
            const double grad_coeff = (-2.0 * a * b * std::pow(s, b - 1.0)) /
                                      (a * std::pow(s, b) + 1.0);
            for (std::size_t c = 0; c < d; ++c) {
                const double g =
                    clip_grad(grad_coeff * (coords(i, c) - coords(j, c)));
                coords(i, c) += alpha * g;
                coords(j, c) -= alpha * g;
            }
        }
        sched.epoch_of_next_sample[e] += sched.epochs_per_sample[e];

        const int n_neg = std::max(
            0, static_cast<int>((epoch - sched.epoch_of_next_negative[e]) /
                                sched.epochs_per_negative[e]));
        for (int r = 0; r < n_neg; ++r) {
            const std::uint32_t other =
                static_cast<std::uint32_t>(rng.below(n));
            if (other == i) continue;
            double sn = 0.0;
            for (std::size_t c = 0; c < d; ++c) {
                const double diff = coords(i, c) - coords(other, c);
                sn += diff * diff;
            }
            const double grad_coeff =
                2.0 * b / ((0.001 + sn) * (a * std::pow(sn, b) + 1.0));
            for (std::size_t c = 0; c < d; ++c) {
                const double g =
                    clip_grad(grad_coeff * (coords(i, c) - coords(other, c)));
                coords(i, c) += alpha * g;
            }
        }
        sched.epoch_of_next_negative[e] +=
            n_neg * sched.epochs_per_negative[e];
    }
}

void check_finite_coords(const Matrix& coords, int epoch) {
    for (std::size_t i = 0; i < coords.size(); ++i)
        if (!std::isfinite(coords.data()[i]))
            throw NumericalError(
                "optimize_embedding: non-finite coordinate at epoch " +
                std::to_string(epoch));
}

}  // namespace

Embedding optimize_embedding(const FuzzySet& fs, Matrix coords,
                             const UmapParams& params, EmbeddingTrace* trace,
                             int threads) {
    if (coords.rows() != fs.n)
        throw DataError("optimize_embedding: coords row count mismatch");
    if (params.n_neighbors < 2)
        throw DataError("optimize_embedding: n_neighbors must be >= 2");
    if (params.min_dist >= 3.0 * params.spread)
        throw DataError("optimize_embedding: min_dist must be < 3*spread");

    const auto [a, b] = fit_curve(params.min_dist, params.spread);
    Embedding out;
    out.params = params;
    out.curve_a = a;
    out.curve_b = b;

    if (params.n_epochs <= 0 || fs.edges.empty()) {
        out.coords = std::move(coords);
        return out;
    }

    const DirectedEdges edges = expand_directed(fs);
    SgdSchedule sched = make_schedule(edges, params.negative_sample_rate);
    Rng root(params.seed);
    Rng sgd_rng = root.fork(1);
    LossProbe probe;
    if (trace) {
        trace->epoch_loss.clear();
        probe = make_probe(edges, fs.n, root.fork(2),
                           std::max(1, params.negative_sample_rate));
    }

    const int n_epochs = params.n_epochs;
    for (int epoch = 0; epoch < n_epochs; ++epoch) {
        const double alpha =
            params.learning_rate *
            (1.0 - static_cast<double>(epoch) / static_cast<double>(n_epochs));

        if (threads <= 1) {
            run_edge_range(coords, edges, sched, 0, edges.size(),
                           static_cast<double>(epoch), alpha, a, b, fs.n,
                           sgd_rng);
        } else {
            // Asynchronous mode: unsynchronized concurrent updates; output
            // depends on interleaving and is documented as nondeterministic.
            const std::size_t nt =
                std::min<std::size_t>(threads, edges.size());
            const std::size_t chunk = (edges.size() + nt - 1) / nt;
            std::vector<std::thread> pool;
            std::vector<Rng> rngs;
            rngs.reserve(nt);
            for (std::size_t t = 0; t < nt; ++t)
                rngs.push_back(sgd_rng.fork(1000 + epoch * nt + t));
            for (std::size_t t = 0; t < nt; ++t) {
                const std::size_t lo = t * chunk;
                const std::size_t hi = std::min(edges.size(), lo + chunk);
                if (lo >= hi) break;
                pool.emplace_back([&, lo, hi, t] {
                    run_edge_range(coords, edges, sched, lo, hi,
                                   static_cast<double>(epoch), alpha, a, b,
                                   fs.n, rngs[t]);
                });
            }
            for (auto& th : pool) th.join();
        }

        check_finite_coords(coords, epoch);
        if (trace)
            trace->epoch_loss.push_back(probe.evaluate(coords, edges, a, b));
    }

    out.coords = std::move(coords);
    return out;
}

}  // namespace xrumap
