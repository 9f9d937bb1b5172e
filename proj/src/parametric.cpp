#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "xrumap/errors.hpp"
#include "xrumap/parametric.hpp"
#include "xrumap/rng.hpp"

namespace xrumap {

namespace {

void validate_net(const EncoderNet& net) {
    if (net.layer_sizes.size() < 2)
        throw DataError("encoder: need at least input and output layers");
    if (net.weights.size() != net.layer_sizes.size() - 1 ||
        net.biases.size() != net.weights.size())
        throw DataError("encoder: layer count mismatch");
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        if (net.weights[l].rows() != net.layer_sizes[l + 1] ||
            net.weights[l].cols() != net.layer_sizes[l] ||
            net.biases[l].size() != net.layer_sizes[l + 1])
            throw DataError("encoder: inconsistent layer shapes");
    }
}

// Forward pass for one sample, caching post-activation values per layer
// (activations[0] is the input row).
void forward_cached(const EncoderNet& net, std::span<const double> row,
                    std::vector<std::vector<double>>& activations) {
    const std::size_t n_layers = net.weights.size();
    activations.resize(n_layers + 1);
    activations[0].assign(row.begin(), row.end());
    for (std::size_t l = 0; l < n_layers; ++l) {
        const Matrix& w = net.weights[l];
        const auto& prev = activations[l];
        auto& out = activations[l + 1];
        out.assign(w.rows(), 0.0);
        const bool hidden = l != n_layers - 1;
        for (std::size_t o = 0; o < w.rows(); ++o) {
            double s = net.biases[l][o];
            for (std::size_t in = 0; in < w.cols(); ++in)
                s += w(o, in) * prev[in];
            out[o] = hidden && s < 0.0 ? 0.0 : s;
        }
    }
}

}  // namespace

EncoderNet encoder_init(const std::vector<std::size_t>& layer_sizes,
                        std::uint64_t seed) {
    if (layer_sizes.size() < 2)
        throw DataError("encoder_init: need at least input and output sizes");
    EncoderNet net;
    net.layer_sizes = layer_sizes;
    Rng rng(seed);
    for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
        const std::size_t fan_in = layer_sizes[l];
        const std::size_t fan_out = layer_sizes[l + 1];
        const double bound =
            std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        Matrix w(fan_out, fan_in);
        for (std::size_t i = 0; i < w.size(); ++i)
            w.data()[i] = rng.uniform(-bound, bound);
        net.weights.push_back(std::move(w));
        net.biases.emplace_back(fan_out, 0.0);
    }
    return net;
}

Matrix encoder_forward(const EncoderNet& net, const Matrix& x) {
    validate_net(net);
    if (x.cols() != net.input_dim())
        throw DataError("encoder_forward: column count does not match input");
    Matrix out(x.rows(), net.output_dim());
    std::vector<std::vector<double>> acts;
    for (std::size_t i = 0; i < x.rows(); ++i) {
        forward_cached(net, x.row(i), acts);
        const auto& y = acts.back();
        for (std::size_t c = 0; c < y.size(); ++c) out(i, c) = y[c];
    }
    return out;
}

EncoderGrads zero_grads(const EncoderNet& net) {
    EncoderGrads g;
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        g.weights.emplace_back(net.weights[l].rows(), net.weights[l].cols());
        g.biases.emplace_back(net.biases[l].size(), 0.0);
    }
    return g;
}

double encoder_loss_and_grad(const EncoderNet& net,
                             std::span<const EdgeSample> edges,
                             std::span<const NegSample> negatives,
                             const Matrix& x, double curve_a, double curve_b,
                             EncoderGrads* grads) {
    validate_net(net);
    if (x.cols() != net.input_dim())
        throw DataError("encoder_loss_and_grad: column mismatch");
    if (grads) *grads = zero_grads(net);
    if (edges.empty() && negatives.empty()) return 0.0;

    const double a = curve_a, b = curve_b;
    const std::size_t d = net.output_dim();

    // Forward each referenced point once.
    std::unordered_map<std::uint32_t, std::size_t> slot;
    std::vector<std::uint32_t> points;
    const auto touch = [&](std::uint32_t p) {
        if (p >= x.rows())
            throw DataError("encoder_loss_and_grad: point index out of range");
        if (slot.emplace(p, points.size()).second) points.push_back(p);
    };
    for (const auto& e : edges) {
        touch(e.i);
        touch(e.j);
    }
    for (const auto& g : negatives) {
        touch(g.i);
        touch(g.r);
    }

    std::vector<std::vector<std::vector<double>>> acts(points.size());
    for (std::size_t p = 0; p < points.size(); ++p)
        forward_cached(net, x.row(points[p]), acts[p]);

    // Embedding-space gradients accumulated per point.
    std::vector<std::vector<double>> dy(points.size(),
                                        std::vector<double>(d, 0.0));
    double loss = 0.0;

    const auto pair_term = [&](std::uint32_t pi, std::uint32_t pj,
                               bool positive, double w) {
        const std::size_t si = slot[pi], sj = slot[pj];
        const auto& yi = acts[si].back();
        const auto& yj = acts[sj].back();
        double s = 0.0;
        for (std::size_t c = 0; c < d; ++c) {
            const double diff = yi[c] - yj[c];
            s += diff * diff;
        }
        const double sb = std::pow(s, b);
        double dl_ds = 0.0;
        if (positive) {
            loss += w * std::log1p(a * sb);
            dl_ds = w * a * b * std::pow(std::max(s, 1e-12), b - 1.0) /
                    (1.0 + a * sb);
        } else {
            const double q = 1.0 / (1.0 + a * sb);
            const double u = 1.0 - q + 1e-7;
            loss += -std::log(u);
            const double dq_ds = -a * b *
                                 std::pow(std::max(s, 1e-12), b - 1.0) * q * q;
            dl_ds = dq_ds / u;
        }
        if (grads) {
            for (std::size_t c = 0; c < d; ++c) {
                const double g = dl_ds * 2.0 * (yi[c] - yj[c]);
                dy[si][c] += g;
                dy[sj][c] -= g;
            }
        }
    };

    for (const auto& e : edges) pair_term(e.i, e.j, true, e.weight);
    for (const auto& g : negatives) {
        if (g.i == g.r) continue;  // self pairs carry no signal
        pair_term(g.i, g.r, false, 1.0);
    }

    if (grads) {
        const std::size_t n_layers = net.weights.size();
        std::vector<double> delta, prev_delta;
        for (std::size_t p = 0; p < points.size(); ++p) {
            delta = dy[p];
            for (std::size_t l = n_layers; l-- > 0;) {
                const Matrix& w = net.weights[l];
                const auto& inputs = acts[p][l];
                Matrix& dw = grads->weights[l];
                auto& db = grads->biases[l];
                for (std::size_t o = 0; o < w.rows(); ++o) {
                    const double dv = delta[o];
                    if (dv == 0.0) continue;
                    db[o] += dv;
                    for (std::size_t in = 0; in < w.cols(); ++in)
                        dw(o, in) += dv * inputs[in];
                }
                if (l == 0) break;
                prev_delta.assign(w.cols(), 0.0);
                for (std::size_t o = 0; o < w.rows(); ++o) {
                    const double dv = delta[o];
                    if (dv == 0.0) continue;
                    for (std::size_t in = 0; in < w.cols(); ++in)
                        prev_delta[in] += dv * w(o, in);
                }
                // Rectifier derivative: zero wherever the layer output was
                // clamped at zero.
                const auto& h = acts[p][l];
                for (std::size_t in = 0; in < w.cols(); ++in)
                    if (h[in] <= 0.0) prev_delta[in] = 0.0;
                delta.swap(prev_delta);
            }
        }
    }
    return loss;
}

FrozenBatch make_frozen_batch(const FuzzySet& fs, std::size_t edge_count,
                              int negative_rate, std::uint64_t seed) {
    if (fs.edges.empty()) throw DataError("make_frozen_batch: no edges");
    Rng rng(seed);
    FrozenBatch batch;
    const std::size_t count = std::min(edge_count, fs.edges.size() * 2);
    batch.edges.reserve(count);
    for (std::size_t m = 0; m < count; ++m) {
        const FuzzyEdge& e = fs.edges[rng.below(fs.edges.size())];
        const bool flip = (rng.next() & 1) != 0;
        batch.edges.push_back({flip ? e.j : e.i, flip ? e.i : e.j, e.weight});
        for (int r = 0; r < negative_rate; ++r)
            batch.negatives.push_back(
                {batch.edges.back().i,
                 static_cast<std::uint32_t>(rng.below(fs.n))});
    }
    return batch;
}

namespace {

struct AdamState {
    EncoderGrads m, v;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    std::size_t t = 0;

    explicit AdamState(const EncoderNet& net)
        : m(zero_grads(net)), v(zero_grads(net)) {}

    void step(EncoderNet& net, const EncoderGrads& g, double lr) {
        ++t;
        const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
        const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
        for (std::size_t l = 0; l < net.weights.size(); ++l) {
            for (std::size_t i = 0; i < net.weights[l].size(); ++i) {
                double& mi = m.weights[l].data()[i];
                double& vi = v.weights[l].data()[i];
                const double gi = g.weights[l].data()[i];
                mi = beta1 * mi + (1.0 - beta1) * gi;
                vi = beta2 * vi + (1.0 - beta2) * gi * gi;
                net.weights[l].data()[i] -=
                    lr * (mi / bc1) / (std::sqrt(vi / bc2) + eps);
            }
            for (std::size_t i = 0; i < net.biases[l].size(); ++i) {
                double& mi = m.biases[l][i];
                double& vi = v.biases[l][i];
                const double gi = g.biases[l][i];
                mi = beta1 * mi + (1.0 - beta1) * gi;
                vi = beta2 * vi + (1.0 - beta2) * gi * gi;
                net.biases[l][i] -=
                    lr * (mi / bc1) / (std::sqrt(vi / bc2) + eps);
            }
        }
    }
};

}  // namespace

TrainResult train_parametric(const Matrix& x, const FuzzySet& fs,
                             const TrainConfig& cfg, double curve_a,
                             double curve_b, const FrozenBatch* validation) {
    if (fs.n != x.rows())
        throw DataError("train_parametric: fuzzy set does not match data");
    if (fs.edges.empty()) throw DataError("train_parametric: no edges");
    if (cfg.batch_edges == 0)
        throw ConfigError("train_parametric: batch_edges must be positive");
    if (cfg.target_dim == 0)
        throw ConfigError("train_parametric: target_dim must be positive");

    std::vector<std::size_t> sizes;
    sizes.push_back(x.cols());
    for (std::size_t h : cfg.hidden) sizes.push_back(h);
    sizes.push_back(cfg.target_dim);

    Rng root(cfg.seed);
    TrainResult result;
    result.net = encoder_init(sizes, root.fork(0).next());
    if (cfg.epochs == 0) return result;

    // Weight-proportional sampling over the directed edge expansion.
    std::vector<double> cumulative;
    cumulative.reserve(fs.edges.size());
    double total = 0.0;
    for (const FuzzyEdge& e : fs.edges) {
        total += e.weight;
        cumulative.push_back(total);
    }

    Rng sampler = root.fork(1);
    const std::size_t batches_per_epoch =
        std::max<std::size_t>(1, fs.edges.size() * 2 / cfg.batch_edges);
    const int neg_rate = std::max(1, cfg.negative_sample_rate);

    std::vector<EdgeSample> edges(cfg.batch_edges);
    std::vector<NegSample> negatives(cfg.batch_edges * neg_rate);
    EncoderGrads grads;
    AdamState adam(result.net);

    std::size_t batch_index = 0;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (std::size_t bt = 0; bt < batches_per_epoch; ++bt, ++batch_index) {
            for (std::size_t m = 0; m < cfg.batch_edges; ++m) {
                const double u = sampler.uniform() * total;
                const std::size_t e = static_cast<std::size_t>(
                    std::lower_bound(cumulative.begin(), cumulative.end(), u) -
                    cumulative.begin());
                const FuzzyEdge& edge = fs.edges[std::min(
                    e, fs.edges.size() - 1)];
                const bool flip = (sampler.next() & 1) != 0;
                edges[m] = {flip ? edge.j : edge.i, flip ? edge.i : edge.j,
                            edge.weight};
                for (int r = 0; r < neg_rate; ++r)
                    negatives[m * neg_rate + r] = {
                        edges[m].i,
                        static_cast<std::uint32_t>(sampler.below(fs.n))};
            }

            const double loss = encoder_loss_and_grad(
                result.net, edges, negatives, x, curve_a, curve_b, &grads);
            if (!std::isfinite(loss))
                throw NumericalError(
                    "train_parametric: non-finite loss at batch " +
                    std::to_string(batch_index));
            result.batch_loss.push_back(loss);
            adam.step(result.net, grads, cfg.step_size);

            if (validation) {
                const double val = encoder_loss_and_grad(
                    result.net, validation->edges, validation->negatives, x,
                    curve_a, curve_b, nullptr);
                result.validation_loss.push_back(val);
            }
        }
    }
    return result;
}

}  // namespace xrumap
