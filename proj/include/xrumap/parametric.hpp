#ifndef XRUMAP_PARAMETRIC_HPP
#define XRUMAP_PARAMETRIC_HPP

#include <cstdint>
#include <span>
#include <vector>

#include "xrumap/manifold.hpp"
#include "xrumap/matrix.hpp"

namespace xrumap {

// Feed-forward encoder: rectifier hidden layers, identity output.
struct EncoderNet {
    std::vector<std::size_t> layer_sizes;     // [C, h..., D]
    std::vector<Matrix> weights;              // per layer, [out][in]
    std::vector<std::vector<double>> biases;  // per layer, [out]

    std::size_t input_dim() const { return layer_sizes.front(); }
    std::size_t output_dim() const { return layer_sizes.back(); }
};

// Glorot-uniform weights, zero biases.
EncoderNet encoder_init(const std::vector<std::size_t>& layer_sizes,
                        std::uint64_t seed);

Matrix encoder_forward(const EncoderNet& net, const Matrix& x);

struct EdgeSample {
    std::uint32_t i = 0, j = 0;
    double weight = 0.0;
};

struct NegSample {
    std::uint32_t i = 0, r = 0;
};

struct EncoderGrads {
    std::vector<Matrix> weights;
    std::vector<std::vector<double>> biases;
};

EncoderGrads zero_grads(const EncoderNet& net);

// Edge cross-entropy under the low-dimensional similarity curve:
//   loss = -sum_edges w * log q_ij - sum_negatives log(1 - q_ir + 1e-7),
//   q = 1 / (1 + a ||f(x_i) - f(x_j)||^(2b)).
// Gradients (when requested) come from full backpropagation through both
// endpoints of every pair.
double encoder_loss_and_grad(const EncoderNet& net,
                             std::span<const EdgeSample> edges,
                             std::span<const NegSample> negatives,
                             const Matrix& x, double curve_a, double curve_b,
                             EncoderGrads* grads = nullptr);

struct TrainConfig {
    std::size_t batch_edges = 256;
    std::size_t epochs = 50;
    double step_size = 1e-3;  // Adam, beta1 0.9, beta2 0.999, eps 1e-8
    int negative_sample_rate = 5;
    std::uint64_t seed = 0;
    std::size_t target_dim = 2;
    std::vector<std::size_t> hidden = {64, 64};
};

// Frozen batch used for validation-loss tracing during training.
struct FrozenBatch {
    std::vector<EdgeSample> edges;
    std::vector<NegSample> negatives;
};

struct TrainResult {
    EncoderNet net;
    std::vector<double> batch_loss;
    std::vector<double> validation_loss;  // per batch, when a probe is given
};

// Minibatch training of the encoder against the fuzzy-set edges,
// weight-proportional edge sampling with uniform negatives. Deterministic
// for a fixed seed.
TrainResult train_parametric(const Matrix& x, const FuzzySet& fs,
                             const TrainConfig& cfg, double curve_a,
                             double curve_b,
                             const FrozenBatch* validation = nullptr);

// Deterministic frozen edge/negative batch for loss probes.
FrozenBatch make_frozen_batch(const FuzzySet& fs, std::size_t edge_count,
                              int negative_rate, std::uint64_t seed);

}  // namespace xrumap

#endif
