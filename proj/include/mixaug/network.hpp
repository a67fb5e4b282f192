#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "mixaug/augment.hpp"
#include "mixaug/rng.hpp"
#include "mixaug/tensor.hpp"

namespace mixaug {

// Input geometry and class count of the reference CNN. Height and width must
// be multiples of 4 (two 2x2 max-pool stages).
struct NetworkShape {
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t channels = 0;
    std::size_t classes = 0;

    std::size_t flat_size() const { return (height / 4) * (width / 4) * 16; }
    bool operator==(const NetworkShape&) const = default;
};

void validate_network_shape(const NetworkShape& shape);

// Parameters of the fixed topology:
// conv3x3(8) + relu + maxpool2 -> conv3x3(16) + relu + maxpool2 ->
// dense(64) + relu -> [inverted dropout] -> dense(K) -> softmax.
struct NetworkParams {
    NetworkShape shape;
    Tensor conv1_w;   // [3,3,C,8]
    Tensor conv1_b;   // [8]
    Tensor conv2_w;   // [3,3,8,16]
    Tensor conv2_b;   // [16]
    Tensor dense1_w;  // [64, flat]
    Tensor dense1_b;  // [64]
    Tensor dense2_w;  // [K, 64]
    Tensor dense2_b;  // [K]
};

// He-initialized weights, zero biases. Consumes a fixed number of draws for a
// given shape, so models compared under the same seed start identical.
NetworkParams init_params(const NetworkShape& shape, Rng& rng);

// One tensor per parameter tensor, shape-congruent.
struct GradientSet {
    Tensor conv1_w, conv1_b;
    Tensor conv2_w, conv2_b;
    Tensor dense1_w, dense1_b;
    Tensor dense2_w, dense2_b;
};

GradientSet zero_gradients(const NetworkParams& params);

// Fixed traversal order shared by the optimizer and checkpoint code.
std::vector<Tensor*> param_tensors(NetworkParams& params);
std::vector<const Tensor*> param_tensors(const NetworkParams& params);
std::vector<Tensor*> grad_tensors(GradientSet& grads);
std::vector<const Tensor*> grad_tensors(const GradientSet& grads);

enum class Mode { train, eval };

// Activations cached by forward for the matching backward pass.
struct ForwardTrace {
    Tensor input;        // [B,H,W,C]
    Tensor relu1;        // [B,H,W,8]
    Tensor pool1;        // [B,H/2,W/2,8]
    std::vector<std::uint32_t> pool1_idx;
    Tensor relu2;        // [B,H/2,W/2,16]
    Tensor pool2;        // [B,H/4,W/4,16]
    std::vector<std::uint32_t> pool2_idx;
    Tensor dense1_relu;  // [B,64]
    Tensor dropout_mask; // [B,64], entries 0 or 1/(1-rate); empty unless used
    Tensor dropped;      // [B,64]
    Tensor probs;        // [B,K], rows strictly positive, summing to 1

    std::size_t batch_size() const { return input.shape().empty() ? 0 : input.extent(0); }
};

// Runs the network on a batch. Train mode with dropout_rate > 0 draws one
// inverted-dropout mask entry per (sample, unit) from rng, in that order;
// eval mode consumes no randomness and applies no mask. Pixel values must lie
// in [0,1] and dropout_rate in [0,1).
ForwardTrace forward(const NetworkParams& params, const Tensor& images, Mode mode,
                     double dropout_rate, Rng& rng);

// Mean over the batch of -sum_k y_k*log(p_k) with probabilities clamped below
// at 1e-12. Rows of both arguments must sit on the probability simplex
// (tolerance 1e-6), else ArgumentError.
double cce_loss(const Tensor& probs, const Tensor& soft_labels);

// Total mixaugment loss, plain sum of the three cross-entropy terms:
// cce(probs_v, lambda*labels_i + (1-lambda)*labels_j)
//   + cce(probs_i, labels_i) + cce(probs_j, labels_j).
double mixaugment_loss_sum(const Tensor& probs_v, const Tensor& probs_i, const Tensor& probs_j,
                           const Tensor& labels_i, const Tensor& labels_j, double lambda);

// Same quantity computed through the factored logarithm form
// mean[-y_i.(log p_i + lambda*log p_v) - y_j.(log p_j + (1-lambda)*log p_v)].
double mixaugment_loss_factored(const Tensor& probs_v, const Tensor& probs_i,
                                const Tensor& probs_j, const Tensor& labels_i,
                                const Tensor& labels_j, double lambda);

// Exact gradient of mixaugment_loss_sum with respect to every parameter.
// The three terms accumulate additively; dropout masks recorded in the traces
// are reused as-is.
GradientSet backward(const NetworkParams& params, const ForwardTrace& trace_v,
                     const ForwardTrace& trace_i, const ForwardTrace& trace_j,
                     const Tensor& labels_i, const Tensor& labels_j, double lambda);

// Plain-CCE training step pieces: forward + backward on one batch.
std::pair<double, GradientSet> cce_loss_and_grad(const NetworkParams& params, const Batch& batch,
                                                 Mode mode, double dropout_rate, Rng& rng);

// Baseline Mixup mode: forward + backward through the virtual batch only.
std::pair<double, GradientSet> mixup_only_loss_and_grad(const NetworkParams& params,
                                                        const MixBatch& mix, Mode mode,
                                                        double dropout_rate, Rng& rng);

// Versioned binary checkpoint (magic, version, H/W/C/K header, then each
// parameter tensor as extent list + raw little-endian doubles). Round-trips
// byte-exactly.
void save_checkpoint(const NetworkParams& params, const std::string& path);
NetworkParams load_checkpoint(const std::string& path);

}  // namespace mixaug
