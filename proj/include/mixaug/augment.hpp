#pragma once

#include <vector>

#include "mixaug/rng.hpp"
#include "mixaug/tensor.hpp"

namespace mixaug {

// One image with its label: pixels in [0,1] shaped [H,W,C], label a one-hot
// or convex soft vector over K classes.
struct LabeledImage {
    Tensor pixels;
    Tensor label;
};

// Validates and assembles a LabeledImage (pixel range, label simplex).
LabeledImage make_labeled_image(Tensor pixels, Tensor label);

// Row-stacked images [B,H,W,C] with labels [B,K].
struct Batch {
    Tensor images;
    Tensor labels;

    std::size_t size() const { return images.shape().empty() ? 0 : images.extent(0); }
    std::size_t classes() const { return labels.shape().empty() ? 0 : labels.extent(1); }
};

Batch batch_from_images(const std::vector<LabeledImage>& rows);
LabeledImage batch_row(const Batch& batch, std::size_t row);

// The triple a mixaugment step trains on: the original batch, its shuffled
// partner, and the interpolated virtual batch, with the per-batch lambda.
struct MixBatch {
    Batch real_i;
    Batch real_j;
    Batch virt;
    double lambda = 1.0;
};

// Convex interpolation of two images and their labels:
// pixels = lambda*a + (1-lambda)*b, label likewise.
LabeledImage mixup_pair(const LabeledImage& a, const LabeledImage& b, double lambda);

// Pairs the batch with a uniformly random permutation of itself, draws one
// lambda ~ Beta(alpha, alpha), and builds the virtual batch. Draw order:
// permutation first, then lambda. Requires batch size >= 2.
MixBatch make_mixup_batch(const Batch& batch, double alpha, Rng& rng);

// Reverses image columns; the label is unchanged.
LabeledImage hflip(const LabeledImage& img);

// Flips each row independently with probability p (one uniform draw per row).
Batch random_hflip_batch(const Batch& batch, double p, Rng& rng);

}  // namespace mixaug
