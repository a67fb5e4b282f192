#include "mixaug/augment.hpp"

#include <cmath>
#include <numeric>
#include <utility>

#include "mixaug/errors.hpp"

namespace mixaug {

namespace {

void check_pixel_range(const Tensor& pixels) {
    for (double v : pixels.data()) {
        if (v < 0.0 || v > 1.0) {
            throw DomainError("pixel value outside [0,1]");
        }
    }
}

void check_label_simplex(const double* row, std::size_t k) {
    double sum = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        if (row[i] < 0.0) {
            throw DomainError("label entry is negative");
        }
        sum += row[i];
    }
    if (std::fabs(sum - 1.0) > 1e-9) {
        throw DomainError("label entries do not sum to 1");
    }
}

void flip_image_rows(const double* src, double* dst, std::size_t h, std::size_t w,
                     std::size_t c) {
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            const double* s = src + (y * w + x) * c;
            double* d = dst + (y * w + (w - 1 - x)) * c;
            for (std::size_t ch = 0; ch < c; ++ch) d[ch] = s[ch];
        }
    }
}

}  // namespace

LabeledImage make_labeled_image(Tensor pixels, Tensor label) {
    if (pixels.rank() != 3) {
        throw DimensionError("image pixels must be rank 3 [HxWxC], got " + pixels.shape_str());
    }
    if (label.rank() != 1) {
        throw DimensionError("label must be rank 1, got " + label.shape_str());
    }
    check_pixel_range(pixels);
    check_label_simplex(label.data().data(), label.size());
    return LabeledImage{std::move(pixels), std::move(label)};
}

Batch batch_from_images(const std::vector<LabeledImage>& rows) {
    if (rows.empty()) {
        throw ArgumentError("cannot build a batch from zero images");
    }
    const auto& shape0 = rows.front().pixels.shape();
    const std::size_t k = rows.front().label.size();
    Tensor images({rows.size(), shape0[0], shape0[1], shape0[2]});
    Tensor labels({rows.size(), k});
    const std::size_t px = rows.front().pixels.size();
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].pixels.shape() != shape0 || rows[r].label.size() != k) {
            throw DimensionError("batch rows have mismatched shapes");
        }
        std::copy(rows[r].pixels.data().begin(), rows[r].pixels.data().end(),
                  images.data().begin() + r * px);
        std::copy(rows[r].label.data().begin(), rows[r].label.data().end(),
                  labels.data().begin() + r * k);
    }
    return Batch{std::move(images), std::move(labels)};
}

LabeledImage batch_row(const Batch& batch, std::size_t row) {
    if (row >= batch.size()) {
        throw ArgumentError("batch row index out of range");
    }
    const auto& s = batch.images.shape();
    const std::size_t px = s[1] * s[2] * s[3];
    const std::size_t k = batch.classes();
    Tensor pixels({s[1], s[2], s[3]},
                  std::vector<double>(batch.images.data().begin() + row * px,
                                      batch.images.data().begin() + (row + 1) * px));
    Tensor label({k}, std::vector<double>(batch.labels.data().begin() + row * k,
                                          batch.labels.data().begin() + (row + 1) * k));
    return LabeledImage{std::move(pixels), std::move(label)};
}

LabeledImage mixup_pair(const LabeledImage& a, const LabeledImage& b, double lambda) {
    if (!a.pixels.same_shape(b.pixels) || !a.label.same_shape(b.label)) {
        throw DimensionError("mixup_pair inputs disagree: " + a.pixels.shape_str() + " vs " +
                             b.pixels.shape_str());
    }
    if (!(lambda >= 0.0 && lambda <= 1.0)) {
        throw DomainError("mixup lambda must lie in [0,1]");
    }
    LabeledImage out{Tensor(a.pixels.shape()), Tensor(a.label.shape())};
    for (std::size_t i = 0; i < a.pixels.size(); ++i) {
        out.pixels[i] = lambda * a.pixels[i] + (1.0 - lambda) * b.pixels[i];
    }
    for (std::size_t i = 0; i < a.label.size(); ++i) {
        out.label[i] = lambda * a.label[i] + (1.0 - lambda) * b.label[i];
    }
    return out;
}

MixBatch make_mixup_batch(const Batch& batch, double alpha, Rng& rng) {
    if (batch.size() < 2) {
        throw ArgumentError("make_mixup_batch requires a batch of at least 2 images");
    }
    if (!(alpha > 0.0)) {
        throw DomainError("mixup alpha must be positive");
    }
    const std::size_t b = batch.size();
    std::vector<std::size_t> perm(b);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    for (std::size_t i = b - 1; i > 0; --i) {
        std::swap(perm[i], perm[rng.uniform_index(i + 1)]);
    }
    const double lambda = sample_beta(alpha, rng);

    const auto& s = batch.images.shape();
    const std::size_t px = s[1] * s[2] * s[3];
    const std::size_t k = batch.classes();
    Batch partner{Tensor(batch.images.shape()), Tensor(batch.labels.shape())};
    Batch virt{Tensor(batch.images.shape()), Tensor(batch.labels.shape())};
    for (std::size_t r = 0; r < b; ++r) {
        const double* src_px = batch.images.data().data() + perm[r] * px;
        const double* src_lb = batch.labels.data().data() + perm[r] * k;
        double* dst_px = partner.images.data().data() + r * px;
        double* dst_lb = partner.labels.data().data() + r * k;
        std::copy(src_px, src_px + px, dst_px);
        std::copy(src_lb, src_lb + k, dst_lb);

        const double* a_px = batch.images.data().data() + r * px;
        const double* a_lb = batch.labels.data().data() + r * k;
        double* v_px = virt.images.data().data() + r * px;
        double* v_lb = virt.labels.data().data() + r * k;
        for (std::size_t i = 0; i < px; ++i) {
            v_px[i] = lambda * a_px[i] + (1.0 - lambda) * src_px[i];
        }
        for (std::size_t i = 0; i < k; ++i) {
            v_lb[i] = lambda * a_lb[i] + (1.0 - lambda) * src_lb[i];
        }
    }
    return MixBatch{batch, std::move(partner), std::move(virt), lambda};
}

LabeledImage hflip(const LabeledImage& img) {
    const auto& s = img.pixels.shape();
    LabeledImage out{Tensor(img.pixels.shape()), img.label};
    flip_image_rows(img.pixels.data().data(), out.pixels.data().data(), s[0], s[1], s[2]);
    return out;
}

Batch random_hflip_batch(const Batch& batch, double p, Rng& rng) {
    if (!(p >= 0.0 && p <= 1.0)) {
        throw DomainError("flip probability must lie in [0,1]");
    }
    const auto& s = batch.images.shape();
    const std::size_t px = s[1] * s[2] * s[3];
    Batch out{batch.images, batch.labels};
    for (std::size_t r = 0; r < batch.size(); ++r) {
        if (rng.uniform() < p) {
            flip_image_rows(batch.images.data().data() + r * px,
                            out.images.data().data() + r * px, s[1], s[2], s[3]);
        }
    }
    return out;
}

}  // namespace mixaug
