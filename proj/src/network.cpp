#include "mixaug/network.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "byteio.hpp"
#include "mixaug/errors.hpp"
#include "mixaug/parallel.hpp"

namespace mixaug {

namespace {

constexpr std::size_t kConv1Filters = 8;
constexpr std::size_t kConv2Filters = 16;
constexpr std::size_t kDense1Units = 64;
constexpr std::size_t kSampleChunk = 8;
constexpr double kProbFloor = 1e-12;
constexpr double kSimplexTol = 1e-6;

void check_simplex_rows(const Tensor& t, const char* what) {
    if (t.rank() != 2) {
        throw DimensionError(std::string(what) + " must be rank 2, got " + t.shape_str());
    }
    const std::size_t rows = t.extent(0), k = t.extent(1);
    const double* p = t.data().data();
    for (std::size_t r = 0; r < rows; ++r) {
        double sum = 0.0;
        for (std::size_t c = 0; c < k; ++c) {
            const double v = p[r * k + c];
            if (v < -kSimplexTol) {
                throw ArgumentError(std::string(what) + " row " + std::to_string(r) +
                                    " has a negative entry");
            }
            sum += v;
        }
        if (std::fabs(sum - 1.0) > kSimplexTol) {
            throw ArgumentError(std::string(what) + " row " + std::to_string(r) +
                                " does not sum to 1");
        }
    }
}

// conv 3x3, stride 1, zero padding 1 (spatial size preserved), fused ReLU.
void conv3x3_relu(const double* in, std::size_t h, std::size_t w, std::size_t cin,
                  const double* kernel, const double* bias, std::size_t f, double* out) {
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            double acc[kConv2Filters];  // max filter count across both layers
            for (std::size_t fo = 0; fo < f; ++fo) acc[fo] = bias[fo];
            for (std::size_t dy = 0; dy < 3; ++dy) {
                const std::size_t iy = y + dy;
                if (iy < 1 || iy > h) continue;
                for (std::size_t dx = 0; dx < 3; ++dx) {
                    const std::size_t ix = x + dx;
                    if (ix < 1 || ix > w) continue;
                    const double* irow = in + ((iy - 1) * w + (ix - 1)) * cin;
                    const double* krow = kernel + (dy * 3 + dx) * cin * f;
                    for (std::size_t c = 0; c < cin; ++c) {
                        const double v = irow[c];
                        const double* kf = krow + c * f;
                        for (std::size_t fo = 0; fo < f; ++fo) acc[fo] += v * kf[fo];
                    }
                }
            }
            double* orow = out + (y * w + x) * f;
            for (std::size_t fo = 0; fo < f; ++fo) orow[fo] = acc[fo] > 0.0 ? acc[fo] : 0.0;
        }
    }
}

// 2x2 max pool, stride 2; records the within-sample flat offset of each max.
void maxpool2(const double* in, std::size_t h, std::size_t w, std::size_t f, double* out,
              std::uint32_t* idx) {
    const std::size_t oh = h / 2, ow = w / 2;
    for (std::size_t y = 0; y < oh; ++y) {
        for (std::size_t x = 0; x < ow; ++x) {
            for (std::size_t fo = 0; fo < f; ++fo) {
                std::size_t best = ((2 * y) * w + 2 * x) * f + fo;
                double bv = in[best];
                const std::size_t candidates[3] = {((2 * y) * w + 2 * x + 1) * f + fo,
                                                   ((2 * y + 1) * w + 2 * x) * f + fo,
                                                   ((2 * y + 1) * w + 2 * x + 1) * f + fo};
                for (std::size_t cand : candidates) {
                    if (in[cand] > bv) {
                        bv = in[cand];
                        best = cand;
                    }
                }
                out[(y * ow + x) * f + fo] = bv;
                idx[(y * ow + x) * f + fo] = static_cast<std::uint32_t>(best);
            }
        }
    }
}

void softmax_row(const double* logits, std::size_t k, double* probs) {
    double m = logits[0];
    for (std::size_t i = 1; i < k; ++i) m = std::max(m, logits[i]);
    double sum = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        probs[i] = std::exp(logits[i] - m);
        sum += probs[i];
    }
    for (std::size_t i = 0; i < k; ++i) probs[i] /= sum;
}

void fill_gaussian(Tensor& t, double stddev, Rng& rng) {
    for (double& x : t.data()) x = stddev * rng.gaussian();
}

// Per-sample scratch for the backward pass, reused across a chunk.
struct BackwardScratch {
    std::vector<double> dlogits, ddense1, dflat, drelu2, dpool1, drelu1;
};

void accumulate_cce_grads(const NetworkParams& params, const ForwardTrace& trace,
                          const Tensor& targets, GradientSet& grads);

}  // namespace

void validate_network_shape(const NetworkShape& shape) {
    if (shape.channels == 0 || shape.classes < 2) {
        throw DimensionError("network needs at least 1 channel and 2 classes");
    }
    if (shape.height < 4 || shape.width < 4 || shape.height % 4 != 0 || shape.width % 4 != 0) {
        throw DimensionError("network input height/width must be positive multiples of 4, got " +
                             std::to_string(shape.height) + "x" + std::to_string(shape.width));
    }
}

NetworkParams init_params(const NetworkShape& shape, Rng& rng) {
    validate_network_shape(shape);
    NetworkParams p;
    p.shape = shape;
    p.conv1_w = Tensor({3, 3, shape.channels, kConv1Filters});
    p.conv1_b = Tensor({kConv1Filters});
    p.conv2_w = Tensor({3, 3, kConv1Filters, kConv2Filters});
    p.conv2_b = Tensor({kConv2Filters});
    p.dense1_w = Tensor({kDense1Units, shape.flat_size()});
    p.dense1_b = Tensor({kDense1Units});
    p.dense2_w = Tensor({shape.classes, kDense1Units});
    p.dense2_b = Tensor({shape.classes});
    fill_gaussian(p.conv1_w, std::sqrt(2.0 / (9.0 * shape.channels)), rng);
    fill_gaussian(p.conv2_w, std::sqrt(2.0 / (9.0 * kConv1Filters)), rng);
    fill_gaussian(p.dense1_w, std::sqrt(2.0 / static_cast<double>(shape.flat_size())), rng);
    fill_gaussian(p.dense2_w, std::sqrt(1.0 / static_cast<double>(kDense1Units)), rng);
    return p;
}

GradientSet zero_gradients(const NetworkParams& params) {
    GradientSet g;
    g.conv1_w = Tensor(params.conv1_w.shape());
    g.conv1_b = Tensor(params.conv1_b.shape());
    g.conv2_w = Tensor(params.conv2_w.shape());
    g.conv2_b = Tensor(params.conv2_b.shape());
    g.dense1_w = Tensor(params.dense1_w.shape());
    g.dense1_b = Tensor(params.dense1_b.shape());
    g.dense2_w = Tensor(params.dense2_w.shape());
    g.dense2_b = Tensor(params.dense2_b.shape());
    return g;
}

std::vector<Tensor*> param_tensors(NetworkParams& p) {
    return {&p.conv1_w, &p.conv1_b, &p.conv2_w, &p.conv2_b,
            &p.dense1_w, &p.dense1_b, &p.dense2_w, &p.dense2_b};
}
std::vector<const Tensor*> param_tensors(const NetworkParams& p) {
    return {&p.conv1_w, &p.conv1_b, &p.conv2_w, &p.conv2_b,
            &p.dense1_w, &p.dense1_b, &p.dense2_w, &p.dense2_b};
}
std::vector<Tensor*> grad_tensors(GradientSet& g) {
    return {&g.conv1_w, &g.conv1_b, &g.conv2_w, &g.conv2_b,
            &g.dense1_w, &g.dense1_b, &g.dense2_w, &g.dense2_b};
}
std::vector<const Tensor*> grad_tensors(const GradientSet& g) {
    return {&g.conv1_w, &g.conv1_b, &g.conv2_w, &g.conv2_b,
            &g.dense1_w, &g.dense1_b, &g.dense2_w, &g.dense2_b};
}

ForwardTrace forward(const NetworkParams& params, const Tensor& images, Mode mode,
                     double dropout_rate, Rng& rng) {
    const NetworkShape& ns = params.shape;
    validate_network_shape(ns);
    if (images.rank() != 4 || images.extent(1) != ns.height || images.extent(2) != ns.width ||
        images.extent(3) != ns.channels) {
        throw DimensionError("forward input " + images.shape_str() +
                             " does not match network input " + std::to_string(ns.height) + "x" +
                             std::to_string(ns.width) + "x" + std::to_string(ns.channels));
    }
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
        throw DomainError("dropout rate must lie in [0,1)");
    }
    for (double v : images.data()) {
        if (!(v >= 0.0 && v <= 1.0)) {
            throw DomainError("forward input pixels must lie in [0,1]");
        }
    }

    const std::size_t b = images.extent(0);
    const std::size_t h = ns.height, w = ns.width, c = ns.channels, k = ns.classes;
    const std::size_t h2 = h / 2, w2 = w / 2, h4 = h / 4, w4 = w / 4;
    const std::size_t flat = ns.flat_size();
    const bool use_dropout = (mode == Mode::train && dropout_rate > 0.0);

    ForwardTrace t;
    t.input = images;
    t.relu1 = Tensor({b, h, w, kConv1Filters});
    t.pool1 = Tensor({b, h2, w2, kConv1Filters});
    t.pool1_idx.resize(b * h2 * w2 * kConv1Filters);
    t.relu2 = Tensor({b, h2, w2, kConv2Filters});
    t.pool2 = Tensor({b, h4, w4, kConv2Filters});
    t.pool2_idx.resize(b * h4 * w4 * kConv2Filters);
    t.dense1_relu = Tensor({b, kDense1Units});
    t.dropped = Tensor({b, kDense1Units});
    t.probs = Tensor({b, k});
    if (use_dropout) {
        // Masks come out of the rng serially, sample-major then unit, so the
        // draw stream is independent of worker parallelism.
        t.dropout_mask = Tensor({b, kDense1Units});
        const double keep_scale = 1.0 / (1.0 - dropout_rate);
        for (double& m : t.dropout_mask.data()) {
            m = rng.uniform() < dropout_rate ? 0.0 : keep_scale;
        }
    }

    parallel_chunks(b, kSampleChunk, [&](std::size_t, std::size_t begin, std::size_t end) {
        for (std::size_t s = begin; s < end; ++s) {
            const double* in = images.data().data() + s * h * w * c;
            double* r1 = t.relu1.data().data() + s * h * w * kConv1Filters;
            conv3x3_relu(in, h, w, c, params.conv1_w.data().data(), params.conv1_b.data().data(),
                         kConv1Filters, r1);
            double* p1 = t.pool1.data().data() + s * h2 * w2 * kConv1Filters;
            maxpool2(r1, h, w, kConv1Filters, p1, t.pool1_idx.data() + s * h2 * w2 * kConv1Filters);
            double* r2 = t.relu2.data().data() + s * h2 * w2 * kConv2Filters;
            conv3x3_relu(p1, h2, w2, kConv1Filters, params.conv2_w.data().data(),
                         params.conv2_b.data().data(), kConv2Filters, r2);
            double* p2 = t.pool2.data().data() + s * flat;
            maxpool2(r2, h2, w2, kConv2Filters, p2, t.pool2_idx.data() + s * h4 * w4 * kConv2Filters);

            double* d1 = t.dense1_relu.data().data() + s * kDense1Units;
            const double* w1 = params.dense1_w.data().data();
            for (std::size_t u = 0; u < kDense1Units; ++u) {
                double acc = params.dense1_b[u];
                const double* wrow = w1 + u * flat;
                for (std::size_t i = 0; i < flat; ++i) acc += wrow[i] * p2[i];
                d1[u] = acc > 0.0 ? acc : 0.0;
            }
            double* dropped = t.dropped.data().data() + s * kDense1Units;
            if (use_dropout) {
                const double* mask = t.dropout_mask.data().data() + s * kDense1Units;
                for (std::size_t u = 0; u < kDense1Units; ++u) dropped[u] = d1[u] * mask[u];
            } else {
                std::copy(d1, d1 + kDense1Units, dropped);
            }
            double logits[256];
            std::vector<double> logits_big;
            double* lg = logits;
            if (k > 256) {
                logits_big.resize(k);
                lg = logits_big.data();
            }
            const double* w2d = params.dense2_w.data().data();
            for (std::size_t o = 0; o < k; ++o) {
                double acc = params.dense2_b[o];
                const double* wrow = w2d + o * kDense1Units;
                for (std::size_t u = 0; u < kDense1Units; ++u) acc += wrow[u] * dropped[u];
                lg[o] = acc;
            }
            softmax_row(lg, k, t.probs.data().data() + s * k);
        }
    });

    t.relu1.check_finite("conv1 activations");
    t.relu2.check_finite("conv2 activations");
    t.dense1_relu.check_finite("dense1 activations");
    t.probs.check_finite("output layer (dense2/softmax)");
    return t;
}

double cce_loss(const Tensor& probs, const Tensor& soft_labels) {
    if (!probs.same_shape(soft_labels)) {
        throw DimensionError("cce_loss shape mismatch: " + probs.shape_str() + " vs " +
                             soft_labels.shape_str());
    }
    check_simplex_rows(probs, "probabilities");
    check_simplex_rows(soft_labels, "labels");
    const std::size_t b = probs.extent(0), k = probs.extent(1);
    double total = 0.0;
    for (std::size_t r = 0; r < b; ++r) {
        double row = 0.0;
        for (std::size_t c = 0; c < k; ++c) {
            const double y = soft_labels[r * k + c];
            if (y != 0.0) {
                row -= y * std::log(std::max(probs[r * k + c], kProbFloor));
            }
        }
        total += row;
    }
    return total / static_cast<double>(b);
}

namespace {

void check_mix_loss_inputs(const Tensor& probs_v, const Tensor& probs_i, const Tensor& probs_j,
                           const Tensor& labels_i, const Tensor& labels_j, double lambda) {
    if (!(lambda >= 0.0 && lambda <= 1.0)) {
        throw DomainError("lambda must lie in [0,1]");
    }
    if (!probs_v.same_shape(probs_i) || !probs_v.same_shape(probs_j) ||
        !probs_v.same_shape(labels_i) || !probs_v.same_shape(labels_j)) {
        throw DimensionError("mixaugment loss inputs must all share one [BxK] shape");
    }
    check_simplex_rows(probs_v, "virtual probabilities");
    check_simplex_rows(probs_i, "real-i probabilities");
    check_simplex_rows(probs_j, "real-j probabilities");
    check_simplex_rows(labels_i, "labels_i");
    check_simplex_rows(labels_j, "labels_j");
}

}  // namespace

double mixaugment_loss_sum(const Tensor& probs_v, const Tensor& probs_i, const Tensor& probs_j,
                           const Tensor& labels_i, const Tensor& labels_j, double lambda) {
    check_mix_loss_inputs(probs_v, probs_i, probs_j, labels_i, labels_j, lambda);
    Tensor mixed(labels_i.shape());
    for (std::size_t i = 0; i < mixed.size(); ++i) {
        mixed[i] = lambda * labels_i[i] + (1.0 - lambda) * labels_j[i];
    }
    return cce_loss(probs_v, mixed) + cce_loss(probs_i, labels_i) + cce_loss(probs_j, labels_j);
}

double mixaugment_loss_factored(const Tensor& probs_v, const Tensor& probs_i,
                                const Tensor& probs_j, const Tensor& labels_i,
                                const Tensor& labels_j, double lambda) {
    check_mix_loss_inputs(probs_v, probs_i, probs_j, labels_i, labels_j, lambda);
    const std::size_t b = probs_v.extent(0), k = probs_v.extent(1);
    double total = 0.0;
    for (std::size_t r = 0; r < b; ++r) {
        double row = 0.0;
        for (std::size_t c = 0; c < k; ++c) {
            const std::size_t idx = r * k + c;
            const double log_v = std::log(std::max(probs_v[idx], kProbFloor));
            const double yi = labels_i[idx];
            const double yj = labels_j[idx];
            if (yi != 0.0) {
                row -= yi * (std::log(std::max(probs_i[idx], kProbFloor)) + lambda * log_v);
            }
            if (yj != 0.0) {
                row -= yj * (std::log(std::max(probs_j[idx], kProbFloor)) + (1.0 - lambda) * log_v);
            }
        }
        total += row;
    }
    return total / static_cast<double>(b);
}

namespace {

void accumulate_cce_grads(const NetworkParams& params, const ForwardTrace& trace,
                          const Tensor& targets, GradientSet& grads) {
    const NetworkShape& ns = params.shape;
    const std::size_t b = trace.batch_size();
    const std::size_t h = ns.height, w = ns.width, cin = ns.channels, k = ns.classes;
    const std::size_t h2 = h / 2, w2 = w / 2;
    const std::size_t flat = ns.flat_size();
    if (trace.probs.rank() != 2 || trace.probs.extent(1) != k || trace.pool2.size() != b * flat) {
        throw DimensionError("forward trace does not match network parameters");
    }
    if (!targets.same_shape(trace.probs)) {
        throw DimensionError("targets " + targets.shape_str() + " do not match probabilities " +
                             trace.probs.shape_str());
    }
    const bool has_mask = trace.dropout_mask.size() > 0;
    const double inv_b = 1.0 / static_cast<double>(b);

    const std::size_t nchunks = (b + kSampleChunk - 1) / kSampleChunk;
    std::vector<GradientSet> partial;
    partial.reserve(nchunks);
    for (std::size_t i = 0; i < nchunks; ++i) partial.push_back(zero_gradients(params));

    parallel_chunks(b, kSampleChunk, [&](std::size_t chunk, std::size_t begin, std::size_t end) {
        GradientSet& cg = partial[chunk];
        BackwardScratch scr;
        scr.dlogits.resize(k);
        scr.ddense1.resize(kDense1Units);
        scr.dflat.resize(flat);
        scr.drelu2.assign(h2 * w2 * kConv2Filters, 0.0);
        scr.dpool1.resize(h2 * w2 * kConv1Filters);
        scr.drelu1.assign(h * w * kConv1Filters, 0.0);

        for (std::size_t s = begin; s < end; ++s) {
            // softmax + mean CCE: dL/dlogit = (p - y) / B
            const double* probs = trace.probs.data().data() + s * k;
            const double* tgt = targets.data().data() + s * k;
            for (std::size_t o = 0; o < k; ++o) scr.dlogits[o] = (probs[o] - tgt[o]) * inv_b;

            const double* dropped = trace.dropped.data().data() + s * kDense1Units;
            const double* w2d = params.dense2_w.data().data();
            std::fill(scr.ddense1.begin(), scr.ddense1.end(), 0.0);
            for (std::size_t o = 0; o < k; ++o) {
                const double dl = scr.dlogits[o];
                cg.dense2_b[o] += dl;
                double* grow = cg.dense2_w.data().data() + o * kDense1Units;
                const double* wrow = w2d + o * kDense1Units;
                for (std::size_t u = 0; u < kDense1Units; ++u) {
                    grow[u] += dl * dropped[u];
                    scr.ddense1[u] += wrow[u] * dl;
                }
            }
            if (has_mask) {
                const double* mask = trace.dropout_mask.data().data() + s * kDense1Units;
                for (std::size_t u = 0; u < kDense1Units; ++u) scr.ddense1[u] *= mask[u];
            }
            const double* d1 = trace.dense1_relu.data().data() + s * kDense1Units;
            for (std::size_t u = 0; u < kDense1Units; ++u) {
                if (d1[u] <= 0.0) scr.ddense1[u] = 0.0;
            }

            const double* p2 = trace.pool2.data().data() + s * flat;
            const double* w1d = params.dense1_w.data().data();
            std::fill(scr.dflat.begin(), scr.dflat.end(), 0.0);
            for (std::size_t u = 0; u < kDense1Units; ++u) {
                const double du = scr.ddense1[u];
                if (du == 0.0) continue;
                cg.dense1_b[u] += du;
                double* grow = cg.dense1_w.data().data() + u * flat;
                const double* wrow = w1d + u * flat;
                for (std::size_t i = 0; i < flat; ++i) {
                    grow[i] += du * p2[i];
                    scr.dflat[i] += wrow[i] * du;
                }
            }

            // pool2 scatter back into conv2 activations (relu already encoded
            // in the stored activations: zero activation blocks gradient).
            const std::uint32_t* idx2 = trace.pool2_idx.data() + s * flat;
            const double* r2 = trace.relu2.data().data() + s * h2 * w2 * kConv2Filters;
            for (std::size_t i = 0; i < flat; ++i) {
                if (scr.dflat[i] != 0.0 && r2[idx2[i]] > 0.0) {
                    scr.drelu2[idx2[i]] += scr.dflat[i];
                }
            }

            // conv2 backward: weight/bias grads plus gradient into pool1
            const double* p1 = trace.pool1.data().data() + s * h2 * w2 * kConv1Filters;
            std::fill(scr.dpool1.begin(), scr.dpool1.end(), 0.0);
            const double* w2c = params.conv2_w.data().data();
            for (std::size_t y = 0; y < h2; ++y) {
                for (std::size_t x = 0; x < w2; ++x) {
                    const double* drow = scr.drelu2.data() + (y * w2 + x) * kConv2Filters;
                    bool any = false;
                    for (std::size_t f = 0; f < kConv2Filters; ++f) {
                        if (drow[f] != 0.0) {
                            any = true;
                            cg.conv2_b[f] += drow[f];
                        }
                    }
                    if (!any) continue;
                    for (std::size_t dy = 0; dy < 3; ++dy) {
                        const std::size_t iy = y + dy;
                        if (iy < 1 || iy > h2) continue;
                        for (std::size_t dx = 0; dx < 3; ++dx) {
                            const std::size_t ix = x + dx;
                            if (ix < 1 || ix > w2) continue;
                            const std::size_t pix = ((iy - 1) * w2 + (ix - 1)) * kConv1Filters;
                            for (std::size_t c = 0; c < kConv1Filters; ++c) {
                                const double v = p1[pix + c];
                                const std::size_t base =
                                    ((dy * 3 + dx) * kConv1Filters + c) * kConv2Filters;
                                double* gk = cg.conv2_w.data().data() + base;
                                const double* wk = w2c + base;
                                double acc = 0.0;
                                for (std::size_t f = 0; f < kConv2Filters; ++f) {
                                    gk[f] += v * drow[f];
                                    acc += wk[f] * drow[f];
                                }
                                scr.dpool1[pix + c] += acc;
                            }
                        }
                    }
                }
            }
            // zero drelu2 for the next sample (touched cells only are unknown;
            // full refill keeps it simple)
            std::fill(scr.drelu2.begin(), scr.drelu2.end(), 0.0);

            // pool1 scatter back into conv1 activations
            const std::uint32_t* idx1 = trace.pool1_idx.data() + s * h2 * w2 * kConv1Filters;
            const double* r1 = trace.relu1.data().data() + s * h * w * kConv1Filters;
            for (std::size_t i = 0; i < h2 * w2 * kConv1Filters; ++i) {
                if (scr.dpool1[i] != 0.0 && r1[idx1[i]] > 0.0) {
                    scr.drelu1[idx1[i]] += scr.dpool1[i];
                }
            }

            // conv1 backward: weight/bias grads only (input gradient unused)
            const double* in = trace.input.data().data() + s * h * w * cin;
            for (std::size_t y = 0; y < h; ++y) {
                for (std::size_t x = 0; x < w; ++x) {
                    const double* drow = scr.drelu1.data() + (y * w + x) * kConv1Filters;
                    bool any = false;
                    for (std::size_t f = 0; f < kConv1Filters; ++f) {
                        if (drow[f] != 0.0) {
                            any = true;
                            cg.conv1_b[f] += drow[f];
                        }
                    }
                    if (!any) continue;
                    for (std::size_t dy = 0; dy < 3; ++dy) {
                        const std::size_t iy = y + dy;
                        if (iy < 1 || iy > h) continue;
                        for (std::size_t dx = 0; dx < 3; ++dx) {
                            const std::size_t ix = x + dx;
                            if (ix < 1 || ix > w) continue;
                            const double* irow = in + ((iy - 1) * w + (ix - 1)) * cin;
                            for (std::size_t c = 0; c < cin; ++c) {
                                double* gk = cg.conv1_w.data().data() +
                                             ((dy * 3 + dx) * cin + c) * kConv1Filters;
                                const double v = irow[c];
                                for (std::size_t f = 0; f < kConv1Filters; ++f) {
                                    gk[f] += v * drow[f];
                                }
                            }
                        }
                    }
                }
            }
            std::fill(scr.drelu1.begin(), scr.drelu1.end(), 0.0);
        }
    });

    // chunk-order merge keeps the sum independent of the worker count
    auto out = grad_tensors(grads);
    for (std::size_t c = 0; c < nchunks; ++c) {
        auto part = grad_tensors(partial[c]);
        for (std::size_t t = 0; t < out.size(); ++t) {
            double* dst = out[t]->data().data();
            const double* src = part[t]->data().data();
            for (std::size_t i = 0; i < out[t]->size(); ++i) dst[i] += src[i];
        }
    }
}

}  // namespace

GradientSet backward(const NetworkParams& params, const ForwardTrace& trace_v,
                     const ForwardTrace& trace_i, const ForwardTrace& trace_j,
                     const Tensor& labels_i, const Tensor& labels_j, double lambda) {
    if (!(lambda >= 0.0 && lambda <= 1.0)) {
        throw DomainError("lambda must lie in [0,1]");
    }
    if (trace_v.batch_size() != trace_i.batch_size() ||
        trace_v.batch_size() != trace_j.batch_size()) {
        throw DimensionError("mixaugment traces must share one batch size");
    }
    if (!labels_i.same_shape(labels_j)) {
        throw DimensionError("labels_i " + labels_i.shape_str() + " and labels_j " +
                             labels_j.shape_str() + " must match");
    }
    Tensor mixed(labels_i.shape());
    for (std::size_t i = 0; i < mixed.size(); ++i) {
        mixed[i] = lambda * labels_i[i] + (1.0 - lambda) * labels_j[i];
    }
    GradientSet grads = zero_gradients(params);
    accumulate_cce_grads(params, trace_v, mixed, grads);
    accumulate_cce_grads(params, trace_i, labels_i, grads);
    accumulate_cce_grads(params, trace_j, labels_j, grads);
    return grads;
}

std::pair<double, GradientSet> cce_loss_and_grad(const NetworkParams& params, const Batch& batch,
                                                 Mode mode, double dropout_rate, Rng& rng) {
    ForwardTrace trace = forward(params, batch.images, mode, dropout_rate, rng);
    const double loss = cce_loss(trace.probs, batch.labels);
    GradientSet grads = zero_gradients(params);
    accumulate_cce_grads(params, trace, batch.labels, grads);
    return {loss, std::move(grads)};
}

std::pair<double, GradientSet> mixup_only_loss_and_grad(const NetworkParams& params,
                                                        const MixBatch& mix, Mode mode,
                                                        double dropout_rate, Rng& rng) {
    return cce_loss_and_grad(params, mix.virt, mode, dropout_rate, rng);
}

namespace {

constexpr char kCheckpointMagic[8] = {'M', 'I', 'X', 'A', 'U', 'G', 'N', '1'};
constexpr std::uint32_t kCheckpointVersion = 1;

}  // namespace

void save_checkpoint(const NetworkParams& params, const std::string& path) {
    using namespace byteio;
    std::string out;
    out.append(kCheckpointMagic, sizeof(kCheckpointMagic));
    append_u32(out, kCheckpointVersion);
    append_u32(out, static_cast<std::uint32_t>(params.shape.height));
    append_u32(out, static_cast<std::uint32_t>(params.shape.width));
    append_u32(out, static_cast<std::uint32_t>(params.shape.channels));
    append_u32(out, static_cast<std::uint32_t>(params.shape.classes));
    for (const Tensor* t : param_tensors(params)) {
        append_u32(out, static_cast<std::uint32_t>(t->rank()));
        for (std::size_t e : t->shape()) append_u64(out, e);
        for (double v : t->data()) append_f64(out, v);
    }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) {
        throw LoadError("cannot open checkpoint for writing: " + path);
    }
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) {
        throw LoadError("failed writing checkpoint: " + path);
    }
}

NetworkParams load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) {
        throw LoadError("cannot open checkpoint: " + path);
    }
    std::stringstream ss;
    ss << f.rdbuf();
    const std::string buf = ss.str();
    byteio::Reader r{buf, 0, "checkpoint " + path};
    r.need(sizeof(kCheckpointMagic));
    if (std::memcmp(buf.data(), kCheckpointMagic, sizeof(kCheckpointMagic)) != 0) {
        throw LoadError("checkpoint " + path + " has a bad magic string");
    }
    r.pos = sizeof(kCheckpointMagic);
    const std::uint32_t version = r.u32();
    if (version != kCheckpointVersion) {
        throw LoadError("checkpoint " + path + " has unsupported version " +
                        std::to_string(version));
    }
    NetworkShape shape;
    shape.height = r.u32();
    shape.width = r.u32();
    shape.channels = r.u32();
    shape.classes = r.u32();
    validate_network_shape(shape);

    Rng dummy(0);
    NetworkParams expected = init_params(shape, dummy);
    NetworkParams params;
    params.shape = shape;
    auto dst = param_tensors(params);
    auto ref = param_tensors(expected);
    for (std::size_t t = 0; t < dst.size(); ++t) {
        const std::uint32_t rank = r.u32();
        std::vector<std::size_t> extents(rank);
        for (auto& e : extents) e = static_cast<std::size_t>(r.u64());
        if (extents != ref[t]->shape()) {
            throw LoadError("checkpoint " + path + " tensor " + std::to_string(t) +
                            " has shape " + shape_to_string(extents) + ", expected " +
                            ref[t]->shape_str());
        }
        std::vector<double> data(ref[t]->size());
        for (double& v : data) v = r.f64();
        try {
            *dst[t] = Tensor(extents, std::move(data));
        } catch (const NumericError&) {
            throw LoadError("checkpoint " + path + " holds non-finite parameters");
        }
    }
    if (r.pos != buf.size()) {
        throw LoadError("checkpoint " + path + " has trailing bytes");
    }
    return params;
}

}  // namespace mixaug
