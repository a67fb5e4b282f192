#include "mixaug/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "mixaug/errors.hpp"

namespace mixaug {

TrainMode parse_train_mode(const std::string& name) {
    if (name == "vanilla") return TrainMode::vanilla;
    if (name == "mixup") return TrainMode::mixup;
    if (name == "mixaugment") return TrainMode::mixaugment;
    throw ArgumentError("unknown training mode '" + name +
                        "' (expected vanilla, mixup or mixaugment)");
}

MonitorMetric parse_monitor_metric(const std::string& name) {
    if (name == "accuracy") return MonitorMetric::accuracy;
    if (name == "macro_f1") return MonitorMetric::macro_f1;
    if (name == "average_accuracy") return MonitorMetric::average_accuracy;
    throw ArgumentError("unknown monitor metric '" + name +
                        "' (expected accuracy, macro_f1 or average_accuracy)");
}

std::string to_string(TrainMode mode) {
    switch (mode) {
        case TrainMode::vanilla: return "vanilla";
        case TrainMode::mixup: return "mixup";
        case TrainMode::mixaugment: return "mixaugment";
    }
    return "?";
}

std::string to_string(MonitorMetric metric) {
    switch (metric) {
        case MonitorMetric::accuracy: return "accuracy";
        case MonitorMetric::macro_f1: return "macro_f1";
        case MonitorMetric::average_accuracy: return "average_accuracy";
    }
    return "?";
}

void validate_config(const TrainConfig& config) {
    if (config.mode != TrainMode::vanilla && !(config.alpha > 0.0)) {
        throw DomainError("alpha must be positive for mixup/mixaugment training");
    }
    if (!(config.dropout_rate >= 0.0 && config.dropout_rate < 1.0)) {
        throw DomainError("dropout rate must lie in [0,1)");
    }
    if (!(config.flip_prob >= 0.0 && config.flip_prob <= 1.0)) {
        throw DomainError("flip probability must lie in [0,1]");
    }
    if (config.batch_size == 0) {
        throw ArgumentError("batch size must be positive");
    }
    if (!(config.learning_rate > 0.0)) {
        throw DomainError("learning rate must be positive");
    }
    if (config.max_epochs == 0) {
        throw ArgumentError("max_epochs must be positive");
    }
    if (config.patience == 0) {
        throw ArgumentError("patience must be positive");
    }
}

AdamState zero_adam_state(const NetworkParams& params) {
    AdamState state;
    for (const Tensor* t : param_tensors(params)) {
        state.m.emplace_back(t->shape());
        state.v.emplace_back(t->shape());
    }
    return state;
}

std::pair<NetworkParams, AdamState> adam_step(const NetworkParams& params,
                                              const GradientSet& grads, const AdamState& state,
                                              double learning_rate) {
    if (!(learning_rate > 0.0)) {
        throw DomainError("learning rate must be positive");
    }
    NetworkParams out = params;
    AdamState ns = state;
    ns.step += 1;
    const double b1 = AdamState::kBeta1, b2 = AdamState::kBeta2;
    const double m_corr = 1.0 - std::pow(b1, static_cast<double>(ns.step));
    const double v_corr = 1.0 - std::pow(b2, static_cast<double>(ns.step));

    auto ps = param_tensors(out);
    auto gs = grad_tensors(grads);
    if (ns.m.size() != ps.size()) {
        throw DimensionError("Adam state does not match the parameter set");
    }
    for (std::size_t t = 0; t < ps.size(); ++t) {
        if (!ps[t]->same_shape(*gs[t]) || !ps[t]->same_shape(ns.m[t])) {
            throw DimensionError("gradient/state tensor " + std::to_string(t) + " has shape " +
                                 gs[t]->shape_str() + ", parameters have " + ps[t]->shape_str());
        }
        double* p = ps[t]->data().data();
        const double* g = gs[t]->data().data();
        double* m = ns.m[t].data().data();
        double* v = ns.v[t].data().data();
        const std::size_t n = ps[t]->size();
        for (std::size_t i = 0; i < n; ++i) {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            const double mhat = m[i] / m_corr;
            const double vhat = v[i] / v_corr;
            p[i] -= learning_rate * mhat / (std::sqrt(vhat) + AdamState::kEpsilon);
        }
    }
    return {std::move(out), std::move(ns)};
}

double monitored_value(const EpochStats& stats, MonitorMetric metric) {
    switch (metric) {
        case MonitorMetric::accuracy: return stats.accuracy;
        case MonitorMetric::macro_f1: return stats.macro_f1;
        case MonitorMetric::average_accuracy: return stats.average_accuracy;
    }
    return 0.0;
}

Tensor labels_tensor(const std::vector<LabeledImage>& images) {
    if (images.empty()) {
        throw ArgumentError("cannot build a label tensor from an empty set");
    }
    const std::size_t k = images.front().label.size();
    Tensor labels({images.size(), k});
    for (std::size_t r = 0; r < images.size(); ++r) {
        for (std::size_t c = 0; c < k; ++c) labels[r * k + c] = images[r].label[c];
    }
    return labels;
}

Tensor predict_probs(const NetworkParams& params, const std::vector<LabeledImage>& images,
                     std::size_t batch_size) {
    if (images.empty()) {
        throw ArgumentError("cannot run inference on an empty set");
    }
    if (batch_size == 0) batch_size = 1;
    const std::size_t k = params.shape.classes;
    Tensor probs({images.size(), k});
    Rng unused(0);  // eval mode consumes no randomness
    for (std::size_t start = 0; start < images.size(); start += batch_size) {
        const std::size_t end = std::min(images.size(), start + batch_size);
        std::vector<LabeledImage> rows(images.begin() + static_cast<std::ptrdiff_t>(start),
                                       images.begin() + static_cast<std::ptrdiff_t>(end));
        Batch batch = batch_from_images(rows);
        ForwardTrace trace = forward(params, batch.images, Mode::eval, 0.0, unused);
        std::copy(trace.probs.data().begin(), trace.probs.data().end(),
                  probs.data().begin() + start * k);
    }
    return probs;
}

TrainResult run_training(const TrainConfig& config, const std::vector<LabeledImage>& train_set,
                         const std::vector<LabeledImage>& eval_set) {
    validate_config(config);
    if (train_set.empty() || eval_set.empty()) {
        throw ArgumentError("training needs non-empty train and eval sets");
    }
    const std::size_t k = train_set.front().label.size();
    if (eval_set.front().label.size() != k) {
        throw ArgumentError("train and eval sets disagree on the class count");
    }
    const auto& img_shape = train_set.front().pixels.shape();
    NetworkShape ns{img_shape[0], img_shape[1], img_shape[2], k};
    validate_network_shape(ns);

    Rng rng(config.seed);
    NetworkParams params = init_params(ns, rng);
    AdamState adam = zero_adam_state(params);

    const Tensor eval_labels = labels_tensor(eval_set);

    TrainResult result;
    result.record.best_epoch = 0;
    double best = -1.0;
    std::size_t bad_streak = 0;

    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
        // seeded Fisher-Yates shuffle
        for (std::size_t i = order.size() - 1; i > 0; --i) {
            std::swap(order[i], order[rng.uniform_index(i + 1)]);
        }

        double loss_sum = 0.0;
        std::size_t iterations = 0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t end = std::min(order.size(), start + config.batch_size);
            if (end - start < 2 && config.mode != TrainMode::vanilla) {
                continue;  // a lone trailing sample cannot be mixed
            }
            std::vector<LabeledImage> rows;
            rows.reserve(end - start);
            for (std::size_t i = start; i < end; ++i) rows.push_back(train_set[order[i]]);
            Batch batch = batch_from_images(rows);
            if (config.flip_prob > 0.0) {
                batch = random_hflip_batch(batch, config.flip_prob, rng);
            }

            double loss = 0.0;
            GradientSet grads;
            switch (config.mode) {
                case TrainMode::vanilla: {
                    auto lg = cce_loss_and_grad(params, batch, Mode::train, config.dropout_rate,
                                                rng);
                    loss = lg.first;
                    grads = std::move(lg.second);
                    break;
                }
                case TrainMode::mixup: {
                    MixBatch mix = make_mixup_batch(batch, config.alpha, rng);
                    auto lg = mixup_only_loss_and_grad(params, mix, Mode::train,
                                                       config.dropout_rate, rng);
                    loss = lg.first;
                    grads = std::move(lg.second);
                    break;
                }
                case TrainMode::mixaugment: {
                    MixBatch mix = make_mixup_batch(batch, config.alpha, rng);
                    ForwardTrace ti =
                        forward(params, mix.real_i.images, Mode::train, config.dropout_rate, rng);
                    ForwardTrace tj =
                        forward(params, mix.real_j.images, Mode::train, config.dropout_rate, rng);
                    ForwardTrace tv =
                        forward(params, mix.virt.images, Mode::train, config.dropout_rate, rng);
                    loss = mixaugment_loss_sum(tv.probs, ti.probs, tj.probs, mix.real_i.labels,
                                               mix.real_j.labels, mix.lambda);
                    grads = backward(params, tv, ti, tj, mix.real_i.labels, mix.real_j.labels,
                                     mix.lambda);
                    break;
                }
            }
            if (!std::isfinite(loss)) {
                throw NumericError("non-finite training loss at epoch " + std::to_string(epoch));
            }
            auto stepped = adam_step(params, grads, adam, config.learning_rate);
            params = std::move(stepped.first);
            adam = std::move(stepped.second);
            loss_sum += loss;
            ++iterations;
        }

        EpochStats stats;
        stats.epoch = epoch;
        stats.train_loss = iterations ? loss_sum / static_cast<double>(iterations) : 0.0;
        const Tensor probs = predict_probs(params, eval_set, config.batch_size);
        const MetricsReport report = evaluate_predictions(probs, eval_labels);
        stats.accuracy = report.accuracy;
        stats.macro_f1 = report.macro_f1;
        stats.average_accuracy = report.average_accuracy;
        result.record.epochs.push_back(stats);
        result.record.stopped_epoch = epoch;

        const double monitored = monitored_value(stats, config.monitor);
        if (monitored > best) {
            best = monitored;
            bad_streak = 0;
            result.record.best_epoch = epoch;
            result.record.best_metric = monitored;
            result.best_params = params;
            result.best_report = report;
        } else {
            ++bad_streak;
            if (bad_streak >= config.patience) {
                break;
            }
        }
    }
    return result;
}

std::string train_record_csv(const TrainRecord& record) {
    std::ostringstream os;
    os << "epoch,train_loss,accuracy,macro_f1,average_accuracy\n";
    char buf[160];
    for (const EpochStats& e : record.epochs) {
        std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g,%.17g\n", e.epoch, e.train_loss,
                      e.accuracy, e.macro_f1, e.average_accuracy);
        os << buf;
    }
    return os.str();
}

}  // namespace mixaug
