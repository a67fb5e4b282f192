#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mixaug/augment.hpp"
#include "mixaug/metrics.hpp"
#include "mixaug/network.hpp"
#include "mixaug/tensor.hpp"

namespace mixaug {

enum class TrainMode { vanilla, mixup, mixaugment };
enum class MonitorMetric { accuracy, macro_f1, average_accuracy };

TrainMode parse_train_mode(const std::string& name);
MonitorMetric parse_monitor_metric(const std::string& name);
std::string to_string(TrainMode mode);
std::string to_string(MonitorMetric metric);

struct TrainConfig {
    TrainMode mode = TrainMode::vanilla;
    double alpha = 0.1;        // Beta parameter; meaningful when mode != vanilla
    double dropout_rate = 0.0; // 0.5 when dropout is enabled
    double flip_prob = 0.0;
    std::size_t batch_size = 32;
    double learning_rate = 1e-3;
    std::size_t max_epochs = 100;
    std::size_t patience = 15;
    MonitorMetric monitor = MonitorMetric::accuracy;
    std::uint64_t seed = 0;
};

void validate_config(const TrainConfig& config);

// Adam moments, one pair of tensors per parameter tensor, plus the step count.
struct AdamState {
    std::vector<Tensor> m;
    std::vector<Tensor> v;
    std::size_t step = 0;

    static constexpr double kBeta1 = 0.9;
    static constexpr double kBeta2 = 0.999;
    static constexpr double kEpsilon = 1e-8;
};

AdamState zero_adam_state(const NetworkParams& params);

// Standard bias-corrected Adam update; returns the updated copies.
std::pair<NetworkParams, AdamState> adam_step(const NetworkParams& params,
                                              const GradientSet& grads, const AdamState& state,
                                              double learning_rate);

struct EpochStats {
    std::size_t epoch = 0;  // 1-based
    double train_loss = 0.0;
    double accuracy = 0.0;
    double macro_f1 = 0.0;
    double average_accuracy = 0.0;
};

struct TrainRecord {
    std::vector<EpochStats> epochs;
    std::size_t best_epoch = 0;    // 1-based epoch with the best monitored metric
    std::size_t stopped_epoch = 0; // last epoch that actually ran
    double best_metric = 0.0;
};

struct TrainResult {
    NetworkParams best_params;
    TrainRecord record;
    MetricsReport best_report;  // eval report of the best epoch
};

double monitored_value(const EpochStats& stats, MonitorMetric metric);

// Seeded end-to-end training: epoch shuffling, per-mode losses, per-epoch
// eval metrics, early stopping after `patience` non-improving epochs, and
// best-checkpoint retention. Identical config + seed reruns are bit-identical.
TrainResult run_training(const TrainConfig& config, const std::vector<LabeledImage>& train_set,
                         const std::vector<LabeledImage>& eval_set);

// Per-epoch CSV: epoch, train loss, and the three eval metric columns.
std::string train_record_csv(const TrainRecord& record);

// Eval-mode probabilities for a whole dataset, batched.
Tensor predict_probs(const NetworkParams& params, const std::vector<LabeledImage>& images,
                     std::size_t batch_size);

Tensor labels_tensor(const std::vector<LabeledImage>& images);

}  // namespace mixaug
