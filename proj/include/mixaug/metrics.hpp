#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mixaug/tensor.hpp"

namespace mixaug {

// K x K count matrix, rows = true class, columns = predicted class.
struct ConfusionMatrix {
    std::size_t k = 0;
    std::vector<std::uint64_t> counts;  // row-major

    explicit ConfusionMatrix(std::size_t classes = 0) : k(classes), counts(classes * classes, 0) {}

    std::uint64_t& at(std::size_t true_class, std::size_t pred_class) {
        return counts[true_class * k + pred_class];
    }
    std::uint64_t at(std::size_t true_class, std::size_t pred_class) const {
        return counts[true_class * k + pred_class];
    }
    std::uint64_t total() const;
};

struct ClassMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::uint64_t support = 0;
};

// Max-softmax statistics partitioned by prediction correctness. Sides with no
// samples report 0 and the counts say so.
struct ConfidenceStats {
    double mean_correct = 0.0;
    double mean_wrong = 0.0;
    double median_correct = 0.0;
    double median_wrong = 0.0;
    std::uint64_t n_correct = 0;
    std::uint64_t n_wrong = 0;
};

struct MetricsReport {
    double accuracy = 0.0;
    double average_accuracy = 0.0;  // macro recall
    double macro_f1 = 0.0;
    std::vector<ClassMetrics> per_class;
    ConfidenceStats confidence;
    std::vector<std::size_t> empty_classes;  // classes absent from the eval set
    ConfusionMatrix cm;
};

// Argmax per row on both sides (ties break to the lowest class index).
// preds must be probability rows, labels hard one-hot rows.
ConfusionMatrix build_confusion(const Tensor& preds, const Tensor& labels);

// Derives every scalar from the confusion matrix, plus confidence statistics
// over the max-softmax values in preds. Classes with no eval samples
// contribute recall 0 and are listed in empty_classes.
MetricsReport compute_report(const ConfusionMatrix& cm, const Tensor& preds,
                             const Tensor& labels);

// Convenience: confusion + report in one step.
MetricsReport evaluate_predictions(const Tensor& preds, const Tensor& labels);

std::string metrics_csv(const MetricsReport& report, const std::vector<std::string>& class_names);
std::string metrics_table(const MetricsReport& report,
                          const std::vector<std::string>& class_names);

}  // namespace mixaug
