#include "mixaug/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <sstream>

#include "mixaug/errors.hpp"

namespace mixaug {

namespace {

constexpr double kSimplexTol = 1e-6;

std::size_t argmax_row(const double* row, std::size_t k) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < k; ++i) {
        if (row[i] > row[best]) best = i;  // strict: ties keep the lowest index
    }
    return best;
}

void check_prob_rows(const Tensor& t, const char* what) {
    if (t.rank() != 2) {
        throw ArgumentError(std::string(what) + " must be rank 2, got " + t.shape_str());
    }
    const std::size_t rows = t.extent(0), k = t.extent(1);
    for (std::size_t r = 0; r < rows; ++r) {
        double sum = 0.0;
        for (std::size_t c = 0; c < k; ++c) {
            const double v = t[r * k + c];
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

void check_one_hot_rows(const Tensor& t) {
    check_prob_rows(t, "labels");
    const std::size_t rows = t.extent(0), k = t.extent(1);
    for (std::size_t r = 0; r < rows; ++r) {
        const double top = t[r * k + argmax_row(t.data().data() + r * k, k)];
        if (std::fabs(top - 1.0) > kSimplexTol) {
            throw ArgumentError("labels row " + std::to_string(r) + " is not one-hot");
        }
    }
}

double median_of(std::vector<double>& values) {
    if (values.empty()) return 0.0;
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    if (n % 2 == 1) return values[n / 2];
    return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

double mean_of(const std::vector<double>& values) {
    if (values.empty()) return 0.0;
    double s = 0.0;
    for (double v : values) s += v;
    return s / static_cast<double>(values.size());
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string fmt4(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}

std::vector<std::string> default_names(std::size_t k) {
    std::vector<std::string> names;
    names.reserve(k);
    for (std::size_t i = 0; i < k; ++i) names.push_back("class" + std::to_string(i));
    return names;
}

}  // namespace

std::uint64_t ConfusionMatrix::total() const {
    std::uint64_t t = 0;
    for (std::uint64_t c : counts) t += c;
    return t;
}

ConfusionMatrix build_confusion(const Tensor& preds, const Tensor& labels) {
    if (!preds.same_shape(labels)) {
        throw DimensionError("predictions " + preds.shape_str() + " and labels " +
                             labels.shape_str() + " must match");
    }
    check_prob_rows(preds, "predictions");
    check_one_hot_rows(labels);
    const std::size_t rows = preds.extent(0), k = preds.extent(1);
    ConfusionMatrix cm(k);
    for (std::size_t r = 0; r < rows; ++r) {
        const std::size_t p = argmax_row(preds.data().data() + r * k, k);
        const std::size_t t = argmax_row(labels.data().data() + r * k, k);
        ++cm.at(t, p);
    }
    return cm;
}

MetricsReport compute_report(const ConfusionMatrix& cm, const Tensor& preds,
                             const Tensor& labels) {
    const std::size_t k = cm.k;
    const std::uint64_t total = cm.total();
    if (k == 0 || total == 0) {
        throw ArgumentError("confusion matrix holds no samples");
    }
    if (preds.rank() != 2 || !preds.same_shape(labels) || preds.extent(1) != k ||
        preds.extent(0) != total) {
        throw ArgumentError("probabilities/labels are inconsistent with the confusion matrix");
    }

    MetricsReport rep;
    rep.cm = cm;
    rep.per_class.resize(k);

    std::uint64_t trace = 0;
    double recall_sum = 0.0;
    double f1_sum = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
        const std::uint64_t tp = cm.at(c, c);
        trace += tp;
        std::uint64_t row = 0, col = 0;
        for (std::size_t o = 0; o < k; ++o) {
            row += cm.at(c, o);
            col += cm.at(o, c);
        }
        ClassMetrics& m = rep.per_class[c];
        m.support = row;
        m.precision = col == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(col);
        m.recall = row == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(row);
        m.f1 = (m.precision + m.recall) == 0.0
                   ? 0.0
                   : 2.0 * m.precision * m.recall / (m.precision + m.recall);
        if (row == 0) rep.empty_classes.push_back(c);
        recall_sum += m.recall;
        f1_sum += m.f1;
    }
    rep.accuracy = static_cast<double>(trace) / static_cast<double>(total);
    rep.average_accuracy = recall_sum / static_cast<double>(k);
    rep.macro_f1 = f1_sum / static_cast<double>(k);

    std::vector<double> conf_correct, conf_wrong;
    const std::size_t rows = preds.extent(0);
    for (std::size_t r = 0; r < rows; ++r) {
        const double* prow = preds.data().data() + r * k;
        const std::size_t p = argmax_row(prow, k);
        const std::size_t t = argmax_row(labels.data().data() + r * k, k);
        (p == t ? conf_correct : conf_wrong).push_back(prow[p]);
    }
    rep.confidence.n_correct = conf_correct.size();
    rep.confidence.n_wrong = conf_wrong.size();
    rep.confidence.mean_correct = mean_of(conf_correct);
    rep.confidence.mean_wrong = mean_of(conf_wrong);
    rep.confidence.median_correct = median_of(conf_correct);
    rep.confidence.median_wrong = median_of(conf_wrong);
    return rep;
}

MetricsReport evaluate_predictions(const Tensor& preds, const Tensor& labels) {
    return compute_report(build_confusion(preds, labels), preds, labels);
}

std::string metrics_csv(const MetricsReport& report, const std::vector<std::string>& class_names) {
    const std::vector<std::string> names =
        class_names.empty() ? default_names(report.per_class.size()) : class_names;
    std::ostringstream os;
    os << "metric,value\n";
    os << "accuracy," << fmt(report.accuracy) << "\n";
    os << "average_accuracy," << fmt(report.average_accuracy) << "\n";
    os << "macro_f1," << fmt(report.macro_f1) << "\n";
    os << "confidence_mean_correct," << fmt(report.confidence.mean_correct) << "\n";
    os << "confidence_mean_wrong," << fmt(report.confidence.mean_wrong) << "\n";
    os << "confidence_median_correct," << fmt(report.confidence.median_correct) << "\n";
    os << "confidence_median_wrong," << fmt(report.confidence.median_wrong) << "\n";
    os << "class,precision,recall,f1,support\n";
    for (std::size_t c = 0; c < report.per_class.size(); ++c) {
        const ClassMetrics& m = report.per_class[c];
        os << names[c] << "," << fmt(m.precision) << "," << fmt(m.recall) << "," << fmt(m.f1)
           << "," << m.support << "\n";
    }
    return os.str();
}

std::string metrics_table(const MetricsReport& report,
                          const std::vector<std::string>& class_names) {
    const std::vector<std::string> names =
        class_names.empty() ? default_names(report.per_class.size()) : class_names;
    std::size_t name_w = 7;
    for (const auto& n : names) name_w = std::max(name_w, n.size());

    std::ostringstream os;
    os << "Accuracy:          " << fmt4(report.accuracy) << "\n";
    os << "Average accuracy:  " << fmt4(report.average_accuracy) << "\n";
    os << "Macro F1:          " << fmt4(report.macro_f1) << "\n\n";

    os << "Class";
    for (std::size_t i = 5; i < name_w; ++i) os << ' ';
    os << "  Precision  Recall  F1-score  Samples\n";
    for (std::size_t c = 0; c < report.per_class.size(); ++c) {
        const ClassMetrics& m = report.per_class[c];
        os << names[c];
        for (std::size_t i = names[c].size(); i < name_w; ++i) os << ' ';
        char buf[80];
        std::snprintf(buf, sizeof(buf), "  %9.4f  %6.4f  %8.4f  %7llu", m.precision, m.recall,
                      m.f1, static_cast<unsigned long long>(m.support));
        os << buf << "\n";
    }
    if (!report.empty_classes.empty()) {
        os << "\nwarning: no eval samples for:";
        for (std::size_t c : report.empty_classes) os << " " << names[c];
        os << " (recall counted as 0)\n";
    }
    os << "\nConfidence        mean    median\n";
    {
        char buf[80];
        std::snprintf(buf, sizeof(buf), "correct (%llu)",
                      static_cast<unsigned long long>(report.confidence.n_correct));
        os << buf;
        for (std::size_t i = std::strlen(buf); i < 16; ++i) os << ' ';
        std::snprintf(buf, sizeof(buf), "%6.4f    %6.4f\n", report.confidence.mean_correct,
                      report.confidence.median_correct);
        os << buf;
        std::snprintf(buf, sizeof(buf), "wrong (%llu)",
                      static_cast<unsigned long long>(report.confidence.n_wrong));
        os << buf;
        for (std::size_t i = std::strlen(buf); i < 16; ++i) os << ' ';
        std::snprintf(buf, sizeof(buf), "%6.4f    %6.4f\n", report.confidence.mean_wrong,
                      report.confidence.median_wrong);
        os << buf;
    }
    return os.str();
}

}  // namespace mixaug
