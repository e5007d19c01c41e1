#pragma once

#include "ckan/finetune.hpp"
#include "ckan/matrix.hpp"

#include <cstddef>
#include <string>
#include <vector>

namespace ckan {

// counts[t][p] = samples of true class t predicted as class p.
struct ConfusionMatrix {
    std::vector<std::vector<std::size_t>> counts;

    explicit ConfusionMatrix(std::size_t n_classes = 0)
        : counts(n_classes, std::vector<std::size_t>(n_classes, 0)) {}

    std::size_t n_classes() const { return counts.size(); }
    std::size_t total() const;
    void add(int true_class, int predicted_class); // throws IndexError
};

ConfusionMatrix confusion_from_predictions(const std::vector<int>& truth,
                                           const std::vector<int>& predicted,
                                           std::size_t n_classes);

enum class Averaging { Macro, Weighted, Micro };

Averaging averaging_from_string(const std::string& name); // throws ArgumentError
std::string averaging_to_string(Averaging mode);

struct ClassMetrics {
    double precision = 0.0; // percent
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t support = 0;
};

struct MetricsReport {
    double accuracy = 0.0; // percent
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    Averaging averaging = Averaging::Macro;
    std::vector<ClassMetrics> per_class;
    std::size_t zero_division_events = 0; // 0/0 precision or recall, defined as 0
};

// Percentages; per-class 0/0 precision/recall defined as 0 and counted.
MetricsReport compute_metrics(const ConfusionMatrix& cm, Averaging averaging);

struct LatencyReport {
    double mean_ms_per_sample = 0.0;
    double p50_ms_per_sample = 0.0;
    double p95_ms_per_sample = 0.0;
    std::size_t batch_size = 0;
    std::size_t repeats = 0;
    std::size_t samples = 0;
};

// Wall clock over the full feature set per repeat, divided by sample count;
// one untimed warm-up pass first. repeats must be >= 3.
LatencyReport latency_benchmark(const ClassifierModel& model, const Matrix& features,
                                std::size_t batch_size, std::size_t repeats);

} // namespace ckan
