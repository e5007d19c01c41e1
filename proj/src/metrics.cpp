#include "ckan/metrics.hpp"

#include "ckan/errors.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

namespace ckan {

std::size_t ConfusionMatrix::total() const {
    std::size_t t = 0;
    for (const auto& row : counts) {
        for (std::size_t v : row) t += v;
    }
    return t;
}

void ConfusionMatrix::add(int true_class, int predicted_class) {
    const std::size_t c = n_classes();
    if (true_class < 0 || static_cast<std::size_t>(true_class) >= c ||
        predicted_class < 0 || static_cast<std::size_t>(predicted_class) >= c) {
        throw IndexError("confusion matrix: class pair (" + std::to_string(true_class) + ", " +
                         std::to_string(predicted_class) + ") outside [0, " + std::to_string(c) +
                         ")");
    }
    ++counts[static_cast<std::size_t>(true_class)][static_cast<std::size_t>(predicted_class)];
}

ConfusionMatrix confusion_from_predictions(const std::vector<int>& truth,
                                           const std::vector<int>& predicted,
                                           std::size_t n_classes) {
    if (truth.size() != predicted.size()) {
        throw ShapeError("confusion matrix: " + std::to_string(truth.size()) + " truths vs " +
                         std::to_string(predicted.size()) + " predictions");
    }
    ConfusionMatrix cm(n_classes);
    for (std::size_t i = 0; i < truth.size(); ++i) cm.add(truth[i], predicted[i]);
    return cm;
}

Averaging averaging_from_string(const std::string& name) {
    if (name == "macro") return Averaging::Macro;
    if (name == "weighted") return Averaging::Weighted;
    if (name == "micro") return Averaging::Micro;
    throw ArgumentError("unknown averaging mode '" + name + "' (macro | weighted | micro)");
}

std::string averaging_to_string(Averaging mode) {
    switch (mode) {
    case Averaging::Macro: return "macro";
    case Averaging::Weighted: return "weighted";
    case Averaging::Micro: return "micro";
    }
    return "macro";
}

MetricsReport compute_metrics(const ConfusionMatrix& cm, Averaging averaging) {
    const std::size_t c = cm.n_classes();
    if (c == 0 || cm.total() == 0) throw ArgumentError("compute_metrics: empty confusion matrix");

    MetricsReport rep;
    rep.averaging = averaging;
    const double total = static_cast<double>(cm.total());

    std::size_t trace = 0;
    std::vector<std::size_t> tp(c, 0), pred_count(c, 0), true_count(c, 0);
    for (std::size_t t = 0; t < c; ++t) {
        for (std::size_t p = 0; p < c; ++p) {
            const std::size_t v = cm.counts[t][p];
            if (t == p) {
                tp[t] += v;
                trace += v;
            }
            pred_count[p] += v;
            true_count[t] += v;
        }
    }
    rep.accuracy = 100.0 * static_cast<double>(trace) / total;

    rep.per_class.resize(c);
    for (std::size_t k = 0; k < c; ++k) {
        ClassMetrics& m = rep.per_class[k];
        m.support = true_count[k];
        if (pred_count[k] == 0) {
            m.precision = 0.0;
            ++rep.zero_division_events;
        } else {
            m.precision = 100.0 * static_cast<double>(tp[k]) / static_cast<double>(pred_count[k]);
        }
        if (true_count[k] == 0) {
            m.recall = 0.0;
            ++rep.zero_division_events;
        } else {
            m.recall = 100.0 * static_cast<double>(tp[k]) / static_cast<double>(true_count[k]);
        }
        m.f1 = (m.precision + m.recall > 0.0)
                   ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
                   : 0.0;
    }

    switch (averaging) {
    case Averaging::Macro: {
        double p = 0.0, r = 0.0, f = 0.0;
        for (const auto& m : rep.per_class) {
            p += m.precision;
            r += m.recall;
            f += m.f1;
        }
        rep.precision = p / static_cast<double>(c);
        rep.recall = r / static_cast<double>(c);
        rep.f1 = f / static_cast<double>(c);
        break;
    }
    case Averaging::Weighted: {
        double p = 0.0, r = 0.0, f = 0.0;
        for (const auto& m : rep.per_class) {
            const double w = static_cast<double>(m.support) / total;
            p += w * m.precision;
            r += w * m.recall;
            f += w * m.f1;
        }
        rep.precision = p;
        rep.recall = r;
        rep.f1 = f;
        break;
    }
    case Averaging::Micro: {
        // Every prediction is counted once globally, so micro P = R = F1 =
        // accuracy for single-label classification.
        std::size_t tp_sum = 0;
        for (std::size_t k = 0; k < c; ++k) tp_sum += tp[k];
        const double v = 100.0 * static_cast<double>(tp_sum) / total;
        rep.precision = v;
        rep.recall = v;
        rep.f1 = v;
        break;
    }
    }
    return rep;
}

LatencyReport latency_benchmark(const ClassifierModel& model, const Matrix& features,
                                std::size_t batch_size, std::size_t repeats) {
    if (features.rows == 0) throw ArgumentError("latency_benchmark: empty feature set");
    if (batch_size == 0) throw ArgumentError("latency_benchmark: batch_size must be >= 1");
    if (repeats < 3) throw ArgumentError("latency_benchmark: repeats must be >= 3");

    auto run_pass = [&]() {
        for (std::size_t start = 0; start < features.rows; start += batch_size) {
            const std::size_t b = std::min(batch_size, features.rows - start);
            Matrix x(b, features.cols);
            for (std::size_t r = 0; r < b; ++r) {
                const double* src = features.row_ptr(start + r);
                std::copy(src, src + features.cols, x.row_ptr(r));
            }
            volatile double sink = predict(model, x).probabilities(0, 0);
            (void)sink;
        }
    };

    run_pass(); // warm-up, untimed

    std::vector<double> per_sample_ms(repeats);
    for (std::size_t rep = 0; rep < repeats; ++rep) {
        const auto t0 = std::chrono::steady_clock::now();
        run_pass();
        const auto t1 = std::chrono::steady_clock::now();
        const double ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
        per_sample_ms[rep] = ms / static_cast<double>(features.rows);
    }
    std::sort(per_sample_ms.begin(), per_sample_ms.end());

    auto percentile = [&](double q) {
        const double pos = q * static_cast<double>(per_sample_ms.size() - 1);
        const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
        const std::size_t hi = static_cast<std::size_t>(std::ceil(pos));
        const double frac = pos - static_cast<double>(lo);
        return per_sample_ms[lo] * (1.0 - frac) + per_sample_ms[hi] * frac;
    };

    LatencyReport rep;
    rep.batch_size = batch_size;
    rep.repeats = repeats;
    rep.samples = features.rows;
    double sum = 0.0;
    for (double v : per_sample_ms) sum += v;
    rep.mean_ms_per_sample = sum / static_cast<double>(repeats);
    rep.p50_ms_per_sample = percentile(0.50);
    rep.p95_ms_per_sample = percentile(0.95);
    return rep;
}

} // namespace ckan
