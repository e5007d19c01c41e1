#include "ckan/finetune.hpp"

#include "ckan/activations.hpp"
#include "ckan/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ckan {

void FinetuneConfig::validate() const {
    if (batch_size == 0) throw ArgumentError("finetune: batch_size must be >= 1");
    if (!(learning_rate >= 0.0)) throw ArgumentError("finetune: learning_rate must be >= 0");
}

namespace {

void check_labels(const std::vector<int>& labels, std::size_t n_classes, const char* where) {
    for (int y : labels) {
        if (y < 0 || static_cast<std::size_t>(y) >= n_classes) {
            throw SchemaError(std::string(where) + ": label " + std::to_string(y) +
                              " outside the model's " + std::to_string(n_classes) + " classes");
        }
    }
}

} // namespace

std::pair<double, Matrix> cross_entropy(const Matrix& probabilities,
                                        const std::vector<int>& labels) {
    if (probabilities.rows != labels.size()) {
        throw ShapeError("cross_entropy: " + std::to_string(probabilities.rows) +
                         " probability rows vs " + std::to_string(labels.size()) + " labels");
    }
    if (probabilities.rows == 0) throw ArgumentError("cross_entropy: empty batch");
    const std::size_t n = probabilities.rows, c = probabilities.cols;
    Matrix grad(n, c);
    double loss = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
        const int y = labels[r];
        if (y < 0 || static_cast<std::size_t>(y) >= c) {
            throw ArgumentError("cross_entropy: label " + std::to_string(y) + " outside [0, " +
                                std::to_string(c) + ")");
        }
        const double* p = probabilities.row_ptr(r);
        loss -= std::log(p[y]);
        double* g = grad.row_ptr(r);
        for (std::size_t k = 0; k < c; ++k) {
            g[k] = (p[k] - (static_cast<int>(k) == y ? 1.0 : 0.0)) / static_cast<double>(n);
        }
    }
    return {loss / static_cast<double>(n), std::move(grad)};
}

std::pair<double, Matrix> softmax_cross_entropy(const Matrix& logits,
                                                const std::vector<int>& labels) {
    if (logits.rows != labels.size()) {
        throw ShapeError("softmax_cross_entropy: " + std::to_string(logits.rows) +
                         " logit rows vs " + std::to_string(labels.size()) + " labels");
    }
    if (logits.rows == 0) throw ArgumentError("softmax_cross_entropy: empty batch");
    const std::size_t n = logits.rows, c = logits.cols;
    Matrix grad(n, c);
    double loss = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
        const int y = labels[r];
        if (y < 0 || static_cast<std::size_t>(y) >= c) {
            throw ArgumentError("softmax_cross_entropy: label " + std::to_string(y) +
                                " outside [0, " + std::to_string(c) + ")");
        }
        const double* z = logits.row_ptr(r);
        const double zmax = *std::max_element(z, z + c);
        double denom = 0.0;
        for (std::size_t k = 0; k < c; ++k) denom += std::exp(z[k] - zmax);
        const double log_denom = std::log(denom);
        loss += -(z[y] - zmax) + log_denom;
        double* g = grad.row_ptr(r);
        for (std::size_t k = 0; k < c; ++k) {
            const double p = std::exp(z[k] - zmax) / denom;
            g[k] = (p - (static_cast<int>(k) == y ? 1.0 : 0.0)) / static_cast<double>(n);
        }
    }
    return {loss / static_cast<double>(n), std::move(grad)};
}

namespace {

FinetuneHistory run_training(ClassifierModel& model, const LabeledData& labeled,
                             const FinetuneConfig& cfg, Optimizer& optimizer, bool end_to_end) {
    cfg.validate();
    if (labeled.features.rows == 0) throw ArgumentError("finetune: empty labeled set");
    if (labeled.features.rows != labeled.labels.size()) {
        throw ShapeError("finetune: feature rows and label count differ");
    }
    if (labeled.features.cols != model.extractor.d_in()) {
        throw ShapeError("finetune: feature width " + std::to_string(labeled.features.cols) +
                         " does not match extractor input width " +
                         std::to_string(model.extractor.d_in()));
    }
    if (model.head.d_out() != model.n_classes()) {
        throw StateError("finetune: head width " + std::to_string(model.head.d_out()) +
                         " does not match class count " + std::to_string(model.n_classes()));
    }
    check_labels(labeled.labels, model.n_classes(), "finetune");

    model.extractor.set_frozen(!end_to_end);
    std::vector<ParamView> params = Optimizer::collect(model.head);
    if (end_to_end) {
        auto extra = Optimizer::collect(model.extractor);
        params.insert(params.end(), extra.begin(), extra.end());
    }

    const std::size_t n = labeled.features.rows;
    const std::size_t d = labeled.features.cols;
    RngStream rng(cfg.seed);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);

    FinetuneHistory hist;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(order);
        double loss_sum = 0.0;
        std::size_t correct = 0;
        for (std::size_t start = 0; start < n; start += cfg.batch_size) {
            const std::size_t b = std::min(cfg.batch_size, n - start);
            Matrix x(b, d);
            std::vector<int> y(b);
            for (std::size_t r = 0; r < b; ++r) {
                const std::size_t src = order[start + r];
                std::copy(labeled.features.row_ptr(src), labeled.features.row_ptr(src) + d,
                          x.row_ptr(r));
                y[r] = labeled.labels[src];
            }

            std::vector<LayerCache> caches;
            Matrix z = model.extractor.forward(x, end_to_end ? &caches : nullptr);
            LayerCache head_cache;
            Matrix logits = model.head.forward(z, &head_cache);

            auto [loss, glogits] = softmax_cross_entropy(logits, y);
            loss_sum += loss * static_cast<double>(b);
            for (std::size_t r = 0; r < b; ++r) {
                const double* row = logits.row_ptr(r);
                const std::size_t pred = static_cast<std::size_t>(
                    std::max_element(row, row + logits.cols) - row);
                if (static_cast<int>(pred) == y[r]) ++correct;
            }

            model.head.zero_gradients();
            if (end_to_end) model.extractor.zero_gradients();
            Matrix gz = model.head.backward(head_cache, glogits, end_to_end);
            if (end_to_end) model.extractor.backward(caches, gz, false);
            optimizer.apply_gradients(params);
        }
        hist.epoch_loss.push_back(loss_sum / static_cast<double>(n));
        hist.epoch_accuracy.push_back(static_cast<double>(correct) / static_cast<double>(n));
    }
    return hist;
}

} // namespace

FinetuneHistory finetune(ClassifierModel& model, const LabeledData& labeled,
                         const FinetuneConfig& cfg, Optimizer& optimizer) {
    return run_training(model, labeled, cfg, optimizer, false);
}

FinetuneHistory train_supervised(ClassifierModel& model, const LabeledData& labeled,
                                 const FinetuneConfig& cfg, Optimizer& optimizer) {
    return run_training(model, labeled, cfg, optimizer, true);
}

Predictions predict(const ClassifierModel& model, const Matrix& features) {
    if (features.cols != model.extractor.d_in()) {
        throw ShapeError("predict: feature width " + std::to_string(features.cols) +
                         " does not match extractor input width " +
                         std::to_string(model.extractor.d_in()));
    }
    Matrix z = model.extractor.forward(features);
    Matrix logits = model.head.forward(z);
    Predictions out;
    out.probabilities = Matrix(logits.rows, logits.cols);
    out.classes.resize(logits.rows);
    for (std::size_t r = 0; r < logits.rows; ++r) {
        const double* row = logits.row_ptr(r);
        double* dst = out.probabilities.row_ptr(r);
        std::copy(row, row + logits.cols, dst);
        softmax_inplace(dst, logits.cols);
        out.classes[r] = static_cast<int>(std::max_element(row, row + logits.cols) - row);
    }
    return out;
}

} // namespace ckan
