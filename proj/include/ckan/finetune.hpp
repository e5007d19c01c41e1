#pragma once

#include "ckan/data.hpp"
#include "ckan/kan.hpp"
#include "ckan/matrix.hpp"
#include "ckan/optim.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace ckan {

struct FinetuneConfig {
    std::size_t batch_size = 64;
    std::size_t epochs = 100;
    double learning_rate = 1e-3; // alpha
    std::uint64_t seed = 0;

    void validate() const; // throws ArgumentError
};

// Frozen contrastively-pretrained extractor plus a fresh classification head.
struct ClassifierModel {
    KanNetwork extractor;
    KanLayer head; // d_out == class count
    std::vector<std::string> class_names;

    std::size_t n_classes() const { return class_names.size(); }
};

// Loss over explicit probabilities (rows must sum to 1); gradient is with
// respect to the pre-softmax logits: (p - one_hot) / batch.
std::pair<double, Matrix> cross_entropy(const Matrix& probabilities,
                                        const std::vector<int>& labels);

// Numerically fused softmax + cross-entropy over logits (log-sum-exp); same
// gradient contract as cross_entropy.
std::pair<double, Matrix> softmax_cross_entropy(const Matrix& logits,
                                                const std::vector<int>& labels);

struct FinetuneHistory {
    std::vector<double> epoch_loss;     // sample-weighted mean
    std::vector<double> epoch_accuracy; // training accuracy in [0, 1]
};

// Stage two: extractor frozen, head trained with cross-entropy. Features must
// already be standardized with the pretraining scaler.
FinetuneHistory finetune(ClassifierModel& model, const LabeledData& labeled,
                         const FinetuneConfig& cfg, Optimizer& optimizer);

// Ablation baseline: identical loop but the extractor is unfrozen and updated
// together with the head.
FinetuneHistory train_supervised(ClassifierModel& model, const LabeledData& labeled,
                                 const FinetuneConfig& cfg, Optimizer& optimizer);

struct Predictions {
    std::vector<int> classes;
    Matrix probabilities; // batch x C, rows sum to 1
};

// argmax of softmax(head(extractor(x))); ties break toward the lowest index.
Predictions predict(const ClassifierModel& model, const Matrix& features);

} // namespace ckan
