#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace ckan {

class KanLayer;
class KanNetwork;

/// A parameter tensor paired with its gradient buffer.
struct ParamView {
    double* value = nullptr;
    const double* grad = nullptr;
    std::size_t size = 0;
};

enum class OptimizerKind { SGD, Adam, AdamW };

/// Gradient-descent optimizers. Moment accumulators are allocated on the
/// first step and keyed by position, so every apply_gradients call must pass
/// the same parameter set in the same order.
class Optimizer {
public:
    Optimizer(OptimizerKind kind, double learning_rate);

    OptimizerKind kind() const { return kind_; }
    double learning_rate() const { return learning_rate_; }
    std::int64_t step_count() const { return step_count_; }

    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double weight_decay = 0.01; // used by AdamW only

    /// One update step over the given parameter set. Frozen parameters are
    /// excluded by the caller. Throws ShapeError if the set changes shape
    /// between calls and StateError if an update produces a non-finite value.
    void apply_gradients(std::vector<ParamView>& params);

    /// Convenience: collects the trainable (unfrozen) tensors of a network.
    static std::vector<ParamView> collect(KanNetwork& net);
    /// Collects one layer's tensors regardless of its frozen flag.
    static std::vector<ParamView> collect(KanLayer& layer);

private:
    OptimizerKind kind_;
    double learning_rate_;
    std::int64_t step_count_ = 0;
    std::vector<std::vector<double>> m1_;
    std::vector<std::vector<double>> m2_;
};

} // namespace ckan
