#include "ckan/optim.hpp"

#include "ckan/errors.hpp"
#include "ckan/kan.hpp"

#include <cmath>

namespace ckan {

Optimizer::Optimizer(OptimizerKind kind, double learning_rate)
    : kind_(kind), learning_rate_(learning_rate) {
    if (!(learning_rate >= 0.0)) throw ArgumentError("Optimizer: learning rate must be >= 0");
}

void Optimizer::apply_gradients(std::vector<ParamView>& params) {
    if (kind_ != OptimizerKind::SGD && m1_.empty()) {
        m1_.resize(params.size());
        m2_.resize(params.size());
        for (std::size_t t = 0; t < params.size(); ++t) {
            m1_[t].assign(params[t].size, 0.0);
            m2_[t].assign(params[t].size, 0.0);
        }
    }
    if (kind_ != OptimizerKind::SGD && m1_.size() != params.size()) {
        throw ShapeError("Optimizer: parameter set size changed between steps");
    }

    ++step_count_;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step_count_));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step_count_));

    for (std::size_t t = 0; t < params.size(); ++t) {
        auto& p = params[t];
        if (kind_ != OptimizerKind::SGD && m1_[t].size() != p.size) {
            throw ShapeError("Optimizer: tensor " + std::to_string(t) +
                             " changed size between steps");
        }
        for (std::size_t i = 0; i < p.size; ++i) {
            const double g = p.grad[i];
            double v = p.value[i];
            switch (kind_) {
            case OptimizerKind::SGD:
                v -= learning_rate_ * g;
                break;
            case OptimizerKind::AdamW:
                // Decoupled weight decay ahead of the Adam step.
                v -= learning_rate_ * weight_decay * v;
                [[fallthrough]];
            case OptimizerKind::Adam: {
                double& m = m1_[t][i];
                double& s = m2_[t][i];
                m = beta1 * m + (1.0 - beta1) * g;
                s = beta2 * s + (1.0 - beta2) * g * g;
                const double m_hat = m / bc1;
                const double s_hat = s / bc2;
                v -= learning_rate_ * m_hat / (std::sqrt(s_hat) + epsilon);
                break;
            }
            }
            if (!std::isfinite(v)) {
                throw StateError("Optimizer: parameter update produced a non-finite value");
            }
            p.value[i] = v;
        }
    }
}

std::vector<ParamView> Optimizer::collect(KanNetwork& net) {
    std::vector<ParamView> out;
    for (auto& layer : net.layers()) {
        if (layer.frozen()) continue;
        auto views = collect(layer);
        out.insert(out.end(), views.begin(), views.end());
    }
    return out;
}

std::vector<ParamView> Optimizer::collect(KanLayer& layer) {
    return {{layer.base_weight.data.data(), layer.grad_base_weight.data.data(),
             layer.base_weight.size()},
            {layer.spline_scaler.data.data(), layer.grad_spline_scaler.data.data(),
             layer.spline_scaler.size()},
            {layer.spline_coeffs.data(), layer.grad_spline_coeffs.data(),
             layer.spline_coeffs.size()}};
}

} // namespace ckan
