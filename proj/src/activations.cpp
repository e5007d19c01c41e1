#include "ckan/activations.hpp"

#include <algorithm>
#include <cmath>

namespace ckan {

namespace {
double sigmoid(double x) {
    return 1.0 / (1.0 + std::exp(-x));
}
} // namespace

double silu(double x) {
    return x * sigmoid(x);
}

double silu_grad(double x) {
    const double s = sigmoid(x);
    return s * (1.0 + x * (1.0 - s));
}

void softmax_inplace(double* row, std::size_t n) {
    if (n == 0) return;
    double max_val = row[0];
    for (std::size_t i = 1; i < n; ++i) max_val = std::max(max_val, row[i]);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        row[i] = std::exp(row[i] - max_val);
        sum += row[i];
    }
    for (std::size_t i = 0; i < n; ++i) row[i] /= sum;
}

std::vector<double> softmax(const std::vector<double>& v) {
    std::vector<double> out = v;
    softmax_inplace(out.data(), out.size());
    return out;
}

} // namespace ckan
