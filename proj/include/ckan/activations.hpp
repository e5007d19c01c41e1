#pragma once

#include <vector>

namespace ckan {

/// SiLU (sigmoid-weighted linear unit): x * sigmoid(x).
double silu(double x);

/// Exact derivative of SiLU: s(x) * (1 + x * (1 - s(x))) with s the logistic sigmoid.
double silu_grad(double x);

/// Numerically stable softmax (max-subtraction). Entries positive, sum 1.
std::vector<double> softmax(const std::vector<double>& v);

/// In-place softmax over a raw row of length n.
void softmax_inplace(double* row, std::size_t n);

} // namespace ckan
