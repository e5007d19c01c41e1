#include "ckan/spline.hpp"

#include "ckan/errors.hpp"

#include <algorithm>
#include <cmath>

namespace ckan {

SplineGrid::SplineGrid(int k, int g, double lo, double hi)
    : order(k), grid_size(g), range_min(lo), range_max(hi) {
    if (k < 1) throw ArgumentError("SplineGrid: order must be >= 1");
    if (g < 1) throw ArgumentError("SplineGrid: grid_size must be >= 1");
    if (!(hi > lo)) throw ArgumentError("SplineGrid: range_max must exceed range_min");
    rebuild();
}

void SplineGrid::rebuild() {
    const double h = step();
    knots.resize(static_cast<std::size_t>(grid_size + 2 * order + 1));
    for (int i = 0; i < static_cast<int>(knots.size()); ++i) {
        knots[static_cast<std::size_t>(i)] = range_min + (i - order) * h;
    }
    // Pin the interior boundary knots so knots[K] and knots[G+K] are exact.
    knots[static_cast<std::size_t>(order)] = range_min;
    knots[static_cast<std::size_t>(grid_size + order)] = range_max;
}

void SplineGrid::basis_values_and_derivatives(double x, double* values, double* derivs) const {
    const int k = order;
    const int n_knots = static_cast<int>(knots.size());
    const int n_intervals = n_knots - 1; // G + 2K
    const int nb = basis_count();

    // work[i] holds B_{i,d} while building degree d upwards. Degree-0 basis
    // functions are indicators on the half-open intervals [t_i, t_{i+1}).
    std::vector<double> work(static_cast<std::size_t>(n_intervals), 0.0);
    if (x >= knots.front() && x < knots.back()) {
        const int j = static_cast<int>(std::upper_bound(knots.begin(), knots.end(), x) -
                                       knots.begin()) - 1;
        work[static_cast<std::size_t>(std::clamp(j, 0, n_intervals - 1))] = 1.0;
    }

    std::vector<double> lower; // degree K-1 row, kept for the derivative identity
    for (int d = 1; d <= k; ++d) {
        if (d == k && derivs) lower = work;
        const int count = n_knots - d - 1; // basis functions of degree d
        for (int i = 0; i < count; ++i) {
            const double t_i = knots[static_cast<std::size_t>(i)];
            const double t_id = knots[static_cast<std::size_t>(i + d)];
            const double t_i1 = knots[static_cast<std::size_t>(i + 1)];
            const double t_id1 = knots[static_cast<std::size_t>(i + d + 1)];
            double acc = 0.0;
            if (work[static_cast<std::size_t>(i)] != 0.0) {
                acc += (x - t_i) / (t_id - t_i) * work[static_cast<std::size_t>(i)];
            }
            if (work[static_cast<std::size_t>(i + 1)] != 0.0) {
                acc += (t_id1 - x) / (t_id1 - t_i1) * work[static_cast<std::size_t>(i + 1)];
            }
            work[static_cast<std::size_t>(i)] = acc;
        }
        work[static_cast<std::size_t>(count)] = 0.0;
    }

    if (values) {
        for (int i = 0; i < nb; ++i) values[i] = work[static_cast<std::size_t>(i)];
    }
    if (derivs) {
        for (int i = 0; i < nb; ++i) {
            const double left_span = knots[static_cast<std::size_t>(i + k)] -
                                     knots[static_cast<std::size_t>(i)];
            const double right_span = knots[static_cast<std::size_t>(i + k + 1)] -
                                      knots[static_cast<std::size_t>(i + 1)];
            double d = 0.0;
            if (lower[static_cast<std::size_t>(i)] != 0.0) {
                d += k / left_span * lower[static_cast<std::size_t>(i)];
            }
            if (lower[static_cast<std::size_t>(i + 1)] != 0.0) {
                d -= k / right_span * lower[static_cast<std::size_t>(i + 1)];
            }
            derivs[i] = d;
        }
    }
}

std::vector<double> SplineGrid::basis_values(double x) const {
    std::vector<double> values(static_cast<std::size_t>(basis_count()));
    basis_values_and_derivatives(x, values.data(), nullptr);
    return values;
}

std::vector<double> SplineGrid::basis_derivatives(double x) const {
    std::vector<double> values(static_cast<std::size_t>(basis_count()));
    std::vector<double> derivs(static_cast<std::size_t>(basis_count()));
    basis_values_and_derivatives(x, values.data(), derivs.data());
    return derivs;
}

double SplineGrid::control_abscissa(int i) const {
    if (i < 0 || i >= basis_count()) {
        throw IndexError("control_abscissa: coefficient index " + std::to_string(i) +
                         " out of range [0, " + std::to_string(basis_count()) + ")");
    }
    double sum = 0.0;
    for (int j = 1; j <= order; ++j) {
        sum += knots[static_cast<std::size_t>(i + j)];
    }
    return sum / order;
}

} // namespace ckan
