#pragma once

#include <cstddef>
#include <vector>

namespace ckan {

/// Uniform B-spline basis of order (degree) K over G interior intervals of
/// [range_min, range_max], knots extended K steps beyond each end. The knot
/// vector has G + 2K + 1 entries and carries G + K basis functions; on the
/// interior they are non-negative and form a partition of unity.
struct SplineGrid {
    int order = 3;       // K
    int grid_size = 5;   // G
    double range_min = -1.0;
    double range_max = 1.0;
    std::vector<double> knots;

    SplineGrid() { rebuild(); }
    SplineGrid(int k, int g, double lo = -1.0, double hi = 1.0);

    int basis_count() const { return grid_size + order; }
    double step() const { return (range_max - range_min) / grid_size; }

    /// B_i(x) for i = 0..G+K-1, Cox-de Boor recursion over the extended knots.
    /// Defined for any finite x; zero outside the extended knot span.
    std::vector<double> basis_values(double x) const;

    /// dB_i/dx via B'_{i,K} = K/(t_{i+K}-t_i) B_{i,K-1} - K/(t_{i+K+1}-t_{i+1}) B_{i+1,K-1}.
    /// For K=1 exactly on a knot this is the right-hand derivative (the
    /// order-0 indicators are half-open on the right).
    std::vector<double> basis_derivatives(double x) const;

    /// Values and derivatives from one recursion pass; `values` and `derivs`
    /// are filled starting at the given offsets (both sized basis_count()).
    void basis_values_and_derivatives(double x, double* values, double* derivs) const;

    /// Greville abscissa of coefficient i: mean of knots i+1..i+K. This is
    /// where the control point c_i naturally sits on the x axis.
    double control_abscissa(int i) const;

private:
    void rebuild();
};

} // namespace ckan
