#pragma once

#include "ckan/matrix.hpp"
#include "ckan/rng.hpp"
#include "ckan/spline.hpp"

#include <cstdint>
#include <vector>

namespace ckan {

/// Per-call activation cache: everything the backward pass needs from the
/// matching forward call.
struct LayerCache {
    Matrix input;       // batch x d_in
    Matrix basis;       // batch x (d_in * (G+K)), B_i(x[b,in]) flattened per input
    Matrix basis_deriv; // same layout, dB_i/dx
    bool valid = false;
};

/// One KAN layer: every edge (in, out) carries a learnable activation
/// phi(x) = base_weight * SiLU(x) + spline_scaler * sum_i coeffs_i B_i(x).
class KanLayer {
public:
    KanLayer() = default;
    KanLayer(std::size_t d_in, std::size_t d_out, SplineGrid grid);

    std::size_t d_in() const { return d_in_; }
    std::size_t d_out() const { return d_out_; }
    const SplineGrid& grid() const { return grid_; }

    bool frozen() const { return frozen_; }
    void set_frozen(bool f) { frozen_ = f; }

    /// Draws base weights uniform(-1/sqrt(d_in), +1/sqrt(d_in)), sets spline
    /// scalers to 1 and spline coefficients normal(0, 0.1/(G+K)).
    void init_parameters(RngStream& rng);

    /// out[b,o] = sum_in bw[o,in] SiLU(x[b,in]) + ss[o,in] sum_i c[o,in,i] B_i(x[b,in]).
    /// Pass a cache when a backward pass will follow.
    Matrix forward(const Matrix& x, LayerCache* cache = nullptr) const;

    /// Accumulates parameter gradients into the layer's gradient buffers
    /// (skipped entirely when frozen) and returns dLoss/dinput. Throws
    /// StateError if the cache does not come from a matching forward call.
    /// `need_input_grad = false` skips the input-gradient computation (the
    /// return value is then an empty matrix).
    Matrix backward(const LayerCache& cache, const Matrix& upstream, bool need_input_grad = true);

    void zero_gradients();

    /// d_in * d_out * (G + K + 2): per edge G+K spline coefficients, one base
    /// weight and one spline scaler.
    std::size_t parameter_count() const;

    // Parameter storage, exposed for the optimizer, serialization and tests.
    Matrix base_weight;         // d_out x d_in
    Matrix spline_scaler;       // d_out x d_in
    std::vector<double> spline_coeffs; // d_out * d_in * (G+K), index ((o*d_in+in)*nb+i)

    Matrix grad_base_weight;
    Matrix grad_spline_scaler;
    std::vector<double> grad_spline_coeffs;

    double coeff(std::size_t o, std::size_t in, std::size_t i) const {
        return spline_coeffs[(o * d_in_ + in) * nb_ + i];
    }
    double& coeff(std::size_t o, std::size_t in, std::size_t i) {
        return spline_coeffs[(o * d_in_ + in) * nb_ + i];
    }

private:
    std::size_t d_in_ = 0;
    std::size_t d_out_ = 0;
    std::size_t nb_ = 0; // G + K
    SplineGrid grid_;
    bool frozen_ = false;

    /// spline_scaler[o,in] * coeffs[o,in,i] flattened to d_out x (d_in*nb),
    /// so the spline branch of forward is a single matmul.
    Matrix scaled_coeff_matrix() const;
};

/// A stack of KAN layers; adjacent layers must be dimension-compatible.
class KanNetwork {
public:
    KanNetwork() = default;
    explicit KanNetwork(std::vector<KanLayer> layers);

    std::size_t depth() const { return layers_.size(); }
    const KanLayer& layer(std::size_t l) const { return layers_[l]; }
    KanLayer& layer(std::size_t l) { return layers_[l]; }

    std::size_t d_in() const { return layers_.front().d_in(); }
    std::size_t d_out() const { return layers_.back().d_out(); }

    void set_frozen(bool f);
    bool frozen() const;

    Matrix forward(const Matrix& x, std::vector<LayerCache>* caches = nullptr) const;

    /// Chains backward through all layers; parameter gradients accumulate in
    /// each unfrozen layer. Returns dLoss/dinput of the first layer unless
    /// need_input_grad is false.
    Matrix backward(const std::vector<LayerCache>& caches, const Matrix& upstream,
                    bool need_input_grad = false);

    void zero_gradients();
    std::size_t parameter_count() const;

    /// Concatenation of all parameter bytes, for freeze/determinism checks.
    std::uint64_t parameter_checksum() const;

    std::vector<KanLayer>& layers() { return layers_; }
    const std::vector<KanLayer>& layers() const { return layers_; }

private:
    std::vector<KanLayer> layers_;
};

/// One sampled point of a learned edge activation, plus its control points.
struct CurvePoint {
    std::size_t edge_in = 0;
    std::size_t edge_out = 0;
    double x = 0.0;
    double phi = 0.0;
};

struct ControlPoint {
    std::size_t edge_in = 0;
    std::size_t edge_out = 0;
    double knot_x = 0.0; // Greville abscissa of the coefficient
    double coeff = 0.0;
};

struct CurveTable {
    std::vector<CurvePoint> points;
    std::vector<ControlPoint> control_points;
};

/// Samples phi (SiLU and spline branches, both scalers included) on
/// [range_min, range_max] for the requested edges. samples must be >= 2.
CurveTable export_activation_curves(const KanLayer& layer,
                                    const std::vector<std::pair<std::size_t, std::size_t>>& edges,
                                    std::size_t samples);

} // namespace ckan
