#include "ckan/kan.hpp"

#include "ckan/activations.hpp"
#include "ckan/errors.hpp"

#include <cmath>
#include <cstring>

namespace ckan {

KanLayer::KanLayer(std::size_t d_in, std::size_t d_out, SplineGrid grid)
    : base_weight(d_out, d_in),
      spline_scaler(d_out, d_in),
      grad_base_weight(d_out, d_in),
      grad_spline_scaler(d_out, d_in),
      d_in_(d_in),
      d_out_(d_out),
      grid_(std::move(grid)) {
    if (d_in == 0 || d_out == 0) throw ArgumentError("KanLayer: dimensions must be positive");
    nb_ = static_cast<std::size_t>(grid_.basis_count());
    spline_coeffs.assign(d_out * d_in * nb_, 0.0);
    grad_spline_coeffs.assign(d_out * d_in * nb_, 0.0);
}

void KanLayer::init_parameters(RngStream& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(d_in_));
    for (auto& w : base_weight.data) w = rng.next_uniform(-bound, bound);
    for (auto& s : spline_scaler.data) s = 1.0;
    const double sigma = 0.1 / static_cast<double>(nb_);
    for (auto& c : spline_coeffs) c = sigma * rng.next_normal();
}

Matrix KanLayer::scaled_coeff_matrix() const {
    Matrix sc(d_out_, d_in_ * nb_);
    for (std::size_t o = 0; o < d_out_; ++o) {
        for (std::size_t in = 0; in < d_in_; ++in) {
            const double s = spline_scaler(o, in);
            const double* c = &spline_coeffs[(o * d_in_ + in) * nb_];
            double* dst = sc.row_ptr(o) + in * nb_;
            for (std::size_t i = 0; i < nb_; ++i) dst[i] = s * c[i];
        }
    }
    return sc;
}

Matrix KanLayer::forward(const Matrix& x, LayerCache* cache) const {
    if (x.cols != d_in_) {
        throw ShapeError("KanLayer::forward: input width " + std::to_string(x.cols) +
                         " does not match d_in " + std::to_string(d_in_));
    }
    const std::size_t batch = x.rows;

    // Spline basis per element, flattened so the spline branch is one matmul.
    Matrix basis(batch, d_in_ * nb_);
    Matrix basis_deriv;
    if (cache) basis_deriv = Matrix(batch, d_in_ * nb_);
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t in = 0; in < d_in_; ++in) {
            double* vals = basis.row_ptr(b) + in * nb_;
            double* ders = cache ? basis_deriv.row_ptr(b) + in * nb_ : nullptr;
            grid_.basis_values_and_derivatives(x(b, in), vals, ders);
        }
    }

    Matrix silu_x(batch, d_in_);
    for (std::size_t i = 0; i < x.size(); ++i) silu_x.data[i] = silu(x.data[i]);

    Matrix out = matmul(silu_x, transpose(base_weight));
    const Matrix spline_out = matmul(basis, transpose(scaled_coeff_matrix()));
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += spline_out.data[i];

    if (cache) {
        cache->input = x;
        cache->basis = std::move(basis);
        cache->basis_deriv = std::move(basis_deriv);
        cache->valid = true;
    }
    return out;
}

Matrix KanLayer::backward(const LayerCache& cache, const Matrix& upstream, bool need_input_grad) {
    if (!cache.valid) {
        throw StateError("KanLayer::backward called without a matching forward cache");
    }
    if (cache.input.cols != d_in_ || upstream.cols != d_out_ ||
        upstream.rows != cache.input.rows) {
        throw ShapeError("KanLayer::backward: upstream " + upstream.shape_str() +
                         " does not match cached batch " + cache.input.shape_str());
    }
    const Matrix& x = cache.input;
    const std::size_t batch = x.rows;

    if (!frozen_) {
        Matrix silu_x(batch, d_in_);
        for (std::size_t i = 0; i < x.size(); ++i) silu_x.data[i] = silu(x.data[i]);

        const Matrix up_t = transpose(upstream);
        const Matrix g_bw = matmul(up_t, silu_x); // d_out x d_in
        for (std::size_t i = 0; i < g_bw.size(); ++i) grad_base_weight.data[i] += g_bw.data[i];

        // P[o, in*nb+i] = sum_b upstream[b,o] * B_i(x[b,in])
        const Matrix p = matmul(up_t, cache.basis);
        for (std::size_t o = 0; o < d_out_; ++o) {
            for (std::size_t in = 0; in < d_in_; ++in) {
                const double s = spline_scaler(o, in);
                const double* c = &spline_coeffs[(o * d_in_ + in) * nb_];
                const double* p_row = p.row_ptr(o) + in * nb_;
                double* gc = &grad_spline_coeffs[(o * d_in_ + in) * nb_];
                double g_scaler = 0.0;
                for (std::size_t i = 0; i < nb_; ++i) {
                    gc[i] += s * p_row[i];
                    g_scaler += c[i] * p_row[i];
                }
                grad_spline_scaler(o, in) += g_scaler;
            }
        }
    }

    if (!need_input_grad) return Matrix();

    Matrix dx = matmul(upstream, base_weight); // silu-branch factor, batch x d_in
    const Matrix dspline = matmul(upstream, scaled_coeff_matrix());
    for (std::size_t b = 0; b < batch; ++b) {
        double* dx_row = dx.row_ptr(b);
        const double* ds_row = dspline.row_ptr(b);
        const double* bd_row = cache.basis_deriv.row_ptr(b);
        const double* x_row = x.row_ptr(b);
        for (std::size_t in = 0; in < d_in_; ++in) {
            double acc = dx_row[in] * silu_grad(x_row[in]);
            const double* ds = ds_row + in * nb_;
            const double* bd = bd_row + in * nb_;
            for (std::size_t i = 0; i < nb_; ++i) acc += ds[i] * bd[i];
            dx_row[in] = acc;
        }
    }
    return dx;
}

void KanLayer::zero_gradients() {
    std::fill(grad_base_weight.data.begin(), grad_base_weight.data.end(), 0.0);
    std::fill(grad_spline_scaler.data.begin(), grad_spline_scaler.data.end(), 0.0);
    std::fill(grad_spline_coeffs.begin(), grad_spline_coeffs.end(), 0.0);
}

std::size_t KanLayer::parameter_count() const {
    return d_in_ * d_out_ * (nb_ + 2);
}

KanNetwork::KanNetwork(std::vector<KanLayer> layers) : layers_(std::move(layers)) {
    for (std::size_t l = 0; l + 1 < layers_.size(); ++l) {
        if (layers_[l].d_out() != layers_[l + 1].d_in()) {
            throw ShapeError("KanNetwork: layer " + std::to_string(l) + " d_out " +
                             std::to_string(layers_[l].d_out()) + " != layer " +
                             std::to_string(l + 1) + " d_in " +
                             std::to_string(layers_[l + 1].d_in()));
        }
    }
}

void KanNetwork::set_frozen(bool f) {
    for (auto& l : layers_) l.set_frozen(f);
}

bool KanNetwork::frozen() const {
    for (const auto& l : layers_) {
        if (!l.frozen()) return false;
    }
    return !layers_.empty();
}

Matrix KanNetwork::forward(const Matrix& x, std::vector<LayerCache>* caches) const {
    if (caches) caches->assign(layers_.size(), LayerCache{});
    Matrix h = x;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        h = layers_[l].forward(h, caches ? &(*caches)[l] : nullptr);
    }
    return h;
}

Matrix KanNetwork::backward(const std::vector<LayerCache>& caches, const Matrix& upstream,
                            bool need_input_grad) {
    if (caches.size() != layers_.size()) {
        throw StateError("KanNetwork::backward: cache count does not match layer count");
    }
    Matrix g = upstream;
    for (std::size_t l = layers_.size(); l-- > 0;) {
        const bool want = need_input_grad || l > 0;
        g = layers_[l].backward(caches[l], g, want);
    }
    return g;
}

void KanNetwork::zero_gradients() {
    for (auto& l : layers_) l.zero_gradients();
}

std::size_t KanNetwork::parameter_count() const {
    std::size_t total = 0;
    for (const auto& l : layers_) total += l.parameter_count();
    return total;
}

std::uint64_t KanNetwork::parameter_checksum() const {
    // FNV-1a over the raw parameter bytes, in a fixed traversal order.
    std::uint64_t h = 1469598103934665603ULL;
    auto mix = [&h](const double* ptr, std::size_t n) {
        const auto* bytes = reinterpret_cast<const unsigned char*>(ptr);
        for (std::size_t i = 0; i < n * sizeof(double); ++i) {
            h ^= bytes[i];
            h *= 1099511628211ULL;
        }
    };
    for (const auto& l : layers_) {
        mix(l.base_weight.data.data(), l.base_weight.size());
        mix(l.spline_scaler.data.data(), l.spline_scaler.size());
        mix(l.spline_coeffs.data(), l.spline_coeffs.size());
    }
    return h;
}

CurveTable export_activation_curves(const KanLayer& layer,
                                    const std::vector<std::pair<std::size_t, std::size_t>>& edges,
                                    std::size_t samples) {
    if (samples < 2) throw ArgumentError("export_activation_curves: samples must be >= 2");
    const SplineGrid& grid = layer.grid();
    const std::size_t nb = static_cast<std::size_t>(grid.basis_count());

    for (const auto& [in, out] : edges) {
        if (in >= layer.d_in() || out >= layer.d_out()) {
            throw IndexError("export_activation_curves: edge (" + std::to_string(in) + ", " +
                             std::to_string(out) + ") out of range; valid in [0, " +
                             std::to_string(layer.d_in()) + ") x [0, " +
                             std::to_string(layer.d_out()) + ")");
        }
    }

    CurveTable table;
    table.points.reserve(edges.size() * samples);
    const double lo = grid.range_min;
    const double hi = grid.range_max;
    for (const auto& [in, out] : edges) {
        const double bw = layer.base_weight(out, in);
        const double ss = layer.spline_scaler(out, in);
        for (std::size_t s = 0; s < samples; ++s) {
            const double x = lo + (hi - lo) * static_cast<double>(s) /
                                      static_cast<double>(samples - 1);
            const std::vector<double> basis = grid.basis_values(x);
            double spline_val = 0.0;
            for (std::size_t i = 0; i < nb; ++i) spline_val += layer.coeff(out, in, i) * basis[i];
            table.points.push_back({in, out, x, bw * silu(x) + ss * spline_val});
        }
        for (std::size_t i = 0; i < nb; ++i) {
            table.control_points.push_back(
                {in, out, grid.control_abscissa(static_cast<int>(i)), layer.coeff(out, in, i)});
        }
    }
    return table;
}

} // namespace ckan
