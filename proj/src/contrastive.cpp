#include "ckan/contrastive.hpp"

#include "ckan/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ckan {

namespace {

constexpr double kNormFloor = 1e-12;

// floor() with a nudge absorbing FP jitter in p*d products that are exact
// integers in real arithmetic (e.g. 0.3 * 10).
std::size_t stable_floor(double x) {
    return static_cast<std::size_t>(std::floor(x + 1e-9));
}

} // namespace

void ContrastiveConfig::validate() const {
    if (batch_size == 0) throw ArgumentError("contrastive: batch_size must be positive");
    if (!(masking_fraction >= 0.0 && masking_fraction < 1.0)) {
        throw ArgumentError("contrastive: masking_fraction must lie in [0, 1)");
    }
    if (!(temperature > 0.0)) throw ArgumentError("contrastive: temperature must be > 0");
    if (!(learning_rate >= 0.0)) throw ArgumentError("contrastive: learning_rate must be >= 0");
}

Matrix mask_features(const Matrix& x, double p, RngStream& rng) {
    if (!(p >= 0.0 && p < 1.0)) throw ArgumentError("mask_features: p must lie in [0, 1)");
    Matrix out = x;
    const std::size_t n_mask = stable_floor(p * static_cast<double>(x.cols));
    if (n_mask == 0) return out;
    for (std::size_t r = 0; r < x.rows; ++r) {
        const auto idx = rng.sample_without_replacement(x.cols, n_mask);
        double* row = out.row_ptr(r);
        for (std::size_t j : idx) row[j] = 0.0;
    }
    return out;
}

Matrix cosine_similarity_matrix(const Matrix& z, CosineStats* stats) {
    const std::size_t n = z.rows, d = z.cols;
    Matrix unit(n, d);
    std::size_t degenerate = 0;
    for (std::size_t r = 0; r < n; ++r) {
        const double* src = z.row_ptr(r);
        double norm = 0.0;
        for (std::size_t c = 0; c < d; ++c) norm += src[c] * src[c];
        norm = std::sqrt(norm);
        if (norm < kNormFloor) {
            norm = kNormFloor;
            ++degenerate;
        }
        double* dst = unit.row_ptr(r);
        for (std::size_t c = 0; c < d; ++c) dst[c] = src[c] / norm;
    }
    if (stats) stats->degenerate_rows = degenerate;
    Matrix s = matmul(unit, transpose(unit));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < i; ++j) { // enforce exact symmetry
            const double v = 0.5 * (s(i, j) + s(j, i));
            s(i, j) = v;
            s(j, i) = v;
        }
    }
    return s;
}

NtXentResult nt_xent_loss(const Matrix& z_concat, double tau) {
    if (!(tau > 0.0)) throw ArgumentError("nt_xent_loss: temperature must be > 0");
    if (z_concat.rows == 0 || z_concat.rows % 2 != 0) {
        throw ArgumentError("nt_xent_loss: need 2M rows with M >= 1, got " +
                            std::to_string(z_concat.rows));
    }
    const std::size_t n = z_concat.rows; // 2M
    const std::size_t m = n / 2;
    const std::size_t d = z_concat.cols;

    // Normalize rows, tracking which hit the floor (they have no projection
    // term in the gradient: z/floor is linear in z there).
    Matrix unit(n, d);
    std::vector<double> norms(n);
    std::vector<char> clamped(n, 0);
    NtXentResult res;
    for (std::size_t r = 0; r < n; ++r) {
        const double* src = z_concat.row_ptr(r);
        double norm = 0.0;
        for (std::size_t c = 0; c < d; ++c) norm += src[c] * src[c];
        norm = std::sqrt(norm);
        if (norm < kNormFloor) {
            norm = kNormFloor;
            clamped[r] = 1;
            ++res.degenerate_rows;
        }
        norms[r] = norm;
        double* dst = unit.row_ptr(r);
        for (std::size_t c = 0; c < d; ++c) dst[c] = src[c] / norm;
    }

    Matrix s = matmul(unit, transpose(unit));

    // Softmax over each row of S/tau excluding the diagonal; A = dL/dS.
    Matrix a(n, n);
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j = (i + m) % n; // positive partner
        double row_max = -1e300;
        for (std::size_t k = 0; k < n; ++k) {
            if (k != i) row_max = std::max(row_max, s(i, k) / tau);
        }
        double denom = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            if (k != i) denom += std::exp(s(i, k) / tau - row_max);
        }
        loss += -(s(i, j) / tau - row_max) + std::log(denom);
        const double scale = 1.0 / (static_cast<double>(n) * tau);
        for (std::size_t k = 0; k < n; ++k) {
            if (k == i) continue;
            const double p = std::exp(s(i, k) / tau - row_max) / denom;
            a(i, k) = scale * (p - (k == j ? 1.0 : 0.0));
        }
    }
    res.loss = loss / static_cast<double>(n);

    // dL/d(unit_r) = sum_k (A[r,k] + A[k,r]) unit_k, then chain through the
    // normalization: g_r = (ghat - (ghat . u) u) / norm, or ghat / floor for
    // clamped rows.
    res.grad = Matrix(n, d);
    for (std::size_t r = 0; r < n; ++r) {
        std::vector<double> ghat(d, 0.0);
        for (std::size_t k = 0; k < n; ++k) {
            const double w = a(r, k) + a(k, r);
            if (w == 0.0) continue;
            const double* uk = unit.row_ptr(k);
            for (std::size_t c = 0; c < d; ++c) ghat[c] += w * uk[c];
        }
        const double* ur = unit.row_ptr(r);
        double* gr = res.grad.row_ptr(r);
        if (clamped[r]) {
            for (std::size_t c = 0; c < d; ++c) gr[c] = ghat[c] / norms[r];
        } else {
            double dot = 0.0;
            for (std::size_t c = 0; c < d; ++c) dot += ghat[c] * ur[c];
            for (std::size_t c = 0; c < d; ++c) gr[c] = (ghat[c] - dot * ur[c]) / norms[r];
        }
    }
    return res;
}

PretrainResult pretrain(KanNetwork& extractor, const Matrix& unlabeled,
                        const ContrastiveConfig& cfg, Optimizer& optimizer) {
    cfg.validate();
    const std::size_t m = cfg.batch_size;
    if (unlabeled.rows < m) {
        throw ArgumentError("pretrain: " + std::to_string(unlabeled.rows) +
                            " rows is fewer than batch size " + std::to_string(m));
    }
    if (unlabeled.cols != extractor.d_in()) {
        throw ShapeError("pretrain: data width " + std::to_string(unlabeled.cols) +
                         " does not match extractor input width " +
                         std::to_string(extractor.d_in()));
    }

    RngStream rng(cfg.seed);
    auto params = Optimizer::collect(extractor);
    std::vector<std::size_t> order(unlabeled.rows);
    std::iota(order.begin(), order.end(), 0);

    PretrainResult result;
    const std::size_t n_batches = unlabeled.rows / m;
    Matrix batch(m, unlabeled.cols);
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(order);
        double epoch_loss = 0.0;
        for (std::size_t b = 0; b < n_batches; ++b) {
            for (std::size_t r = 0; r < m; ++r) {
                const double* src = unlabeled.row_ptr(order[b * m + r]);
                std::copy(src, src + unlabeled.cols, batch.row_ptr(r));
            }
            Matrix view1 = mask_features(batch, cfg.masking_fraction, rng);
            Matrix view2 = mask_features(batch, cfg.masking_fraction, rng);

            std::vector<LayerCache> caches1, caches2;
            Matrix z1 = extractor.forward(view1, &caches1);
            Matrix z2 = extractor.forward(view2, &caches2);

            Matrix z(2 * m, z1.cols);
            for (std::size_t r = 0; r < m; ++r) {
                std::copy(z1.row_ptr(r), z1.row_ptr(r) + z1.cols, z.row_ptr(r));
                std::copy(z2.row_ptr(r), z2.row_ptr(r) + z2.cols, z.row_ptr(m + r));
            }
            NtXentResult nt = nt_xent_loss(z, cfg.temperature);
            epoch_loss += nt.loss;

            Matrix g1(m, z1.cols), g2(m, z1.cols);
            for (std::size_t r = 0; r < m; ++r) {
                std::copy(nt.grad.row_ptr(r), nt.grad.row_ptr(r) + z1.cols, g1.row_ptr(r));
                std::copy(nt.grad.row_ptr(m + r), nt.grad.row_ptr(m + r) + z1.cols, g2.row_ptr(r));
            }
            extractor.zero_gradients();
            extractor.backward(caches1, g1, false);
            extractor.backward(caches2, g2, false);
            optimizer.apply_gradients(params);
        }
        result.epoch_loss.push_back(epoch_loss / static_cast<double>(n_batches));
    }
    return result;
}

} // namespace ckan
