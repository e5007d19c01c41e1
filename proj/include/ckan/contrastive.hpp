#pragma once

#include "ckan/kan.hpp"
#include "ckan/matrix.hpp"
#include "ckan/optim.hpp"
#include "ckan/rng.hpp"

#include <cstdint>
#include <vector>

namespace ckan {

struct ContrastiveConfig {
    std::size_t batch_size = 64;    // M
    double masking_fraction = 0.2;  // p in [0, 1)
    double temperature = 0.5;       // tau > 0
    std::size_t epochs = 50;
    double learning_rate = 1e-3;
    std::uint64_t seed = 0;

    void validate() const; // throws ArgumentError
};

// Per row, zeroes exactly floor(p*d) feature indices drawn uniformly without
// replacement; draws are independent across rows and calls.
Matrix mask_features(const Matrix& x, double p, RngStream& rng);

struct CosineStats {
    std::size_t degenerate_rows = 0; // rows with norm < 1e-12, treated as 1e-12
};

Matrix cosine_similarity_matrix(const Matrix& z, CosineStats* stats = nullptr);

struct NtXentResult {
    double loss = 0.0;
    Matrix grad; // d(loss)/d(z), same shape as z_concat
    std::size_t degenerate_rows = 0;
};

// Rows k and k+M are the two views of sample k. Loss per Eq. NT-Xent with
// cosine similarities and temperature tau; gradient via the analytic chain
// rule through the row normalization.
NtXentResult nt_xent_loss(const Matrix& z_concat, double tau);

struct PretrainResult {
    std::vector<double> epoch_loss; // mean batch loss per epoch
};

// Algorithm: per epoch, shuffle rows, iterate full batches of size M (short
// tail dropped); two independently masked views, forward both, NT-Xent,
// backprop, optimizer step.
PretrainResult pretrain(KanNetwork& extractor, const Matrix& unlabeled,
                        const ContrastiveConfig& cfg, Optimizer& optimizer);

} // namespace ckan
