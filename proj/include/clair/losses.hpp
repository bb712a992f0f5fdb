#pragma once

#include <vector>

#include "clair/linalg.hpp"
#include "clair/model.hpp"

namespace clair {

struct LossWeights {
    double w_kl = 1.0;
    double w_ii = 1.0;
    double w_ic = 1.0;
    double w_id = 1.0;
    double tau = 0.1;
    /// Adds the positive pair to the instance-loss denominator.
    bool include_positive = true;

    void validate() const;
};

struct ContrastiveResult {
    double value = 0.0;
    std::size_t used = 0;
    std::size_t skipped = 0;

    bool skipped_all() const noexcept { return used == 0 && skipped > 0; }
};

/// Mean over rows of −log[e^{x·x'/τ} / (e^{x·x'/τ} + Σ_a e^{x·x̃_a/τ})].
/// Gradients (optional) are in the unit features x and x'.
double loss_ii(const Matrix& x, const Matrix& x_aug, const Matrix& bank, double tau, Matrix* dx = nullptr,
               Matrix* dx_aug = nullptr, bool include_positive = true);

/// Positives are the bank rows sharing the query's pseudo-class; rows without
/// positives are skipped and the mean taken over the rest.
ContrastiveResult loss_cluster(const Matrix& x, const std::vector<std::size_t>& assignments, const Matrix& bank,
                               const std::vector<std::size_t>& bank_assignments, double tau, Matrix* dx = nullptr);

ContrastiveResult loss_ic(const Matrix& x, const std::vector<std::size_t>& assignments, const MemoryBank& own_bank,
                          double tau, Matrix* dx = nullptr);
ContrastiveResult loss_id(const Matrix& x, const std::vector<std::size_t>& assignments, const MemoryBank& other_bank,
                          double tau, Matrix* dx = nullptr);

/// Mean over rows of KL(σ[y] ‖ σ[x̂]) + KL(σ[x̂] ‖ σ[y]) with x̂_j = x·ã_j and y fixed.
double loss_kl(const Matrix& x, const Matrix& anchors, const Matrix& y, Matrix* dx = nullptr, Matrix* d_anchors = nullptr);

/// One domain's share of a training step, all in raw input space.
struct DomainBatch {
    Matrix inputs;
    Matrix augmented;
    std::vector<std::size_t> assignments;
    Matrix label_weights;
    Matrix anchors;
    bool mapped = false;
};

struct LossComponents {
    double kl = 0.0;
    double ii = 0.0;
    double ic = 0.0;
    double id = 0.0;
};

struct LossReport {
    double total = 0.0;
    LossComponents a;
    LossComponents b;
    LossComponents mean;  // 0.5 (a + b)
    std::size_t ic_skipped = 0;
    std::size_t id_skipped = 0;
    bool id_skipped_all = false;
    Vector gradient;
};

/// Σ_l w_l · 0.5 (L_l^A + L_l^B) and, when requested, its gradient in the flat
/// parameters of the encoder.
LossReport loss_total(const Encoder& enc, const DomainBatch& a, const DomainBatch& b, const MemoryBank& bank_a,
                      const MemoryBank& bank_b, const LossWeights& weights, bool with_gradient = true);

double weighted_total(const LossComponents& mean, const LossWeights& weights);

} // namespace clair
