#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "clair/embedding_io.hpp"
#include "clair/linalg.hpp"

namespace clair {

/// N×K label weights y_i with their hard assignments ỹ_i = argmax_j y_ij.
struct PseudoLabelMatrix {
    Matrix weights;
    std::vector<std::size_t> assignments;

    std::size_t rows() const noexcept { return weights.rows(); }
    std::size_t classes() const noexcept { return weights.cols(); }

    /// Recomputes assignments from weights.
    void reassign();
};

struct RefineConfig {
    double c_psi = 1e4;
    double lambda_psi = 20.0;
    std::size_t n_r = 10;

    void validate() const;
};

PseudoLabelMatrix from_weights(Matrix weights);

/// y_ij = cos(f_i, w_j).
PseudoLabelMatrix init_pseudo_labels(const Matrix& features, const Matrix& anchors);
PseudoLabelMatrix init_pseudo_labels(const EmbeddingSet& features, const AnchorSet& anchors);

/// ψ_j = c/(λ√(2π)) exp(-(y_j - 0.5)² / (2λ²)).
Vector psi(std::span<const double> y, const RefineConfig& cfg);

/// KL(p ‖ q) for probability vectors.
double kl_divergence(std::span<const double> p, std::span<const double> q);

/// KL(σ[target] ‖ σ[y]) and its gradient in y, σ(y) - σ(target).
double refinement_kl(std::span<const double> y, std::span<const double> target);
Vector refinement_gradient(std::span<const double> y, std::span<const double> target);

/// y ← y - ψ(y) ∘ (σ(y) - σ(target)).
Vector refine_row(std::span<const double> y, std::span<const double> target, const RefineConfig& cfg);

/// Target logits x̂_i: cosines of each bank row against each (encoded) anchor.
Matrix target_logits(const Matrix& bank, const Matrix& anchors);

PseudoLabelMatrix refinement_step(const PseudoLabelMatrix& labels, const Matrix& bank, const Matrix& anchors,
                                  const RefineConfig& cfg, std::size_t threads = 1);
PseudoLabelMatrix refine(const PseudoLabelMatrix& labels, const Matrix& bank, const Matrix& anchors,
                         const RefineConfig& cfg, std::size_t threads = 1);

double label_accuracy(const PseudoLabelMatrix& labels, const std::vector<std::uint32_t>& truth);
std::size_t count_changes(const PseudoLabelMatrix& before, const PseudoLabelMatrix& after);

} // namespace clair
