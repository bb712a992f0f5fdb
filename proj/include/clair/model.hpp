#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "clair/linalg.hpp"
#include "clair/pseudo_labels.hpp"
#include "clair/rng.hpp"

namespace clair {

struct Layer {
    Matrix weight;  // d_out × d_in
    Vector bias;
};

/// Affine layers with ReLU between them, followed by L2 normalization.
struct ProjectionHead {
    std::vector<Layer> layers;

    std::size_t d_in() const noexcept { return layers.empty() ? 0 : layers.front().weight.cols(); }
    std::size_t d_out() const noexcept { return layers.empty() ? 0 : layers.back().weight.rows(); }
    std::size_t parameter_count() const noexcept;
};

enum class HeadInit { Orthogonal, Gaussian };

struct HeadConfig {
    std::size_t d_out = 64;
    std::vector<std::size_t> hidden;  // empty: single affine layer
    HeadInit init = HeadInit::Orthogonal;
};

/// Orthogonal init takes orthonormal rows or columns from Gram-Schmidt of a
/// seeded Gaussian; Gaussian init scales N(0,1) entries by 1/√d_in. Biases 0.
ProjectionHead make_head(std::size_t d_in, const HeadConfig& cfg, std::uint64_t seed);

/// Projection head plus the optional mapping Ω applied first to inputs from
/// the mapped (source) domain.
struct Encoder {
    ProjectionHead head;
    Matrix omega;  // empty when no mapping is used
    bool omega_trainable = true;

    bool has_mapping() const noexcept { return !omega.empty(); }
    std::size_t parameter_count() const noexcept;
};

struct ForwardCache {
    Vector raw;                    // input before Ω
    std::vector<Vector> inputs;    // input to each layer
    std::vector<Vector> pre;       // pre-activation of each layer
    double out_norm = 0.0;
    Vector out;
};

/// x = normalize(W f + b) for the single-layer case; ZeroVector when the final
/// pre-activation vanishes.
Vector forward(const ProjectionHead& head, std::span<const double> f);

Vector encode(const Encoder& enc, std::span<const double> f, bool mapped, ForwardCache* cache = nullptr);
Matrix encode_all(const Encoder& enc, const Matrix& x, bool mapped, std::size_t threads = 1);

/// Accumulates into grad (flat layout, see flatten) the gradient of a scalar
/// whose gradient in the normalized output is d_out.
void backward(const Encoder& enc, const ForwardCache& cache, std::span<const double> d_out, bool mapped,
              std::span<double> grad);

/// Flat parameter order: per layer the weight row-major then the bias, then Ω
/// when it is trainable.
Vector flatten(const Encoder& enc);
void unflatten(Encoder& enc, std::span<const double> params);
Vector flatten(const ProjectionHead& head);
void unflatten(ProjectionHead& head, std::span<const double> params);

/// θ_k ← m θ_k + (1 − m) θ_q over every parameter, Ω included when trainable.
void momentum_update(ProjectionHead& theta_k, const ProjectionHead& theta_q, double m);
void momentum_update(Encoder& theta_k, const Encoder& theta_q, double m);

/// θ ← θ − lr ∇θ.
void sgd_step(Encoder& enc, std::span<const double> gradient, double lr);

struct MemoryBank {
    std::string domain;
    Matrix features;                      // unit rows x̃
    std::vector<std::size_t> assignments; // pseudo-class snapshot

    std::size_t size() const noexcept { return features.rows(); }
};

MemoryBank rebuild_memory_bank(const Encoder& theta_k, const Matrix& data, bool mapped,
                               const PseudoLabelMatrix& labels, const std::string& domain, std::size_t threads = 1);

struct AugmentConfig {
    double noise_sigma = 0.1;
    double dropout_p = 0.1;

    void validate() const;
};

/// f' = normalize(mask ∘ (f + ε)). A vanishing result is retried once with a
/// derived seed before raising ZeroVector.
Vector augment_embedding(std::span<const double> f, const AugmentConfig& cfg, std::uint64_t seed);

} // namespace clair
