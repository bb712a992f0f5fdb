#pragma once

#include <cstdint>
#include <vector>

#include "clair/embedding_io.hpp"
#include "clair/rng.hpp"

namespace clair {

struct SyntheticConfig {
    std::size_t n_classes_train = 12;
    std::size_t n_classes_test = 6;
    std::size_t per_class = 80;
    std::size_t dim = 32;
    double noise_sigma = 0.1;
    double anchor_noise = 0.0;
    /// Fraction of training-class anchors replaced by misleading directions.
    double corrupt_fraction = 0.0;
    /// A corrupted anchor keeps cosine max_{j≠c}(p_c·p_j) + margin with its own
    /// prototype and leaves the prototype span with the rest of its mass.
    double corrupt_margin = 0.08;
    bool identity_rotation = false;
    std::uint64_t seed = 0;
};

struct SyntheticData {
    EmbeddingSet a;
    EmbeddingSet b;
    AnchorSet anchors_a;  // training classes only
    AnchorSet anchors_b;
    Matrix rotation;      // planted Q, b = Q·a before noise
    Matrix prototypes;    // all classes, domain A frame
    std::vector<std::size_t> corrupted_classes;
};

SyntheticData generate_synthetic_pair(const SyntheticConfig& cfg);

/// Random orthogonal matrix from modified Gram-Schmidt of a Gaussian matrix.
Matrix random_orthogonal(std::size_t d, Rng& rng);
Vector random_unit_vector(std::size_t d, Rng& rng);

/// Rows with label < n_train go to the first set, the rest to the second.
std::pair<EmbeddingSet, EmbeddingSet> split_by_class(const EmbeddingSet& set, std::size_t n_train);

} // namespace clair
