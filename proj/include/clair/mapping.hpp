#pragma once

#include <string>
#include <vector>

#include "clair/embedding_io.hpp"
#include "clair/linalg.hpp"

namespace clair {

/// Ω taking source-domain vectors into the target domain's frame.
struct MappingMatrix {
    Matrix omega;
    bool trainable = true;
    std::string source = "A";
    std::string target = "B";

    std::size_t dim() const noexcept { return omega.rows(); }
    std::string checkpoint_domain() const { return "omega:" + source + "->" + target; }
};

struct ProcrustesResult {
    MappingMatrix map;
    std::vector<double> singular_values;
    bool rank_deficient = false;   // σ_min < 1e-10 σ_max
    bool underdetermined = false;  // fewer pairs than dimensions
};

struct ProcrustesOptions {
    bool normalize = true;
    bool trainable = true;
};

/// Ω = U Vᵀ from the SVD of Σ_pairs w_B w_Aᵀ; argmin_Ω Σ‖Ω w_A − w_B‖² over orthogonal Ω.
ProcrustesResult solve_procrustes(const Matrix& anchors_a, const Matrix& anchors_b, const ProcrustesOptions& options = {});
ProcrustesResult solve_procrustes(const AnchorSet& anchors_a, const AnchorSet& anchors_b, const ProcrustesOptions& options = {});

/// Σ‖Ω w_A − w_B‖² over pairs.
double procrustes_residual(const Matrix& omega, const Matrix& anchors_a, const Matrix& anchors_b);

Matrix apply_mapping(const Matrix& omega, const Matrix& x);
EmbeddingSet apply_mapping(const MappingMatrix& map, const EmbeddingSet& x);

void write_mapping(const MappingMatrix& map, const std::filesystem::path& path);
MappingMatrix read_mapping(const std::filesystem::path& path);

} // namespace clair
