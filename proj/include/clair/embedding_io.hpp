#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "clair/linalg.hpp"

namespace clair {

inline constexpr std::uint32_t kUnlabeled = 0xFFFFFFFFu;

/// N embedding rows of one domain. Labels are either empty (unlabeled set) or
/// hold one entry per row, possibly kUnlabeled.
struct EmbeddingSet {
    std::string domain;
    Matrix vectors;
    std::vector<std::uint32_t> labels;
    std::vector<std::string> class_names;
    std::optional<bool> normalized;

    std::size_t size() const noexcept { return vectors.rows(); }
    std::size_t dim() const noexcept { return vectors.cols(); }
    bool has_labels() const noexcept { return !labels.empty(); }

    void validate() const;
};

/// K class anchors, row j belongs to class_names[j].
struct AnchorSet {
    std::string domain;
    Matrix anchors;
    std::vector<std::string> class_names;

    std::size_t count() const noexcept { return anchors.rows(); }
    std::size_t dim() const noexcept { return anchors.cols(); }

    void validate() const;
};

void write_embedding_set(const EmbeddingSet& set, const std::filesystem::path& path);
EmbeddingSet read_embedding_set(const std::filesystem::path& path);

void write_anchor_set(const AnchorSet& set, const std::filesystem::path& path);
AnchorSet read_anchor_set(const std::filesystem::path& path);

/// Stores a bare matrix (Ω, head weights, pseudo-label weights) as EMB1.
void write_matrix(const Matrix& m, const std::string& domain, const std::filesystem::path& path);
Matrix read_matrix(const std::filesystem::path& path, std::string* domain = nullptr);

/// Rows in the given order; labels and metadata carried along.
EmbeddingSet subset(const EmbeddingSet& set, const std::vector<std::size_t>& rows);

struct ValidationSplit {
    EmbeddingSet train;
    EmbeddingSet val;
    std::vector<std::size_t> train_rows;
    std::vector<std::size_t> val_rows;
};

/// Holds out min(per_class, n_c - 1) rows of each labeled class. Both halves
/// keep original row order. Unlabeled rows stay in train.
ValidationSplit split_validation(const EmbeddingSet& set, std::size_t per_class, std::uint64_t seed);

/// Writes to a sibling temporary file and renames it over the target.
void write_file_atomic(const std::filesystem::path& path, const std::string& bytes);
std::string read_file(const std::filesystem::path& path);

} // namespace clair
