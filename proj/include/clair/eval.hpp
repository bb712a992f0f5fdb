#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "clair/embedding_io.hpp"
#include "clair/model.hpp"

namespace clair {

struct PrPoint {
    double recall = 0.0;
    double precision = 0.0;

    bool operator==(const PrPoint&) const = default;
};

struct RetrievalReport {
    std::string query_domain;
    std::string gallery_domain;
    std::map<std::size_t, double> p_at_k;
    std::vector<PrPoint> pr_points;
    std::size_t query_count = 0;
    std::size_t gallery_count = 0;

    bool operator==(const RetrievalReport&) const = default;
};

/// Gallery indices by descending dot-product similarity, ties by ascending index.
std::vector<std::size_t> rank_gallery(std::span<const double> query, const Matrix& gallery);

/// Per-query mean of (correct in top k) / k over already-encoded features.
double precision_at_k(const Matrix& query, const std::vector<std::uint32_t>& query_labels, const Matrix& gallery,
                      const std::vector<std::uint32_t>& gallery_labels, std::size_t k, std::size_t threads = 1);

/// Micro-averaged curve with one point per ranking depth r = 1..M:
/// P(r) = ΣTP_q(r) / (r·Q), R(r) = ΣTP_q(r) / Σ|relevant_q|.
std::vector<PrPoint> pr_curve(const Matrix& query, const std::vector<std::uint32_t>& query_labels, const Matrix& gallery,
                              const std::vector<std::uint32_t>& gallery_labels, std::size_t threads = 1);

/// Encodes both sides with the momentum encoder; the mapped side goes through Ω first.
double precision_at_k(const EmbeddingSet& query, const EmbeddingSet& gallery, const Encoder& theta_k, bool query_mapped,
                      bool gallery_mapped, std::size_t k, std::size_t threads = 1);
std::vector<PrPoint> pr_curve(const EmbeddingSet& query, const EmbeddingSet& gallery, const Encoder& theta_k,
                              bool query_mapped, bool gallery_mapped, std::size_t threads = 1);

RetrievalReport retrieval_report(const EmbeddingSet& query, const EmbeddingSet& gallery, const Encoder& theta_k,
                                 bool query_mapped, bool gallery_mapped, const std::vector<std::size_t>& ks,
                                 std::size_t threads = 1);

/// A→B then B→A; `a_mapped` tells which domain's features pass through Ω.
std::pair<RetrievalReport, RetrievalReport> bidirectional_report(const EmbeddingSet& a, const EmbeddingSet& b,
                                                                 const Encoder& theta_k, bool a_mapped,
                                                                 const std::vector<std::size_t>& ks,
                                                                 std::size_t threads = 1);

nlohmann::json to_json(const RetrievalReport& r);
RetrievalReport report_from_json(const nlohmann::json& j);
std::string render_text(const RetrievalReport& r);
std::string render_pr_tsv(const RetrievalReport& r);

} // namespace clair
