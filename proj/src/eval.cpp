#include "clair/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "clair/error.hpp"
#include "clair/parallel.hpp"

namespace clair {

namespace {

void check_labels(const Matrix& features, const std::vector<std::uint32_t>& labels, const char* side) {
    if (labels.size() != features.rows() || labels.empty())
        fail(ErrorKind::MissingLabels, std::string(side) + " labels are missing");
    for (std::uint32_t l : labels)
        if (l == kUnlabeled) fail(ErrorKind::MissingLabels, std::string(side) + " contains an unlabeled row");
}

void check_pair(const Matrix& q, const std::vector<std::uint32_t>& ql, const Matrix& g, const std::vector<std::uint32_t>& gl) {
    check_labels(q, ql, "query");
    check_labels(g, gl, "gallery");
    if (q.cols() != g.cols()) fail(ErrorKind::DimensionMismatch, "query and gallery dims differ");
}

struct ByScore {
    const std::vector<double>* s;
    bool operator()(std::size_t a, std::size_t b) const {
        const double sa = (*s)[a], sb = (*s)[b];
        return sa > sb || (sa == sb && a < b);
    }
};

std::vector<double> scores(std::span<const double> query, const Matrix& gallery) {
    std::vector<double> s(gallery.rows());
    for (std::size_t j = 0; j < gallery.rows(); ++j) s[j] = dot(query, gallery.row(j));
    return s;
}

char* fmt(char* buf, std::size_t n, double v) {
    std::snprintf(buf, n, "%.6f", v);
    return buf;
}

} // namespace

std::vector<std::size_t> rank_gallery(std::span<const double> query, const Matrix& gallery) {
    const std::vector<double> s = scores(query, gallery);
    std::vector<std::size_t> idx(gallery.rows());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), ByScore{&s});
    return idx;
}

double precision_at_k(const Matrix& query, const std::vector<std::uint32_t>& query_labels, const Matrix& gallery,
                      const std::vector<std::uint32_t>& gallery_labels, std::size_t k, std::size_t threads) {
    check_pair(query, query_labels, gallery, gallery_labels);
    if (k < 1) fail(ErrorKind::InvalidConfig, "k must be at least 1");
    if (gallery.rows() < k)
        fail(ErrorKind::GalleryTooSmall, "gallery of " + std::to_string(gallery.rows()) + " cannot serve k = " + std::to_string(k));

    std::vector<std::size_t> hits(query.rows(), 0);
    parallel_for(query.rows(), threads, [&](std::size_t i) {
        const std::vector<double> s = scores(query.row(i), gallery);
        std::vector<std::size_t> idx(gallery.rows());
        std::iota(idx.begin(), idx.end(), 0);
        std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(), ByScore{&s});
        for (std::size_t t = 0; t < k; ++t) hits[i] += gallery_labels[idx[t]] == query_labels[i];
    });
    const std::size_t total = std::accumulate(hits.begin(), hits.end(), std::size_t{0});
    return static_cast<double>(total) / (static_cast<double>(k) * static_cast<double>(query.rows()));
}

std::vector<PrPoint> pr_curve(const Matrix& query, const std::vector<std::uint32_t>& query_labels, const Matrix& gallery,
                              const std::vector<std::uint32_t>& gallery_labels, std::size_t threads) {
    check_pair(query, query_labels, gallery, gallery_labels);
    const std::size_t m = gallery.rows();
    std::vector<std::vector<std::uint32_t>> cum(query.rows());
    parallel_for(query.rows(), threads, [&](std::size_t i) {
        const auto order = rank_gallery(query.row(i), gallery);
        auto& c = cum[i];
        c.resize(m);
        std::uint32_t tp = 0;
        for (std::size_t r = 0; r < m; ++r) {
            tp += gallery_labels[order[r]] == query_labels[i];
            c[r] = tp;
        }
    });

    std::vector<std::uint64_t> tp(m, 0);
    std::uint64_t relevant = 0;
    for (const auto& c : cum) {
        for (std::size_t r = 0; r < m; ++r) tp[r] += c[r];
        relevant += c.back();
    }
    std::vector<PrPoint> out(m);
    const double q = static_cast<double>(query.rows());
    for (std::size_t r = 0; r < m; ++r) {
        out[r].precision = static_cast<double>(tp[r]) / (static_cast<double>(r + 1) * q);
        out[r].recall = relevant ? static_cast<double>(tp[r]) / static_cast<double>(relevant) : 0.0;
    }
    return out;
}

double precision_at_k(const EmbeddingSet& query, const EmbeddingSet& gallery, const Encoder& theta_k, bool query_mapped,
                      bool gallery_mapped, std::size_t k, std::size_t threads) {
    check_labels(query.vectors, query.labels, "query");
    check_labels(gallery.vectors, gallery.labels, "gallery");
    return precision_at_k(encode_all(theta_k, query.vectors, query_mapped, threads), query.labels,
                          encode_all(theta_k, gallery.vectors, gallery_mapped, threads), gallery.labels, k, threads);
}

std::vector<PrPoint> pr_curve(const EmbeddingSet& query, const EmbeddingSet& gallery, const Encoder& theta_k,
                              bool query_mapped, bool gallery_mapped, std::size_t threads) {
    check_labels(query.vectors, query.labels, "query");
    check_labels(gallery.vectors, gallery.labels, "gallery");
    return pr_curve(encode_all(theta_k, query.vectors, query_mapped, threads), query.labels,
                    encode_all(theta_k, gallery.vectors, gallery_mapped, threads), gallery.labels, threads);
}

RetrievalReport retrieval_report(const EmbeddingSet& query, const EmbeddingSet& gallery, const Encoder& theta_k,
                                 bool query_mapped, bool gallery_mapped, const std::vector<std::size_t>& ks,
                                 std::size_t threads) {
    check_labels(query.vectors, query.labels, "query");
    check_labels(gallery.vectors, gallery.labels, "gallery");
    const Matrix q = encode_all(theta_k, query.vectors, query_mapped, threads);
    const Matrix g = encode_all(theta_k, gallery.vectors, gallery_mapped, threads);
    RetrievalReport r;
    r.query_domain = query.domain;
    r.gallery_domain = gallery.domain;
    r.query_count = query.size();
    r.gallery_count = gallery.size();
    for (std::size_t k : ks) r.p_at_k[k] = precision_at_k(q, query.labels, g, gallery.labels, k, threads);
    r.pr_points = pr_curve(q, query.labels, g, gallery.labels, threads);
    return r;
}

std::pair<RetrievalReport, RetrievalReport> bidirectional_report(const EmbeddingSet& a, const EmbeddingSet& b,
                                                                 const Encoder& theta_k, bool a_mapped,
                                                                 const std::vector<std::size_t>& ks, std::size_t threads) {
    return {retrieval_report(a, b, theta_k, a_mapped, !a_mapped, ks, threads),
            retrieval_report(b, a, theta_k, !a_mapped, a_mapped, ks, threads)};
}

nlohmann::json to_json(const RetrievalReport& r) {
    nlohmann::json p = nlohmann::json::object();
    for (const auto& [k, v] : r.p_at_k) p["P@" + std::to_string(k)] = v;
    nlohmann::json pr = nlohmann::json::array();
    for (const PrPoint& pt : r.pr_points) pr.push_back({pt.recall, pt.precision});
    return {{"query_domain", r.query_domain}, {"gallery_domain", r.gallery_domain}, {"query_count", r.query_count},
            {"gallery_count", r.gallery_count}, {"precision_at_k", p}, {"pr_curve", pr}};
}

RetrievalReport report_from_json(const nlohmann::json& j) {
    RetrievalReport r;
    try {
        r.query_domain = j.at("query_domain").get<std::string>();
        r.gallery_domain = j.at("gallery_domain").get<std::string>();
        r.query_count = j.at("query_count").get<std::size_t>();
        r.gallery_count = j.at("gallery_count").get<std::size_t>();
        for (const auto& [key, v] : j.at("precision_at_k").items())
            r.p_at_k[static_cast<std::size_t>(std::stoul(key.substr(2)))] = v.get<double>();
        for (const auto& pt : j.at("pr_curve")) r.pr_points.push_back({pt.at(0).get<double>(), pt.at(1).get<double>()});
    } catch (const std::exception& e) {
        fail(ErrorKind::ConfigError, std::string("malformed retrieval report: ") + e.what());
    }
    return r;
}

std::string render_text(const RetrievalReport& r) {
    std::ostringstream out;
    char buf[64], val[32];
    out << r.query_domain << " -> " << r.gallery_domain << "  (" << r.query_count << " queries, " << r.gallery_count
        << " gallery)\n";
    for (const auto& [k, v] : r.p_at_k) {
        std::snprintf(buf, sizeof buf, "  %-8s %s\n", ("P@" + std::to_string(k)).c_str(), fmt(val, sizeof val, v));
        out << buf;
    }
    return out.str();
}

std::string render_pr_tsv(const RetrievalReport& r) {
    std::ostringstream out;
    char a[32], b[32];
    for (const PrPoint& pt : r.pr_points) out << fmt(a, sizeof a, pt.recall) << '\t' << fmt(b, sizeof b, pt.precision) << '\n';
    return out.str();
}

} // namespace clair
