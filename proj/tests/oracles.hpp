#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "clair/linalg.hpp"
#include "clair/losses.hpp"
#include "clair/pseudo_labels.hpp"
#include "test_util.hpp"

namespace clair::test {

struct RetrievalInstance {
    Matrix query, gallery;
    std::vector<std::uint32_t> query_labels, gallery_labels;
};

/// Coarse integer-valued features when `ties` is set, so equal scores are common.
inline RetrievalInstance random_retrieval(std::mt19937_64& rng, std::size_t nq, std::size_t ng, std::size_t d,
                                          std::uint32_t classes, bool ties) {
    RetrievalInstance in{Matrix(nq, d), Matrix(ng, d), std::vector<std::uint32_t>(nq), std::vector<std::uint32_t>(ng)};
    std::uniform_int_distribution<int> coarse(-2, 2);
    std::normal_distribution<double> fine(0.0, 1.0);
    std::uniform_int_distribution<std::uint32_t> lab(0, classes - 1);
    for (Matrix* m : {&in.query, &in.gallery})
        for (double& x : m->data()) x = ties ? coarse(rng) : fine(rng);
    for (auto& l : in.query_labels) l = lab(rng);
    for (auto& l : in.gallery_labels) l = lab(rng);
    return in;
}

/// Full similarity table, then an explicit stable sort per query.
inline std::vector<std::vector<std::size_t>> brute_rankings(const RetrievalInstance& in) {
    const std::size_t d = in.query.cols();
    std::vector<std::vector<std::size_t>> out;
    for (std::size_t i = 0; i < in.query.rows(); ++i) {
        std::vector<std::pair<double, std::size_t>> s;
        for (std::size_t j = 0; j < in.gallery.rows(); ++j) {
            double v = 0.0;
            for (std::size_t k = 0; k < d; ++k) v += in.query(i, k) * in.gallery(j, k);
            s.emplace_back(v, j);
        }
        std::stable_sort(s.begin(), s.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
        std::vector<std::size_t> order;
        for (const auto& p : s) order.push_back(p.second);
        out.push_back(std::move(order));
    }
    return out;
}

inline double brute_precision_at_k(const RetrievalInstance& in, std::size_t k) {
    const auto ranks = brute_rankings(in);
    std::uint64_t hits = 0;
    for (std::size_t i = 0; i < ranks.size(); ++i)
        for (std::size_t t = 0; t < k; ++t) hits += in.gallery_labels[ranks[i][t]] == in.query_labels[i];
    return static_cast<double>(hits) / (static_cast<double>(k) * static_cast<double>(ranks.size()));
}

/// (recall, precision) at every depth.
inline std::vector<std::pair<double, double>> brute_pr(const RetrievalInstance& in) {
    const auto ranks = brute_rankings(in);
    const std::size_t m = in.gallery.rows();
    std::uint64_t relevant = 0;
    for (std::size_t i = 0; i < ranks.size(); ++i)
        for (std::size_t j = 0; j < m; ++j) relevant += in.gallery_labels[j] == in.query_labels[i];
    std::vector<std::pair<double, double>> out;
    for (std::size_t r = 1; r <= m; ++r) {
        std::uint64_t tp = 0;
        for (std::size_t i = 0; i < ranks.size(); ++i)
            for (std::size_t t = 0; t < r; ++t) tp += in.gallery_labels[ranks[i][t]] == in.query_labels[i];
        out.emplace_back(relevant ? static_cast<double>(tp) / static_cast<double>(relevant) : 0.0,
                         static_cast<double>(tp) / (static_cast<double>(r) * static_cast<double>(ranks.size())));
    }
    return out;
}

struct LossInstance {
    Encoder enc;
    DomainBatch a, b;
    MemoryBank bank_a, bank_b;
};

inline std::vector<std::size_t> random_classes(std::size_t n, std::size_t k, std::mt19937_64& rng) {
    std::vector<std::size_t> out(n);
    for (auto& a : out) a = std::uniform_int_distribution<std::size_t>(0, k - 1)(rng);
    return out;
}

/// Gaussian head with random biases and a trainable random Ω applied to domain A.
inline LossInstance random_loss_instance(std::mt19937_64& rng, std::size_t batch, std::size_t d_in, std::size_t d_out,
                                         std::size_t k, bool hidden) {
    LossInstance in;
    HeadConfig hc{d_out, hidden ? std::vector<std::size_t>{9} : std::vector<std::size_t>{}, HeadInit::Gaussian};
    in.enc = Encoder{make_head(d_in, hc, rng()), random_matrix(d_in, d_in, rng), true};
    for (Layer& l : in.enc.head.layers)
        for (double& b : l.bias) b = std::uniform_real_distribution<double>(-0.2, 0.2)(rng);
    auto make_batch = [&](bool mapped) {
        DomainBatch db;
        db.inputs = random_matrix(batch, d_in, rng);
        db.augmented = random_matrix(batch, d_in, rng);
        db.assignments = random_classes(batch, k, rng);
        db.label_weights = random_matrix(batch, k, rng);
        db.anchors = random_matrix(k, d_in, rng);
        db.mapped = mapped;
        return db;
    };
    in.a = make_batch(true);
    in.b = make_batch(false);
    in.bank_a = MemoryBank{"A", random_unit_rows(15, d_out, rng), random_classes(15, k, rng)};
    in.bank_b = MemoryBank{"B", random_unit_rows(13, d_out, rng), random_classes(13, k, rng)};
    return in;
}

inline double relative_error(double analytic, double numeric) {
    return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-6});
}

/// Largest relative error of the analytic total-loss gradient against central differences.
inline double loss_gradient_error(const LossInstance& in, const LossWeights& w, double h = 1e-5) {
    const LossReport r = loss_total(in.enc, in.a, in.b, in.bank_a, in.bank_b, w);
    const Vector p = flatten(in.enc);
    Encoder probe = in.enc;
    double worst = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        Vector pp = p;
        pp[i] = p[i] + h;
        unflatten(probe, pp);
        const double fp = loss_total(probe, in.a, in.b, in.bank_a, in.bank_b, w, false).total;
        pp[i] = p[i] - h;
        unflatten(probe, pp);
        const double fm = loss_total(probe, in.a, in.b, in.bank_a, in.bank_b, w, false).total;
        worst = std::max(worst, relative_error(r.gradient[i], (fp - fm) / (2 * h)));
    }
    return worst;
}

/// Same check for the refinement objective KL(σ[target] ‖ σ[y]) in y.
inline double refinement_gradient_error(std::span<const double> y, std::span<const double> target, double h = 1e-5) {
    const Vector g = refinement_gradient(y, target);
    double worst = 0.0;
    Vector probe(y.begin(), y.end());
    for (std::size_t j = 0; j < y.size(); ++j) {
        probe[j] = y[j] + h;
        const double fp = refinement_kl(probe, target);
        probe[j] = y[j] - h;
        const double fm = refinement_kl(probe, target);
        probe[j] = y[j];
        worst = std::max(worst, relative_error(g[j], (fp - fm) / (2 * h)));
    }
    return worst;
}

} // namespace clair::test
