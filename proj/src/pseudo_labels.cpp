#include "clair/pseudo_labels.hpp"

#include <cmath>

#include "clair/error.hpp"
#include "clair/parallel.hpp"

namespace clair {

void PseudoLabelMatrix::reassign() {
    assignments.resize(rows());
    for (std::size_t i = 0; i < rows(); ++i) assignments[i] = argmax(weights.row(i));
}

void RefineConfig::validate() const {
    if (!(c_psi > 0.0)) fail(ErrorKind::InvalidConfig, "c_psi must be positive");
    if (!(lambda_psi > 0.0)) fail(ErrorKind::InvalidConfig, "lambda_psi must be positive");
}

PseudoLabelMatrix from_weights(Matrix weights) {
    PseudoLabelMatrix out{std::move(weights), {}};
    out.reassign();
    return out;
}

PseudoLabelMatrix init_pseudo_labels(const Matrix& features, const Matrix& anchors) {
    if (features.cols() != anchors.cols())
        fail(ErrorKind::DimensionMismatch, "features have dim " + std::to_string(features.cols()) + ", anchors " +
                                               std::to_string(anchors.cols()));
    Matrix w(features.rows(), anchors.rows());
    for (std::size_t i = 0; i < features.rows(); ++i)
        for (std::size_t j = 0; j < anchors.rows(); ++j) w(i, j) = cosine_similarity(features.row(i), anchors.row(j));
    return from_weights(std::move(w));
}

PseudoLabelMatrix init_pseudo_labels(const EmbeddingSet& features, const AnchorSet& anchors) {
    return init_pseudo_labels(features.vectors, anchors.anchors);
}

Vector psi(std::span<const double> y, const RefineConfig& cfg) {
    const double scale = cfg.c_psi / (cfg.lambda_psi * std::sqrt(2.0 * M_PI));
    const double denom = 2.0 * cfg.lambda_psi * cfg.lambda_psi;
    Vector out(y.size());
    for (std::size_t j = 0; j < y.size(); ++j) out[j] = scale * std::exp(-(y[j] - 0.5) * (y[j] - 0.5) / denom);
    return out;
}

double kl_divergence(std::span<const double> p, std::span<const double> q) {
    if (p.size() != q.size()) fail(ErrorKind::DimensionMismatch, "KL operands differ in length");
    double s = 0.0;
    for (std::size_t j = 0; j < p.size(); ++j)
        if (p[j] > 0.0) s += p[j] * (std::log(p[j]) - std::log(q[j]));
    return s;
}

double refinement_kl(std::span<const double> y, std::span<const double> target) {
    if (y.size() != target.size()) fail(ErrorKind::DimensionMismatch, "label row and target differ in length");
    // Log-space form stays accurate when y is pushed to large magnitudes.
    const Vector p = softmax(target);
    const double lse_t = log_sum_exp(target), lse_y = log_sum_exp(y);
    double s = 0.0;
    for (std::size_t j = 0; j < y.size(); ++j) s += p[j] * ((target[j] - lse_t) - (y[j] - lse_y));
    return s;
}

Vector refinement_gradient(std::span<const double> y, std::span<const double> target) {
    if (y.size() != target.size()) fail(ErrorKind::DimensionMismatch, "label row and target differ in length");
    Vector g = softmax(y);
    const Vector p = softmax(target);
    for (std::size_t j = 0; j < g.size(); ++j) g[j] -= p[j];
    return g;
}

Vector refine_row(std::span<const double> y, std::span<const double> target, const RefineConfig& cfg) {
    const Vector g = refinement_gradient(y, target);
    const Vector s = psi(y, cfg);
    Vector out(y.begin(), y.end());
    for (std::size_t j = 0; j < out.size(); ++j) out[j] -= s[j] * g[j];
    return out;
}

Matrix target_logits(const Matrix& bank, const Matrix& anchors) {
    if (bank.cols() != anchors.cols()) fail(ErrorKind::DimensionMismatch, "bank and anchor dims differ");
    Matrix out(bank.rows(), anchors.rows());
    for (std::size_t i = 0; i < bank.rows(); ++i)
        for (std::size_t j = 0; j < anchors.rows(); ++j) out(i, j) = cosine_similarity(bank.row(i), anchors.row(j));
    return out;
}

PseudoLabelMatrix refinement_step(const PseudoLabelMatrix& labels, const Matrix& bank, const Matrix& anchors,
                                  const RefineConfig& cfg, std::size_t threads) {
    cfg.validate();
    if (bank.rows() != labels.rows()) fail(ErrorKind::DimensionMismatch, "bank rows differ from label rows");
    if (bank.cols() != anchors.cols()) fail(ErrorKind::DimensionMismatch, "bank and anchor dims differ");
    if (anchors.rows() != labels.classes()) fail(ErrorKind::DimensionMismatch, "anchor count differs from label width");
    PseudoLabelMatrix out = labels;
    parallel_for(labels.rows(), threads, [&](std::size_t i) {
        Vector target(anchors.rows());
        for (std::size_t j = 0; j < anchors.rows(); ++j) target[j] = cosine_similarity(bank.row(i), anchors.row(j));
        const Vector y = refine_row(labels.weights.row(i), target, cfg);
        std::copy(y.begin(), y.end(), out.weights.row(i).begin());
        out.assignments[i] = argmax(y);
    });
    return out;
}

PseudoLabelMatrix refine(const PseudoLabelMatrix& labels, const Matrix& bank, const Matrix& anchors,
                         const RefineConfig& cfg, std::size_t threads) {
    cfg.validate();
    PseudoLabelMatrix cur = labels;
    for (std::size_t s = 0; s < cfg.n_r; ++s) cur = refinement_step(cur, bank, anchors, cfg, threads);
    return cur;
}

double label_accuracy(const PseudoLabelMatrix& labels, const std::vector<std::uint32_t>& truth) {
    if (truth.size() != labels.rows()) fail(ErrorKind::DimensionMismatch, "truth length differs from label rows");
    if (truth.empty()) return 0.0;
    std::size_t hit = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) hit += labels.assignments[i] == truth[i];
    return static_cast<double>(hit) / static_cast<double>(truth.size());
}

std::size_t count_changes(const PseudoLabelMatrix& before, const PseudoLabelMatrix& after) {
    if (before.rows() != after.rows()) fail(ErrorKind::DimensionMismatch, "label matrices differ in rows");
    std::size_t n = 0;
    for (std::size_t i = 0; i < before.rows(); ++i) n += before.assignments[i] != after.assignments[i];
    return n;
}

} // namespace clair
