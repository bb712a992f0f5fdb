#include "clair/losses.hpp"

#include <cmath>

#include "clair/error.hpp"

namespace clair {

namespace {

void require_dim(const Matrix& a, const Matrix& b, const char* what) {
    if (a.cols() != b.cols()) fail(ErrorKind::DimensionMismatch, what);
}

void zero_like(Matrix* m, const Matrix& shape) {
    if (m) *m = Matrix(shape.rows(), shape.cols());
}

void add_scaled(std::span<double> dst, std::span<const double> src, double s) {
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += s * src[k];
}

} // namespace

void LossWeights::validate() const {
    for (double w : {w_kl, w_ii, w_ic, w_id})
        if (!(w >= 0.0)) fail(ErrorKind::InvalidConfig, "loss weights must be non-negative");
    if (!(tau > 0.0)) fail(ErrorKind::InvalidConfig, "tau must be positive");
}

double loss_ii(const Matrix& x, const Matrix& x_aug, const Matrix& bank, double tau, Matrix* dx, Matrix* dx_aug,
               bool include_positive) {
    if (x.rows() != x_aug.rows()) fail(ErrorKind::DimensionMismatch, "batch and augmented batch differ in rows");
    require_dim(x, x_aug, "batch and augmented batch differ in dim");
    if (bank.rows() > 0) require_dim(x, bank, "batch and bank differ in dim");
    if (!include_positive && bank.rows() == 0) fail(ErrorKind::EmptyBank, "instance loss without positive needs a bank");
    zero_like(dx, x);
    zero_like(dx_aug, x_aug);
    if (x.rows() == 0) return 0.0;

    const double inv_b = 1.0 / static_cast<double>(x.rows());
    double total = 0.0;
    Vector logits;
    for (std::size_t i = 0; i < x.rows(); ++i) {
        const std::size_t off = include_positive ? 1 : 0;
        logits.assign(bank.rows() + off, 0.0);
        const double pos = dot(x.row(i), x_aug.row(i)) / tau;
        if (include_positive) logits[0] = pos;
        for (std::size_t a = 0; a < bank.rows(); ++a) logits[a + off] = dot(x.row(i), bank.row(a)) / tau;
        total += log_sum_exp(logits) - pos;

        if (dx || dx_aug) {
            const Vector p = softmax(logits);
            const double g_pos = (include_positive ? p[0] : 0.0) - 1.0;
            if (dx) {
                auto d = dx->row(i);
                add_scaled(d, x_aug.row(i), g_pos * inv_b / tau);
                for (std::size_t a = 0; a < bank.rows(); ++a) add_scaled(d, bank.row(a), p[a + off] * inv_b / tau);
            }
            if (dx_aug) add_scaled(dx_aug->row(i), x.row(i), g_pos * inv_b / tau);
        }
    }
    return total * inv_b;
}

ContrastiveResult loss_cluster(const Matrix& x, const std::vector<std::size_t>& assignments, const Matrix& bank,
                               const std::vector<std::size_t>& bank_assignments, double tau, Matrix* dx) {
    if (bank.rows() == 0) fail(ErrorKind::EmptyBank, "cluster loss needs a non-empty bank");
    if (assignments.size() != x.rows()) fail(ErrorKind::DimensionMismatch, "one assignment per batch row required");
    if (bank_assignments.size() != bank.rows()) fail(ErrorKind::DimensionMismatch, "bank lacks an assignment snapshot");
    require_dim(x, bank, "batch and bank differ in dim");
    zero_like(dx, x);

    ContrastiveResult res;
    std::vector<double> per_row(x.rows(), 0.0);
    std::vector<Vector> grads(dx ? x.rows() : 0);
    Vector logits(bank.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) {
        std::size_t n_pos = 0;
        for (std::size_t a = 0; a < bank.rows(); ++a) n_pos += bank_assignments[a] == assignments[i];
        if (n_pos == 0) {
            ++res.skipped;
            continue;
        }
        ++res.used;
        for (std::size_t a = 0; a < bank.rows(); ++a) logits[a] = dot(x.row(i), bank.row(a)) / tau;
        const double lse = log_sum_exp(logits);
        double s = 0.0;
        for (std::size_t a = 0; a < bank.rows(); ++a)
            if (bank_assignments[a] == assignments[i]) s += lse - logits[a];
        res.value += s / static_cast<double>(n_pos);

        if (dx) {
            const Vector p = softmax(logits);
            Vector g(x.cols(), 0.0);
            for (std::size_t a = 0; a < bank.rows(); ++a) {
                const double coef = p[a] - (bank_assignments[a] == assignments[i] ? 1.0 / static_cast<double>(n_pos) : 0.0);
                add_scaled(g, bank.row(a), coef / tau);
            }
            grads[i] = std::move(g);
        }
    }
    if (res.used == 0) return res;
    const double inv = 1.0 / static_cast<double>(res.used);
    res.value *= inv;
    if (dx)
        for (std::size_t i = 0; i < x.rows(); ++i)
            if (!grads[i].empty()) add_scaled(dx->row(i), grads[i], inv);
    return res;
}

ContrastiveResult loss_ic(const Matrix& x, const std::vector<std::size_t>& assignments, const MemoryBank& own_bank,
                          double tau, Matrix* dx) {
    return loss_cluster(x, assignments, own_bank.features, own_bank.assignments, tau, dx);
}

ContrastiveResult loss_id(const Matrix& x, const std::vector<std::size_t>& assignments, const MemoryBank& other_bank,
                          double tau, Matrix* dx) {
    return loss_cluster(x, assignments, other_bank.features, other_bank.assignments, tau, dx);
}

double loss_kl(const Matrix& x, const Matrix& anchors, const Matrix& y, Matrix* dx, Matrix* d_anchors) {
    require_dim(x, anchors, "batch and anchors differ in dim");
    if (y.rows() != x.rows() || y.cols() != anchors.rows())
        fail(ErrorKind::DimensionMismatch, "label weights must be batch × anchor count");
    zero_like(dx, x);
    zero_like(d_anchors, anchors);
    if (x.rows() == 0) return 0.0;

    const double inv_b = 1.0 / static_cast<double>(x.rows());
    const std::size_t k = anchors.rows();
    double total = 0.0;
    Vector z(k), h(k);
    for (std::size_t i = 0; i < x.rows(); ++i) {
        for (std::size_t j = 0; j < k; ++j) z[j] = dot(x.row(i), anchors.row(j));
        const Vector q = softmax(z);
        const Vector p = softmax(y.row(i));
        const double lse_z = log_sum_exp(z), lse_y = log_sum_exp(y.row(i));
        double qh = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
            h[j] = (z[j] - lse_z) - (y(i, j) - lse_y);  // log q − log p
            total += (q[j] - p[j]) * h[j];
            qh += q[j] * h[j];
        }
        if (!dx && !d_anchors) continue;
        for (std::size_t j = 0; j < k; ++j) {
            const double g = ((q[j] - p[j]) + q[j] * (h[j] - qh)) * inv_b;
            if (dx) add_scaled(dx->row(i), anchors.row(j), g);
            if (d_anchors) add_scaled(d_anchors->row(j), x.row(i), g);
        }
    }
    return total * inv_b;
}

double weighted_total(const LossComponents& mean, const LossWeights& w) {
    return w.w_kl * mean.kl + w.w_ii * mean.ii + w.w_ic * mean.ic + w.w_id * mean.id;
}

namespace {

struct Encoded {
    Matrix features;
    std::vector<ForwardCache> caches;
};

Encoded encode_rows(const Encoder& enc, const Matrix& raw, bool mapped, bool keep_cache) {
    Encoded out{Matrix(raw.rows(), enc.head.d_out()), {}};
    if (keep_cache) out.caches.resize(raw.rows());
    for (std::size_t i = 0; i < raw.rows(); ++i) {
        const Vector v = encode(enc, raw.row(i), mapped, keep_cache ? &out.caches[i] : nullptr);
        std::copy(v.begin(), v.end(), out.features.row(i).begin());
    }
    return out;
}

void backprop_rows(const Encoder& enc, const Encoded& e, const Matrix& d, double scale, bool mapped, Vector& grad) {
    Vector row(d.cols());
    for (std::size_t i = 0; i < d.rows(); ++i) {
        bool any = false;
        for (std::size_t k = 0; k < d.cols(); ++k) {
            row[k] = scale * d(i, k);
            any = any || row[k] != 0.0;
        }
        if (any) backward(enc, e.caches[i], row, mapped, grad);
    }
}

} // namespace

LossReport loss_total(const Encoder& enc, const DomainBatch& a, const DomainBatch& b, const MemoryBank& bank_a,
                      const MemoryBank& bank_b, const LossWeights& weights, bool with_gradient) {
    weights.validate();
    LossReport report;
    if (with_gradient) report.gradient.assign(enc.parameter_count(), 0.0);

    auto run_domain = [&](const DomainBatch& batch, const MemoryBank& own, const MemoryBank& other, LossComponents& out) {
        const Encoded x = encode_rows(enc, batch.inputs, batch.mapped, with_gradient);
        const Encoded xa = encode_rows(enc, batch.augmented, batch.mapped, with_gradient);
        const Encoded anc = encode_rows(enc, batch.anchors, batch.mapped, with_gradient);

        Matrix dx_ii, dxa_ii, dx_ic, dx_id, dx_kl, danc_kl;
        out.ii = loss_ii(x.features, xa.features, own.features, weights.tau, with_gradient ? &dx_ii : nullptr,
                         with_gradient ? &dxa_ii : nullptr, weights.include_positive);
        const ContrastiveResult ic = loss_ic(x.features, batch.assignments, own, weights.tau, with_gradient ? &dx_ic : nullptr);
        const ContrastiveResult id = loss_id(x.features, batch.assignments, other, weights.tau, with_gradient ? &dx_id : nullptr);
        out.ic = ic.value;
        out.id = id.value;
        report.ic_skipped += ic.skipped;
        report.id_skipped += id.skipped;
        report.id_skipped_all = report.id_skipped_all || id.skipped_all();
        out.kl = loss_kl(x.features, anc.features, batch.label_weights, with_gradient ? &dx_kl : nullptr,
                         with_gradient ? &danc_kl : nullptr);

        if (!with_gradient) return;
        Matrix dx(x.features.rows(), x.features.cols());
        auto& g = dx.data();
        for (std::size_t i = 0; i < g.size(); ++i)
            g[i] = weights.w_ii * dx_ii.data()[i] + weights.w_ic * dx_ic.data()[i] + weights.w_id * dx_id.data()[i] +
                   weights.w_kl * dx_kl.data()[i];
        backprop_rows(enc, x, dx, 0.5, batch.mapped, report.gradient);
        backprop_rows(enc, xa, dxa_ii, 0.5 * weights.w_ii, batch.mapped, report.gradient);
        backprop_rows(enc, anc, danc_kl, 0.5 * weights.w_kl, batch.mapped, report.gradient);
    };

    run_domain(a, bank_a, bank_b, report.a);
    run_domain(b, bank_b, bank_a, report.b);
    report.mean = {0.5 * (report.a.kl + report.b.kl), 0.5 * (report.a.ii + report.b.ii), 0.5 * (report.a.ic + report.b.ic),
                   0.5 * (report.a.id + report.b.id)};
    report.total = weighted_total(report.mean, weights);
    return report;
}

} // namespace clair
