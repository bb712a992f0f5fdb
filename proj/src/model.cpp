#include "clair/model.hpp"

#include <algorithm>
#include <cmath>

#include "clair/error.hpp"
#include "clair/parallel.hpp"

namespace clair {

namespace {

Matrix orthogonal_block(std::size_t rows, std::size_t cols, Rng& rng) {
    const bool tall = rows >= cols;
    Matrix g(tall ? rows : cols, tall ? cols : rows);
    for (double& x : g.data()) x = standard_normal(rng);
    Matrix q = orthonormalize_columns(g);
    return tall ? q : q.transposed();
}

void check_same_shape(const ProjectionHead& a, const ProjectionHead& b) {
    if (a.layers.size() != b.layers.size()) fail(ErrorKind::ShapeMismatch, "heads differ in depth");
    for (std::size_t l = 0; l < a.layers.size(); ++l)
        if (a.layers[l].weight.rows() != b.layers[l].weight.rows() || a.layers[l].weight.cols() != b.layers[l].weight.cols())
            fail(ErrorKind::ShapeMismatch, "heads differ in layer " + std::to_string(l));
}

} // namespace

std::size_t ProjectionHead::parameter_count() const noexcept {
    std::size_t n = 0;
    for (const Layer& l : layers) n += l.weight.data().size() + l.bias.size();
    return n;
}

std::size_t Encoder::parameter_count() const noexcept {
    return head.parameter_count() + (has_mapping() && omega_trainable ? omega.data().size() : 0);
}

ProjectionHead make_head(std::size_t d_in, const HeadConfig& cfg, std::uint64_t seed) {
    if (d_in == 0 || cfg.d_out == 0) fail(ErrorKind::InvalidConfig, "head dimensions must be positive");
    std::vector<std::size_t> dims{d_in};
    dims.insert(dims.end(), cfg.hidden.begin(), cfg.hidden.end());
    dims.push_back(cfg.d_out);

    ProjectionHead head;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        if (dims[l + 1] == 0) fail(ErrorKind::InvalidConfig, "hidden width must be positive");
        Rng rng = make_rng(seed, "init", {l});
        Layer layer;
        if (cfg.init == HeadInit::Orthogonal) {
            layer.weight = orthogonal_block(dims[l + 1], dims[l], rng);
        } else {
            layer.weight = Matrix(dims[l + 1], dims[l]);
            const double s = 1.0 / std::sqrt(static_cast<double>(dims[l]));
            for (double& x : layer.weight.data()) x = s * standard_normal(rng);
        }
        layer.bias.assign(dims[l + 1], 0.0);
        head.layers.push_back(std::move(layer));
    }
    return head;
}

Vector forward(const ProjectionHead& head, std::span<const double> f) {
    Encoder enc{head, {}, false};
    return encode(enc, f, false);
}

Vector encode(const Encoder& enc, std::span<const double> f, bool mapped, ForwardCache* cache) {
    const ProjectionHead& head = enc.head;
    const bool use_map = mapped && enc.has_mapping();
    const std::size_t in_dim = use_map ? enc.omega.cols() : head.d_in();
    if (f.size() != in_dim)
        fail(ErrorKind::DimensionMismatch, "input dim " + std::to_string(f.size()) + ", encoder expects " + std::to_string(in_dim));

    Vector h = use_map ? matvec(enc.omega, f) : Vector(f.begin(), f.end());
    if (cache) {
        cache->raw.assign(f.begin(), f.end());
        cache->inputs.clear();
        cache->pre.clear();
    }
    for (std::size_t l = 0; l < head.layers.size(); ++l) {
        const Layer& layer = head.layers[l];
        Vector z = matvec(layer.weight, h);
        for (std::size_t k = 0; k < z.size(); ++k) z[k] += layer.bias[k];
        if (cache) {
            cache->inputs.push_back(h);
            cache->pre.push_back(z);
        }
        if (l + 1 < head.layers.size())
            for (double& v : z) v = std::max(v, 0.0);
        h = std::move(z);
    }
    const double n = norm(h);
    if (n <= 1e-12) fail(ErrorKind::ZeroVector, "encoder output vanished");
    for (double& v : h) v /= n;
    if (cache) {
        cache->out_norm = n;
        cache->out = h;
    }
    return h;
}

Matrix encode_all(const Encoder& enc, const Matrix& x, bool mapped, std::size_t threads) {
    Matrix out(x.rows(), enc.head.d_out());
    parallel_for(x.rows(), threads, [&](std::size_t i) {
        const Vector v = encode(enc, x.row(i), mapped);
        std::copy(v.begin(), v.end(), out.row(i).begin());
    });
    return out;
}

void backward(const Encoder& enc, const ForwardCache& cache, std::span<const double> d_out, bool mapped,
              std::span<double> grad) {
    const ProjectionHead& head = enc.head;
    if (grad.size() != enc.parameter_count()) fail(ErrorKind::ShapeMismatch, "gradient buffer has the wrong size");

    // Through the normalization: dz = (g − x(x·g)) / ‖z‖.
    const double xg = dot(cache.out, d_out);
    Vector dz(d_out.size());
    for (std::size_t k = 0; k < dz.size(); ++k) dz[k] = (d_out[k] - cache.out[k] * xg) / cache.out_norm;

    std::vector<std::size_t> offsets(head.layers.size());
    std::size_t off = 0;
    for (std::size_t l = 0; l < head.layers.size(); ++l) {
        offsets[l] = off;
        off += head.layers[l].weight.data().size() + head.layers[l].bias.size();
    }

    Vector d_in;
    for (std::size_t l = head.layers.size(); l-- > 0;) {
        const Layer& layer = head.layers[l];
        const Vector& in = cache.inputs[l];
        double* gw = grad.data() + offsets[l];
        double* gb = gw + layer.weight.data().size();
        for (std::size_t r = 0; r < layer.weight.rows(); ++r) {
            if (dz[r] == 0.0) continue;
            for (std::size_t c = 0; c < layer.weight.cols(); ++c) gw[r * layer.weight.cols() + c] += dz[r] * in[c];
            gb[r] += dz[r];
        }
        d_in = transposed_matvec(layer.weight, dz);
        if (l > 0) {
            const Vector& pre = cache.pre[l - 1];
            for (std::size_t k = 0; k < d_in.size(); ++k)
                if (pre[k] <= 0.0) d_in[k] = 0.0;
            dz = d_in;
        }
    }

    if (mapped && enc.has_mapping() && enc.omega_trainable) {
        double* go = grad.data() + off;
        const std::size_t d = enc.omega.cols();
        for (std::size_t r = 0; r < enc.omega.rows(); ++r) {
            if (d_in[r] == 0.0) continue;
            for (std::size_t c = 0; c < d; ++c) go[r * d + c] += d_in[r] * cache.raw[c];
        }
    }
}

Vector flatten(const ProjectionHead& head) {
    Vector out;
    out.reserve(head.parameter_count());
    for (const Layer& l : head.layers) {
        out.insert(out.end(), l.weight.data().begin(), l.weight.data().end());
        out.insert(out.end(), l.bias.begin(), l.bias.end());
    }
    return out;
}

void unflatten(ProjectionHead& head, std::span<const double> params) {
    if (params.size() != head.parameter_count()) fail(ErrorKind::ShapeMismatch, "parameter vector has the wrong size");
    std::size_t off = 0;
    for (Layer& l : head.layers) {
        std::copy_n(params.begin() + static_cast<std::ptrdiff_t>(off), l.weight.data().size(), l.weight.data().begin());
        off += l.weight.data().size();
        std::copy_n(params.begin() + static_cast<std::ptrdiff_t>(off), l.bias.size(), l.bias.begin());
        off += l.bias.size();
    }
}

Vector flatten(const Encoder& enc) {
    Vector out = flatten(enc.head);
    if (enc.has_mapping() && enc.omega_trainable) out.insert(out.end(), enc.omega.data().begin(), enc.omega.data().end());
    return out;
}

void unflatten(Encoder& enc, std::span<const double> params) {
    if (params.size() != enc.parameter_count()) fail(ErrorKind::ShapeMismatch, "parameter vector has the wrong size");
    const std::size_t nh = enc.head.parameter_count();
    unflatten(enc.head, params.first(nh));
    if (enc.has_mapping() && enc.omega_trainable)
        std::copy(params.begin() + static_cast<std::ptrdiff_t>(nh), params.end(), enc.omega.data().begin());
}

void momentum_update(ProjectionHead& theta_k, const ProjectionHead& theta_q, double m) {
    check_same_shape(theta_k, theta_q);
    for (std::size_t l = 0; l < theta_k.layers.size(); ++l) {
        auto& wk = theta_k.layers[l].weight.data();
        const auto& wq = theta_q.layers[l].weight.data();
        for (std::size_t i = 0; i < wk.size(); ++i) wk[i] = m * wk[i] + (1.0 - m) * wq[i];
        auto& bk = theta_k.layers[l].bias;
        const auto& bq = theta_q.layers[l].bias;
        for (std::size_t i = 0; i < bk.size(); ++i) bk[i] = m * bk[i] + (1.0 - m) * bq[i];
    }
}

void momentum_update(Encoder& theta_k, const Encoder& theta_q, double m) {
    momentum_update(theta_k.head, theta_q.head, m);
    if (theta_k.has_mapping() != theta_q.has_mapping()) fail(ErrorKind::ShapeMismatch, "only one encoder has a mapping");
    if (theta_k.has_mapping() && theta_k.omega_trainable) {
        if (theta_k.omega.rows() != theta_q.omega.rows() || theta_k.omega.cols() != theta_q.omega.cols())
            fail(ErrorKind::ShapeMismatch, "mapping shapes differ");
        auto& ok = theta_k.omega.data();
        const auto& oq = theta_q.omega.data();
        for (std::size_t i = 0; i < ok.size(); ++i) ok[i] = m * ok[i] + (1.0 - m) * oq[i];
    }
}

void sgd_step(Encoder& enc, std::span<const double> gradient, double lr) {
    Vector p = flatten(enc);
    if (gradient.size() != p.size()) fail(ErrorKind::ShapeMismatch, "gradient has the wrong size");
    for (std::size_t i = 0; i < p.size(); ++i) p[i] -= lr * gradient[i];
    unflatten(enc, p);
}

MemoryBank rebuild_memory_bank(const Encoder& theta_k, const Matrix& data, bool mapped, const PseudoLabelMatrix& labels,
                               const std::string& domain, std::size_t threads) {
    if (labels.rows() != data.rows()) fail(ErrorKind::DimensionMismatch, "label rows differ from data rows");
    return MemoryBank{domain, encode_all(theta_k, data, mapped, threads), labels.assignments};
}

void AugmentConfig::validate() const {
    if (!(noise_sigma >= 0.0)) fail(ErrorKind::InvalidConfig, "augment noise must be non-negative");
    if (!(dropout_p >= 0.0 && dropout_p < 1.0)) fail(ErrorKind::InvalidConfig, "dropout must lie in [0, 1)");
}

Vector augment_embedding(std::span<const double> f, const AugmentConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    for (int attempt = 0; attempt < 2; ++attempt) {
        Rng rng(attempt == 0 ? seed : derive_seed(seed, "retry"));
        Vector out(f.begin(), f.end());
        for (double& v : out) {
            if (cfg.noise_sigma > 0.0) v += cfg.noise_sigma * standard_normal(rng);
            if (cfg.dropout_p > 0.0 && uniform01(rng) < cfg.dropout_p) v = 0.0;
        }
        if (norm(out) > 1e-12) return l2_normalize(out);
    }
    fail(ErrorKind::ZeroVector, "augmentation annihilated the input");
}

} // namespace clair
