#include "clair/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "clair/error.hpp"

namespace clair {

namespace {

std::vector<std::string> class_names(std::size_t n) {
    std::vector<std::string> out;
    char buf[32];
    for (std::size_t c = 0; c < n; ++c) {
        std::snprintf(buf, sizeof buf, "class_%03zu", c);
        out.emplace_back(buf);
    }
    return out;
}

Vector gaussian(std::size_t d, Rng& rng) {
    Vector v(d);
    for (double& x : v) x = standard_normal(rng);
    return v;
}

// Unit vector orthogonal to the orthonormal rows of basis.
Vector orthogonal_unit(const Matrix& basis, Rng& rng) {
    for (int attempt = 0; attempt < 8; ++attempt) {
        Vector u = gaussian(basis.cols(), rng);
        for (int pass = 0; pass < 2; ++pass)
            for (std::size_t r = 0; r < basis.rows(); ++r) {
                const double c = dot(basis.row(r), u);
                for (std::size_t k = 0; k < u.size(); ++k) u[k] -= c * basis(r, k);
            }
        if (norm(u) > 1e-6) return l2_normalize(u);
    }
    fail(ErrorKind::InvalidConfig, "cannot draw a direction outside the prototype span");
}

} // namespace

Vector random_unit_vector(std::size_t d, Rng& rng) {
    for (;;) {
        Vector v = gaussian(d, rng);
        if (norm(v) > 1e-12) return l2_normalize(v);
    }
}

Matrix random_orthogonal(std::size_t d, Rng& rng) {
    Matrix g(d, d);
    for (double& x : g.data()) x = standard_normal(rng);
    return orthonormalize_columns(g);
}

SyntheticData generate_synthetic_pair(const SyntheticConfig& cfg) {
    if (cfg.n_classes_train < 1 || cfg.dim < 1) fail(ErrorKind::InvalidConfig, "class and dimension counts must be positive");
    if (cfg.per_class < 2) fail(ErrorKind::InvalidConfig, "per_class must be at least 2");
    if (!(cfg.noise_sigma >= 0.0) || !(cfg.anchor_noise >= 0.0)) fail(ErrorKind::InvalidConfig, "noise must be non-negative");
    if (!(cfg.corrupt_fraction >= 0.0 && cfg.corrupt_fraction <= 1.0))
        fail(ErrorKind::InvalidConfig, "corrupt_fraction must lie in [0, 1]");
    if (cfg.n_classes_train < 2) fail(ErrorKind::InvalidConfig, "anchors need at least two training classes");

    const std::size_t n_classes = cfg.n_classes_train + cfg.n_classes_test;
    const std::size_t d = cfg.dim;
    const auto n_corrupt = static_cast<std::size_t>(std::lround(cfg.corrupt_fraction * static_cast<double>(cfg.n_classes_train)));
    if (n_corrupt > 0 && d <= cfg.n_classes_train)
        fail(ErrorKind::InvalidConfig, "anchor corruption needs dim greater than the training class count");

    SyntheticData out;
    Rng proto_rng = make_rng(cfg.seed, "synth", {0});
    out.prototypes = Matrix(n_classes, d);
    for (std::size_t c = 0; c < n_classes; ++c) {
        const Vector p = random_unit_vector(d, proto_rng);
        std::copy(p.begin(), p.end(), out.prototypes.row(c).begin());
    }
    Rng rot_rng = make_rng(cfg.seed, "synth", {1});
    out.rotation = cfg.identity_rotation ? Matrix::identity(d) : random_orthogonal(d, rot_rng);

    const auto names = class_names(n_classes);
    auto make_domain = [&](const char* name, bool rotate, std::uint64_t stream) {
        Rng rng = make_rng(cfg.seed, "synth", {stream});
        EmbeddingSet set{name, Matrix(n_classes * cfg.per_class, d), {}, names, true};
        set.labels.reserve(set.size());
        std::size_t row = 0;
        for (std::size_t c = 0; c < n_classes; ++c) {
            const Vector base = rotate ? matvec(out.rotation, out.prototypes.row(c)) : Vector(out.prototypes.row(c).begin(), out.prototypes.row(c).end());
            for (std::size_t s = 0; s < cfg.per_class; ++s, ++row) {
                Vector x = base;
                for (double& v : x) v += cfg.noise_sigma * standard_normal(rng);
                x = l2_normalize(x);
                std::copy(x.begin(), x.end(), set.vectors.row(row).begin());
                set.labels.push_back(static_cast<std::uint32_t>(c));
            }
        }
        return set;
    };
    out.a = make_domain("A", false, 2);
    out.b = make_domain("B", true, 3);

    Rng pick_rng = make_rng(cfg.seed, "synth", {4});
    const auto order = permutation(cfg.n_classes_train, pick_rng);
    out.corrupted_classes.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_corrupt));
    std::sort(out.corrupted_classes.begin(), out.corrupted_classes.end());

    Matrix train_basis;
    if (n_corrupt > 0) {
        Matrix protos_t(d, cfg.n_classes_train);
        for (std::size_t c = 0; c < cfg.n_classes_train; ++c)
            for (std::size_t k = 0; k < d; ++k) protos_t(k, c) = out.prototypes(c, k);
        train_basis = orthonormalize_columns(protos_t).transposed();
    }

    const std::vector<std::string> train_names(names.begin(), names.begin() + static_cast<std::ptrdiff_t>(cfg.n_classes_train));
    auto make_anchors = [&](const char* name, bool rotate, std::uint64_t stream) {
        Rng rng = make_rng(cfg.seed, "synth", {stream});
        AnchorSet set{name, Matrix(cfg.n_classes_train, d), train_names};
        for (std::size_t c = 0; c < cfg.n_classes_train; ++c) {
            const auto p = out.prototypes.row(c);
            Vector w(p.begin(), p.end());
            if (std::binary_search(out.corrupted_classes.begin(), out.corrupted_classes.end(), c)) {
                double nearest = -1.0;
                for (std::size_t j = 0; j < cfg.n_classes_train; ++j)
                    if (j != c) nearest = std::max(nearest, dot(p, out.prototypes.row(j)));
                const double rho = std::min(1.0, nearest + cfg.corrupt_margin);
                const Vector u = orthogonal_unit(train_basis, rng);
                const double rest = std::sqrt(std::max(0.0, 1.0 - rho * rho));
                for (std::size_t k = 0; k < d; ++k) w[k] = rho * p[k] + rest * u[k];
            }
            for (double& v : w) v += cfg.anchor_noise * standard_normal(rng);
            w = l2_normalize(w);
            if (rotate) w = matvec(out.rotation, w);
            std::copy(w.begin(), w.end(), set.anchors.row(c).begin());
        }
        return set;
    };
    out.anchors_a = make_anchors("A", false, 5);
    out.anchors_b = make_anchors("B", true, 6);
    return out;
}

std::pair<EmbeddingSet, EmbeddingSet> split_by_class(const EmbeddingSet& set, std::size_t n_train) {
    if (!set.has_labels()) fail(ErrorKind::NoLabels, "class split needs labels");
    std::vector<std::size_t> train, test;
    for (std::size_t i = 0; i < set.size(); ++i) (set.labels[i] < n_train ? train : test).push_back(i);
    return {subset(set, train), subset(set, test)};
}

} // namespace clair
