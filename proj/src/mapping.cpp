#include "clair/mapping.hpp"

#include "clair/error.hpp"

namespace clair {

ProcrustesResult solve_procrustes(const Matrix& anchors_a, const Matrix& anchors_b, const ProcrustesOptions& options) {
    if (anchors_a.cols() != anchors_b.cols()) fail(ErrorKind::DimensionMismatch, "anchor dims differ");
    if (anchors_a.rows() != anchors_b.rows()) fail(ErrorKind::DimensionMismatch, "anchor pair counts differ");
    if (anchors_a.rows() == 0) fail(ErrorKind::DimensionMismatch, "no anchor pairs");

    const std::size_t d = anchors_a.cols();
    Matrix m(d, d);
    for (std::size_t p = 0; p < anchors_a.rows(); ++p) {
        Vector wa(anchors_a.row(p).begin(), anchors_a.row(p).end());
        Vector wb(anchors_b.row(p).begin(), anchors_b.row(p).end());
        if (options.normalize) {
            wa = l2_normalize(wa);
            wb = l2_normalize(wb);
        }
        for (std::size_t r = 0; r < d; ++r)
            for (std::size_t c = 0; c < d; ++c) m(r, c) += wb[r] * wa[c];
    }

    const SvdResult f = svd(m);
    ProcrustesResult out;
    out.map.omega = matmul_transposed(f.u, f.v);
    out.map.trainable = options.trainable;
    out.singular_values = f.singular;
    out.rank_deficient = f.singular.back() < 1e-10 * f.singular.front() || f.singular.front() == 0.0;
    out.underdetermined = anchors_a.rows() < d;
    return out;
}

ProcrustesResult solve_procrustes(const AnchorSet& anchors_a, const AnchorSet& anchors_b, const ProcrustesOptions& options) {
    if (anchors_a.class_names != anchors_b.class_names)
        fail(ErrorKind::ConfigError, "anchor sets are not paired over the same class names");
    ProcrustesResult out = solve_procrustes(anchors_a.anchors, anchors_b.anchors, options);
    out.map.source = anchors_a.domain;
    out.map.target = anchors_b.domain;
    return out;
}

double procrustes_residual(const Matrix& omega, const Matrix& anchors_a, const Matrix& anchors_b) {
    double s = 0.0;
    for (std::size_t p = 0; p < anchors_a.rows(); ++p) {
        const Vector y = matvec(omega, anchors_a.row(p));
        for (std::size_t k = 0; k < y.size(); ++k) s += (y[k] - anchors_b(p, k)) * (y[k] - anchors_b(p, k));
    }
    return s;
}

Matrix apply_mapping(const Matrix& omega, const Matrix& x) {
    if (omega.cols() != x.cols()) fail(ErrorKind::DimensionMismatch, "mapping and embedding dims differ");
    return matmul_transposed(x, omega);
}

EmbeddingSet apply_mapping(const MappingMatrix& map, const EmbeddingSet& x) {
    EmbeddingSet out = x;
    out.vectors = apply_mapping(map.omega, x.vectors);
    out.domain = x.domain + "@mapped:" + map.source + "->" + map.target;
    return out;
}

void write_mapping(const MappingMatrix& map, const std::filesystem::path& path) {
    write_matrix(map.omega, map.checkpoint_domain(), path);
}

MappingMatrix read_mapping(const std::filesystem::path& path) {
    std::string domain;
    MappingMatrix map;
    map.omega = read_matrix(path, &domain);
    if (map.omega.rows() != map.omega.cols()) fail(ErrorKind::HeaderMismatch, "mapping matrix is not square");
    const std::string prefix = "omega:";
    const auto arrow = domain.find("->");
    if (domain.rfind(prefix, 0) == 0 && arrow != std::string::npos) {
        map.source = domain.substr(prefix.size(), arrow - prefix.size());
        map.target = domain.substr(arrow + 2);
    }
    return map;
}

} // namespace clair
