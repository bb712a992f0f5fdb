#include "clair/trainer.hpp"

#include <cmath>
#include <limits>
#include <map>

#include "clair/error.hpp"
#include "clair/eval.hpp"
#include "clair/rng.hpp"

namespace clair {

void TrainConfig::validate() const {
    if (!(lr0 >= 0.0)) fail(ErrorKind::InvalidConfig, "lr0 must be non-negative");
    if (epochs < 1) fail(ErrorKind::InvalidConfig, "epochs must be at least 1");
    if (batch_size < 2) fail(ErrorKind::InvalidConfig, "batch_size must be at least 2");
    if (!(m >= 0.0 && m <= 1.0)) fail(ErrorKind::InvalidConfig, "momentum must lie in [0, 1]");
    if (direction != "a2b" && direction != "b2a") fail(ErrorKind::InvalidConfig, "direction must be a2b or b2a");
    if (head.d_out < 1) fail(ErrorKind::InvalidConfig, "d_out must be positive");
    weights.validate();
    refine.validate();
    augment.validate();
}

double cosine_lr(std::size_t step, std::size_t total_steps, double lr0) {
    if (total_steps < 1) fail(ErrorKind::InvalidConfig, "total_steps must be at least 1");
    if (step > total_steps) step = total_steps;
    return lr0 * 0.5 * (1.0 + std::cos(M_PI * static_cast<double>(step) / static_cast<double>(total_steps)));
}

std::vector<std::uint32_t> truth_in_anchor_space(const EmbeddingSet& set, const AnchorSet& anchors) {
    std::vector<std::uint32_t> out(set.size(), kUnlabeled);
    if (!set.has_labels()) return out;
    std::map<std::string, std::uint32_t> index;
    for (std::size_t j = 0; j < anchors.count(); ++j) index[anchors.class_names[j]] = static_cast<std::uint32_t>(j);
    for (std::size_t i = 0; i < set.size(); ++i) {
        const std::uint32_t l = set.labels[i];
        if (l == kUnlabeled) continue;
        if (set.class_names.empty()) {
            if (l < anchors.count()) out[i] = l;
        } else if (auto it = index.find(set.class_names[l]); it != index.end()) {
            out[i] = it->second;
        }
    }
    return out;
}

std::optional<double> known_label_accuracy(const PseudoLabelMatrix& labels, const std::vector<std::uint32_t>& truth) {
    if (truth.size() != labels.rows()) fail(ErrorKind::DimensionMismatch, "truth length differs from label rows");
    std::size_t known = 0, hit = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (truth[i] == kUnlabeled) continue;
        ++known;
        hit += labels.assignments[i] == truth[i];
    }
    if (known == 0) return std::nullopt;
    return static_cast<double>(hit) / static_cast<double>(known);
}

std::optional<double> validation_score(const TrainState& state, const TrainConfig& cfg) {
    if (state.val_a.size() == 0 || state.val_b.size() == 0) return std::nullopt;
    const bool am = cfg.a_mapped();
    const std::size_t ka = std::min(cfg.val_k, state.val_b.size());
    const std::size_t kb = std::min(cfg.val_k, state.val_a.size());
    const double ab = precision_at_k(state.val_a, state.val_b, state.k, am, !am, ka, cfg.threads);
    const double ba = precision_at_k(state.val_b, state.val_a, state.k, !am, am, kb, cfg.threads);
    return 0.5 * (ab + ba);
}

namespace {

struct Snapshot {
    Encoder q, k;
    PseudoLabelMatrix labels_a, labels_b;
    MemoryBank bank_a, bank_b;
};

EmbeddingSet validation_part(const EmbeddingSet& set, const TrainConfig& cfg, EmbeddingSet& train_part, std::uint64_t stream) {
    if (!set.has_labels() || cfg.val_per_class == 0) {
        train_part = set;
        return EmbeddingSet{set.domain, Matrix(0, set.dim()), {}, set.class_names, set.normalized};
    }
    ValidationSplit split = split_validation(set, cfg.val_per_class, derive_seed(cfg.seed, "split", {stream}));
    train_part = std::move(split.train);
    return std::move(split.val);
}

Matrix gather(const Matrix& m, const std::vector<std::size_t>& rows) {
    Matrix out(rows.size(), m.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) std::copy_n(m.row(rows[i]).begin(), m.cols(), out.row(i).begin());
    return out;
}

std::vector<std::size_t> batch_rows(const std::vector<std::size_t>& perm, std::size_t step, std::size_t batch) {
    std::vector<std::size_t> rows(batch);
    for (std::size_t t = 0; t < batch; ++t) rows[t] = perm[(step * batch + t) % perm.size()];
    return rows;
}

} // namespace

TrainState train(const EmbeddingSet& a, const EmbeddingSet& b, const AnchorSet& anchors_a, const AnchorSet& anchors_b,
                 const TrainConfig& cfg, const TrainHooks& hooks) {
    cfg.validate();
    a.validate();
    b.validate();
    anchors_a.validate();
    anchors_b.validate();
    if (anchors_a.class_names != anchors_b.class_names || anchors_a.count() != anchors_b.count())
        fail(ErrorKind::ConfigError, "anchor sets do not share a class list");
    if (anchors_a.dim() != a.dim() || anchors_b.dim() != b.dim())
        fail(ErrorKind::DimensionMismatch, "anchor and embedding dims differ");
    if (cfg.use_mapping && a.dim() != b.dim()) fail(ErrorKind::DimensionMismatch, "mapping needs equal domain dims");

    TrainState st;
    st.val_a = validation_part(a, cfg, st.train_a, 0);
    st.val_b = validation_part(b, cfg, st.train_b, 1);
    const std::vector<std::uint32_t> truth_a = truth_in_anchor_space(st.train_a, anchors_a);
    const std::vector<std::uint32_t> truth_b = truth_in_anchor_space(st.train_b, anchors_b);

    st.labels_a = init_pseudo_labels(st.train_a, anchors_a);
    st.labels_b = init_pseudo_labels(st.train_b, anchors_b);
    st.initial_label_accuracy_a = known_label_accuracy(st.labels_a, truth_a);
    st.initial_label_accuracy_b = known_label_accuracy(st.labels_b, truth_b);

    const bool am = cfg.a_mapped();
    const std::size_t in_dim = am ? b.dim() : a.dim();
    ProcrustesOptions popt{cfg.normalize_anchors, cfg.omega_trainable};
    if (cfg.use_mapping) {
        st.omega_a2b = solve_procrustes(anchors_a, anchors_b, popt).map;
        st.omega_b2a = solve_procrustes(anchors_b, anchors_a, popt).map;
    }

    st.q.head = make_head(in_dim, cfg.head, derive_seed(cfg.seed, "init"));
    st.q.omega_trainable = cfg.omega_trainable;
    if (cfg.use_mapping) st.q.omega = am ? st.omega_a2b.omega : st.omega_b2a.omega;
    st.k = st.q;
    if (hooks.init_key) hooks.init_key(st.k, st.q);

    auto rebuild_banks = [&] {
        st.bank_a = rebuild_memory_bank(st.k, st.train_a.vectors, am, st.labels_a, a.domain, cfg.threads);
        st.bank_b = rebuild_memory_bank(st.k, st.train_b.vectors, !am, st.labels_b, b.domain, cfg.threads);
    };
    rebuild_banks();
    st.initial_val_p50 = validation_score(st, cfg);

    const std::size_t na = st.train_a.size(), nb = st.train_b.size();
    const std::size_t steps_per_epoch = (std::max(na, nb) + cfg.batch_size - 1) / cfg.batch_size;
    const std::size_t total_steps = steps_per_epoch * cfg.epochs;
    std::size_t global_step = 0;

    std::optional<Snapshot> best;
    double best_score = -std::numeric_limits<double>::infinity();
    std::size_t since_best = 0;

    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        Rng shuffle_a = make_rng(cfg.seed, "shuffle", {epoch, 0});
        Rng shuffle_b = make_rng(cfg.seed, "shuffle", {epoch, 1});
        const auto perm_a = permutation(na, shuffle_a);
        const auto perm_b = permutation(nb, shuffle_b);

        EpochRecord rec;
        rec.epoch = epoch;
        for (std::size_t s = 0; s < steps_per_epoch; ++s, ++global_step) {
            const double lr = cosine_lr(global_step, total_steps, cfg.lr0);
            auto make_batch = [&](const EmbeddingSet& set, const PseudoLabelMatrix& labels, const AnchorSet& anchors,
                                  const std::vector<std::size_t>& perm, bool mapped, std::uint64_t dom) {
                const auto rows = batch_rows(perm, s, cfg.batch_size);
                DomainBatch batch;
                batch.inputs = gather(set.vectors, rows);
                batch.augmented = Matrix(rows.size(), set.dim());
                for (std::size_t t = 0; t < rows.size(); ++t) {
                    const Vector f = augment_embedding(batch.inputs.row(t), cfg.augment,
                                                       derive_seed(cfg.seed, "augment", {epoch, s, dom, t}));
                    std::copy(f.begin(), f.end(), batch.augmented.row(t).begin());
                }
                batch.label_weights = gather(labels.weights, rows);
                for (std::size_t r : rows) batch.assignments.push_back(labels.assignments[r]);
                batch.anchors = anchors.anchors;
                batch.mapped = mapped;
                return batch;
            };
            const DomainBatch ba = make_batch(st.train_a, st.labels_a, anchors_a, perm_a, am, 0);
            const DomainBatch bb = make_batch(st.train_b, st.labels_b, anchors_b, perm_b, !am, 1);
            const LossReport rep = loss_total(st.q, ba, bb, st.bank_a, st.bank_b, cfg.weights, true);
            sgd_step(st.q, rep.gradient, lr);

            st.steps.push_back({epoch, global_step, lr, rep.mean, rep.total});
            rec.components.kl += rep.mean.kl;
            rec.components.ii += rep.mean.ii;
            rec.components.ic += rep.mean.ic;
            rec.components.id += rep.mean.id;
            rec.total += rep.total;
            rec.lr = lr;
            rec.id_skipped += rep.id_skipped;
        }
        const double inv = 1.0 / static_cast<double>(steps_per_epoch);
        rec.components = {rec.components.kl * inv, rec.components.ii * inv, rec.components.ic * inv, rec.components.id * inv};
        rec.total *= inv;

        momentum_update(st.k, st.q, cfg.m);
        rebuild_banks();
        const Matrix enc_anchors_a = encode_all(st.k, anchors_a.anchors, am, cfg.threads);
        const Matrix enc_anchors_b = encode_all(st.k, anchors_b.anchors, !am, cfg.threads);
        const PseudoLabelMatrix prev_a = st.labels_a, prev_b = st.labels_b;
        st.labels_a = refine(st.labels_a, st.bank_a.features, enc_anchors_a, cfg.refine, cfg.threads);
        st.labels_b = refine(st.labels_b, st.bank_b.features, enc_anchors_b, cfg.refine, cfg.threads);
        st.bank_a.assignments = st.labels_a.assignments;
        st.bank_b.assignments = st.labels_b.assignments;
        rec.label_changes_a = count_changes(prev_a, st.labels_a);
        rec.label_changes_b = count_changes(prev_b, st.labels_b);
        rec.label_accuracy_a = known_label_accuracy(st.labels_a, truth_a);
        rec.label_accuracy_b = known_label_accuracy(st.labels_b, truth_b);
        rec.val_p50 = validation_score(st, cfg);
        st.history.push_back(rec);
        if (hooks.on_epoch) hooks.on_epoch(st, rec);

        if (!rec.val_p50) continue;
        if (*rec.val_p50 >= best_score) {
            best_score = *rec.val_p50;
            st.best_epoch = epoch;
            best = Snapshot{st.q, st.k, st.labels_a, st.labels_b, st.bank_a, st.bank_b};
            since_best = 0;
        } else if (++since_best >= cfg.patience && cfg.patience > 0) {
            st.stopped_early = epoch < cfg.epochs;
            break;
        }
    }

    if (best) {
        st.q = std::move(best->q);
        st.k = std::move(best->k);
        st.labels_a = std::move(best->labels_a);
        st.labels_b = std::move(best->labels_b);
        st.bank_a = std::move(best->bank_a);
        st.bank_b = std::move(best->bank_b);
    } else {
        st.best_epoch = st.history.size();
    }
    if (cfg.use_mapping) {
        // The trained direction's Ω lives in the encoder; the reverse stays closed-form.
        (am ? st.omega_a2b : st.omega_b2a).omega = st.k.omega;
    }
    return st;
}

} // namespace clair
