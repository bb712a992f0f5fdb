#include "clair/checkpoint.hpp"

#include "clair/config.hpp"
#include "clair/error.hpp"

namespace clair {

namespace fs = std::filesystem;

namespace {

std::string layer_stem(const std::string& stem, std::size_t l) {
    return l == 0 ? stem : stem + "_l" + std::to_string(l);
}

} // namespace

void write_head(const ProjectionHead& head, const fs::path& dir, const std::string& stem) {
    for (std::size_t l = 0; l < head.layers.size(); ++l) {
        const std::string s = layer_stem(stem, l);
        write_matrix(head.layers[l].weight, s + ":weight", dir / (s + ".emb1"));
        write_matrix(Matrix(1, head.layers[l].bias.size(), head.layers[l].bias), s + ":bias", dir / (s + "_bias.emb1"));
    }
}

ProjectionHead read_head(const fs::path& dir, const std::string& stem) {
    ProjectionHead head;
    for (std::size_t l = 0;; ++l) {
        const std::string s = layer_stem(stem, l);
        if (!fs::exists(dir / (s + ".emb1"))) break;
        Layer layer;
        layer.weight = read_matrix(dir / (s + ".emb1"));
        const Matrix bias = read_matrix(dir / (s + "_bias.emb1"));
        if (bias.rows() != 1 || bias.cols() != layer.weight.rows())
            fail(ErrorKind::HeaderMismatch, "bias shape does not match " + s);
        layer.bias = bias.data();
        if (!head.layers.empty() && head.layers.back().weight.rows() != layer.weight.cols())
            fail(ErrorKind::HeaderMismatch, "layer widths do not chain in " + stem);
        head.layers.push_back(std::move(layer));
    }
    if (head.layers.empty()) fail(ErrorKind::IoError, "no " + stem + " checkpoint in " + dir.string());
    return head;
}

void write_labels(const PseudoLabelMatrix& labels, const std::vector<std::string>& class_names, const std::string& name,
                  const fs::path& path) {
    EmbeddingSet set{"pseudo:" + name, labels.weights, {}, class_names, std::nullopt};
    for (std::size_t a : labels.assignments) set.labels.push_back(static_cast<std::uint32_t>(a));
    write_embedding_set(set, path);
}

PseudoLabelMatrix read_labels(const fs::path& path) {
    EmbeddingSet set = read_embedding_set(path);
    return from_weights(std::move(set.vectors));
}

std::string train_log_jsonl(const TrainState& state) {
    std::string out;
    for (const EpochRecord& r : state.history) out += to_json(r).dump() + "\n";
    return out;
}

void write_checkpoint(const fs::path& dir, const TrainState& st, const TrainConfig& cfg,
                      const std::vector<std::string>& class_names) {
    fs::create_directories(dir);
    write_head(st.q.head, dir, "head_q");
    write_head(st.k.head, dir, "head_k");
    if (cfg.use_mapping) {
        write_mapping(st.omega_a2b, dir / "omega_a2b.emb1");
        write_mapping(st.omega_b2a, dir / "omega_b2a.emb1");
    }
    write_labels(st.labels_a, class_names, "a", dir / "labels_a.emb1");
    write_labels(st.labels_b, class_names, "b", dir / "labels_b.emb1");
    write_file_atomic(dir / "config.json", to_json(cfg).dump(2) + "\n");
    write_file_atomic(dir / "train_log.jsonl", train_log_jsonl(st));
}

Checkpoint read_checkpoint(const fs::path& dir) {
    Checkpoint c;
    try {
        apply_json(c.config, nlohmann::json::parse(read_file(dir / "config.json")));
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::ConfigError, std::string("unreadable config.json: ") + e.what());
    }
    c.q.head = read_head(dir, "head_q");
    c.k.head = read_head(dir, "head_k");
    c.q.omega_trainable = c.k.omega_trainable = c.config.omega_trainable;
    if (c.config.use_mapping) {
        c.omega_a2b = read_mapping(dir / "omega_a2b.emb1");
        c.omega_b2a = read_mapping(dir / "omega_b2a.emb1");
        const Matrix& trained = c.config.a_mapped() ? c.omega_a2b.omega : c.omega_b2a.omega;
        c.k.omega = trained;
        c.q.omega = trained;
    }
    if (fs::exists(dir / "labels_a.emb1")) c.labels_a = read_labels(dir / "labels_a.emb1");
    if (fs::exists(dir / "labels_b.emb1")) c.labels_b = read_labels(dir / "labels_b.emb1");
    return c;
}

} // namespace clair
