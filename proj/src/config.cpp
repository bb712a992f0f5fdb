#include "clair/config.hpp"

#include <algorithm>

#include "clair/error.hpp"

namespace clair {

namespace {

const char* init_name(HeadInit init) { return init == HeadInit::Orthogonal ? "orthogonal" : "gaussian"; }

HeadInit parse_init(const std::string& s) {
    if (s == "orthogonal") return HeadInit::Orthogonal;
    if (s == "gaussian") return HeadInit::Gaussian;
    fail(ErrorKind::ConfigError, "unknown head init '" + s + "'");
}

void set_tuple(TrainConfig& c, double m, double w_kl, double w_ii, double w_ic, double w_id, double c_psi, double lambda_psi) {
    c.m = m;
    c.weights.w_kl = w_kl;
    c.weights.w_ii = w_ii;
    c.weights.w_ic = w_ic;
    c.weights.w_id = w_id;
    c.refine.c_psi = c_psi;
    c.refine.lambda_psi = lambda_psi;
}

template <class T>
void take(const nlohmann::json& j, const char* key, T& dst) {
    if (j.contains(key)) dst = j.at(key).get<T>();
}

} // namespace

std::vector<std::string> preset_names() { return {"claira", "ablation", "clairb", "synthetic"}; }

TrainConfig preset(const std::string& name) {
    TrainConfig c;
    if (name == "claira" || name == "ablation") {
        set_tuple(c, 0.9, 1.0, 1.0, 1.0, 1.0, 1e4, 20.0);
    } else if (name == "clairb") {
        set_tuple(c, 0.9, 1e2, 1.0, 0.5, 0.5, 1e4, 20.0);
    } else if (name == "synthetic") {
        set_tuple(c, 0.9, 1.0, 1.0, 1.0, 1.0, 200.0, 20.0);
        c.lr0 = 5.0;
        c.val_k = 10;
    } else {
        fail(ErrorKind::ConfigError, "unknown preset '" + name + "'");
    }
    return c;
}

nlohmann::json to_json(const TrainConfig& c) {
    return {
        {"lr0", c.lr0},
        {"epochs", c.epochs},
        {"batch_size", c.batch_size},
        {"m", c.m},
        {"w_kl", c.weights.w_kl},
        {"w_ii", c.weights.w_ii},
        {"w_ic", c.weights.w_ic},
        {"w_id", c.weights.w_id},
        {"tau", c.weights.tau},
        {"include_positive", c.weights.include_positive},
        {"c_psi", c.refine.c_psi},
        {"lambda_psi", c.refine.lambda_psi},
        {"n_r", c.refine.n_r},
        {"augment_noise", c.augment.noise_sigma},
        {"augment_dropout", c.augment.dropout_p},
        {"patience", c.patience},
        {"seed", c.seed},
        {"d_out", c.head.d_out},
        {"hidden", c.head.hidden},
        {"head_init", init_name(c.head.init)},
        {"val_per_class", c.val_per_class},
        {"val_k", c.val_k},
        {"use_mapping", c.use_mapping},
        {"omega_trainable", c.omega_trainable},
        {"normalize_anchors", c.normalize_anchors},
        {"direction", c.direction},
    };
}

void apply_json(TrainConfig& c, const nlohmann::json& j) {
    if (!j.is_object()) fail(ErrorKind::ConfigError, "config must be a JSON object");
    static const std::vector<std::string> known = [] {
        std::vector<std::string> k{"preset", "threads"};
        const nlohmann::json defaults = to_json(TrainConfig{});
        for (const auto& [key, v] : defaults.items()) k.push_back(key);
        return k;
    }();
    for (const auto& [key, v] : j.items())
        if (std::find(known.begin(), known.end(), key) == known.end())
            fail(ErrorKind::ConfigError, "unknown config key '" + key + "'");
    try {
        take(j, "lr0", c.lr0);
        take(j, "epochs", c.epochs);
        take(j, "batch_size", c.batch_size);
        take(j, "m", c.m);
        take(j, "w_kl", c.weights.w_kl);
        take(j, "w_ii", c.weights.w_ii);
        take(j, "w_ic", c.weights.w_ic);
        take(j, "w_id", c.weights.w_id);
        take(j, "tau", c.weights.tau);
        take(j, "include_positive", c.weights.include_positive);
        take(j, "c_psi", c.refine.c_psi);
        take(j, "lambda_psi", c.refine.lambda_psi);
        take(j, "n_r", c.refine.n_r);
        take(j, "augment_noise", c.augment.noise_sigma);
        take(j, "augment_dropout", c.augment.dropout_p);
        take(j, "patience", c.patience);
        take(j, "seed", c.seed);
        take(j, "d_out", c.head.d_out);
        take(j, "hidden", c.head.hidden);
        if (j.contains("head_init")) c.head.init = parse_init(j.at("head_init").get<std::string>());
        take(j, "val_per_class", c.val_per_class);
        take(j, "val_k", c.val_k);
        take(j, "use_mapping", c.use_mapping);
        take(j, "omega_trainable", c.omega_trainable);
        take(j, "normalize_anchors", c.normalize_anchors);
        take(j, "direction", c.direction);
        take(j, "threads", c.threads);
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::ConfigError, std::string("bad config value: ") + e.what());
    }
}

nlohmann::json to_json(const SyntheticConfig& c) {
    return {{"classes_train", c.n_classes_train}, {"classes_test", c.n_classes_test}, {"per_class", c.per_class},
            {"dim", c.dim}, {"noise", c.noise_sigma}, {"anchor_noise", c.anchor_noise},
            {"corrupt_fraction", c.corrupt_fraction}, {"corrupt_margin", c.corrupt_margin},
            {"identity_rotation", c.identity_rotation}, {"seed", c.seed}};
}

nlohmann::json to_json(const LossComponents& c) {
    return {{"kl", c.kl}, {"ii", c.ii}, {"ic", c.ic}, {"id", c.id}};
}

nlohmann::json to_json(const EpochRecord& r) {
    nlohmann::json j = {{"epoch", r.epoch}, {"lr", r.lr}, {"loss", to_json(r.components)}, {"total", r.total},
                        {"label_changes_a", r.label_changes_a}, {"label_changes_b", r.label_changes_b},
                        {"id_skipped", r.id_skipped}};
    j["val_p50"] = r.val_p50 ? nlohmann::json(*r.val_p50) : nlohmann::json(nullptr);
    if (r.label_accuracy_a) j["label_accuracy_a"] = *r.label_accuracy_a;
    if (r.label_accuracy_b) j["label_accuracy_b"] = *r.label_accuracy_b;
    return j;
}

} // namespace clair
