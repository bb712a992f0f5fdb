#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "clair/embedding_io.hpp"
#include "clair/losses.hpp"
#include "clair/mapping.hpp"
#include "clair/model.hpp"
#include "clair/pseudo_labels.hpp"

namespace clair {

struct TrainConfig {
    double lr0 = 2e-4;
    std::size_t epochs = 25;
    std::size_t batch_size = 64;
    double m = 0.9;
    LossWeights weights;
    RefineConfig refine;
    AugmentConfig augment;
    std::size_t patience = 5;
    std::uint64_t seed = 0;
    HeadConfig head;
    std::size_t val_per_class = 12;
    std::size_t val_k = 50;
    bool use_mapping = true;
    bool omega_trainable = true;
    bool normalize_anchors = true;
    /// "a2b" maps domain-A inputs into B's frame, "b2a" the reverse.
    std::string direction = "a2b";
    std::size_t threads = 1;

    void validate() const;
    bool a_mapped() const { return direction == "a2b"; }
};

double cosine_lr(std::size_t step, std::size_t total_steps, double lr0);

struct StepRecord {
    std::size_t epoch = 0;
    std::size_t step = 0;
    double lr = 0.0;
    LossComponents components;
    double total = 0.0;
};

struct EpochRecord {
    std::size_t epoch = 0;  // 1-based
    double lr = 0.0;        // rate at the epoch's last step
    LossComponents components;
    double total = 0.0;
    std::optional<double> val_p50;
    std::size_t label_changes_a = 0;
    std::size_t label_changes_b = 0;
    std::optional<double> label_accuracy_a;
    std::optional<double> label_accuracy_b;
    std::size_t id_skipped = 0;
};

struct TrainState {
    Encoder q;
    Encoder k;
    MappingMatrix omega_a2b;
    MappingMatrix omega_b2a;
    PseudoLabelMatrix labels_a;
    PseudoLabelMatrix labels_b;
    MemoryBank bank_a;
    MemoryBank bank_b;
    std::vector<EpochRecord> history;
    std::vector<StepRecord> steps;
    std::optional<double> initial_val_p50;
    std::optional<double> initial_label_accuracy_a;
    std::optional<double> initial_label_accuracy_b;
    std::size_t best_epoch = 0;
    bool stopped_early = false;
    EmbeddingSet train_a;
    EmbeddingSet train_b;
    EmbeddingSet val_a;
    EmbeddingSet val_b;
};

struct TrainHooks {
    /// Called after every epoch's momentum update, refinement and scoring.
    std::function<void(const TrainState&, const EpochRecord&)> on_epoch;
    /// Replaces the default θ_k = θ_q initialization.
    std::function<void(Encoder& theta_k, const Encoder& theta_q)> init_key;
};

/// Ground-truth classes of `set` expressed as anchor indices (by class name);
/// kUnlabeled where no match exists.
std::vector<std::uint32_t> truth_in_anchor_space(const EmbeddingSet& set, const AnchorSet& anchors);

/// Accuracy over rows with known truth.
std::optional<double> known_label_accuracy(const PseudoLabelMatrix& labels, const std::vector<std::uint32_t>& truth);

TrainState train(const EmbeddingSet& a, const EmbeddingSet& b, const AnchorSet& anchors_a, const AnchorSet& anchors_b,
                 const TrainConfig& cfg, const TrainHooks& hooks = {});

/// Cross-domain validation P@k averaged over both directions.
std::optional<double> validation_score(const TrainState& state, const TrainConfig& cfg);

} // namespace clair
