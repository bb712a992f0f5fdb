#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "clair/trainer.hpp"

namespace clair {

void write_head(const ProjectionHead& head, const std::filesystem::path& dir, const std::string& stem);
ProjectionHead read_head(const std::filesystem::path& dir, const std::string& stem);

void write_labels(const PseudoLabelMatrix& labels, const std::vector<std::string>& class_names, const std::string& name,
                  const std::filesystem::path& path);
PseudoLabelMatrix read_labels(const std::filesystem::path& path);

struct Checkpoint {
    TrainConfig config;
    Encoder q;
    Encoder k;
    MappingMatrix omega_a2b;
    MappingMatrix omega_b2a;
    PseudoLabelMatrix labels_a;
    PseudoLabelMatrix labels_b;
};

/// head_q, head_k, omega_a2b, omega_b2a, labels_a, labels_b, config.json and
/// train_log.jsonl (one object per epoch).
void write_checkpoint(const std::filesystem::path& dir, const TrainState& state, const TrainConfig& cfg,
                      const std::vector<std::string>& class_names);
Checkpoint read_checkpoint(const std::filesystem::path& dir);

std::string train_log_jsonl(const TrainState& state);

} // namespace clair
