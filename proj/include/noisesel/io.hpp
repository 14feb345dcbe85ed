#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include "noisesel/core.hpp"

namespace noisesel::io {

/// Shortest text that is still 17 significant digits ("%.17g").
std::string format_double(double v);

// Dataset CSV: header "id,noisy_label,true_label,f0,...,f{d-1}". true_label is
// empty when the dataset carries no ground truth.
void write_dataset_csv(const LabeledDataset& ds, std::ostream& out);
/// num_classes defaults to max label + 1.
LabeledDataset read_dataset_csv(std::istream& in, std::optional<std::size_t> num_classes = std::nullopt);
void save_dataset_csv(const LabeledDataset& ds, const std::filesystem::path& path);
LabeledDataset load_dataset_csv(const std::filesystem::path& path,
                                std::optional<std::size_t> num_classes = std::nullopt);

// Knowledge JSON: {"k": 10, "sources": {"5": [0, 1]}, "origin": "GroundTruth"}
std::string knowledge_to_json(const NoiseKnowledge& knowledge);
NoiseKnowledge knowledge_from_json(const std::string& text);
void save_knowledge_json(const NoiseKnowledge& knowledge, const std::filesystem::path& path);
NoiseKnowledge load_knowledge_json(const std::filesystem::path& path);

// Transition JSON: {"k": 2, "t": [[0.7, 0.3], [0.0, 1.0]]}
std::string transition_to_json(const TransitionMatrix& t);
TransitionMatrix transition_from_json(const std::string& text);

// Selection CSV: "id,prob_clean,selected"
void write_scores_csv(const CleanScores& scores, std::ostream& out);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace noisesel::io
