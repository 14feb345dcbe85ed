#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "noisesel/core.hpp"
#include "noisesel/detectors.hpp"
#include "noisesel/metrics.hpp"
#include "noisesel/model.hpp"
#include "noisesel/synth.hpp"
#include "noisesel/transition.hpp"

namespace noisesel {

inline constexpr int kConfigVersion = 1;

enum class KnowledgeMode { None, GroundTruth, Perturbed, FromDualT };

std::string to_string(KnowledgeMode mode);
KnowledgeMode knowledge_mode_from_string(const std::string& name);

struct KnowledgeConfig {
    KnowledgeMode mode = KnowledgeMode::GroundTruth;
    double missing_frac = 0.0;  // Perturbed
    double noisy_frac = 0.0;    // Perturbed
    double dualt_threshold = 0.05;
    std::size_t dualt_top_m = 1;
    double dualt_anchor_quantile = 0.97;
};

struct TrainingConfig {
    std::size_t epochs = 20;
    std::size_t warmup_epochs = 5;
    double learning_rate = 0.1;
    std::size_t batch_size = 32;
    bool soft_weighting = false;  // weight kept samples by prob_clean instead of 1
};

struct ExperimentConfig {
    ClusterSpec cluster;  // cluster.seed is derived per run seed
    NoisePlan noise;      // num_classes / samples_per_class follow cluster
    DetectorConfig detector;
    KnowledgeConfig knowledge;
    AugmentationPolicy augmentation;
    TrainingConfig training;
    std::size_t test_per_class = 200;
    bool paired = true;  // also run the base method on the same data and warm-up
    bool dump_selection = false;
    std::vector<std::uint64_t> seeds = {0};
    std::string output_dir;  // empty: keep results in memory only

    void validate() const;
};

/// Parses a version-1 config; unknown keys are errors. Overrides are
/// "dotted.key=value" strings applied after the file, values parsed as JSON
/// when possible and as plain strings otherwise.
ExperimentConfig parse_config(const std::string& json_text, const std::vector<std::string>& overrides = {});
ExperimentConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});
/// Fully resolved config, every field present.
std::string config_to_json(const ExperimentConfig& cfg);

/// Data shared by every branch of one seed.
struct SeedData {
    std::uint64_t seed = 0;
    LabeledDataset train;
    LabeledDataset test;
    NoiseKnowledge true_knowledge;
};

SeedData synthesize(const ExperimentConfig& cfg, std::uint64_t seed);

struct EpochRecord {
    std::size_t epoch = 0;
    double loss = 0.0;
    std::size_t selected = 0;
    double precision = 0.0;
    double recall = 0.0;
};

struct BranchOutcome {
    std::string name;  // "base" or "plus_k"
    bool knowledge_enabled = false;
    double test_accuracy = 0.0;
    SelectionReport selection;  // final filtering epoch
    ConfusionReport confusion;
    std::vector<EpochRecord> epochs;
    std::vector<std::string> warnings;  // distinct, first occurrence order
};

struct SeedOutcome {
    std::uint64_t seed = 0;
    NoiseKnowledge knowledge;  // what the +k branch used
    std::vector<BranchOutcome> branches;
    std::optional<AbsorptionReport> absorption;

    const BranchOutcome* branch(const std::string& name) const;
};

struct ExperimentOutcome {
    std::vector<SeedOutcome> seeds;
};

/// Runs every seed (in parallel up to `jobs`). Writes the run directory when
/// cfg.output_dir is set. Class collapse raises ErrorKind::Abort.
ExperimentOutcome run_experiment(const ExperimentConfig& cfg, std::size_t jobs = 1);

struct SweepCell {
    double missing = 0.0;
    double noisy = 0.0;
};

struct SweepOutcome {
    std::vector<std::uint64_t> seeds;
    std::vector<SweepCell> cells;
    std::vector<std::vector<double>> accuracy;  // [cell][seed]
    std::vector<double> no_knowledge;           // [seed]
    std::vector<double> full_knowledge;         // [seed]
};

/// Perturbs the ground-truth knowledge per cell and trains one +k branch per
/// (cell, seed), plus no-knowledge and full-knowledge anchors.
SweepOutcome sweep_knowledge_quality(const ExperimentConfig& cfg, const std::vector<SweepCell>& cells,
                                     std::size_t jobs = 1);
/// Cartesian product of the listed missing and noisy fractions.
std::vector<SweepCell> sweep_grid(const std::vector<double>& missing, const std::vector<double>& noisy);
std::string sweep_table(const SweepOutcome& sweep);

struct SelectionOutcome {
    CleanScores scores;
    std::vector<std::string> warnings;
};

/// Warm-trains on `data` for training.warmup_epochs, then runs the detector
/// once. Knowledge is used when non-null.
SelectionOutcome select_on_dataset(const ExperimentConfig& cfg, const LabeledDataset& data,
                                   const NoiseKnowledge* knowledge, std::uint64_t seed);
/// Warm-trains on `data`, then estimates the transition matrix.
DualTEstimate estimate_on_dataset(const ExperimentConfig& cfg, const LabeledDataset& data, std::uint64_t seed);

/// Table-style summary of a run directory's metrics.json. Io error naming the
/// absent artifacts when the directory is incomplete.
std::string render_report(const std::filesystem::path& run_dir);

}  // namespace noisesel
