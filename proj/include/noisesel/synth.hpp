#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "noisesel/core.hpp"

namespace noisesel {

using ClassPair = std::pair<ClassIndex, ClassIndex>;
using CountMatrix = std::vector<std::vector<std::size_t>>;

/// Isotropic Gaussian clusters, one per class, unit within-class variance.
struct ClusterSpec {
    std::size_t num_classes = 10;
    std::size_t dim = 32;
    std::size_t samples_per_class = 500;
    double separation = 4.0;  // distance between class means, in within-class std units
    std::vector<ClassPair> confusable_pairs;  // placed at separation / 2
    std::uint64_t seed = 0;

    void validate() const;
};

/// k x d class means. With d >= k unrelated classes sit exactly `separation`
/// apart along random orthogonal directions; with d < k they sit on a grid of
/// that pitch (at least `separation` apart). Each confusable pair is moved to
/// `separation / 2`. Deterministic in spec.seed.
Matrix class_means(const ClusterSpec& spec);

/// Draws `per_class` samples around each mean with a dedicated seed (used for
/// disjoint train/test splits sharing one geometry). Labels are clean.
LabeledDataset sample_clusters(const ClusterSpec& spec, const Matrix& means, std::size_t per_class,
                               std::uint64_t sample_seed);

LabeledDataset generate_clusters(const ClusterSpec& spec);

enum class NoiseKind { Dominant, Asymmetric };

struct NoisePlan {
    NoiseKind kind = NoiseKind::Dominant;
    double noise_ratio = 0.5;
    std::vector<ClassPair> pairs;  // Asymmetric only
    std::size_t num_classes = 10;
    std::size_t samples_per_class = 500;  // pre-corruption per-class budget

    /// Dominant: the first half of [0, k). They never carry noisy labels.
    std::vector<ClassIndex> dominant_classes() const;
    std::vector<ClassIndex> recessive_classes() const;
    void validate() const;
};

NoisePlan dominant_plan(std::size_t num_classes, std::size_t samples_per_class, double ratio);
NoisePlan asymmetric_plan(std::size_t num_classes, std::size_t samples_per_class,
                          std::vector<ClassPair> pairs, double ratio);

/// Per-class sample counts of a dominant-noise plan.
struct DominantComposition {
    std::size_t dominant_sampled = 0;   // true samples drawn per dominant class
    std::size_t recessive_sampled = 0;  // true samples drawn per recessive class
    std::size_t dominant_after = 0;     // labels per dominant class after mixing
    std::size_t recessive_after = 0;    // labels per recessive class after mixing
    std::size_t noisy_per_recessive = 0;
    /// transfer[r][d]: dominant class d samples relabeled as recessive class r
    /// (indices into recessive_classes() / dominant_classes()).
    CountMatrix transfer;
};

DominantComposition dominant_composition(const NoisePlan& plan);

/// counts[i][j]: samples of true class i that will carry label j under `plan`.
CountMatrix planned_label_counts(const NoisePlan& plan);

/// counts[i][j] measured on a dataset with ground truth.
CountMatrix observed_label_counts(const LabeledDataset& ds);

struct Corrupted {
    LabeledDataset dataset;
    NoiseKnowledge knowledge;
};

/// Subsamples dominant and recessive classes to the plan's composition, then
/// relabels dominant samples as recessive classes (uniform over dominant
/// contributors). Knowledge: every recessive class -> all dominant classes.
Corrupted apply_dominant_noise(const LabeledDataset& ds, const NoisePlan& plan, std::uint64_t seed);

/// Within each pair (A, B), round(ratio * |A|) samples of A become B and vice versa.
Corrupted apply_asymmetric_noise(const LabeledDataset& ds, const std::vector<ClassPair>& pairs,
                                 double ratio, std::uint64_t seed);

Corrupted apply_noise(const LabeledDataset& ds, const NoisePlan& plan, std::uint64_t seed);

/// Drops ceil(missing * s) sources of each class and swaps ceil(noisy * s) of
/// the rest for classes that are neither the class nor a true source.
NoiseKnowledge perturb_knowledge(const NoiseKnowledge& knowledge, double missing_frac, double noisy_frac,
                                 std::uint64_t seed);

std::size_t round_half_up(double x);

}  // namespace noisesel
