#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "noisesel/core.hpp"
#include "noisesel/model.hpp"

namespace noisesel {

enum class DetectorMethod { Crust, Fine, Sft, Unicon, Disc };

std::string to_string(DetectorMethod method);
DetectorMethod detector_method_from_string(const std::string& name);

enum class JsdCutoffMode { ClassMean, Fixed };

/// Representation FINE aligns: raw inputs or the current model's class probabilities.
enum class FineFeatures { Input, Probabilities };

struct DetectorConfig {
    DetectorMethod method = DetectorMethod::Fine;
    double fl_ratio = 0.9;                    // CRUST coreset fraction
    std::optional<std::size_t> crust_gamma;   // CRUST+k union coreset size override
    GradientLoss crust_loss = GradientLoss::CrossEntropy;  // gradient family for CRUST distances
    FineFeatures fine_features = FineFeatures::Input;
    std::size_t gmm_iters = 100;
    double gmm_tol = 1e-6;
    JsdCutoffMode jsd_cutoff_mode = JsdCutoffMode::ClassMean;
    double jsd_cutoff = 0.5;                  // used in Fixed mode
    double dist_lambda = 0.9;
    std::size_t sft_window = 3;
    bool knowledge_enabled = false;

    void validate() const;
};

/// Per-sample DISC thresholds, carried across epochs.
struct DistState {
    std::vector<double> tau_weak;
    std::vector<double> tau_strong;

    static DistState zeros(std::size_t n);
    std::size_t size() const noexcept { return tau_weak.size(); }
    bool operator==(const DistState&) const = default;
};

struct DetectionResult {
    CleanScores scores;
    std::vector<std::string> warnings;
};

// ---- numerical kernels ----

/// Jensen-Shannon divergence with base-2 logs, in [0, 1].
double jsd(std::span<const double> p, std::span<const double> q);

struct EigenResult {
    std::vector<double> vector;  // unit norm
    double value = 0.0;
    double residual = 0.0;       // ||A v - value v||
    std::size_t iterations = 0;
};

/// Principal eigenvector of a symmetric positive semi-definite matrix.
EigenResult power_iteration(const Matrix& a, std::size_t max_iters = 10000, double tol = 1e-13);

/// Two-component 1-D Gaussian mixture fitted by EM.
struct Gmm1D {
    double mean[2] = {0.0, 0.0};
    double var[2] = {1.0, 1.0};
    double weight[2] = {0.5, 0.5};
    std::size_t iterations = 0;
    bool degenerate = false;  // EM collapsed; caller should not trust posteriors

    static Gmm1D fit(std::span<const double> values, std::size_t max_iters = 100, double tol = 1e-6);
    std::size_t high_component() const noexcept { return mean[1] >= mean[0] ? 1 : 0; }
    /// Posterior of the higher-mean component.
    double posterior_high(double x) const;
};

/// Selection rule on a 1-D score: GMM posterior of the higher-mean component,
/// selected when > 0.5; falls back to a median split when EM degenerates.
struct GmmSplit {
    std::vector<double> prob;
    std::vector<bool> selected;
    bool fallback = false;
};
GmmSplit gmm_split(std::span<const double> values, std::size_t max_iters, double tol);

// ---- CRUST ----

/// Greedy minimiser of the sum of pairwise euclidean distances among `size`
/// rows of `vectors`: seed with the row of least total distance, then add the
/// row with the least distance sum to the chosen set. Indices in pick order.
std::vector<std::size_t> greedy_coreset(const Matrix& vectors, std::size_t size);

/// Sum over unordered pairs in `subset` of the euclidean row distance.
double coreset_cost(const Matrix& vectors, std::span<const std::size_t> subset);

/// ceil(fraction * count) with a small guard against representation error.
std::size_t fraction_count(double fraction, std::size_t count);

DetectionResult crust_select(const DatasetView& data, const SoftmaxModel& model, double fl_ratio,
                             const NoiseKnowledge& knowledge, std::optional<std::size_t> gamma = std::nullopt,
                             GradientLoss loss = GradientLoss::CrossEntropy);

// ---- FINE ----

/// Unit principal eigenvector of sum_x x x^T over the given rows, oriented so
/// that the mean cosine alignment is nonnegative.
std::vector<double> class_direction(const Matrix& features, std::span<const std::size_t> rows);
double alignment(std::span<const double> x, std::span<const double> direction);

DetectionResult fine_select(const DatasetView& data, const Matrix& features, std::size_t gmm_iters,
                            double gmm_tol, const NoiseKnowledge& knowledge);

// ---- SFT ----

/// True when the history holds pred(t1) == label and a later pred(t2) != label
/// (and, if `restrict_to` is non-null, pred(t2) in *restrict_to).
bool fluctuation_event(std::span<const ClassIndex> history, ClassIndex label, const ClassSet* restrict_to = nullptr);

DetectionResult sft_select(const DatasetView& data, const PredictionBank& bank, const NoiseKnowledge& knowledge);

// ---- UNICON ----

DetectionResult unicon_select(const DatasetView& data, const Matrix& latest_probs, JsdCutoffMode mode,
                              double fixed_cutoff, const NoiseKnowledge& knowledge);

// ---- DISC ----

struct DiscOutput {
    DetectionResult result;
    DistState state;
};

DiscOutput disc_select(const DatasetView& data, const AugmentedConfidences& conf, const DistState& state,
                       double lambda, const NoiseKnowledge& knowledge);

// ---- dispatch ----

/// Inputs a detector may need; each method names the ones it requires.
struct ModelArtifacts {
    const SoftmaxModel* model = nullptr;               // Crust
    const Matrix* features = nullptr;                  // Fine
    const PredictionBank* bank = nullptr;              // Sft, Unicon
    const AugmentedConfidences* confidences = nullptr; // Disc
    DistState* dist_state = nullptr;                   // Disc, updated in place
};

DetectionResult run_detector(const DetectorConfig& cfg, const DatasetView& data, const ModelArtifacts& artifacts,
                             const NoiseKnowledge& knowledge);

}  // namespace noisesel
