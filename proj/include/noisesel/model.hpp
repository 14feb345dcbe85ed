#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "noisesel/core.hpp"

namespace noisesel {

/// Single-layer softmax classifier: p = softmax(W x + b).
class SoftmaxModel {
public:
    SoftmaxModel(std::size_t num_classes, std::size_t dim, double learning_rate = 0.1);

    std::size_t num_classes() const noexcept { return weights_.rows(); }
    std::size_t dim() const noexcept { return weights_.cols(); }
    std::size_t parameter_count() const noexcept { return num_classes() * dim() + num_classes(); }

    Matrix& weights() noexcept { return weights_; }
    const Matrix& weights() const noexcept { return weights_; }
    std::vector<double>& bias() noexcept { return bias_; }
    const std::vector<double>& bias() const noexcept { return bias_; }

    double learning_rate() const noexcept { return learning_rate_; }
    void set_learning_rate(double lr);
    std::size_t epoch_counter() const noexcept { return epochs_; }
    void advance_epoch() noexcept { ++epochs_; }

    void logits(std::span<const double> x, std::span<double> out) const;
    std::vector<double> probabilities(std::span<const double> x) const;
    /// n x k matrix of class probabilities.
    Matrix predict(const Matrix& features) const;
    std::vector<ClassIndex> predict_labels(const Matrix& features) const;

    bool operator==(const SoftmaxModel&) const = default;

private:
    Matrix weights_;
    std::vector<double> bias_;
    double learning_rate_;
    std::size_t epochs_ = 0;
};

/// Numerically stable softmax in place.
void softmax_inplace(std::span<double> z);
ClassIndex argmax(std::span<const double> v);

/// One pass of shuffled mini-batch gradient descent on cross-entropy. Sample i's
/// loss is scaled by weights[i]; zero-weight samples are skipped. Returns the
/// weighted mean loss seen during the pass.
double train_epoch(SoftmaxModel& model, const DatasetView& data, std::span<const double> weights,
                   std::uint64_t seed, std::size_t batch_size = 32);

/// Gradient of 0.5 * ||onehot(c) - softmax(Wx + b)||^2 with respect to W
/// (row-major) then b; length k*d + k.
std::vector<double> per_sample_gradient(const SoftmaxModel& model, std::span<const double> x, ClassIndex c);

enum class GradientLoss { SquaredError, CrossEntropy };

/// Same gradient for several target classes from a single forward pass; row t
/// corresponds to targets[t]. CrossEntropy gives the gradient of -log p_c instead.
Matrix per_sample_gradients(const SoftmaxModel& model, std::span<const double> x,
                            std::span<const ClassIndex> targets, GradientLoss loss = GradientLoss::SquaredError);

/// Feature-space views for weak/strong confidence checks.
struct AugmentationPolicy {
    double weak_sigma = 0.1;      // Gaussian jitter std on the weak view
    double strong_sigma = 0.5;    // Gaussian jitter std on the strong view
    double strong_dropout = 0.2;  // fraction of coordinates zeroed on the strong view

    bool is_identity() const noexcept { return weak_sigma == 0.0 && strong_sigma == 0.0 && strong_dropout == 0.0; }
    void validate() const;
};

struct AugmentedConfidences {
    Matrix weak;
    Matrix strong;
};

AugmentedConfidences augmented_confidences(const SoftmaxModel& model, const Matrix& features,
                                           const AugmentationPolicy& policy, std::uint64_t seed);

/// Per-sample ring buffer of the last `window` argmax predictions.
class PredictionBank {
public:
    PredictionBank(std::size_t num_samples, std::size_t window);

    std::size_t window() const noexcept { return window_; }
    std::size_t num_samples() const noexcept { return n_; }
    std::size_t recorded_epochs() const noexcept { return stored_; }
    /// Predictions of sample i, oldest first.
    std::vector<ClassIndex> history(std::size_t i) const;
    const Matrix& latest_probs() const noexcept { return latest_; }

    void push(Matrix probs);

private:
    std::size_t n_;
    std::size_t window_;
    std::size_t stored_ = 0;
    std::size_t next_ = 0;  // ring slot written next
    std::vector<ClassIndex> ring_;  // window_ x n_
    Matrix latest_;
};

void record_epoch(PredictionBank& bank, const SoftmaxModel& model, const Matrix& features);

// Checkpoint layout (little-endian): "NSLM", u32 version, u32 k, u32 d,
// k*d f64 weights row-major, k f64 bias.
inline constexpr std::uint32_t kCheckpointVersion = 1;
std::vector<std::uint8_t> serialize_checkpoint(const SoftmaxModel& model);
SoftmaxModel deserialize_checkpoint(std::span<const std::uint8_t> bytes, double learning_rate = 0.1);
void save_checkpoint(const SoftmaxModel& model, const std::filesystem::path& path);
SoftmaxModel load_checkpoint(const std::filesystem::path& path, double learning_rate = 0.1);

}  // namespace noisesel
