#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace noisesel {

using ClassIndex = std::uint32_t;
using ClassSet = std::set<ClassIndex>;

enum class ErrorKind {
    Shape,       // dimension mismatch between inputs
    Index,       // class or sample index out of range
    Validation,  // bad configuration or precondition violation
    Io,          // file could not be read or written
    Abort,       // runtime abort (e.g. class collapse)
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& message);

inline void require(bool condition, ErrorKind kind, const std::string& message) {
    if (!condition) fail(kind, message);
}

/// Dense row-major matrix of doubles.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    std::span<const double> data() const noexcept { return data_; }
    std::span<double> data() noexcept { return data_; }

    bool operator==(const Matrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

class DatasetView;

/// Features with noisy labels and, optionally, the hidden true labels.
class LabeledDataset {
public:
    LabeledDataset() = default;
    LabeledDataset(Matrix features, std::vector<ClassIndex> noisy_labels,
                   std::optional<std::vector<ClassIndex>> true_labels, std::size_t num_classes);

    const Matrix& features() const noexcept { return features_; }
    const std::vector<ClassIndex>& noisy_labels() const noexcept { return noisy_labels_; }
    bool has_true_labels() const noexcept { return true_labels_.has_value(); }
    /// Throws Validation when the dataset carries no ground truth.
    const std::vector<ClassIndex>& true_labels() const;
    std::size_t num_classes() const noexcept { return num_classes_; }
    std::size_t size() const noexcept { return noisy_labels_.size(); }
    std::size_t dim() const noexcept { return features_.cols(); }

    /// The detector-facing view; it has no access to true labels.
    DatasetView view() const;

    bool operator==(const LabeledDataset&) const = default;

private:
    Matrix features_;
    std::vector<ClassIndex> noisy_labels_;
    std::optional<std::vector<ClassIndex>> true_labels_;
    std::size_t num_classes_ = 0;
};

/// Read-only window over a dataset's features and noisy labels.
class DatasetView {
public:
    DatasetView(const Matrix& features, std::span<const ClassIndex> noisy_labels,
                std::size_t num_classes);

    const Matrix& features() const noexcept { return *features_; }
    std::span<const ClassIndex> noisy_labels() const noexcept { return labels_; }
    std::size_t num_classes() const noexcept { return num_classes_; }
    std::size_t size() const noexcept { return labels_.size(); }
    std::size_t dim() const noexcept { return features_->cols(); }

    /// Sample indices carrying noisy label `c`, ascending.
    std::vector<std::size_t> members_of(ClassIndex c) const;

private:
    const Matrix* features_;
    std::span<const ClassIndex> labels_;
    std::size_t num_classes_;
};

enum class KnowledgeOrigin { GroundTruth, FromTransitionMatrix, FromLabelPairs, Perturbed };

std::string to_string(KnowledgeOrigin origin);
KnowledgeOrigin knowledge_origin_from_string(const std::string& name);

/// Per-class noise-source sets: sources(c) holds the classes whose samples are
/// likely to carry label c.
class NoiseKnowledge {
public:
    NoiseKnowledge() = default;
    NoiseKnowledge(std::size_t num_classes, std::map<ClassIndex, ClassSet> sources,
                   KnowledgeOrigin origin);

    static NoiseKnowledge empty(std::size_t num_classes);
    /// (i, j): samples of class i are likely mislabeled as j, so i is a source of j.
    static NoiseKnowledge from_label_pairs(std::size_t num_classes,
                                           std::span<const std::pair<ClassIndex, ClassIndex>> pairs);

    std::size_t num_classes() const noexcept { return num_classes_; }
    KnowledgeOrigin origin() const noexcept { return origin_; }
    const std::map<ClassIndex, ClassSet>& mapping() const noexcept { return sources_; }
    bool is_empty() const noexcept { return sources_.empty(); }
    /// Total number of (class, source) entries.
    std::size_t entry_count() const noexcept;

    bool operator==(const NoiseKnowledge&) const = default;

private:
    std::size_t num_classes_ = 0;
    std::map<ClassIndex, ClassSet> sources_;  // never stores empty sets
    KnowledgeOrigin origin_ = KnowledgeOrigin::GroundTruth;
};

/// Noise sources recorded for class `c`; empty when none. Index error when c >= k.
const ClassSet& sources_of(const NoiseKnowledge& knowledge, ClassIndex c);

/// Per-sample clean probabilities and the selection derived from them.
class CleanScores {
public:
    CleanScores() = default;
    CleanScores(std::vector<double> prob_clean, std::vector<bool> selected);
    /// selected = prob_clean > 0
    static CleanScores from_probabilities(std::vector<double> prob_clean);

    const std::vector<double>& prob_clean() const noexcept { return prob_; }
    const std::vector<bool>& selected() const noexcept { return selected_; }
    std::size_t size() const noexcept { return prob_.size(); }
    std::size_t selected_count() const noexcept;

    bool operator==(const CleanScores&) const = default;

private:
    std::vector<double> prob_;
    std::vector<bool> selected_;
};

/// k x k row-stochastic matrix, entry (i, j) = P(noisy = j | true = i).
class TransitionMatrix {
public:
    TransitionMatrix() = default;
    explicit TransitionMatrix(Matrix t);
    static TransitionMatrix identity(std::size_t k);

    const Matrix& matrix() const noexcept { return t_; }
    std::size_t num_classes() const noexcept { return t_.rows(); }
    double operator()(std::size_t i, std::size_t j) const { return t_(i, j); }

private:
    Matrix t_;
};

/// Scales each row to sum 1; all-zero rows become one-hot on the diagonal.
Matrix row_normalize(Matrix m);

/// Cross-class knowledge check: sample i keeps prob_of_class(i, label) only when
/// it strictly exceeds every noise-source entry of its label's row, else 0.
CleanScores integrate_knowledge(const Matrix& prob_of_class, std::span<const ClassIndex> noisy_labels,
                                const NoiseKnowledge& knowledge);

}  // namespace noisesel
