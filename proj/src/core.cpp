#include "noisesel/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace noisesel {

void fail(ErrorKind kind, const std::string& message) { throw Error(kind, message); }

LabeledDataset::LabeledDataset(Matrix features, std::vector<ClassIndex> noisy_labels,
                               std::optional<std::vector<ClassIndex>> true_labels,
                               std::size_t num_classes)
    : features_(std::move(features)),
      noisy_labels_(std::move(noisy_labels)),
      true_labels_(std::move(true_labels)),
      num_classes_(num_classes) {
    require(num_classes_ >= 2, ErrorKind::Validation, "dataset needs at least 2 classes");
    require(features_.rows() == noisy_labels_.size(), ErrorKind::Shape,
            "feature rows (" + std::to_string(features_.rows()) + ") != label count (" +
                std::to_string(noisy_labels_.size()) + ")");
    auto in_range = [this](ClassIndex c) { return c < num_classes_; };
    require(std::all_of(noisy_labels_.begin(), noisy_labels_.end(), in_range), ErrorKind::Index,
            "noisy label out of range");
    if (true_labels_) {
        require(true_labels_->size() == noisy_labels_.size(), ErrorKind::Shape,
                "true label count differs from noisy label count");
        require(std::all_of(true_labels_->begin(), true_labels_->end(), in_range), ErrorKind::Index,
                "true label out of range");
    }
}

const std::vector<ClassIndex>& LabeledDataset::true_labels() const {
    require(true_labels_.has_value(), ErrorKind::Validation, "dataset has no true labels");
    return *true_labels_;
}

DatasetView LabeledDataset::view() const { return DatasetView(features_, noisy_labels_, num_classes_); }

DatasetView::DatasetView(const Matrix& features, std::span<const ClassIndex> noisy_labels,
                         std::size_t num_classes)
    : features_(&features), labels_(noisy_labels), num_classes_(num_classes) {
    require(features.rows() == noisy_labels.size(), ErrorKind::Shape, "view: feature rows != labels");
}

std::vector<std::size_t> DatasetView::members_of(ClassIndex c) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < labels_.size(); ++i)
        if (labels_[i] == c) out.push_back(i);
    return out;
}

std::string to_string(KnowledgeOrigin origin) {
    switch (origin) {
        case KnowledgeOrigin::GroundTruth: return "GroundTruth";
        case KnowledgeOrigin::FromTransitionMatrix: return "FromTransitionMatrix";
        case KnowledgeOrigin::FromLabelPairs: return "FromLabelPairs";
        case KnowledgeOrigin::Perturbed: return "Perturbed";
    }
    return "GroundTruth";
}

KnowledgeOrigin knowledge_origin_from_string(const std::string& name) {
    for (auto o : {KnowledgeOrigin::GroundTruth, KnowledgeOrigin::FromTransitionMatrix,
                   KnowledgeOrigin::FromLabelPairs, KnowledgeOrigin::Perturbed})
        if (to_string(o) == name) return o;
    fail(ErrorKind::Validation, "unknown knowledge origin '" + name + "'");
}

NoiseKnowledge::NoiseKnowledge(std::size_t num_classes, std::map<ClassIndex, ClassSet> sources,
                               KnowledgeOrigin origin)
    : num_classes_(num_classes), origin_(origin) {
    for (auto& [c, set] : sources) {
        require(c < num_classes, ErrorKind::Index, "knowledge class " + std::to_string(c) + " >= k");
        require(!set.contains(c), ErrorKind::Validation,
                "class " + std::to_string(c) + " listed as its own noise source");
        for (ClassIndex s : set)
            require(s < num_classes, ErrorKind::Index, "noise source " + std::to_string(s) + " >= k");
        if (!set.empty()) sources_.emplace(c, std::move(set));
    }
}

NoiseKnowledge NoiseKnowledge::empty(std::size_t num_classes) {
    return NoiseKnowledge(num_classes, {}, KnowledgeOrigin::GroundTruth);
}

NoiseKnowledge NoiseKnowledge::from_label_pairs(
    std::size_t num_classes, std::span<const std::pair<ClassIndex, ClassIndex>> pairs) {
    std::map<ClassIndex, ClassSet> sources;
    for (auto [from, to] : pairs) {
        require(from < num_classes && to < num_classes, ErrorKind::Index, "label pair out of range");
        if (from != to) sources[to].insert(from);
    }
    return NoiseKnowledge(num_classes, std::move(sources), KnowledgeOrigin::FromLabelPairs);
}

std::size_t NoiseKnowledge::entry_count() const noexcept {
    std::size_t n = 0;
    for (const auto& [c, set] : sources_) n += set.size();
    return n;
}

const ClassSet& sources_of(const NoiseKnowledge& knowledge, ClassIndex c) {
    static const ClassSet kNone;
    require(c < knowledge.num_classes(), ErrorKind::Index,
            "class " + std::to_string(c) + " out of range for k=" + std::to_string(knowledge.num_classes()));
    auto it = knowledge.mapping().find(c);
    return it == knowledge.mapping().end() ? kNone : it->second;
}

CleanScores::CleanScores(std::vector<double> prob_clean, std::vector<bool> selected)
    : prob_(std::move(prob_clean)), selected_(std::move(selected)) {
    require(prob_.size() == selected_.size(), ErrorKind::Shape, "prob_clean and selected differ in length");
    for (std::size_t i = 0; i < prob_.size(); ++i) {
        require(prob_[i] >= 0.0 && prob_[i] <= 1.0, ErrorKind::Validation,
                "prob_clean[" + std::to_string(i) + "] outside [0,1]");
        require(!selected_[i] || prob_[i] > 0.0, ErrorKind::Validation,
                "sample " + std::to_string(i) + " selected with zero clean probability");
    }
}

CleanScores CleanScores::from_probabilities(std::vector<double> prob_clean) {
    std::vector<bool> selected(prob_clean.size());
    for (std::size_t i = 0; i < prob_clean.size(); ++i) selected[i] = prob_clean[i] > 0.0;
    return CleanScores(std::move(prob_clean), std::move(selected));
}

std::size_t CleanScores::selected_count() const noexcept {
    return static_cast<std::size_t>(std::count(selected_.begin(), selected_.end(), true));
}

TransitionMatrix::TransitionMatrix(Matrix t) : t_(std::move(t)) {
    require(t_.rows() == t_.cols() && t_.rows() >= 1, ErrorKind::Shape, "transition matrix must be square");
    for (std::size_t i = 0; i < t_.rows(); ++i) {
        double sum = 0.0;
        for (double v : t_.row(i)) {
            require(v >= 0.0 && v <= 1.0, ErrorKind::Validation, "transition entry outside [0,1]");
            sum += v;
        }
        require(std::abs(sum - 1.0) <= 1e-9, ErrorKind::Validation,
                "transition row " + std::to_string(i) + " does not sum to 1");
    }
}

TransitionMatrix TransitionMatrix::identity(std::size_t k) {
    Matrix m(k, k);
    for (std::size_t i = 0; i < k; ++i) m(i, i) = 1.0;
    return TransitionMatrix(std::move(m));
}

Matrix row_normalize(Matrix m) {
    for (std::size_t i = 0; i < m.rows(); ++i) {
        auto row = m.row(i);
        double sum = std::accumulate(row.begin(), row.end(), 0.0);
        if (sum > 0.0) {
            for (double& v : row) v /= sum;
        } else {
            std::fill(row.begin(), row.end(), 0.0);
            if (i < m.cols()) row[i] = 1.0;
        }
    }
    return m;
}

CleanScores integrate_knowledge(const Matrix& prob_of_class, std::span<const ClassIndex> noisy_labels,
                                const NoiseKnowledge& knowledge) {
    const std::size_t n = noisy_labels.size();
    const std::size_t k = knowledge.num_classes();
    require(prob_of_class.rows() == n, ErrorKind::Shape,
            "prob_of_class has " + std::to_string(prob_of_class.rows()) + " rows, expected " + std::to_string(n));
    require(prob_of_class.cols() == k, ErrorKind::Shape,
            "prob_of_class has " + std::to_string(prob_of_class.cols()) + " columns, expected k=" + std::to_string(k));

    std::vector<double> prob(n);
    for (std::size_t i = 0; i < n; ++i) {
        const ClassIndex c = noisy_labels[i];
        require(c < k, ErrorKind::Shape, "label " + std::to_string(c) + " >= k");
        double p = prob_of_class(i, c);
        for (ClassIndex source : sources_of(knowledge, c)) {
            if (!(p > prob_of_class(i, source))) {
                p = 0.0;
                break;
            }
        }
        prob[i] = p;
    }
    return CleanScores::from_probabilities(std::move(prob));
}

}  // namespace noisesel
