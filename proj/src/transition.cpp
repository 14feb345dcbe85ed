#include "noisesel/transition.hpp"

#include <algorithm>
#include <cmath>

#include "noisesel/model.hpp"

namespace noisesel {

DualTEstimate estimate_dual_t(const DatasetView& data, const Matrix& latest_probs, double anchor_quantile) {
    const std::size_t n = data.size(), k = data.num_classes();
    require(latest_probs.rows() == n && latest_probs.cols() == k, ErrorKind::Shape,
            "estimate_dual_t: probability matrix must be n x k");
    require(n > 0, ErrorKind::Validation, "estimate_dual_t: empty dataset");
    require(anchor_quantile >= 0.0 && anchor_quantile < 1.0, ErrorKind::Validation,
            "estimate_dual_t: anchor quantile must lie in [0, 1)");

    std::vector<ClassIndex> pred(n);
    for (std::size_t i = 0; i < n; ++i) pred[i] = argmax(latest_probs.row(i));

    DualTEstimate est{Matrix(k, k), Matrix(k, k), {}, {}};
    std::vector<std::size_t> label_count(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
        est.t_club(pred[i], data.noisy_labels()[i]) += 1.0;
        ++label_count[data.noisy_labels()[i]];
    }
    est.t_club = row_normalize(std::move(est.t_club));

    std::vector<double> column(n);
    for (ClassIndex c = 0; c < k; ++c) {
        auto row = est.t_spade.row(c);
        if (label_count[c] == 0) {
            est.absent_classes.push_back(c);
            std::fill(row.begin(), row.end(), 1.0 / static_cast<double>(k));
            continue;
        }
        for (std::size_t i = 0; i < n; ++i) column[i] = latest_probs(i, c);
        std::vector<double> sorted(column);
        std::sort(sorted.begin(), sorted.end());
        const double cut = sorted[static_cast<std::size_t>(std::floor(anchor_quantile * static_cast<double>(n - 1)))];
        double anchors = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            if (column[i] >= cut) {
                row[pred[i]] += 1.0;
                anchors += 1.0;
            }
        for (double& v : row) v /= anchors;
    }

    Matrix product(k, k);
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t l = 0; l < k; ++l) {
            const double a = est.t_spade(i, l);
            if (a == 0.0) continue;
            for (std::size_t j = 0; j < k; ++j) product(i, j) += a * est.t_club(l, j);
        }
    est.t = TransitionMatrix(row_normalize(std::move(product)));
    return est;
}

NoiseKnowledge knowledge_from_transition(const TransitionMatrix& t, double threshold, std::size_t top_m) {
    require(threshold >= 0.0, ErrorKind::Validation, "knowledge_from_transition: threshold must be >= 0");
    require(top_m >= 1, ErrorKind::Validation, "knowledge_from_transition: top_m must be >= 1");
    const std::size_t k = t.num_classes();
    std::map<ClassIndex, ClassSet> sources;
    for (ClassIndex c = 0; c < k; ++c) {
        std::vector<ClassIndex> candidates;
        for (ClassIndex i = 0; i < k; ++i)
            if (i != c && t(i, c) > 0.0 && t(i, c) >= threshold) candidates.push_back(i);
        std::stable_sort(candidates.begin(), candidates.end(),
                         [&](ClassIndex a, ClassIndex b) { return t(a, c) > t(b, c); });
        candidates.resize(std::min(candidates.size(), top_m));
        if (!candidates.empty()) sources[c].insert(candidates.begin(), candidates.end());
    }
    return NoiseKnowledge(k, std::move(sources), KnowledgeOrigin::FromTransitionMatrix);
}

TransitionMatrix gt_transition(const NoisePlan& plan) {
    const CountMatrix counts = planned_label_counts(plan);
    const std::size_t k = counts.size();
    Matrix m(k, k);
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < k; ++j) m(i, j) = static_cast<double>(counts[i][j]);
    return TransitionMatrix(row_normalize(std::move(m)));
}

double max_abs_difference(const Matrix& a, const Matrix& b) {
    require(a.rows() == b.rows() && a.cols() == b.cols(), ErrorKind::Shape, "max_abs_difference: shape mismatch");
    double out = 0.0;
    for (std::size_t i = 0; i < a.data().size(); ++i) out = std::max(out, std::abs(a.data()[i] - b.data()[i]));
    return out;
}

}  // namespace noisesel
