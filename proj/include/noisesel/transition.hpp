#pragma once

#include <vector>

#include "noisesel/core.hpp"
#include "noisesel/synth.hpp"

namespace noisesel {

struct DualTEstimate {
    Matrix t_club;   // predicted class -> noisy label, counted
    Matrix t_spade;  // clean class -> predicted class, from anchor samples
    TransitionMatrix t;
    std::vector<ClassIndex> absent_classes;  // no noisy label of this class; t_spade row set uniform
};

/// Factorised transition estimate from a warm-trained model's predictions.
/// For class i the anchors are the samples whose probability of i is at or
/// above the `anchor_quantile` quantile of that column.
DualTEstimate estimate_dual_t(const DatasetView& data, const Matrix& latest_probs, double anchor_quantile = 0.97);

/// For each class c, the `top_m` classes i != c with the largest t(i, c) at or
/// above `threshold` become sources of c. Ties go to the smaller index.
NoiseKnowledge knowledge_from_transition(const TransitionMatrix& t, double threshold = 0.05, std::size_t top_m = 1);

/// Transition matrix implied exactly by the plan's label counts.
TransitionMatrix gt_transition(const NoisePlan& plan);

/// Largest absolute entry difference.
double max_abs_difference(const Matrix& a, const Matrix& b);

}  // namespace noisesel
