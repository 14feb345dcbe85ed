#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "noisesel/core.hpp"
#include "noisesel/model.hpp"
#include "noisesel/synth.hpp"

namespace noisesel {

struct ClassSelection {
    ClassIndex label = 0;
    std::size_t selected = 0;
    std::size_t clean = 0;
    std::size_t selected_clean = 0;
    double precision = 0.0;
    double recall = 0.0;
};

struct SelectionReport {
    double precision = 0.0;
    double recall = 0.0;
    std::size_t selected_count = 0;
    std::size_t clean_count = 0;
    std::size_t selected_clean = 0;
    bool empty_selection = false;  // precision reported as 0
    std::vector<ClassSelection> per_class;  // grouped by noisy label
};

/// Precision/recall of `scores.selected` against clean = (noisy == true).
SelectionReport selection_metrics(const CleanScores& scores, const LabeledDataset& ds);

struct ConfusionReport {
    CountMatrix counts;                // [true][predicted]
    Matrix percent;                    // rows sum to 100
    std::vector<ClassIndex> empty_rows;  // classes absent from the test set
};

ConfusionReport confusion_from_predictions(std::span<const ClassIndex> truth, std::span<const ClassIndex> pred,
                                           std::size_t num_classes);
ConfusionReport confusion_matrix(const SoftmaxModel& model, const LabeledDataset& test);

/// Top-1 accuracy against true labels.
double accuracy(const SoftmaxModel& model, const LabeledDataset& test);

struct AbsorptionReport {
    double acc_base = 0.0;
    double acc_plus_k = 0.0;
    double absorption = 0.0;
    std::string detector;
    std::string noise_plan;
    std::uint64_t seed = 0;
};

AbsorptionReport absorption(double acc_base, double acc_plus_k, std::string detector = {},
                            std::string noise_plan = {}, std::uint64_t seed = 0);

/// Mean and sample (n - 1) standard deviation; sd is 0 for a single value.
struct Summary {
    double mean = 0.0;
    double sd = 0.0;
    std::size_t count = 0;
};
Summary summarize(std::span<const double> values);

std::string selection_report_json(const SelectionReport& r);
std::string selection_report_text(const SelectionReport& r);
std::string confusion_csv(const ConfusionReport& r);
std::string confusion_text(const ConfusionReport& r);
std::string absorption_json(const AbsorptionReport& r);

/// Left-aligned first column, right-aligned remaining columns.
std::string render_table(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows);
std::string fixed(double v, int digits = 4);

}  // namespace noisesel
