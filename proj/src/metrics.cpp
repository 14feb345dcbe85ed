#include "noisesel/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "json.hpp"

namespace noisesel {

namespace {

double ratio(std::size_t num, std::size_t den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

SelectionReport selection_metrics(const CleanScores& scores, const LabeledDataset& ds) {
    require(scores.size() == ds.size(), ErrorKind::Shape, "selection_metrics: score count != dataset size");
    const auto& truth = ds.true_labels();
    const auto& noisy = ds.noisy_labels();
    SelectionReport r;
    r.per_class.resize(ds.num_classes());
    for (ClassIndex c = 0; c < ds.num_classes(); ++c) r.per_class[c].label = c;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const bool clean = noisy[i] == truth[i];
        const bool sel = scores.selected()[i];
        auto& pc = r.per_class[noisy[i]];
        pc.selected += sel;
        pc.clean += clean;
        pc.selected_clean += sel && clean;
    }
    for (auto& pc : r.per_class) {
        pc.precision = ratio(pc.selected_clean, pc.selected);
        pc.recall = ratio(pc.selected_clean, pc.clean);
        r.selected_count += pc.selected;
        r.clean_count += pc.clean;
        r.selected_clean += pc.selected_clean;
    }
    r.empty_selection = r.selected_count == 0;
    r.precision = ratio(r.selected_clean, r.selected_count);
    r.recall = ratio(r.selected_clean, r.clean_count);
    return r;
}

ConfusionReport confusion_from_predictions(std::span<const ClassIndex> truth, std::span<const ClassIndex> pred,
                                           std::size_t num_classes) {
    require(truth.size() == pred.size(), ErrorKind::Shape, "confusion: prediction count != label count");
    ConfusionReport r{CountMatrix(num_classes, std::vector<std::size_t>(num_classes, 0)),
                      Matrix(num_classes, num_classes), {}};
    for (std::size_t i = 0; i < truth.size(); ++i) {
        require(truth[i] < num_classes && pred[i] < num_classes, ErrorKind::Index, "confusion: class out of range");
        ++r.counts[truth[i]][pred[i]];
    }
    for (ClassIndex c = 0; c < num_classes; ++c) {
        const std::size_t total = std::accumulate(r.counts[c].begin(), r.counts[c].end(), std::size_t{0});
        if (total == 0) {
            r.empty_rows.push_back(c);
            continue;
        }
        for (std::size_t j = 0; j < num_classes; ++j) r.percent(c, j) = 100.0 * ratio(r.counts[c][j], total);
    }
    return r;
}

ConfusionReport confusion_matrix(const SoftmaxModel& model, const LabeledDataset& test) {
    const auto pred = model.predict_labels(test.features());
    return confusion_from_predictions(test.true_labels(), pred, test.num_classes());
}

double accuracy(const SoftmaxModel& model, const LabeledDataset& test) {
    const auto pred = model.predict_labels(test.features());
    const auto& truth = test.true_labels();
    std::size_t hits = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == truth[i];
    return ratio(hits, pred.size());
}

AbsorptionReport absorption(double acc_base, double acc_plus_k, std::string detector, std::string noise_plan,
                            std::uint64_t seed) {
    require(acc_base >= 0.0 && acc_base <= 1.0 && acc_plus_k >= 0.0 && acc_plus_k <= 1.0, ErrorKind::Validation,
            "absorption: accuracies must lie in [0, 1]");
    return {acc_base, acc_plus_k, acc_plus_k - acc_base, std::move(detector), std::move(noise_plan), seed};
}

Summary summarize(std::span<const double> values) {
    Summary s;
    s.count = values.size();
    if (values.empty()) return s;
    s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
    if (values.size() > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - s.mean) * (v - s.mean);
        s.sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
    }
    return s;
}

std::string selection_report_json(const SelectionReport& r) {
    nlohmann::ordered_json per_class = nlohmann::ordered_json::array();
    for (const auto& pc : r.per_class)
        per_class.push_back({{"label", pc.label},
                             {"selected", pc.selected},
                             {"clean", pc.clean},
                             {"selected_clean", pc.selected_clean},
                             {"precision", pc.precision},
                             {"recall", pc.recall}});
    nlohmann::ordered_json doc = {{"precision", r.precision},
                                  {"recall", r.recall},
                                  {"selected_count", r.selected_count},
                                  {"clean_count", r.clean_count},
                                  {"selected_clean", r.selected_clean},
                                  {"empty_selection", r.empty_selection},
                                  {"per_class", per_class}};
    return doc.dump(2) + "\n";
}

std::string fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::string render_table(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows) {
    std::vector<std::size_t> width(header.size(), 0);
    for (std::size_t j = 0; j < header.size(); ++j) width[j] = header[j].size();
    for (const auto& row : rows)
        for (std::size_t j = 0; j < row.size() && j < width.size(); ++j) width[j] = std::max(width[j], row[j].size());
    std::ostringstream out;
    auto emit = [&](const std::vector<std::string>& row) {
        for (std::size_t j = 0; j < width.size(); ++j) {
            const std::string cell = j < row.size() ? row[j] : "";
            const std::string pad(width[j] - cell.size(), ' ');
            if (j > 0) out << "  ";
            out << (j == 0 ? cell + pad : pad + cell);
        }
        out << '\n';
    };
    emit(header);
    std::size_t total = 0;
    for (std::size_t w : width) total += w;
    out << std::string(total + 2 * (width.size() - 1), '-') << '\n';
    for (const auto& row : rows) emit(row);
    return out.str();
}

std::string selection_report_text(const SelectionReport& r) {
    std::vector<std::vector<std::string>> rows;
    for (const auto& pc : r.per_class)
        rows.push_back({std::to_string(pc.label), std::to_string(pc.selected), std::to_string(pc.clean),
                        std::to_string(pc.selected_clean), fixed(pc.precision), fixed(pc.recall)});
    rows.push_back({"all", std::to_string(r.selected_count), std::to_string(r.clean_count),
                    std::to_string(r.selected_clean), fixed(r.precision), fixed(r.recall)});
    std::string out = render_table({"label", "selected", "clean", "sel&clean", "precision", "recall"}, rows);
    if (r.empty_selection) out += "note: nothing selected, precision reported as 0\n";
    return out;
}

std::string confusion_csv(const ConfusionReport& r) {
    std::ostringstream out;
    out << "true_class";
    for (std::size_t j = 0; j < r.counts.size(); ++j) out << ",pred_" << j;
    out << '\n';
    for (std::size_t i = 0; i < r.counts.size(); ++i) {
        out << i;
        for (std::size_t v : r.counts[i]) out << ',' << v;
        out << '\n';
    }
    return out.str();
}

std::string confusion_text(const ConfusionReport& r) {
    std::vector<std::string> header = {"true\\pred"};
    for (std::size_t j = 0; j < r.counts.size(); ++j) header.push_back(std::to_string(j));
    std::vector<std::vector<std::string>> rows;
    for (std::size_t i = 0; i < r.counts.size(); ++i) {
        std::vector<std::string> row = {std::to_string(i)};
        for (std::size_t j = 0; j < r.counts.size(); ++j) row.push_back(fixed(r.percent(i, j), 1));
        rows.push_back(std::move(row));
    }
    std::string out = render_table(header, rows);
    for (ClassIndex c : r.empty_rows) out += "note: class " + std::to_string(c) + " has no test samples\n";
    return out;
}

std::string absorption_json(const AbsorptionReport& r) {
    nlohmann::ordered_json doc = {{"detector", r.detector},   {"noise_plan", r.noise_plan}, {"seed", r.seed},
                                  {"acc_base", r.acc_base},   {"acc_plus_k", r.acc_plus_k},
                                  {"absorption", r.absorption}};
    return doc.dump(2) + "\n";
}

}  // namespace noisesel
