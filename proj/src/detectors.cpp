#include "noisesel/detectors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace noisesel {

std::string to_string(DetectorMethod method) {
    switch (method) {
        case DetectorMethod::Crust: return "crust";
        case DetectorMethod::Fine: return "fine";
        case DetectorMethod::Sft: return "sft";
        case DetectorMethod::Unicon: return "unicon";
        case DetectorMethod::Disc: return "disc";
    }
    return "unknown";
}

DetectorMethod detector_method_from_string(const std::string& name) {
    for (auto m : {DetectorMethod::Crust, DetectorMethod::Fine, DetectorMethod::Sft, DetectorMethod::Unicon,
                   DetectorMethod::Disc})
        if (to_string(m) == name) return m;
    fail(ErrorKind::Validation, "unknown detector method '" + name + "' (expected crust, fine, sft, unicon or disc)");
}

void DetectorConfig::validate() const {
    require(fl_ratio > 0.0 && fl_ratio <= 1.0, ErrorKind::Validation, "detector.fl_ratio must lie in (0, 1]");
    require(!crust_gamma || *crust_gamma >= 1, ErrorKind::Validation, "detector.crust_gamma must be >= 1");
    require(gmm_iters >= 1, ErrorKind::Validation, "detector.gmm_iters must be >= 1");
    require(gmm_tol > 0.0, ErrorKind::Validation, "detector.gmm_tol must be > 0");
    require(jsd_cutoff >= 0.0 && jsd_cutoff <= 1.0, ErrorKind::Validation, "detector.jsd_cutoff must lie in [0, 1]");
    require(dist_lambda >= 0.0 && dist_lambda < 1.0, ErrorKind::Validation, "detector.dist_lambda must lie in [0, 1)");
    require(sft_window >= 2, ErrorKind::Validation, "detector.sft_window must be >= 2");
}

DistState DistState::zeros(std::size_t n) { return {std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)}; }

namespace {

std::string class_tag(ClassIndex c) { return "class " + std::to_string(c) + ": "; }

double row_distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) {
        const double diff = a[j] - b[j];
        s += diff * diff;
    }
    return std::sqrt(s);
}

/// Gradients toward `target` for the given sample rows, one row each.
Matrix gradients_toward(const SoftmaxModel& model, const Matrix& features, std::span<const std::size_t> rows,
                        ClassIndex target, GradientLoss loss) {
    Matrix out(rows.size(), model.parameter_count());
    for (std::size_t t = 0; t < rows.size(); ++t) {
        Matrix g = per_sample_gradients(model, features.row(rows[t]), std::span<const ClassIndex>(&target, 1), loss);
        std::copy(g.row(0).begin(), g.row(0).end(), out.row(t).begin());
    }
    return out;
}

void check_labels_fit(const DatasetView& data, const NoiseKnowledge& knowledge) {
    require(knowledge.num_classes() == data.num_classes(), ErrorKind::Shape,
            "knowledge has " + std::to_string(knowledge.num_classes()) + " classes, data has " +
                std::to_string(data.num_classes()));
}

}  // namespace

// ---- numerical kernels ----

double jsd(std::span<const double> p, std::span<const double> q) {
    require(p.size() == q.size() && !p.empty(), ErrorKind::Shape, "jsd: distributions differ in length");
    double total = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double m = 0.5 * (p[i] + q[i]);
        const double a = p[i] > 0.0 ? p[i] * std::log2(p[i] / m) : 0.0;
        const double b = q[i] > 0.0 ? q[i] * std::log2(q[i] / m) : 0.0;
        total += 0.5 * (a + b);
    }
    return std::clamp(total, 0.0, 1.0);
}

EigenResult power_iteration(const Matrix& a, std::size_t max_iters, double tol) {
    const std::size_t d = a.rows();
    require(d >= 1 && a.cols() == d, ErrorKind::Shape, "power_iteration: matrix must be square");
    EigenResult out;
    std::vector<double> v(d), w(d);
    for (std::size_t j = 0; j < d; ++j) v[j] = 1.0 + 1e-3 * static_cast<double>(j);
    auto normalize = [](std::vector<double>& x) {
        double norm = 0.0;
        for (double e : x) norm += e * e;
        norm = std::sqrt(norm);
        if (norm > 0.0)
            for (double& e : x) e /= norm;
        return norm;
    };
    auto multiply = [&](const std::vector<double>& x, std::vector<double>& y) {
        for (std::size_t r = 0; r < d; ++r) {
            double s = 0.0;
            for (std::size_t c = 0; c < d; ++c) s += a(r, c) * x[c];
            y[r] = s;
        }
    };
    normalize(v);
    for (out.iterations = 0; out.iterations < max_iters; ++out.iterations) {
        multiply(v, w);
        if (normalize(w) == 0.0) break;  // v lies in the null space; A is zero here
        double diff = 0.0;
        for (std::size_t j = 0; j < d; ++j) diff = std::max(diff, std::abs(w[j] - v[j]));
        v.swap(w);
        if (diff < tol) {
            ++out.iterations;
            break;
        }
    }
    multiply(v, w);
    double value = 0.0;
    for (std::size_t j = 0; j < d; ++j) value += v[j] * w[j];
    double res = 0.0;
    for (std::size_t j = 0; j < d; ++j) res += (w[j] - value * v[j]) * (w[j] - value * v[j]);
    out.vector = std::move(v);
    out.value = value;
    out.residual = std::sqrt(res);
    return out;
}

namespace {

double log_normal(double x, double mean, double var) {
    constexpr double kLog2Pi = 1.8378770664093453;
    return -0.5 * (kLog2Pi + std::log(var) + (x - mean) * (x - mean) / var);
}

double quantile_sorted(const std::vector<double>& sorted, double q) {
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

constexpr double kVarFloor = 1e-8;
constexpr double kMinWeight = 1e-6;
constexpr double kMinRawVar = 1e-12;

}  // namespace

Gmm1D Gmm1D::fit(std::span<const double> values, std::size_t max_iters, double tol) {
    Gmm1D g;
    const std::size_t n = values.size();
    if (n < 2) {
        g.degenerate = true;
        return g;
    }
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    const double mu = std::accumulate(sorted.begin(), sorted.end(), 0.0) / static_cast<double>(n);
    double var = 0.0;
    for (double x : sorted) var += (x - mu) * (x - mu);
    var /= static_cast<double>(n);
    g.mean[0] = quantile_sorted(sorted, 0.25);
    g.mean[1] = quantile_sorted(sorted, 0.75);
    if (var < kMinRawVar || g.mean[0] == g.mean[1]) {
        g.degenerate = true;
        return g;
    }
    g.var[0] = g.var[1] = std::max(var, kVarFloor);

    std::vector<double> resp(n);  // responsibility of component 1
    double prev_ll = -std::numeric_limits<double>::infinity();
    for (g.iterations = 0; g.iterations < max_iters;) {
        double ll = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double l0 = std::log(g.weight[0]) + log_normal(values[i], g.mean[0], g.var[0]);
            const double l1 = std::log(g.weight[1]) + log_normal(values[i], g.mean[1], g.var[1]);
            const double top = std::max(l0, l1);
            const double lse = top + std::log(std::exp(l0 - top) + std::exp(l1 - top));
            resp[i] = std::exp(l1 - lse);
            ll += lse;
        }
        ll /= static_cast<double>(n);

        double n1 = 0.0, s1 = 0.0, s0 = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            n1 += resp[i];
            s1 += resp[i] * values[i];
            s0 += (1.0 - resp[i]) * values[i];
        }
        const double n0 = static_cast<double>(n) - n1;
        ++g.iterations;
        if (n0 / static_cast<double>(n) < kMinWeight || n1 / static_cast<double>(n) < kMinWeight) {
            g.degenerate = true;
            return g;
        }
        g.mean[0] = s0 / n0;
        g.mean[1] = s1 / n1;
        double v0 = 0.0, v1 = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            v0 += (1.0 - resp[i]) * (values[i] - g.mean[0]) * (values[i] - g.mean[0]);
            v1 += resp[i] * (values[i] - g.mean[1]) * (values[i] - g.mean[1]);
        }
        v0 /= n0;
        v1 /= n1;
        if (v0 < kMinRawVar || v1 < kMinRawVar) {
            g.degenerate = true;
            return g;
        }
        g.var[0] = std::max(v0, kVarFloor);
        g.var[1] = std::max(v1, kVarFloor);
        g.weight[0] = n0 / static_cast<double>(n);
        g.weight[1] = n1 / static_cast<double>(n);
        if (std::abs(ll - prev_ll) < tol) break;
        prev_ll = ll;
    }
    return g;
}

double Gmm1D::posterior_high(double x) const {
    const std::size_t hi = high_component(), lo = 1 - hi;
    const double lh = std::log(weight[hi]) + log_normal(x, mean[hi], var[hi]);
    const double ll = std::log(weight[lo]) + log_normal(x, mean[lo], var[lo]);
    return 1.0 / (1.0 + std::exp(ll - lh));
}

GmmSplit gmm_split(std::span<const double> values, std::size_t max_iters, double tol) {
    GmmSplit out;
    out.prob.resize(values.size());
    out.selected.resize(values.size());
    const Gmm1D g = Gmm1D::fit(values, max_iters, tol);
    if (g.degenerate) {
        out.fallback = true;
        if (values.empty()) return out;
        std::vector<double> sorted(values.begin(), values.end());
        std::sort(sorted.begin(), sorted.end());
        const std::size_t n = sorted.size();
        const double median = n % 2 == 1 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
        for (std::size_t i = 0; i < values.size(); ++i) {
            out.selected[i] = values[i] >= median;
            out.prob[i] = out.selected[i] ? 1.0 : 0.0;
        }
        return out;
    }
    for (std::size_t i = 0; i < values.size(); ++i) {
        out.prob[i] = g.posterior_high(values[i]);
        out.selected[i] = out.prob[i] > 0.5;
    }
    return out;
}

// ---- CRUST ----

std::vector<std::size_t> greedy_coreset(const Matrix& vectors, std::size_t size) {
    const std::size_t m = vectors.rows();
    size = std::min(size, m);
    if (size == 0) return {};
    Matrix dist(m, m);
    std::vector<double> total(m, 0.0);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = i + 1; j < m; ++j) {
            const double d = row_distance(vectors.row(i), vectors.row(j));
            dist(i, j) = dist(j, i) = d;
            total[i] += d;
            total[j] += d;
        }
    std::vector<std::size_t> picked;
    picked.reserve(size);
    std::vector<bool> chosen(m, false);
    const auto seed = static_cast<std::size_t>(std::min_element(total.begin(), total.end()) - total.begin());
    picked.push_back(seed);
    chosen[seed] = true;
    std::vector<double> incremental(dist.row(seed).begin(), dist.row(seed).end());
    while (picked.size() < size) {
        std::size_t best = m;
        for (std::size_t j = 0; j < m; ++j)
            if (!chosen[j] && (best == m || incremental[j] < incremental[best])) best = j;
        picked.push_back(best);
        chosen[best] = true;
        auto row = dist.row(best);
        for (std::size_t j = 0; j < m; ++j) incremental[j] += row[j];
    }
    return picked;
}

double coreset_cost(const Matrix& vectors, std::span<const std::size_t> subset) {
    double cost = 0.0;
    for (std::size_t a = 0; a < subset.size(); ++a)
        for (std::size_t b = a + 1; b < subset.size(); ++b)
            cost += row_distance(vectors.row(subset[a]), vectors.row(subset[b]));
    return cost;
}

std::size_t fraction_count(double fraction, std::size_t count) {
    const double x = fraction * static_cast<double>(count);
    return static_cast<std::size_t>(std::max(0.0, std::ceil(x - 1e-9)));
}

DetectionResult crust_select(const DatasetView& data, const SoftmaxModel& model, double fl_ratio,
                             const NoiseKnowledge& knowledge, std::optional<std::size_t> gamma, GradientLoss loss) {
    require(fl_ratio > 0.0 && fl_ratio <= 1.0, ErrorKind::Validation, "crust: fl_ratio must lie in (0, 1]");
    check_labels_fit(data, knowledge);
    const Matrix& x = data.features();
    const std::size_t k = data.num_classes();
    std::vector<double> prob(data.size(), 0.0);
    DetectionResult result;

    std::vector<std::vector<std::size_t>> members(k);
    for (ClassIndex c = 0; c < k; ++c) members[c] = data.members_of(c);

    for (ClassIndex c = 0; c < k; ++c) {
        const auto& rows = members[c];
        if (rows.empty()) continue;
        const ClassSet& sources = sources_of(knowledge, c);
        if (sources.empty()) {
            if (fl_ratio * static_cast<double>(rows.size()) < 1.0) {
                result.warnings.push_back(class_tag(c) + "fl_ratio * class size < 1, class left unfiltered");
                for (std::size_t i : rows) prob[i] = 1.0;
                continue;
            }
            const Matrix grads = gradients_toward(model, x, rows, c, loss);
            for (std::size_t t : greedy_coreset(grads, fraction_count(fl_ratio, rows.size()))) prob[rows[t]] = 1.0;
            continue;
        }
        // A class-c sample is clean unless it falls inside the clean core of
        // some source class, computed on the union with gradients toward it.
        for (std::size_t i : rows) prob[i] = 1.0;
        for (ClassIndex cns : sources) {
            const auto& src = members[cns];
            if (src.empty()) {
                result.warnings.push_back(class_tag(c) + "noise source " + std::to_string(cns) + " has no samples");
                continue;
            }
            std::vector<std::size_t> uni(rows);
            uni.insert(uni.end(), src.begin(), src.end());
            const std::size_t size =
                gamma.value_or(fraction_count(fl_ratio, src.size()) + fraction_count(1.0 - fl_ratio, rows.size()));
            const Matrix grads = gradients_toward(model, x, uni, cns, loss);
            for (std::size_t t : greedy_coreset(grads, size))
                if (t < rows.size()) prob[rows[t]] = 0.0;
        }
    }
    result.scores = CleanScores::from_probabilities(std::move(prob));
    return result;
}

// ---- FINE ----

double alignment(std::span<const double> x, std::span<const double> direction) {
    double dot = 0.0, norm = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
        dot += x[j] * direction[j];
        norm += x[j] * x[j];
    }
    require(norm > 0.0, ErrorKind::Validation, "fine: feature vector with zero norm");
    return dot / std::sqrt(norm);
}

std::vector<double> class_direction(const Matrix& features, std::span<const std::size_t> rows) {
    const std::size_t d = features.cols();
    Matrix gram(d, d);
    for (std::size_t i : rows) {
        auto f = features.row(i);
        for (std::size_t r = 0; r < d; ++r)
            for (std::size_t c = 0; c < d; ++c) gram(r, c) += f[r] * f[c];
    }
    std::vector<double> u = power_iteration(gram).vector;
    double mean = 0.0;
    for (std::size_t i : rows) mean += alignment(features.row(i), u);
    if (mean < 0.0)
        for (double& e : u) e = -e;
    return u;
}

DetectionResult fine_select(const DatasetView& data, const Matrix& features, std::size_t gmm_iters,
                            double gmm_tol, const NoiseKnowledge& knowledge) {
    require(features.rows() == data.size(), ErrorKind::Shape, "fine: feature rows != sample count");
    check_labels_fit(data, knowledge);
    const std::size_t k = data.num_classes();
    std::vector<std::vector<std::size_t>> members(k);
    std::vector<std::vector<double>> directions(k);
    for (ClassIndex c = 0; c < k; ++c) {
        members[c] = data.members_of(c);
        if (!members[c].empty()) directions[c] = class_direction(features, members[c]);
    }

    std::vector<double> prob(data.size(), 0.0);
    std::vector<bool> selected(data.size(), false);
    DetectionResult result;
    for (ClassIndex c = 0; c < k; ++c) {
        const auto& rows = members[c];
        if (rows.empty()) continue;
        if (rows.size() < 2) {
            result.warnings.push_back(class_tag(c) + "fewer than 2 samples, kept as clean");
            for (std::size_t i : rows) prob[i] = 1.0, selected[i] = true;
            continue;
        }
        std::vector<ClassIndex> sources;
        for (ClassIndex cn : sources_of(knowledge, c))
            if (!members[cn].empty()) sources.push_back(cn);
        std::vector<double> score(rows.size());
        for (std::size_t t = 0; t < rows.size(); ++t) {
            auto f = features.row(rows[t]);
            score[t] = alignment(f, directions[c]);
            if (!sources.empty()) {
                double best = -std::numeric_limits<double>::infinity();
                for (ClassIndex cn : sources) best = std::max(best, alignment(f, directions[cn]));
                score[t] -= best;
            }
        }
        const GmmSplit split = gmm_split(score, gmm_iters, gmm_tol);
        if (split.fallback) result.warnings.push_back(class_tag(c) + "GMM degenerate, median split used");
        for (std::size_t t = 0; t < rows.size(); ++t) {
            prob[rows[t]] = split.prob[t];
            selected[rows[t]] = split.selected[t];
        }
    }
    result.scores = CleanScores(std::move(prob), std::move(selected));
    return result;
}

// ---- SFT ----

bool fluctuation_event(std::span<const ClassIndex> history, ClassIndex label, const ClassSet* restrict_to) {
    bool seen_label = false;
    for (ClassIndex p : history) {
        if (seen_label && p != label && (restrict_to == nullptr || restrict_to->contains(p))) return true;
        if (p == label) seen_label = true;
    }
    return false;
}

DetectionResult sft_select(const DatasetView& data, const PredictionBank& bank, const NoiseKnowledge& knowledge) {
    require(bank.num_samples() == data.size(), ErrorKind::Shape, "sft: bank sample count != data size");
    check_labels_fit(data, knowledge);
    DetectionResult result;
    std::vector<double> prob(data.size(), 1.0);
    if (bank.recorded_epochs() < 2) {
        result.warnings.push_back("prediction bank holds fewer than 2 epochs, every sample kept");
    } else {
        for (std::size_t i = 0; i < data.size(); ++i) {
            const ClassIndex y = data.noisy_labels()[i];
            const ClassSet& sources = sources_of(knowledge, y);
            if (fluctuation_event(bank.history(i), y, sources.empty() ? nullptr : &sources)) prob[i] = 0.0;
        }
    }
    result.scores = CleanScores::from_probabilities(std::move(prob));
    return result;
}

// ---- UNICON ----

DetectionResult unicon_select(const DatasetView& data, const Matrix& latest_probs, JsdCutoffMode mode,
                              double fixed_cutoff, const NoiseKnowledge& knowledge) {
    const std::size_t n = data.size(), k = data.num_classes();
    require(latest_probs.rows() == n && latest_probs.cols() == k, ErrorKind::Shape,
            "unicon: probability matrix must be n x k");
    check_labels_fit(data, knowledge);
    std::vector<double> onehot(k, 0.0);
    auto jsd_to = [&](std::size_t i, ClassIndex c) {
        onehot[c] = 1.0;
        const double d = jsd(onehot, latest_probs.row(i));
        onehot[c] = 0.0;
        return d;
    };

    std::vector<double> div(n);
    for (std::size_t i = 0; i < n; ++i) div[i] = jsd_to(i, data.noisy_labels()[i]);

    std::vector<double> prob(n, 0.0);
    for (ClassIndex c = 0; c < k; ++c) {
        const auto rows = data.members_of(c);
        if (rows.empty()) continue;
        double cutoff = fixed_cutoff;
        bool flat = false;
        if (mode == JsdCutoffMode::ClassMean) {
            cutoff = 0.0;
            for (std::size_t i : rows) cutoff += div[i];
            cutoff /= static_cast<double>(rows.size());
            flat = std::all_of(rows.begin(), rows.end(), [&](std::size_t i) { return div[i] == div[rows[0]]; });
        }
        for (std::size_t i : rows)
            if ((div[i] < cutoff || flat) && div[i] < 1.0) prob[i] = 1.0 - div[i];
    }

    DetectionResult result;
    if (knowledge.is_empty()) {
        result.scores = CleanScores::from_probabilities(std::move(prob));
        return result;
    }
    // Comparable per-class scores: 1 - JSD to each class's one-hot.
    Matrix per_class(n, k);
    for (std::size_t i = 0; i < n; ++i) {
        const ClassIndex y = data.noisy_labels()[i];
        per_class(i, y) = prob[i];
        for (ClassIndex cn : sources_of(knowledge, y)) per_class(i, cn) = 1.0 - jsd_to(i, cn);
    }
    result.scores = integrate_knowledge(per_class, data.noisy_labels(), knowledge);
    return result;
}

// ---- DISC ----

DiscOutput disc_select(const DatasetView& data, const AugmentedConfidences& conf, const DistState& state,
                       double lambda, const NoiseKnowledge& knowledge) {
    const std::size_t n = data.size(), k = data.num_classes();
    require(lambda >= 0.0 && lambda < 1.0, ErrorKind::Validation, "disc: lambda must lie in [0, 1)");
    require(conf.weak.rows() == n && conf.weak.cols() == k && conf.strong.rows() == n && conf.strong.cols() == k,
            ErrorKind::Shape, "disc: confidence matrices must be n x k");
    require(state.tau_weak.size() == n && state.tau_strong.size() == n, ErrorKind::Shape,
            "disc: threshold state must hold one entry per sample");
    check_labels_fit(data, knowledge);

    DiscOutput out{{}, state};
    std::vector<double> prob(n, 0.0);
    std::vector<bool> selected(n, false);
    auto view_max = [&](std::span<const double> row, ClassIndex y, const ClassSet& sources) {
        if (sources.empty()) return *std::max_element(row.begin(), row.end());
        double m = row[y];
        for (ClassIndex c : sources) m = std::max(m, row[c]);
        return m;
    };
    for (std::size_t i = 0; i < n; ++i) {
        const ClassIndex y = data.noisy_labels()[i];
        const ClassSet& sources = sources_of(knowledge, y);
        auto w = conf.weak.row(i);
        auto s = conf.strong.row(i);
        double& tw = out.state.tau_weak[i];
        double& ts = out.state.tau_strong[i];
        tw = lambda * tw + (1.0 - lambda) * view_max(w, y, sources);
        ts = lambda * ts + (1.0 - lambda) * view_max(s, y, sources);
        if (w[y] > tw && s[y] > ts) {
            selected[i] = true;
            prob[i] = std::min(w[y], s[y]);
        }
    }
    out.result.scores = CleanScores(std::move(prob), std::move(selected));
    return out;
}

// ---- dispatch ----

DetectionResult run_detector(const DetectorConfig& cfg, const DatasetView& data, const ModelArtifacts& artifacts,
                             const NoiseKnowledge& knowledge) {
    cfg.validate();
    const NoiseKnowledge none = NoiseKnowledge::empty(data.num_classes());
    const NoiseKnowledge& kn = cfg.knowledge_enabled ? knowledge : none;
    std::vector<std::string> extra;
    if (cfg.knowledge_enabled && knowledge.is_empty())
        extra.push_back("knowledge enabled but empty, result equals the base method");
    auto need = [&](const void* p, const char* artifact) {
        require(p != nullptr, ErrorKind::Validation,
                "detector " + to_string(cfg.method) + " requires the '" + artifact + "' artifact");
    };

    DetectionResult result;
    switch (cfg.method) {
        case DetectorMethod::Crust:
            need(artifacts.model, "model");
            result = crust_select(data, *artifacts.model, cfg.fl_ratio, kn, cfg.crust_gamma, cfg.crust_loss);
            break;
        case DetectorMethod::Fine:
            need(artifacts.features, "features");
            result = fine_select(data, *artifacts.features, cfg.gmm_iters, cfg.gmm_tol, kn);
            break;
        case DetectorMethod::Sft:
            need(artifacts.bank, "bank");
            result = sft_select(data, *artifacts.bank, kn);
            break;
        case DetectorMethod::Unicon:
            need(artifacts.bank, "bank");
            require(artifacts.bank->recorded_epochs() > 0, ErrorKind::Validation,
                    "detector unicon requires at least one recorded epoch in the 'bank' artifact");
            result = unicon_select(data, artifacts.bank->latest_probs(), cfg.jsd_cutoff_mode, cfg.jsd_cutoff, kn);
            break;
        case DetectorMethod::Disc: {
            need(artifacts.confidences, "confidences");
            need(artifacts.dist_state, "dist_state");
            if (artifacts.dist_state->size() == 0) *artifacts.dist_state = DistState::zeros(data.size());
            DiscOutput out = disc_select(data, *artifacts.confidences, *artifacts.dist_state, cfg.dist_lambda, kn);
            *artifacts.dist_state = std::move(out.state);
            result = std::move(out.result);
            break;
        }
    }
    result.warnings.insert(result.warnings.begin(), extra.begin(), extra.end());
    return result;
}

}  // namespace noisesel
