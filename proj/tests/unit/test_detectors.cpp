#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "noisesel/detectors.hpp"
#include "noisesel/rng.hpp"
#include "noisesel/synth.hpp"

using namespace noisesel;

namespace {

ErrorKind kind_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("expected an error");
    return ErrorKind::Validation;
}

std::vector<double> random_distribution(Rng& rng, std::size_t k) {
    std::vector<double> p(k);
    double s = 0.0;
    for (double& v : p) {
        v = rng.uniform() < 0.2 ? 0.0 : rng.uniform();
        s += v;
    }
    if (s == 0.0) p[0] = s = 1.0;
    for (double& v : p) v /= s;
    return p;
}

double euclid(const Matrix& m, std::size_t a, std::size_t b) {
    double s = 0.0;
    for (std::size_t j = 0; j < m.cols(); ++j) s += (m(a, j) - m(b, j)) * (m(a, j) - m(b, j));
    return std::sqrt(s);
}

/// Exhaustive minimum of the pairwise distance sum over subsets of `size`.
std::vector<std::size_t> brute_force_core(const Matrix& v, std::size_t size) {
    const std::size_t n = v.rows();
    double best = std::numeric_limits<double>::infinity();
    std::vector<std::size_t> best_set;
    for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
        if (static_cast<std::size_t>(std::popcount(mask)) != size) continue;
        std::vector<std::size_t> s;
        for (std::size_t i = 0; i < n; ++i)
            if (mask >> i & 1u) s.push_back(i);
        double cost = 0.0;
        for (std::size_t a = 0; a < s.size(); ++a)
            for (std::size_t b = a + 1; b < s.size(); ++b) cost += euclid(v, s[a], s[b]);
        if (cost < best) best = cost, best_set = s;
    }
    return best_set;
}

struct Noisy {
    LabeledDataset ds;
    NoiseKnowledge knowledge;
};

Noisy small_dominant(std::uint64_t seed, double ratio = 0.6) {
    ClusterSpec spec;
    spec.num_classes = 4;
    spec.dim = 6;
    spec.samples_per_class = 60;
    spec.seed = seed;
    auto c = apply_noise(generate_clusters(spec), dominant_plan(4, 60, ratio), seed);
    return {c.dataset, c.knowledge};
}

SoftmaxModel warm(const LabeledDataset& ds, std::uint64_t seed, std::size_t epochs = 3) {
    SoftmaxModel m(ds.num_classes(), ds.dim());
    std::vector<double> ones(ds.size(), 1.0);
    for (std::size_t e = 0; e < epochs; ++e) train_epoch(m, ds.view(), ones, seed + e);
    return m;
}

bool subset_of(const std::vector<bool>& a, const std::vector<bool>& b) {
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i] && !b[i]) return false;
    return true;
}

}  // namespace

// ---- kernels ----

TEST_CASE("jsd properties") {
    Rng rng(1);
    for (int t = 0; t < 1000; ++t) {
        const std::size_t k = 2 + rng.below(6);
        auto p = random_distribution(rng, k), q = random_distribution(rng, k);
        const double d = jsd(p, q);
        CHECK(d == jsd(q, p));
        CHECK(d >= 0.0);
        CHECK(d <= 1.0);
        CHECK(jsd(p, p) == 0.0);
        if (p != q) CHECK(d > 0.0);
    }
    std::vector<double> onehot = {1.0, 0.0}, uniform = {0.5, 0.5};
    // closed form: 0.5 log2(4/3) + 0.25 log2(2/3) + 0.25 log2(2)
    const double expected = 0.5 * std::log2(4.0 / 3.0) + 0.25 * std::log2(2.0 / 3.0) + 0.25;
    CHECK(jsd(onehot, uniform) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(std::abs(jsd(onehot, uniform) - 0.3113) <= 1e-4);
    std::vector<double> a = {1.0, 0.0}, b = {0.0, 1.0};
    CHECK(jsd(a, b) == doctest::Approx(1.0));
    CHECK(kind_of([&] { jsd(a, std::vector<double>{1.0}); }) == ErrorKind::Shape);
}

TEST_CASE("power iteration matches a dense eigensolver") {
    Rng rng(7);
    for (int t = 0; t < 20; ++t) {
        const std::size_t d = 2 + rng.below(8);
        Matrix a(d, d);
        Eigen::MatrixXd e(d, d);
        Eigen::MatrixXd b = Eigen::MatrixXd::Zero(d, d);
        for (int s = 0; s < 30; ++s) {
            Eigen::VectorXd x(d);
            for (std::size_t j = 0; j < d; ++j) x(j) = rng.normal() + (j == 0 ? 2.0 : 0.0);
            b += x * x.transpose();
        }
        for (std::size_t r = 0; r < d; ++r)
            for (std::size_t c = 0; c < d; ++c) a(r, c) = b(r, c);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(b);
        const Eigen::VectorXd top = solver.eigenvectors().col(d - 1);
        auto res = power_iteration(a);
        double norm = 0.0, dot = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            norm += res.vector[j] * res.vector[j];
            dot += res.vector[j] * top(j);
        }
        CHECK(std::sqrt(norm) == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(std::abs(dot) == doctest::Approx(1.0).epsilon(1e-6));
        CHECK(res.value == doctest::Approx(solver.eigenvalues()(d - 1)).epsilon(1e-9));
        CHECK(res.residual <= 1e-6);
    }
}

TEST_CASE("gmm separates a bimodal alignment mix at the Bayes boundary") {
    Rng rng(3);
    std::vector<double> values;
    for (int i = 0; i < 100; ++i) values.push_back(0.9 + 0.05 * rng.normal());
    for (int i = 0; i < 100; ++i) values.push_back(0.3 + 0.05 * rng.normal());
    auto split = gmm_split(values, 100, 1e-6);
    CHECK_FALSE(split.fallback);
    std::size_t agree = 0;
    for (std::size_t i = 0; i < values.size(); ++i) agree += split.selected[i] == (values[i] > 0.6);
    CHECK(agree >= 198);

    auto g = Gmm1D::fit(values);
    CHECK(g.mean[g.high_component()] == doctest::Approx(0.9).epsilon(0.02));
    CHECK(g.weight[0] + g.weight[1] == doctest::Approx(1.0));
}

TEST_CASE("gmm degeneracy falls back to a median split") {
    std::vector<double> flat(10, 0.7);
    auto split = gmm_split(flat, 100, 1e-6);
    CHECK(split.fallback);
    CHECK(std::all_of(split.selected.begin(), split.selected.end(), [](bool b) { return b; }));

    std::vector<double> two_values = {0.1, 0.1, 0.1, 0.9, 0.9, 0.9};
    auto s2 = gmm_split(two_values, 100, 1e-6);
    CHECK(s2.fallback);
    CHECK(s2.selected == std::vector<bool>{false, false, false, true, true, true});
}

TEST_CASE("greedy coreset equals the brute-force optimum on planted clusters") {
    Rng rng(17);
    for (int t = 0; t < 30; ++t) {
        const std::size_t n = 6 + rng.below(7), size = 2 + rng.below(n - 3);
        // tight cluster at the origin, outliers on separate axes
        Matrix v(n, n);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) v(i, j) = 0.01 * rng.normal();
            if (i >= size) v(i, i) += 10.0;
        }
        const auto perm = rng.sample_without_replacement(n, n);
        Matrix shuffled(n, n);
        for (std::size_t i = 0; i < n; ++i) std::copy(v.row(perm[i]).begin(), v.row(perm[i]).end(), shuffled.row(i).begin());
        v = shuffled;
        auto greedy = greedy_coreset(v, size);
        std::sort(greedy.begin(), greedy.end());
        CHECK(greedy == brute_force_core(v, size));
    }
    Matrix v(3, 1);
    CHECK(greedy_coreset(v, 0).empty());
    CHECK(greedy_coreset(v, 10).size() == 3);
    std::vector<std::size_t> all = {0, 1, 2};
    v(1, 0) = 1.0;
    v(2, 0) = 3.0;
    CHECK(coreset_cost(v, all) == doctest::Approx(1.0 + 3.0 + 2.0));
}

TEST_CASE("fraction count") {
    CHECK(fraction_count(0.9, 10) == 9);
    CHECK(fraction_count(0.9, 11) == 10);
    CHECK(fraction_count(1.0, 7) == 7);
    CHECK(fraction_count(0.1, 5) == 1);
}

// ---- CRUST ----

TEST_CASE("crust base selection sizes and trivial cases") {
    auto n = small_dominant(1);
    auto m = warm(n.ds, 1);
    const auto none = NoiseKnowledge::empty(4);
    auto full = crust_select(n.ds.view(), m, 1.0, none);
    CHECK(full.scores.selected_count() == n.ds.size());

    auto part = crust_select(n.ds.view(), m, 0.5, none);
    auto view = n.ds.view();
    for (ClassIndex c = 0; c < 4; ++c) {
        std::size_t picked = 0;
        for (std::size_t i : view.members_of(c)) picked += part.scores.selected()[i];
        CHECK(picked == fraction_count(0.5, view.members_of(c).size()));
    }
    for (double p : part.scores.prob_clean()) CHECK((p == 0.0 || p == 1.0));
}

TEST_CASE("crust+k can only remove and grows stricter with more sources") {
    auto n = small_dominant(2);
    auto m = warm(n.ds, 2);
    auto view = n.ds.view();
    auto base = crust_select(view, m, 1.0, NoiseKnowledge::empty(4));
    auto plus = crust_select(view, m, 1.0, n.knowledge);
    CHECK(subset_of(plus.scores.selected(), base.scores.selected()));
    CHECK(plus.scores.selected_count() < base.scores.selected_count());

    NoiseKnowledge one(4, {{2, {0}}}, KnowledgeOrigin::GroundTruth);
    NoiseKnowledge two(4, {{2, {0, 1}}}, KnowledgeOrigin::GroundTruth);
    auto s1 = crust_select(view, m, 0.8, one);
    auto s2 = crust_select(view, m, 0.8, two);
    CHECK(subset_of(s2.scores.selected(), s1.scores.selected()));
    CHECK(crust_select(view, m, 0.8, NoiseKnowledge::empty(4)).scores ==
          crust_select(view, m, 0.8, NoiseKnowledge::empty(4)).scores);
}

TEST_CASE("crust leaves tiny classes unfiltered with a warning") {
    Matrix x(4, 2);
    x(0, 0) = 1;
    x(1, 1) = 1;
    x(2, 0) = 2;
    x(3, 1) = 2;
    LabeledDataset ds(x, {0, 0, 0, 1}, std::nullopt, 2);
    SoftmaxModel m(2, 2);
    auto r = crust_select(ds.view(), m, 0.5, NoiseKnowledge::empty(2));
    CHECK(r.scores.selected()[3]);
    CHECK(r.warnings.size() == 1);
}

// ---- FINE ----

TEST_CASE("fine rank-one class keeps every member") {
    Matrix f(6, 3);
    for (std::size_t i = 0; i < 3; ++i) f(i, 0) = 1.0, f(i, 1) = 2.0;
    for (std::size_t i = 3; i < 6; ++i) f(i, 2) = 1.0 + static_cast<double>(i);
    LabeledDataset ds(f, {0, 0, 0, 1, 1, 1}, std::nullopt, 2);
    auto r = fine_select(ds.view(), f, 100, 1e-6, NoiseKnowledge::empty(2));
    CHECK(r.scores.selected_count() == 6);
    auto u = class_direction(f, std::vector<std::size_t>{0, 1, 2});
    CHECK(u[0] == doctest::Approx(1.0 / std::sqrt(5.0)));
    CHECK(u[1] == doctest::Approx(2.0 / std::sqrt(5.0)));
    CHECK(alignment(f.row(0), u) == doctest::Approx(1.0));
}

TEST_CASE("fine+k keeps hard cats and drops dogs labeled cat") {
    // Class 0 ("cat") lies along e1, class 1 ("dog") along e2. Label 0 also
    // carries dog images near e2, plus odd cats with cos about 0.4 to e1 and 0.1 to e2.
    Rng rng(5);
    std::vector<std::vector<double>> rows;
    std::vector<ClassIndex> labels;
    auto add = [&](double a, double b, ClassIndex y) {
        const double c = std::sqrt(std::max(0.0, 1.0 - a * a - b * b));
        rows.push_back({a, b, c});
        labels.push_back(y);
    };
    for (int i = 0; i < 40; ++i) add(0.92 + 0.04 * rng.normal(), 0.05 * rng.uniform(), 0);
    for (int i = 0; i < 20; ++i) add(0.05 * rng.uniform(), 0.92 + 0.04 * rng.normal(), 0);
    const std::size_t hard = rows.size();
    for (int i = 0; i < 10; ++i) add(0.4 + 0.03 * rng.normal(), 0.1 + 0.01 * rng.normal(), 0);
    for (int i = 0; i < 60; ++i) add(0.05 * rng.uniform(), 0.92 + 0.04 * rng.normal(), 1);
    Matrix f(rows.size(), 3);
    for (std::size_t i = 0; i < rows.size(); ++i) std::copy(rows[i].begin(), rows[i].end(), f.row(i).begin());
    LabeledDataset ds(f, labels, std::nullopt, 2);

    auto base = fine_select(ds.view(), f, 100, 1e-6, NoiseKnowledge::empty(2));
    auto plus = fine_select(ds.view(), f, 100, 1e-6, NoiseKnowledge(2, {{0, {1}}}, KnowledgeOrigin::GroundTruth));
    std::size_t base_noisy = 0;
    for (std::size_t i = 40; i < 60; ++i) base_noisy += base.scores.selected()[i];
    for (std::size_t i = hard; i < hard + 10; ++i) CHECK(plus.scores.selected()[i]);
    CHECK(plus.scores.selected_count() >= base.scores.selected_count() - base_noisy);
    for (std::size_t i = 40; i < 60; ++i) CHECK_FALSE(plus.scores.selected()[i]);
    for (std::size_t i = 0; i < 40; ++i) CHECK(plus.scores.selected()[i]);
}

TEST_CASE("fine rejects zero-norm features and keeps singleton classes") {
    Matrix f(3, 2, 1.0);
    f(2, 0) = f(2, 1) = 0.0;
    LabeledDataset ds(f, {0, 0, 1}, std::nullopt, 2);
    CHECK(kind_of([&] { fine_select(ds.view(), f, 100, 1e-6, NoiseKnowledge::empty(2)); }) == ErrorKind::Validation);
    f(2, 0) = 1.0;
    auto r = fine_select(ds.view(), f, 100, 1e-6, NoiseKnowledge::empty(2));
    CHECK(r.scores.selected()[2]);
    CHECK_FALSE(r.warnings.empty());
}

// ---- SFT ----

TEST_CASE("fluctuation events") {
    const std::vector<ClassIndex> flip = {1, 1, 2}, never = {2, 2, 2}, late = {2, 1, 1}, back = {1, 0, 1};
    CHECK(fluctuation_event(flip, 1));
    CHECK_FALSE(fluctuation_event(never, 1));
    CHECK_FALSE(fluctuation_event(late, 1));
    CHECK(fluctuation_event(back, 1));
    const ClassSet only2 = {2}, only0 = {0};
    CHECK(fluctuation_event(flip, 1, &only2));
    CHECK_FALSE(fluctuation_event(back, 1, &only2));
    CHECK(fluctuation_event(back, 1, &only0));
}

TEST_CASE("sft selection with and without knowledge") {
    Matrix x(3, 1, 1.0);
    LabeledDataset ds(x, {1, 1, 1}, std::nullopt, 3);
    PredictionBank bank(3, 3);
    auto push = [&](ClassIndex a, ClassIndex b, ClassIndex c) {
        Matrix p(3, 3, 0.0);
        p(0, a) = p(1, b) = p(2, c) = 1.0;
        bank.push(p);
    };
    auto none = NoiseKnowledge::empty(3);
    push(1, 2, 1);
    auto early = sft_select(ds.view(), bank, none);
    CHECK(early.scores.selected_count() == 3);
    CHECK_FALSE(early.warnings.empty());
    push(2, 2, 0);
    push(2, 2, 1);
    auto base = sft_select(ds.view(), bank, none);
    CHECK(base.scores.selected() == std::vector<bool>{false, true, false});
    auto plus = sft_select(ds.view(), bank, NoiseKnowledge(3, {{1, {2}}}, KnowledgeOrigin::GroundTruth));
    CHECK(plus.scores.selected() == std::vector<bool>{false, true, true});
}

// ---- UNICON ----

TEST_CASE("unicon class-mean cutoff") {
    Matrix x(4, 1, 1.0);
    LabeledDataset ds(x, {0, 0, 0, 1}, std::nullopt, 2);
    Matrix p(4, 2);
    const double conf[] = {0.9, 0.6, 0.2, 0.8};
    for (std::size_t i = 0; i < 4; ++i) {
        const ClassIndex y = ds.noisy_labels()[i];
        p(i, y) = conf[i];
        p(i, 1 - y) = 1.0 - conf[i];
    }
    auto r = unicon_select(ds.view(), p, JsdCutoffMode::ClassMean, 0.5, NoiseKnowledge::empty(2));
    CHECK(r.scores.selected() == std::vector<bool>{true, true, false, true});  // singleton class is flat
    std::vector<double> onehot = {1.0, 0.0}, row = {0.9, 0.1};
    CHECK(r.scores.prob_clean()[0] == doctest::Approx(1.0 - jsd(onehot, row)));

    auto fixed = unicon_select(ds.view(), p, JsdCutoffMode::Fixed, 0.1, NoiseKnowledge::empty(2));
    CHECK(fixed.scores.selected() == std::vector<bool>{true, false, false, false});
}

TEST_CASE("unicon+k drops samples closer to a noise source") {
    Matrix x(3, 1, 1.0);
    LabeledDataset ds(x, {0, 0, 0}, std::nullopt, 3);
    Matrix p(3, 3);
    const double rows[3][3] = {{0.5, 0.4, 0.1}, {0.45, 0.5, 0.05}, {0.9, 0.05, 0.05}};
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) p(i, j) = rows[i][j];
    auto base = unicon_select(ds.view(), p, JsdCutoffMode::Fixed, 0.9, NoiseKnowledge::empty(3));
    CHECK(base.scores.selected_count() == 3);
    auto plus = unicon_select(ds.view(), p, JsdCutoffMode::Fixed, 0.9,
                              NoiseKnowledge(3, {{0, {1}}}, KnowledgeOrigin::GroundTruth));
    CHECK(plus.scores.selected() == std::vector<bool>{true, false, true});
    auto more = unicon_select(ds.view(), p, JsdCutoffMode::Fixed, 0.9,
                              NoiseKnowledge(3, {{0, {1, 2}}}, KnowledgeOrigin::GroundTruth));
    CHECK(subset_of(more.scores.selected(), plus.scores.selected()));
}

// ---- DISC ----

TEST_CASE("disc updates thresholds before comparing") {
    Matrix x(1, 1, 1.0);
    LabeledDataset ds(x, {0}, std::nullopt, 3);
    AugmentedConfidences conf{Matrix(1, 3), Matrix(1, 3)};
    const double w[] = {0.5, 0.3, 0.2}, s[] = {0.4, 0.35, 0.25};
    for (std::size_t j = 0; j < 3; ++j) conf.weak(0, j) = w[j], conf.strong(0, j) = s[j];
    auto out = disc_select(ds.view(), conf, DistState::zeros(1), 0.9, NoiseKnowledge::empty(3));
    CHECK(out.state.tau_weak[0] == doctest::Approx(0.05));
    CHECK(out.state.tau_strong[0] == doctest::Approx(0.04));
    CHECK(out.result.scores.selected()[0]);
    CHECK(out.result.scores.prob_clean()[0] == doctest::Approx(0.4));
    auto again = disc_select(ds.view(), conf, out.state, 0.9, NoiseKnowledge::empty(3));
    CHECK(again.state.tau_weak[0] == doctest::Approx(0.095));
    CHECK_THROWS_AS(disc_select(ds.view(), conf, DistState::zeros(2), 0.9, NoiseKnowledge::empty(3)), Error);
}

TEST_CASE("disc+k can admit a sample base disc rejects") {
    Matrix x(1, 1, 1.0);
    LabeledDataset ds(x, {1}, std::nullopt, 3);
    AugmentedConfidences conf{Matrix(1, 3), Matrix(1, 3)};
    const double w[] = {0.6, 0.3, 0.1};
    for (std::size_t j = 0; j < 3; ++j) conf.weak(0, j) = conf.strong(0, j) = w[j];
    DistState st{{0.2}, {0.2}};
    auto base = disc_select(ds.view(), conf, st, 0.5, NoiseKnowledge::empty(3));
    auto plus = disc_select(ds.view(), conf, st, 0.5, NoiseKnowledge(3, {{1, {2}}}, KnowledgeOrigin::GroundTruth));
    CHECK_FALSE(base.result.scores.selected()[0]);
    CHECK(plus.result.scores.selected()[0]);
    CHECK(plus.state.tau_weak[0] == doctest::Approx(0.25));
}

// ---- dispatch ----

TEST_CASE("run_detector contracts") {
    auto n = small_dominant(4);
    auto view = n.ds.view();
    auto m = warm(n.ds, 4);
    PredictionBank bank(n.ds.size(), 3);
    for (std::uint64_t e = 0; e < 3; ++e) {
        std::vector<double> ones(n.ds.size(), 1.0);
        train_epoch(m, view, ones, 40 + e);
        record_epoch(bank, m, n.ds.features());
    }
    auto conf = augmented_confidences(m, n.ds.features(), AugmentationPolicy{}, 9);

    for (auto method : {DetectorMethod::Crust, DetectorMethod::Fine, DetectorMethod::Sft, DetectorMethod::Unicon,
                        DetectorMethod::Disc}) {
        CAPTURE(to_string(method));
        DetectorConfig cfg;
        cfg.method = method;
        DistState d1, d2, d3;
        ModelArtifacts a1{&m, &n.ds.features(), &bank, &conf, &d1};
        ModelArtifacts a2{&m, &n.ds.features(), &bank, &conf, &d2};
        ModelArtifacts a3{&m, &n.ds.features(), &bank, &conf, &d3};
        auto off = run_detector(cfg, view, a1, n.knowledge);
        auto direct_empty = run_detector(cfg, view, a2, NoiseKnowledge::empty(4));
        CHECK(off.scores == direct_empty.scores);
        CHECK(d1 == d2);
        cfg.knowledge_enabled = true;
        auto on_empty = run_detector(cfg, view, a3, NoiseKnowledge::empty(4));
        CHECK(on_empty.scores == off.scores);
        CHECK_FALSE(on_empty.warnings.empty());
        CHECK(detector_method_from_string(to_string(method)) == method);
    }

    DetectorConfig cfg;
    cfg.method = DetectorMethod::Sft;
    ModelArtifacts missing;
    try {
        run_detector(cfg, view, missing, n.knowledge);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("'bank'") != std::string::npos);
    }
    CHECK(kind_of([] { detector_method_from_string("dividemix"); }) == ErrorKind::Validation);
    cfg.fl_ratio = 0.0;
    CHECK(kind_of([&] { cfg.validate(); }) == ErrorKind::Validation);
}
