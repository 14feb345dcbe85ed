#include <algorithm>

#include "doctest.h"
#include "noisesel/core.hpp"
#include "noisesel/rng.hpp"

using namespace noisesel;

namespace {

template <typename F>
ErrorKind kind_of(F&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("expected an error");
    return ErrorKind::Validation;
}

NoiseKnowledge cat_dog() {
    // class 0 = cat, class 1 = dog; dog samples tend to be labeled cat.
    return NoiseKnowledge(2, {{0, {1}}}, KnowledgeOrigin::FromLabelPairs);
}

}  // namespace

TEST_CASE("matrix basics") {
    Matrix m(2, 3, 1.5);
    CHECK(m.rows() == 2);
    CHECK(m.cols() == 3);
    m(1, 2) = 4.0;
    CHECK(m.row(1)[2] == 4.0);
    CHECK(m.data().size() == 6);
}

TEST_CASE("labeled dataset invariants") {
    Matrix f(3, 2);
    CHECK(kind_of([&] { LabeledDataset(f, {0, 1}, std::nullopt, 2); }) == ErrorKind::Shape);
    CHECK(kind_of([&] { LabeledDataset(f, {0, 1, 2}, std::nullopt, 2); }) == ErrorKind::Index);
    CHECK(kind_of([&] { LabeledDataset(f, {0, 1, 1}, std::vector<ClassIndex>{0, 1}, 2); }) == ErrorKind::Shape);

    LabeledDataset ds(f, {0, 1, 1}, std::nullopt, 2);
    CHECK_FALSE(ds.has_true_labels());
    CHECK(kind_of([&] { (void)ds.true_labels(); }) == ErrorKind::Validation);
    auto v = ds.view();
    CHECK(v.members_of(1) == std::vector<std::size_t>{1, 2});
    CHECK(v.size() == 3);
}

TEST_CASE("knowledge construction and lookup") {
    auto kn = NoiseKnowledge(3, {{2, {0, 1}}}, KnowledgeOrigin::GroundTruth);
    CHECK(sources_of(kn, 2) == ClassSet{0, 1});
    CHECK(sources_of(kn, 0).empty());
    CHECK(kind_of([&] { sources_of(kn, 3); }) == ErrorKind::Index);

    CHECK(sources_of(NoiseKnowledge::empty(4), 0).empty());
    CHECK(NoiseKnowledge::empty(4).is_empty());

    const std::pair<ClassIndex, ClassIndex> pairs[] = {{0, 3}};
    auto lp = NoiseKnowledge::from_label_pairs(4, pairs);
    CHECK(sources_of(lp, 3) == ClassSet{0});
    CHECK(lp.origin() == KnowledgeOrigin::FromLabelPairs);

    CHECK(kind_of([] { NoiseKnowledge(3, {{1, {1}}}, KnowledgeOrigin::GroundTruth); }) == ErrorKind::Validation);
    CHECK(kind_of([] { NoiseKnowledge(3, {{1, {5}}}, KnowledgeOrigin::GroundTruth); }) == ErrorKind::Index);
    // empty sets are dropped, so equality does not depend on them
    CHECK(NoiseKnowledge(3, {{1, {}}}, KnowledgeOrigin::GroundTruth).is_empty());
}

TEST_CASE("clean score invariants") {
    CHECK(kind_of([] { CleanScores({0.0}, {true}); }) == ErrorKind::Validation);
    CHECK(kind_of([] { CleanScores({1.5}, {true}); }) == ErrorKind::Validation);
    auto s = CleanScores::from_probabilities({0.0, 0.2, 1.0});
    CHECK(s.selected() == std::vector<bool>{false, true, true});
    CHECK(s.selected_count() == 2);
}

TEST_CASE("transition matrix") {
    Matrix m(2, 2);
    m(0, 0) = 3;
    m(0, 1) = 1;
    auto r = row_normalize(m);
    CHECK(r(0, 0) == doctest::Approx(0.75));
    CHECK(r(1, 1) == 1.0);
    CHECK_NOTHROW(TransitionMatrix{r});
    Matrix bad(2, 2, 0.4);
    CHECK(kind_of([&] { TransitionMatrix{bad}; }) == ErrorKind::Validation);
}

TEST_CASE("integrate_knowledge follows the strict rule") {
    SUBCASE("cat kept over dog") {
        Matrix p(1, 2);
        p(0, 0) = 0.3;
        p(0, 1) = 0.2;
        auto s = integrate_knowledge(p, std::vector<ClassIndex>{0}, cat_dog());
        CHECK(s.prob_clean()[0] == 0.3);
        CHECK(s.selected()[0]);
    }
    SUBCASE("ties count as noisy") {
        Matrix p(1, 2, 0.5);
        auto s = integrate_knowledge(p, std::vector<ClassIndex>{0}, cat_dog());
        CHECK(s.prob_clean()[0] == 0.0);
        CHECK_FALSE(s.selected()[0]);
    }
    SUBCASE("empty knowledge leaves the label column verbatim") {
        Rng rng(11);
        Matrix p(50, 4);
        std::vector<ClassIndex> labels(50);
        for (std::size_t i = 0; i < 50; ++i) {
            for (double& v : p.row(i)) v = rng.uniform();
            labels[i] = static_cast<ClassIndex>(rng.below(4));
        }
        auto s = integrate_knowledge(p, labels, NoiseKnowledge::empty(4));
        for (std::size_t i = 0; i < 50; ++i) CHECK(s.prob_clean()[i] == p(i, labels[i]));
    }
    SUBCASE("shape errors") {
        Matrix p(2, 3);
        CHECK(kind_of([&] { integrate_knowledge(p, std::vector<ClassIndex>{0}, cat_dog()); }) == ErrorKind::Shape);
        CHECK(kind_of([&] { integrate_knowledge(p, std::vector<ClassIndex>{0, 1}, cat_dog()); }) ==
              ErrorKind::Shape);
    }
}

TEST_CASE("integrate_knowledge never raises and is monotone in sources") {
    Rng rng(5);
    const std::size_t n = 200, k = 5;
    Matrix p(n, k);
    std::vector<ClassIndex> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (double& v : p.row(i)) v = rng.uniform();
        labels[i] = static_cast<ClassIndex>(rng.below(k));
    }
    auto none = integrate_knowledge(p, labels, NoiseKnowledge::empty(k));
    auto small = integrate_knowledge(p, labels, NoiseKnowledge(k, {{0, {1}}, {2, {3}}}, KnowledgeOrigin::GroundTruth));
    auto big = integrate_knowledge(
        p, labels, NoiseKnowledge(k, {{0, {1, 4}}, {2, {3, 0}}, {1, {2}}}, KnowledgeOrigin::GroundTruth));
    for (std::size_t i = 0; i < n; ++i) {
        CHECK(small.prob_clean()[i] <= none.prob_clean()[i]);
        CHECK(big.prob_clean()[i] <= small.prob_clean()[i]);
        if (big.selected()[i]) CHECK(small.selected()[i]);
    }
}

TEST_CASE("named seed streams are stable and distinct") {
    CHECK(derive_seed(7, "data") == derive_seed(7, "data"));
    CHECK(derive_seed(7, "data") != derive_seed(7, "noise"));
    CHECK(derive_seed(7, "data") != derive_seed(8, "data"));
    CHECK(derive_seed(7, "train-shuffle", 1) != derive_seed(7, "train-shuffle", 2));
    Rng a(3), b(3);
    for (int i = 0; i < 10; ++i) CHECK(a.next_u64() == b.next_u64());
    auto s = Rng(9).sample_without_replacement(10, 10);
    std::sort(s.begin(), s.end());
    for (std::size_t i = 0; i < 10; ++i) CHECK(s[i] == i);
}
