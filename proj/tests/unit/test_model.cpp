#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "noisesel/model.hpp"
#include "noisesel/rng.hpp"
#include "noisesel/synth.hpp"

using namespace noisesel;

namespace {

SoftmaxModel random_model(std::size_t k, std::size_t d, Rng& rng, double scale = 1.0) {
    SoftmaxModel m(k, d);
    for (double& w : m.weights().data()) w = scale * rng.normal();
    for (double& b : m.bias()) b = scale * rng.normal();
    return m;
}

// Losses evaluated directly from probabilities, independent of the gradient code.
double squared_loss(const SoftmaxModel& m, std::span<const double> x, ClassIndex c) {
    auto p = m.probabilities(x);
    double s = 0.0;
    for (std::size_t j = 0; j < p.size(); ++j) s += std::pow(p[j] - (j == c ? 1.0 : 0.0), 2);
    return 0.5 * s;
}

double ce_loss(const SoftmaxModel& m, std::span<const double> x, ClassIndex c) {
    return -std::log(m.probabilities(x)[c]);
}

template <typename Loss>
std::vector<double> central_differences(SoftmaxModel m, std::span<const double> x, ClassIndex c, Loss loss) {
    const double h = 1e-5;
    std::vector<double> g;
    auto probe = [&](double& p) {
        const double keep = p;
        p = keep + h;
        const double up = loss(m, x, c);
        p = keep - h;
        const double down = loss(m, x, c);
        p = keep;
        g.push_back((up - down) / (2 * h));
    };
    for (double& w : m.weights().data()) probe(w);
    for (double& b : m.bias()) probe(b);
    return g;
}

LabeledDataset blobs(std::size_t per_class, std::uint64_t seed) {
    ClusterSpec spec;
    spec.num_classes = 3;
    spec.dim = 4;
    spec.samples_per_class = per_class;
    spec.seed = seed;
    return generate_clusters(spec);
}

}  // namespace

TEST_CASE("softmax is stable for large logits") {
    std::vector<double> z = {1000.0, 1001.0, 999.0};
    softmax_inplace(z);
    double sum = z[0] + z[1] + z[2];
    CHECK(sum == doctest::Approx(1.0));
    CHECK(z[1] > z[0]);
    CHECK(argmax(z) == 1);
    std::vector<double> tie = {0.5, 0.5};
    CHECK(argmax(tie) == 0);
}

TEST_CASE("analytic gradients agree with central differences") {
    Rng rng(2024);
    double worst_sq = 0.0, worst_ce = 0.0;
    for (int draw = 0; draw < 100; ++draw) {
        const std::size_t k = 2 + rng.below(4), d = 1 + rng.below(5);
        SoftmaxModel m = random_model(k, d, rng);
        std::vector<double> x(d);
        for (double& v : x) v = rng.normal();
        const auto c = static_cast<ClassIndex>(rng.below(k));

        auto sq = per_sample_gradient(m, x, c);
        auto sq_fd = central_differences(m, x, c, squared_loss);
        auto ce = per_sample_gradients(m, x, std::span<const ClassIndex>(&c, 1), GradientLoss::CrossEntropy);
        auto ce_fd = central_differences(m, x, c, ce_loss);
        REQUIRE(sq.size() == m.parameter_count());
        for (std::size_t j = 0; j < sq.size(); ++j) {
            worst_sq = std::max(worst_sq, std::abs(sq[j] - sq_fd[j]));
            worst_ce = std::max(worst_ce, std::abs(ce(0, j) - ce_fd[j]));
        }
    }
    CHECK(worst_sq <= 1e-6);
    CHECK(worst_ce <= 1e-6);
}

TEST_CASE("batched gradients equal single-target gradients") {
    Rng rng(3);
    SoftmaxModel m = random_model(4, 3, rng);
    std::vector<double> x = {0.3, -1.2, 2.0};
    const std::vector<ClassIndex> targets = {2, 0, 3};
    Matrix g = per_sample_gradients(m, x, targets);
    for (std::size_t t = 0; t < targets.size(); ++t) {
        auto single = per_sample_gradient(m, x, targets[t]);
        for (std::size_t j = 0; j < single.size(); ++j) CHECK(g(t, j) == single[j]);
    }
    const ClassIndex bad = 4;
    CHECK_THROWS_AS(per_sample_gradients(m, x, std::span<const ClassIndex>(&bad, 1)), Error);
}

TEST_CASE("training reduces loss and is reproducible") {
    auto ds = blobs(100, 1);
    auto view = ds.view();
    std::vector<double> ones(ds.size(), 1.0);
    SoftmaxModel a(3, 4, 0.1), b(3, 4, 0.1);
    const double first = train_epoch(a, view, ones, 10);
    double last = first;
    for (std::uint64_t e = 1; e < 10; ++e) last = train_epoch(a, view, ones, 10 + e);
    CHECK(last < first);
    for (std::uint64_t e = 0; e < 10; ++e) train_epoch(b, view, ones, 10 + e);
    CHECK(a == b);
    CHECK(a.epoch_counter() == 10);
}

TEST_CASE("zero-weight samples do not influence training") {
    auto ds = blobs(50, 4);
    std::vector<double> mask(ds.size(), 1.0);
    for (std::size_t i = 0; i < ds.size(); i += 3) mask[i] = 0.0;

    // Scramble the masked samples; the trained model must not notice.
    Matrix x = ds.features();
    std::vector<ClassIndex> y = ds.noisy_labels();
    for (std::size_t i = 0; i < ds.size(); i += 3) {
        for (double& v : x.row(i)) v = 1e3;
        y[i] = (y[i] + 1) % 3;
    }
    LabeledDataset scrambled(x, y, std::nullopt, 3);

    SoftmaxModel a(3, 4), b(3, 4);
    train_epoch(a, ds.view(), mask, 7);
    train_epoch(b, scrambled.view(), mask, 7);
    CHECK(a == b);

    std::vector<double> zeros(ds.size(), 0.0);
    CHECK_THROWS_AS(train_epoch(a, ds.view(), zeros, 7), Error);
    mask[0] = 1.5;
    CHECK_THROWS_AS(train_epoch(a, ds.view(), mask, 7), Error);
}

TEST_CASE("prediction bank keeps the latest window in order") {
    PredictionBank bank(2, 3);
    auto onehot = [](ClassIndex a, ClassIndex b) {
        Matrix p(2, 2, 0.0);
        p(0, a) = 1.0;
        p(1, b) = 1.0;
        return p;
    };
    bank.push(onehot(0, 1));
    bank.push(onehot(1, 1));
    CHECK(bank.history(0) == std::vector<ClassIndex>{0, 1});
    bank.push(onehot(1, 0));
    bank.push(onehot(0, 0));
    CHECK(bank.recorded_epochs() == 3);
    CHECK(bank.history(0) == std::vector<ClassIndex>{1, 1, 0});
    CHECK(bank.history(1) == std::vector<ClassIndex>{1, 0, 0});
    CHECK(bank.latest_probs()(0, 0) == 1.0);
    CHECK_THROWS_AS(bank.history(2), Error);
    CHECK_THROWS_AS(PredictionBank(2, 1), Error);
}

TEST_CASE("augmented views") {
    Rng rng(8);
    SoftmaxModel m = random_model(3, 5, rng);
    Matrix x(20, 5);
    for (double& v : x.data()) v = rng.normal();

    AugmentationPolicy identity{0.0, 0.0, 0.0};
    auto same = augmented_confidences(m, x, identity, 1);
    CHECK(same.weak == m.predict(x));
    CHECK(same.strong == m.predict(x));

    AugmentationPolicy policy;
    auto a = augmented_confidences(m, x, policy, 1);
    auto b = augmented_confidences(m, x, policy, 1);
    CHECK(a.weak == b.weak);
    CHECK(a.strong == b.strong);
    CHECK_FALSE(a.weak == a.strong);

    CHECK_THROWS_AS((AugmentationPolicy{0.5, 0.1, 0.0}.validate()), Error);
    CHECK_THROWS_AS((AugmentationPolicy{0.1, 0.1, 0.0}.validate()), Error);
    CHECK_THROWS_AS((AugmentationPolicy{0.1, 0.5, 1.0}.validate()), Error);
}

TEST_CASE("checkpoint round trip") {
    Rng rng(12);
    SoftmaxModel m = random_model(3, 4, rng);
    auto bytes = serialize_checkpoint(m);
    CHECK(bytes.size() == 16 + 8 * (3 * 4 + 3));
    CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "NSLM");
    auto back = deserialize_checkpoint(bytes);
    CHECK(back.weights() == m.weights());
    CHECK(back.bias() == m.bias());

    const auto path = std::filesystem::temp_directory_path() / "noisesel_test_model.nslm";
    save_checkpoint(m, path);
    CHECK(load_checkpoint(path).weights() == m.weights());
    std::filesystem::remove(path);

    auto truncated = bytes;
    truncated.pop_back();
    CHECK_THROWS_AS(deserialize_checkpoint(truncated), Error);
    auto bad = bytes;
    bad[0] = 'X';
    CHECK_THROWS_AS(deserialize_checkpoint(bad), Error);
    CHECK_THROWS_AS(load_checkpoint("/nonexistent/dir/model.nslm"), Error);
}
