#include "noisesel/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "noisesel/io.hpp"
#include "noisesel/rng.hpp"
#include "noisesel/synth.hpp"

namespace noisesel {

SoftmaxModel::SoftmaxModel(std::size_t num_classes, std::size_t dim, double learning_rate)
    : weights_(num_classes, dim), bias_(num_classes, 0.0), learning_rate_(learning_rate) {
    require(num_classes >= 2 && dim >= 1, ErrorKind::Validation, "model needs k >= 2 and d >= 1");
    set_learning_rate(learning_rate);
}

void SoftmaxModel::set_learning_rate(double lr) {
    require(lr > 0.0 && std::isfinite(lr), ErrorKind::Validation, "learning rate must be > 0");
    learning_rate_ = lr;
}

void SoftmaxModel::logits(std::span<const double> x, std::span<double> out) const {
    require(x.size() == dim() && out.size() == num_classes(), ErrorKind::Shape, "logits: shape mismatch");
    for (std::size_t c = 0; c < num_classes(); ++c) {
        auto w = weights_.row(c);
        double z = bias_[c];
        for (std::size_t j = 0; j < x.size(); ++j) z += w[j] * x[j];
        out[c] = z;
    }
}

void softmax_inplace(std::span<double> z) {
    const double top = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (double& v : z) {
        v = std::exp(v - top);
        sum += v;
    }
    for (double& v : z) v /= sum;
}

ClassIndex argmax(std::span<const double> v) {
    return static_cast<ClassIndex>(std::max_element(v.begin(), v.end()) - v.begin());
}

std::vector<double> SoftmaxModel::probabilities(std::span<const double> x) const {
    std::vector<double> p(num_classes());
    logits(x, p);
    softmax_inplace(p);
    return p;
}

Matrix SoftmaxModel::predict(const Matrix& features) const {
    require(features.cols() == dim(), ErrorKind::Shape, "predict: feature dimension mismatch");
    Matrix probs(features.rows(), num_classes());
    for (std::size_t i = 0; i < features.rows(); ++i) {
        logits(features.row(i), probs.row(i));
        softmax_inplace(probs.row(i));
    }
    return probs;
}

std::vector<ClassIndex> SoftmaxModel::predict_labels(const Matrix& features) const {
    Matrix probs = predict(features);
    std::vector<ClassIndex> out(probs.rows());
    for (std::size_t i = 0; i < probs.rows(); ++i) out[i] = argmax(probs.row(i));
    return out;
}

double train_epoch(SoftmaxModel& model, const DatasetView& data, std::span<const double> weights,
                   std::uint64_t seed, std::size_t batch_size) {
    const std::size_t n = data.size(), k = model.num_classes(), d = model.dim();
    require(weights.size() == n, ErrorKind::Shape, "train_epoch: mask length != sample count");
    require(data.dim() == d && data.num_classes() == k, ErrorKind::Shape, "train_epoch: model/data shape mismatch");
    require(batch_size >= 1, ErrorKind::Validation, "batch size must be >= 1");
    for (double w : weights)
        require(w >= 0.0 && w <= 1.0, ErrorKind::Validation, "train_epoch: mask weights must lie in [0,1]");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng(seed).shuffle(order);
    std::erase_if(order, [&](std::size_t i) { return weights[i] == 0.0; });
    require(!order.empty(), ErrorKind::Validation, "train_epoch: all-zero mask, nothing to train on");

    Matrix grad_w(k, d);
    std::vector<double> grad_b(k), p(k);
    double loss_sum = 0.0, weight_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
        const std::size_t stop = std::min(order.size(), start + batch_size);
        std::fill(grad_w.data().begin(), grad_w.data().end(), 0.0);
        std::fill(grad_b.begin(), grad_b.end(), 0.0);
        double batch_weight = 0.0;
        for (std::size_t t = start; t < stop; ++t) {
            const std::size_t i = order[t];
            const double w = weights[i];
            auto x = data.features().row(i);
            const ClassIndex y = data.noisy_labels()[i];
            model.logits(x, p);
            softmax_inplace(p);
            loss_sum += w * -std::log(std::max(p[y], 1e-300));
            batch_weight += w;
            for (std::size_t c = 0; c < k; ++c) {
                const double delta = w * (p[c] - (c == y ? 1.0 : 0.0));
                grad_b[c] += delta;
                auto g = grad_w.row(c);
                for (std::size_t j = 0; j < d; ++j) g[j] += delta * x[j];
            }
        }
        weight_sum += batch_weight;
        const double step = model.learning_rate() / batch_weight;
        for (std::size_t c = 0; c < k; ++c) {
            model.bias()[c] -= step * grad_b[c];
            auto w = model.weights().row(c);
            auto g = grad_w.row(c);
            for (std::size_t j = 0; j < d; ++j) w[j] -= step * g[j];
        }
    }
    model.advance_epoch();
    return loss_sum / weight_sum;
}

Matrix per_sample_gradients(const SoftmaxModel& model, std::span<const double> x,
                            std::span<const ClassIndex> targets, GradientLoss loss) {
    const std::size_t k = model.num_classes(), d = model.dim();
    std::vector<double> p = model.probabilities(x);
    Matrix out(targets.size(), k * d + k);
    std::vector<double> dz(k);
    for (std::size_t t = 0; t < targets.size(); ++t) {
        const ClassIndex c = targets[t];
        require(c < k, ErrorKind::Index, "gradient target class out of range");
        if (loss == GradientLoss::CrossEntropy) {
            for (std::size_t m = 0; m < k; ++m) dz[m] = p[m] - (m == c ? 1.0 : 0.0);
        } else {
            // L = 0.5 * sum_j r_j^2 with r = p - onehot(c); dL/dz_m = p_m (r_m - r . p)
            double r_dot_p = 0.0;
            for (std::size_t j = 0; j < k; ++j) r_dot_p += (p[j] - (j == c ? 1.0 : 0.0)) * p[j];
            for (std::size_t m = 0; m < k; ++m) dz[m] = p[m] * ((p[m] - (m == c ? 1.0 : 0.0)) - r_dot_p);
        }
        auto g = out.row(t);
        for (std::size_t m = 0; m < k; ++m) {
            for (std::size_t j = 0; j < d; ++j) g[m * d + j] = dz[m] * x[j];
            g[k * d + m] = dz[m];
        }
    }
    return out;
}

std::vector<double> per_sample_gradient(const SoftmaxModel& model, std::span<const double> x, ClassIndex c) {
    Matrix g = per_sample_gradients(model, x, std::span<const ClassIndex>(&c, 1));
    return {g.row(0).begin(), g.row(0).end()};
}

void AugmentationPolicy::validate() const {
    require(weak_sigma >= 0.0, ErrorKind::Validation, "augmentation: weak_sigma must be >= 0");
    require(strong_sigma >= weak_sigma, ErrorKind::Validation, "augmentation: strong_sigma must be >= weak_sigma");
    require(strong_dropout >= 0.0 && strong_dropout < 1.0, ErrorKind::Validation,
            "augmentation: strong_dropout must lie in [0,1)");
    require(is_identity() || strong_sigma > weak_sigma || strong_dropout > 0.0, ErrorKind::Validation,
            "augmentation: the strong view must corrupt more than the weak view");
}

AugmentedConfidences augmented_confidences(const SoftmaxModel& model, const Matrix& features,
                                           const AugmentationPolicy& policy, std::uint64_t seed) {
    policy.validate();
    const std::size_t n = features.rows(), d = features.cols();
    require(d == model.dim(), ErrorKind::Shape, "augmented_confidences: feature dimension mismatch");
    Rng weak_rng(seed, "augment-weak"), strong_rng(seed, "augment-strong");
    const std::size_t dropped = round_half_up(policy.strong_dropout * static_cast<double>(d));

    AugmentedConfidences out{Matrix(n, model.num_classes()), Matrix(n, model.num_classes())};
    std::vector<double> view(d);
    for (std::size_t i = 0; i < n; ++i) {
        auto x = features.row(i);
        for (std::size_t j = 0; j < d; ++j)
            view[j] = policy.weak_sigma > 0.0 ? x[j] + policy.weak_sigma * weak_rng.normal() : x[j];
        model.logits(view, out.weak.row(i));
        softmax_inplace(out.weak.row(i));

        std::copy(x.begin(), x.end(), view.begin());
        if (dropped > 0)
            for (std::size_t j : strong_rng.sample_without_replacement(d, dropped)) view[j] = 0.0;
        if (policy.strong_sigma > 0.0)
            for (double& v : view) v += policy.strong_sigma * strong_rng.normal();
        model.logits(view, out.strong.row(i));
        softmax_inplace(out.strong.row(i));
    }
    return out;
}

PredictionBank::PredictionBank(std::size_t num_samples, std::size_t window)
    : n_(num_samples), window_(window), ring_(window * num_samples, 0) {
    require(window >= 2, ErrorKind::Validation, "prediction bank window must be >= 2");
}

std::vector<ClassIndex> PredictionBank::history(std::size_t i) const {
    require(i < n_, ErrorKind::Index, "prediction bank: sample index out of range");
    std::vector<ClassIndex> out;
    out.reserve(stored_);
    const std::size_t oldest = (next_ + window_ - stored_) % window_;
    for (std::size_t t = 0; t < stored_; ++t) out.push_back(ring_[((oldest + t) % window_) * n_ + i]);
    return out;
}

void PredictionBank::push(Matrix probs) {
    require(probs.rows() == n_, ErrorKind::Shape, "prediction bank: row count != sample count");
    for (std::size_t i = 0; i < n_; ++i) ring_[next_ * n_ + i] = argmax(probs.row(i));
    next_ = (next_ + 1) % window_;
    stored_ = std::min(stored_ + 1, window_);
    latest_ = std::move(probs);
}

void record_epoch(PredictionBank& bank, const SoftmaxModel& model, const Matrix& features) {
    bank.push(model.predict(features));
}

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int b = 0; b < 4; ++b) out.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
}

void put_f64(std::vector<std::uint8_t>& out, double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int b = 0; b < 8; ++b) out.push_back(static_cast<std::uint8_t>(bits >> (8 * b)));
}

std::uint64_t get_le(std::span<const std::uint8_t> bytes, std::size_t& pos, int width) {
    require(pos + static_cast<std::size_t>(width) <= bytes.size(), ErrorKind::Validation, "checkpoint truncated");
    std::uint64_t v = 0;
    for (int b = 0; b < width; ++b) v |= static_cast<std::uint64_t>(bytes[pos++]) << (8 * b);
    return v;
}

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const SoftmaxModel& model) {
    std::vector<std::uint8_t> out = {'N', 'S', 'L', 'M'};
    put_u32(out, kCheckpointVersion);
    put_u32(out, static_cast<std::uint32_t>(model.num_classes()));
    put_u32(out, static_cast<std::uint32_t>(model.dim()));
    for (double w : model.weights().data()) put_f64(out, w);
    for (double b : model.bias()) put_f64(out, b);
    return out;
}

SoftmaxModel deserialize_checkpoint(std::span<const std::uint8_t> bytes, double learning_rate) {
    require(bytes.size() >= 16 && std::memcmp(bytes.data(), "NSLM", 4) == 0, ErrorKind::Validation,
            "checkpoint: bad magic");
    std::size_t pos = 4;
    const auto version = static_cast<std::uint32_t>(get_le(bytes, pos, 4));
    require(version == kCheckpointVersion, ErrorKind::Validation,
            "checkpoint: unsupported version " + std::to_string(version));
    const auto k = static_cast<std::size_t>(get_le(bytes, pos, 4));
    const auto d = static_cast<std::size_t>(get_le(bytes, pos, 4));
    require(bytes.size() == 16 + 8 * (k * d + k), ErrorKind::Validation, "checkpoint: size does not match header");
    SoftmaxModel model(k, d, learning_rate);
    for (double& w : model.weights().data()) w = std::bit_cast<double>(get_le(bytes, pos, 8));
    for (double& b : model.bias()) b = std::bit_cast<double>(get_le(bytes, pos, 8));
    return model;
}

void save_checkpoint(const SoftmaxModel& model, const std::filesystem::path& path) {
    const auto bytes = serialize_checkpoint(model);
    io::write_text(path, std::string(bytes.begin(), bytes.end()));
}

SoftmaxModel load_checkpoint(const std::filesystem::path& path, double learning_rate) {
    const std::string text = io::read_text(path);
    return deserialize_checkpoint(
        std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()), learning_rate);
}

}  // namespace noisesel
