#include "noisesel/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "noisesel/rng.hpp"

namespace noisesel {
namespace {

std::size_t ceil_count(double x) { return static_cast<std::size_t>(std::ceil(x - 1e-9)); }

void validate_pairs(const std::vector<ClassPair>& pairs, std::size_t k, bool disjoint) {
    std::vector<bool> used(k, false);
    for (auto [a, b] : pairs) {
        require(a < k && b < k, ErrorKind::Index, "class pair references a class >= k");
        require(a != b, ErrorKind::Validation, "class pair must contain two distinct classes");
        if (disjoint) {
            require(!used[a] && !used[b], ErrorKind::Validation, "noise pairs must be disjoint");
            used[a] = used[b] = true;
        }
    }
}

}  // namespace

std::size_t round_half_up(double x) { return static_cast<std::size_t>(std::floor(x + 0.5 + 1e-9)); }

void ClusterSpec::validate() const {
    require(num_classes >= 2, ErrorKind::Validation, "cluster spec: num_classes must be >= 2");
    require(dim >= 1, ErrorKind::Validation, "cluster spec: dim must be >= 1");
    require(samples_per_class >= 1, ErrorKind::Validation, "cluster spec: samples_per_class must be >= 1");
    require(separation > 0.0 && std::isfinite(separation), ErrorKind::Validation,
            "cluster spec: separation must be > 0");
    validate_pairs(confusable_pairs, num_classes, false);
}

Matrix class_means(const ClusterSpec& spec) {
    spec.validate();
    const std::size_t k = spec.num_classes, d = spec.dim;
    Rng rng(spec.seed, "cluster-means");
    Matrix means(k, d);
    const double radius = spec.separation / std::sqrt(2.0);

    if (d >= k) {
        // Random orthonormal directions (Gram-Schmidt): pairwise distance = separation.
        for (std::size_t c = 0; c < k; ++c) {
            auto v = means.row(c);
            for (;;) {
                for (double& x : v) x = rng.normal();
                for (std::size_t p = 0; p < c; ++p) {
                    auto u = means.row(p);
                    double dot = 0.0;
                    for (std::size_t j = 0; j < d; ++j) dot += v[j] * u[j];
                    for (std::size_t j = 0; j < d; ++j) v[j] -= dot * u[j];
                }
                double norm = 0.0;
                for (double x : v) norm += x * x;
                norm = std::sqrt(norm);
                if (norm > 1e-6) {
                    for (double& x : v) x /= norm;
                    break;
                }
            }
        }
        for (double& x : means.data()) x *= radius;
    } else {
        // Grid of pitch `separation`, centred on the origin.
        std::size_t side = 1;
        while (static_cast<std::size_t>(std::pow(static_cast<double>(side), static_cast<double>(d))) < k) ++side;
        const double offset = 0.5 * static_cast<double>(side - 1);
        for (std::size_t c = 0; c < k; ++c) {
            std::size_t code = c;
            for (std::size_t j = 0; j < d; ++j) {
                means(c, j) = (static_cast<double>(code % side) - offset) * spec.separation;
                code /= side;
            }
        }
    }

    for (auto [a, b] : spec.confusable_pairs) {
        auto ma = means.row(a);
        auto mb = means.row(b);
        double dist = 0.0;
        for (std::size_t j = 0; j < d; ++j) dist += (mb[j] - ma[j]) * (mb[j] - ma[j]);
        dist = std::sqrt(dist);
        if (dist <= 0.0) continue;
        const double scale = (spec.separation / 2.0) / dist;
        for (std::size_t j = 0; j < d; ++j) mb[j] = ma[j] + (mb[j] - ma[j]) * scale;
    }
    return means;
}

LabeledDataset sample_clusters(const ClusterSpec& spec, const Matrix& means, std::size_t per_class,
                               std::uint64_t sample_seed) {
    spec.validate();
    require(per_class >= 1, ErrorKind::Validation, "per_class must be >= 1");
    require(means.rows() == spec.num_classes && means.cols() == spec.dim, ErrorKind::Shape,
            "class means do not match the cluster spec");
    const std::size_t k = spec.num_classes, d = spec.dim;
    Rng rng(sample_seed);
    Matrix features(k * per_class, d);
    std::vector<ClassIndex> labels(k * per_class);
    for (std::size_t c = 0; c < k; ++c) {
        for (std::size_t s = 0; s < per_class; ++s) {
            const std::size_t i = c * per_class + s;
            labels[i] = static_cast<ClassIndex>(c);
            auto row = features.row(i);
            for (std::size_t j = 0; j < d; ++j) row[j] = means(c, j) + rng.normal();
        }
    }
    auto truth = labels;
    return LabeledDataset(std::move(features), std::move(labels), std::move(truth), k);
}

LabeledDataset generate_clusters(const ClusterSpec& spec) {
    return sample_clusters(spec, class_means(spec), spec.samples_per_class,
                           derive_seed(spec.seed, "cluster-samples"));
}

std::vector<ClassIndex> NoisePlan::dominant_classes() const {
    std::vector<ClassIndex> out(num_classes / 2);
    std::iota(out.begin(), out.end(), ClassIndex{0});
    return out;
}

std::vector<ClassIndex> NoisePlan::recessive_classes() const {
    std::vector<ClassIndex> out(num_classes - num_classes / 2);
    std::iota(out.begin(), out.end(), static_cast<ClassIndex>(num_classes / 2));
    return out;
}

void NoisePlan::validate() const {
    require(num_classes >= 2, ErrorKind::Validation, "noise plan: num_classes must be >= 2");
    require(samples_per_class >= 1, ErrorKind::Validation, "noise plan: samples_per_class must be >= 1");
    if (kind == NoiseKind::Dominant) {
        require(num_classes % 2 == 0, ErrorKind::Validation,
                "dominant noise needs an even class count (equal dominant/recessive halves)");
        require(noise_ratio >= 0.0 && noise_ratio < 1.0, ErrorKind::Validation,
                "dominant noise ratio must lie in [0, 1)");
    } else {
        require(noise_ratio >= 0.0, ErrorKind::Validation, "asymmetric noise ratio must be >= 0");
        require(noise_ratio <= 0.5, ErrorKind::Validation,
                "asymmetric noise ratio above 0.5 is unsupported: the true label becomes the minority");
        validate_pairs(pairs, num_classes, true);
    }
}

NoisePlan dominant_plan(std::size_t num_classes, std::size_t samples_per_class, double ratio) {
    NoisePlan plan{NoiseKind::Dominant, ratio, {}, num_classes, samples_per_class};
    plan.validate();
    return plan;
}

NoisePlan asymmetric_plan(std::size_t num_classes, std::size_t samples_per_class,
                          std::vector<ClassPair> pairs, double ratio) {
    NoisePlan plan{NoiseKind::Asymmetric, ratio, std::move(pairs), num_classes, samples_per_class};
    plan.validate();
    return plan;
}

DominantComposition dominant_composition(const NoisePlan& plan) {
    require(plan.kind == NoiseKind::Dominant, ErrorKind::Validation, "plan is not dominant noise");
    plan.validate();
    const double spc = static_cast<double>(plan.samples_per_class);
    const double r = plan.noise_ratio;
    DominantComposition comp;
    comp.dominant_sampled = round_half_up(spc * (1.0 + r) / 2.0);
    comp.recessive_sampled = round_half_up(spc * (1.0 - r) / 2.0);
    // Each dominant class hands the same number of samples to the recessive half.
    comp.noisy_per_recessive = (comp.dominant_sampled - comp.recessive_sampled) / 2;
    comp.dominant_after = comp.dominant_sampled - comp.noisy_per_recessive;
    comp.recessive_after = comp.recessive_sampled + comp.noisy_per_recessive;

    const std::size_t m = plan.num_classes / 2;
    const std::size_t base = comp.noisy_per_recessive / m, rem = comp.noisy_per_recessive % m;
    comp.transfer.assign(m, std::vector<std::size_t>(m, base));
    for (std::size_t ri = 0; ri < m; ++ri)
        for (std::size_t di = 0; di < m; ++di)
            if ((di + m - ri) % m < rem) ++comp.transfer[ri][di];
    return comp;
}

CountMatrix planned_label_counts(const NoisePlan& plan) {
    plan.validate();
    const std::size_t k = plan.num_classes;
    CountMatrix counts(k, std::vector<std::size_t>(k, 0));
    if (plan.kind == NoiseKind::Dominant) {
        auto comp = dominant_composition(plan);
        auto dom = plan.dominant_classes();
        auto rec = plan.recessive_classes();
        for (std::size_t di = 0; di < dom.size(); ++di) counts[dom[di]][dom[di]] = comp.dominant_after;
        for (std::size_t ri = 0; ri < rec.size(); ++ri) {
            counts[rec[ri]][rec[ri]] = comp.recessive_sampled;
            for (std::size_t di = 0; di < dom.size(); ++di) counts[dom[di]][rec[ri]] = comp.transfer[ri][di];
        }
    } else {
        for (std::size_t c = 0; c < k; ++c) counts[c][c] = plan.samples_per_class;
        const std::size_t flipped = round_half_up(plan.noise_ratio * static_cast<double>(plan.samples_per_class));
        for (auto [a, b] : plan.pairs) {
            counts[a][a] -= flipped;
            counts[a][b] += flipped;
            counts[b][b] -= flipped;
            counts[b][a] += flipped;
        }
    }
    return counts;
}

CountMatrix observed_label_counts(const LabeledDataset& ds) {
    const auto& truth = ds.true_labels();
    CountMatrix counts(ds.num_classes(), std::vector<std::size_t>(ds.num_classes(), 0));
    for (std::size_t i = 0; i < ds.size(); ++i) ++counts[truth[i]][ds.noisy_labels()[i]];
    return counts;
}

Corrupted apply_dominant_noise(const LabeledDataset& ds, const NoisePlan& plan, std::uint64_t seed) {
    require(plan.kind == NoiseKind::Dominant, ErrorKind::Validation, "apply_dominant_noise: plan is not dominant");
    require(plan.num_classes == ds.num_classes(), ErrorKind::Shape, "plan and dataset disagree on k");
    const auto comp = dominant_composition(plan);
    const auto dom = plan.dominant_classes();
    const auto rec = plan.recessive_classes();
    const auto& truth = ds.true_labels();
    Rng rng(seed, "dominant-noise");

    std::vector<ClassIndex> new_label(ds.size(), 0);
    std::vector<bool> keep(ds.size(), false);
    auto members_by_truth = [&](ClassIndex c) {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < ds.size(); ++i)
            if (truth[i] == c) out.push_back(i);
        return out;
    };
    auto draw = [&](ClassIndex c, std::size_t count) {
        auto members = members_by_truth(c);
        require(members.size() >= count, ErrorKind::Validation,
                "class " + std::to_string(c) + " has " + std::to_string(members.size()) +
                    " samples, dominant composition needs " + std::to_string(count));
        std::vector<std::size_t> picked;
        for (std::size_t j : rng.sample_without_replacement(members.size(), count)) picked.push_back(members[j]);
        return picked;
    };

    for (std::size_t di = 0; di < dom.size(); ++di) {
        auto picked = draw(dom[di], comp.dominant_sampled);
        std::size_t pos = 0;
        for (std::size_t ri = 0; ri < rec.size(); ++ri)
            for (std::size_t t = 0; t < comp.transfer[ri][di]; ++t) {
                keep[picked[pos]] = true;
                new_label[picked[pos++]] = rec[ri];
            }
        for (; pos < picked.size(); ++pos) {
            keep[picked[pos]] = true;
            new_label[picked[pos]] = dom[di];
        }
    }
    for (ClassIndex r : rec)
        for (std::size_t i : draw(r, comp.recessive_sampled)) {
            keep[i] = true;
            new_label[i] = r;
        }

    std::size_t kept = static_cast<std::size_t>(std::count(keep.begin(), keep.end(), true));
    Matrix features(kept, ds.dim());
    std::vector<ClassIndex> noisy, true_out;
    noisy.reserve(kept);
    true_out.reserve(kept);
    for (std::size_t i = 0, o = 0; i < ds.size(); ++i) {
        if (!keep[i]) continue;
        std::copy(ds.features().row(i).begin(), ds.features().row(i).end(), features.row(o).begin());
        noisy.push_back(new_label[i]);
        true_out.push_back(truth[i]);
        ++o;
    }

    std::map<ClassIndex, ClassSet> sources;
    for (ClassIndex r : rec) sources[r] = ClassSet(dom.begin(), dom.end());
    return {LabeledDataset(std::move(features), std::move(noisy), std::move(true_out), ds.num_classes()),
            NoiseKnowledge(ds.num_classes(), std::move(sources), KnowledgeOrigin::GroundTruth)};
}

Corrupted apply_asymmetric_noise(const LabeledDataset& ds, const std::vector<ClassPair>& pairs, double ratio,
                                 std::uint64_t seed) {
    NoisePlan plan{NoiseKind::Asymmetric, ratio, pairs, ds.num_classes(), 1};
    plan.validate();
    Rng rng(seed, "asymmetric-noise");
    std::vector<ClassIndex> noisy = ds.noisy_labels();
    const auto view = ds.view();
    for (auto [a, b] : pairs) {
        for (auto [from, to] : {ClassPair{a, b}, ClassPair{b, a}}) {
            auto members = view.members_of(from);
            const std::size_t flipped = round_half_up(ratio * static_cast<double>(members.size()));
            for (std::size_t j : rng.sample_without_replacement(members.size(), flipped)) noisy[members[j]] = to;
        }
    }
    std::map<ClassIndex, ClassSet> sources;
    for (auto [a, b] : pairs) {
        sources[a].insert(b);
        sources[b].insert(a);
    }
    return {LabeledDataset(ds.features(), std::move(noisy), ds.true_labels(), ds.num_classes()),
            NoiseKnowledge(ds.num_classes(), std::move(sources), KnowledgeOrigin::GroundTruth)};
}

Corrupted apply_noise(const LabeledDataset& ds, const NoisePlan& plan, std::uint64_t seed) {
    if (plan.kind == NoiseKind::Dominant) return apply_dominant_noise(ds, plan, seed);
    return apply_asymmetric_noise(ds, plan.pairs, plan.noise_ratio, seed);
}

NoiseKnowledge perturb_knowledge(const NoiseKnowledge& knowledge, double missing_frac, double noisy_frac,
                                 std::uint64_t seed) {
    require(missing_frac >= 0.0 && missing_frac <= 1.0 && noisy_frac >= 0.0 && noisy_frac <= 1.0,
            ErrorKind::Validation, "perturbation fractions must lie in [0, 1]");
    require(missing_frac + noisy_frac <= 1.0 + 1e-12, ErrorKind::Validation,
            "missing_frac + noisy_frac must not exceed 1");
    const std::size_t k = knowledge.num_classes();
    std::map<ClassIndex, ClassSet> out;
    for (const auto& [c, true_sources] : knowledge.mapping()) {
        Rng rng(derive_seed(seed, "perturb-knowledge", c));
        const std::size_t s = true_sources.size();
        std::vector<ClassIndex> listed(true_sources.begin(), true_sources.end());

        const std::size_t remove = std::min(s, ceil_count(missing_frac * static_cast<double>(s)));
        std::vector<bool> dropped(s, false);
        for (std::size_t j : rng.sample_without_replacement(s, remove)) dropped[j] = true;
        std::vector<ClassIndex> remaining;
        for (std::size_t j = 0; j < s; ++j)
            if (!dropped[j]) remaining.push_back(listed[j]);

        const std::size_t replace = std::min(remaining.size(), ceil_count(noisy_frac * static_cast<double>(s)));
        std::vector<ClassIndex> spare;
        for (ClassIndex j = 0; j < k; ++j)
            if (j != c && !true_sources.contains(j)) spare.push_back(j);
        require(spare.size() >= replace, ErrorKind::Validation,
                "class " + std::to_string(c) + ": " + std::to_string(replace) +
                    " incorrect sources requested but only " + std::to_string(spare.size()) +
                    " non-source classes exist");
        const auto victims = rng.sample_without_replacement(remaining.size(), replace);
        const auto substitutes = rng.sample_without_replacement(spare.size(), replace);
        for (std::size_t t = 0; t < replace; ++t) remaining[victims[t]] = spare[substitutes[t]];

        out[c] = ClassSet(remaining.begin(), remaining.end());
    }
    return NoiseKnowledge(k, std::move(out), KnowledgeOrigin::Perturbed);
}

}  // namespace noisesel
