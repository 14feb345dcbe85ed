#include "noisesel/harness.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <functional>
#include <set>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "noisesel/io.hpp"
#include "noisesel/rng.hpp"

namespace noisesel {

using nlohmann::json;
using ojson = nlohmann::ordered_json;

std::string to_string(KnowledgeMode mode) {
    switch (mode) {
        case KnowledgeMode::None: return "none";
        case KnowledgeMode::GroundTruth: return "ground_truth";
        case KnowledgeMode::Perturbed: return "perturbed";
        case KnowledgeMode::FromDualT: return "dualt";
    }
    return "unknown";
}

KnowledgeMode knowledge_mode_from_string(const std::string& name) {
    for (auto m : {KnowledgeMode::None, KnowledgeMode::GroundTruth, KnowledgeMode::Perturbed, KnowledgeMode::FromDualT})
        if (to_string(m) == name) return m;
    fail(ErrorKind::Validation, "unknown knowledge mode '" + name + "' (expected none, ground_truth, perturbed or dualt)");
}

void ExperimentConfig::validate() const {
    cluster.validate();
    NoisePlan plan = noise;
    plan.num_classes = cluster.num_classes;
    plan.samples_per_class = cluster.samples_per_class;
    plan.validate();
    detector.validate();
    augmentation.validate();
    require(training.epochs >= 1, ErrorKind::Validation, "training.epochs must be >= 1");
    require(training.warmup_epochs < training.epochs, ErrorKind::Validation,
            "training.warmup_epochs must be smaller than training.epochs");
    require(training.learning_rate > 0.0, ErrorKind::Validation, "training.learning_rate must be > 0");
    require(training.batch_size >= 1, ErrorKind::Validation, "training.batch_size must be >= 1");
    require(!seeds.empty(), ErrorKind::Validation, "at least one seed is required");
    require(test_per_class >= 1, ErrorKind::Validation, "test_per_class must be >= 1");
    const auto& kc = knowledge;
    require(kc.missing_frac >= 0.0 && kc.missing_frac <= 1.0 && kc.noisy_frac >= 0.0 && kc.noisy_frac <= 1.0 &&
                kc.missing_frac + kc.noisy_frac <= 1.0,
            ErrorKind::Validation, "knowledge fractions must lie in [0, 1] and sum to at most 1");
    require(kc.dualt_threshold >= 0.0, ErrorKind::Validation, "knowledge.dualt_threshold must be >= 0");
    require(kc.dualt_top_m >= 1, ErrorKind::Validation, "knowledge.dualt_top_m must be >= 1");
    require(kc.dualt_anchor_quantile >= 0.0 && kc.dualt_anchor_quantile < 1.0, ErrorKind::Validation,
            "knowledge.dualt_anchor_quantile must lie in [0, 1)");
}

// ---- config parsing ----

namespace {

class ObjectReader {
public:
    ObjectReader(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
        require(obj_.is_object(), ErrorKind::Validation, "config: '" + display() + "' must be an object");
    }

    template <typename T>
    void get(const char* key, T& out) {
        if (!obj_.contains(key)) return;
        seen_.insert(key);
        const json& v = obj_.at(key);
        const std::string where = path_ + key;
        if constexpr (std::is_same_v<T, bool>) {
            require(v.is_boolean(), ErrorKind::Validation, "config: '" + where + "' must be a boolean");
        } else if constexpr (std::is_integral_v<T>) {
            require(v.is_number_unsigned(), ErrorKind::Validation, "config: '" + where + "' must be a non-negative integer");
        } else if constexpr (std::is_floating_point_v<T>) {
            require(v.is_number(), ErrorKind::Validation, "config: '" + where + "' must be a number");
        } else if constexpr (std::is_same_v<T, std::string>) {
            require(v.is_string(), ErrorKind::Validation, "config: '" + where + "' must be a string");
        }
        try {
            out = v.get<T>();
        } catch (const json::exception& e) {
            fail(ErrorKind::Validation, "config: '" + where + "': " + e.what());
        }
    }

    const json* child(const char* key) {
        if (!obj_.contains(key)) return nullptr;
        seen_.insert(key);
        return &obj_.at(key);
    }

    std::string path(const char* key) const { return path_ + key + "."; }
    std::string where(const char* key) const { return path_ + key; }

    void finish() const {
        for (const auto& item : obj_.items())
            require(seen_.contains(item.key()), ErrorKind::Validation,
                    "config: unknown key '" + path_ + item.key() + "'");
    }

private:
    std::string display() const { return path_.empty() ? "<root>" : path_.substr(0, path_.size() - 1); }

    const json& obj_;
    std::string path_;
    std::set<std::string> seen_;
};

std::vector<ClassPair> read_pairs(const json& v, const std::string& where) {
    require(v.is_array(), ErrorKind::Validation, "config: '" + where + "' must be a list of [a, b] pairs");
    std::vector<ClassPair> out;
    for (const auto& p : v) {
        require(p.is_array() && p.size() == 2 && p[0].is_number_unsigned() && p[1].is_number_unsigned(),
                ErrorKind::Validation, "config: '" + where + "' entries must be [a, b] class pairs");
        out.emplace_back(p[0].get<ClassIndex>(), p[1].get<ClassIndex>());
    }
    return out;
}

void read_cluster(const json& v, ClusterSpec& c) {
    ObjectReader r(v, "cluster.");
    r.get("num_classes", c.num_classes);
    r.get("dim", c.dim);
    r.get("samples_per_class", c.samples_per_class);
    r.get("separation", c.separation);
    if (const json* p = r.child("confusable_pairs")) c.confusable_pairs = read_pairs(*p, "cluster.confusable_pairs");
    r.finish();
}

void read_noise(const json& v, NoisePlan& n) {
    ObjectReader r(v, "noise.");
    std::string kind = n.kind == NoiseKind::Dominant ? "dominant" : "asymmetric";
    r.get("kind", kind);
    require(kind == "dominant" || kind == "asymmetric", ErrorKind::Validation,
            "config: noise.kind must be 'dominant' or 'asymmetric'");
    n.kind = kind == "dominant" ? NoiseKind::Dominant : NoiseKind::Asymmetric;
    r.get("ratio", n.noise_ratio);
    if (const json* p = r.child("pairs")) n.pairs = read_pairs(*p, "noise.pairs");
    r.finish();
}

void read_detector(const json& v, DetectorConfig& d) {
    ObjectReader r(v, "detector.");
    std::string method = to_string(d.method);
    r.get("method", method);
    d.method = detector_method_from_string(method);
    r.get("fl_ratio", d.fl_ratio);
    if (const json* g = r.child("crust_gamma")) {
        if (g->is_null()) {
            d.crust_gamma.reset();
        } else {
            require(g->is_number_unsigned(), ErrorKind::Validation,
                    "config: 'detector.crust_gamma' must be null or a positive integer");
            d.crust_gamma = g->get<std::size_t>();
        }
    }
    std::string loss = d.crust_loss == GradientLoss::SquaredError ? "squared" : "cross_entropy";
    r.get("crust_loss", loss);
    require(loss == "squared" || loss == "cross_entropy", ErrorKind::Validation,
            "config: detector.crust_loss must be 'squared' or 'cross_entropy'");
    d.crust_loss = loss == "squared" ? GradientLoss::SquaredError : GradientLoss::CrossEntropy;
    std::string fine = d.fine_features == FineFeatures::Input ? "input" : "probabilities";
    r.get("fine_features", fine);
    require(fine == "input" || fine == "probabilities", ErrorKind::Validation,
            "config: detector.fine_features must be 'input' or 'probabilities'");
    d.fine_features = fine == "input" ? FineFeatures::Input : FineFeatures::Probabilities;
    r.get("gmm_iters", d.gmm_iters);
    r.get("gmm_tol", d.gmm_tol);
    if (const json* c = r.child("jsd_cutoff")) {
        if (c->is_string() && c->get<std::string>() == "class_mean") {
            d.jsd_cutoff_mode = JsdCutoffMode::ClassMean;
        } else {
            require(c->is_number(), ErrorKind::Validation,
                    "config: 'detector.jsd_cutoff' must be \"class_mean\" or a number");
            d.jsd_cutoff_mode = JsdCutoffMode::Fixed;
            d.jsd_cutoff = c->get<double>();
        }
    }
    r.get("dist_lambda", d.dist_lambda);
    r.get("sft_window", d.sft_window);
    r.finish();
}

void read_knowledge(const json& v, KnowledgeConfig& k) {
    ObjectReader r(v, "knowledge.");
    std::string mode = to_string(k.mode);
    r.get("mode", mode);
    k.mode = knowledge_mode_from_string(mode);
    r.get("missing_frac", k.missing_frac);
    r.get("noisy_frac", k.noisy_frac);
    r.get("dualt_threshold", k.dualt_threshold);
    r.get("dualt_top_m", k.dualt_top_m);
    r.get("dualt_anchor_quantile", k.dualt_anchor_quantile);
    r.finish();
}

void read_augmentation(const json& v, AugmentationPolicy& a) {
    ObjectReader r(v, "augmentation.");
    r.get("weak_sigma", a.weak_sigma);
    r.get("strong_sigma", a.strong_sigma);
    r.get("strong_dropout", a.strong_dropout);
    r.finish();
}

void read_training(const json& v, TrainingConfig& t) {
    ObjectReader r(v, "training.");
    r.get("epochs", t.epochs);
    r.get("warmup_epochs", t.warmup_epochs);
    r.get("learning_rate", t.learning_rate);
    r.get("batch_size", t.batch_size);
    r.get("soft_weighting", t.soft_weighting);
    r.finish();
}

void apply_override(json& doc, const std::string& assignment) {
    const auto eq = assignment.find('=');
    require(eq != std::string::npos && eq > 0, ErrorKind::Validation,
            "override '" + assignment + "' must look like dotted.key=value");
    const std::string key = assignment.substr(0, eq), text = assignment.substr(eq + 1);
    json value;
    try {
        value = json::parse(text);
    } catch (const json::exception&) {
        value = text;
    }
    json* node = &doc;
    std::size_t start = 0;
    while (true) {
        const auto dot = key.find('.', start);
        const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        require(!part.empty(), ErrorKind::Validation, "override key '" + key + "' has an empty component");
        require(node->is_object(), ErrorKind::Validation, "override '" + key + "' descends into a non-object");
        if (dot == std::string::npos) {
            (*node)[part] = value;
            return;
        }
        node = &(*node)[part];
        if (node->is_null()) *node = json::object();
        start = dot + 1;
    }
}

ojson pairs_json(const std::vector<ClassPair>& pairs) {
    ojson out = ojson::array();
    for (const auto& [a, b] : pairs) out.push_back({a, b});
    return out;
}

}  // namespace

ExperimentConfig parse_config(const std::string& json_text, const std::vector<std::string>& overrides) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::exception& e) {
        fail(ErrorKind::Validation, std::string("config is not valid JSON: ") + e.what());
    }
    require(doc.is_object(), ErrorKind::Validation, "config must be a JSON object");
    for (const auto& o : overrides) apply_override(doc, o);

    ExperimentConfig cfg;
    ObjectReader r(doc, "");
    int version = 0;
    require(doc.contains("version"), ErrorKind::Validation, "config: missing 'version'");
    r.get("version", version);
    require(version == kConfigVersion, ErrorKind::Validation,
            "config: unsupported version " + std::to_string(version) + " (expected 1)");
    if (const json* v = r.child("cluster")) read_cluster(*v, cfg.cluster);
    if (const json* v = r.child("noise")) read_noise(*v, cfg.noise);
    if (const json* v = r.child("detector")) read_detector(*v, cfg.detector);
    if (const json* v = r.child("knowledge")) read_knowledge(*v, cfg.knowledge);
    if (const json* v = r.child("augmentation")) read_augmentation(*v, cfg.augmentation);
    if (const json* v = r.child("training")) read_training(*v, cfg.training);
    r.get("test_per_class", cfg.test_per_class);
    r.get("paired", cfg.paired);
    r.get("dump_selection", cfg.dump_selection);
    if (const json* s = r.child("seeds")) {
        require(s->is_array(), ErrorKind::Validation, "config: 'seeds' must be a list of integers");
        cfg.seeds.clear();
        for (const auto& e : *s) {
            require(e.is_number_unsigned(), ErrorKind::Validation, "config: 'seeds' entries must be non-negative integers");
            cfg.seeds.push_back(e.get<std::uint64_t>());
        }
    }
    r.get("output_dir", cfg.output_dir);
    r.finish();
    cfg.noise.num_classes = cfg.cluster.num_classes;
    cfg.noise.samples_per_class = cfg.cluster.samples_per_class;
    cfg.validate();
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
    return parse_config(io::read_text(path), overrides);
}

std::string config_to_json(const ExperimentConfig& cfg) {
    const auto& d = cfg.detector;
    ojson detector = {{"method", to_string(d.method)},
                      {"fl_ratio", d.fl_ratio},
                      {"crust_gamma", d.crust_gamma ? ojson(*d.crust_gamma) : ojson(nullptr)},
                      {"crust_loss", d.crust_loss == GradientLoss::SquaredError ? "squared" : "cross_entropy"},
                      {"fine_features", d.fine_features == FineFeatures::Input ? "input" : "probabilities"},
                      {"gmm_iters", d.gmm_iters},
                      {"gmm_tol", d.gmm_tol},
                      {"jsd_cutoff", d.jsd_cutoff_mode == JsdCutoffMode::ClassMean ? ojson("class_mean")
                                                                                    : ojson(d.jsd_cutoff)},
                      {"dist_lambda", d.dist_lambda},
                      {"sft_window", d.sft_window}};
    const auto& k = cfg.knowledge;
    ojson doc = {
        {"version", kConfigVersion},
        {"cluster",
         {{"num_classes", cfg.cluster.num_classes},
          {"dim", cfg.cluster.dim},
          {"samples_per_class", cfg.cluster.samples_per_class},
          {"separation", cfg.cluster.separation},
          {"confusable_pairs", pairs_json(cfg.cluster.confusable_pairs)}}},
        {"noise",
         {{"kind", cfg.noise.kind == NoiseKind::Dominant ? "dominant" : "asymmetric"},
          {"ratio", cfg.noise.noise_ratio},
          {"pairs", pairs_json(cfg.noise.pairs)}}},
        {"detector", detector},
        {"knowledge",
         {{"mode", to_string(k.mode)},
          {"missing_frac", k.missing_frac},
          {"noisy_frac", k.noisy_frac},
          {"dualt_threshold", k.dualt_threshold},
          {"dualt_top_m", k.dualt_top_m},
          {"dualt_anchor_quantile", k.dualt_anchor_quantile}}},
        {"augmentation",
         {{"weak_sigma", cfg.augmentation.weak_sigma},
          {"strong_sigma", cfg.augmentation.strong_sigma},
          {"strong_dropout", cfg.augmentation.strong_dropout}}},
        {"training",
         {{"epochs", cfg.training.epochs},
          {"warmup_epochs", cfg.training.warmup_epochs},
          {"learning_rate", cfg.training.learning_rate},
          {"batch_size", cfg.training.batch_size},
          {"soft_weighting", cfg.training.soft_weighting}}},
        {"test_per_class", cfg.test_per_class},
        {"paired", cfg.paired},
        {"dump_selection", cfg.dump_selection},
        {"seeds", cfg.seeds},
        {"output_dir", cfg.output_dir}};
    return doc.dump(2) + "\n";
}

// ---- runs ----

namespace {

NoisePlan resolved_plan(const ExperimentConfig& cfg) {
    NoisePlan plan = cfg.noise;
    plan.num_classes = cfg.cluster.num_classes;
    plan.samples_per_class = cfg.cluster.samples_per_class;
    return plan;
}

std::string plan_label(const NoisePlan& plan) {
    return std::string(plan.kind == NoiseKind::Dominant ? "dominant" : "asymmetric") +
           " r=" + fixed(plan.noise_ratio, 2);
}

/// Runs jobs [0, count) on up to `jobs` threads; rethrows the first failure in
/// job order.
void parallel_for(std::size_t count, std::size_t jobs, const std::function<void(std::size_t)>& body) {
    std::vector<std::exception_ptr> errors(count);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < count; i = next++) {
            try {
                body(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const std::size_t threads = std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(count, 1));
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

/// Seed data plus the warm-up model and prediction bank every branch starts from.
struct SeedContext {
    SeedData data;
    SoftmaxModel warm;
    PredictionBank bank;
};

Matrix fine_features(const DetectorConfig& d, const SoftmaxModel& model, const Matrix& x) {
    if (d.method != DetectorMethod::Fine || d.fine_features == FineFeatures::Input) return x;
    return model.predict(x);
}

SoftmaxModel warm_up(const TrainingConfig& training, const DatasetView& view, PredictionBank& bank,
                     std::uint64_t seed) {
    SoftmaxModel model(view.num_classes(), view.dim(), training.learning_rate);
    const std::vector<double> ones(view.size(), 1.0);
    for (std::size_t e = 0; e < training.warmup_epochs; ++e) {
        train_epoch(model, view, ones, derive_seed(seed, "train-shuffle", e), training.batch_size);
        record_epoch(bank, model, view.features());
    }
    return model;
}

SeedContext prepare_seed(const ExperimentConfig& cfg, std::uint64_t seed) {
    SeedData data = synthesize(cfg, seed);
    PredictionBank bank(data.train.size(), cfg.detector.sft_window);
    const DatasetView view = data.train.view();
    SoftmaxModel warm = warm_up(cfg.training, view, bank, seed);
    return {std::move(data), std::move(warm), std::move(bank)};
}

struct ResolvedKnowledge {
    NoiseKnowledge knowledge;
    std::optional<DualTEstimate> dual_t;
};

ResolvedKnowledge resolve_knowledge(const ExperimentConfig& cfg, const SeedContext& ctx) {
    const std::size_t k = cfg.cluster.num_classes;
    const auto& kc = cfg.knowledge;
    switch (kc.mode) {
        case KnowledgeMode::None: return {NoiseKnowledge::empty(k), std::nullopt};
        case KnowledgeMode::GroundTruth: return {ctx.data.true_knowledge, std::nullopt};
        case KnowledgeMode::Perturbed:
            return {perturb_knowledge(ctx.data.true_knowledge, kc.missing_frac, kc.noisy_frac,
                                      derive_seed(ctx.data.seed, "perturbation")),
                    std::nullopt};
        case KnowledgeMode::FromDualT: {
            const DatasetView view = ctx.data.train.view();
            DualTEstimate est =
                estimate_dual_t(view, ctx.warm.predict(ctx.data.train.features()), kc.dualt_anchor_quantile);
            NoiseKnowledge kn = knowledge_from_transition(est.t, kc.dualt_threshold, kc.dualt_top_m);
            return {std::move(kn), std::move(est)};
        }
    }
    return {NoiseKnowledge::empty(k), std::nullopt};
}

struct BranchSink {
    std::ostringstream* log = nullptr;
    std::optional<std::filesystem::path> dump_dir;  // selection CSVs go here when set
};

constexpr std::size_t kCollapseEpochs = 3;

BranchOutcome run_branch(const ExperimentConfig& cfg, const SeedContext& ctx, const NoiseKnowledge& knowledge,
                         bool knowledge_enabled, const std::string& name, const BranchSink& sink) {
    const std::uint64_t seed = ctx.data.seed;
    const LabeledDataset& train = ctx.data.train;
    const DatasetView view = train.view();
    const std::size_t k = train.num_classes();
    DetectorConfig dcfg = cfg.detector;
    dcfg.knowledge_enabled = knowledge_enabled;

    SoftmaxModel model = ctx.warm;
    PredictionBank bank = ctx.bank;
    DistState dist = DistState::zeros(train.size());
    BranchOutcome out;
    out.name = name;
    out.knowledge_enabled = knowledge_enabled;
    std::set<std::string> seen_warnings;

    std::vector<std::size_t> class_size(k, 0);
    for (ClassIndex c : train.noisy_labels()) ++class_size[c];
    std::vector<std::size_t> empty_streak(k, 0);

    for (std::size_t e = cfg.training.warmup_epochs; e < cfg.training.epochs; ++e) {
        std::optional<AugmentedConfidences> conf;
        if (dcfg.method == DetectorMethod::Disc)
            conf = augmented_confidences(model, train.features(), cfg.augmentation,
                                         derive_seed(seed, "augmentation", e));
        const Matrix fine_x = fine_features(dcfg, model, train.features());
        ModelArtifacts art;
        art.model = &model;
        art.features = &fine_x;
        art.bank = &bank;
        art.confidences = conf ? &*conf : nullptr;
        art.dist_state = &dist;
        DetectionResult det = run_detector(dcfg, view, art, knowledge);
        for (auto& w : det.warnings)
            if (seen_warnings.insert(w).second) {
                out.warnings.push_back(w);
                if (sink.log) *sink.log << "seed " << seed << " " << name << " epoch " << e << " warning: " << w << '\n';
            }

        std::vector<std::size_t> picked(k, 0);
        for (std::size_t i = 0; i < train.size(); ++i) picked[train.noisy_labels()[i]] += det.scores.selected()[i];
        for (ClassIndex c = 0; c < k; ++c) {
            empty_streak[c] = class_size[c] > 0 && picked[c] == 0 ? empty_streak[c] + 1 : 0;
            if (empty_streak[c] >= kCollapseEpochs) {
                const std::string msg = "class collapse: detector " + to_string(dcfg.method) + " (" + name +
                                        ", seed " + std::to_string(seed) + ") selected no samples of class " +
                                        std::to_string(c) + " for " + std::to_string(kCollapseEpochs) +
                                        " consecutive epochs ending at epoch " + std::to_string(e);
                if (sink.log) *sink.log << msg << '\n';
                fail(ErrorKind::Abort, msg);
            }
        }

        std::vector<double> mask(train.size(), 0.0);
        for (std::size_t i = 0; i < train.size(); ++i)
            if (det.scores.selected()[i]) mask[i] = cfg.training.soft_weighting ? det.scores.prob_clean()[i] : 1.0;
        if (sink.dump_dir) {
            std::ostringstream csv;
            io::write_scores_csv(det.scores, csv);
            char file[64];
            std::snprintf(file, sizeof file, "selection_%s_%03zu.csv", name.c_str(), e);
            io::write_text(*sink.dump_dir / file, csv.str());
        }

        out.selection = selection_metrics(det.scores, train);
        const double loss = train_epoch(model, view, mask, derive_seed(seed, "train-shuffle", e), cfg.training.batch_size);
        record_epoch(bank, model, train.features());
        out.epochs.push_back({e, loss, out.selection.selected_count, out.selection.precision, out.selection.recall});
        if (sink.log)
            *sink.log << "seed " << seed << " " << name << " epoch " << e << " loss " << io::format_double(loss)
                      << " selected " << out.selection.selected_count << " precision "
                      << io::format_double(out.selection.precision) << " recall "
                      << io::format_double(out.selection.recall) << '\n';
    }
    out.test_accuracy = accuracy(model, ctx.data.test);
    out.confusion = confusion_matrix(model, ctx.data.test);
    if (sink.log)
        *sink.log << "seed " << seed << " " << name << " test_accuracy " << io::format_double(out.test_accuracy) << '\n';
    return out;
}

ojson selection_json(const SelectionReport& r) {
    ojson per_class = ojson::array();
    for (const auto& pc : r.per_class)
        per_class.push_back({{"label", pc.label},
                             {"selected", pc.selected},
                             {"clean", pc.clean},
                             {"precision", pc.precision},
                             {"recall", pc.recall}});
    return {{"precision", r.precision},         {"recall", r.recall},
            {"selected_count", r.selected_count}, {"clean_count", r.clean_count},
            {"empty_selection", r.empty_selection}, {"per_class", per_class}};
}

ojson branch_json(const BranchOutcome& b) {
    ojson epochs = ojson::array();
    for (const auto& e : b.epochs)
        epochs.push_back({{"epoch", e.epoch},
                          {"loss", e.loss},
                          {"selected", e.selected},
                          {"precision", e.precision},
                          {"recall", e.recall}});
    return {{"name", b.name},
            {"knowledge_enabled", b.knowledge_enabled},
            {"test_accuracy", b.test_accuracy},
            {"selection", selection_json(b.selection)},
            {"epochs", epochs},
            {"warnings", b.warnings}};
}

ojson seed_json(const SeedOutcome& s) {
    ojson branches = ojson::array();
    for (const auto& b : s.branches) branches.push_back(branch_json(b));
    ojson doc = {{"seed", s.seed},
                 {"knowledge", {{"origin", to_string(s.knowledge.origin())}, {"entries", s.knowledge.entry_count()}}},
                 {"branches", branches}};
    if (s.absorption)
        doc["absorption"] = {{"acc_base", s.absorption->acc_base},
                             {"acc_plus_k", s.absorption->acc_plus_k},
                             {"absorption", s.absorption->absorption}};
    return doc;
}

std::string confusion_csv_for(const std::vector<BranchOutcome>& branches) {
    std::ostringstream out;
    const std::size_t k = branches.empty() ? 0 : branches.front().confusion.counts.size();
    out << "branch,true_class";
    for (std::size_t j = 0; j < k; ++j) out << ",pred_" << j;
    out << '\n';
    for (const auto& b : branches)
        for (std::size_t i = 0; i < k; ++i) {
            out << b.name << ',' << i;
            for (std::size_t v : b.confusion.counts[i]) out << ',' << v;
            out << '\n';
        }
    return out.str();
}

ojson summary_json(const std::vector<double>& values) {
    const Summary s = summarize(values);
    return {{"mean", s.mean}, {"sd", s.sd}, {"n", s.count}};
}

}  // namespace

SeedData synthesize(const ExperimentConfig& cfg, std::uint64_t seed) {
    ClusterSpec spec = cfg.cluster;
    spec.seed = derive_seed(seed, "data");
    const Matrix means = class_means(spec);
    const LabeledDataset clean = sample_clusters(spec, means, spec.samples_per_class, derive_seed(spec.seed, "cluster-samples"));
    Corrupted noisy = apply_noise(clean, resolved_plan(cfg), derive_seed(seed, "noise"));
    LabeledDataset test = sample_clusters(spec, means, cfg.test_per_class, derive_seed(seed, "test"));
    return {seed, std::move(noisy.dataset), std::move(test), std::move(noisy.knowledge)};
}

const BranchOutcome* SeedOutcome::branch(const std::string& name) const {
    for (const auto& b : branches)
        if (b.name == name) return &b;
    return nullptr;
}

ExperimentOutcome run_experiment(const ExperimentConfig& cfg, std::size_t jobs) {
    cfg.validate();
    const bool write = !cfg.output_dir.empty();
    const std::filesystem::path root = cfg.output_dir;
    const NoisePlan plan = resolved_plan(cfg);
    if (write) io::write_text(root / "config.json", config_to_json(cfg));

    ExperimentOutcome outcome;
    outcome.seeds.resize(cfg.seeds.size());
    std::vector<std::string> logs(cfg.seeds.size());
    parallel_for(cfg.seeds.size(), jobs, [&](std::size_t idx) {
        const std::uint64_t seed = cfg.seeds[idx];
        const std::filesystem::path dir = root / ("seed_" + std::to_string(seed));
        std::ostringstream log;
        BranchSink sink{&log, std::nullopt};
        if (write && cfg.dump_selection) sink.dump_dir = dir;
        try {
            SeedContext ctx = prepare_seed(cfg, seed);
            log << "seed " << seed << " samples " << ctx.data.train.size() << " warmup_epochs "
                << cfg.training.warmup_epochs << '\n';
            ResolvedKnowledge rk = resolve_knowledge(cfg, ctx);
            if (write) {
                io::save_dataset_csv(ctx.data.train, dir / "dataset.csv");
                io::save_knowledge_json(rk.knowledge, dir / "knowledge.json");
                save_checkpoint(ctx.warm, dir / "warmup.nslm");
                if (rk.dual_t) io::write_text(dir / "transition.json", io::transition_to_json(rk.dual_t->t));
            }
            SeedOutcome& so = outcome.seeds[idx];
            so.seed = seed;
            so.knowledge = rk.knowledge;
            const bool has_knowledge = cfg.knowledge.mode != KnowledgeMode::None;
            if (!has_knowledge || cfg.paired)
                so.branches.push_back(run_branch(cfg, ctx, rk.knowledge, false, "base", sink));
            if (has_knowledge) so.branches.push_back(run_branch(cfg, ctx, rk.knowledge, true, "plus_k", sink));
            if (so.branches.size() == 2)
                so.absorption = absorption(so.branches[0].test_accuracy, so.branches[1].test_accuracy,
                                           to_string(cfg.detector.method), plan_label(plan), seed);
            if (write) {
                io::write_text(dir / "confusion.csv", confusion_csv_for(so.branches));
                io::write_text(dir / "metrics.json", seed_json(so).dump(2) + "\n");
            }
        } catch (...) {
            if (write) io::write_text(dir / "log.txt", log.str());
            throw;
        }
        if (write) io::write_text(dir / "log.txt", log.str());
        logs[idx] = log.str();
    });

    if (write) {
        ojson seeds = ojson::array();
        std::vector<double> base, plus, gain;
        for (const auto& s : outcome.seeds) {
            seeds.push_back(seed_json(s));
            if (const auto* b = s.branch("base")) base.push_back(b->test_accuracy);
            if (const auto* p = s.branch("plus_k")) plus.push_back(p->test_accuracy);
            if (s.absorption) gain.push_back(s.absorption->absorption);
        }
        ojson summary = ojson::object();
        if (!base.empty()) summary["base"] = summary_json(base);
        if (!plus.empty()) summary["plus_k"] = summary_json(plus);
        if (!gain.empty()) summary["absorption"] = summary_json(gain);
        ojson doc = {{"detector", to_string(cfg.detector.method)},
                     {"noise_plan", plan_label(plan)},
                     {"knowledge_mode", to_string(cfg.knowledge.mode)},
                     {"paired", !gain.empty()},
                     {"summary", summary},
                     {"seeds", seeds}};
        io::write_text(root / "metrics.json", doc.dump(2) + "\n");
        std::string all;
        for (const auto& l : logs) all += l;
        io::write_text(root / "log.txt", all);
    }
    return outcome;
}

// ---- sweeps ----

std::vector<SweepCell> sweep_grid(const std::vector<double>& missing, const std::vector<double>& noisy) {
    const std::vector<double> ms = missing.empty() ? std::vector<double>{0.0} : missing;
    const std::vector<double> ns = noisy.empty() ? std::vector<double>{0.0} : noisy;
    std::vector<SweepCell> cells;
    for (double n : ns)
        for (double m : ms) {
            require(m >= 0.0 && n >= 0.0 && m + n <= 1.0, ErrorKind::Validation,
                    "sweep grid cell (" + fixed(m, 2) + ", " + fixed(n, 2) + ") needs fractions summing to at most 1");
            cells.push_back({m, n});
        }
    return cells;
}

SweepOutcome sweep_knowledge_quality(const ExperimentConfig& cfg, const std::vector<SweepCell>& cells,
                                     std::size_t jobs) {
    cfg.validate();
    require(!cells.empty(), ErrorKind::Validation, "sweep needs at least one grid cell");
    for (const auto& c : cells)
        require(c.missing >= 0.0 && c.noisy >= 0.0 && c.missing + c.noisy <= 1.0, ErrorKind::Validation,
                "sweep cell fractions must be nonnegative and sum to at most 1");
    const std::size_t ns = cfg.seeds.size();
    std::vector<std::optional<SeedContext>> contexts(ns);
    parallel_for(ns, jobs, [&](std::size_t s) { contexts[s] = prepare_seed(cfg, cfg.seeds[s]); });

    SweepOutcome out;
    out.seeds = cfg.seeds;
    out.cells = cells;
    out.accuracy.assign(cells.size(), std::vector<double>(ns, 0.0));
    out.no_knowledge.assign(ns, 0.0);
    out.full_knowledge.assign(ns, 0.0);
    // Job layout: cell-major, then the two anchors, each over seeds.
    const std::size_t rows = cells.size() + 2;
    parallel_for(rows * ns, jobs, [&](std::size_t job) {
        const std::size_t row = job / ns, s = job % ns;
        const SeedContext& ctx = *contexts[s];
        const NoiseKnowledge& truth = ctx.data.true_knowledge;
        const BranchSink sink{};
        if (row < cells.size()) {
            const NoiseKnowledge kn = perturb_knowledge(truth, cells[row].missing, cells[row].noisy,
                                                        derive_seed(ctx.data.seed, "perturbation"));
            out.accuracy[row][s] = run_branch(cfg, ctx, kn, true, "plus_k", sink).test_accuracy;
        } else if (row == cells.size()) {
            out.no_knowledge[s] = run_branch(cfg, ctx, truth, false, "base", sink).test_accuracy;
        } else {
            out.full_knowledge[s] = run_branch(cfg, ctx, truth, true, "plus_k", sink).test_accuracy;
        }
    });

    if (!cfg.output_dir.empty()) {
        const std::filesystem::path root = cfg.output_dir;
        io::write_text(root / "config.json", config_to_json(cfg));
        std::ostringstream csv;
        csv << "row,missing_frac,noisy_frac,seed,accuracy\n";
        for (std::size_t c = 0; c < cells.size(); ++c)
            for (std::size_t s = 0; s < ns; ++s)
                csv << "cell," << io::format_double(cells[c].missing) << ',' << io::format_double(cells[c].noisy)
                    << ',' << cfg.seeds[s] << ',' << io::format_double(out.accuracy[c][s]) << '\n';
        for (std::size_t s = 0; s < ns; ++s)
            csv << "no_knowledge,,," << cfg.seeds[s] << ',' << io::format_double(out.no_knowledge[s]) << '\n';
        for (std::size_t s = 0; s < ns; ++s)
            csv << "full_knowledge,,," << cfg.seeds[s] << ',' << io::format_double(out.full_knowledge[s]) << '\n';
        io::write_text(root / "sweep.csv", csv.str());
        io::write_text(root / "sweep.txt", sweep_table(out));
        ojson cells_json = ojson::array();
        for (std::size_t c = 0; c < cells.size(); ++c)
            cells_json.push_back({{"missing_frac", cells[c].missing},
                                  {"noisy_frac", cells[c].noisy},
                                  {"accuracy", out.accuracy[c]},
                                  {"summary", summary_json(out.accuracy[c])}});
        ojson doc = {{"detector", to_string(cfg.detector.method)},
                     {"seeds", cfg.seeds},
                     {"cells", cells_json},
                     {"no_knowledge", {{"accuracy", out.no_knowledge}, {"summary", summary_json(out.no_knowledge)}}},
                     {"full_knowledge",
                      {{"accuracy", out.full_knowledge}, {"summary", summary_json(out.full_knowledge)}}}};
        io::write_text(root / "sweep.json", doc.dump(2) + "\n");
    }
    return out;
}

std::string sweep_table(const SweepOutcome& sweep) {
    std::vector<double> ms, ns;
    for (const auto& c : sweep.cells) {
        if (std::find(ms.begin(), ms.end(), c.missing) == ms.end()) ms.push_back(c.missing);
        if (std::find(ns.begin(), ns.end(), c.noisy) == ns.end()) ns.push_back(c.noisy);
    }
    auto cell_text = [](const std::vector<double>& v) {
        const Summary s = summarize(v);
        return fixed(100.0 * s.mean, 2) + " +- " + fixed(100.0 * s.sd, 2);
    };
    std::vector<std::string> header = {"NK \\ MK"};
    for (double m : ms) header.push_back(fixed(m, 2));
    std::vector<std::vector<std::string>> rows;
    for (double n : ns) {
        std::vector<std::string> row = {fixed(n, 2)};
        for (double m : ms) {
            std::string text = "-";
            for (std::size_t c = 0; c < sweep.cells.size(); ++c)
                if (sweep.cells[c].missing == m && sweep.cells[c].noisy == n) text = cell_text(sweep.accuracy[c]);
            row.push_back(text);
        }
        rows.push_back(std::move(row));
    }
    std::string out = "test accuracy (%), mean +- sd over " + std::to_string(sweep.seeds.size()) + " seed(s)\n";
    out += render_table(header, rows);
    out += "no knowledge:   " + cell_text(sweep.no_knowledge) + "\n";
    out += "full knowledge: " + cell_text(sweep.full_knowledge) + "\n";
    return out;
}

// ---- single-shot helpers ----

SelectionOutcome select_on_dataset(const ExperimentConfig& cfg, const LabeledDataset& data,
                                   const NoiseKnowledge* knowledge, std::uint64_t seed) {
    cfg.detector.validate();
    cfg.augmentation.validate();
    const DatasetView view = data.view();
    PredictionBank bank(data.size(), cfg.detector.sft_window);
    const SoftmaxModel model = warm_up(cfg.training, view, bank, seed);
    DetectorConfig dcfg = cfg.detector;
    dcfg.knowledge_enabled = knowledge != nullptr;
    const NoiseKnowledge none = NoiseKnowledge::empty(data.num_classes());
    std::optional<AugmentedConfidences> conf;
    if (dcfg.method == DetectorMethod::Disc)
        conf = augmented_confidences(model, data.features(), cfg.augmentation,
                                     derive_seed(seed, "augmentation", cfg.training.warmup_epochs));
    DistState dist = DistState::zeros(data.size());
    const Matrix fine_x = fine_features(dcfg, model, data.features());
    ModelArtifacts art{&model, &fine_x, &bank, conf ? &*conf : nullptr, &dist};
    DetectionResult det = run_detector(dcfg, view, art, knowledge ? *knowledge : none);
    return {std::move(det.scores), std::move(det.warnings)};
}

DualTEstimate estimate_on_dataset(const ExperimentConfig& cfg, const LabeledDataset& data, std::uint64_t seed) {
    const DatasetView view = data.view();
    PredictionBank bank(data.size(), cfg.detector.sft_window);
    const SoftmaxModel model = warm_up(cfg.training, view, bank, seed);
    return estimate_dual_t(view, model.predict(data.features()), cfg.knowledge.dualt_anchor_quantile);
}

// ---- reports ----

std::string render_report(const std::filesystem::path& run_dir) {
    std::vector<std::string> missing;
    if (!std::filesystem::is_directory(run_dir)) missing.push_back(run_dir.string() + " (directory)");
    else if (!std::filesystem::exists(run_dir / "metrics.json")) missing.push_back((run_dir / "metrics.json").string());
    if (!missing.empty()) {
        std::string msg = "report: missing artifacts:";
        for (const auto& m : missing) msg += " " + m;
        fail(ErrorKind::Io, msg);
    }
    json doc;
    try {
        doc = json::parse(io::read_text(run_dir / "metrics.json"));
        const bool paired = doc.at("paired").get<bool>();
        const std::string method = doc.at("detector").get<std::string>();
        std::vector<std::string> header = {"method", "seed"};
        const auto& seeds = doc.at("seeds");
        bool has_base = false, has_plus = false;
        for (const auto& s : seeds)
            for (const auto& b : s.at("branches")) {
                has_base |= b.at("name") == "base";
                has_plus |= b.at("name") == "plus_k";
            }
        if (has_base) header.insert(header.end(), {"base acc", "base prec", "base rec"});
        if (has_plus) header.insert(header.end(), {"+k acc", "+k prec", "+k rec"});
        if (paired) header.push_back("absorption");

        std::vector<std::vector<std::string>> rows;
        auto pct = [](double v) { return fixed(100.0 * v, 2); };
        for (const auto& s : seeds) {
            std::vector<std::string> row = {method, std::to_string(s.at("seed").get<std::uint64_t>())};
            for (const char* name : {"base", "plus_k"}) {
                const bool wanted = std::string(name) == "base" ? has_base : has_plus;
                if (!wanted) continue;
                const json* br = nullptr;
                for (const auto& b : s.at("branches"))
                    if (b.at("name") == name) br = &b;
                if (br == nullptr) {
                    row.insert(row.end(), {"-", "-", "-"});
                    continue;
                }
                row.push_back(pct(br->at("test_accuracy").get<double>()));
                row.push_back(pct(br->at("selection").at("precision").get<double>()));
                row.push_back(pct(br->at("selection").at("recall").get<double>()));
            }
            if (paired) row.push_back(s.contains("absorption") ? pct(s.at("absorption").at("absorption").get<double>()) : "-");
            rows.push_back(std::move(row));
        }
        const auto& summary = doc.at("summary");
        auto pm = [&](const char* key) {
            if (!summary.contains(key)) return std::string("-");
            return pct(summary.at(key).at("mean").get<double>()) + " +- " + pct(summary.at(key).at("sd").get<double>());
        };
        std::string out = "detector " + method + ", " + doc.at("noise_plan").get<std::string>() + ", knowledge " +
                          doc.at("knowledge_mode").get<std::string>() + "\n";
        out += render_table(header, rows);
        if (has_base) out += "base accuracy (%):  " + pm("base") + "\n";
        if (has_plus) out += "+k accuracy (%):    " + pm("plus_k") + "\n";
        if (paired) out += "absorption (pts):   " + pm("absorption") + "\n";
        return out;
    } catch (const json::exception& e) {
        fail(ErrorKind::Validation, std::string("report: malformed metrics.json: ") + e.what());
    }
}

}  // namespace noisesel
