#include "noisesel/noisesel.h"

#include <cstring>
#include <exception>
#include <sstream>
#include <string>

#include "noisesel/harness.hpp"
#include "noisesel/io.hpp"

struct nsl_config {
    noisesel::ExperimentConfig cfg;
};

struct nsl_dataset {
    noisesel::LabeledDataset ds;
};

struct nsl_knowledge {
    noisesel::NoiseKnowledge kn;
};

namespace {

thread_local std::string last_error;

nsl_status status_of(noisesel::ErrorKind kind) {
    switch (kind) {
        case noisesel::ErrorKind::Shape: return NSL_ERR_SHAPE;
        case noisesel::ErrorKind::Index: return NSL_ERR_INDEX;
        case noisesel::ErrorKind::Validation: return NSL_ERR_VALIDATION;
        case noisesel::ErrorKind::Io: return NSL_ERR_IO;
        case noisesel::ErrorKind::Abort: return NSL_ERR_ABORT;
    }
    return NSL_ERR_INTERNAL;
}

template <typename F>
nsl_status guarded(F&& body) {
    try {
        body();
        last_error.clear();
        return NSL_OK;
    } catch (const noisesel::Error& e) {
        last_error = e.what();
        return status_of(e.kind());
    } catch (const std::exception& e) {
        last_error = e.what();
        return NSL_ERR_INTERNAL;
    } catch (...) {
        last_error = "unknown error";
        return NSL_ERR_INTERNAL;
    }
}

nsl_status null_arg(const char* name) {
    last_error = std::string("argument '") + name + "' is NULL";
    return NSL_ERR_NULL;
}

char* dup_string(const std::string& s) {
    char* out = new char[s.size() + 1];
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

std::vector<std::string> collect(const char* const* overrides, size_t count) {
    std::vector<std::string> out;
    for (size_t i = 0; i < count; ++i) {
        noisesel::require(overrides[i] != nullptr, noisesel::ErrorKind::Validation, "override entry is NULL");
        out.emplace_back(overrides[i]);
    }
    return out;
}

}  // namespace

#define NSL_REQUIRE_ARG(p) \
    if ((p) == nullptr) return null_arg(#p)

extern "C" {

const char* nsl_last_error(void) { return last_error.c_str(); }

const char* nsl_version(void) { return "1.0.0"; }

void nsl_string_free(char* s) { delete[] s; }

nsl_status nsl_config_parse(const char* json_text, const char* const* overrides, size_t count, nsl_config** out) {
    NSL_REQUIRE_ARG(json_text);
    NSL_REQUIRE_ARG(out);
    if (count > 0) NSL_REQUIRE_ARG(overrides);
    return guarded([&] { *out = new nsl_config{noisesel::parse_config(json_text, collect(overrides, count))}; });
}

nsl_status nsl_config_load(const char* path, const char* const* overrides, size_t count, nsl_config** out) {
    NSL_REQUIRE_ARG(path);
    NSL_REQUIRE_ARG(out);
    if (count > 0) NSL_REQUIRE_ARG(overrides);
    return guarded([&] { *out = new nsl_config{noisesel::load_config(path, collect(overrides, count))}; });
}

nsl_status nsl_config_to_json(const nsl_config* cfg, char** out) {
    NSL_REQUIRE_ARG(cfg);
    NSL_REQUIRE_ARG(out);
    return guarded([&] { *out = dup_string(noisesel::config_to_json(cfg->cfg)); });
}

nsl_status nsl_config_set_seed(nsl_config* cfg, uint64_t seed) {
    NSL_REQUIRE_ARG(cfg);
    cfg->cfg.seeds = {seed};
    return NSL_OK;
}

nsl_status nsl_config_set_output_dir(nsl_config* cfg, const char* dir) {
    NSL_REQUIRE_ARG(cfg);
    NSL_REQUIRE_ARG(dir);
    cfg->cfg.output_dir = dir;
    return NSL_OK;
}

nsl_status nsl_config_set_dump_selection(nsl_config* cfg, int enabled) {
    NSL_REQUIRE_ARG(cfg);
    cfg->cfg.dump_selection = enabled != 0;
    return NSL_OK;
}

void nsl_config_free(nsl_config* cfg) { delete cfg; }

nsl_status nsl_dataset_load(const char* path, nsl_dataset** out) {
    NSL_REQUIRE_ARG(path);
    NSL_REQUIRE_ARG(out);
    return guarded([&] { *out = new nsl_dataset{noisesel::io::load_dataset_csv(path)}; });
}

size_t nsl_dataset_size(const nsl_dataset* ds) { return ds ? ds->ds.size() : 0; }
size_t nsl_dataset_dim(const nsl_dataset* ds) { return ds ? ds->ds.dim() : 0; }
size_t nsl_dataset_num_classes(const nsl_dataset* ds) { return ds ? ds->ds.num_classes() : 0; }
void nsl_dataset_free(nsl_dataset* ds) { delete ds; }

nsl_status nsl_knowledge_load(const char* path, nsl_knowledge** out) {
    NSL_REQUIRE_ARG(path);
    NSL_REQUIRE_ARG(out);
    return guarded([&] { *out = new nsl_knowledge{noisesel::io::load_knowledge_json(path)}; });
}

nsl_status nsl_knowledge_from_pairs(size_t num_classes, const uint32_t* pairs, size_t count, nsl_knowledge** out) {
    NSL_REQUIRE_ARG(out);
    if (count > 0) NSL_REQUIRE_ARG(pairs);
    return guarded([&] {
        std::vector<std::pair<noisesel::ClassIndex, noisesel::ClassIndex>> p;
        for (size_t i = 0; i < count; ++i) p.emplace_back(pairs[2 * i], pairs[2 * i + 1]);
        *out = new nsl_knowledge{noisesel::NoiseKnowledge::from_label_pairs(num_classes, p)};
    });
}

nsl_status nsl_knowledge_to_json(const nsl_knowledge* kn, char** out) {
    NSL_REQUIRE_ARG(kn);
    NSL_REQUIRE_ARG(out);
    return guarded([&] { *out = dup_string(noisesel::io::knowledge_to_json(kn->kn)); });
}

void nsl_knowledge_free(nsl_knowledge* kn) { delete kn; }

nsl_status nsl_synth(const nsl_config* cfg, uint64_t seed, const char* out_dir) {
    NSL_REQUIRE_ARG(cfg);
    NSL_REQUIRE_ARG(out_dir);
    return guarded([&] {
        const noisesel::SeedData data = noisesel::synthesize(cfg->cfg, seed);
        const std::filesystem::path dir = out_dir;
        noisesel::io::save_dataset_csv(data.train, dir / "dataset.csv");
        noisesel::io::save_dataset_csv(data.test, dir / "test.csv");
        noisesel::io::save_knowledge_json(data.true_knowledge, dir / "knowledge.json");
    });
}

nsl_status nsl_run(const nsl_config* cfg, size_t jobs) {
    NSL_REQUIRE_ARG(cfg);
    return guarded([&] {
        noisesel::require(!cfg->cfg.output_dir.empty(), noisesel::ErrorKind::Validation,
                          "run needs an output directory");
        noisesel::run_experiment(cfg->cfg, jobs);
    });
}

nsl_status nsl_select(const nsl_config* cfg, const nsl_dataset* ds, const nsl_knowledge* kn, uint64_t seed,
                      const char* out_csv) {
    NSL_REQUIRE_ARG(cfg);
    NSL_REQUIRE_ARG(ds);
    NSL_REQUIRE_ARG(out_csv);
    return guarded([&] {
        const noisesel::SelectionOutcome sel =
            noisesel::select_on_dataset(cfg->cfg, ds->ds, kn ? &kn->kn : nullptr, seed);
        std::ostringstream csv;
        noisesel::io::write_scores_csv(sel.scores, csv);
        noisesel::io::write_text(out_csv, csv.str());
    });
}

nsl_status nsl_estimate_t(const nsl_config* cfg, const nsl_dataset* ds, uint64_t seed, const char* out_dir) {
    NSL_REQUIRE_ARG(cfg);
    NSL_REQUIRE_ARG(ds);
    NSL_REQUIRE_ARG(out_dir);
    return guarded([&] {
        const noisesel::DualTEstimate est = noisesel::estimate_on_dataset(cfg->cfg, ds->ds, seed);
        const auto& kc = cfg->cfg.knowledge;
        const std::filesystem::path dir = out_dir;
        noisesel::io::write_text(dir / "transition.json", noisesel::io::transition_to_json(est.t));
        noisesel::io::save_knowledge_json(noisesel::knowledge_from_transition(est.t, kc.dualt_threshold, kc.dualt_top_m),
                                          dir / "knowledge.json");
    });
}

nsl_status nsl_sweep(const nsl_config* cfg, const double* missing, size_t n_missing, const double* noisy,
                     size_t n_noisy, size_t jobs, char** table_out) {
    NSL_REQUIRE_ARG(cfg);
    if (n_missing > 0) NSL_REQUIRE_ARG(missing);
    if (n_noisy > 0) NSL_REQUIRE_ARG(noisy);
    return guarded([&] {
        const auto cells = noisesel::sweep_grid(std::vector<double>(missing, missing + n_missing),
                                                std::vector<double>(noisy, noisy + n_noisy));
        const noisesel::SweepOutcome sweep = noisesel::sweep_knowledge_quality(cfg->cfg, cells, jobs);
        if (table_out) *table_out = dup_string(noisesel::sweep_table(sweep));
    });
}

nsl_status nsl_render_report(const char* run_dir, char** out) {
    NSL_REQUIRE_ARG(run_dir);
    NSL_REQUIRE_ARG(out);
    return guarded([&] { *out = dup_string(noisesel::render_report(run_dir)); });
}

nsl_status nsl_integrate_knowledge(const double* prob, size_t n, size_t k, const uint32_t* labels,
                                   const nsl_knowledge* kn, double* prob_out, uint8_t* selected_out) {
    NSL_REQUIRE_ARG(kn);
    NSL_REQUIRE_ARG(prob_out);
    NSL_REQUIRE_ARG(selected_out);
    if (n > 0) {
        NSL_REQUIRE_ARG(prob);
        NSL_REQUIRE_ARG(labels);
    }
    return guarded([&] {
        noisesel::Matrix m(n, k);
        std::copy(prob, prob + n * k, m.data().begin());
        std::vector<noisesel::ClassIndex> lab(labels, labels + n);
        const noisesel::CleanScores scores = noisesel::integrate_knowledge(m, lab, kn->kn);
        for (size_t i = 0; i < n; ++i) {
            prob_out[i] = scores.prob_clean()[i];
            selected_out[i] = scores.selected()[i] ? 1 : 0;
        }
    });
}

}  // extern "C"
