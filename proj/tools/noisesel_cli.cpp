// noisesel command-line front end; all work goes through the C API.
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "noisesel/noisesel.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

int exit_code(nsl_status s) {
    switch (s) {
        case NSL_OK: return kExitOk;
        case NSL_ERR_ABORT:
        case NSL_ERR_INTERNAL: return kExitRuntime;
        default: return kExitValidation;
    }
}

struct Failure {
    int code;
};

void check(nsl_status s) {
    if (s == NSL_OK) return;
    std::cerr << "error: " << nsl_last_error() << '\n';
    throw Failure{exit_code(s)};
}

struct ConfigHandle {
    nsl_config* ptr = nullptr;
    ~ConfigHandle() { nsl_config_free(ptr); }
};

struct DatasetHandle {
    nsl_dataset* ptr = nullptr;
    ~DatasetHandle() { nsl_dataset_free(ptr); }
};

struct KnowledgeHandle {
    nsl_knowledge* ptr = nullptr;
    ~KnowledgeHandle() { nsl_knowledge_free(ptr); }
};

std::string take(char* s) {
    std::string out = s ? s : "";
    nsl_string_free(s);
    return out;
}

struct Common {
    std::string config;
    std::vector<std::string> overrides;
    std::string out;
    std::uint64_t seed = 0;
    bool seed_given = false;
};

void load_config(const Common& c, ConfigHandle& cfg, bool set_out) {
    std::vector<const char*> ov;
    for (const auto& o : c.overrides) ov.push_back(o.c_str());
    if (c.config.empty())
        check(nsl_config_parse("{\"version\": 1}", ov.data(), ov.size(), &cfg.ptr));
    else
        check(nsl_config_load(c.config.c_str(), ov.data(), ov.size(), &cfg.ptr));
    if (c.seed_given) check(nsl_config_set_seed(cfg.ptr, c.seed));
    if (set_out && !c.out.empty()) check(nsl_config_set_output_dir(cfg.ptr, c.out.c_str()));
}

std::vector<double> parse_list(const std::string& text, const std::string& what) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            std::cerr << "error: bad value '" << item << "' in " << what << '\n';
            throw Failure{kExitValidation};
        }
    }
    return out;
}

void add_common(CLI::App* sub, Common& c, bool out_required, const std::string& out_help) {
    sub->add_option("--config", c.config, "experiment config (JSON, version 1)")->check(CLI::ExistingFile);
    auto* seed = sub->add_option("--seed", c.seed, "root seed (replaces the config's seed list)");
    seed->each([&c](const std::string&) { c.seed_given = true; });
    auto* out = sub->add_option("--out", c.out, out_help);
    if (out_required) out->required();
    sub->add_option("overrides", c.overrides, "dotted.key=value config overrides");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"noisesel: clean-sample selection with noise-source knowledge"};
    app.require_subcommand(1);

    Common synth_c, run_c, select_c, est_c, sweep_c;
    bool dump_selection = false;
    std::size_t run_jobs = 1, sweep_jobs = 1;
    std::string data_path, knowledge_path, est_data_path, report_dir;
    std::vector<std::string> grid;

    auto* synth = app.add_subcommand("synth", "write dataset.csv, test.csv and knowledge.json for one seed");
    add_common(synth, synth_c, true, "output directory");

    auto* run = app.add_subcommand("run", "run a full experiment into a run directory");
    add_common(run, run_c, false, "run directory (overrides output_dir)");
    run->add_flag("--dump-selection", dump_selection, "write per-epoch selection CSVs");
    run->add_option("--jobs", run_jobs, "seeds run in parallel")->check(CLI::PositiveNumber);

    auto* select = app.add_subcommand("select", "warm-train on a dataset and run the detector once");
    add_common(select, select_c, true, "output directory (selection.csv)");
    select->add_option("--data", data_path, "dataset CSV")->required()->check(CLI::ExistingFile);
    select->add_option("--knowledge", knowledge_path, "knowledge JSON; enables +k")->check(CLI::ExistingFile);

    auto* est = app.add_subcommand("estimate-t", "warm-train on a dataset and estimate its transition matrix");
    add_common(est, est_c, true, "output directory (transition.json, knowledge.json)");
    est->add_option("--data", est_data_path, "dataset CSV")->required()->check(CLI::ExistingFile);

    auto* sweep = app.add_subcommand("sweep", "knowledge-quality sweep over missing/noisy fractions");
    add_common(sweep, sweep_c, false, "output directory (overrides output_dir)");
    sweep->add_option("--grid", grid, "mk=a,b,... (missing) and/or nk=a,b,... (noisy); repeatable")
        ->required()
        ->allow_extra_args(false);
    sweep->add_option("--jobs", sweep_jobs, "runs in parallel")->check(CLI::PositiveNumber);

    auto* report = app.add_subcommand("report", "render a run directory's metrics as a table");
    report->add_option("run_dir", report_dir, "run directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n\n" << app.help();
        return kExitValidation;
    }

    try {
        if (synth->parsed()) {
            ConfigHandle cfg;
            load_config(synth_c, cfg, false);
            check(nsl_synth(cfg.ptr, synth_c.seed, synth_c.out.c_str()));
        } else if (run->parsed()) {
            ConfigHandle cfg;
            load_config(run_c, cfg, true);
            if (dump_selection) check(nsl_config_set_dump_selection(cfg.ptr, 1));
            check(nsl_run(cfg.ptr, run_jobs));
        } else if (select->parsed()) {
            ConfigHandle cfg;
            load_config(select_c, cfg, false);
            DatasetHandle ds;
            check(nsl_dataset_load(data_path.c_str(), &ds.ptr));
            KnowledgeHandle kn;
            if (!knowledge_path.empty()) check(nsl_knowledge_load(knowledge_path.c_str(), &kn.ptr));
            const std::string csv = (std::filesystem::path(select_c.out) / "selection.csv").string();
            check(nsl_select(cfg.ptr, ds.ptr, kn.ptr, select_c.seed, csv.c_str()));
        } else if (est->parsed()) {
            ConfigHandle cfg;
            load_config(est_c, cfg, false);
            DatasetHandle ds;
            check(nsl_dataset_load(est_data_path.c_str(), &ds.ptr));
            check(nsl_estimate_t(cfg.ptr, ds.ptr, est_c.seed, est_c.out.c_str()));
        } else if (sweep->parsed()) {
            std::vector<double> missing, noisy;
            for (const auto& g : grid) {
                const auto eq = g.find('=');
                const std::string key = eq == std::string::npos ? "" : g.substr(0, eq);
                if (key == "mk") {
                    missing = parse_list(g.substr(eq + 1), "--grid mk");
                } else if (key == "nk") {
                    noisy = parse_list(g.substr(eq + 1), "--grid nk");
                } else {
                    std::cerr << "error: --grid expects mk=... or nk=..., got '" << g << "'\n";
                    return kExitValidation;
                }
            }
            ConfigHandle cfg;
            load_config(sweep_c, cfg, true);
            char* table = nullptr;
            check(nsl_sweep(cfg.ptr, missing.data(), missing.size(), noisy.data(), noisy.size(), sweep_jobs, &table));
            std::cout << take(table);
        } else if (report->parsed()) {
            char* text = nullptr;
            check(nsl_render_report(report_dir.c_str(), &text));
            std::cout << take(text);
        }
    } catch (const Failure& f) {
        return f.code;
    }
    return kExitOk;
}
