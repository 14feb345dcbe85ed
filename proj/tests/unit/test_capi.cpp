#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "noisesel/noisesel.h"

namespace fs = std::filesystem;

namespace {

const char* kSmall = R"({"version": 1,
  "cluster": {"num_classes": 4, "samples_per_class": 40, "dim": 6},
  "noise": {"kind": "dominant", "ratio": 0.5},
  "detector": {"method": "unicon"},
  "training": {"epochs": 4, "warmup_epochs": 2},
  "test_per_class": 20, "seeds": [1]})";

std::string take(char* s) {
    std::string out = s ? s : "";
    nsl_string_free(s);
    return out;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) { fs::remove_all(path); }
    ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("version and null arguments") {
    CHECK(std::string(nsl_version()) == "1.0.0");
    nsl_config* cfg = nullptr;
    CHECK(nsl_config_parse(nullptr, nullptr, 0, &cfg) == NSL_ERR_NULL);
    CHECK(cfg == nullptr);
    CHECK(std::strlen(nsl_last_error()) > 0);
    CHECK(nsl_config_parse(kSmall, nullptr, 0, nullptr) == NSL_ERR_NULL);
    CHECK(nsl_run(nullptr, 1) == NSL_ERR_NULL);
    CHECK(nsl_render_report(nullptr, nullptr) == NSL_ERR_NULL);
    nsl_config_free(nullptr);
    nsl_dataset_free(nullptr);
    nsl_knowledge_free(nullptr);
    nsl_string_free(nullptr);
}

TEST_CASE("config errors map to status codes") {
    nsl_config* cfg = nullptr;
    CHECK(nsl_config_parse("{\"version\": 9}", nullptr, 0, &cfg) == NSL_ERR_VALIDATION);
    CHECK(std::string(nsl_last_error()).find("version") != std::string::npos);
    CHECK(nsl_config_load("/nonexistent/cfg.json", nullptr, 0, &cfg) == NSL_ERR_IO);

    const char* overrides[] = {"detector.method=sft", "seeds=[4]"};
    REQUIRE(nsl_config_parse(kSmall, overrides, 2, &cfg) == NSL_OK);
    char* text = nullptr;
    REQUIRE(nsl_config_to_json(cfg, &text) == NSL_OK);
    const std::string json = take(text);
    CHECK(json.find("\"sft\"") != std::string::npos);
    CHECK(nsl_config_set_seed(cfg, 11) == NSL_OK);
    REQUIRE(nsl_config_to_json(cfg, &text) == NSL_OK);
    CHECK(take(text).find("11") != std::string::npos);
    nsl_config_free(cfg);
}

TEST_CASE("knowledge handles and the integration rule") {
    nsl_knowledge* kn = nullptr;
    const uint32_t pairs[] = {1, 0};  // dogs labeled cat
    REQUIRE(nsl_knowledge_from_pairs(2, pairs, 1, &kn) == NSL_OK);
    char* text = nullptr;
    REQUIRE(nsl_knowledge_to_json(kn, &text) == NSL_OK);
    CHECK_FALSE(take(text).empty());

    const double prob[] = {0.3, 0.2, 0.5, 0.5, 0.1, 0.9};
    const uint32_t labels[] = {0, 0, 1};
    double out[3];
    uint8_t sel[3];
    REQUIRE(nsl_integrate_knowledge(prob, 3, 2, labels, kn, out, sel) == NSL_OK);
    CHECK(out[0] == 0.3);
    CHECK(sel[0] == 1);
    CHECK(out[1] == 0.0);
    CHECK(sel[1] == 0);
    CHECK(out[2] == 0.9);

    const uint32_t bad_labels[] = {0, 0, 7};
    CHECK(nsl_integrate_knowledge(prob, 3, 2, bad_labels, kn, out, sel) == NSL_ERR_SHAPE);
    CHECK(nsl_integrate_knowledge(prob, 3, 2, labels, kn, nullptr, sel) == NSL_ERR_NULL);
    nsl_knowledge_free(kn);

    const uint32_t self[] = {1, 1};  // a class is never its own source
    REQUIRE(nsl_knowledge_from_pairs(2, self, 1, &kn) == NSL_OK);
    REQUIRE(nsl_integrate_knowledge(prob, 3, 2, labels, kn, out, sel) == NSL_OK);
    CHECK(out[1] == 0.5);
    nsl_knowledge_free(kn);
    const uint32_t range[] = {0, 5};
    CHECK(nsl_knowledge_from_pairs(2, range, 1, &kn) == NSL_ERR_INDEX);
}

TEST_CASE("synth, select, estimate and run through handles") {
    TempDir dir("noisesel_capi");
    nsl_config* cfg = nullptr;
    REQUIRE(nsl_config_parse(kSmall, nullptr, 0, &cfg) == NSL_OK);
    REQUIRE(nsl_synth(cfg, 1, (dir.path / "data").c_str()) == NSL_OK);
    for (const char* f : {"dataset.csv", "test.csv", "knowledge.json"}) CHECK(fs::exists(dir.path / "data" / f));

    nsl_dataset* ds = nullptr;
    REQUIRE(nsl_dataset_load((dir.path / "data" / "dataset.csv").c_str(), &ds) == NSL_OK);
    CHECK(nsl_dataset_size(ds) == 4 * 40 / 2);  // dominant noise keeps half the budget
    CHECK(nsl_dataset_dim(ds) == 6);
    CHECK(nsl_dataset_num_classes(ds) == 4);
    nsl_knowledge* kn = nullptr;
    REQUIRE(nsl_knowledge_load((dir.path / "data" / "knowledge.json").c_str(), &kn) == NSL_OK);

    const fs::path sel = dir.path / "sel.csv";
    REQUIRE(nsl_select(cfg, ds, kn, 1, sel.c_str()) == NSL_OK);
    const std::string csv = slurp(sel);
    CHECK(csv.rfind("id,prob_clean,selected\n", 0) == 0);
    CHECK(nsl_select(cfg, ds, nullptr, 1, sel.c_str()) == NSL_OK);

    REQUIRE(nsl_estimate_t(cfg, ds, 1, (dir.path / "est").c_str()) == NSL_OK);
    CHECK(fs::exists(dir.path / "est" / "transition.json"));
    CHECK(fs::exists(dir.path / "est" / "knowledge.json"));

    REQUIRE(nsl_config_set_output_dir(cfg, (dir.path / "run").c_str()) == NSL_OK);
    REQUIRE(nsl_run(cfg, 1) == NSL_OK);
    char* report = nullptr;
    REQUIRE(nsl_render_report((dir.path / "run").c_str(), &report) == NSL_OK);
    CHECK(take(report).find("unicon") != std::string::npos);
    CHECK(nsl_render_report((dir.path / "missing").c_str(), &report) == NSL_ERR_IO);

    const double missing[] = {0.0, 1.0}, noisy[] = {0.0};
    REQUIRE(nsl_config_set_output_dir(cfg, (dir.path / "sweep").c_str()) == NSL_OK);
    char* table = nullptr;
    REQUIRE(nsl_sweep(cfg, missing, 2, noisy, 1, 1, &table) == NSL_OK);
    CHECK_FALSE(take(table).empty());
    CHECK(fs::exists(dir.path / "sweep" / "sweep.csv"));

    nsl_dataset_free(ds);
    nsl_dataset* none = nullptr;
    CHECK(nsl_dataset_load((dir.path / "nope.csv").c_str(), &none) == NSL_ERR_IO);
    CHECK(none == nullptr);
    nsl_knowledge_free(kn);
    nsl_config_free(cfg);
}
