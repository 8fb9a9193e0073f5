#include "doctest.h"

#include "helpers.hpp"

#include "kappaforge/cli.hpp"

#include "json.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace kappaforge;
namespace fs = std::filesystem;

namespace {

int run(const std::vector<std::string>& argv_strings) {
    std::vector<const char*> argv;
    argv.push_back("kappaforge");
    for (const auto& s : argv_strings) argv.push_back(s.c_str());
    return run_cli(int(argv.size()), argv.data());
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

fs::path fresh_dir(const std::string& name) {
    fs::path dir = fs::temp_directory_path() / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string study_config() {
    return (kftest::repo_dir() / "configs" / "mini_study.json").string();
}

// The bundled config with overrides applied, written to a temp file.
fs::path patched_config(const fs::path& dir, const std::function<void(nlohmann::json&)>& patch) {
    std::ifstream in(study_config());
    nlohmann::json doc = nlohmann::json::parse(in);
    // Re-anchor the ../ paths at the repo root.
    doc["corpus"]["path"] = (kftest::repo_dir() / "data" / "mini_corpus.jsonl").string();
    doc["templates_dir"] = (kftest::repo_dir() / "templates").string();
    doc["extraction"]["refusal_phrases"] =
        (kftest::repo_dir() / "data" / "refusal_phrases.txt").string();
    doc["gateway"]["mock_script"] = (kftest::repo_dir() / "data" / "mock_script.json").string();
    patch(doc);
    fs::path path = dir / "config.json";
    std::ofstream out(path);
    out << doc.dump(2);
    return path;
}

} // namespace

TEST_CASE("the pipeline stages are resumable from persisted files") {
    fs::path out = fresh_dir("kf_cli_pipeline");

    CHECK(run({"ingest", "--config", study_config(), "--out", out.string()}) == 0);
    CHECK(fs::exists(out / "corpus.jsonl"));
    CHECK(fs::exists(out / "load_report.csv"));
    CHECK(fs::exists(out / "manifest.json"));
    CHECK(fs::exists(out / "config.json"));

    CHECK(run({"filter", "--config", study_config(), "--out", out.string()}) == 0);
    std::string filter_report = slurp(out / "filter_report.csv");
    CHECK(filter_report.find("reason,count") == 0);
    CHECK(filter_report.find("LanguageExcluded,1") != std::string::npos);

    CHECK(run({"sample", "--config", study_config(), "--out", out.string()}) == 0);
    std::string first_sample = slurp(out / "sample.jsonl");
    CHECK(run({"sample", "--config", study_config(), "--out", out.string()}) == 0);
    CHECK(slurp(out / "sample.jsonl") == first_sample);

    // A seed override changes the draw.
    CHECK(run({"sample", "--config", study_config(), "--out", out.string(), "--seed", "99"}) ==
          0);
    CHECK(slurp(out / "sample.jsonl") != first_sample);

    fs::remove_all(out);
}

TEST_CASE("classify without any corpus stage reports the missing artifact") {
    fs::path out = fresh_dir("kf_cli_missing");
    CHECK(run({"classify", "--config", study_config(), "--out", out.string()}) == 3);
    fs::remove_all(out);
}

TEST_CASE("the mock backend requires a script file") {
    fs::path out = fresh_dir("kf_cli_noscript");
    fs::path config = patched_config(out, [](nlohmann::json& doc) {
        doc["gateway"].erase("mock_script");
    });
    CHECK(run({"prefilter", "--config", config.string(), "--out", out.string()}) == 2);
    fs::remove_all(out);
}

TEST_CASE("an unknown backend name is a config error") {
    fs::path out = fresh_dir("kf_cli_badbackend");
    CHECK(run({"prefilter", "--config", study_config(), "--out", out.string(), "--backend",
               "quantum"}) == 2);
    fs::remove_all(out);
}

TEST_CASE("replay from the cache reproduces a recorded run byte-for-byte") {
    fs::path base = fresh_dir("kf_cli_replay");
    fs::path cache = base / "cache";
    fs::path config = patched_config(base, [&](nlohmann::json& doc) {
        doc["gateway"]["cache_dir"] = cache.string();
        // Keep the run small: one model, one strategy, two tasks.
        doc["classify"]["models"] = {"llm_a"};
        doc["classify"]["strategies"] = {"zs"};
        doc["classify"]["tasks"] = {"absa", "gambling_comparison"};
    });

    fs::path recorded = base / "recorded";
    CHECK(run({"filter", "--config", config.string(), "--out", recorded.string()}) == 0);
    CHECK(run({"classify", "--config", config.string(), "--out", recorded.string()}) == 0);
    REQUIRE(fs::exists(cache));
    CHECK_FALSE(fs::is_empty(cache));

    fs::path replayed = base / "replayed";
    CHECK(run({"filter", "--config", config.string(), "--out", replayed.string()}) == 0);
    CHECK(run({"classify", "--config", config.string(), "--out", replayed.string(), "--backend",
               "replay"}) == 0);

    for (const char* cell : {"llm_a__zs__absa.jsonl", "llm_a__zs__gambling_comparison.jsonl"}) {
        CHECK(slurp(recorded / "records" / cell) == slurp(replayed / "records" / cell));
    }
    fs::remove_all(base);
}

TEST_CASE("the manifest is written before any completion is attempted") {
    fs::path out = fresh_dir("kf_cli_manifest");
    fs::path config = patched_config(out, [](nlohmann::json& doc) {
        // Point the mock at a nonexistent script so the backend build fails
        // after the manifest is on disk.
        doc["gateway"]["mock_script"] = "/nonexistent/mock.json";
    });
    CHECK(run({"filter", "--config", config.string(), "--out", out.string()}) == 0);
    CHECK(run({"prefilter", "--config", config.string(), "--out", out.string()}) == 2);
    CHECK(fs::exists(out / "manifest.json"));
    auto manifest = nlohmann::json::parse(slurp(out / "manifest.json"));
    CHECK(manifest["subcommand"] == "prefilter");
    CHECK(manifest["template_fingerprints"].size() == 10);
    fs::remove_all(out);
}

TEST_CASE("report reruns agree and shares from persisted records only") {
    fs::path out = fresh_dir("kf_cli_report");
    CHECK(run({"filter", "--config", study_config(), "--out", out.string()}) == 0);
    CHECK(run({"prefilter", "--config", study_config(), "--out", out.string()}) == 0);
    CHECK(run({"classify", "--config", study_config(), "--out", out.string()}) == 0);
    CHECK(run({"report", "--config", study_config(), "--out", out.string()}) == 0);
    CHECK(fs::exists(out / "agree" / "kappa.csv"));
    CHECK(fs::exists(out / "agree" / "heatmap_absa.svg"));
    CHECK(fs::exists(out / "shares" / "financial_engagement.csv"));
    CHECK(fs::exists(out / "shares" / "gambling_comparison.svg"));

    std::string kappa = slurp(out / "agree" / "kappa.csv");
    CHECK(kappa.find("llm_a__zs__absa") != std::string::npos);
    fs::remove_all(out);
}

TEST_CASE("report emits disagreement reviews against external label files") {
    fs::path base = fresh_dir("kf_cli_disagree");
    // Human codes for the gambling task that contradict the mock on r015
    // (mock answers 1 because the body compares odds to a casino).
    std::ofstream human(base / "human.csv");
    human << "unit_id,label\nr015,0\nr016,0\n";
    human.close();
    fs::path config = patched_config(base, [&](nlohmann::json& doc) {
        doc["classify"]["models"] = {"llm_a"};
        doc["classify"]["strategies"] = {"zs"};
        doc["classify"]["tasks"] = {"gambling_comparison"};
        doc["shares"]["cells"] = {"llm_a__zs__gambling_comparison"};
        doc["agree"]["label_files"] = {{{"task", "gambling_comparison"},
                                        {"coder_id", "human_review"},
                                        {"path", (base / "human.csv").string()}}};
    });

    fs::path out = base / "run";
    CHECK(run({"filter", "--config", config.string(), "--out", out.string()}) == 0);
    CHECK(run({"prefilter", "--config", config.string(), "--out", out.string()}) == 0);
    CHECK(run({"classify", "--config", config.string(), "--out", out.string()}) == 0);
    CHECK(run({"report", "--config", config.string(), "--out", out.string()}) == 0);

    fs::path report_path =
        out / "disagreements" / "llm_a__zs__gambling_comparison__vs__human_review.json";
    REQUIRE(fs::exists(report_path));
    auto rj = nlohmann::json::parse(slurp(report_path));
    CHECK(rj["mismatches"] == 1);
    REQUIRE(rj["groups"].size() == 1);
    CHECK(rj["groups"][0]["from"] == "0");
    CHECK(rj["groups"][0]["to"] == "1");
    auto entry = rj["groups"][0]["entries"][0];
    CHECK(entry["unit_id"] == "r015");
    CHECK(entry["body"].get<std::string>().find("mystery box") != std::string::npos);
    CHECK(entry["raw_response"].get<std::string>().find("Gambling_Mention") !=
          std::string::npos);
    fs::remove_all(base);
}
