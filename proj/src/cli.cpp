#include "kappaforge/cli.hpp"

#include "kappaforge/agreement.hpp"
#include "kappaforge/corpus.hpp"
#include "kappaforge/errors.hpp"
#include "kappaforge/extraction.hpp"
#include "kappaforge/gateway.hpp"
#include "kappaforge/prompt.hpp"
#include "kappaforge/report.hpp"
#include "kappaforge/runner.hpp"
#include "kappaforge/sha256.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

namespace kappaforge {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr const char* kToolVersion = "kappaforge 0.1.0";

std::string read_text_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw UpstreamArtifactMissing("cannot open " + path.string());
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_text_file(const fs::path& path, const std::string& text) {
    fs::create_directories(path.parent_path().empty() ? fs::path(".") : path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error("IoError", "cannot write " + path.string());
    }
    out << text;
}

struct StudyConfig {
    json doc;
    fs::path base_dir; // relative paths in the config resolve against this

    fs::path resolve(const std::string& path) const {
        fs::path p(path);
        return p.is_absolute() ? p : base_dir / p;
    }

    static StudyConfig load(const fs::path& path) {
        std::ifstream in(path);
        if (!in) {
            throw ConfigError("cannot open config file: " + path.string());
        }
        json doc = json::parse(in, nullptr, false);
        if (doc.is_discarded() || !doc.is_object()) {
            throw ConfigError("config file is not a JSON object: " + path.string());
        }
        return {std::move(doc), fs::absolute(path).parent_path()};
    }
};

struct CommonArgs {
    std::string config_path;
    std::string out_dir = "run";
    std::string backend_override;
    std::optional<uint64_t> seed_override;
};

QualityConfig quality_config(const StudyConfig& config) {
    QualityConfig q;
    if (config.doc.contains("quality")) {
        const auto& j = config.doc["quality"];
        q.repetition_threshold = j.value("repetition_threshold", q.repetition_threshold);
        q.repetition_min_length = j.value("repetition_min_length", q.repetition_min_length);
        q.overlength_cap = j.value("overlength_cap", q.overlength_cap);
    }
    return q;
}

FilterSpec filter_spec(const StudyConfig& config) {
    FilterSpec spec;
    spec.keywords = default_keywords();
    if (config.doc.contains("filter")) {
        const auto& j = config.doc["filter"];
        if (j.contains("allowed_languages")) {
            for (const auto& lang : j["allowed_languages"]) {
                spec.allowed_languages.insert(lang.get<std::string>());
            }
        }
        if (j.contains("keywords")) {
            spec.keywords.clear();
            for (const auto& k : j["keywords"]) {
                spec.keywords.push_back(k.get<std::string>());
            }
        }
        spec.case_insensitive = j.value("case_insensitive", true);
    }
    return spec;
}

SampleSpec sample_spec(const StudyConfig& config, const CommonArgs& args) {
    if (!config.doc.contains("sample")) {
        throw ConfigError("config lacks a sample section");
    }
    const auto& j = config.doc["sample"];
    SampleSpec spec;
    spec.target_size = j.value("target_size", size_t(0));
    if (j.contains("strata_keys")) {
        for (const auto& k : j["strata_keys"]) {
            spec.strata_keys.push_back(k.get<std::string>());
        }
    }
    spec.seed = j.value("seed", uint64_t(0));
    if (args.seed_override) spec.seed = *args.seed_override;
    return spec;
}

ModelProfile parse_profile(const json& j) {
    if (j.is_string()) {
        std::string name = j.get<std::string>();
        if (name == "default") return default_profile();
        if (name == "llama") return llama_profile();
        throw ConfigError("unknown named profile: " + name);
    }
    ModelProfile profile;
    profile.profile_id = j.value("id", std::string("default"));
    if (j.contains("extra_additions")) {
        for (const auto& a : j["extra_additions"]) {
            profile.extra_additions.push_back(a.get<std::string>());
        }
    }
    return profile;
}

std::map<std::string, StudyModel> parse_models(const StudyConfig& config) {
    std::map<std::string, StudyModel> models;
    if (!config.doc.contains("models")) return models;
    for (const auto& j : config.doc["models"]) {
        StudyModel model;
        model.config.model_id = j.at("id").get<std::string>();
        model.config.endpoint = j.value("endpoint", std::string());
        model.config.temperature = j.value("temperature", 0.0);
        model.config.max_in_flight = j.value("max_in_flight", 4);
        if (j.contains("retry")) {
            const auto& r = j["retry"];
            model.config.retry.max_attempts = r.value("max_attempts", 4);
            model.config.retry.base_backoff =
                std::chrono::milliseconds(r.value("base_backoff_ms", 500));
            model.config.retry.jitter = r.value("jitter", true);
        }
        model.config.timeout = std::chrono::milliseconds(j.value("timeout_ms", 30000));
        model.config.min_request_interval =
            std::chrono::milliseconds(j.value("min_request_interval_ms", 0));
        if (model.config.temperature < 0.0 || model.config.temperature > 2.0) {
            throw ConfigError("temperature must be within [0, 2] for model " +
                              model.config.model_id);
        }
        if (model.config.max_in_flight < 1) {
            throw ConfigError("max_in_flight must be >= 1 for model " + model.config.model_id);
        }
        model.profile = j.contains("profile") ? parse_profile(j["profile"]) : default_profile();
        models[model.config.model_id] = std::move(model);
    }
    return models;
}

const StudyModel& require_model(const std::map<std::string, StudyModel>& models,
                                const std::string& id) {
    auto it = models.find(id);
    if (it == models.end()) {
        throw ConfigError("model '" + id + "' is not declared in the models section");
    }
    return it->second;
}

ExtractionConfig extraction_config(const StudyConfig& config) {
    ExtractionConfig extraction = default_extraction_config();
    if (config.doc.contains("extraction")) {
        const auto& j = config.doc["extraction"];
        if (j.contains("refusal_phrases")) {
            extraction.refusal_phrases =
                load_refusal_phrases(config.resolve(j["refusal_phrases"].get<std::string>()).string());
        }
        extraction.detect_refusal = j.value("detect_refusal", true);
        extraction.offtask_detection = j.value("offtask_detection", false);
        extraction.offtask_overlap_threshold = j.value("offtask_threshold", 0.10);
    }
    return extraction;
}

TemplateLibrary load_templates(const StudyConfig& config) {
    std::string dir = config.doc.value("templates_dir", std::string("templates"));
    return TemplateLibrary::load(config.resolve(dir));
}

std::string backend_name(const StudyConfig& config, const CommonArgs& args) {
    if (!args.backend_override.empty()) return args.backend_override;
    if (config.doc.contains("gateway")) {
        return config.doc["gateway"].value("backend", std::string("mock"));
    }
    return "mock";
}

std::optional<fs::path> cache_dir(const StudyConfig& config) {
    if (config.doc.contains("gateway") && config.doc["gateway"].contains("cache_dir")) {
        return config.resolve(config.doc["gateway"]["cache_dir"].get<std::string>());
    }
    return std::nullopt;
}

std::unique_ptr<Backend> make_backend(const StudyConfig& config, const CommonArgs& args) {
    std::string name = backend_name(config, args);
    if (name == "live") {
        return std::make_unique<HttpBackend>();
    }
    if (name == "mock") {
        if (!config.doc.contains("gateway") || !config.doc["gateway"].contains("mock_script")) {
            throw ConfigError("mock backend requires gateway.mock_script");
        }
        return MockBackend::from_script_file(
            config.resolve(config.doc["gateway"]["mock_script"].get<std::string>()));
    }
    if (name == "replay") {
        auto dir = cache_dir(config);
        if (!dir) {
            throw ConfigError("replay backend requires gateway.cache_dir");
        }
        return std::make_unique<ReplayBackend>(*dir);
    }
    throw ConfigError("unknown backend: " + name);
}

std::vector<Cell> configured_cells(const StudyConfig& config) {
    std::vector<Cell> cells;
    if (!config.doc.contains("classify")) return cells;
    const auto& j = config.doc["classify"];
    if (j.contains("cells")) {
        for (const auto& id : j["cells"]) {
            auto cell = cell_from_id(id.get<std::string>());
            if (!cell) {
                throw ConfigError("malformed cell id: " + id.get<std::string>());
            }
            cells.push_back(*cell);
        }
        return cells;
    }
    std::vector<std::string> model_ids;
    for (const auto& m : j.value("models", json::array())) {
        model_ids.push_back(m.get<std::string>());
    }
    std::vector<Strategy> strategies;
    for (const auto& s : j.value("strategies", json::array())) {
        auto parsed = strategy_from_slug(s.get<std::string>());
        if (!parsed) throw ConfigError("unknown strategy: " + s.get<std::string>());
        strategies.push_back(*parsed);
    }
    std::vector<Task> tasks;
    for (const auto& t : j.value("tasks", json::array())) {
        auto parsed = task_from_slug(t.get<std::string>());
        if (!parsed) throw ConfigError("unknown task: " + t.get<std::string>());
        if (*parsed == Task::Relevance) {
            throw ConfigError("relevance runs through the prefilter, not classify");
        }
        tasks.push_back(*parsed);
    }
    for (const auto& model : model_ids) {
        for (Strategy strategy : strategies) {
            for (Task task : tasks) {
                cells.push_back({model, strategy, task});
            }
        }
    }
    return cells;
}

// The manifest is written before any network call; it carries everything
// needed to reproduce a run from the replay cache.
void write_manifest(const fs::path& out_dir, const StudyConfig& config, const CommonArgs& args,
                    const std::string& subcommand, const std::string& corpus_fingerprint) {
    json manifest;
    manifest["tool_version"] = kToolVersion;
    manifest["subcommand"] = subcommand;
    manifest["backend"] = backend_name(config, args);
    manifest["corpus_fingerprint"] = corpus_fingerprint;
    json cells = json::array();
    for (const auto& cell : configured_cells(config)) {
        cells.push_back(cell.id());
    }
    manifest["cells"] = cells;
    json temps = json::object();
    for (const auto& [id, model] : parse_models(config)) {
        temps[id] = model.config.temperature;
    }
    manifest["temperatures"] = temps;
    json seeds = json::object();
    if (config.doc.contains("sample")) seeds["sample"] = config.doc["sample"].value("seed", 0);
    if (config.doc.contains("reliability"))
        seeds["bootstrap"] = config.doc["reliability"].value("seed", 0);
    if (args.seed_override) seeds["override"] = *args.seed_override;
    manifest["seeds"] = seeds;
    json tfps = json::object();
    for (const auto& [name, fp] : load_templates(config).fingerprints()) {
        tfps[name] = fp;
    }
    manifest["template_fingerprints"] = tfps;
    std::time_t now = std::time(nullptr);
    char stamp[32];
    std::strftime(stamp, sizeof(stamp), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    manifest["created"] = stamp;

    write_text_file(out_dir / "manifest.json", manifest.dump(2) + "\n");
    // Keep the config verbatim next to the artifacts for provenance.
    write_text_file(out_dir / "config.json", read_text_file(args.config_path));
}

// Loads the most processed corpus stage available under out_dir, falling
// back to ingesting the configured source file.
Corpus load_stage(const fs::path& out_dir, const StudyConfig& config,
                  const std::vector<std::string>& stages, bool allow_source) {
    QualityConfig quality = quality_config(config);
    for (const auto& stage : stages) {
        fs::path path = out_dir / stage;
        if (fs::exists(path)) {
            LoadReport report;
            return load_corpus_file(path.string(), report, quality);
        }
    }
    if (allow_source && config.doc.contains("corpus")) {
        LoadReport report;
        return load_corpus_file(
            config.resolve(config.doc["corpus"].value("path", std::string())).string(), report,
            quality);
    }
    throw UpstreamArtifactMissing("no corpus stage found under " + out_dir.string() +
                                  " (looked for: " + (stages.empty() ? "-" : stages.front()) +
                                  " ...)");
}

std::string load_report_csv(const LoadReport& report) {
    std::ostringstream out;
    out << "line,reason,detail\n";
    for (const auto& r : report.rejected) {
        out << r.line_number << "," << r.reason << "," << r.detail << "\n";
    }
    return out.str();
}

int cmd_ingest(const StudyConfig& config, const CommonArgs& args) {
    fs::path out_dir(args.out_dir);
    if (!config.doc.contains("corpus")) {
        throw ConfigError("config lacks a corpus section");
    }
    write_manifest(out_dir, config, args, "ingest", "");
    LoadReport report;
    Corpus corpus = load_corpus_file(
        config.resolve(config.doc["corpus"].value("path", std::string())).string(), report,
        quality_config(config));
    serialize_corpus_file(corpus, (out_dir / "corpus.jsonl").string());
    write_text_file(out_dir / "load_report.csv", load_report_csv(report));
    std::cout << "ingested " << corpus.size() << " texts (" << report.rejected.size()
              << " rejected), fingerprint " << corpus.source_fingerprint.substr(0, 12) << "\n";
    return 0;
}

int cmd_filter(const StudyConfig& config, const CommonArgs& args) {
    fs::path out_dir(args.out_dir);
    write_manifest(out_dir, config, args, "filter", "");
    Corpus corpus = load_stage(out_dir, config, {"corpus.jsonl"}, true);
    auto [filtered, report] = apply_filters(corpus, filter_spec(config));
    serialize_corpus_file(filtered, (out_dir / "corpus.filtered.jsonl").string());
    write_text_file(out_dir / "filter_report.csv", report.to_csv());
    std::cout << "filtered " << corpus.size() << " -> " << filtered.size() << " texts\n";
    return 0;
}

int cmd_sample(const StudyConfig& config, const CommonArgs& args) {
    fs::path out_dir(args.out_dir);
    write_manifest(out_dir, config, args, "sample", "");
    Corpus corpus = load_stage(out_dir, config, {"corpus.filtered.jsonl", "corpus.jsonl"}, true);
    Corpus sample = stratified_sample(corpus, sample_spec(config, args));
    serialize_corpus_file(sample, (out_dir / "sample.jsonl").string());
    std::cout << "sampled " << sample.size() << " of " << corpus.size() << " texts\n";
    return 0;
}

RunContext make_run_context(const StudyConfig& config, const fs::path& out_dir,
                            const TemplateLibrary& templates, FileCallLog& log) {
    RunContext context;
    context.templates = &templates;
    context.extraction = extraction_config(config);
    context.transcripts_dir = out_dir / "transcripts";
    context.gateway.log = &log;
    context.gateway.cache_dir = cache_dir(config);
    return context;
}

int cmd_prefilter(const StudyConfig& config, const CommonArgs& args) {
    fs::path out_dir(args.out_dir);
    Corpus corpus;
    if (fs::exists(out_dir / "corpus.filtered.jsonl") || fs::exists(out_dir / "sample.jsonl")) {
        corpus = load_stage(out_dir, config, {"sample.jsonl", "corpus.filtered.jsonl"}, false);
    } else {
        Corpus raw = load_stage(out_dir, config, {"corpus.jsonl"}, true);
        auto [filtered, report] = apply_filters(raw, filter_spec(config));
        serialize_corpus_file(filtered, (out_dir / "corpus.filtered.jsonl").string());
        write_text_file(out_dir / "filter_report.csv", report.to_csv());
        corpus = std::move(filtered);
    }
    write_manifest(out_dir, config, args, "prefilter", corpus.source_fingerprint);

    if (!config.doc.contains("prefilter")) {
        throw ConfigError("config lacks a prefilter section");
    }
    auto models = parse_models(config);
    const auto& model_a =
        require_model(models, config.doc["prefilter"].value("model_a", std::string()));
    const auto& model_b =
        require_model(models, config.doc["prefilter"].value("model_b", std::string()));

    TemplateLibrary templates = load_templates(config);
    FileCallLog log(out_dir / "gateway_calls.log");
    RunContext context = make_run_context(config, out_dir, templates, log);
    auto backend = make_backend(config, args);

    auto [kept, report] = prefilter_relevance(corpus, model_a, model_b, *backend, context);
    serialize_corpus_file(kept, (out_dir / "corpus.prefiltered.jsonl").string());

    json rj;
    rj["total"] = report.total;
    rj["kept"] = report.kept;
    rj["excluded"] = report.excluded;
    rj["both_relevant"] = report.both_relevant;
    rj["both_not_relevant"] = report.both_not_relevant;
    rj["conflicts"] = report.conflicts;
    rj["unresolved"] = report.unresolved;
    rj["agreement_rate"] = report.agreement_rate;
    rj["unresolved_ids"] = report.unresolved_ids;
    write_text_file(out_dir / "prefilter_report.json", rj.dump(2) + "\n");
    std::cout << "prefilter kept " << report.kept << " of " << report.total
              << " (agreement rate " << format_fixed(report.agreement_rate, 4) << ")\n";
    return 0;
}

int cmd_classify(const StudyConfig& config, const CommonArgs& args) {
    fs::path out_dir(args.out_dir);
    Corpus corpus = load_stage(
        out_dir, config, {"corpus.prefiltered.jsonl", "sample.jsonl", "corpus.filtered.jsonl"},
        false);
    write_manifest(out_dir, config, args, "classify", corpus.source_fingerprint);

    auto models = parse_models(config);
    std::vector<Cell> cells = configured_cells(config);
    if (cells.empty()) {
        throw ConfigError("classify section declares no cells");
    }

    TemplateLibrary templates = load_templates(config);
    FileCallLog log(out_dir / "gateway_calls.log");
    RunContext context = make_run_context(config, out_dir, templates, log);
    auto backend = make_backend(config, args);

    for (const auto& cell : cells) {
        const auto& model = require_model(models, cell.model_id);
        auto records = run_cell(cell, model, corpus, *backend, 0, context);
        write_records_file(records, out_dir / "records" / (cell.id() + ".jsonl"));
        size_t failures = std::count_if(records.begin(), records.end(),
                                        [](const ClassificationRecord& r) {
                                            return r.outcome.is_failure();
                                        });
        std::cout << cell.id() << ": " << records.size() << " records, " << failures
                  << " failures\n";
    }
    return 0;
}

LabelVector load_label_file(const fs::path& path, const std::string& coder_id) {
    std::ifstream in(path);
    if (!in) {
        throw UpstreamArtifactMissing("cannot open label file: " + path.string());
    }
    LabelVector vector;
    vector.coder_id = coder_id;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (first) {
            first = false;
            if (line == "unit_id,label") continue;
        }
        size_t comma = line.find(',');
        if (comma == std::string::npos) {
            throw ConfigError("label file line lacks a comma: " + line);
        }
        vector.labels[line.substr(0, comma)] = line.substr(comma + 1);
    }
    return vector;
}

// Gathers label vectors per task: every persisted cell for that task plus
// externally supplied label files (e.g. human codes).
std::map<Task, std::vector<LabelVector>> gather_vectors(const StudyConfig& config,
                                                        const fs::path& out_dir) {
    std::map<Task, std::vector<LabelVector>> by_task;
    fs::path records_dir = out_dir / "records";
    std::vector<fs::path> record_files;
    if (fs::exists(records_dir)) {
        for (const auto& entry : fs::directory_iterator(records_dir)) {
            if (entry.path().extension() == ".jsonl") {
                record_files.push_back(entry.path());
            }
        }
    }
    std::sort(record_files.begin(), record_files.end());
    for (const auto& path : record_files) {
        auto cell = cell_from_id(path.stem().string());
        if (!cell) continue;
        auto records = read_records_file(path);
        by_task[cell->task].push_back(records_to_label_vector(records, cell->id()));
    }
    if (config.doc.contains("agree") && config.doc["agree"].contains("label_files")) {
        for (const auto& j : config.doc["agree"]["label_files"]) {
            auto task = task_from_slug(j.value("task", std::string()));
            if (!task) {
                throw ConfigError("label_files entry needs a valid task");
            }
            by_task[*task].push_back(
                load_label_file(config.resolve(j.at("path").get<std::string>()),
                                j.value("coder_id", std::string("external"))));
        }
    }
    return by_task;
}

int cmd_agree(const StudyConfig& config, const CommonArgs& args) {
    fs::path out_dir(args.out_dir);
    write_manifest(out_dir, config, args, "agree", "");
    auto by_task = gather_vectors(config, out_dir);
    if (by_task.empty()) {
        throw UpstreamArtifactMissing("no records or label files to compare under " +
                                      out_dir.string());
    }

    bool first = true;
    for (const auto& [task, vectors] : by_task) {
        if (vectors.size() < 2) continue;
        AgreementMatrix matrix = pairwise_matrix(vectors);
        std::string slug = task_slug(task);
        write_text_file(out_dir / "agree" / ("kappa_" + slug + ".csv"),
                        matrix_to_csv(matrix, "kappa"));
        write_text_file(out_dir / "agree" / ("observed_" + slug + ".csv"),
                        matrix_to_csv(matrix, "observed"));
        write_text_file(out_dir / "agree" / ("n_" + slug + ".csv"), matrix_to_csv(matrix, "n"));
        write_text_file(out_dir / "agree" / ("bands_" + slug + ".csv"),
                        matrix_to_csv(matrix, "band"));
        HeatmapSpec spec;
        spec.matrix = matrix;
        spec.metric = "kappa";
        spec.title = "Cohen's kappa: " + slug;
        write_text_file(out_dir / "agree" / ("heatmap_" + slug + ".svg"), emit_heatmap(spec));
        if (first) {
            write_text_file(out_dir / "agree" / "kappa.csv", matrix_to_csv(matrix, "kappa"));
            write_text_file(out_dir / "agree" / "observed.csv",
                            matrix_to_csv(matrix, "observed"));
            write_text_file(out_dir / "agree" / "n.csv", matrix_to_csv(matrix, "n"));
            first = false;
        }
        std::cout << "agree " << slug << ": " << vectors.size() << " coders\n";
    }
    return 0;
}

int cmd_reliability(const StudyConfig& config, const CommonArgs& args) {
    fs::path out_dir(args.out_dir);
    Corpus corpus = load_stage(
        out_dir, config, {"corpus.prefiltered.jsonl", "sample.jsonl", "corpus.filtered.jsonl"},
        false);
    write_manifest(out_dir, config, args, "reliability", corpus.source_fingerprint);

    if (!config.doc.contains("reliability")) {
        throw ConfigError("config lacks a reliability section");
    }
    const auto& j = config.doc["reliability"];
    auto cell = cell_from_id(j.value("cell", std::string()));
    if (!cell) {
        throw ConfigError("reliability.cell must be model__strategy__task");
    }
    int k = j.value("k", 10);
    BootstrapOptions bootstrap;
    bootstrap.n_resamples = j.value("n_resamples", 1000);
    bootstrap.level = j.value("level", 0.95);
    bootstrap.seed = j.value("seed", uint64_t(0));
    if (args.seed_override) bootstrap.seed = *args.seed_override;

    auto models = parse_models(config);
    const auto& model = require_model(models, cell->model_id);
    TemplateLibrary templates = load_templates(config);
    FileCallLog log(out_dir / "gateway_calls.log");
    RunContext context = make_run_context(config, out_dir, templates, log);
    auto backend = make_backend(config, args);

    ReliabilityResult result =
        run_reliability(*cell, model, corpus, *backend, k, context, bootstrap);

    json rj;
    rj["cell"] = cell->id();
    rj["k"] = k;
    rj["status"] = alpha_status_name(result.alpha.status);
    if (result.alpha.ok()) {
        rj["alpha"] = result.alpha.result.alpha;
        rj["observed_disagreement"] = result.alpha.result.observed_disagreement;
        rj["expected_disagreement"] = result.alpha.result.expected_disagreement;
        rj["n_pairable"] = result.alpha.result.n_pairable;
        if (result.alpha.result.ci) {
            rj["ci"] = {{"lo", result.alpha.result.ci->lo},
                        {"hi", result.alpha.result.ci->hi},
                        {"level", result.alpha.result.ci->level},
                        {"n_resamples", result.alpha.result.ci->n_resamples},
                        {"seed", result.alpha.result.ci->seed}};
        }
    }
    rj["disagreement_units"] = result.disagreement_units;
    write_text_file(out_dir / "reliability" / (cell->id() + ".json"), rj.dump(2) + "\n");
    for (int instance = 0; instance < k; ++instance) {
        write_records_file(result.per_instance_records[instance],
                           out_dir / "reliability" /
                               (cell->id() + "__i" + std::to_string(instance) + ".jsonl"));
    }
    if (result.alpha.ok()) {
        std::cout << "alpha " << format_fixed(result.alpha.result.alpha, 4) << " over " << k
                  << " instances, " << result.disagreement_units.size()
                  << " units with disagreement\n";
    } else {
        std::cout << "alpha not computable: " << alpha_status_name(result.alpha.status) << "\n";
    }
    return 0;
}

int cmd_shares(const StudyConfig& config, const CommonArgs& args) {
    fs::path out_dir(args.out_dir);
    write_manifest(out_dir, config, args, "shares", "");
    if (!config.doc.contains("shares") || !config.doc["shares"].contains("cells")) {
        throw ConfigError("config lacks a shares.cells list");
    }
    for (const auto& id : config.doc["shares"]["cells"]) {
        auto cell = cell_from_id(id.get<std::string>());
        if (!cell) {
            throw ConfigError("malformed cell id in shares: " + id.get<std::string>());
        }
        fs::path records_path = out_dir / "records" / (cell->id() + ".jsonl");
        auto records = read_records_file(records_path);
        ShareTable table = aggregate_shares(records);
        std::string slug = task_slug(cell->task);
        write_text_file(out_dir / "shares" / (slug + ".csv"), share_table_to_csv(table));
        write_text_file(out_dir / "shares" / (slug + ".svg"), emit_share_chart_svg(table));
        std::cout << "shares " << slug << ": N=" << table.denominator << ", failures="
                  << table.failures << "\n";
    }
    return 0;
}

// Disagreement reports against every external reference coder: the units
// where a cell departs from the reference, grouped by label transition, with
// bodies and raw responses for manual review.
void emit_disagreement_reports(const StudyConfig& config, const fs::path& out_dir) {
    if (!config.doc.contains("agree") || !config.doc["agree"].contains("label_files")) return;

    Corpus corpus;
    try {
        corpus = load_stage(out_dir, config,
                            {"corpus.prefiltered.jsonl", "sample.jsonl",
                             "corpus.filtered.jsonl", "corpus.jsonl"},
                            true);
    } catch (const Error&) {
        return; // no corpus stage: bodies cannot be resolved, skip the report
    }

    fs::path records_dir = out_dir / "records";
    if (!fs::exists(records_dir)) return;
    std::vector<fs::path> record_files;
    for (const auto& entry : fs::directory_iterator(records_dir)) {
        if (entry.path().extension() == ".jsonl") record_files.push_back(entry.path());
    }
    std::sort(record_files.begin(), record_files.end());

    for (const auto& lf : config.doc["agree"]["label_files"]) {
        auto task = task_from_slug(lf.value("task", std::string()));
        if (!task) continue;
        std::string coder = lf.value("coder_id", std::string("external"));
        LabelVector reference =
            load_label_file(config.resolve(lf.at("path").get<std::string>()), coder);

        for (const auto& path : record_files) {
            auto cell = cell_from_id(path.stem().string());
            if (!cell || cell->task != *task) continue;
            auto records = read_records_file(path);
            // Compare only where the reference coded the unit.
            std::vector<ClassificationRecord> covered;
            for (auto& record : records) {
                if (reference.labels.count(record.unit_id)) covered.push_back(std::move(record));
            }
            if (covered.empty()) continue;
            DisagreementReport report = disagreement_report(covered, reference, corpus);

            json rj;
            rj["cell"] = cell->id();
            rj["reference"] = coder;
            rj["total_units"] = report.total_units;
            rj["mismatches"] = report.mismatches;
            json groups = json::array();
            for (const auto& group : report.groups) {
                json gj;
                gj["from"] = group.from_label;
                gj["to"] = group.to_label;
                json entries = json::array();
                for (const auto& entry : group.entries) {
                    json ej;
                    ej["unit_id"] = entry.unit_id;
                    ej["body"] = entry.body;
                    ej["reference_label"] = entry.reference_label;
                    ej["model_label"] = entry.model_label;
                    std::string raw = entry.raw_response;
                    if (raw.empty() && !entry.completion_fingerprint.empty()) {
                        fs::path transcript = out_dir / "transcripts" /
                                              (entry.completion_fingerprint + ".txt");
                        if (fs::exists(transcript)) raw = read_text_file(transcript);
                    }
                    ej["raw_response"] = raw;
                    entries.push_back(std::move(ej));
                }
                gj["entries"] = std::move(entries);
                groups.push_back(std::move(gj));
            }
            rj["groups"] = std::move(groups);
            write_text_file(out_dir / "disagreements" / (cell->id() + "__vs__" + coder + ".json"),
                            rj.dump(2) + "\n");
            std::cout << "disagreements " << cell->id() << " vs " << coder << ": "
                      << report.mismatches << " of " << report.total_units << "\n";
        }
    }
}

int cmd_report(const StudyConfig& config, const CommonArgs& args) {
    int status = cmd_agree(config, args);
    if (status != 0) return status;
    if (config.doc.contains("shares") && config.doc["shares"].contains("cells")) {
        status = cmd_shares(config, args);
        if (status != 0) return status;
    }
    emit_disagreement_reports(config, fs::path(args.out_dir));
    return 0;
}

} // namespace

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"LLM annotation study harness: corpus filtering, prompt cells, agreement "
                 "statistics and reports"};
    app.require_subcommand(1);

    CommonArgs args;
    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", args.config_path, "study config file (JSON)")->required();
        cmd->add_option("--out", args.out_dir, "run directory for artifacts");
        cmd->add_option("--backend", args.backend_override, "live|mock|replay");
        cmd->add_option("--seed", args.seed_override, "override sample/bootstrap seed");
    };

    struct SubcommandEntry {
        const char* name;
        const char* help;
        int (*fn)(const StudyConfig&, const CommonArgs&);
    };
    SubcommandEntry entries[] = {
        {"ingest", "load and validate the corpus file", cmd_ingest},
        {"filter", "apply language and keyword filters", cmd_filter},
        {"sample", "stratified sample of the filtered corpus", cmd_sample},
        {"prefilter", "two-model relevance screen", cmd_prefilter},
        {"classify", "run the configured model x strategy x task cells", cmd_classify},
        {"agree", "pairwise kappa / observed-agreement matrices", cmd_agree},
        {"reliability", "k-instance Krippendorff alpha with bootstrap CI", cmd_reliability},
        {"shares", "label share tables and charts", cmd_shares},
        {"report", "emit agreement matrices and share charts", cmd_report},
    };
    std::map<std::string, int (*)(const StudyConfig&, const CommonArgs&)> dispatch;
    for (const auto& entry : entries) {
        add_common(app.add_subcommand(entry.name, entry.help));
        dispatch[entry.name] = entry.fn;
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        for (const auto& [name, fn] : dispatch) {
            if (app.got_subcommand(name)) {
                StudyConfig config = StudyConfig::load(args.config_path);
                std::filesystem::create_directories(args.out_dir);
                return fn(config, args);
            }
        }
        std::cerr << "error: ConfigError: no subcommand\n";
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "error: ConfigError: " << e.what() << "\n";
        return 2;
    } catch (const UpstreamArtifactMissing& e) {
        std::cerr << "error: UpstreamArtifactMissing: " << e.what() << "\n";
        return 3;
    } catch (const Error& e) {
        std::cerr << "error: " << e.kind() << ": " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: Unhandled: " << e.what() << "\n";
        return 1;
    }
}

} // namespace kappaforge
