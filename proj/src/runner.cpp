#include "kappaforge/runner.hpp"

#include "kappaforge/sha256.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

namespace kappaforge {

using nlohmann::json;

std::string Cell::id() const {
    return model_id + "__" + strategy_slug(strategy) + "__" + task_slug(task);
}

std::optional<Cell> cell_from_id(const std::string& id) {
    size_t first = id.find("__");
    if (first == std::string::npos) return std::nullopt;
    size_t second = id.find("__", first + 2);
    if (second == std::string::npos) return std::nullopt;
    Cell cell;
    cell.model_id = id.substr(0, first);
    auto strategy = strategy_from_slug(id.substr(first + 2, second - first - 2));
    auto task = task_from_slug(id.substr(second + 2));
    if (!strategy || !task) return std::nullopt;
    cell.strategy = *strategy;
    cell.task = *task;
    return cell;
}

namespace {

void persist_transcript(const RunContext& context, const std::string& fingerprint,
                        const std::string& text) {
    if (!context.transcripts_dir) return;
    std::filesystem::create_directories(*context.transcripts_dir);
    std::filesystem::path path = *context.transcripts_dir / (fingerprint + ".txt");
    if (std::filesystem::exists(path)) return;
    std::ofstream out(path, std::ios::binary);
    out << text;
}

ExtractionOutcome outcome_for_result(Task task, const CompletionResult& result,
                                     const RunContext& context, const std::string& body,
                                     std::string* fingerprint) {
    if (const auto* completion = std::get_if<Completion>(&result)) {
        *fingerprint = sha256_hex(completion->text);
        return extract_for_task(task, completion->text, context.extraction, body);
    }
    fingerprint->clear();
    const auto& error = std::get<GatewayError>(result);
    return {Failure{FailureKind::Unavailable, error.message}};
}

} // namespace

std::vector<ClassificationRecord> run_cell(const Cell& cell, const StudyModel& model,
                                           const Corpus& corpus, Backend& backend,
                                           int instance_index, const RunContext& context) {
    if (corpus.empty()) {
        throw EmptyInput("run_cell requires a non-empty corpus");
    }
    if (!context.templates) {
        throw ConfigError("run context lacks a template library");
    }

    std::vector<RenderedPrompt> prompts;
    prompts.reserve(corpus.size());
    for (const auto& text : corpus.texts) {
        // Whitespace-only bodies cannot be rendered; substitute a marker the
        // record keeps as Unavailable below.
        if (text.body.empty()) {
            prompts.push_back(RenderedPrompt{});
            continue;
        }
        prompts.push_back(
            context.templates->render(cell.task, cell.strategy, model.profile, text.body));
    }

    // Batch only the renderable prompts, then stitch results back in order.
    std::vector<size_t> live_indices;
    std::vector<RenderedPrompt> live_prompts;
    for (size_t i = 0; i < prompts.size(); ++i) {
        if (!prompts[i].text.empty()) {
            live_indices.push_back(i);
            live_prompts.push_back(prompts[i]);
        }
    }
    std::vector<CompletionResult> live_results =
        complete_batch(backend, model.config, live_prompts, instance_index, context.gateway);

    std::vector<ClassificationRecord> records(corpus.size());
    for (size_t i = 0; i < corpus.size(); ++i) {
        records[i].unit_id = corpus.texts[i].id;
        records[i].cell = cell;
        records[i].instance_index = instance_index;
        records[i].outcome = {Failure{FailureKind::Unavailable, "empty body"}};
    }
    for (size_t j = 0; j < live_indices.size(); ++j) {
        size_t i = live_indices[j];
        std::string fingerprint;
        records[i].outcome = outcome_for_result(cell.task, live_results[j], context,
                                                corpus.texts[i].body, &fingerprint);
        records[i].completion_fingerprint = fingerprint;
        if (const auto* completion = std::get_if<Completion>(&live_results[j])) {
            persist_transcript(context, fingerprint, completion->text);
        }
    }
    return records;
}

std::pair<Corpus, PrefilterReport> prefilter_relevance(const Corpus& corpus,
                                                       const StudyModel& model_a,
                                                       const StudyModel& model_b,
                                                       Backend& backend,
                                                       const RunContext& context) {
    if (corpus.empty()) {
        throw EmptyInput("prefilter_relevance requires a non-empty corpus");
    }
    Cell cell_a{model_a.config.model_id, Strategy::ZeroShot, Task::Relevance};
    Cell cell_b{model_b.config.model_id, Strategy::ZeroShot, Task::Relevance};
    auto records_a = run_cell(cell_a, model_a, corpus, backend, 0, context);
    auto records_b = run_cell(cell_b, model_b, corpus, backend, 0, context);

    PrefilterReport report;
    report.total = corpus.size();
    size_t both_labeled = 0;
    size_t both_agree = 0;

    Corpus kept;
    for (size_t i = 0; i < corpus.size(); ++i) {
        const auto& a = records_a[i].outcome;
        const auto& b = records_b[i].outcome;
        bool keep;
        if (a.is_failure() || b.is_failure()) {
            keep = true;
            ++report.unresolved;
            report.unresolved_ids.push_back(corpus.texts[i].id);
        } else {
            ++both_labeled;
            bool ra = std::get<RelevanceLabel>(a.value).relevant;
            bool rb = std::get<RelevanceLabel>(b.value).relevant;
            if (ra == rb) ++both_agree;
            if (ra && rb) {
                ++report.both_relevant;
                keep = true;
            } else if (!ra && !rb) {
                ++report.both_not_relevant;
                keep = false;
            } else {
                ++report.conflicts;
                keep = true;
            }
        }
        if (keep) {
            kept.texts.push_back(corpus.texts[i]);
        }
    }
    report.kept = kept.size();
    report.excluded = report.total - report.kept;
    report.agreement_rate = both_labeled ? double(both_agree) / double(both_labeled) : 0.0;
    kept.source_fingerprint = corpus_fingerprint(kept);
    return {std::move(kept), report};
}

LabelVector records_to_label_vector(const std::vector<ClassificationRecord>& records,
                                    const std::string& coder_id) {
    LabelVector vector;
    vector.coder_id = coder_id;
    for (const auto& record : records) {
        if (!record.outcome.is_failure()) {
            vector.labels[record.unit_id] = record.outcome.label();
        }
    }
    return vector;
}

ReliabilityResult run_reliability(const Cell& cell, const StudyModel& model,
                                  const Corpus& corpus, Backend& backend, int k,
                                  const RunContext& context, const BootstrapOptions& bootstrap) {
    if (k < 2) {
        throw ConfigError("run_reliability requires k >= 2");
    }
    ReliabilityResult result;
    result.k = k;
    std::vector<LabelVector> vectors;
    for (int instance = 0; instance < k; ++instance) {
        auto records = run_cell(cell, model, corpus, backend, instance, context);
        vectors.push_back(
            records_to_label_vector(records, cell.id() + "#" + std::to_string(instance)));
        result.per_instance_records.push_back(std::move(records));
    }

    result.alpha = krippendorff_alpha(vectors);
    if (result.alpha.ok()) {
        result.alpha.result.ci = bootstrap_alpha_ci(vectors, bootstrap);
    }

    // Units where at least two instances produced labels that differ.
    std::map<std::string, std::set<std::string>> seen;
    std::map<std::string, int> present;
    for (const auto& v : vectors) {
        for (const auto& [unit, label] : v.labels) {
            seen[unit].insert(label);
            ++present[unit];
        }
    }
    for (const auto& [unit, labels] : seen) {
        if (present[unit] >= 2 && labels.size() > 1) {
            result.disagreement_units.push_back(unit);
        }
    }
    std::sort(result.disagreement_units.begin(), result.disagreement_units.end());
    return result;
}

double round_half_up_2(double value) {
    return std::floor(value * 100.0 + 0.5) / 100.0;
}

ShareTable aggregate_shares(const std::vector<ClassificationRecord>& records) {
    if (records.empty()) {
        throw EmptyInput("aggregate_shares requires at least one record");
    }
    ShareTable table;
    table.cell_id = records.front().cell.id();
    table.task = records.front().cell.task;

    CodeGrammar grammar = expected_code_grammar(table.task);
    std::map<std::string, size_t> counts;
    for (const auto& label : grammar.label_domain) {
        counts[label] = 0;
    }
    for (const auto& record : records) {
        if (record.outcome.is_failure()) {
            ++table.failures;
            continue;
        }
        ++counts[record.outcome.label()];
        ++table.denominator;
    }
    for (const auto& label : grammar.label_domain) {
        ShareRow row;
        row.label = label;
        row.count = counts[label];
        row.percent = table.denominator
                          ? round_half_up_2(double(row.count) * 100.0 / double(table.denominator))
                          : 0.0;
        table.rows.push_back(row);
    }
    return table;
}

DisagreementReport disagreement_report(const std::vector<ClassificationRecord>& records,
                                       const LabelVector& reference, const Corpus& corpus) {
    std::map<std::string, const UserText*> bodies;
    for (const auto& text : corpus.texts) {
        bodies[text.id] = &text;
    }

    std::map<std::pair<std::string, std::string>, std::vector<DisagreementEntry>> groups;
    DisagreementReport report;
    report.total_units = records.size();
    for (const auto& record : records) {
        auto ref = reference.labels.find(record.unit_id);
        if (ref == reference.labels.end()) {
            throw ConfigError("reference vector does not cover unit " + record.unit_id);
        }
        std::string model_label = record.outcome.is_failure()
                                      ? failure_kind_name(record.outcome.failure()->kind)
                                      : record.outcome.label();
        if (!record.outcome.is_failure() && model_label == ref->second) continue;

        DisagreementEntry entry;
        entry.unit_id = record.unit_id;
        entry.reference_label = ref->second;
        entry.model_label = model_label;
        entry.completion_fingerprint = record.completion_fingerprint;
        entry.cell_id = record.cell.id();
        auto body = bodies.find(record.unit_id);
        if (body != bodies.end()) {
            entry.body = body->second->body;
        }
        if (record.outcome.is_failure()) {
            entry.raw_response = record.outcome.failure()->raw_response;
        }
        groups[{ref->second, model_label}].push_back(std::move(entry));
        ++report.mismatches;
    }

    for (auto& [key, entries] : groups) {
        std::sort(entries.begin(), entries.end(),
                  [](const DisagreementEntry& a, const DisagreementEntry& b) {
                      return a.unit_id < b.unit_id;
                  });
        DisagreementGroup group;
        group.from_label = key.first;
        group.to_label = key.second;
        group.entries = std::move(entries);
        report.groups.push_back(std::move(group));
    }
    return report;
}

namespace {

json record_to_json(const ClassificationRecord& record) {
    json j;
    j["unit_id"] = record.unit_id;
    j["model"] = record.cell.model_id;
    j["strategy"] = strategy_slug(record.cell.strategy);
    j["task"] = task_slug(record.cell.task);
    j["instance"] = record.instance_index;
    if (record.outcome.is_failure()) {
        j["failure"] = failure_kind_name(record.outcome.failure()->kind);
    } else {
        j["label"] = record.outcome.label();
    }
    j["fingerprint"] = record.completion_fingerprint;
    return j;
}

} // namespace

void write_records_file(const std::vector<ClassificationRecord>& records,
                        const std::filesystem::path& path) {
    std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error("IoError", "cannot write records file: " + path.string());
    }
    for (const auto& record : records) {
        out << record_to_json(record).dump() << "\n";
    }
}

std::vector<ClassificationRecord> read_records_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw UpstreamArtifactMissing("cannot open records file: " + path.string());
    }
    std::vector<ClassificationRecord> records;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded()) {
            throw Error("IoError", "malformed record line in " + path.string());
        }
        ClassificationRecord record;
        record.unit_id = j.at("unit_id").get<std::string>();
        record.cell.model_id = j.at("model").get<std::string>();
        record.cell.strategy = strategy_from_slug(j.at("strategy").get<std::string>())
                                   .value_or(Strategy::ZeroShot);
        record.cell.task = task_from_slug(j.at("task").get<std::string>()).value_or(Task::Absa);
        record.instance_index = j.value("instance", 0);
        record.completion_fingerprint = j.value("fingerprint", "");
        if (j.contains("failure")) {
            record.outcome = {Failure{
                failure_kind_from_name(j["failure"].get<std::string>())
                    .value_or(FailureKind::Unavailable),
                ""}};
        } else {
            std::string label = j.at("label").get<std::string>();
            CodeGrammar grammar = expected_code_grammar(record.cell.task);
            switch (grammar.kind) {
                case CodeGrammar::Kind::TokenSet: {
                    ExtractionOutcome outcome{AbsaLabel::Neutral};
                    for (AbsaLabel candidate : {AbsaLabel::Positive, AbsaLabel::Negative,
                                                AbsaLabel::Neutral, AbsaLabel::NoMention}) {
                        if (absa_label_name(candidate) == label) outcome = {candidate};
                    }
                    record.outcome = outcome;
                    break;
                }
                case CodeGrammar::Kind::BinaryField:
                    record.outcome = {BinaryLabel{label == "1" ? 1 : 0}};
                    break;
                case CodeGrammar::Kind::RelevanceTokens:
                    record.outcome = {RelevanceLabel{label == "relevant"}};
                    break;
            }
        }
        records.push_back(std::move(record));
    }
    return records;
}

} // namespace kappaforge
