#pragma once

#include "kappaforge/agreement.hpp"
#include "kappaforge/corpus.hpp"
#include "kappaforge/extraction.hpp"
#include "kappaforge/gateway.hpp"
#include "kappaforge/prompt.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace kappaforge {

// One model x strategy x task classification cell. Relevance runs through
// the dedicated pre-filter, not through cells.
struct Cell {
    std::string model_id;
    Strategy strategy = Strategy::ZeroShot;
    Task task = Task::Absa;

    std::string id() const;
};

std::optional<Cell> cell_from_id(const std::string& id);

struct ClassificationRecord {
    std::string unit_id;
    Cell cell;
    int instance_index = 0;
    ExtractionOutcome outcome;
    std::string completion_fingerprint; // sha256 of the raw response; empty if unavailable
};

// Model config plus the prompt profile it renders with.
struct StudyModel {
    ModelConfig config;
    ModelProfile profile;
};

struct RunContext {
    const TemplateLibrary* templates = nullptr;
    ExtractionConfig extraction;
    // Raw responses are persisted here as one file per completion
    // fingerprint; empty disables persistence.
    std::optional<std::filesystem::path> transcripts_dir;
    GatewayOptions gateway;
};

class EmptyInput : public Error {
public:
    explicit EmptyInput(const std::string& msg) : Error("EmptyInput", msg) {}
};

// Renders, completes and extracts one cell over the corpus. Records align
// 1:1 with corpus texts; transport exhaustion becomes an Unavailable outcome.
std::vector<ClassificationRecord> run_cell(const Cell& cell, const StudyModel& model,
                                           const Corpus& corpus, Backend& backend,
                                           int instance_index, const RunContext& context);

struct PrefilterReport {
    size_t total = 0;
    size_t kept = 0;
    size_t excluded = 0;
    size_t both_relevant = 0;
    size_t both_not_relevant = 0;
    size_t conflicts = 0;   // kept by the conflict -> relevant rule
    size_t unresolved = 0;  // kept because a side failed
    double agreement_rate = 0.0; // over texts both models labeled
    std::vector<std::string> unresolved_ids;
};

// Two-model relevance screen: a text is kept unless both models answer
// not_relevant; conflicts and unresolved texts are kept.
std::pair<Corpus, PrefilterReport> prefilter_relevance(const Corpus& corpus,
                                                       const StudyModel& model_a,
                                                       const StudyModel& model_b,
                                                       Backend& backend,
                                                       const RunContext& context);

struct ReliabilityResult {
    AlphaOutcome alpha;
    std::vector<std::string> disagreement_units; // sorted unit ids
    std::vector<std::vector<ClassificationRecord>> per_instance_records;
    int k = 0;
};

// k independent instance runs (separately cached), Krippendorff's alpha over
// the instance label vectors with a bootstrap CI.
ReliabilityResult run_reliability(const Cell& cell, const StudyModel& model,
                                  const Corpus& corpus, Backend& backend, int k,
                                  const RunContext& context,
                                  const BootstrapOptions& bootstrap = {});

struct ShareRow {
    std::string label;
    size_t count = 0;
    double percent = 0.0; // two decimals, round-half-up
};

struct ShareTable {
    std::string cell_id;
    Task task = Task::Absa;
    std::vector<ShareRow> rows; // grammar label order, zero-count labels included
    size_t denominator = 0;     // non-failure records
    size_t failures = 0;
};

ShareTable aggregate_shares(const std::vector<ClassificationRecord>& records);

// Rounds to two decimals, half away from zero; share tables print at this
// precision.
double round_half_up_2(double value);

struct DisagreementEntry {
    std::string unit_id;
    std::string reference_label;
    std::string model_label; // label or failure kind
    std::string body;
    std::string raw_response;
    std::string completion_fingerprint; // resolves the full transcript
    std::string cell_id;
};

struct DisagreementGroup {
    std::string from_label; // reference
    std::string to_label;   // model
    std::vector<DisagreementEntry> entries; // sorted by unit id
};

struct DisagreementReport {
    std::vector<DisagreementGroup> groups; // sorted by (from, to)
    size_t total_units = 0;
    size_t mismatches = 0;
};

// Units where the cell's outcome differs from the reference (failures
// included), grouped by label transition; feeds the manual review loop of
// iterative prompt development.
DisagreementReport disagreement_report(const std::vector<ClassificationRecord>& records,
                                       const LabelVector& reference, const Corpus& corpus);

// Label vector over the records' non-failure outcomes.
LabelVector records_to_label_vector(const std::vector<ClassificationRecord>& records,
                                    const std::string& coder_id);

// Line-delimited JSON persistence for records.
void write_records_file(const std::vector<ClassificationRecord>& records,
                        const std::filesystem::path& path);
std::vector<ClassificationRecord> read_records_file(const std::filesystem::path& path);

} // namespace kappaforge
