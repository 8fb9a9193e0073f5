#pragma once

#include "kappaforge/prompt.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace kappaforge {

enum class AbsaLabel { Positive, Negative, Neutral, NoMention };
enum class FailureKind { MissingCode, ConflictingCodes, Refusal, OffTask, Unavailable };

std::string absa_label_name(AbsaLabel label);
std::string failure_kind_name(FailureKind kind);
std::optional<FailureKind> failure_kind_from_name(std::string_view name);

struct BinaryLabel {
    int value = 0; // 0 or 1
};

struct RelevanceLabel {
    bool relevant = false;
};

struct Failure {
    FailureKind kind = FailureKind::MissingCode;
    std::string raw_response; // kept for audit
};

// Exactly one variant is populated; extraction is total and never throws on
// response content.
struct ExtractionOutcome {
    std::variant<AbsaLabel, BinaryLabel, RelevanceLabel, Failure> value;

    bool is_failure() const { return std::holds_alternative<Failure>(value); }
    const Failure* failure() const { return std::get_if<Failure>(&value); }
    // Categorical label string for agreement statistics; empty on failure.
    std::string label() const;
};

struct ExtractionConfig {
    std::vector<std::string> refusal_phrases; // substring patterns, case-insensitive
    bool detect_refusal = true;
    bool offtask_detection = false; // default-off except in reports
    double offtask_overlap_threshold = 0.10;
};

// Bundled refusal phrase defaults (data/refusal_phrases.txt mirrors these).
std::vector<std::string> default_refusal_phrases();
std::vector<std::string> load_refusal_phrases(const std::string& path);
ExtractionConfig default_extraction_config();

// Scan for the four ABSA code tokens (case-sensitive); the last occurrence
// wins, matching the templates' final-code-at-the-end contract.
ExtractionOutcome extract_absa(std::string_view response, const ExtractionConfig& config);

// Scan for `<field_name>` (case-insensitive) followed by 0 or 1, allowing
// ':', whitespace and brackets in between; last occurrence wins.
ExtractionOutcome extract_binary(std::string_view field_name, std::string_view response,
                                 const ExtractionConfig& config);

// Scan for the relevant / not_relevant tokens (case-insensitive); an
// occurrence of "relevant" inside "not_relevant" does not count alone.
ExtractionOutcome extract_relevance(std::string_view response, const ExtractionConfig& config);

// Dispatch on the task's answer-code grammar. `input_body` feeds the
// off-task heuristic when it is enabled.
ExtractionOutcome extract_for_task(Task task, std::string_view response,
                                   const ExtractionConfig& config,
                                   std::string_view input_body = {});

// True iff a refusal phrase matches (case-insensitive) and the response
// contains no valid code token of any task grammar.
bool detect_refusal(std::string_view response, const ExtractionConfig& config);

// Share of the response's distinct content words that also occur in the
// input text; drives the off-task heuristic.
double content_word_overlap(std::string_view response, std::string_view input);

} // namespace kappaforge
