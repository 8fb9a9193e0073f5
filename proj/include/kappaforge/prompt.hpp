#pragma once

#include "kappaforge/errors.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace kappaforge {

enum class Task { Relevance, Absa, GamingExperience, FinancialEngagement, GamblingComparison };
enum class Strategy { ZeroShot, ChainOfThought, ThreeOfThought };

std::string task_slug(Task task);
std::string strategy_slug(Strategy strategy);
std::optional<Task> task_from_slug(std::string_view slug);
std::optional<Strategy> strategy_from_slug(std::string_view slug);

std::vector<Task> all_tasks();
// The four tasks with published templates (everything except Relevance).
std::vector<Task> published_tasks();
std::vector<Strategy> all_strategies();

// A named model profile. `extra_additions` are identifiers into the snippet
// library (currently just "tot_llama_continuation"); additions gated on a
// strategy are skipped when that strategy is not in play.
struct ModelProfile {
    std::string profile_id = "default";
    std::vector<std::string> extra_additions;
};

ModelProfile default_profile();
ModelProfile llama_profile();

struct RenderedPrompt {
    std::string text;
    Task task = Task::Absa;
    Strategy strategy = Strategy::ZeroShot;
    std::string profile_id;
    std::string fingerprint; // sha256 of text
};

// Answer-code grammar for a task's final response.
struct CodeGrammar {
    enum class Kind { TokenSet, BinaryField, RelevanceTokens };
    Kind kind;
    std::vector<std::string> tokens; // TokenSet / RelevanceTokens
    std::string field_name;          // BinaryField
    std::vector<std::string> label_domain;
};

CodeGrammar expected_code_grammar(Task task);

class TemplateError : public Error {
public:
    explicit TemplateError(const std::string& msg) : Error("TemplateError", msg) {}
};

class UnsupportedCombination : public Error {
public:
    explicit UnsupportedCombination(const std::string& msg)
        : Error("UnsupportedCombination", msg) {}
};

// Holds the template segments loaded from a templates directory. Files are
// authoritative byte-for-byte; rendering joins segments with one blank line.
class TemplateLibrary {
public:
    static TemplateLibrary load(const std::filesystem::path& dir);

    // A Three-of-Thought render places the collaboration preamble before the
    // task instructions (it ends "The task is:"); the Chain-of-Thought
    // reminder goes after the user-text block.
    RenderedPrompt render(Task task, Strategy strategy, const ModelProfile& profile,
                          std::string_view body) const;

    const std::string& base_template(Task task) const;
    const std::string& segment(const std::string& name) const;

    // sha256 per segment file, keyed by file stem; recorded in run manifests.
    std::map<std::string, std::string> fingerprints() const;

private:
    std::map<std::string, std::string> segments_; // file stem -> bytes
};

} // namespace kappaforge
