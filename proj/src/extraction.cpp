#include "kappaforge/extraction.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>

namespace kappaforge {

namespace {

std::string to_lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    return out;
}

bool is_skippable(char c) {
    return c == ':' || c == '[' || c == ']' || c == ' ' || c == '\t' || c == '\r' || c == '\n';
}

// Finds the last "<field_name> ... 0|1" occurrence; returns the digit or
// nullopt. Field name comparison is case-insensitive.
std::optional<int> last_binary_value(std::string_view field_name, std::string_view response) {
    std::string hay = to_lower(response);
    std::string needle = to_lower(field_name);
    std::optional<int> result;
    size_t pos = 0;
    while ((pos = hay.find(needle, pos)) != std::string::npos) {
        size_t i = pos + needle.size();
        while (i < response.size() && is_skippable(response[i])) {
            ++i;
        }
        if (i < response.size() && (response[i] == '0' || response[i] == '1')) {
            bool digit_follows = i + 1 < response.size() && std::isdigit(
                static_cast<unsigned char>(response[i + 1]));
            if (!digit_follows) {
                result = response[i] - '0';
            }
        }
        pos += 1;
    }
    return result;
}

const std::vector<std::pair<std::string, AbsaLabel>>& absa_tokens() {
    static const std::vector<std::pair<std::string, AbsaLabel>> tokens = {
        {"Pos_code", AbsaLabel::Positive},
        {"Neg_code", AbsaLabel::Negative},
        {"0_code", AbsaLabel::Neutral},
        {"Nomention_code", AbsaLabel::NoMention},
    };
    return tokens;
}

std::optional<AbsaLabel> last_absa_token(std::string_view response) {
    std::optional<AbsaLabel> best;
    size_t best_pos = 0;
    for (const auto& [token, label] : absa_tokens()) {
        size_t pos = 0;
        while (true) {
            size_t found = response.find(token, pos);
            if (found == std::string_view::npos) break;
            if (!best || found >= best_pos) {
                best = label;
                best_pos = found;
            }
            pos = found + 1;
        }
    }
    return best;
}

// Relevance tokens, last occurrence wins; "relevant" that is merely the tail
// of "not_relevant" is not a standalone hit.
std::optional<bool> last_relevance_token(std::string_view response) {
    std::string hay = to_lower(response);
    std::optional<bool> result;
    size_t best_pos = 0;
    size_t pos = 0;
    while ((pos = hay.find("not_relevant", pos)) != std::string::npos) {
        if (!result || pos >= best_pos) {
            result = false;
            best_pos = pos;
        }
        pos += 1;
    }
    pos = 0;
    while ((pos = hay.find("relevant", pos)) != std::string::npos) {
        bool negated = pos >= 4 && hay.compare(pos - 4, 4, "not_") == 0;
        if (!negated && (!result || pos >= best_pos)) {
            result = true;
            best_pos = pos;
        }
        pos += 1;
    }
    return result;
}

bool contains_any_code_token(std::string_view response) {
    if (last_absa_token(response)) return true;
    for (const char* field : {"Gaming_Exp_Mention", "Payment_Willingness_Mention",
                              "Gambling_Mention", "Relevance_code"}) {
        if (last_binary_value(field, response)) return true;
    }
    if (last_relevance_token(response)) return true;
    return false;
}

std::set<std::string> content_words(std::string_view text) {
    static const std::set<std::string> stop = {"the", "and", "for", "that", "this",
                                               "with", "are", "was", "not", "you"};
    std::set<std::string> words;
    std::string current;
    auto flush = [&] {
        if (current.size() >= 3 && !stop.count(current)) {
            words.insert(current);
        }
        current.clear();
    };
    for (char c : text) {
        if (std::isalnum(static_cast<unsigned char>(c))) {
            current.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        } else {
            flush();
        }
    }
    flush();
    return words;
}

ExtractionOutcome missing_or_special(std::string_view response, const ExtractionConfig& config) {
    if (config.detect_refusal && detect_refusal(response, config)) {
        return {Failure{FailureKind::Refusal, std::string(response)}};
    }
    return {Failure{FailureKind::MissingCode, std::string(response)}};
}

} // namespace

std::string absa_label_name(AbsaLabel label) {
    switch (label) {
        case AbsaLabel::Positive: return "Positive";
        case AbsaLabel::Negative: return "Negative";
        case AbsaLabel::Neutral: return "Neutral";
        case AbsaLabel::NoMention: return "NoMention";
    }
    return "?";
}

std::string failure_kind_name(FailureKind kind) {
    switch (kind) {
        case FailureKind::MissingCode: return "MissingCode";
        case FailureKind::ConflictingCodes: return "ConflictingCodes";
        case FailureKind::Refusal: return "Refusal";
        case FailureKind::OffTask: return "OffTask";
        case FailureKind::Unavailable: return "Unavailable";
    }
    return "?";
}

std::optional<FailureKind> failure_kind_from_name(std::string_view name) {
    for (FailureKind k : {FailureKind::MissingCode, FailureKind::ConflictingCodes,
                          FailureKind::Refusal, FailureKind::OffTask, FailureKind::Unavailable}) {
        if (failure_kind_name(k) == name) return k;
    }
    return std::nullopt;
}

std::string ExtractionOutcome::label() const {
    if (const auto* absa = std::get_if<AbsaLabel>(&value)) {
        return absa_label_name(*absa);
    }
    if (const auto* binary = std::get_if<BinaryLabel>(&value)) {
        return binary->value ? "1" : "0";
    }
    if (const auto* rel = std::get_if<RelevanceLabel>(&value)) {
        return rel->relevant ? "relevant" : "not_relevant";
    }
    return "";
}

std::vector<std::string> default_refusal_phrases() {
    return {
        "I can't assist",
        "I cannot assist",
        "I'm sorry, but",
        "cannot help with",
        "can't help with",
        "If you are in crisis",
        "I am unable to help",
    };
}

std::vector<std::string> load_refusal_phrases(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error("IoError", "cannot open refusal phrase list: " + path);
    }
    std::vector<std::string> phrases;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        phrases.push_back(line);
    }
    return phrases;
}

ExtractionConfig default_extraction_config() {
    ExtractionConfig config;
    config.refusal_phrases = default_refusal_phrases();
    return config;
}

bool detect_refusal(std::string_view response, const ExtractionConfig& config) {
    if (contains_any_code_token(response)) return false;
    std::string hay = to_lower(response);
    for (const auto& phrase : config.refusal_phrases) {
        if (hay.find(to_lower(phrase)) != std::string::npos) return true;
    }
    return false;
}

double content_word_overlap(std::string_view response, std::string_view input) {
    std::set<std::string> rw = content_words(response);
    if (rw.empty()) return 0.0;
    std::set<std::string> iw = content_words(input);
    size_t shared = 0;
    for (const auto& w : rw) {
        if (iw.count(w)) ++shared;
    }
    return double(shared) / double(rw.size());
}

ExtractionOutcome extract_absa(std::string_view response, const ExtractionConfig& config) {
    if (auto label = last_absa_token(response)) {
        return {*label};
    }
    return missing_or_special(response, config);
}

ExtractionOutcome extract_binary(std::string_view field_name, std::string_view response,
                                 const ExtractionConfig& config) {
    if (auto v = last_binary_value(field_name, response)) {
        return {BinaryLabel{*v}};
    }
    return missing_or_special(response, config);
}

ExtractionOutcome extract_relevance(std::string_view response, const ExtractionConfig& config) {
    if (auto v = last_relevance_token(response)) {
        return {RelevanceLabel{*v}};
    }
    return missing_or_special(response, config);
}

ExtractionOutcome extract_for_task(Task task, std::string_view response,
                                   const ExtractionConfig& config, std::string_view input_body) {
    CodeGrammar grammar = expected_code_grammar(task);
    ExtractionOutcome outcome;
    switch (grammar.kind) {
        case CodeGrammar::Kind::TokenSet:
            outcome = extract_absa(response, config);
            break;
        case CodeGrammar::Kind::BinaryField:
            outcome = extract_binary(grammar.field_name, response, config);
            break;
        case CodeGrammar::Kind::RelevanceTokens:
            outcome = extract_relevance(response, config);
            break;
    }
    if (outcome.is_failure() && outcome.failure()->kind == FailureKind::MissingCode &&
        config.offtask_detection && !input_body.empty() &&
        content_word_overlap(response, input_body) < config.offtask_overlap_threshold) {
        return {Failure{FailureKind::OffTask, std::string(response)}};
    }
    return outcome;
}

} // namespace kappaforge
