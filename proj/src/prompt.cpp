#include "kappaforge/prompt.hpp"

#include "kappaforge/sha256.hpp"

#include <fstream>
#include <sstream>

namespace kappaforge {

namespace {

struct AdditionSpec {
    const char* segment;                // file stem
    std::optional<Strategy> gate;       // addition applies only under this strategy
};

const std::map<std::string, AdditionSpec>& addition_library() {
    static const std::map<std::string, AdditionSpec> lib = {
        {"tot_llama_continuation", {"tot__llama_continuation", Strategy::ThreeOfThought}},
        {"cot_reminder", {"cot__b", Strategy::ChainOfThought}},
    };
    return lib;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw TemplateError("missing template file: " + path.string());
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

} // namespace

std::string task_slug(Task task) {
    switch (task) {
        case Task::Relevance: return "relevance";
        case Task::Absa: return "absa";
        case Task::GamingExperience: return "gaming_experience";
        case Task::FinancialEngagement: return "financial_engagement";
        case Task::GamblingComparison: return "gambling_comparison";
    }
    return "?";
}

std::string strategy_slug(Strategy strategy) {
    switch (strategy) {
        case Strategy::ZeroShot: return "zs";
        case Strategy::ChainOfThought: return "cot";
        case Strategy::ThreeOfThought: return "tot";
    }
    return "?";
}

std::optional<Task> task_from_slug(std::string_view slug) {
    for (Task t : all_tasks()) {
        if (task_slug(t) == slug) return t;
    }
    return std::nullopt;
}

std::optional<Strategy> strategy_from_slug(std::string_view slug) {
    for (Strategy s : all_strategies()) {
        if (strategy_slug(s) == slug) return s;
    }
    return std::nullopt;
}

std::vector<Task> all_tasks() {
    return {Task::Relevance, Task::Absa, Task::GamingExperience, Task::FinancialEngagement,
            Task::GamblingComparison};
}

std::vector<Task> published_tasks() {
    return {Task::Absa, Task::GamingExperience, Task::FinancialEngagement,
            Task::GamblingComparison};
}

std::vector<Strategy> all_strategies() {
    return {Strategy::ZeroShot, Strategy::ChainOfThought, Strategy::ThreeOfThought};
}

ModelProfile default_profile() { return {"default", {}}; }

ModelProfile llama_profile() { return {"llama", {"tot_llama_continuation"}}; }

CodeGrammar expected_code_grammar(Task task) {
    switch (task) {
        case Task::Absa:
            return {CodeGrammar::Kind::TokenSet,
                    {"Pos_code", "Neg_code", "0_code", "Nomention_code"},
                    "",
                    {"Positive", "Negative", "Neutral", "NoMention"}};
        case Task::GamingExperience:
            return {CodeGrammar::Kind::BinaryField, {}, "Gaming_Exp_Mention", {"0", "1"}};
        case Task::FinancialEngagement:
            return {CodeGrammar::Kind::BinaryField, {}, "Payment_Willingness_Mention", {"0", "1"}};
        case Task::GamblingComparison:
            return {CodeGrammar::Kind::BinaryField, {}, "Gambling_Mention", {"0", "1"}};
        case Task::Relevance:
            return {CodeGrammar::Kind::RelevanceTokens,
                    {"relevant", "not_relevant"},
                    "Relevance_code",
                    {"relevant", "not_relevant"}};
    }
    throw UnsupportedCombination("unknown task");
}

TemplateLibrary TemplateLibrary::load(const std::filesystem::path& dir) {
    TemplateLibrary lib;
    const char* required[] = {
        "relevance__base",        "absa__base",
        "gaming_experience__base", "financial_engagement__base",
        "gambling_comparison__base", "cot__a",
        "cot__b",                 "tot__base",
        "tot__llama_continuation", "usertext__block"};
    for (const char* stem : required) {
        lib.segments_[stem] = read_file(dir / (std::string(stem) + ".txt"));
    }
    if (lib.segments_["usertext__block"].find("{USERTEXT}") == std::string::npos) {
        throw TemplateError("usertext__block.txt lacks the {USERTEXT} placeholder");
    }
    return lib;
}

const std::string& TemplateLibrary::base_template(Task task) const {
    return segment(task_slug(task) + "__base");
}

const std::string& TemplateLibrary::segment(const std::string& name) const {
    auto it = segments_.find(name);
    if (it == segments_.end()) {
        throw TemplateError("unknown template segment: " + name);
    }
    return it->second;
}

std::map<std::string, std::string> TemplateLibrary::fingerprints() const {
    std::map<std::string, std::string> out;
    for (const auto& [name, text] : segments_) {
        out[name] = sha256_hex(text);
    }
    return out;
}

RenderedPrompt TemplateLibrary::render(Task task, Strategy strategy, const ModelProfile& profile,
                                       std::string_view body) const {
    if (body.empty()) {
        throw UnsupportedCombination("render_prompt requires a non-empty body");
    }

    std::vector<std::string> parts;
    if (strategy == Strategy::ThreeOfThought) {
        parts.push_back(segment("tot__base"));
    }
    parts.push_back(base_template(task));
    if (strategy == Strategy::ChainOfThought) {
        parts.push_back(segment("cot__a"));
    }
    for (const auto& id : profile.extra_additions) {
        auto it = addition_library().find(id);
        if (it == addition_library().end()) {
            throw UnsupportedCombination("unknown profile addition: " + id);
        }
        if (it->second.gate && *it->second.gate != strategy) continue;
        parts.push_back(segment(it->second.segment));
    }

    std::string block = segment("usertext__block");
    size_t pos = block.find("{USERTEXT}");
    block.replace(pos, std::string("{USERTEXT}").size(), std::string(body));
    parts.push_back(std::move(block));

    if (strategy == Strategy::ChainOfThought) {
        parts.push_back(segment("cot__b"));
    }

    std::string text;
    for (size_t i = 0; i < parts.size(); ++i) {
        if (i > 0) text.push_back('\n');
        text += parts[i];
    }

    RenderedPrompt out;
    out.text = std::move(text);
    out.task = task;
    out.strategy = strategy;
    out.profile_id = profile.profile_id;
    out.fingerprint = sha256_hex(out.text);
    return out;
}

} // namespace kappaforge
