#include "doctest.h"

#include "helpers.hpp"

#include "kappaforge/extraction.hpp"

#include "json.hpp"

#include <fstream>
#include <random>

using namespace kappaforge;

namespace {

const ExtractionConfig& config() {
    static ExtractionConfig c = default_extraction_config();
    return c;
}

std::string outcome_string(const ExtractionOutcome& outcome) {
    if (outcome.is_failure()) {
        return "failure:" + failure_kind_name(outcome.failure()->kind);
    }
    return outcome.label();
}

} // namespace

TEST_CASE("absa extraction per the template contract") {
    auto pos = extract_absa("The review praises packs.\nCode: Pos_code", config());
    CHECK(outcome_string(pos) == "Positive");

    auto decoy = extract_absa(
        "Reasoning mentions Pos_code early on but the verdict lands elsewhere.\n"
        "Final Code: Neg_code",
        config());
    CHECK(outcome_string(decoy) == "Negative");

    auto essay = extract_absa("A long essay about an election with no code token at all.",
                              config());
    CHECK(outcome_string(essay) == "failure:MissingCode");
}

TEST_CASE("absa tokens are matched case-sensitively") {
    CHECK(outcome_string(extract_absa("code: pos_code", config())) == "failure:MissingCode");
    CHECK(outcome_string(extract_absa("Code: Pos_code", config())) == "Positive");
}

TEST_CASE("binary extraction tolerates brackets and casing of the field name") {
    CHECK(outcome_string(extract_binary("Gambling_Mention", "Code:\nGambling_Mention: [1]",
                                        config())) == "1");
    CHECK(outcome_string(extract_binary("Payment_Willingness_Mention",
                                        "...analysis...\nPayment_Willingness_Mention: 0",
                                        config())) == "0");
    CHECK(outcome_string(extract_binary("Gaming_Exp_Mention", "gaming_exp_mention: [1]",
                                        config())) == "1");
    CHECK(outcome_string(extract_binary("Gaming_Exp_Mention", "Gaming_Exp_Mention: [maybe]",
                                        config())) == "failure:MissingCode");
    // Two-digit garbage does not half-match.
    CHECK(outcome_string(extract_binary("Gambling_Mention", "Gambling_Mention: 10", config())) ==
          "failure:MissingCode");
}

TEST_CASE("binary extraction takes the last occurrence") {
    auto outcome = extract_binary(
        "Gambling_Mention", "Draft: Gambling_Mention: [1]\nCorrected: Gambling_Mention: [0]",
        config());
    CHECK(outcome_string(outcome) == "0");
}

TEST_CASE("relevance tokens respect the not_ prefix") {
    CHECK(outcome_string(extract_relevance("Relevance_code: [relevant]", config())) == "relevant");
    CHECK(outcome_string(extract_relevance("Relevance_code: [not_relevant]", config())) ==
          "not_relevant");
    CHECK(outcome_string(extract_relevance("clearly NOT_RELEVANT here", config())) ==
          "not_relevant");
    CHECK(outcome_string(extract_relevance("nothing to see", config())) == "failure:MissingCode");
}

TEST_CASE("refusal detection needs a phrase and the absence of codes") {
    CHECK(detect_refusal("I'm sorry, but I can't assist with content containing slurs.",
                         config()));
    CHECK(detect_refusal("If you are in crisis, please reach out...", config()));
    CHECK_FALSE(detect_refusal("Code: Neg_code", config()));
    CHECK_FALSE(detect_refusal("I'm sorry, but here you go.\nCode: Neg_code", config()));
    CHECK_FALSE(detect_refusal("perfectly ordinary analysis", config()));
}

TEST_CASE("refusal detection can be disabled") {
    ExtractionConfig no_refusal = default_extraction_config();
    no_refusal.detect_refusal = false;
    auto outcome = extract_absa("I'm sorry, but I can't assist.", no_refusal);
    CHECK(outcome_string(outcome) == "failure:MissingCode");
}

TEST_CASE("off-task heuristic fires only when enabled") {
    std::string essay = "The election season brought rallies, debates and endless punditry "
                        "across every channel.";
    std::string input = "skyskyskysky";
    CHECK(outcome_string(extract_for_task(Task::Absa, essay, config(), input)) ==
          "failure:MissingCode");

    ExtractionConfig offtask = default_extraction_config();
    offtask.offtask_detection = true;
    CHECK(outcome_string(extract_for_task(Task::Absa, essay, offtask, input)) ==
          "failure:OffTask");

    // A response that echoes the input is kept as MissingCode.
    std::string echo = "The text about loot crates and gacha pulls mentions quality balance.";
    std::string related_input = "loot crates gacha pulls quality balance everywhere";
    CHECK(outcome_string(extract_for_task(Task::Absa, echo, offtask, related_input)) ==
          "failure:MissingCode");
}

TEST_CASE("bundled transcript corpus is labeled exactly as expected") {
    std::ifstream in(kftest::repo_dir() / "data" / "extraction_corpus.jsonl");
    REQUIRE(in.good());
    ExtractionConfig offtask = default_extraction_config();
    offtask.offtask_detection = true;

    std::string line;
    int cases = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto j = nlohmann::json::parse(line);
        Task task = *task_from_slug(j.at("task").get<std::string>());
        std::string response = j.at("response").get<std::string>();
        std::string expected = j.at("expected").get<std::string>();

        auto outcome = extract_for_task(task, response, config());
        CAPTURE(j.at("name").get<std::string>());
        CHECK(outcome_string(outcome) == expected);

        if (j.contains("expected_offtask")) {
            auto with_offtask = extract_for_task(task, response, offtask,
                                                 j.at("input_body").get<std::string>());
            CHECK(outcome_string(with_offtask) == j.at("expected_offtask").get<std::string>());
        }
        ++cases;
    }
    CHECK(cases >= 30);
}

TEST_CASE("terse compliant answers map each token to its label") {
    CHECK(outcome_string(extract_absa("Code: Pos_code", config())) == "Positive");
    CHECK(outcome_string(extract_absa("Code: Neg_code", config())) == "Negative");
    CHECK(outcome_string(extract_absa("Code: 0_code", config())) == "Neutral");
    CHECK(outcome_string(extract_absa("Code: Nomention_code", config())) == "NoMention");
}

TEST_CASE("prefixing reasoning never changes a trailing code") {
    std::mt19937_64 rng(808);
    const std::string prefixes[] = {
        "Step by step, the experts weighed every clause.\n",
        "Some riff about Pos_code being tempting, yet...\n",
        "(noise) ))) ### \n\n",
    };
    for (int trial = 0; trial < 50; ++trial) {
        std::string code = (rng() % 2) ? "Code: Neg_code" : "Code: Nomention_code";
        std::string expected = (code == "Code: Neg_code") ? "Negative" : "NoMention";
        std::string text = code;
        for (int p = 0; p < 3; ++p) {
            if (rng() % 2) text = prefixes[rng() % 3] + text;
        }
        CHECK(outcome_string(extract_absa(text, config())) == expected);
    }
}

TEST_CASE("extraction is total on arbitrary bytes") {
    std::mt19937_64 rng(31415);
    for (int trial = 0; trial < 200; ++trial) {
        std::string garbage;
        size_t len = rng() % 300;
        for (size_t i = 0; i < len; ++i) {
            garbage.push_back(char(rng() % 256));
        }
        CHECK_NOTHROW(extract_absa(garbage, config()));
        CHECK_NOTHROW(extract_binary("Gambling_Mention", garbage, config()));
        CHECK_NOTHROW(extract_relevance(garbage, config()));
        auto outcome = extract_for_task(Task::Absa, garbage, config());
        bool has_value = !outcome.is_failure() || outcome.failure() != nullptr;
        CHECK(has_value);
    }
}

TEST_CASE("refusal phrase file loads and skips comments") {
    auto phrases = load_refusal_phrases((kftest::repo_dir() / "data" / "refusal_phrases.txt").string());
    CHECK(phrases.size() >= 4);
    for (const auto& p : phrases) {
        CHECK(p[0] != '#');
    }
}
