#pragma once

#include "kappaforge/errors.hpp"

#include <cstdint>
#include <iosfwd>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace kappaforge {

enum class QualityFlag { Repetition, Empty, OverLength };

std::string quality_flag_name(QualityFlag flag);

// One review unit. `body` is preserved byte-exact from the source file;
// quality flags are derived from the body and never serialized.
struct UserText {
    std::string id;
    std::string game_id;
    std::string game_name;
    std::string language;
    std::string body;
    std::map<std::string, std::string> metadata;
    std::set<QualityFlag> quality_flags;

    bool operator==(const UserText& other) const {
        return id == other.id && game_id == other.game_id && game_name == other.game_name &&
               language == other.language && body == other.body && metadata == other.metadata;
    }
};

struct Corpus {
    std::vector<UserText> texts; // load order
    std::string source_fingerprint;

    size_t size() const { return texts.size(); }
    bool empty() const { return texts.empty(); }
};

struct LoadReport {
    struct Rejection {
        size_t line_number; // 1-based
        std::string reason; // "MalformedRecord" or "DuplicateId"
        std::string detail;
    };
    std::vector<Rejection> rejected;
};

struct FilterSpec {
    // Empty set means the language filter is disabled.
    std::set<std::string> allowed_languages;
    // Empty list means the keyword filter is disabled.
    std::vector<std::string> keywords;
    bool case_insensitive = true;
};

struct FilterReport {
    size_t retained = 0;
    size_t language_excluded = 0;
    size_t no_keyword = 0;

    // CSV with columns reason,count.
    std::string to_csv() const;
};

struct SampleSpec {
    size_t target_size = 0;
    std::vector<std::string> strata_keys; // ordered subset of {"game_id", "language"}
    uint64_t seed = 0;
};

struct QualityConfig {
    double repetition_threshold = 0.8;
    size_t repetition_min_length = 6;
    size_t overlength_cap = 16000;
};

class MalformedSpec : public Error {
public:
    explicit MalformedSpec(const std::string& msg) : Error("MalformedSpec", msg) {}
};

class TargetTooLarge : public Error {
public:
    explicit TargetTooLarge(const std::string& msg) : Error("TargetTooLarge", msg) {}
};

// The keyword list enumerated in the classification prompts; configurable.
std::vector<std::string> default_keywords();

// Reads line-delimited JSON records. Invalid lines are rejected into the
// report and loading continues. Duplicate ids keep the first occurrence.
Corpus load_corpus(std::istream& in, LoadReport& report, const QualityConfig& quality = {});
Corpus load_corpus_file(const std::string& path, LoadReport& report,
                        const QualityConfig& quality = {});

// One JSON object per line; metadata keys are emitted as top-level fields.
void serialize_corpus(const Corpus& corpus, std::ostream& out);
void serialize_corpus_file(const Corpus& corpus, const std::string& path);

// Keeps texts whose language is allowed and whose body contains at least one
// keyword (substring match). Never reorders retained texts.
std::pair<Corpus, FilterReport> apply_filters(const Corpus& corpus, const FilterSpec& spec);

std::set<QualityFlag> quality_screen(const UserText& text, const QualityConfig& config = {});

// Deterministic stratified sample: equal allocation per stratum (floor),
// remainder to the largest strata (size desc, stratum key asc), shortfall
// redistributed by the same rule. Output preserves corpus order.
Corpus stratified_sample(const Corpus& corpus, const SampleSpec& spec);

// Content hash over the canonical serialization of every record.
std::string corpus_fingerprint(const Corpus& corpus);

} // namespace kappaforge
