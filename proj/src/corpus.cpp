#include "kappaforge/corpus.hpp"

#include "kappaforge/sha256.hpp"

#include "json.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <random>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace kappaforge {

using nlohmann::json;

namespace {

const char* kCoreFields[] = {"id", "game_id", "game_name", "language", "body"};

bool is_core_field(const std::string& key) {
    for (const char* f : kCoreFields) {
        if (key == f) return true;
    }
    return false;
}

std::string to_lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    return out;
}

json record_to_json(const UserText& t) {
    json j;
    j["id"] = t.id;
    j["game_id"] = t.game_id;
    j["game_name"] = t.game_name;
    j["language"] = t.language;
    j["body"] = t.body;
    for (const auto& [k, v] : t.metadata) {
        j[k] = v;
    }
    return j;
}

std::string scalar_to_string(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    return v.dump();
}

// True when the most frequent byte or the most frequent 3-gram (counted
// non-overlapping) covers at least `threshold` of the body.
bool is_repetitive(const std::string& body, double threshold) {
    if (body.empty()) return false;
    std::array<size_t, 256> char_counts{};
    for (unsigned char c : body) {
        ++char_counts[c];
    }
    size_t max_char = *std::max_element(char_counts.begin(), char_counts.end());
    if (double(max_char) >= threshold * double(body.size())) return true;

    if (body.size() >= 3) {
        std::unordered_set<std::string> seen;
        for (size_t i = 0; i + 3 <= body.size(); ++i) {
            std::string gram = body.substr(i, 3);
            if (!seen.insert(gram).second) continue;
            size_t covered = 0;
            size_t pos = 0;
            while ((pos = body.find(gram, pos)) != std::string::npos) {
                covered += 3;
                pos += 3;
            }
            if (double(covered) >= threshold * double(body.size())) return true;
        }
    }
    return false;
}

} // namespace

std::string quality_flag_name(QualityFlag flag) {
    switch (flag) {
        case QualityFlag::Repetition: return "Repetition";
        case QualityFlag::Empty: return "Empty";
        case QualityFlag::OverLength: return "OverLength";
    }
    return "?";
}

std::vector<std::string> default_keywords() {
    return {"lootbox", "loot box", "card pack", "loot crate",
            "loot case", "gacha", "mystery box"};
}

std::set<QualityFlag> quality_screen(const UserText& text, const QualityConfig& config) {
    std::set<QualityFlag> flags;
    const std::string& body = text.body;
    bool whitespace_only =
        std::all_of(body.begin(), body.end(), [](unsigned char c) { return std::isspace(c); });
    if (whitespace_only) {
        flags.insert(QualityFlag::Empty);
    }
    if (body.size() >= config.repetition_min_length &&
        is_repetitive(body, config.repetition_threshold)) {
        flags.insert(QualityFlag::Repetition);
    }
    if (body.size() > config.overlength_cap) {
        flags.insert(QualityFlag::OverLength);
    }
    return flags;
}

Corpus load_corpus(std::istream& in, LoadReport& report, const QualityConfig& quality) {
    Corpus corpus;
    std::unordered_set<std::string> seen_ids;
    std::string line;
    size_t line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (line.empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) {
            report.rejected.push_back({line_number, "MalformedRecord", "not a JSON object"});
            continue;
        }
        if (!j.contains("id") || !j["id"].is_string()) {
            report.rejected.push_back({line_number, "MalformedRecord", "missing id"});
            continue;
        }
        if (!j.contains("body") || !j["body"].is_string()) {
            report.rejected.push_back({line_number, "MalformedRecord", "missing body"});
            continue;
        }
        if (!j.contains("language") || !j["language"].is_string()) {
            report.rejected.push_back({line_number, "MalformedRecord", "missing language"});
            continue;
        }
        UserText t;
        t.id = j["id"].get<std::string>();
        if (!seen_ids.insert(t.id).second) {
            report.rejected.push_back({line_number, "DuplicateId", t.id});
            continue;
        }
        t.body = j["body"].get<std::string>();
        t.language = j["language"].get<std::string>();
        if (j.contains("game_id") && j["game_id"].is_string()) {
            t.game_id = j["game_id"].get<std::string>();
        }
        if (j.contains("game_name") && j["game_name"].is_string()) {
            t.game_name = j["game_name"].get<std::string>();
        }
        for (auto& [key, value] : j.items()) {
            if (is_core_field(key)) continue;
            if (value.is_object() || value.is_array()) {
                continue; // metadata is scalar-only
            }
            t.metadata[key] = scalar_to_string(value);
        }
        t.quality_flags = quality_screen(t, quality);
        corpus.texts.push_back(std::move(t));
    }
    corpus.source_fingerprint = corpus_fingerprint(corpus);
    return corpus;
}

Corpus load_corpus_file(const std::string& path, LoadReport& report,
                        const QualityConfig& quality) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw UpstreamArtifactMissing("cannot open corpus file: " + path);
    }
    return load_corpus(in, report, quality);
}

void serialize_corpus(const Corpus& corpus, std::ostream& out) {
    for (const auto& t : corpus.texts) {
        out << record_to_json(t).dump() << "\n";
    }
}

void serialize_corpus_file(const Corpus& corpus, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error("IoError", "cannot write corpus file: " + path);
    }
    serialize_corpus(corpus, out);
}

std::string corpus_fingerprint(const Corpus& corpus) {
    std::ostringstream all;
    for (const auto& t : corpus.texts) {
        all << record_to_json(t).dump() << "\n";
    }
    return sha256_hex(all.str());
}

std::string FilterReport::to_csv() const {
    std::ostringstream out;
    out << "reason,count\n";
    out << "LanguageExcluded," << language_excluded << "\n";
    out << "NoKeyword," << no_keyword << "\n";
    out << "Retained," << retained << "\n";
    return out.str();
}

std::pair<Corpus, FilterReport> apply_filters(const Corpus& corpus, const FilterSpec& spec) {
    FilterReport report;
    Corpus out;

    std::vector<std::string> keywords = spec.keywords;
    if (spec.case_insensitive) {
        for (auto& k : keywords) k = to_lower(k);
    }

    for (const auto& t : corpus.texts) {
        if (!spec.allowed_languages.empty()) {
            // Exact tag match, or primary-subtag match ("en-US" passes "en").
            std::string primary = t.language.substr(0, t.language.find('-'));
            if (!spec.allowed_languages.count(t.language) &&
                !spec.allowed_languages.count(primary)) {
                ++report.language_excluded;
                continue;
            }
        }
        if (!keywords.empty()) {
            std::string haystack = spec.case_insensitive ? to_lower(t.body) : t.body;
            bool hit = std::any_of(keywords.begin(), keywords.end(), [&](const std::string& k) {
                return !k.empty() && haystack.find(k) != std::string::npos;
            });
            if (!hit) {
                ++report.no_keyword;
                continue;
            }
        }
        out.texts.push_back(t);
        ++report.retained;
    }
    out.source_fingerprint = corpus_fingerprint(out);
    return {std::move(out), report};
}

namespace {

std::string stratum_key(const UserText& t, const std::vector<std::string>& keys) {
    std::string out;
    for (const auto& k : keys) {
        if (!out.empty()) out.push_back('\x1f');
        if (k == "game_id") {
            out += t.game_id;
        } else if (k == "language") {
            out += t.language;
        } else {
            throw MalformedSpec("unknown stratum key: " + k);
        }
    }
    return out;
}

} // namespace

Corpus stratified_sample(const Corpus& corpus, const SampleSpec& spec) {
    if (corpus.empty()) {
        throw MalformedSpec("stratified_sample requires a non-empty corpus");
    }
    if (spec.target_size == 0) {
        throw MalformedSpec("target_size must be positive");
    }
    if (spec.target_size > corpus.size()) {
        throw TargetTooLarge("target_size " + std::to_string(spec.target_size) +
                             " exceeds corpus size " + std::to_string(corpus.size()));
    }

    // Group by the cross-product of the stratum key values present.
    std::map<std::string, std::vector<size_t>> groups;
    for (size_t i = 0; i < corpus.texts.size(); ++i) {
        groups[stratum_key(corpus.texts[i], spec.strata_keys)].push_back(i);
    }

    struct Stratum {
        std::string key;
        const std::vector<size_t>* members;
        size_t quota = 0;
    };
    std::vector<Stratum> strata;
    strata.reserve(groups.size());
    for (const auto& [key, members] : groups) {
        strata.push_back({key, &members, 0});
    }
    // Allocation order: size descending, key ascending.
    std::vector<size_t> order(strata.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        if (strata[a].members->size() != strata[b].members->size()) {
            return strata[a].members->size() > strata[b].members->size();
        }
        return strata[a].key < strata[b].key;
    });

    size_t base = spec.target_size / strata.size();
    size_t remainder = spec.target_size % strata.size();
    for (auto& s : strata) s.quota = base;
    for (size_t i = 0; i < remainder; ++i) {
        ++strata[order[i % order.size()]].quota;
    }

    // Cap quotas at stratum size, then hand the shortfall to the largest
    // strata that still have capacity.
    size_t shortfall = 0;
    for (auto& s : strata) {
        if (s.quota > s.members->size()) {
            shortfall += s.quota - s.members->size();
            s.quota = s.members->size();
        }
    }
    while (shortfall > 0) {
        bool progressed = false;
        for (size_t idx : order) {
            if (shortfall == 0) break;
            auto& s = strata[idx];
            if (s.quota < s.members->size()) {
                ++s.quota;
                --shortfall;
                progressed = true;
            }
        }
        if (!progressed) {
            throw TargetTooLarge("insufficient capacity while redistributing sample quota");
        }
    }

    // Deterministic per-stratum selection; seeds derived per stratum so the
    // draw does not depend on how other strata shuffle.
    std::vector<size_t> selected;
    selected.reserve(spec.target_size);
    for (const auto& s : strata) {
        std::vector<size_t> pool = *s.members;
        std::mt19937_64 rng(splitmix64(spec.seed ^ fnv1a64(s.key)));
        for (size_t i = 0; i < s.quota; ++i) {
            size_t j = i + size_t(rng() % (pool.size() - i));
            std::swap(pool[i], pool[j]);
            selected.push_back(pool[i]);
        }
    }
    std::sort(selected.begin(), selected.end());

    Corpus out;
    out.texts.reserve(selected.size());
    for (size_t idx : selected) {
        out.texts.push_back(corpus.texts[idx]);
    }
    out.source_fingerprint = corpus_fingerprint(out);
    return out;
}

} // namespace kappaforge
