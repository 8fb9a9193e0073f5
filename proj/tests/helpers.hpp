#pragma once

#include "kappaforge/agreement.hpp"

#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <vector>

namespace kftest {

inline std::filesystem::path repo_dir() { return std::filesystem::path(KF_REPO_DIR); }

inline kappaforge::LabelVector make_vector(const std::string& coder,
                                           const std::vector<std::string>& labels) {
    kappaforge::LabelVector v;
    v.coder_id = coder;
    for (size_t i = 0; i < labels.size(); ++i) {
        char unit[32];
        std::snprintf(unit, sizeof(unit), "u%03zu", i);
        v.labels[unit] = labels[i];
    }
    return v;
}

// ---------------------------------------------------------------------------
// Independent oracles. These deliberately re-derive the statistics from the
// definitions with separate code paths from src/agreement.cpp.
// ---------------------------------------------------------------------------

struct OracleKappa {
    double p_o;
    double p_e;
    double kappa;
};

// Brute-force Cohen's kappa: direct match counting for p_o and explicit
// per-category marginal products for p_e.
inline OracleKappa oracle_cohen_kappa(const kappaforge::LabelVector& a,
                                      const kappaforge::LabelVector& b) {
    std::vector<std::pair<std::string, std::string>> pairs;
    for (const auto& [unit, la] : a.labels) {
        auto it = b.labels.find(unit);
        if (it != b.labels.end()) pairs.emplace_back(la, it->second);
    }
    double n = double(pairs.size());
    double matches = 0;
    for (const auto& [la, lb] : pairs) {
        if (la == lb) matches += 1;
    }
    double p_o = matches / n;

    std::map<std::string, double> count_a, count_b;
    for (const auto& [la, lb] : pairs) {
        count_a[la] += 1;
        count_b[lb] += 1;
    }
    double p_e = 0;
    for (const auto& [cat, ca] : count_a) {
        auto it = count_b.find(cat);
        if (it != count_b.end()) {
            p_e += (ca / n) * (it->second / n);
        }
    }
    if (p_e >= 1.0) {
        return {p_o, p_e, p_o == 1.0 ? 1.0 : 0.0};
    }
    return {p_o, p_e, (p_o - p_e) / (1.0 - p_e)};
}

struct OracleAlpha {
    bool defined = false;
    double alpha = 0.0;
    double d_o = 0.0;
    double d_e = 0.0;
};

// Reference Krippendorff alpha built from the literal coincidence matrix:
// every ordered pair of values within a unit contributes 1/(m_u - 1).
inline OracleAlpha oracle_krippendorff_alpha(const std::vector<kappaforge::LabelVector>& vectors) {
    std::map<std::string, std::vector<std::string>> units;
    for (const auto& v : vectors) {
        for (const auto& [unit, label] : v.labels) {
            units[unit].push_back(label);
        }
    }
    std::map<std::pair<std::string, std::string>, double> o;
    double n = 0;
    for (const auto& [unit, values] : units) {
        size_t m = values.size();
        if (m < 2) continue;
        n += double(m);
        for (size_t i = 0; i < m; ++i) {
            for (size_t j = 0; j < m; ++j) {
                if (i == j) continue;
                o[{values[i], values[j]}] += 1.0 / double(m - 1);
            }
        }
    }
    OracleAlpha result;
    if (n == 0) return result;
    std::map<std::string, double> n_c;
    double offdiag = 0;
    for (const auto& [ck, mass] : o) {
        n_c[ck.first] += mass;
        if (ck.first != ck.second) offdiag += mass;
    }
    double d_e_num = 0;
    for (const auto& [c, nc] : n_c) {
        for (const auto& [k, nk] : n_c) {
            if (c != k) d_e_num += nc * nk;
        }
    }
    if (d_e_num <= 1e-12) return result;
    result.defined = true;
    result.d_o = offdiag / n;
    result.d_e = d_e_num / (n * (n - 1.0));
    result.alpha = 1.0 - result.d_o / result.d_e;
    return result;
}

// Random nominal data generators for the property tests.
inline std::vector<kappaforge::LabelVector> random_two_coders(std::mt19937_64& rng, int min_units,
                                                              int max_units, int max_categories) {
    int n_units = min_units + int(rng() % uint64_t(max_units - min_units + 1));
    int n_cats = 2 + int(rng() % uint64_t(max_categories - 1));
    std::vector<std::string> labels_a, labels_b;
    for (int u = 0; u < n_units; ++u) {
        labels_a.push_back("c" + std::to_string(rng() % uint64_t(n_cats)));
        labels_b.push_back("c" + std::to_string(rng() % uint64_t(n_cats)));
    }
    return {make_vector("a", labels_a), make_vector("b", labels_b)};
}

inline std::vector<kappaforge::LabelVector> random_multi_coders(std::mt19937_64& rng,
                                                                int max_coders, int max_units,
                                                                int max_categories,
                                                                double missing_rate) {
    int n_coders = 2 + int(rng() % uint64_t(max_coders - 1));
    int n_units = 2 + int(rng() % uint64_t(max_units - 1));
    int n_cats = 2 + int(rng() % uint64_t(max_categories - 1));
    std::vector<kappaforge::LabelVector> vectors(n_coders);
    for (int c = 0; c < n_coders; ++c) {
        vectors[c].coder_id = "coder" + std::to_string(c);
        for (int u = 0; u < n_units; ++u) {
            if (double(rng() % 1000) < missing_rate * 1000.0) continue;
            vectors[c].labels["u" + std::to_string(u)] =
                "c" + std::to_string(rng() % uint64_t(n_cats));
        }
    }
    return vectors;
}

} // namespace kftest
