#include "kappaforge/agreement.hpp"

#include "kappaforge/sha256.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>

namespace kappaforge {

namespace {

// Per-unit summary sufficient for alpha: how often each category occurs and
// the precomputed off-diagonal coincidence contribution.
struct UnitSummary {
    std::vector<int> counts; // per category index
    int m = 0;               // number of values in the unit
    double offdiag = 0.0;    // sum over ordered disagreeing pairs of 1/(m-1)
};

struct AlphaData {
    std::vector<std::string> categories; // sorted
    std::vector<UnitSummary> units;      // pairable units only (m >= 2)
};

AlphaData build_alpha_data(const std::vector<LabelVector>& vectors,
                           const std::optional<std::set<std::string>>& domain) {
    std::map<std::string, std::vector<const std::string*>> by_unit;
    for (const auto& v : vectors) {
        for (const auto& [unit, label] : v.labels) {
            if (domain && !domain->count(label)) {
                throw OutOfRange("label '" + label + "' outside the declared domain");
            }
            by_unit[unit].push_back(&label);
        }
    }

    std::set<std::string> cats;
    for (const auto& [unit, values] : by_unit) {
        if (values.size() < 2) continue;
        for (const auto* label : values) cats.insert(*label);
    }

    AlphaData data;
    data.categories.assign(cats.begin(), cats.end());
    std::map<std::string, int> cat_index;
    for (size_t i = 0; i < data.categories.size(); ++i) {
        cat_index[data.categories[i]] = int(i);
    }

    for (const auto& [unit, values] : by_unit) {
        if (values.size() < 2) continue;
        UnitSummary s;
        s.counts.assign(data.categories.size(), 0);
        s.m = int(values.size());
        for (const auto* label : values) {
            ++s.counts[cat_index[*label]];
        }
        // Ordered disagreeing pairs: m*(m-1) minus the agreeing ones.
        long agree_pairs = 0;
        for (int c : s.counts) {
            agree_pairs += long(c) * (c - 1);
        }
        long all_pairs = long(s.m) * (s.m - 1);
        s.offdiag = double(all_pairs - agree_pairs) / double(s.m - 1);
        data.units.push_back(std::move(s));
    }
    return data;
}

// Alpha over a multiset of units given by indices into data.units.
AlphaOutcome alpha_from_units(const AlphaData& data, const std::vector<size_t>& unit_indices) {
    AlphaOutcome out;
    if (unit_indices.empty() || data.categories.empty()) {
        out.status = AlphaStatus::NoPairableValues;
        return out;
    }
    std::vector<long> n_c(data.categories.size(), 0);
    long n = 0;
    double offdiag = 0.0;
    for (size_t idx : unit_indices) {
        const UnitSummary& s = data.units[idx];
        n += s.m;
        offdiag += s.offdiag;
        for (size_t c = 0; c < n_c.size(); ++c) {
            n_c[c] += s.counts[c];
        }
    }
    long sum_sq = 0;
    for (long c : n_c) sum_sq += c * c;
    long expected_num = n * n - sum_sq; // sum over c != k of n_c * n_k
    if (expected_num == 0) {
        out.status = AlphaStatus::ZeroExpectedDisagreement;
        return out;
    }
    double d_o = offdiag / double(n);
    double d_e = double(expected_num) / (double(n) * double(n - 1));
    out.status = AlphaStatus::Ok;
    out.result.alpha = 1.0 - d_o / d_e;
    out.result.observed_disagreement = d_o;
    out.result.expected_disagreement = d_e;
    out.result.n_pairable = int(n);
    return out;
}

std::vector<size_t> all_unit_indices(const AlphaData& data) {
    std::vector<size_t> idx(data.units.size());
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    return idx;
}

// Derives the RNG seed for one resample attempt; counter-based so resamples
// are independent of evaluation order.
uint64_t resample_seed(uint64_t master, int resample_index, int attempt) {
    uint64_t x = splitmix64(master ^ (uint64_t(resample_index) * 0x9e3779b97f4a7c15ull));
    return splitmix64(x ^ (uint64_t(attempt) * 0xd1342543de82ef95ull));
}

double one_resample_alpha(const AlphaData& data, uint64_t master_seed, int resample_index,
                          int retry_cap, bool& degenerate) {
    size_t n_units = data.units.size();
    std::vector<size_t> draw(n_units);
    for (int attempt = 0; attempt < retry_cap; ++attempt) {
        std::mt19937_64 rng(resample_seed(master_seed, resample_index, attempt));
        for (size_t i = 0; i < n_units; ++i) {
            draw[i] = size_t(rng() % n_units);
        }
        AlphaOutcome out = alpha_from_units(data, draw);
        if (out.ok()) {
            return out.result.alpha;
        }
    }
    degenerate = true;
    return 0.0;
}

double nearest_rank_percentile(const std::vector<double>& sorted, double p) {
    size_t n = sorted.size();
    size_t rank = size_t(std::ceil(p * double(n)));
    if (rank < 1) rank = 1;
    if (rank > n) rank = n;
    return sorted[rank - 1];
}

} // namespace

std::string band_name(Band band) {
    switch (band) {
        case Band::NoAgreement: return "NoAgreement";
        case Band::Slight: return "Slight";
        case Band::Fair: return "Fair";
        case Band::Moderate: return "Moderate";
        case Band::Substantial: return "Substantial";
        case Band::AlmostPerfect: return "AlmostPerfect";
    }
    return "?";
}

Band landis_koch_band(double kappa) {
    if (std::isnan(kappa) || kappa < -1.0 || kappa > 1.0) {
        throw OutOfRange("kappa outside [-1, 1]");
    }
    if (kappa < 0.0) return Band::NoAgreement;
    if (kappa <= 0.20) return Band::Slight;
    if (kappa <= 0.40) return Band::Fair;
    if (kappa <= 0.60) return Band::Moderate;
    if (kappa <= 0.80) return Band::Substantial;
    return Band::AlmostPerfect;
}

std::string alpha_status_name(AlphaStatus status) {
    switch (status) {
        case AlphaStatus::Ok: return "Ok";
        case AlphaStatus::NoPairableValues: return "NoPairableValues";
        case AlphaStatus::ZeroExpectedDisagreement: return "ZeroExpectedDisagreement";
    }
    return "?";
}

double observed_agreement(const LabelVector& a, const LabelVector& b) {
    size_t shared = 0;
    size_t matches = 0;
    for (const auto& [unit, label] : a.labels) {
        auto it = b.labels.find(unit);
        if (it == b.labels.end()) continue;
        ++shared;
        if (it->second == label) ++matches;
    }
    if (shared == 0) {
        throw NoSharedUnits("coders " + a.coder_id + " and " + b.coder_id +
                            " share no unit ids");
    }
    return double(matches) / double(shared);
}

KappaResult cohen_kappa(const LabelVector& a, const LabelVector& b) {
    std::vector<std::pair<const std::string*, const std::string*>> pairs;
    for (const auto& [unit, label] : a.labels) {
        auto it = b.labels.find(unit);
        if (it != b.labels.end()) {
            pairs.emplace_back(&label, &it->second);
        }
    }
    if (pairs.empty()) {
        throw NoSharedUnits("coders " + a.coder_id + " and " + b.coder_id +
                            " share no unit ids");
    }
    if (pairs.size() < 2) {
        throw FewerThanTwoUnits("cohen_kappa needs at least two shared units");
    }

    std::map<std::string, int> cat_index;
    for (const auto& [la, lb] : pairs) {
        cat_index.emplace(*la, 0);
        cat_index.emplace(*lb, 0);
    }
    int next = 0;
    for (auto& [cat, idx] : cat_index) idx = next++;

    size_t n = pairs.size();
    std::vector<long> row(cat_index.size(), 0);
    std::vector<long> col(cat_index.size(), 0);
    long diagonal = 0;
    for (const auto& [la, lb] : pairs) {
        int ia = cat_index[*la];
        int ib = cat_index[*lb];
        ++row[ia];
        ++col[ib];
        if (ia == ib) ++diagonal;
    }

    KappaResult result;
    result.n_units = int(n);
    result.p_o = double(diagonal) / double(n);

    // Degenerate exactly when one category carries both full marginals.
    bool degenerate = false;
    for (size_t c = 0; c < row.size(); ++c) {
        if (row[c] == long(n) && col[c] == long(n)) degenerate = true;
    }
    long pe_num = 0;
    for (size_t c = 0; c < row.size(); ++c) {
        pe_num += row[c] * col[c];
    }
    result.p_e = double(pe_num) / (double(n) * double(n));
    if (degenerate || result.p_e >= 1.0) {
        result.degenerate = true;
        result.kappa = (result.p_o == 1.0) ? 1.0 : 0.0;
    } else {
        result.kappa = (result.p_o - result.p_e) / (1.0 - result.p_e);
    }
    result.band = band_name(landis_koch_band(std::clamp(result.kappa, -1.0, 1.0)));
    return result;
}

AlphaOutcome krippendorff_alpha(const std::vector<LabelVector>& vectors,
                                const std::optional<std::set<std::string>>& domain) {
    if (vectors.size() < 2) {
        throw FewerThanTwoUnits("krippendorff_alpha needs at least two coders");
    }
    AlphaData data = build_alpha_data(vectors, domain);
    if (data.units.empty()) {
        AlphaOutcome out;
        out.status = AlphaStatus::NoPairableValues;
        return out;
    }
    return alpha_from_units(data, all_unit_indices(data));
}

std::vector<double> bootstrap_alpha_distribution_serial(const std::vector<LabelVector>& vectors,
                                                        const BootstrapOptions& options) {
    AlphaData data = build_alpha_data(vectors, std::nullopt);
    AlphaOutcome point = alpha_from_units(data, all_unit_indices(data));
    if (!point.ok()) {
        throw DegenerateData("alpha is not computable on the full data: " +
                             alpha_status_name(point.status));
    }
    std::vector<double> alphas(options.n_resamples);
    bool degenerate = false;
    for (int r = 0; r < options.n_resamples; ++r) {
        alphas[r] = one_resample_alpha(data, options.seed, r, options.retry_cap, degenerate);
        if (degenerate) break;
    }
    if (degenerate) {
        throw DegenerateData("bootstrap retry cap exhausted on degenerate resamples");
    }
    return alphas;
}

std::vector<double> bootstrap_alpha_distribution_parallel(const std::vector<LabelVector>& vectors,
                                                          const BootstrapOptions& options) {
    AlphaData data = build_alpha_data(vectors, std::nullopt);
    AlphaOutcome point = alpha_from_units(data, all_unit_indices(data));
    if (!point.ok()) {
        throw DegenerateData("alpha is not computable on the full data: " +
                             alpha_status_name(point.status));
    }
    std::vector<double> alphas(options.n_resamples);
    bool degenerate = false;
#pragma omp parallel for schedule(static)
    for (int r = 0; r < options.n_resamples; ++r) {
        bool local_degenerate = false;
        alphas[r] = one_resample_alpha(data, options.seed, r, options.retry_cap,
                                       local_degenerate);
        if (local_degenerate) {
#pragma omp atomic write
            degenerate = true;
        }
    }
    if (degenerate) {
        throw DegenerateData("bootstrap retry cap exhausted on degenerate resamples");
    }
    return alphas;
}

BootstrapCi bootstrap_alpha_ci(const std::vector<LabelVector>& vectors,
                               const BootstrapOptions& options) {
    std::vector<double> alphas = options.parallel
                                     ? bootstrap_alpha_distribution_parallel(vectors, options)
                                     : bootstrap_alpha_distribution_serial(vectors, options);
    std::sort(alphas.begin(), alphas.end());
    double tail = (1.0 - options.level) / 2.0;
    BootstrapCi ci;
    ci.lo = nearest_rank_percentile(alphas, tail);
    ci.hi = nearest_rank_percentile(alphas, 1.0 - tail);
    ci.level = options.level;
    ci.n_resamples = options.n_resamples;
    ci.seed = options.seed;
    return ci;
}

AgreementMatrix pairwise_matrix(const std::vector<LabelVector>& vectors) {
    if (vectors.size() < 2) {
        throw FewerThanTwoUnits("pairwise_matrix needs at least two coders");
    }
    AgreementMatrix matrix;
    for (const auto& v : vectors) {
        matrix.coder_ids.push_back(v.coder_id);
    }
    size_t n = vectors.size();
    matrix.cells.assign(n, std::vector<AgreementMatrix::Cell>(n));
    for (size_t i = 0; i < n; ++i) {
        for (size_t j = i; j < n; ++j) {
            AgreementMatrix::Cell cell;
            try {
                KappaResult k = cohen_kappa(vectors[i], vectors[j]);
                cell.available = true;
                cell.kappa = k.kappa;
                cell.observed = observed_agreement(vectors[i], vectors[j]);
                cell.n = k.n_units;
                cell.degenerate = k.degenerate;
                cell.band = k.band;
            } catch (const Error&) {
                cell.available = false;
            }
            matrix.cells[i][j] = cell;
            matrix.cells[j][i] = cell;
        }
    }
    return matrix;
}

std::string matrix_to_csv(const AgreementMatrix& matrix, const std::string& metric) {
    std::ostringstream out;
    out << "coder";
    for (const auto& id : matrix.coder_ids) {
        out << "," << id;
    }
    out << "\n";
    char buf[64];
    for (size_t i = 0; i < matrix.coder_ids.size(); ++i) {
        out << matrix.coder_ids[i];
        for (size_t j = 0; j < matrix.coder_ids.size(); ++j) {
            const auto& cell = matrix.cells[i][j];
            out << ",";
            if (!cell.available) {
                out << "NA";
            } else if (metric == "kappa") {
                std::snprintf(buf, sizeof(buf), "%.4f", cell.kappa);
                out << buf;
            } else if (metric == "observed") {
                std::snprintf(buf, sizeof(buf), "%.4f", cell.observed);
                out << buf;
            } else if (metric == "n") {
                out << cell.n;
            } else if (metric == "band") {
                out << cell.band;
            } else {
                throw OutOfRange("unknown matrix metric: " + metric);
            }
        }
        out << "\n";
    }
    return out.str();
}

} // namespace kappaforge
