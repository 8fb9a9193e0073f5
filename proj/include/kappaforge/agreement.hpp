#pragma once

#include "kappaforge/errors.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace kappaforge {

// One coder's nominal labels. A coder is a human annotator, one
// model x strategy cell, or one instance of a reliability run. Units absent
// from the map are missing values.
struct LabelVector {
    std::string coder_id;
    std::map<std::string, std::string> labels; // unit_id -> label
};

enum class Band { NoAgreement, Slight, Fair, Moderate, Substantial, AlmostPerfect };

std::string band_name(Band band);

class NoSharedUnits : public Error {
public:
    explicit NoSharedUnits(const std::string& msg) : Error("NoSharedUnits", msg) {}
};

class FewerThanTwoUnits : public Error {
public:
    explicit FewerThanTwoUnits(const std::string& msg) : Error("FewerThanTwoUnits", msg) {}
};

class OutOfRange : public Error {
public:
    explicit OutOfRange(const std::string& msg) : Error("OutOfRange", msg) {}
};

class DegenerateData : public Error {
public:
    explicit DegenerateData(const std::string& msg) : Error("DegenerateData", msg) {}
};

struct KappaResult {
    double p_o = 0.0;
    double p_e = 0.0;
    double kappa = 0.0;
    std::string band;
    bool degenerate = false; // both coders constant and identical
    int n_units = 0;
};

// Fraction of shared units labeled identically, over the id intersection.
double observed_agreement(const LabelVector& a, const LabelVector& b);

// Cohen's kappa = (p_o - p_e) / (1 - p_e) over the confusion matrix of
// shared units. When p_e = 1 (both coders constant and equal) the result is
// flagged degenerate with kappa 1.0.
KappaResult cohen_kappa(const LabelVector& a, const LabelVector& b);

// Landis-Koch verbal scale as half-open intervals:
// (-inf,0) NoAgreement, [0,0.20] Slight, (0.20,0.40] Fair, (0.40,0.60]
// Moderate, (0.60,0.80] Substantial, (0.80,1.0] AlmostPerfect.
Band landis_koch_band(double kappa);

struct BootstrapCi {
    double lo = 0.0;
    double hi = 0.0;
    double level = 0.95;
    int n_resamples = 1000;
    uint64_t seed = 0;
};

struct AlphaResult {
    double alpha = 0.0;
    double observed_disagreement = 0.0;
    double expected_disagreement = 0.0;
    int n_pairable = 0; // pairable values, i.e. sum of m_u over units with m_u >= 2
    std::optional<BootstrapCi> ci;
};

enum class AlphaStatus { Ok, NoPairableValues, ZeroExpectedDisagreement };

struct AlphaOutcome {
    AlphaStatus status = AlphaStatus::Ok;
    AlphaResult result; // valid when status == Ok

    bool ok() const { return status == AlphaStatus::Ok; }
};

std::string alpha_status_name(AlphaStatus status);

// Nominal-metric Krippendorff's alpha via the coincidence matrix. Units with
// fewer than two values are excluded; all-identical data reports
// ZeroExpectedDisagreement rather than 1.0.
AlphaOutcome krippendorff_alpha(const std::vector<LabelVector>& vectors,
                                const std::optional<std::set<std::string>>& domain = std::nullopt);

struct BootstrapOptions {
    int n_resamples = 1000;
    double level = 0.95;
    uint64_t seed = 0;
    int retry_cap = 1000; // redraws allowed per resample on degenerate data
    bool parallel = true;
};

// Percentile bootstrap over units, nearest-rank rule. Per-resample RNG seeds
// are derived from the master seed by counter, so the parallel and serial
// paths produce identical output.
BootstrapCi bootstrap_alpha_ci(const std::vector<LabelVector>& vectors,
                               const BootstrapOptions& options = {});

// Serial reference path; kept as the comparison baseline for the OpenMP
// kernel and for the benchmark target.
std::vector<double> bootstrap_alpha_distribution_serial(const std::vector<LabelVector>& vectors,
                                                        const BootstrapOptions& options);
std::vector<double> bootstrap_alpha_distribution_parallel(const std::vector<LabelVector>& vectors,
                                                          const BootstrapOptions& options);

struct AgreementMatrix {
    struct Cell {
        bool available = false;
        double kappa = 0.0;
        double observed = 0.0;
        int n = 0;
        bool degenerate = false;
        std::string band;
    };

    std::vector<std::string> coder_ids;
    std::vector<std::vector<Cell>> cells; // square, symmetric

    const Cell& at(size_t row, size_t col) const { return cells[row][col]; }
    bool empty() const { return coder_ids.size() < 2; }
};

// All pairwise kappa / observed-agreement values; pairs that cannot be
// compared (disjoint units, too few) are left unavailable.
AgreementMatrix pairwise_matrix(const std::vector<LabelVector>& vectors);

// CSV grids with a header row/column of coder ids.
std::string matrix_to_csv(const AgreementMatrix& matrix, const std::string& metric);

} // namespace kappaforge
