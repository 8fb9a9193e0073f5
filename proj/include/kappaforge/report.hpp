#pragma once

#include "kappaforge/agreement.hpp"
#include "kappaforge/runner.hpp"

#include <string>

namespace kappaforge {

class EmptyMatrix : public Error {
public:
    explicit EmptyMatrix(const std::string& msg) : Error("EmptyMatrix", msg) {}
};

struct HeatmapSpec {
    AgreementMatrix matrix;
    std::string metric = "kappa"; // "kappa" or "observed"
    std::string title;
    int precision = 2;
    // Linear color scale anchors: value -> RGB.
    double anchor_lo_value = 0.0;
    double anchor_hi_value = 1.0;
    unsigned anchor_lo_rgb = 0xf7fbff;
    unsigned anchor_hi_rgb = 0x2166ac;
};

// Deterministic self-contained SVG: an n x n grid with coder labels, the
// numeric value in each cell at the stated precision, unavailable cells
// hatched. No timestamps; suitable for golden-file tests.
std::string emit_heatmap(const HeatmapSpec& spec);

// Grouped bar chart plus a CSV twin with exact counts.
std::string emit_share_chart_svg(const ShareTable& table);
std::string share_table_to_csv(const ShareTable& table);

// Two-decimal fixed formatting used across reports.
std::string format_fixed(double value, int precision);

} // namespace kappaforge
