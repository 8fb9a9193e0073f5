#include "kappaforge/report.hpp"

#include <cstdio>
#include <sstream>

namespace kappaforge {

namespace {

std::string xml_escape(const std::string& text) {
    std::string out;
    out.reserve(text.size());
    for (char c : text) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out.push_back(c);
        }
    }
    return out;
}

std::string rgb_hex(unsigned rgb) {
    char buf[8];
    std::snprintf(buf, sizeof(buf), "#%06x", rgb & 0xffffff);
    return buf;
}

unsigned lerp_rgb(unsigned lo, unsigned hi, double t) {
    if (t < 0.0) t = 0.0;
    if (t > 1.0) t = 1.0;
    auto channel = [&](int shift) {
        double a = double((lo >> shift) & 0xff);
        double b = double((hi >> shift) & 0xff);
        return unsigned(a + (b - a) * t + 0.5) & 0xff;
    };
    return (channel(16) << 16) | (channel(8) << 8) | channel(0);
}

} // namespace

std::string format_fixed(double value, int precision) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", precision, value);
    return buf;
}

std::string emit_heatmap(const HeatmapSpec& spec) {
    const AgreementMatrix& matrix = spec.matrix;
    if (matrix.empty()) {
        throw EmptyMatrix("heatmap needs at least two coders");
    }

    const int cell = 72;
    const int label_w = 180;
    const int label_h = 72;
    const int title_h = spec.title.empty() ? 0 : 28;
    size_t n = matrix.coder_ids.size();
    int width = label_w + int(n) * cell + 16;
    int height = title_h + label_h + int(n) * cell + 16;

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\" font-family=\"sans-serif\">\n";
    svg << "<defs>\n"
        << "<pattern id=\"hatch\" width=\"8\" height=\"8\" patternTransform=\"rotate(45)\" "
           "patternUnits=\"userSpaceOnUse\">"
        << "<rect width=\"8\" height=\"8\" fill=\"#eeeeee\"/>"
        << "<line x1=\"0\" y1=\"0\" x2=\"0\" y2=\"8\" stroke=\"#999999\" stroke-width=\"2\"/>"
        << "</pattern>\n</defs>\n";
    if (!spec.title.empty()) {
        svg << "<text x=\"" << width / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"16\">"
            << xml_escape(spec.title) << "</text>\n";
    }

    // Column labels, rotated to fit.
    for (size_t j = 0; j < n; ++j) {
        int x = label_w + int(j) * cell + cell / 2;
        int y = title_h + label_h - 8;
        svg << "<text x=\"" << x << "\" y=\"" << y
            << "\" text-anchor=\"start\" font-size=\"11\" transform=\"rotate(-35 " << x << " "
            << y << ")\">" << xml_escape(matrix.coder_ids[j]) << "</text>\n";
    }

    for (size_t i = 0; i < n; ++i) {
        int row_y = title_h + label_h + int(i) * cell;
        svg << "<text x=\"" << label_w - 8 << "\" y=\"" << row_y + cell / 2 + 4
            << "\" text-anchor=\"end\" font-size=\"11\">" << xml_escape(matrix.coder_ids[i])
            << "</text>\n";
        for (size_t j = 0; j < n; ++j) {
            int x = label_w + int(j) * cell;
            const auto& c = matrix.at(i, j);
            if (!c.available) {
                svg << "<rect x=\"" << x << "\" y=\"" << row_y << "\" width=\"" << cell
                    << "\" height=\"" << cell
                    << "\" fill=\"url(#hatch)\" stroke=\"#ffffff\"/>\n";
                continue;
            }
            double value = spec.metric == "observed" ? c.observed : c.kappa;
            double span = spec.anchor_hi_value - spec.anchor_lo_value;
            double t = span != 0.0 ? (value - spec.anchor_lo_value) / span : 0.0;
            unsigned fill = lerp_rgb(spec.anchor_lo_rgb, spec.anchor_hi_rgb, t);
            const char* text_color = t > 0.55 ? "#ffffff" : "#1a1a1a";
            svg << "<rect x=\"" << x << "\" y=\"" << row_y << "\" width=\"" << cell
                << "\" height=\"" << cell << "\" fill=\"" << rgb_hex(fill)
                << "\" stroke=\"#ffffff\"/>\n";
            svg << "<text x=\"" << x + cell / 2 << "\" y=\"" << row_y + cell / 2 + 5
                << "\" text-anchor=\"middle\" font-size=\"14\" fill=\"" << text_color << "\">"
                << format_fixed(value, spec.precision) << "</text>\n";
        }
    }
    svg << "</svg>\n";
    return svg.str();
}

std::string share_table_to_csv(const ShareTable& table) {
    std::ostringstream out;
    out << "label,count,percent\n";
    for (const auto& row : table.rows) {
        out << row.label << "," << row.count << "," << format_fixed(row.percent, 2) << "\n";
    }
    out << "denominator," << table.denominator << ",\n";
    out << "failures," << table.failures << ",\n";
    return out.str();
}

std::string emit_share_chart_svg(const ShareTable& table) {
    if (table.rows.empty()) {
        throw EmptyInput("share chart needs at least one label row");
    }
    const int bar_w = 96;
    const int gap = 48;
    const int plot_h = 260;
    const int base_y = 40 + plot_h;
    int width = gap + int(table.rows.size()) * (bar_w + gap) + 16;
    int height = base_y + 72;

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\" font-family=\"sans-serif\">\n";
    svg << "<text x=\"" << width / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">"
        << xml_escape(task_slug(table.task)) << " shares (" << xml_escape(table.cell_id)
        << ")</text>\n";

    for (size_t i = 0; i < table.rows.size(); ++i) {
        const auto& row = table.rows[i];
        int x = gap + int(i) * (bar_w + gap);
        int h = int(double(plot_h) * row.percent / 100.0 + 0.5);
        int y = base_y - h;
        svg << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << bar_w << "\" height=\""
            << h << "\" fill=\"#4c78a8\"/>\n";
        svg << "<text x=\"" << x + bar_w / 2 << "\" y=\"" << y - 6
            << "\" text-anchor=\"middle\" font-size=\"13\">" << format_fixed(row.percent, 2)
            << "</text>\n";
        svg << "<text x=\"" << x + bar_w / 2 << "\" y=\"" << base_y + 18
            << "\" text-anchor=\"middle\" font-size=\"12\">" << xml_escape(row.label)
            << "</text>\n";
    }

    svg << "<text x=\"" << width / 2 << "\" y=\"" << base_y + 44
        << "\" text-anchor=\"middle\" font-size=\"12\">N = " << table.denominator;
    if (table.failures > 0) {
        svg << "; excluded: " << table.failures << " failures";
    }
    svg << "</text>\n";
    svg << "</svg>\n";
    return svg.str();
}

} // namespace kappaforge
