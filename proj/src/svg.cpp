#include "vpl/svg.hpp"

#include <algorithm>
#include <cstdio>
#include <stdexcept>

namespace vpl {

namespace {

const char* kPalette[] = {"#4878cf", "#ee854a", "#6acc64", "#d65f5f", "#956cb4", "#8c613c"};
constexpr std::size_t kPaletteSize = sizeof(kPalette) / sizeof(kPalette[0]);

std::string num(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

std::string escape_text(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            default: out.push_back(c);
        }
    }
    return out;
}

void text_at(std::string& svg, double x, double y, const std::string& s, int size,
             const char* anchor = "start", const char* extra = "") {
    svg += "<text x=\"" + num(x) + "\" y=\"" + num(y) + "\" font-size=\"" + std::to_string(size) +
           "\" font-family=\"sans-serif\" text-anchor=\"" + anchor + "\" " + extra + ">" +
           escape_text(s) + "</text>\n";
}

void line_at(std::string& svg, double x1, double y1, double x2, double y2, const char* stroke,
             double width = 1.0) {
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "<line x1=\"%s\" y1=\"%s\" x2=\"%s\" y2=\"%s\" stroke=\"%s\" "
                  "stroke-width=\"%.1f\"/>\n",
                  num(x1).c_str(), num(y1).c_str(), num(x2).c_str(), num(y2).c_str(), stroke, width);
    svg += buf;
}

}  // namespace

std::string svg_distribution(std::span<const DistChartPanel> panels) {
    constexpr double bar_w = 18.0, bar_gap = 5.0, group_gap = 28.0;
    constexpr double panel_h = 200.0, plot_h = 120.0, left_margin = 46.0, top_pad = 34.0;
    double width = 300.0;
    for (const DistChartPanel& panel : panels) {
        double w = left_margin + group_gap;
        for (const DistChartGroup& group : panel.groups) {
            w += static_cast<double>(group.bars.size()) * (bar_w + bar_gap) + group_gap;
        }
        width = std::max(width, w + 20.0);
    }
    double height = std::max(panel_h * static_cast<double>(panels.size()), panel_h) + 10.0;

    std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(width) +
                      "\" height=\"" + num(height) + "\" viewBox=\"0 0 " + num(width) + " " +
                      num(height) + "\">\n";
    svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

    double panel_y = 0.0;
    for (const DistChartPanel& panel : panels) {
        double base_y = panel_y + top_pad + plot_h;
        text_at(svg, left_margin, panel_y + 20.0, panel.type_name, 14, "start",
                "font-weight=\"bold\"");
        line_at(svg, left_margin, base_y, width - 12.0, base_y, "#444444");
        line_at(svg, left_margin, panel_y + top_pad, left_margin, base_y, "#444444");
        for (int tick = 0; tick <= 2; ++tick) {
            double share = 0.5 * tick;
            double y = base_y - share * plot_h;
            line_at(svg, left_margin - 4.0, y, left_margin, y, "#444444");
            text_at(svg, left_margin - 7.0, y + 4.0, num(share), 10, "end");
        }

        double x = left_margin + group_gap;
        std::size_t group_idx = 0;
        for (const DistChartGroup& group : panel.groups) {
            const char* color = kPalette[group_idx % kPaletteSize];
            double group_start = x;
            for (const AnswerShare& bar : group.bars) {
                double h = std::clamp(bar.share, 0.0, 1.0) * plot_h;
                char buf[256];
                std::snprintf(buf, sizeof(buf),
                              "<rect x=\"%s\" y=\"%s\" width=\"%.1f\" height=\"%s\" fill=\"%s\"/>\n",
                              num(x).c_str(), num(base_y - h).c_str(), bar_w, num(h).c_str(), color);
                svg += buf;
                text_at(svg, x + bar_w / 2.0, base_y + 12.0, bar.answer, 9, "middle");
                x += bar_w + bar_gap;
            }
            double group_end = x - bar_gap;
            text_at(svg, (group_start + group_end) / 2.0, base_y + 26.0, group.label, 11, "middle");
            x += group_gap;
            ++group_idx;
        }
        panel_y += panel_h;
    }
    svg += "</svg>\n";
    return svg;
}

std::string svg_convergence(std::span<const double> val_acc, std::span<const double> val_lp) {
    if (val_acc.size() != val_lp.size() || val_acc.empty()) {
        throw std::invalid_argument("convergence chart needs equal-length non-empty series");
    }
    constexpr double width = 860.0, height = 420.0;
    constexpr double left = 64.0, right = 64.0, top = 40.0, bottom = 48.0;
    double plot_w = width - left - right;
    double plot_h = height - top - bottom;
    std::size_t n = val_acc.size();

    double lp_max = 0.0;
    for (double v : val_lp) lp_max = std::max(lp_max, v);
    lp_max = std::max(lp_max * 1.05, 0.1);

    auto x_of = [&](std::size_t i) {
        if (n == 1) return left + plot_w / 2.0;
        return left + plot_w * static_cast<double>(i) / static_cast<double>(n - 1);
    };
    auto y_acc = [&](double v) { return top + plot_h * (1.0 - std::clamp(v, 0.0, 1.0)); };
    auto y_lp = [&](double v) { return top + plot_h * (1.0 - std::clamp(v / lp_max, 0.0, 1.0)); };

    std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(width) +
                      "\" height=\"" + num(height) + "\" viewBox=\"0 0 " + num(width) + " " +
                      num(height) + "\">\n";
    svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

    line_at(svg, left, top, left, top + plot_h, "#444444");
    line_at(svg, left + plot_w, top, left + plot_w, top + plot_h, "#444444");
    line_at(svg, left, top + plot_h, left + plot_w, top + plot_h, "#444444");
    for (int tick = 0; tick <= 4; ++tick) {
        double frac = 0.25 * tick;
        double y = top + plot_h * (1.0 - frac);
        text_at(svg, left - 8.0, y + 4.0, num(frac), 10, "end");
        text_at(svg, left + plot_w + 8.0, y + 4.0, num(lp_max * frac), 10, "start");
        line_at(svg, left, y, left + plot_w, y, "#dddddd");
    }
    text_at(svg, left - 40.0, top - 14.0, "accuracy", 12);
    text_at(svg, left + plot_w + 6.0, top - 14.0, "lp", 12);
    std::size_t epoch_step = std::max<std::size_t>(1, n / 10);
    for (std::size_t i = 0; i < n; i += epoch_step) {
        text_at(svg, x_of(i), top + plot_h + 16.0, std::to_string(i + 1), 10, "middle");
    }
    text_at(svg, left + plot_w / 2.0, height - 12.0, "epoch", 12, "middle");

    auto polyline = [&](std::span<const double> series, auto y_map, const char* color) {
        std::string points;
        for (std::size_t i = 0; i < series.size(); ++i) {
            points += num(x_of(i)) + "," + num(y_map(series[i])) + " ";
        }
        svg += "<polyline fill=\"none\" stroke=\"" + std::string(color) +
               "\" stroke-width=\"2\" points=\"" + points + "\"/>\n";
    };
    polyline(val_acc, y_acc, kPalette[0]);
    polyline(val_lp, y_lp, kPalette[1]);

    line_at(svg, left + 10.0, top + 12.0, left + 34.0, top + 12.0, kPalette[0], 2.0);
    text_at(svg, left + 40.0, top + 16.0, "validation accuracy", 11);
    line_at(svg, left + 180.0, top + 12.0, left + 204.0, top + 12.0, kPalette[1], 2.0);
    text_at(svg, left + 210.0, top + 16.0, "validation lp", 11);

    svg += "</svg>\n";
    return svg;
}

}  // namespace vpl
