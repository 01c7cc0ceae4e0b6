#pragma once

// Minimal self-contained SVG figures: summary plot, pattern bank, sweep
// heatmap and dendrogram.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "t2p/baseline.hpp"
#include "t2p/summary.hpp"

namespace t2p::svg {

namespace detail {

inline std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

/// Evenly spaced hue for pattern i of n.
inline std::string pattern_color(std::size_t i, std::size_t n) {
    const double hue = 360.0 * static_cast<double>(i) / static_cast<double>(std::max<std::size_t>(n, 1));
    return "hsl(" + num(hue) + ",70%,50%)";
}

inline std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

inline std::string open(double w, double h) {
    return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(w) + "\" height=\"" + num(h) +
           "\" viewBox=\"0 0 " + num(w) + ' ' + num(h) + "\">\n";
}

inline std::string polyline(const std::vector<double>& ys, double x0, double y0, double w, double h,
                            const std::string& stroke) {
    if (ys.empty()) return {};
    auto [lo_it, hi_it] = std::minmax_element(ys.begin(), ys.end());
    const double lo = *lo_it, span = std::max(*hi_it - lo, 1e-12);
    const double dx = ys.size() > 1 ? w / static_cast<double>(ys.size() - 1) : 0.0;
    std::string pts;
    for (std::size_t i = 0; i < ys.size(); ++i) {
        if (i) pts += ' ';
        pts += num(x0 + dx * static_cast<double>(i)) + ',' + num(y0 + h - (ys[i] - lo) / span * h);
    }
    return "<polyline fill=\"none\" stroke=\"" + stroke + "\" stroke-width=\"1\" points=\"" + pts + "\"/>\n";
}

}  // namespace detail

/// The series as a line over one rect per window, colored by pattern with
/// opacity equal to the assignment score.
inline std::string summary_plot(const std::vector<double>& series, const Summary& summary) {
    constexpr double width = 1000.0, height = 200.0;
    std::ostringstream out;
    out << detail::open(width, height);
    const double scale = series.empty() ? 0.0 : width / static_cast<double>(series.size());
    for (const auto& w : summary.windows) {
        out << "<rect x=\"" << detail::num(static_cast<double>(w.start) * scale) << "\" y=\"0\" width=\""
            << detail::num(static_cast<double>(summary.window_length) * scale) << "\" height=\"" << detail::num(height)
            << "\" fill=\"" << detail::pattern_color(w.pattern_id, summary.n_patterns) << "\" fill-opacity=\""
            << detail::num(std::clamp(w.score, 0.0, 1.0)) << "\"><title>window " << w.window_index << ": pattern "
            << w.pattern_id << "</title></rect>\n";
    }
    out << detail::polyline(series, 0.0, 10.0, width, height - 20.0, "black");
    out << "</svg>\n";
    return out.str();
}

/// One small panel per pattern kernel.
inline std::string pattern_plot(const PatternSet& patterns) {
    constexpr double panel_w = 200.0, panel_h = 100.0;
    const double width = panel_w * static_cast<double>(std::max<std::size_t>(patterns.size(), 1));
    std::ostringstream out;
    out << detail::open(width, panel_h + 20.0);
    for (std::size_t i = 0; i < patterns.size(); ++i) {
        const double x0 = panel_w * static_cast<double>(i);
        out << "<g><text x=\"" << detail::num(x0 + 5) << "\" y=\"15\" font-size=\"12\">pattern " << i << "</text>\n"
            << detail::polyline(patterns.patterns[i], x0 + 5, 20.0, panel_w - 10, panel_h - 10,
                                detail::pattern_color(i, patterns.size()))
            << "</g>\n";
    }
    out << "</svg>\n";
    return out.str();
}

/// k rows x m columns of compression values; NaN cells (skipped) are drawn grey.
inline std::string heatmap(const std::vector<std::size_t>& ks, const std::vector<std::size_t>& ms,
                           const std::vector<double>& values) {
    constexpr double cell = 60.0, margin = 50.0;
    const double width = margin + cell * static_cast<double>(ms.size());
    const double height = margin + cell * static_cast<double>(ks.size());
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (double v : values)
        if (std::isfinite(v)) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    const double span = hi > lo ? hi - lo : 1.0;
    std::ostringstream out;
    out << detail::open(width, height);
    for (std::size_t c = 0; c < ms.size(); ++c)
        out << "<text x=\"" << detail::num(margin + cell * (static_cast<double>(c) + 0.5)) << "\" y=\"30\" "
            << "font-size=\"12\" text-anchor=\"middle\">m=" << ms[c] << "</text>\n";
    for (std::size_t r = 0; r < ks.size(); ++r) {
        const double y = margin + cell * static_cast<double>(r);
        out << "<text x=\"5\" y=\"" << detail::num(y + cell / 2) << "\" font-size=\"12\">k=" << ks[r] << "</text>\n";
        for (std::size_t c = 0; c < ms.size(); ++c) {
            const double v = values[r * ms.size() + c];
            std::string fill = "#cccccc";
            if (std::isfinite(v)) {
                const int shade = static_cast<int>(std::lround(255.0 * (1.0 - (v - lo) / span)));
                fill = "rgb(255," + std::to_string(shade) + ',' + std::to_string(shade) + ')';
            }
            out << "<rect x=\"" << detail::num(margin + cell * static_cast<double>(c)) << "\" y=\"" << detail::num(y)
                << "\" width=\"" << detail::num(cell) << "\" height=\"" << detail::num(cell) << "\" fill=\"" << fill
                << "\" stroke=\"white\"><title>" << (std::isfinite(v) ? format_double(v) : "skipped")
                << "</title></rect>\n";
        }
    }
    out << "</svg>\n";
    return out.str();
}

/// Leaves along the x axis in dendrogram order; each merge is a U-shaped path.
inline std::string dendrogram(const Dendrogram& dg) {
    const std::size_t n = dg.leaves();
    constexpr double leaf_gap = 40.0, margin = 30.0, plot_h = 300.0;
    const double width = 2 * margin + leaf_gap * static_cast<double>(std::max<std::size_t>(n, 1));
    double top = 0.0;
    for (const auto& m : dg.merges) top = std::max(top, m.distance);
    if (!(top > 0.0)) top = 1.0;

    // Leaf order from an in-order walk of the tree.
    std::vector<std::pair<std::size_t, std::size_t>> children(n + dg.merges.size());
    for (std::size_t i = 0; i < dg.merges.size(); ++i) children[n + i] = {dg.merges[i].left, dg.merges[i].right};
    std::vector<double> x(n + dg.merges.size(), 0.0), y(n + dg.merges.size(), 0.0);
    std::vector<std::size_t> order;
    std::vector<std::size_t> stack{n + dg.merges.size() - 1};
    if (dg.merges.empty()) stack = {0};
    while (!stack.empty()) {
        const std::size_t id = stack.back();
        stack.pop_back();
        if (id < n) {
            order.push_back(id);
            continue;
        }
        stack.push_back(children[id].second);
        stack.push_back(children[id].first);
    }
    const auto y_of = [&](double d) { return margin + plot_h * (1.0 - d / top); };
    for (std::size_t i = 0; i < order.size(); ++i) {
        x[order[i]] = margin + leaf_gap * (static_cast<double>(i) + 0.5);
        y[order[i]] = y_of(0.0);
    }
    std::ostringstream out;
    out << detail::open(width, plot_h + 2 * margin + 20.0);
    for (std::size_t i = 0; i < dg.merges.size(); ++i) {
        const auto& m = dg.merges[i];
        const std::size_t id = n + i;
        x[id] = (x[m.left] + x[m.right]) / 2.0;
        y[id] = y_of(m.distance);
        out << "<path fill=\"none\" stroke=\"black\" d=\"M" << detail::num(x[m.left]) << ',' << detail::num(y[m.left])
            << " V" << detail::num(y[id]) << " H" << detail::num(x[m.right]) << " V" << detail::num(y[m.right])
            << "\"/>\n";
    }
    for (std::size_t leaf = 0; leaf < n; ++leaf)
        out << "<text x=\"" << detail::num(x[leaf]) << "\" y=\"" << detail::num(y_of(0.0) + 15.0)
            << "\" font-size=\"11\" text-anchor=\"middle\">" << detail::escape(dg.leaf_labels[leaf]) << "</text>\n";
    out << "</svg>\n";
    return out.str();
}

}  // namespace t2p::svg
