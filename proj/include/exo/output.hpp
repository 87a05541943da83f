#pragma once

// Trace CSV, metrics summary and minimal SVG line charts. All output is a
// pure function of its input so repeated runs are byte-identical.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "exo/sim_engine.hpp"

namespace exo {

/// Shortest text that round-trips to the same double.
inline std::string format_number(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

/// RFC-4180 field quoting.
inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string out = "\"";
    for (const char ch : s) {
        if (ch == '"') out += '"';
        out += ch;
    }
    return out + "\"";
}

inline void write_trace_csv(std::ostream& os, const std::vector<TraceRecord>& trace) {
    const std::vector<std::string> cols = trace_columns();
    for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << csv_field(cols[i]);
    os << "\r\n";
    for (const TraceRecord& r : trace) {
        for_each_numeric(r, [&](const char* name, double v) {
            if (std::string_view(name) != "t") os << ',';
            os << format_number(v);
        });
        os << ',' << to_string(r.mode) << "\r\n";
    }
}

inline void write_metrics(std::ostream& os, const RunResult& r, const std::string& label = "") {
    if (!label.empty()) os << "variant = " << label << "\n";
    os << "window_begin = " << format_number(r.window_begin) << "\n";
    os << "window_end = " << format_number(r.window_end) << "\n";
    os << "steps = " << r.trace.size() << "\n";
    for_each_metric(r.metrics, [&](const char* k, double v) { os << k << " = " << format_number(v) << "\n"; });
}

/// Weight dump: one row per step, t followed by every weight.
inline void write_weights_csv(std::ostream& os, const RunResult& r, double dt) {
    const std::size_t n = r.weights.empty() ? 0 : r.weights.front().size();
    os << "t";
    for (std::size_t i = 0; i < n; ++i) os << ",w" << i;
    os << "\r\n";
    for (std::size_t k = 0; k < r.weights.size(); ++k) {
        os << format_number(static_cast<double>(k) * dt);
        for (const double w : r.weights[k]) os << ',' << format_number(w);
        os << "\r\n";
    }
}

// ---------------------------------------------------------------------------
// SVG
// ---------------------------------------------------------------------------

struct Series {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
};

namespace detail {

inline std::string svg_escape(const std::string& s) {
    std::string out;
    for (const char ch : s) {
        switch (ch) {
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '&': out += "&amp;"; break;
            case '"': out += "&quot;"; break;
            default: out += ch;
        }
    }
    return out;
}

inline std::string fixed(double v, int digits = 2) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

inline std::string tick(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

}  // namespace detail

/// Line chart with axes, five ticks per axis and a legend. Long series are
/// decimated to at most `max_points` vertices by min/max bucketing.
inline std::string render_svg(const std::string& title, const std::string& x_label,
                              const std::vector<Series>& series, std::size_t max_points = 2000) {
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
    const double W = 800, H = 400, L = 80, R = 20, T = 40, B = 50;
    double xmin = INFINITY, xmax = -INFINITY, ymin = INFINITY, ymax = -INFINITY;
    for (const Series& s : series) {
        for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
            xmin = std::min(xmin, s.x[i]);
            xmax = std::max(xmax, s.x[i]);
            ymin = std::min(ymin, s.y[i]);
            ymax = std::max(ymax, s.y[i]);
        }
    }
    if (!(xmin <= xmax)) xmin = 0, xmax = 1;
    if (!(ymin <= ymax)) ymin = 0, ymax = 1;
    if (xmax == xmin) xmax = xmin + 1;
    if (ymax == ymin) {
        const double pad = ymin == 0 ? 1.0 : std::abs(ymin) * 0.1;
        ymin -= pad;
        ymax += pad;
    }
    auto px = [&](double x) { return L + (x - xmin) / (xmax - xmin) * (W - L - R); };
    auto py = [&](double y) { return H - B - (y - ymin) / (ymax - ymin) * (H - T - B); };

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
       << "\" viewBox=\"0 0 " << W << ' ' << H << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
       << "font-size=\"16\">" << detail::svg_escape(title) << "</text>\n";
    os << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << W - L - R << "\" height=\""
       << H - T - B << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double xv = xmin + (xmax - xmin) * i / 4.0;
        const double yv = ymin + (ymax - ymin) * i / 4.0;
        os << "<text x=\"" << detail::fixed(px(xv)) << "\" y=\"" << H - B + 18
           << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
           << detail::tick(xv) << "</text>\n";
        os << "<text x=\"" << L - 6 << "\" y=\"" << detail::fixed(py(yv) + 4)
           << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
           << detail::tick(yv) << "</text>\n";
        os << "<line x1=\"" << L << "\" x2=\"" << W - R << "\" y1=\"" << detail::fixed(py(yv))
           << "\" y2=\"" << detail::fixed(py(yv)) << "\" stroke=\"#dddddd\"/>\n";
    }
    os << "<text x=\"" << W / 2 << "\" y=\"" << H - 10
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">"
       << detail::svg_escape(x_label) << "</text>\n";

    for (std::size_t si = 0; si < series.size(); ++si) {
        const Series& s = series[si];
        const std::size_t n = std::min(s.x.size(), s.y.size());
        os << "<polyline fill=\"none\" stroke-width=\"1\" stroke=\"" << colors[si % 6] << "\" points=\"";
        const std::size_t buckets = std::max<std::size_t>(1, max_points / 2);
        if (n <= max_points) {
            for (std::size_t i = 0; i < n; ++i) {
                os << detail::fixed(px(s.x[i])) << ',' << detail::fixed(py(s.y[i])) << ' ';
            }
        } else {
            for (std::size_t b = 0; b < buckets; ++b) {
                const std::size_t lo = b * n / buckets;
                const std::size_t hi = (b + 1) * n / buckets;
                std::size_t imin = lo, imax = lo;
                for (std::size_t i = lo; i < hi; ++i) {
                    if (s.y[i] < s.y[imin]) imin = i;
                    if (s.y[i] > s.y[imax]) imax = i;
                }
                const std::size_t a = std::min(imin, imax), c = std::max(imin, imax);
                os << detail::fixed(px(s.x[a])) << ',' << detail::fixed(py(s.y[a])) << ' ';
                if (c != a) os << detail::fixed(px(s.x[c])) << ',' << detail::fixed(py(s.y[c])) << ' ';
            }
        }
        os << "\"/>\n";
        os << "<text x=\"" << L + 10 << "\" y=\"" << T + 16 + 14 * static_cast<double>(si)
           << "\" font-family=\"sans-serif\" font-size=\"12\" fill=\"" << colors[si % 6] << "\">"
           << detail::svg_escape(s.label) << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

inline Series trace_series(const std::vector<TraceRecord>& trace, const std::string& column,
                           const std::string& label) {
    Series s;
    s.label = label;
    s.x.reserve(trace.size());
    s.y.reserve(trace.size());
    for (const TraceRecord& r : trace) {
        s.x.push_back(r.t);
        s.y.push_back(trace_value(r, column));
    }
    return s;
}

// ---------------------------------------------------------------------------
// Comparison table
// ---------------------------------------------------------------------------

struct VariantResult {
    std::string name;
    Metrics metrics;
};

/// Metric-by-variant table; the winner is the smallest value (ties listed
/// together). Returned as plain text with aligned columns.
inline std::string comparison_table(const std::vector<VariantResult>& rows) {
    std::vector<std::string> metrics;
    for_each_metric(Metrics{}, [&](const char* k, double) { metrics.emplace_back(k); });
    std::ostringstream os;
    char buf[128];
    std::snprintf(buf, sizeof buf, "%-20s", "metric");
    os << buf;
    for (const VariantResult& v : rows) {
        std::snprintf(buf, sizeof buf, " %24s", v.name.c_str());
        os << buf;
    }
    os << "  winner\n";
    for (const std::string& m : metrics) {
        std::vector<double> vals;
        for (const VariantResult& v : rows) {
            for_each_metric(v.metrics, [&](const char* k, double x) {
                if (m == k) vals.push_back(x);
            });
        }
        std::snprintf(buf, sizeof buf, "%-20s", m.c_str());
        os << buf;
        for (const double x : vals) {
            std::snprintf(buf, sizeof buf, " %24s", format_number(x).c_str());
            os << buf;
        }
        const double best = *std::min_element(vals.begin(), vals.end());
        std::string winner;
        std::size_t n_best = 0;
        for (std::size_t i = 0; i < vals.size(); ++i) {
            if (vals[i] == best) {
                winner += (winner.empty() ? "" : "=") + rows[i].name;
                ++n_best;
            }
        }
        os << "  " << (n_best == vals.size() && vals.size() > 1 ? "tie" : winner) << "\n";
    }
    return os.str();
}

}  // namespace exo
