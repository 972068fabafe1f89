#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

namespace nhw::svg {

namespace detail {

inline std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

inline std::string header(const std::string& title) {
    return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"420\" font-family=\"sans-serif\" "
           "font-size=\"12\">\n<rect width=\"640\" height=\"420\" fill=\"white\"/>\n<text x=\"320\" y=\"22\" "
           "text-anchor=\"middle\" font-size=\"14\">" + title + "</text>\n"
           "<line x1=\"60\" y1=\"370\" x2=\"620\" y2=\"370\" stroke=\"black\"/>\n"
           "<line x1=\"60\" y1=\"40\" x2=\"60\" y2=\"370\" stroke=\"black\"/>\n";
}

}  // namespace detail

/// Density histogram with an optional reference density overlay.
inline std::string histogram(const std::vector<double>& values, int bins, double xmax,
                             const std::function<double(double)>& pdf, const std::string& title) {
    std::vector<double> h(bins, 0.0);
    const double w = xmax / bins;
    for (double v : values)
        if (v >= 0.0 && v < xmax) h[static_cast<int>(v / w)] += 1.0;
    for (auto& x : h) x /= values.size() * w;
    double ymax = *std::max_element(h.begin(), h.end());
    if (pdf) ymax = std::max(ymax, pdf(0.0));
    ymax *= 1.1;
    auto X = [&](double x) { return 60.0 + 560.0 * x / xmax; };
    auto Y = [&](double y) { return 370.0 - 330.0 * y / ymax; };
    std::string s = detail::header(title);
    for (int b = 0; b < bins; ++b)
        s += "<rect x=\"" + detail::num(X(b * w)) + "\" y=\"" + detail::num(Y(h[b])) + "\" width=\"" +
             detail::num(X(w) - 60.0) + "\" height=\"" + detail::num(370.0 - Y(h[b])) +
             "\" fill=\"#9ecae1\" stroke=\"#3182bd\"/>\n";
    if (pdf) {
        s += "<polyline fill=\"none\" stroke=\"#d62728\" stroke-width=\"2\" points=\"";
        for (int k = 0; k <= 200; ++k) {
            const double x = xmax * k / 200.0;
            s += detail::num(X(x)) + "," + detail::num(Y(pdf(x))) + " ";
        }
        s += "\"/>\n";
    }
    s += "<text x=\"620\" y=\"390\" text-anchor=\"end\">" + detail::num(xmax) + "</text>\n";
    s += "<text x=\"60\" y=\"390\">0</text>\n</svg>\n";
    return s;
}

struct Series {
    std::string name;
    std::vector<double> y;
    std::string colour;
};

/// Log-log line plot of several series against a common x.
inline std::string loglog(const std::vector<double>& x, const std::vector<Series>& series, const std::string& title) {
    double lx0 = 1e300, lx1 = -1e300, ly0 = 1e300, ly1 = -1e300;
    for (double v : x) lx0 = std::min(lx0, std::log10(v)), lx1 = std::max(lx1, std::log10(v));
    for (const auto& s : series)
        for (double v : s.y)
            if (v > 0) ly0 = std::min(ly0, std::log10(v)), ly1 = std::max(ly1, std::log10(v));
    if (lx1 <= lx0) lx1 = lx0 + 1;
    if (ly1 <= ly0) ly1 = ly0 + 1;
    auto X = [&](double v) { return 60.0 + 560.0 * (std::log10(v) - lx0) / (lx1 - lx0); };
    auto Y = [&](double v) { return 370.0 - 330.0 * (std::log10(v) - ly0) / (ly1 - ly0); };
    std::string out = detail::header(title);
    int row = 0;
    for (const auto& s : series) {
        out += "<polyline fill=\"none\" stroke=\"" + s.colour + "\" stroke-width=\"2\" points=\"";
        for (std::size_t i = 0; i < x.size(); ++i)
            if (s.y[i] > 0) out += detail::num(X(x[i])) + "," + detail::num(Y(s.y[i])) + " ";
        out += "\"/>\n<text x=\"80\" y=\"" + detail::num(55.0 + 16 * row++) + "\" fill=\"" + s.colour + "\">" + s.name +
               "</text>\n";
    }
    out += "<text x=\"60\" y=\"390\">1e" + detail::num(lx0) + "</text>\n<text x=\"620\" y=\"390\" text-anchor=\"end\">1e" +
           detail::num(lx1) + "</text>\n</svg>\n";
    return out;
}

}  // namespace nhw::svg
