#pragma once

// CSV tables and SVG risk curves for lambda sweeps.
//
// Numbers are written with 17 significant digits so every double survives a
// CSV round trip bit-for-bit; the SVG is rendered from the parsed rows only,
// so re-plotting from a CSV reproduces the same image.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "shrinkrisk/errors.hpp"
#include "shrinkrisk/risk_analysis.hpp"

namespace shrinkrisk {

inline constexpr std::string_view kSweepHeader =
    "lambda,ridge_variance,ridge_bias,ridge_risk,pca_variance,pca_bias,pca_risk,ratio,max_term_ratio,bound_holds";
inline constexpr std::string_view kVerifyHeaderSuffix =
    ",empirical_ridge,empirical_ridge_se,empirical_pca,empirical_pca_se,agrees";

struct EmpiricalColumns {
    double ridge = 0.0;
    double ridge_se = 0.0;
    double pca = 0.0;
    double pca_se = 0.0;
    bool agrees = false;
};

inline std::string format_real(double value) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", value);
    return buf;
}

inline std::string_view format_bool(bool value) { return value ? "true" : "false"; }

inline std::string sweep_csv(const SweepResult& result,
                             const std::vector<EmpiricalColumns>* empirical = nullptr) {
    if (empirical != nullptr && empirical->size() != result.rows.size()) {
        throw ValidationError("empirical columns do not match the sweep rows");
    }
    std::string out(kSweepHeader);
    if (empirical != nullptr) {
        out += kVerifyHeaderSuffix;
    }
    out += '\n';
    for (std::size_t i = 0; i < result.rows.size(); ++i) {
        const SweepRow& r = result.rows[i];
        for (double v : {r.lambda, r.ridge_variance, r.ridge_bias, r.ridge_risk, r.pca_variance, r.pca_bias,
                         r.pca_risk, r.ratio, r.max_term_ratio}) {
            out += format_real(v);
            out += ',';
        }
        out += format_bool(r.bound_holds);
        if (empirical != nullptr) {
            const EmpiricalColumns& e = (*empirical)[i];
            for (double v : {e.ridge, e.ridge_se, e.pca, e.pca_se}) {
                out += ',';
                out += format_real(v);
            }
            out += ',';
            out += format_bool(e.agrees);
        }
        out += '\n';
    }
    return out;
}

namespace detail {

inline std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, ',')) {
        fields.push_back(field);
    }
    if (!line.empty() && line.back() == ',') {
        fields.emplace_back();
    }
    return fields;
}

inline double parse_real(const std::string& text) {
    char* end = nullptr;
    const double v = std::strtod(text.c_str(), &end);
    if (text.empty() || end != text.c_str() + text.size()) {
        throw ValidationError("bad number '" + text + "' in sweep CSV");
    }
    return v;
}

inline bool parse_bool(const std::string& text) {
    if (text == "true") {
        return true;
    }
    if (text == "false") {
        return false;
    }
    throw ValidationError("bad boolean '" + text + "' in sweep CSV");
}

} // namespace detail

/// Reads the first ten columns of a sweep or verify CSV.
inline SweepResult parse_sweep_csv(const std::string& csv) {
    std::istringstream in(csv);
    std::string line;
    if (!std::getline(in, line) || line.rfind(kSweepHeader, 0) != 0) {
        throw ValidationError("sweep CSV header not recognized");
    }
    SweepResult result;
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        const std::vector<std::string> f = detail::split_fields(line);
        if (f.size() < 10) {
            throw ValidationError("sweep CSV row has too few columns");
        }
        SweepRow r;
        r.lambda = detail::parse_real(f[0]);
        r.ridge_variance = detail::parse_real(f[1]);
        r.ridge_bias = detail::parse_real(f[2]);
        r.ridge_risk = detail::parse_real(f[3]);
        r.pca_variance = detail::parse_real(f[4]);
        r.pca_bias = detail::parse_real(f[5]);
        r.pca_risk = detail::parse_real(f[6]);
        r.ratio = detail::parse_real(f[7]);
        r.max_term_ratio = detail::parse_real(f[8]);
        r.bound_holds = detail::parse_bool(f[9]);
        result.rows.push_back(r);
    }
    return result;
}

namespace detail {

inline std::string fixed(double v, int digits = 2) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
    return buf;
}

inline std::string tick_label(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.3g", v);
    return buf;
}

} // namespace detail

/// Ridge and PCA-OLS risk against lambda. The lambda axis is logarithmic; a
/// lambda = 0 row sits one decade left of the smallest positive lambda.
inline std::string render_svg(const SweepResult& result) {
    constexpr double width = 720.0, height = 440.0;
    constexpr double left = 70.0, right = 20.0, top = 30.0, bottom = 60.0;
    constexpr double plot_w = width - left - right, plot_h = height - top - bottom;

    std::vector<double> positive;
    for (const SweepRow& r : result.rows) {
        if (r.lambda > 0.0) {
            positive.push_back(std::log10(r.lambda));
        }
    }
    double x_lo = positive.empty() ? -1.0 : *std::min_element(positive.begin(), positive.end());
    double x_hi = positive.empty() ? 1.0 : *std::max_element(positive.begin(), positive.end());
    const double zero_x = x_lo - 1.0;
    const bool has_zero =
        std::any_of(result.rows.begin(), result.rows.end(), [](const SweepRow& r) { return r.lambda == 0.0; });
    if (has_zero) {
        x_lo = zero_x;
    }
    if (x_hi - x_lo < 1e-9) {
        x_lo -= 1.0;
        x_hi += 1.0;
    }
    double y_hi = 0.0;
    for (const SweepRow& r : result.rows) {
        for (double v : {r.ridge_risk, r.pca_risk}) {
            if (std::isfinite(v)) {
                y_hi = std::max(y_hi, v);
            }
        }
    }
    y_hi = y_hi > 0.0 ? 1.05 * y_hi : 1.0;

    const auto px = [&](double lambda) {
        const double x = lambda > 0.0 ? std::log10(lambda) : zero_x;
        return left + plot_w * (x - x_lo) / (x_hi - x_lo);
    };
    const auto py = [&](double risk) { return top + plot_h * (1.0 - risk / y_hi); };

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
        << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n";
    svg << "<rect x=\"0\" y=\"0\" width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";
    svg << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << plot_w << "\" height=\"" << plot_h
        << "\" fill=\"none\" stroke=\"black\"/>\n";

    for (int i = 0; i <= 4; ++i) {
        const double v = y_hi * i / 4.0;
        const std::string y = detail::fixed(py(v));
        svg << "<line x1=\"" << left - 5 << "\" y1=\"" << y << "\" x2=\"" << left << "\" y2=\"" << y
            << "\" stroke=\"black\"/>\n";
        svg << "<text x=\"" << left - 8 << "\" y=\"" << y << "\" font-size=\"11\" text-anchor=\"end\">"
            << detail::tick_label(v) << "</text>\n";
    }
    for (int d = static_cast<int>(std::ceil(x_lo)); d <= static_cast<int>(std::floor(x_hi)); ++d) {
        if (has_zero && d == static_cast<int>(std::round(zero_x)) && std::abs(d - zero_x) < 1e-9) {
            continue;
        }
        const std::string x = detail::fixed(left + plot_w * (d - x_lo) / (x_hi - x_lo));
        svg << "<line x1=\"" << x << "\" y1=\"" << top + plot_h << "\" x2=\"" << x << "\" y2=\""
            << top + plot_h + 5 << "\" stroke=\"black\"/>\n";
        svg << "<text x=\"" << x << "\" y=\"" << top + plot_h + 18 << "\" font-size=\"11\" text-anchor=\"middle\">1e"
            << d << "</text>\n";
    }
    if (has_zero) {
        const std::string x = detail::fixed(px(0.0));
        svg << "<text x=\"" << x << "\" y=\"" << top + plot_h + 18
            << "\" font-size=\"11\" text-anchor=\"middle\">0</text>\n";
    }
    svg << "<text x=\"" << left + plot_w / 2 << "\" y=\"" << height - 15
        << "\" font-size=\"13\" text-anchor=\"middle\">lambda</text>\n";
    svg << "<text x=\"18\" y=\"" << top + plot_h / 2 << "\" font-size=\"13\" text-anchor=\"middle\" "
        << "transform=\"rotate(-90 18 " << top + plot_h / 2 << ")\">risk</text>\n";

    const auto polyline = [&](auto value, const char* colour) {
        svg << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"2\" points=\"";
        bool first = true;
        for (const SweepRow& r : result.rows) {
            const double v = value(r);
            if (!std::isfinite(v)) {
                continue;
            }
            svg << (first ? "" : " ") << detail::fixed(px(r.lambda)) << ',' << detail::fixed(py(v));
            first = false;
        }
        svg << "\"/>\n";
    };
    polyline([](const SweepRow& r) { return r.ridge_risk; }, "#1f77b4");
    polyline([](const SweepRow& r) { return r.pca_risk; }, "#ff7f0e");

    svg << "<line x1=\"" << left + 15 << "\" y1=\"" << top + 15 << "\" x2=\"" << left + 40 << "\" y2=\"" << top + 15
        << "\" stroke=\"#1f77b4\" stroke-width=\"2\"/>\n";
    svg << "<text x=\"" << left + 45 << "\" y=\"" << top + 19 << "\" font-size=\"12\">ridge</text>\n";
    svg << "<line x1=\"" << left + 15 << "\" y1=\"" << top + 33 << "\" x2=\"" << left + 40 << "\" y2=\"" << top + 33
        << "\" stroke=\"#ff7f0e\" stroke-width=\"2\"/>\n";
    svg << "<text x=\"" << left + 45 << "\" y=\"" << top + 37 << "\" font-size=\"12\">pca_ols</text>\n";
    svg << "</svg>\n";
    return svg.str();
}

} // namespace shrinkrisk
