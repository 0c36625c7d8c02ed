#pragma once

// JSON experiment configuration. Schema (see README for a full example):
//
//   {
//     "instance":   { "design": [[...], ...], "beta": [...], "noise_variance": s2 }
//       -- or --
//     "synthesis":  { "spectrum": { "kind": "flat" | "poly_decay" | "exp_decay" | "spiked",
//                                   "p": int, "scale": real, "exponent" | "rate" | "spike_count",
//                                   "spike_value", "bulk_value" },
//                     "signal":   { "kind": "top_aligned" | "bottom_aligned" | "uniform" | "random",
//                                   "k": int, "seed": u64, "norm": real },
//                     "n": int, "noise_variance": real, "seed": u64 },
//     "lambdas":     [ ... ]  or  { "min": real, "max": real, "count": int },
//     "monte_carlo": { "enabled": bool, "trials": int, "seed": u64,
//                      "noise": "gaussian" | "rademacher", "threads": int },
//     "output":      { "csv": path, "plot": path }
//   }

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "shrinkrisk/core_model.hpp"
#include "shrinkrisk/errors.hpp"
#include "shrinkrisk/monte_carlo.hpp"
#include "shrinkrisk/scenarios.hpp"

namespace shrinkrisk {

struct InlineSource {
    Matrix design;
    Vector beta;
    double noise_variance = 0.0;
};

struct SynthesisSource {
    SpectrumSpec spectrum;
    SignalSpec signal;
    std::size_t n = 1;
    double noise_variance = 0.0;
    std::uint64_t seed = 0;
};

struct MonteCarloConfig {
    bool enabled = false;
    std::size_t trials = 10000;
    std::uint64_t seed = 0;
    NoiseKind noise = NoiseKind::Gaussian;
    unsigned threads = 0;
};

struct ExperimentConfig {
    std::variant<InlineSource, SynthesisSource> source;
    std::vector<double> lambdas;
    MonteCarloConfig monte_carlo;
    std::optional<std::string> csv_path;
    std::optional<std::string> plot_path;

    ProblemInstance instance() const {
        if (const auto* in = std::get_if<InlineSource>(&source)) {
            return ProblemInstance(in->design, in->beta, in->noise_variance);
        }
        const auto& syn = std::get<SynthesisSource>(source);
        return build_instance(syn.spectrum, syn.signal, syn.n, syn.noise_variance, syn.seed);
    }

    /// Replaces every seed the config carries.
    void override_seed(std::uint64_t seed) {
        monte_carlo.seed = seed;
        if (auto* syn = std::get_if<SynthesisSource>(&source)) {
            syn->seed = seed;
        }
    }
};

/// log-spaced grid min * (max/min)^(i/(count-1)), endpoints exact.
inline std::vector<double> log_spaced(double min, double max, std::size_t count) {
    if (!(min > 0.0) || !(max >= min) || !std::isfinite(max) || count < 1) {
        throw ValidationError("log-spaced grid needs 0 < min <= max and count >= 1");
    }
    if (count > 1 && min == max) {
        throw ValidationError("log-spaced grid with count > 1 needs min < max");
    }
    std::vector<double> grid(count);
    const double log_min = std::log(min);
    const double log_span = std::log(max) - log_min;
    for (std::size_t i = 0; i < count; ++i) {
        grid[i] = count == 1 ? min : std::exp(log_min + log_span * static_cast<double>(i) / static_cast<double>(count - 1));
    }
    grid.front() = min;
    grid.back() = max;
    return grid;
}

namespace detail {

using json = nlohmann::json;

inline void reject_unknown_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) {
        throw ValidationError(where + " must be a JSON object");
    }
    for (const auto& item : j.items()) {
        if (!allowed.count(item.key())) {
            throw ValidationError("unknown key '" + item.key() + "' in " + where);
        }
    }
}

inline const json& require(const json& j, const std::string& key, const std::string& where) {
    if (!j.contains(key)) {
        throw ValidationError("missing '" + key + "' in " + where);
    }
    return j.at(key);
}

inline double real_field(const json& j, const std::string& key, const std::string& where) {
    const json& v = require(j, key, where);
    if (!v.is_number()) {
        throw ValidationError("'" + key + "' in " + where + " must be a number");
    }
    return v.get<double>();
}

inline std::uint64_t uint_field(const json& j, const std::string& key, const std::string& where) {
    const json& v = require(j, key, where);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
        throw ValidationError("'" + key + "' in " + where + " must be a nonnegative integer");
    }
    return v.get<std::uint64_t>();
}

inline std::string string_field(const json& j, const std::string& key, const std::string& where) {
    const json& v = require(j, key, where);
    if (!v.is_string()) {
        throw ValidationError("'" + key + "' in " + where + " must be a string");
    }
    return v.get<std::string>();
}

inline Vector real_vector(const json& j, const std::string& where) {
    if (!j.is_array() || j.empty()) {
        throw ValidationError(where + " must be a nonempty array of numbers");
    }
    Vector v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) {
            throw ValidationError(where + " must contain only numbers");
        }
        v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
    }
    return v;
}

inline InlineSource parse_inline(const json& j) {
    const std::string where = "instance";
    reject_unknown_keys(j, {"design", "beta", "noise_variance"}, where);
    const json& rows = require(j, "design", where);
    if (!rows.is_array() || rows.empty()) {
        throw ValidationError("instance.design must be a nonempty array of rows");
    }
    const std::size_t n = rows.size();
    const Vector first = real_vector(rows[0], "instance.design row 0");
    Matrix design(static_cast<Eigen::Index>(n), first.size());
    for (std::size_t i = 0; i < n; ++i) {
        const Vector row = real_vector(rows[i], "instance.design row " + std::to_string(i));
        if (row.size() != first.size()) {
            throw ValidationError("instance.design rows have unequal lengths");
        }
        design.row(static_cast<Eigen::Index>(i)) = row.transpose();
    }
    InlineSource out{std::move(design), real_vector(require(j, "beta", where), "instance.beta"),
                     real_field(j, "noise_variance", where)};
    // Constructing validates shapes and values.
    (void)ProblemInstance(out.design, out.beta, out.noise_variance);
    return out;
}

inline SpectrumSpec parse_spectrum(const json& j) {
    const std::string where = "synthesis.spectrum";
    reject_unknown_keys(j, {"kind", "p", "scale", "exponent", "rate", "spike_count", "spike_value", "bulk_value"},
                        where);
    SpectrumSpec spec;
    spec.p = uint_field(j, "p", where);
    spec.scale = j.contains("scale") ? real_field(j, "scale", where) : 1.0;
    const std::string kind = string_field(j, "kind", where);
    if (kind == "flat") {
        spec.kind = spectrum_kind::Flat{};
    } else if (kind == "poly_decay") {
        spec.kind = spectrum_kind::PolyDecay{real_field(j, "exponent", where)};
    } else if (kind == "exp_decay") {
        spec.kind = spectrum_kind::ExpDecay{real_field(j, "rate", where)};
    } else if (kind == "spiked") {
        spec.kind = spectrum_kind::Spiked{uint_field(j, "spike_count", where), real_field(j, "spike_value", where),
                                          real_field(j, "bulk_value", where)};
    } else {
        throw ValidationError("unknown spectrum kind '" + kind + "'");
    }
    (void)spectrum_values(spec);
    return spec;
}

inline SignalSpec parse_signal(const json& j) {
    const std::string where = "synthesis.signal";
    reject_unknown_keys(j, {"kind", "k", "seed", "norm"}, where);
    SignalSpec spec;
    spec.norm = j.contains("norm") ? real_field(j, "norm", where) : 1.0;
    const std::string kind = string_field(j, "kind", where);
    if (kind == "top_aligned") {
        spec.kind = signal_kind::TopAligned{uint_field(j, "k", where)};
    } else if (kind == "bottom_aligned") {
        spec.kind = signal_kind::BottomAligned{uint_field(j, "k", where)};
    } else if (kind == "uniform") {
        spec.kind = signal_kind::Uniform{};
    } else if (kind == "random") {
        spec.kind = signal_kind::Random{j.contains("seed") ? uint_field(j, "seed", where) : 0};
    } else {
        throw ValidationError("unknown signal kind '" + kind + "'");
    }
    return spec;
}

inline SynthesisSource parse_synthesis(const json& j) {
    const std::string where = "synthesis";
    reject_unknown_keys(j, {"spectrum", "signal", "n", "noise_variance", "seed"}, where);
    SynthesisSource out;
    out.spectrum = parse_spectrum(require(j, "spectrum", where));
    out.signal = parse_signal(require(j, "signal", where));
    out.n = uint_field(j, "n", where);
    out.noise_variance = real_field(j, "noise_variance", where);
    out.seed = j.contains("seed") ? uint_field(j, "seed", where) : 0;
    return out;
}

inline std::vector<double> parse_lambdas(const json& j) {
    std::vector<double> grid;
    if (j.is_array()) {
        const Vector v = real_vector(j, "lambdas");
        grid.assign(v.begin(), v.end());
    } else if (j.is_object()) {
        reject_unknown_keys(j, {"min", "max", "count"}, "lambdas");
        grid = log_spaced(real_field(j, "min", "lambdas"), real_field(j, "max", "lambdas"),
                          uint_field(j, "count", "lambdas"));
    } else {
        throw ValidationError("lambdas must be an array or a {min, max, count} object");
    }
    for (double lambda : grid) {
        if (!std::isfinite(lambda) || lambda < 0.0) {
            throw ValidationError("lambda grid entries must be finite and >= 0");
        }
    }
    for (std::size_t i = 1; i < grid.size(); ++i) {
        if (!(grid[i] > grid[i - 1])) {
            throw ValidationError("lambda grid must be strictly ascending");
        }
    }
    return grid;
}

inline MonteCarloConfig parse_monte_carlo(const json& j) {
    const std::string where = "monte_carlo";
    reject_unknown_keys(j, {"enabled", "trials", "seed", "noise", "threads"}, where);
    MonteCarloConfig mc;
    if (j.contains("enabled")) {
        if (!j.at("enabled").is_boolean()) {
            throw ValidationError("monte_carlo.enabled must be a boolean");
        }
        mc.enabled = j.at("enabled").get<bool>();
    } else {
        mc.enabled = true;
    }
    if (j.contains("trials")) {
        mc.trials = uint_field(j, "trials", where);
    }
    if (mc.trials < 2) {
        throw ValidationError("monte_carlo.trials must be >= 2");
    }
    if (j.contains("seed")) {
        mc.seed = uint_field(j, "seed", where);
    }
    if (j.contains("threads")) {
        mc.threads = static_cast<unsigned>(uint_field(j, "threads", where));
    }
    if (j.contains("noise")) {
        const std::string noise = string_field(j, "noise", where);
        if (noise == "gaussian") {
            mc.noise = NoiseKind::Gaussian;
        } else if (noise == "rademacher") {
            mc.noise = NoiseKind::Rademacher;
        } else {
            throw ValidationError("monte_carlo.noise must be 'gaussian' or 'rademacher'");
        }
    }
    return mc;
}

} // namespace detail

inline ExperimentConfig parse_config(const nlohmann::json& j) {
    using detail::require;
    detail::reject_unknown_keys(j, {"instance", "synthesis", "lambdas", "monte_carlo", "output"}, "config");
    const bool has_inline = j.contains("instance");
    const bool has_synthesis = j.contains("synthesis");
    if (has_inline == has_synthesis) {
        throw ValidationError("config needs exactly one of 'instance' or 'synthesis'");
    }
    ExperimentConfig cfg;
    if (has_inline) {
        cfg.source = detail::parse_inline(j.at("instance"));
    } else {
        cfg.source = detail::parse_synthesis(j.at("synthesis"));
    }
    cfg.lambdas = detail::parse_lambdas(require(j, "lambdas", "config"));
    if (j.contains("monte_carlo")) {
        cfg.monte_carlo = detail::parse_monte_carlo(j.at("monte_carlo"));
    }
    if (j.contains("output")) {
        const auto& out = j.at("output");
        detail::reject_unknown_keys(out, {"csv", "plot"}, "output");
        if (out.contains("csv")) {
            cfg.csv_path = detail::string_field(out, "csv", "output");
        }
        if (out.contains("plot")) {
            cfg.plot_path = detail::string_field(out, "plot", "output");
        }
    }
    // Synthesis problems are validated by building them once.
    if (has_synthesis) {
        (void)cfg.instance();
    }
    return cfg;
}

inline ExperimentConfig parse_config_text(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError(std::string("config is not valid JSON: ") + e.what());
    }
    return parse_config(j);
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ValidationError("cannot open config file '" + path + "'");
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_config_text(buffer.str());
}

} // namespace shrinkrisk
