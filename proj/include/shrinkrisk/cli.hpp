#pragma once

// Command-line front end: sweep, verify and certify.
//
// Exit codes: 0 ok, 1 verification or bound failure, 2 config or usage error,
// 3 write failure. Nothing is written before the config has been validated.

#include <CLI11.hpp>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "shrinkrisk/config.hpp"
#include "shrinkrisk/monte_carlo.hpp"
#include "shrinkrisk/report.hpp"
#include "shrinkrisk/risk_analysis.hpp"
#include "shrinkrisk/scenarios.hpp"

namespace shrinkrisk::cli {

enum ExitCode : int { kOk = 0, kCheckFailed = 1, kConfigError = 2, kWriteError = 3 };

inline constexpr std::uint64_t kBatterySeed = 20240601;
inline constexpr double kAgreementBands = 4.0;
// Rounding allowance so a zero-noise run (std_error = 0) can still agree.
inline constexpr double kAgreementFloor = 1e-10;

struct RunOptions {
    std::optional<std::string> out;
    std::optional<std::string> plot;
    std::optional<std::uint64_t> seed;
    bool battery = false;
    /// Test hook: replaces each analytic risk before verify compares against it.
    std::function<double(double)> corrupt_analytic;
};

struct WriteError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline void write_file(const std::string& path, const std::string& contents) {
    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file) {
        throw WriteError("cannot open '" + path + "' for writing");
    }
    file << contents;
    file.flush();
    if (!file) {
        throw WriteError("failed writing '" + path + "'");
    }
}

inline bool agrees(double analytic, double empirical, double std_error) {
    const double floor = kAgreementFloor * std::max(std::abs(analytic), std::abs(empirical));
    return std::abs(empirical - analytic) <= kAgreementBands * std_error + floor;
}

namespace detail {

inline ExperimentConfig load(const std::string& path, const RunOptions& opts) {
    ExperimentConfig cfg = load_config(path);
    if (opts.seed) {
        cfg.override_seed(*opts.seed);
    }
    if (opts.out) {
        cfg.csv_path = opts.out;
    }
    if (opts.plot) {
        cfg.plot_path = opts.plot;
    }
    return cfg;
}

inline void emit(const std::optional<std::string>& path, const std::string& text, std::ostream& out) {
    if (path) {
        write_file(*path, text);
    } else {
        out << text;
    }
}

// Runs `body`, mapping library exceptions onto exit codes.
template <typename Body>
int guarded(std::ostream& err, Body&& body) {
    try {
        return body();
    } catch (const WriteError& e) {
        err << "error: " << e.what() << '\n';
        return kWriteError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kConfigError;
    }
}

} // namespace detail

inline int run_sweep(const std::string& config_path, const RunOptions& opts, std::ostream& out, std::ostream& err) {
    return detail::guarded(err, [&] {
        const ExperimentConfig cfg = detail::load(config_path, opts);
        const SweepResult result = lambda_sweep(rotate_problem(cfg.instance()), cfg.lambdas);
        detail::emit(cfg.csv_path, sweep_csv(result), out);
        if (cfg.plot_path) {
            write_file(*cfg.plot_path, render_svg(result));
        }
        return static_cast<int>(kOk);
    });
}

inline int run_verify(const std::string& config_path, const RunOptions& opts, std::ostream& out, std::ostream& err) {
    return detail::guarded(err, [&] {
        const ExperimentConfig cfg = detail::load(config_path, opts);
        if (!cfg.monte_carlo.enabled) {
            throw ValidationError("verify needs an enabled monte_carlo block");
        }
        const ProblemInstance instance = cfg.instance();
        const SweepResult result = lambda_sweep(rotate_problem(instance), cfg.lambdas);
        const MonteCarloConfig& mc = cfg.monte_carlo;
        const NoiseModel noise{mc.noise, instance.noise_variance()};
        const auto target = [&](double analytic) {
            return opts.corrupt_analytic ? opts.corrupt_analytic(analytic) : analytic;
        };

        std::vector<EmpiricalColumns> empirical;
        empirical.reserve(result.rows.size());
        bool all_agree = true;
        for (std::size_t i = 0; i < result.rows.size(); ++i) {
            const SweepRow& row = result.rows[i];
            // Ridge at lambda = 0 is the minimum-norm OLS fit.
            const Method ridge_method = row.lambda == 0.0 ? Method::OLS : Method::Ridge;
            const std::uint64_t ridge_seed = SplitMix64::substream(mc.seed, 2 * i)();
            const std::uint64_t pca_seed = SplitMix64::substream(mc.seed, 2 * i + 1)();
            const EmpiricalRisk ridge =
                empirical_risk(instance, ridge_method, row.lambda, noise, mc.trials, ridge_seed, mc.threads);
            const EmpiricalRisk pca =
                empirical_risk(instance, Method::PcaOls, row.lambda, noise, mc.trials, pca_seed, mc.threads);
            EmpiricalColumns cols{ridge.mean, ridge.std_error, pca.mean, pca.std_error, false};
            cols.agrees = agrees(target(row.ridge_risk), ridge.mean, ridge.std_error) &&
                          agrees(target(row.pca_risk), pca.mean, pca.std_error);
            all_agree = all_agree && cols.agrees;
            empirical.push_back(cols);
        }
        detail::emit(cfg.csv_path, sweep_csv(result, &empirical), out);
        if (cfg.plot_path) {
            write_file(*cfg.plot_path, render_svg(result));
        }
        if (!all_agree) {
            err << "verify: empirical risk disagrees with the analytic value on at least one row\n";
        }
        return static_cast<int>(all_agree ? kOk : kCheckFailed);
    });
}

struct CertifySummary {
    std::size_t certificates = 0;
    std::size_t failures = 0;
    double worst_ratio = -std::numeric_limits<double>::infinity();
    double worst_ratio_lambda = 0.0;
    std::string worst_ratio_label;
    double worst_term_ratio = -std::numeric_limits<double>::infinity();
    double worst_term_lambda = 0.0;
    std::string worst_term_label;

    void add(const std::string& label, const SweepResult& result) {
        for (const SweepRow& row : result.rows) {
            ++certificates;
            failures += static_cast<std::size_t>(!row.bound_holds);
            // NaN never beats the running worst, so record it explicitly.
            if (row.ratio > worst_ratio || std::isnan(row.ratio)) {
                worst_ratio = row.ratio;
                worst_ratio_lambda = row.lambda;
                worst_ratio_label = label;
            }
            if (row.max_term_ratio > worst_term_ratio || std::isnan(row.max_term_ratio)) {
                worst_term_ratio = row.max_term_ratio;
                worst_term_lambda = row.lambda;
                worst_term_label = label;
            }
        }
    }

    std::string report() const {
        const auto where = [](const std::string& label, double lambda) {
            std::string s = "lambda=" + format_real(lambda);
            if (!label.empty()) {
                s += " in " + label;
            }
            return s;
        };
        std::ostringstream os;
        os << "certificates: " << certificates << '\n';
        os << "worst ratio: " << format_real(worst_ratio) << " at " << where(worst_ratio_label, worst_ratio_lambda)
           << '\n';
        os << "worst max_term_ratio: " << format_real(worst_term_ratio) << " at "
           << where(worst_term_label, worst_term_lambda) << '\n';
        os << "bound " << format_real(kInflationBound) << ": " << (failures == 0 ? "holds" : "violated");
        if (failures != 0) {
            os << " (" << failures << " failures)";
        }
        os << '\n';
        return os.str();
    }
};

inline int run_certify(const std::optional<std::string>& config_path, const RunOptions& opts, std::ostream& out,
                       std::ostream& err) {
    return detail::guarded(err, [&] {
        if (!config_path && !opts.battery) {
            throw ValidationError("certify needs a config path, --battery, or both");
        }
        CertifySummary summary;
        std::optional<std::string> report_path = opts.out;
        if (config_path) {
            const ExperimentConfig cfg = detail::load(*config_path, opts);
            report_path = cfg.csv_path;
            summary.add("", lambda_sweep(rotate_problem(cfg.instance()), cfg.lambdas));
        }
        if (opts.battery) {
            for (const Scenario& s : scenario_grid(opts.seed.value_or(kBatterySeed))) {
                summary.add(s.label, lambda_sweep(rotate_problem(s.instance), s.lambdas));
            }
        }
        detail::emit(report_path, summary.report(), out);
        return static_cast<int>(summary.failures == 0 ? kOk : kCheckFailed);
    });
}

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Ridge versus PCA-OLS risk: sweeps, Monte Carlo checks and factor-4 certificates"};
    app.require_subcommand(1);

    RunOptions opts;
    std::string config_path;
    std::uint64_t seed = 0;
    std::string out_path, plot_path;

    const auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--out", out_path, "Output file (default: standard output)");
        cmd->add_option("--plot", plot_path, "SVG risk-curve file");
        cmd->add_option("--seed", seed, "Overrides every seed in the config");
    };
    CLI::App* sweep = app.add_subcommand("sweep", "Analytic risks over the lambda grid as CSV");
    sweep->add_option("config", config_path, "JSON experiment config")->required();
    add_common(sweep);
    CLI::App* verify = app.add_subcommand("verify", "Analytic risks checked against Monte Carlo");
    verify->add_option("config", config_path, "JSON experiment config")->required();
    add_common(verify);
    CLI::App* certify = app.add_subcommand("certify", "Check the factor-4 bound on every grid point");
    certify->add_option("config", config_path, "JSON experiment config");
    certify->add_flag("--battery", opts.battery, "Also certify the built-in scenario battery");
    add_common(certify);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? static_cast<int>(kOk) : static_cast<int>(kConfigError);
    }

    for (CLI::App* cmd : {sweep, verify, certify}) {
        if (cmd->parsed()) {
            if (cmd->count("--seed") > 0) {
                opts.seed = seed;
            }
            if (cmd->count("--out") > 0) {
                opts.out = out_path;
            }
            if (cmd->count("--plot") > 0) {
                opts.plot = plot_path;
            }
        }
    }
    if (sweep->parsed()) {
        return run_sweep(config_path, opts, out, err);
    }
    if (verify->parsed()) {
        return run_verify(config_path, opts, out, err);
    }
    const std::optional<std::string> path =
        certify->count("config") > 0 ? std::optional<std::string>(config_path) : std::nullopt;
    return run_certify(path, opts, out, err);
}

} // namespace shrinkrisk::cli
