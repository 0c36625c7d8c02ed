#pragma once

// Exact risks of ridge and PCA-OLS in the eigenbasis of Sigma, their
// bias-variance split, and the factor-4 inflation certificate.
//
// With s_j = lambda_j / (lambda_j + lambda) and sigma^2/n the per-sample noise:
//
//   ridge    variance_j = (sigma^2/n) s_j^2
//            bias_j     = beta_j^2 lambda_j (lambda / (lambda_j + lambda))^2
//   PCA-OLS  variance_j = sigma^2/n       if coordinate j is kept
//            bias_j     = lambda_j beta_j^2 if lambda_j < lambda
//
// The ridge bias uses the lambda = 0 safe form; it equals
// beta_j^2 lambda_j / (1 + lambda_j/lambda)^2 for lambda > 0.
//
// Numerically-null eigen-directions (lambda_j <= 1e-12 lambda_1) are never
// estimated (minimum-norm least squares). They carry no PCA-OLS variance, and
// at lambda = 0 they contribute nothing to either risk.

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "shrinkrisk/core_model.hpp"
#include "shrinkrisk/errors.hpp"
#include "shrinkrisk/estimators.hpp"

namespace shrinkrisk {

/// Slack on the factor 4 when certifying, absorbing rounding in the tight case.
inline constexpr double kBoundSlack = 1e-9;
inline constexpr double kInflationBound = 4.0;
/// Agreement required between the closed-form and mean-estimator risk routes.
inline constexpr double kDecompositionTolerance = 1e-12;

struct RiskReport {
    Method method = Method::Ridge;
    double lambda = 0.0;
    Vector variance_terms;
    Vector bias_terms;
    double total_variance = 0.0;
    double total_bias = 0.0;
    double total_risk = 0.0;

    /// variance_j + bias_j.
    Vector terms() const { return variance_terms + bias_terms; }
};

struct InflationCertificate {
    double lambda = 0.0;
    /// j-th PCA-OLS risk term over the j-th ridge term (0/0 = 1).
    Vector per_term_ratios;
    double overall_ratio = 1.0;
    bool bound_holds = true;
    double max_term_ratio = 1.0;

    bool terms_hold() const noexcept { return max_term_ratio <= kInflationBound + kBoundSlack; }
};

struct SweepRow {
    double lambda = 0.0;
    double ridge_variance = 0.0;
    double ridge_bias = 0.0;
    double ridge_risk = 0.0;
    double pca_variance = 0.0;
    double pca_bias = 0.0;
    double pca_risk = 0.0;
    double ratio = 1.0;
    double max_term_ratio = 1.0;
    bool bound_holds = true;
};

struct SweepResult {
    std::vector<SweepRow> rows;

    bool all_bounds_hold() const {
        return std::all_of(rows.begin(), rows.end(), [](const SweepRow& r) {
            return r.bound_holds && r.max_term_ratio <= kInflationBound + kBoundSlack;
        });
    }
};

namespace detail {

/// Ratio with the 0/0 = 1 convention; x/0 for x > 0 is +inf.
inline double risk_ratio(double numerator, double denominator) {
    if (denominator == 0.0) {
        return numerator == 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
    }
    return numerator / denominator;
}

inline void finish_totals(RiskReport& report, double noise_per_sample, const Vector& unit_variance) {
    report.variance_terms = noise_per_sample * unit_variance;
    report.total_variance = noise_per_sample * unit_variance.sum();
    report.total_bias = report.bias_terms.sum();
    report.total_risk = report.total_variance + report.total_bias;
}

inline double noise_per_sample(const RotatedProblem& rotated) {
    return rotated.noise_variance() / static_cast<double>(rotated.n());
}

inline bool agree(double a, double b) {
    return std::abs(a - b) <= kDecompositionTolerance * std::max(std::abs(a), std::abs(b));
}

} // namespace detail

/// Closed-form ridge risk split into variance and bias per eigen-coordinate.
inline RiskReport ridge_risk(const RotatedProblem& rotated, double lambda) {
    detail::check_lambda(lambda);
    const Spectrum& spectrum = rotated.spectrum();
    const Vector& ev = spectrum.eigenvalues();
    const Vector& beta = rotated.beta_rotated();
    const auto p = ev.size();

    RiskReport report;
    report.method = Method::Ridge;
    report.lambda = lambda;
    report.bias_terms = Vector::Zero(p);
    Vector unit_variance = Vector::Zero(p);
    for (Eigen::Index j = 0; j < p; ++j) {
        if (lambda == 0.0 && spectrum.is_null(static_cast<std::size_t>(j))) {
            continue;
        }
        const double denom = ev[j] + lambda;
        const double kept = ev[j] / denom;
        const double shrunk = lambda / denom;
        unit_variance[j] = kept * kept;
        report.bias_terms[j] = beta[j] * beta[j] * ev[j] * shrunk * shrunk;
    }
    detail::finish_totals(report, detail::noise_per_sample(rotated), unit_variance);
    return report;
}

/// Closed-form PCA-OLS risk: sigma^2/n per kept coordinate plus the Sigma-mass
/// of beta on the dropped ones.
inline RiskReport pca_risk(const RotatedProblem& rotated, double lambda) {
    detail::check_lambda(lambda);
    const Spectrum& spectrum = rotated.spectrum();
    const Vector& ev = spectrum.eigenvalues();
    const Vector& beta = rotated.beta_rotated();
    const auto p = ev.size();

    RiskReport report;
    report.method = Method::PcaOls;
    report.lambda = lambda;
    report.bias_terms = Vector::Zero(p);
    Vector unit_variance = Vector::Zero(p);
    for (Eigen::Index j = 0; j < p; ++j) {
        const bool null = spectrum.is_null(static_cast<std::size_t>(j));
        if (ev[j] >= lambda && !null) {
            unit_variance[j] = 1.0;
        }
        if (ev[j] < lambda) {
            report.bias_terms[j] = ev[j] * (beta[j] * beta[j]);
        }
    }
    detail::finish_totals(report, detail::noise_per_sample(rotated), unit_variance);
    return report;
}

inline RiskReport analytic_risk(Method method, const RotatedProblem& rotated, double lambda) {
    switch (method) {
    case Method::Ridge: return ridge_risk(rotated, lambda);
    case Method::PcaOls: return pca_risk(rotated, lambda);
    case Method::OLS: return ridge_risk(rotated, 0.0);
    }
    throw ValidationError("unknown method");
}

/// Risk = E||b - E b||^2_Sigma + ||E b - beta||^2_Sigma, computed from the mean
/// estimator E b and the OLS coordinate variances sigma^2 / (n lambda_j), then
/// checked term by term against the closed forms. Returns the closed-form
/// report; throws ConsistencyError if the two routes disagree.
inline RiskReport decompose_risk(Method method, const RotatedProblem& rotated, double lambda) {
    if (method != Method::Ridge && method != Method::PcaOls) {
        throw ValidationError("decompose_risk supports ridge and pca_ols");
    }
    detail::check_lambda(lambda);
    const Spectrum& spectrum = rotated.spectrum();
    const Vector& ev = spectrum.eigenvalues();
    const Vector& beta = rotated.beta_rotated();
    const double sigma2 = rotated.noise_variance();
    const auto n = static_cast<double>(rotated.n());
    const auto p = ev.size();

    // Mean estimator in eigen coordinates: E b_j = gain_j * beta_j, and
    // Var(b_j) = gain_j^2 * Var(OLS_j) with Var(OLS_j) = sigma^2 / (n lambda_j).
    Vector variance(p);
    Vector bias(p);
    const std::vector<bool> kept = pca_kept_mask(spectrum, lambda);
    for (Eigen::Index j = 0; j < p; ++j) {
        const auto jj = static_cast<std::size_t>(j);
        double gain = 0.0;
        double miss = 1.0; // (beta_j - E b_j) / beta_j
        if (method == Method::Ridge) {
            if (lambda == 0.0 && spectrum.is_null(jj)) {
                miss = 0.0;
            } else {
                gain = ev[j] / (ev[j] + lambda);
                miss = lambda / (ev[j] + lambda);
            }
        } else if (kept[jj]) {
            gain = 1.0;
            miss = 0.0;
        } else if (ev[j] >= lambda) {
            miss = 0.0; // null direction above the cutoff: not estimated, not penalized
        }
        const double ols_variance = ev[j] > 0.0 ? sigma2 / (n * ev[j]) : 0.0;
        variance[j] = ev[j] * gain * gain * ols_variance;
        const double mean_gap = beta[j] * miss;
        bias[j] = ev[j] * mean_gap * mean_gap;
    }

    RiskReport report = analytic_risk(method, rotated, lambda);
    for (Eigen::Index j = 0; j < p; ++j) {
        if (!detail::agree(variance[j], report.variance_terms[j]) || !detail::agree(bias[j], report.bias_terms[j])) {
            std::ostringstream os;
            os.precision(17);
            os << to_string(method) << " risk routes disagree at coordinate " << j << " (lambda = " << lambda
               << "): variance " << variance[j] << " vs " << report.variance_terms[j] << ", bias " << bias[j]
               << " vs " << report.bias_terms[j];
            throw ConsistencyError(os.str());
        }
    }
    if (!detail::agree(variance.sum(), report.total_variance) || !detail::agree(bias.sum(), report.total_bias)) {
        throw ConsistencyError("risk routes disagree on totals");
    }
    return report;
}

inline InflationCertificate inflation_certificate(const RiskReport& ridge, const RiskReport& pca) {
    InflationCertificate cert;
    cert.lambda = ridge.lambda;
    const Vector ridge_terms = ridge.terms();
    const Vector pca_terms = pca.terms();
    cert.per_term_ratios.resize(ridge_terms.size());
    for (Eigen::Index j = 0; j < ridge_terms.size(); ++j) {
        cert.per_term_ratios[j] = detail::risk_ratio(pca_terms[j], ridge_terms[j]);
    }
    cert.max_term_ratio = cert.per_term_ratios.maxCoeff();
    cert.overall_ratio = detail::risk_ratio(pca.total_risk, ridge.total_risk);
    cert.bound_holds = cert.overall_ratio <= kInflationBound + kBoundSlack;
    return cert;
}

/// PCA-OLS risk over ridge risk at one lambda, overall and per coordinate.
inline InflationCertificate inflation_certificate(const RotatedProblem& rotated, double lambda) {
    return inflation_certificate(ridge_risk(rotated, lambda), pca_risk(rotated, lambda));
}

inline void validate_lambda_grid(const std::vector<double>& lambdas) {
    if (lambdas.empty()) {
        throw ValidationError("lambda grid is empty");
    }
    for (std::size_t i = 0; i < lambdas.size(); ++i) {
        if (!std::isfinite(lambdas[i]) || lambdas[i] < 0.0) {
            throw ValidationError("lambda grid entry " + std::to_string(i) + " is negative or not finite");
        }
        if (i > 0 && !(lambdas[i] > lambdas[i - 1])) {
            throw ValidationError("lambda grid must be strictly ascending (entry " + std::to_string(i) + ")");
        }
    }
}

inline SweepRow sweep_row(const RotatedProblem& rotated, double lambda) {
    const RiskReport ridge = ridge_risk(rotated, lambda);
    const RiskReport pca = pca_risk(rotated, lambda);
    const InflationCertificate cert = inflation_certificate(ridge, pca);
    return SweepRow{lambda,
                    ridge.total_variance,
                    ridge.total_bias,
                    ridge.total_risk,
                    pca.total_variance,
                    pca.total_bias,
                    pca.total_risk,
                    cert.overall_ratio,
                    cert.max_term_ratio,
                    cert.bound_holds};
}

inline SweepResult lambda_sweep(const RotatedProblem& rotated, const std::vector<double>& lambdas) {
    validate_lambda_grid(lambdas);
    SweepResult result;
    result.rows.reserve(lambdas.size());
    for (double lambda : lambdas) {
        result.rows.push_back(sweep_row(rotated, lambda));
    }
    return result;
}

} // namespace shrinkrisk
