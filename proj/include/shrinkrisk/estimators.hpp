#pragma once

// Ridge, ordinary least squares and PCA-truncated least squares for the
// fixed-design model. All three are linear in y; coefficients are returned in
// the original coordinates.

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "shrinkrisk/core_model.hpp"
#include "shrinkrisk/errors.hpp"

namespace shrinkrisk {

enum class Method { Ridge, OLS, PcaOls };

inline std::string_view to_string(Method m) {
    switch (m) {
    case Method::Ridge: return "ridge";
    case Method::OLS: return "ols";
    case Method::PcaOls: return "pca_ols";
    }
    return "unknown";
}

struct Observation {
    Vector y;
};

struct Estimate {
    Vector coefficients;
    Method method = Method::OLS;
    double lambda = 0.0;
    /// PcaOls only: kept_mask[j] is true when rotated coordinate j was retained.
    std::optional<std::vector<bool>> kept_mask;
};

namespace detail {

inline void check_lambda(double lambda) {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
        throw ValidationError("lambda must be finite and >= 0");
    }
}

} // namespace detail

/// lambda_j / (lambda_j + lambda), with 1 for (lambda_j > 0, lambda = 0) and 0
/// whenever lambda_j = 0.
inline Vector shrinkage_factors(const Spectrum& spectrum, double lambda) {
    detail::check_lambda(lambda);
    const Vector& ev = spectrum.eigenvalues();
    Vector factors(ev.size());
    for (Eigen::Index j = 0; j < ev.size(); ++j) {
        if (ev[j] == 0.0) {
            factors[j] = 0.0;
        } else if (lambda == 0.0) {
            factors[j] = 1.0;
        } else {
            factors[j] = ev[j] / (ev[j] + lambda);
        }
    }
    return factors;
}

/// Which rotated coordinates PCA-OLS keeps: lambda_j >= lambda (ties kept),
/// never a numerically-null direction.
inline std::vector<bool> pca_kept_mask(const Spectrum& spectrum, double lambda) {
    detail::check_lambda(lambda);
    std::vector<bool> kept(spectrum.p());
    for (std::size_t j = 0; j < spectrum.p(); ++j) {
        kept[j] = spectrum.eigenvalues()[static_cast<Eigen::Index>(j)] >= lambda && !spectrum.is_null(j);
    }
    return kept;
}

/// A prepared estimator: the expensive, y-independent work (Sigma, its
/// spectrum, the ridge factorization) done once, then `fit` per observation.
class LinearFit {
public:
    LinearFit(const ProblemInstance& instance, Method method, double lambda)
        : LinearFit(instance, eigendecompose(second_moment(instance)), method, lambda) {}

    LinearFit(const ProblemInstance& instance, Spectrum spectrum, Method method, double lambda)
        : design_(instance.design()), n_(instance.n()), spectrum_(std::move(spectrum)), method_(method),
          lambda_(method == Method::OLS ? 0.0 : lambda) {
        detail::check_lambda(lambda);
        if (spectrum_.p() != instance.p()) {
            throw ValidationError("spectrum dimension does not match the instance");
        }
        switch (method_) {
        case Method::Ridge: {
            if (lambda_ == 0.0 && !spectrum_.full_rank()) {
                throw SingularityError("ridge with lambda = 0 needs an invertible second moment; use ols_fit "
                                       "for the minimum-norm least squares solution");
            }
            const auto p = static_cast<Eigen::Index>(instance.p());
            Matrix system = second_moment(instance).matrix();
            system.diagonal().array() += lambda_;
            ridge_solver_.compute(system);
            if (ridge_solver_.info() != Eigen::Success) {
                throw SingularityError("ridge system (Sigma + lambda I) is not positive definite (p = " +
                                       std::to_string(p) + ")");
            }
            break;
        }
        case Method::OLS:
        case Method::PcaOls: {
            const Vector& ev = spectrum_.eigenvalues();
            inverse_eigenvalues_ = Vector::Zero(ev.size());
            const std::vector<bool> kept = method_ == Method::PcaOls ? pca_kept_mask(spectrum_, lambda_)
                                                                     : std::vector<bool>(spectrum_.p(), true);
            for (std::size_t j = 0; j < spectrum_.p(); ++j) {
                const auto jj = static_cast<Eigen::Index>(j);
                if (kept[j] && !spectrum_.is_null(j)) {
                    inverse_eigenvalues_[jj] = 1.0 / ev[jj];
                }
            }
            if (method_ == Method::PcaOls) {
                kept_mask_ = kept;
            }
            break;
        }
        }
    }

    Method method() const noexcept { return method_; }
    double lambda() const noexcept { return lambda_; }
    const Spectrum& spectrum() const noexcept { return spectrum_; }

    /// X^T y / n.
    Vector moment_vector(const Vector& y) const {
        if (static_cast<std::size_t>(y.size()) != n_) {
            throw ValidationError("observation has length " + std::to_string(y.size()) + ", expected n = " +
                                  std::to_string(n_));
        }
        return design_.transpose() * y / static_cast<double>(n_);
    }

    Estimate fit(const Observation& observation) const {
        return Estimate{coefficients(observation.y), method_, lambda_, kept_mask_};
    }

    /// Coefficients only, without the Estimate wrapper.
    Vector coefficients(const Vector& y) const {
        const Vector rhs = moment_vector(y);
        if (method_ == Method::Ridge) {
            return ridge_solver_.solve(rhs);
        }
        const Vector rotated = spectrum_.to_rotated(rhs);
        return spectrum_.from_rotated(rotated.cwiseProduct(inverse_eigenvalues_));
    }

private:
    Matrix design_;
    std::size_t n_;
    Spectrum spectrum_;
    Method method_;
    double lambda_;
    Eigen::LLT<Matrix> ridge_solver_;
    Vector inverse_eigenvalues_;
    std::optional<std::vector<bool>> kept_mask_;
};

/// (Sigma + lambda I)^{-1} X^T y / n via a Cholesky solve.
inline Estimate ridge_fit(const ProblemInstance& instance, const Observation& y, double lambda) {
    return LinearFit(instance, Method::Ridge, lambda).fit(y);
}

/// Minimum-norm least squares: null directions of Sigma get coefficient 0.
inline Estimate ols_fit(const ProblemInstance& instance, const Observation& y) {
    return LinearFit(instance, Method::OLS, 0.0).fit(y);
}

/// OLS in the eigenbasis, keeping only coordinates with lambda_j >= lambda.
inline Estimate pca_ols_fit(const ProblemInstance& instance, const Observation& y, double lambda) {
    return LinearFit(instance, Method::PcaOls, lambda).fit(y);
}

inline Estimate fit(const ProblemInstance& instance, const Observation& y, Method method, double lambda) {
    return LinearFit(instance, method, lambda).fit(y);
}

} // namespace shrinkrisk
