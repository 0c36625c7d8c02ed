#pragma once

// Fixed-design linear model: Y = X beta + eps, with Var(eps_i) = sigma^2.
//
// Everything downstream is expressed through the empirical second moment
// Sigma = X^T X / n and its eigendecomposition (the PCA coordinate system).
// Risk of an estimate w is ||w - beta||^2_Sigma = (w - beta)^T Sigma (w - beta).

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "shrinkrisk/errors.hpp"

namespace shrinkrisk {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Eigenvalues at or below this fraction of the largest count as zero.
inline constexpr double kRankTolerance = 1e-12;
/// Negative eigenvalues down to -kPsdTolerance * lambda_1 are rounding noise.
inline constexpr double kPsdTolerance = 1e-10;
/// Entrywise asymmetry allowed in a second-moment matrix.
inline constexpr double kSymmetryTolerance = 1e-12;

namespace detail {

inline bool all_finite(const Matrix& m) { return m.allFinite(); }
inline bool all_finite(const Vector& v) { return v.allFinite(); }

inline std::string dims(Eigen::Index rows, Eigen::Index cols) {
    std::ostringstream os;
    os << rows << "x" << cols;
    return os.str();
}

} // namespace detail

/// The ground truth of an experiment: design X (n x p), true coefficients
/// beta and per-coordinate noise variance sigma^2.
class ProblemInstance {
public:
    ProblemInstance(Matrix design, Vector beta, double noise_variance)
        : ProblemInstance(design, std::move(beta), noise_variance,
                          static_cast<std::size_t>(design.rows()),
                          static_cast<std::size_t>(design.cols())) {}

    /// Declared n and p must agree with the matrix shape.
    ProblemInstance(Matrix design, Vector beta, double noise_variance, std::size_t n, std::size_t p)
        : design_(std::move(design)), beta_(std::move(beta)), noise_variance_(noise_variance), n_(n), p_(p) {
        if (n_ < 1 || p_ < 1) {
            throw ValidationError("problem instance needs n >= 1 and p >= 1");
        }
        if (static_cast<std::size_t>(design_.rows()) != n_ || static_cast<std::size_t>(design_.cols()) != p_) {
            throw ValidationError("design is " + detail::dims(design_.rows(), design_.cols()) +
                                  " but declared n x p is " + std::to_string(n_) + "x" + std::to_string(p_));
        }
        if (static_cast<std::size_t>(beta_.size()) != p_) {
            throw ValidationError("beta has length " + std::to_string(beta_.size()) + ", expected p = " +
                                  std::to_string(p_));
        }
        if (!(noise_variance_ >= 0.0) || !std::isfinite(noise_variance_)) {
            throw ValidationError("noise variance must be finite and >= 0");
        }
        if (!detail::all_finite(design_) || !detail::all_finite(beta_)) {
            throw ValidationError("design and beta must be finite");
        }
    }

    const Matrix& design() const noexcept { return design_; }
    const Vector& beta() const noexcept { return beta_; }
    double noise_variance() const noexcept { return noise_variance_; }
    std::size_t n() const noexcept { return n_; }
    std::size_t p() const noexcept { return p_; }

private:
    Matrix design_;
    Vector beta_;
    double noise_variance_;
    std::size_t n_;
    std::size_t p_;
};

/// Sigma = X^T X / n. Symmetric and positive semidefinite, both checked on
/// construction.
class SecondMoment {
public:
    explicit SecondMoment(Matrix matrix) : matrix_(std::move(matrix)) {
        if (matrix_.rows() != matrix_.cols() || matrix_.rows() < 1) {
            throw ValidationError("second moment must be square and nonempty, got " +
                                  detail::dims(matrix_.rows(), matrix_.cols()));
        }
        if (!detail::all_finite(matrix_)) {
            throw ValidationError("second moment has non-finite entries");
        }
        const Eigen::Index p = matrix_.rows();
        for (Eigen::Index j = 0; j < p; ++j) {
            for (Eigen::Index k = j + 1; k < p; ++k) {
                if (std::abs(matrix_(j, k) - matrix_(k, j)) > kSymmetryTolerance) {
                    throw ValidationError("second moment is not symmetric at (" + std::to_string(j) + ", " +
                                          std::to_string(k) + ")");
                }
            }
        }
        Eigen::SelfAdjointEigenSolver<Matrix> solver(matrix_, Eigen::EigenvaluesOnly);
        if (solver.info() != Eigen::Success) {
            throw NumericalError("eigenvalue computation failed while validating second moment");
        }
        largest_ = std::max(solver.eigenvalues().maxCoeff(), 0.0);
        if (solver.eigenvalues().minCoeff() < -kPsdTolerance * largest_) {
            throw ValidationError("second moment is not positive semidefinite");
        }
    }

    const Matrix& matrix() const noexcept { return matrix_; }
    std::size_t p() const noexcept { return static_cast<std::size_t>(matrix_.rows()); }
    /// Largest eigenvalue (0 for the zero matrix).
    double largest_eigenvalue() const noexcept { return largest_; }

private:
    Matrix matrix_;
    double largest_ = 0.0;
};

/// Eigenvalues of Sigma in descending order with the matching eigenvectors as
/// the columns of `rotation`.
///
/// Under repeated eigenvalues the rotation is not unique; risks and norms are
/// invariant, but the identity of individual rotated coordinates is not.
class Spectrum {
public:
    Spectrum(Vector eigenvalues, Matrix rotation)
        : eigenvalues_(std::move(eigenvalues)), rotation_(std::move(rotation)) {
        const Eigen::Index p = eigenvalues_.size();
        if (p < 1 || rotation_.rows() != p || rotation_.cols() != p) {
            throw ValidationError("spectrum needs p eigenvalues and a p x p rotation");
        }
        if (!detail::all_finite(eigenvalues_) || !detail::all_finite(rotation_)) {
            throw ValidationError("spectrum has non-finite entries");
        }
        for (Eigen::Index j = 0; j < p; ++j) {
            if (eigenvalues_[j] < 0.0) {
                throw ValidationError("spectrum eigenvalues must be nonnegative");
            }
            if (j > 0 && eigenvalues_[j] > eigenvalues_[j - 1]) {
                throw ValidationError("spectrum eigenvalues must be sorted descending");
            }
        }
    }

    /// Diagonal Sigma: rotation is the identity.
    static Spectrum diagonal(Vector eigenvalues) {
        const Eigen::Index p = eigenvalues.size();
        return Spectrum(std::move(eigenvalues), Matrix::Identity(p, p));
    }

    const Vector& eigenvalues() const noexcept { return eigenvalues_; }
    const Matrix& rotation() const noexcept { return rotation_; }
    std::size_t p() const noexcept { return static_cast<std::size_t>(eigenvalues_.size()); }
    double largest() const noexcept { return eigenvalues_[0]; }

    /// True when eigenvalue j is numerically zero relative to lambda_1.
    bool is_null(std::size_t j) const noexcept {
        return !(eigenvalues_[static_cast<Eigen::Index>(j)] > kRankTolerance * largest());
    }

    bool full_rank() const noexcept { return !is_null(p() - 1); }

    Vector to_rotated(const Vector& v) const { return rotation_.transpose() * v; }
    Vector from_rotated(const Vector& v) const { return rotation_ * v; }

    /// U diag(lambda) U^T.
    Matrix reconstruct() const { return rotation_ * eigenvalues_.asDiagonal() * rotation_.transpose(); }

private:
    Vector eigenvalues_;
    Matrix rotation_;
};

/// The problem expressed in the eigenbasis of Sigma.
class RotatedProblem {
public:
    RotatedProblem(Spectrum spectrum, Vector beta_rotated, double noise_variance, std::size_t n)
        : spectrum_(std::move(spectrum)), beta_rotated_(std::move(beta_rotated)), noise_variance_(noise_variance),
          n_(n) {
        if (static_cast<std::size_t>(beta_rotated_.size()) != spectrum_.p()) {
            throw ValidationError("rotated beta length does not match spectrum dimension");
        }
        if (!(noise_variance_ >= 0.0) || !std::isfinite(noise_variance_)) {
            throw ValidationError("noise variance must be finite and >= 0");
        }
        if (n_ < 1) {
            throw ValidationError("sample count n must be >= 1");
        }
        if (!detail::all_finite(beta_rotated_)) {
            throw ValidationError("rotated beta must be finite");
        }
    }

    /// Build directly from a diagonal Sigma; beta is already in eigen
    /// coordinates.
    static RotatedProblem from_diagonal(Vector eigenvalues, Vector beta, double noise_variance, std::size_t n) {
        return RotatedProblem(Spectrum::diagonal(std::move(eigenvalues)), std::move(beta), noise_variance, n);
    }

    const Spectrum& spectrum() const noexcept { return spectrum_; }
    const Vector& beta_rotated() const noexcept { return beta_rotated_; }
    double noise_variance() const noexcept { return noise_variance_; }
    std::size_t n() const noexcept { return n_; }
    std::size_t p() const noexcept { return spectrum_.p(); }

    /// sum_j lambda_j v_j^2 for v given in eigen coordinates.
    double sigma_norm_sq_rotated(const Vector& v_rotated) const {
        if (v_rotated.size() != beta_rotated_.size()) {
            throw ValidationError("vector length does not match p");
        }
        return (spectrum_.eigenvalues().array() * v_rotated.array().square()).sum();
    }

private:
    Spectrum spectrum_;
    Vector beta_rotated_;
    double noise_variance_;
    std::size_t n_;
};

inline SecondMoment second_moment(const ProblemInstance& instance) {
    const Matrix& x = instance.design();
    const auto p = static_cast<Eigen::Index>(instance.p());
    Matrix gram = Matrix::Zero(p, p);
    gram.selfadjointView<Eigen::Lower>().rankUpdate(x.transpose());
    gram /= static_cast<double>(instance.n());
    Matrix sigma = gram.selfadjointView<Eigen::Lower>();
    return SecondMoment(std::move(sigma));
}

/// Eigenvalues descending (stable under ties, so tied eigenvalues keep the
/// solver's order), tiny negatives clamped to 0, each eigenvector signed so its
/// largest-magnitude entry is positive.
inline Spectrum eigendecompose(const SecondMoment& sigma) {
    const Matrix& m = sigma.matrix();
    Eigen::SelfAdjointEigenSolver<Matrix> solver(m);
    if (solver.info() != Eigen::Success) {
        std::ostringstream os;
        os << "symmetric eigen-solver did not converge (p = " << m.rows() << ", frobenius norm = " << m.norm()
           << ", max |entry| = " << m.cwiseAbs().maxCoeff() << ", trace = " << m.trace() << ")";
        throw NumericalError(os.str());
    }
    const Vector& raw_values = solver.eigenvalues();
    const Matrix& raw_vectors = solver.eigenvectors();
    const Eigen::Index p = raw_values.size();

    std::vector<Eigen::Index> order(static_cast<std::size_t>(p));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index a, Eigen::Index b) { return raw_values[a] > raw_values[b]; });

    Vector values(p);
    Matrix rotation(p, p);
    for (Eigen::Index j = 0; j < p; ++j) {
        values[j] = raw_values[order[static_cast<std::size_t>(j)]];
        rotation.col(j) = raw_vectors.col(order[static_cast<std::size_t>(j)]);
    }

    const double top = std::max(values[0], 0.0);
    for (Eigen::Index j = 0; j < p; ++j) {
        if (values[j] < 0.0) {
            if (values[j] < -kPsdTolerance * top) {
                throw ValidationError("second moment has a negative eigenvalue beyond tolerance");
            }
            values[j] = 0.0;
        }
    }

    for (Eigen::Index j = 0; j < p; ++j) {
        Eigen::Index pivot = 0;
        rotation.col(j).cwiseAbs().maxCoeff(&pivot);
        if (rotation(pivot, j) < 0.0) {
            rotation.col(j) = -rotation.col(j);
        }
    }
    return Spectrum(std::move(values), std::move(rotation));
}

inline RotatedProblem rotate_problem(const ProblemInstance& instance, const Spectrum& spectrum) {
    if (spectrum.p() != instance.p()) {
        throw ValidationError("spectrum dimension does not match the instance");
    }
    return RotatedProblem(spectrum, spectrum.to_rotated(instance.beta()), instance.noise_variance(), instance.n());
}

/// Convenience: Sigma, its spectrum and the rotated problem in one go.
inline RotatedProblem rotate_problem(const ProblemInstance& instance) {
    return rotate_problem(instance, eigendecompose(second_moment(instance)));
}

inline double sigma_norm_sq(const Vector& v, const SecondMoment& sigma) {
    if (static_cast<std::size_t>(v.size()) != sigma.p()) {
        throw ValidationError("vector length " + std::to_string(v.size()) + " does not match p = " +
                              std::to_string(sigma.p()));
    }
    const double value = v.dot(sigma.matrix() * v);
    if (value >= 0.0) {
        return value;
    }
    if (value >= -kPsdTolerance * v.squaredNorm() * sigma.largest_eigenvalue()) {
        return 0.0;
    }
    throw ConsistencyError("negative quadratic form on a validated PSD matrix");
}

/// L(w) = (1/n) E ||Y - Xw||^2 = sigma^2 + ||w - beta||^2_Sigma, evaluated in
/// closed form.
inline double expected_loss(const Vector& w, const ProblemInstance& instance, const SecondMoment& sigma) {
    if (static_cast<std::size_t>(w.size()) != instance.p()) {
        throw ValidationError("w has length " + std::to_string(w.size()) + ", expected p = " +
                              std::to_string(instance.p()));
    }
    return instance.noise_variance() + sigma_norm_sq(w - instance.beta(), sigma);
}

inline double expected_loss(const Vector& w, const ProblemInstance& instance) {
    return expected_loss(w, instance, second_moment(instance));
}

} // namespace shrinkrisk
