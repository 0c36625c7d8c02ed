#pragma once

// Monte Carlo estimates of E||b(Y) - beta||^2_Sigma against the fixed design.
//
// Trial t draws its noise from a generator seeded by (seed, t) alone, so
// results do not depend on the number of threads or the order trials run in.
// Per-trial results are stored and reduced in trial order.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "shrinkrisk/core_model.hpp"
#include "shrinkrisk/errors.hpp"
#include "shrinkrisk/estimators.hpp"

namespace shrinkrisk {

enum class NoiseKind { Gaussian, Rademacher };

inline std::string_view to_string(NoiseKind k) {
    return k == NoiseKind::Gaussian ? "gaussian" : "rademacher";
}

struct NoiseModel {
    NoiseKind kind = NoiseKind::Gaussian;
    double variance = 0.0;
};

struct EmpiricalRisk {
    double mean = 0.0;
    double std_error = 0.0;
    std::size_t trials = 0;
    std::uint64_t seed = 0;
};

struct EmpiricalDecomposition {
    double variance = 0.0;
    double variance_std_error = 0.0;
    double bias = 0.0;
    double bias_std_error = 0.0;
    std::size_t trials = 0;
    std::uint64_t seed = 0;
};

/// SplitMix64: a 64-bit counter passed through a bijective finalizer.
class SplitMix64 {
public:
    using result_type = std::uint64_t;

    explicit SplitMix64(std::uint64_t state) noexcept : state_(state) {}

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    static constexpr std::uint64_t mix(std::uint64_t z) noexcept {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    result_type operator()() noexcept {
        state_ += 0x9E3779B97F4A7C15ULL;
        return mix(state_);
    }

    /// Independent stream for trial `index` of a run seeded with `seed`.
    static SplitMix64 substream(std::uint64_t seed, std::uint64_t index) noexcept {
        return SplitMix64(mix(seed ^ mix(index + 0x632BE59BD9B4E019ULL)));
    }

private:
    std::uint64_t state_;
};

namespace detail {

inline void check_noise(const ProblemInstance& instance, const NoiseModel& noise) {
    if (noise.variance != instance.noise_variance()) {
        throw ValidationError("noise model variance does not match the instance's noise variance");
    }
}

inline void check_trials(std::size_t trials) {
    if (trials < 2) {
        throw ValidationError("Monte Carlo needs at least 2 trials");
    }
}

template <class Rng>
void add_noise(Vector& y, const NoiseModel& noise, Rng& rng) {
    if (noise.variance == 0.0) {
        return;
    }
    const double sd = std::sqrt(noise.variance);
    if (noise.kind == NoiseKind::Gaussian) {
        std::normal_distribution<double> normal(0.0, sd);
        for (Eigen::Index i = 0; i < y.size(); ++i) {
            y[i] += normal(rng);
        }
    } else {
        for (Eigen::Index i = 0; i < y.size(); i += 64) {
            std::uint64_t bits = rng();
            const Eigen::Index end = std::min<Eigen::Index>(y.size(), i + 64);
            for (Eigen::Index k = i; k < end; ++k, bits >>= 1) {
                y[k] += (bits & 1U) ? sd : -sd;
            }
        }
    }
}

/// Runs body(t) for t in [0, trials) over `threads` workers in contiguous
/// blocks. body must only write slot t of its outputs.
template <class Body>
void for_each_trial(std::size_t trials, unsigned threads, Body&& body) {
    if (threads == 0) {
        threads = std::max(1U, std::thread::hardware_concurrency());
    }
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, trials));
    if (threads <= 1) {
        for (std::size_t t = 0; t < trials; ++t) {
            body(t);
        }
        return;
    }
    std::vector<std::exception_ptr> errors(threads);
    std::vector<std::thread> workers;
    workers.reserve(threads);
    const std::size_t block = (trials + threads - 1) / threads;
    for (unsigned w = 0; w < threads; ++w) {
        workers.emplace_back([&, w] {
            try {
                const std::size_t begin = w * block;
                const std::size_t end = std::min(trials, begin + block);
                for (std::size_t t = begin; t < end; ++t) {
                    body(t);
                }
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& worker : workers) {
        worker.join();
    }
    for (const auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
}

/// Mean and standard error (sample sd / sqrt(count)) accumulated in index
/// order around the first value; identical samples give their value and 0.
inline std::pair<double, double> mean_and_std_error(std::span<const double> values) {
    const double shift = values.front();
    double sum = 0.0;
    for (double v : values) {
        sum += v - shift;
    }
    const auto count = static_cast<double>(values.size());
    const double centered_mean = sum / count;
    double ss = 0.0;
    for (double v : values) {
        const double d = (v - shift) - centered_mean;
        ss += d * d;
    }
    const double sd = std::sqrt(ss / (count - 1.0));
    return {shift + centered_mean, sd / std::sqrt(count)};
}

} // namespace detail

/// One draw of y = X beta + eps with i.i.d. noise.
template <class Rng>
Observation sample_observation(const ProblemInstance& instance, const NoiseModel& noise, Rng& rng) {
    detail::check_noise(instance, noise);
    Vector y = instance.design() * instance.beta();
    detail::add_noise(y, noise, rng);
    return Observation{std::move(y)};
}

/// Average of ||b(y_t) - beta||^2_Sigma over independent draws.
inline EmpiricalRisk empirical_risk(const ProblemInstance& instance, Method method, double lambda,
                                    const NoiseModel& noise, std::size_t trials, std::uint64_t seed,
                                    unsigned threads = 0) {
    detail::check_noise(instance, noise);
    detail::check_trials(trials);
    const SecondMoment sigma = second_moment(instance);
    const LinearFit fit(instance, eigendecompose(sigma), method, lambda);
    const Vector signal = instance.design() * instance.beta();

    std::vector<double> losses(trials);
    detail::for_each_trial(trials, threads, [&](std::size_t t) {
        SplitMix64 rng = SplitMix64::substream(seed, t);
        Vector y = signal;
        detail::add_noise(y, noise, rng);
        losses[t] = sigma_norm_sq(fit.coefficients(y) - instance.beta(), sigma);
    });

    const auto [mean, se] = detail::mean_and_std_error(losses);
    return EmpiricalRisk{std::max(mean, 0.0), se, trials, seed};
}

/// Plug-in bias-variance split: the across-trial mean of b stands in for E b.
///
/// variance = mean_t ||b_t - mean_b||^2_Sigma, bias = ||mean_b - beta||^2_Sigma,
/// so variance + bias equals the empirical risk on the same draws. The bias
/// standard error treats mean_b as Gaussian with covariance V = C / trials:
/// Var(d^T S d) = 4 d^T S V S d + 2 tr((S V)^2).
inline EmpiricalDecomposition empirical_decomposition(const ProblemInstance& instance, Method method,
                                                      double lambda, const NoiseModel& noise, std::size_t trials,
                                                      std::uint64_t seed, unsigned threads = 0) {
    detail::check_noise(instance, noise);
    detail::check_trials(trials);
    const SecondMoment sigma = second_moment(instance);
    const LinearFit fit(instance, eigendecompose(sigma), method, lambda);
    const Vector signal = instance.design() * instance.beta();
    const auto p = static_cast<Eigen::Index>(instance.p());
    const auto count = static_cast<Eigen::Index>(trials);

    Matrix draws(p, count);
    detail::for_each_trial(trials, threads, [&](std::size_t t) {
        SplitMix64 rng = SplitMix64::substream(seed, t);
        Vector y = signal;
        detail::add_noise(y, noise, rng);
        draws.col(static_cast<Eigen::Index>(t)) = fit.coefficients(y);
    });

    const Vector shift = draws.col(0);
    Vector centered_sum = Vector::Zero(p);
    for (Eigen::Index t = 0; t < count; ++t) {
        centered_sum += draws.col(t) - shift;
    }
    const Vector mean_estimate = shift + centered_sum / static_cast<double>(count);

    std::vector<double> spreads(trials);
    Matrix covariance = Matrix::Zero(p, p);
    for (Eigen::Index t = 0; t < count; ++t) {
        const Vector dev = draws.col(t) - mean_estimate;
        spreads[static_cast<std::size_t>(t)] = sigma_norm_sq(dev, sigma);
        covariance.noalias() += dev * dev.transpose();
    }
    covariance /= static_cast<double>(count - 1);

    const auto [variance, variance_se] = detail::mean_and_std_error(spreads);
    const Vector gap = mean_estimate - instance.beta();
    const double bias = sigma_norm_sq(gap, sigma);

    const Matrix mean_cov = covariance / static_cast<double>(count);
    const Matrix s_v = sigma.matrix() * mean_cov;
    const Vector s_gap = sigma.matrix() * gap;
    const double bias_var = 4.0 * s_gap.dot(mean_cov * s_gap) + 2.0 * (s_v * s_v).trace();

    EmpiricalDecomposition out;
    out.variance = std::max(variance, 0.0);
    out.variance_std_error = variance_se;
    out.bias = bias;
    out.bias_std_error = std::sqrt(std::max(bias_var, 0.0));
    out.trials = trials;
    out.seed = seed;
    return out;
}

} // namespace shrinkrisk
