#pragma once

// Seeded problem instances with a prescribed spectrum.
//
// X = sqrt(n) * Q * diag(sqrt(lambda)) * V^T with Q (n x p) having orthonormal
// columns and V (p x p) orthogonal, so Sigma = V diag(lambda) V^T exactly up to
// rounding. The signal is laid out in the eigenbasis V.

#include <Eigen/Dense>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "shrinkrisk/core_model.hpp"
#include "shrinkrisk/errors.hpp"
#include "shrinkrisk/monte_carlo.hpp"

namespace shrinkrisk {

namespace spectrum_kind {
struct Flat {};
struct PolyDecay {
    double exponent = 1.0;
};
struct ExpDecay {
    double rate = 1.0;
};
struct Spiked {
    std::size_t spike_count = 1;
    double spike_value = 10.0;
    double bulk_value = 1.0;
};
} // namespace spectrum_kind

namespace signal_kind {
struct TopAligned {
    std::size_t k = 1;
};
struct BottomAligned {
    std::size_t k = 1;
};
struct Uniform {};
struct Random {
    std::uint64_t seed = 0;
};
} // namespace signal_kind

struct SpectrumSpec {
    std::variant<spectrum_kind::Flat, spectrum_kind::PolyDecay, spectrum_kind::ExpDecay, spectrum_kind::Spiked> kind;
    std::size_t p = 1;
    double scale = 1.0;
};

struct SignalSpec {
    std::variant<signal_kind::TopAligned, signal_kind::BottomAligned, signal_kind::Uniform, signal_kind::Random> kind;
    double norm = 1.0;
};

struct Scenario {
    std::string label;
    ProblemInstance instance;
    std::vector<double> lambdas;
};

/// Eigenvalues described by `spec`, descending and positive.
inline Vector spectrum_values(const SpectrumSpec& spec) {
    if (spec.p < 1) {
        throw ValidationError("spectrum spec needs p >= 1");
    }
    if (!(spec.scale > 0.0) || !std::isfinite(spec.scale)) {
        throw ValidationError("spectrum scale must be positive");
    }
    const auto p = static_cast<Eigen::Index>(spec.p);
    Vector values(p);
    std::visit(
        [&](const auto& kind) {
            using K = std::decay_t<decltype(kind)>;
            if constexpr (std::is_same_v<K, spectrum_kind::Flat>) {
                values.setConstant(1.0);
            } else if constexpr (std::is_same_v<K, spectrum_kind::PolyDecay>) {
                if (!(kind.exponent > 0.0)) {
                    throw ValidationError("poly decay exponent must be positive");
                }
                for (Eigen::Index j = 0; j < p; ++j) {
                    values[j] = std::pow(static_cast<double>(j + 1), -kind.exponent);
                }
            } else if constexpr (std::is_same_v<K, spectrum_kind::ExpDecay>) {
                if (!(kind.rate > 0.0)) {
                    throw ValidationError("exp decay rate must be positive");
                }
                for (Eigen::Index j = 0; j < p; ++j) {
                    values[j] = std::exp(-kind.rate * static_cast<double>(j));
                }
            } else {
                if (kind.spike_count < 1 || kind.spike_count > spec.p) {
                    throw ValidationError("spike count must be in [1, p]");
                }
                if (!(kind.bulk_value > 0.0) || !(kind.spike_value >= kind.bulk_value)) {
                    throw ValidationError("spiked spectrum needs spike_value >= bulk_value > 0");
                }
                for (Eigen::Index j = 0; j < p; ++j) {
                    values[j] = static_cast<std::size_t>(j) < kind.spike_count ? kind.spike_value : kind.bulk_value;
                }
            }
        },
        spec.kind);
    values *= spec.scale;
    if (!values.allFinite() || (values.array() <= 0.0).any()) {
        throw ValidationError("spectrum spec produced non-positive or non-finite eigenvalues");
    }
    return values;
}

namespace detail {

inline Matrix gaussian_matrix(Eigen::Index rows, Eigen::Index cols, SplitMix64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix m(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c) {
        for (Eigen::Index r = 0; r < rows; ++r) {
            m(r, c) = normal(rng);
        }
    }
    return m;
}

/// First `cols` columns of the Q factor of a seeded Gaussian matrix.
inline Matrix orthonormal_columns(Eigen::Index rows, Eigen::Index cols, SplitMix64& rng) {
    const Eigen::HouseholderQR<Matrix> qr(gaussian_matrix(rows, cols, rng));
    return qr.householderQ() * Matrix::Identity(rows, cols);
}

/// Signal coordinates in the eigenbasis (Random is handled by the caller).
inline Vector signal_in_eigenbasis(const SignalSpec& signal, std::size_t p) {
    const auto pp = static_cast<Eigen::Index>(p);
    Vector b = Vector::Zero(pp);
    std::visit(
        [&](const auto& kind) {
            using K = std::decay_t<decltype(kind)>;
            if constexpr (std::is_same_v<K, signal_kind::TopAligned> ||
                          std::is_same_v<K, signal_kind::BottomAligned>) {
                if (kind.k < 1 || kind.k > p) {
                    throw ValidationError("aligned signal needs 1 <= k <= p");
                }
                const auto k = static_cast<Eigen::Index>(kind.k);
                if constexpr (std::is_same_v<K, signal_kind::TopAligned>) {
                    b.head(k).setConstant(1.0);
                } else {
                    b.tail(k).setConstant(1.0);
                }
            } else if constexpr (std::is_same_v<K, signal_kind::Uniform>) {
                b.setConstant(1.0);
            }
        },
        signal.kind);
    return b;
}

} // namespace detail

inline ProblemInstance build_instance(const SpectrumSpec& spec, const SignalSpec& signal, std::size_t n,
                                      double noise_variance, std::uint64_t seed) {
    const Vector values = spectrum_values(spec);
    if (n < spec.p) {
        throw ValidationError("synthesis needs n >= p (got n = " + std::to_string(n) + ", p = " +
                              std::to_string(spec.p) + ")");
    }
    if (!(signal.norm > 0.0) || !std::isfinite(signal.norm)) {
        throw ValidationError("signal norm must be positive");
    }
    const auto rows = static_cast<Eigen::Index>(n);
    const auto p = static_cast<Eigen::Index>(spec.p);

    SplitMix64 rng(SplitMix64::mix(seed));
    const Matrix q = detail::orthonormal_columns(rows, p, rng);
    const Matrix v = detail::orthonormal_columns(p, p, rng);
    Matrix design = std::sqrt(static_cast<double>(n)) * q * values.cwiseSqrt().asDiagonal() * v.transpose();

    Vector beta;
    if (const auto* random = std::get_if<signal_kind::Random>(&signal.kind)) {
        SplitMix64 signal_rng(SplitMix64::mix(random->seed ^ 0xA5A5A5A5A5A5A5A5ULL));
        beta = detail::gaussian_matrix(p, 1, signal_rng).col(0);
        if (beta.norm() == 0.0) {
            beta.setConstant(1.0);
        }
    } else {
        beta = v * detail::signal_in_eigenbasis(signal, spec.p);
    }
    beta *= signal.norm / beta.norm();
    return ProblemInstance(std::move(design), std::move(beta), noise_variance);
}

/// 0, every eigenvalue (exact ties), midpoints between neighbours, and points
/// below lambda_p and above lambda_1. Strictly ascending.
inline std::vector<double> straddling_grid(const Vector& eigenvalues) {
    std::vector<double> grid{0.0};
    const Eigen::Index p = eigenvalues.size();
    for (Eigen::Index j = 0; j < p; ++j) {
        grid.push_back(eigenvalues[j]);
        if (j + 1 < p) {
            grid.push_back(0.5 * (eigenvalues[j] + eigenvalues[j + 1]));
        }
    }
    grid.push_back(0.5 * eigenvalues[p - 1]);
    grid.push_back(2.0 * eigenvalues[0]);
    grid.push_back(10.0 * eigenvalues[0]);
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    return grid;
}

/// Every spectrum kind x every signal kind x p in {1, 2, 5, 20}, each with a
/// grid built from the instance's recovered eigenvalues so lambda = lambda_j
/// ties are exact.
inline std::vector<Scenario> scenario_grid(std::uint64_t seed) {
    using namespace spectrum_kind;
    using namespace signal_kind;
    const std::size_t dims[] = {1, 2, 5, 20};
    const double noise_levels[] = {1.0, 0.25, 4.0, 0.0};
    const double norms[] = {1.0, 3.0};

    std::vector<Scenario> out;
    std::uint64_t index = 0;
    for (std::size_t p : dims) {
        const std::size_t k = std::max<std::size_t>(1, p / 2);
        const std::size_t spikes = std::max<std::size_t>(1, p / 4);
        const std::pair<const char*, SpectrumSpec> spectra[] = {
            {"flat", SpectrumSpec{Flat{}, p, 1.0}},
            {"poly", SpectrumSpec{PolyDecay{1.0}, p, 2.0}},
            {"exp", SpectrumSpec{ExpDecay{0.5}, p, 0.5}},
            {"spiked", SpectrumSpec{Spiked{spikes, 10.0, 1.0}, p, 1.0}},
        };
        for (const auto& [spectrum_name, spectrum] : spectra) {
            const std::pair<const char*, SignalSpec> signals[] = {
                {"top", SignalSpec{TopAligned{k}, norms[index % 2]}},
                {"bottom", SignalSpec{BottomAligned{k}, norms[(index + 1) % 2]}},
                {"uniform", SignalSpec{Uniform{}, 1.0}},
                {"random", SignalSpec{Random{SplitMix64::mix(seed + index)}, 2.0}},
            };
            for (const auto& [signal_name, signal] : signals) {
                const std::size_t n = 2 * p + 3;
                const double noise = noise_levels[index % 4];
                ProblemInstance instance =
                    build_instance(spectrum, signal, n, noise, SplitMix64::mix(seed ^ SplitMix64::mix(index)));
                const Spectrum recovered = eigendecompose(second_moment(instance));
                std::string label = std::string(spectrum_name) + "/" + signal_name + "/p" + std::to_string(p);
                out.push_back(Scenario{std::move(label), std::move(instance),
                                       straddling_grid(recovered.eigenvalues())});
                ++index;
            }
        }
    }
    return out;
}

} // namespace shrinkrisk
