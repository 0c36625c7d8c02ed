#include "shrinkrisk/risk_analysis.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "support/bridge.hpp"
#include "support/oracles.hpp"

using namespace shrinkrisk;

namespace {

Vector vec(std::initializer_list<double> values) {
    Vector v(static_cast<Eigen::Index>(values.size()));
    std::copy(values.begin(), values.end(), v.begin());
    return v;
}

// Spectrum (2, 0.5), beta = (1, 1), sigma^2 = 1, n = 4.
RotatedProblem two_coordinate_fixture() {
    return RotatedProblem::from_diagonal(vec({2.0, 0.5}), vec({1.0, 1.0}), 1.0, 4);
}

void expect_rel(double got, double want, double tol) {
    EXPECT_LE(oracle::rel_err(got, want), tol) << "got " << got << " want " << want;
}

struct RandomCase {
    RotatedProblem problem;
    double lambda;
};

RandomCase random_case(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> normal;
    const std::size_t p = 1 + rng() % 50;
    Vector ev(static_cast<Eigen::Index>(p));
    for (auto& x : ev) {
        x = 10.0 * (1.0 - unit(rng)); // (0, 10]
    }
    std::sort(ev.begin(), ev.end(), std::greater<>());
    Vector beta(static_cast<Eigen::Index>(p));
    for (auto& x : beta) {
        x = normal(rng);
    }
    const double sigma2 = 10.0 * unit(rng);
    const std::size_t n = 1 + rng() % 10000;
    double lambda = 0.0;
    switch (rng() % 4) {
    case 0: lambda = 0.0; break;
    case 1: lambda = ev[static_cast<Eigen::Index>(rng() % p)]; break;
    case 2: lambda = std::pow(10.0, -4.0 + 8.0 * unit(rng)); break;
    default: lambda = 12.0 * unit(rng); break;
    }
    return {RotatedProblem::from_diagonal(ev, beta, sigma2, n), lambda};
}

} // namespace

TEST(RidgeRisk, LambdaZeroIsPureVariance) {
    const RotatedProblem r = RotatedProblem::from_diagonal(vec({3.0, 1.0, 0.2}), vec({1.0, -2.0, 0.5}), 2.0, 8);
    const RiskReport rep = ridge_risk(r, 0.0);
    EXPECT_EQ(rep.total_bias, 0.0);
    EXPECT_EQ(rep.total_risk, (2.0 / 8.0) * 3.0);
}

TEST(RidgeRisk, TwoCoordinateFixture) {
    const RiskReport rep = ridge_risk(two_coordinate_fixture(), 1.0);
    expect_rel(rep.total_variance, 5.0 / 36.0, 1e-14);
    expect_rel(rep.total_bias, 4.0 / 9.0, 1e-14);
    expect_rel(rep.total_risk, 7.0 / 12.0, 1e-14);
    expect_rel(rep.variance_terms[0], 0.25 * 4.0 / 9.0, 1e-14);
    expect_rel(rep.bias_terms[1], 2.0 / 9.0, 1e-14);
}

TEST(RidgeRisk, LargeLambdaApproachesSignalNorm) {
    const RotatedProblem r = two_coordinate_fixture();
    const double signal = r.sigma_norm_sq_rotated(r.beta_rotated());
    expect_rel(ridge_risk(r, 1e9).total_risk, signal, 1e-8);
}

TEST(RidgeRisk, MatchesLemmaForm) {
    std::mt19937_64 rng(101);
    for (int k = 0; k < 500; ++k) {
        const RandomCase c = random_case(rng);
        if (c.lambda == 0.0) {
            continue;
        }
        const oracle::Vec ev = bridge::to_oracle(c.problem.spectrum().eigenvalues());
        const oracle::Vec beta = bridge::to_oracle(c.problem.beta_rotated());
        const oracle::RiskParts ref = oracle::lemma_ridge_risk(ev, beta, c.problem.noise_variance(),
                                                               static_cast<double>(c.problem.n()), c.lambda);
        const RiskReport rep = ridge_risk(c.problem, c.lambda);
        expect_rel(rep.total_variance, ref.variance, 1e-12);
        expect_rel(rep.total_bias, ref.bias, 1e-12);
        // Stabilized bias form, term by term.
        for (std::size_t j = 0; j < ev.size(); ++j) {
            const double d = 1.0 + ev[j] / c.lambda;
            expect_rel(rep.bias_terms[static_cast<Eigen::Index>(j)], beta[j] * beta[j] * ev[j] / (d * d), 1e-12);
        }
    }
}

TEST(RidgeRisk, NullDirectionAtLambdaZeroContributesNothing) {
    const RotatedProblem r = RotatedProblem::from_diagonal(vec({1.0, 0.0}), vec({1.0, 5.0}), 1.0, 2);
    const RiskReport rep = ridge_risk(r, 0.0);
    EXPECT_EQ(rep.variance_terms[1], 0.0);
    EXPECT_EQ(rep.bias_terms[1], 0.0);
    EXPECT_DOUBLE_EQ(rep.total_risk, 0.5);
}

TEST(PcaRisk, Examples) {
    const RotatedProblem r = two_coordinate_fixture();
    EXPECT_EQ(pca_risk(r, 0.0).total_risk, 0.25 * 2.0);
    EXPECT_EQ(pca_risk(r, 0.0).total_bias, 0.0);
    EXPECT_EQ(pca_risk(r, 2.5).total_risk, r.sigma_norm_sq_rotated(r.beta_rotated()));
    EXPECT_EQ(pca_risk(r, 2.5).total_variance, 0.0);
    EXPECT_DOUBLE_EQ(pca_risk(r, 1.0).total_risk, 0.75);
    // Tie lambda = lambda_2 keeps the coordinate.
    EXPECT_EQ(pca_risk(r, 0.5).total_risk, 0.5);
}

TEST(PcaRisk, MatchesLiteralExpression) {
    std::mt19937_64 rng(202);
    for (int k = 0; k < 500; ++k) {
        const RandomCase c = random_case(rng);
        const oracle::RiskParts ref = oracle::literal_pca_risk(
            bridge::to_oracle(c.problem.spectrum().eigenvalues()), bridge::to_oracle(c.problem.beta_rotated()),
            c.problem.noise_variance(), static_cast<double>(c.problem.n()), c.lambda);
        const RiskReport rep = pca_risk(c.problem, c.lambda);
        expect_rel(rep.total_variance, ref.variance, 1e-12);
        expect_rel(rep.total_bias, ref.bias, 1e-12);
    }
}

TEST(PcaRisk, ZeroEigenvalueCarriesNoVariance) {
    const RotatedProblem r = RotatedProblem::from_diagonal(vec({1.0, 0.0}), vec({1.0, 5.0}), 1.0, 2);
    EXPECT_EQ(pca_risk(r, 0.0).variance_terms[1], 0.0);
    EXPECT_DOUBLE_EQ(pca_risk(r, 0.0).total_risk, 0.5);
}

TEST(RiskReport, TotalsAreSumsOfTerms) {
    std::mt19937_64 rng(303);
    for (int k = 0; k < 200; ++k) {
        const RandomCase c = random_case(rng);
        for (const RiskReport& rep : {ridge_risk(c.problem, c.lambda), pca_risk(c.problem, c.lambda)}) {
            expect_rel(rep.total_variance, rep.variance_terms.sum(), 1e-12);
            expect_rel(rep.total_bias, rep.bias_terms.sum(), 1e-12);
            EXPECT_EQ(rep.total_risk, rep.total_variance + rep.total_bias);
            EXPECT_GE(rep.variance_terms.minCoeff(), 0.0);
            EXPECT_GE(rep.bias_terms.minCoeff(), 0.0);
        }
    }
}

TEST(DecomposeRisk, AgreesWithClosedForms) {
    std::mt19937_64 rng(404);
    for (int k = 0; k < 300; ++k) {
        const RandomCase c = random_case(rng);
        for (Method m : {Method::Ridge, Method::PcaOls}) {
            RiskReport rep;
            ASSERT_NO_THROW(rep = decompose_risk(m, c.problem, c.lambda));
            const RiskReport direct = analytic_risk(m, c.problem, c.lambda);
            EXPECT_EQ(rep.total_risk, direct.total_risk);
            EXPECT_EQ(rep.variance_terms, direct.variance_terms);
        }
    }
}

TEST(DecomposeRisk, DegenerateSignalAndNoise) {
    const RotatedProblem no_signal = RotatedProblem::from_diagonal(vec({2.0, 0.5}), vec({0.0, 0.0}), 1.0, 4);
    const RotatedProblem no_noise = RotatedProblem::from_diagonal(vec({2.0, 0.5}), vec({1.0, 1.0}), 0.0, 4);
    for (double lambda : {0.0, 0.3, 1.0, 5.0}) {
        for (Method m : {Method::Ridge, Method::PcaOls}) {
            EXPECT_EQ(decompose_risk(m, no_signal, lambda).total_bias, 0.0);
            EXPECT_EQ(decompose_risk(m, no_noise, lambda).total_variance, 0.0);
        }
    }
    EXPECT_THROW(decompose_risk(Method::OLS, no_noise, 0.0), ValidationError);
}

TEST(DecomposeRisk, RankDeficientSpectrum) {
    const RotatedProblem r = RotatedProblem::from_diagonal(vec({3.0, 1e-14, 0.0}), vec({1.0, 2.0, 3.0}), 1.0, 5);
    for (double lambda : {0.0, 1e-15, 1e-3, 2.0, 4.0}) {
        EXPECT_NO_THROW(decompose_risk(Method::Ridge, r, lambda)) << lambda;
        EXPECT_NO_THROW(decompose_risk(Method::PcaOls, r, lambda)) << lambda;
    }
}

TEST(InflationCertificate, LambdaZeroIsOne) {
    const InflationCertificate cert = inflation_certificate(two_coordinate_fixture(), 0.0);
    EXPECT_EQ(cert.overall_ratio, 1.0);
    EXPECT_EQ(cert.per_term_ratios, Vector::Ones(2));
    EXPECT_TRUE(cert.bound_holds);
}

TEST(InflationCertificate, TightCase) {
    const RotatedProblem r = RotatedProblem::from_diagonal(vec({1.0}), vec({0.0}), 1.0, 1);
    const RiskReport ridge = ridge_risk(r, 1.0);
    EXPECT_EQ(ridge.total_risk, 0.25);
    EXPECT_EQ(pca_risk(r, 1.0).total_risk, 1.0);
    const InflationCertificate cert = inflation_certificate(r, 1.0);
    EXPECT_NEAR(cert.overall_ratio, 4.0, 1e-9);
    EXPECT_NEAR(cert.max_term_ratio, 4.0, 1e-9);
    EXPECT_TRUE(cert.bound_holds);
    EXPECT_TRUE(cert.terms_hold());
}

TEST(InflationCertificate, TwoCoordinateFixture) {
    const InflationCertificate cert = inflation_certificate(two_coordinate_fixture(), 1.0);
    expect_rel(cert.overall_ratio, 9.0 / 7.0, 1e-14);
    EXPECT_TRUE(cert.bound_holds);
}

TEST(InflationCertificate, ZeroOverZeroIsOne) {
    // sigma^2 = 0 and beta_2 = 0: coordinate 2 contributes nothing to either risk.
    const RotatedProblem r = RotatedProblem::from_diagonal(vec({2.0, 0.5}), vec({1.0, 0.0}), 0.0, 4);
    const InflationCertificate cert = inflation_certificate(r, 1.0);
    EXPECT_EQ(cert.per_term_ratios[1], 1.0);
    const RotatedProblem nothing = RotatedProblem::from_diagonal(vec({2.0}), vec({0.0}), 0.0, 4);
    EXPECT_EQ(inflation_certificate(nothing, 1.0).overall_ratio, 1.0);
}

TEST(InflationCertificate, FactorFourProperty) {
    std::mt19937_64 rng(505);
    for (int k = 0; k < 2000; ++k) {
        const RandomCase c = random_case(rng);
        const InflationCertificate cert = inflation_certificate(c.problem, c.lambda);
        ASSERT_LE(cert.overall_ratio, 4.0 + 1e-9) << "case " << k;
        ASSERT_LE(cert.max_term_ratio, 4.0 + 1e-9) << "case " << k;
        ASSERT_TRUE(cert.bound_holds);
        if (c.lambda == 0.0) {
            EXPECT_EQ(cert.overall_ratio, 1.0);
        }
    }
}

TEST(RiskProperties, PermutationInvariance) {
    // A diagonal design in shuffled column order sees the same sorted spectrum.
    std::mt19937_64 rng(606);
    for (int k = 0; k < 30; ++k) {
        const std::size_t p = 2 + rng() % 8;
        const auto pp = static_cast<Eigen::Index>(p);
        Vector ev(pp), beta(pp);
        for (Eigen::Index j = 0; j < pp; ++j) {
            ev[j] = 0.1 + static_cast<double>(rng() % 1000) / 100.0;
            beta[j] = static_cast<double>(static_cast<int>(rng() % 200) - 100) / 50.0;
        }
        std::vector<Eigen::Index> perm(p);
        std::iota(perm.begin(), perm.end(), Eigen::Index{0});
        std::shuffle(perm.begin(), perm.end(), rng);
        const std::size_t n = p;
        Matrix x = Matrix::Zero(pp, pp);
        Vector beta_perm(pp);
        for (Eigen::Index j = 0; j < pp; ++j) {
            x(j, j) = std::sqrt(static_cast<double>(n) * ev[perm[static_cast<std::size_t>(j)]]);
            beta_perm[j] = beta[perm[static_cast<std::size_t>(j)]];
        }
        const RotatedProblem shuffled = rotate_problem(ProblemInstance(x, beta_perm, 0.7));

        std::vector<Eigen::Index> order(p);
        std::iota(order.begin(), order.end(), Eigen::Index{0});
        std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return ev[a] > ev[b]; });
        Vector ev_sorted(pp), beta_sorted(pp);
        for (Eigen::Index j = 0; j < pp; ++j) {
            ev_sorted[j] = ev[order[static_cast<std::size_t>(j)]];
            beta_sorted[j] = beta[order[static_cast<std::size_t>(j)]];
        }
        const RotatedProblem sorted = RotatedProblem::from_diagonal(ev_sorted, beta_sorted, 0.7, n);
        for (double lambda : {0.0, 0.5, 2.0, 7.5}) {
            expect_rel(ridge_risk(shuffled, lambda).total_risk, ridge_risk(sorted, lambda).total_risk, 1e-12);
            expect_rel(pca_risk(shuffled, lambda).total_risk, pca_risk(sorted, lambda).total_risk, 1e-12);
        }
    }
}

TEST(RiskProperties, NoiseScaling) {
    std::mt19937_64 rng(707);
    for (int k = 0; k < 100; ++k) {
        const RandomCase c = random_case(rng);
        const double factor = 0.1 + static_cast<double>(rng() % 100);
        const RotatedProblem& a = c.problem;
        const RotatedProblem b(a.spectrum(), a.beta_rotated(), a.noise_variance() * factor, a.n());
        for (Method m : {Method::Ridge, Method::PcaOls}) {
            const RiskReport ra = analytic_risk(m, a, c.lambda);
            const RiskReport rb = analytic_risk(m, b, c.lambda);
            expect_rel(rb.total_variance, factor * ra.total_variance, 1e-12);
            EXPECT_EQ(rb.total_bias, ra.total_bias);
        }
    }
}

TEST(RiskProperties, StrictlyPositiveRidgeTerms) {
    std::mt19937_64 rng(808);
    for (int k = 0; k < 200; ++k) {
        const RandomCase c = random_case(rng);
        const RiskReport ridge = ridge_risk(c.problem, c.lambda);
        const Vector terms = ridge.terms();
        for (Eigen::Index j = 0; j < terms.size(); ++j) {
            const bool signal = c.problem.beta_rotated()[j] != 0.0 && c.lambda > 0.0;
            if (c.problem.noise_variance() > 0.0 || signal) {
                EXPECT_GT(terms[j], 0.0);
            }
        }
    }
}

TEST(LambdaSweep, SingleZero) {
    const SweepResult res = lambda_sweep(two_coordinate_fixture(), {0.0});
    ASSERT_EQ(res.rows.size(), 1U);
    EXPECT_EQ(res.rows[0].ratio, 1.0);
    EXPECT_TRUE(res.all_bounds_hold());
}

TEST(LambdaSweep, PcaRiskPiecewiseConstant) {
    const RotatedProblem r = RotatedProblem::from_diagonal(vec({4.0, 2.0, 1.0}), vec({1.0, -1.0, 2.0}), 1.0, 10);
    const std::vector<double> grid{0.5, 0.9, 1.0, 1.5, 1.9, 2.0, 3.0, 3.9, 4.0, 4.5, 9.0};
    const SweepResult res = lambda_sweep(r, grid);
    ASSERT_EQ(res.rows.size(), grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        EXPECT_EQ(res.rows[i].lambda, grid[i]);
    }
    EXPECT_EQ(res.rows[0].pca_risk, res.rows[1].pca_risk);   // (0, 1)
    EXPECT_NE(res.rows[1].pca_risk, res.rows[3].pca_risk);   // crosses lambda_3 = 1 only after the tie
    EXPECT_EQ(res.rows[1].pca_risk, res.rows[2].pca_risk);   // tie keeps lambda_3
    EXPECT_EQ(res.rows[3].pca_risk, res.rows[4].pca_risk);   // (1, 2)
    EXPECT_EQ(res.rows[6].pca_risk, res.rows[7].pca_risk);   // (2, 4)
    EXPECT_EQ(res.rows[9].pca_risk, res.rows[10].pca_risk);  // above lambda_1
}

TEST(LambdaSweep, LogGridRowMatchesCertificate) {
    std::vector<double> grid;
    for (int i = 0; i < 100; ++i) {
        grid.push_back(std::pow(10.0, -3.0 + 6.6 * i / 99.0));
    }
    grid[45] = 1.0;
    const SweepResult res = lambda_sweep(two_coordinate_fixture(), grid);
    EXPECT_TRUE(res.all_bounds_hold());
    expect_rel(res.rows[45].ridge_risk, 7.0 / 12.0, 1e-12);
    expect_rel(res.rows[45].pca_risk, 0.75, 1e-12);
    expect_rel(res.rows[45].ratio, 9.0 / 7.0, 1e-12);
}

TEST(LambdaSweep, RejectsBadGrids) {
    const RotatedProblem r = two_coordinate_fixture();
    EXPECT_THROW(lambda_sweep(r, {}), ValidationError);
    EXPECT_THROW(lambda_sweep(r, {1.0, 0.5}), ValidationError);
    EXPECT_THROW(lambda_sweep(r, {1.0, 1.0}), ValidationError);
    EXPECT_THROW(lambda_sweep(r, {-1.0, 0.5}), ValidationError);
    EXPECT_THROW(lambda_sweep(r, {0.0, std::nan("")}), ValidationError);
}
