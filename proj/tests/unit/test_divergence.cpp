#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "cecluster/divergence.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace cecluster;

namespace {

MvnParams normal_1d(double mean, double var) {
    return {Eigen::VectorXd::Constant(1, mean), Eigen::MatrixXd::Constant(1, 1, var)};
}

}  // namespace

TEST(KlMvn, KnownValues) {
    EXPECT_EQ(kl_mvn(normal_1d(0.3, 2.0), normal_1d(0.3, 2.0)), 0.0);
    EXPECT_NEAR(kl_mvn(normal_1d(0, 1), normal_1d(1, 1)), 0.5, 1e-15);
    EXPECT_NEAR(kl_mvn(normal_1d(0, 1), normal_1d(0, 4)), 0.5 * (0.25 - 1.0 + std::log(4.0)), 1e-15);
    EXPECT_NEAR(kl_mvn(normal_1d(0, 1), normal_1d(0, 4)), 0.318147, 1e-6);
}

TEST(KlMvn, MatchesScalarFormula) {
    Rng rng(1);
    for (int k = 0; k < 20; ++k) {
        const auto h = fixture::random_mvn(1, rng);
        const auto g = fixture::random_mvn(1, rng);
        const double expected = oracle::kl_1d(h.mean[0], h.cov(0, 0), g.mean[0], g.cov(0, 0));
        EXPECT_NEAR(kl_mvn(h, g), expected, 1e-10);
    }
}

TEST(KlMvn, RejectsAsymmetricAndIndefinite) {
    MvnParams h{Eigen::Vector2d::Zero(), Eigen::Matrix2d::Identity()};
    MvnParams bad = h;
    bad.cov(0, 1) = 0.5;
    EXPECT_THROW(kl_mvn(h, bad), ContractError);
    bad.cov << 1, 2, 2, 1;
    EXPECT_THROW(kl_mvn(h, bad), NumericalError);
    MvnParams other{Eigen::Vector3d::Zero(), Eigen::Matrix3d::Identity()};
    EXPECT_THROW(kl_mvn(h, other), ContractError);
}

TEST(GeometricMean, Endpoints) {
    Rng rng(2);
    const auto h = fixture::random_mvn(3, rng);
    const auto g = fixture::random_mvn(3, rng);
    const auto at0 = geometric_mean_mvn(h, g, 0.0);
    const auto at1 = geometric_mean_mvn(h, g, 1.0);
    EXPECT_TRUE(at0.mean == h.mean && at0.cov == h.cov);
    EXPECT_TRUE(at1.mean == g.mean && at1.cov == g.cov);
    const auto same = geometric_mean_mvn(h, h, 0.3);
    EXPECT_TRUE(same.mean.isApprox(h.mean, 1e-12));
    EXPECT_TRUE(same.cov.isApprox(h.cov, 1e-12));
}

TEST(GeometricMean, ScalarPrecisionWeighting) {
    const auto g = geometric_mean_mvn(normal_1d(0.0, 1.0), normal_1d(2.0, 4.0), 0.5);
    // precision 0.5 * 1 + 0.5 * 0.25 = 0.625
    EXPECT_NEAR(g.cov(0, 0), 1.6, 1e-14);
    EXPECT_NEAR(g.mean[0], 1.6 * 0.5 * 2.0 / 4.0, 1e-14);
}

TEST(Jsg, ZeroForIdenticalArguments) {
    Rng rng(3);
    const auto h = fixture::random_mvn(4, rng);
    EXPECT_EQ(jsg_mvn(h, h, 0.5), 0.0);
    EXPECT_NEAR(jsg_mvn(h, h, 0.2), 0.0, 1e-14);
}

TEST(Jsg, SymmetricAtHalf) {
    Rng rng(4);
    for (int k = 0; k < 20; ++k) {
        const auto h = fixture::random_mvn(1 + k % 4, rng);
        const auto g = fixture::random_mvn(1 + k % 4, rng);
        EXPECT_NEAR(jsg_mvn(h, g, 0.5), jsg_mvn(g, h, 0.5), 1e-12);
    }
}

TEST(Jsg, MatchesQuadratureOfDefinition1D) {
    Rng rng(5);
    for (int k = 0; k < 20; ++k) {
        const auto h = fixture::random_mvn(1, rng);
        const auto g = fixture::random_mvn(1, rng);
        const double lambda = k % 2 == 0 ? 0.5 : 0.1 + 0.04 * k;
        const double expected = oracle::jsg_quadrature_1d(h.mean[0], h.cov(0, 0), g.mean[0], g.cov(0, 0), lambda);
        EXPECT_NEAR(jsg_mvn(h, g, lambda), expected, 1e-6);
    }
}

TEST(Jsg, MatchesQuadratureOfDefinition2D) {
    Rng rng(6);
    for (int k = 0; k < 4; ++k) {
        const auto h = fixture::random_mvn(2, rng);
        const auto g = fixture::random_mvn(2, rng);
        const double expected = oracle::jsg_quadrature_2d(h.mean, h.cov, g.mean, g.cov, 0.5);
        EXPECT_NEAR(jsg_mvn(h, g, 0.5), expected, 1e-6);
    }
}

TEST(Jsg, ClosedFormMatchesKlRoute) {
    Rng rng(7);
    for (int k = 0; k < 20; ++k) {
        const auto h = fixture::random_mvn(1 + k % 5, rng);
        const auto g = fixture::random_mvn(1 + k % 5, rng);
        const double lambda = 0.05 * (k % 19 + 1);
        const double a = jsg_mvn(h, g, lambda);
        EXPECT_NEAR(a, jsg_mvn_via_kl(h, g, lambda), 1e-10 * std::max(1.0, a));
    }
}

TEST(Jsg, JeffreysBound) {
    Rng rng(8);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int k = 0; k < 200; ++k) {
        const auto h = fixture::random_mvn(1 + k % 3, rng);
        const auto g = fixture::random_mvn(1 + k % 3, rng);
        const double lambda = unif(rng);
        const double bound = 0.5 * std::max(lambda, 1.0 - lambda) * (kl_mvn(h, g) + kl_mvn(g, h));
        EXPECT_LE(jsg_mvn(h, g, lambda), bound + 1e-10);
    }
}

TEST(ConditionalMvn, ClosedFormCases) {
    auto fit = fixture::make_fit("a", 0.3, 0.0, 0.0, 1.0, 2);
    fit.sigma << 1.0, 0.4, 0.4, 2.0;
    EXPECT_TRUE(conditional_mvn(fit, 3.0).cov == fit.sigma);

    auto zero = fixture::make_fit("b", 0.0, 0.4, 0.0, 1.0, 2);
    EXPECT_TRUE(conditional_mvn(zero, 5.0).mean.isZero(0.0));

    auto half = fixture::make_fit("c", 0.5, 0.5, 0.0, 1.0, 2);
    const auto h = conditional_mvn(half, 4.0);
    EXPECT_NEAR(h.mean[0], 2.0, 1e-15);
    EXPECT_NEAR(h.mean[1], 2.0, 1e-15);
    EXPECT_TRUE(h.cov.isApprox(4.0 * Eigen::Matrix2d::Identity(), 1e-15));
}

TEST(ConditionalMvn, BelowThresholdIsContractError) {
    const auto fit = fixture::make_fit("a", 0.3, 0.2, 0.0, 1.0);
    EXPECT_THROW(conditional_mvn(fit, fit.threshold_u), ContractError);
    EXPECT_THROW(conditional_mvn(fit, fit.threshold_u - 1.0), ContractError);
}

TEST(ExpectedJsg, IdenticalFitsGiveExactZero) {
    auto a = fixture::make_fit("a", 0.4, 0.3, 0.1, 0.8, 3);
    auto b = a;
    b.site = "b";
    DivergenceConfig cfg;
    cfg.n_mc = 2000;
    EXPECT_EQ(expected_jsg(a, b, cfg, laplace_quantile(0.99)), 0.0);
}

TEST(ExpectedJsg, BitExactSymmetry) {
    Rng rng(9);
    std::uniform_real_distribution<double> unif(-0.9, 0.9);
    DivergenceConfig cfg;
    cfg.n_mc = 3000;
    cfg.seed = 17;
    for (int k = 0; k < 10; ++k) {
        const auto s = fixture::make_fit("s" + std::to_string(k), unif(rng), std::abs(unif(rng)), unif(rng), 1.0 + unif(rng), 2);
        const auto t = fixture::make_fit("t" + std::to_string(k), unif(rng), std::abs(unif(rng)), unif(rng), 1.0 + unif(rng), 2);
        EXPECT_EQ(expected_jsg(s, t, cfg, 4.0), expected_jsg(t, s, cfg, 4.0));
    }
}

TEST(ExpectedJsg, MatchesTruncatedQuadrature) {
    const auto s = fixture::make_fit("s", 0.2, 0.0, 0.0, 1.0);
    const auto t = fixture::make_fit("t", 0.8, 0.0, 0.0, 1.0);
    const double u = laplace_quantile(0.9);
    const double cap = laplace_quantile(0.99);
    DivergenceConfig cfg;
    cfg.n_mc = 10000;
    cfg.seed = 3;
    const auto est = expected_jsg_estimate(s, t, cfg, cap);
    const double expected = oracle::truncated_exceedance_mean(
        [](double y) { return oracle::ce_jsg_1d(y, 0.2, 0.0, 0.0, 1.0, 0.8, 0.0, 0.0, 1.0, 0.5); }, u, cap);
    EXPECT_GT(est.std_error, 0.0);
    EXPECT_NEAR(est.value, expected, 3.0 * est.std_error);
}

TEST(ExpectedJsg, DoublingDrawsIsConsistent) {
    const auto s = fixture::make_fit("s", 0.2, 0.1, 0.0, 1.0);
    const auto t = fixture::make_fit("t", 0.8, 0.4, 0.2, 0.7);
    int within = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        DivergenceConfig cfg;
        cfg.seed = seed;
        cfg.n_mc = 10000;
        const auto a = expected_jsg_estimate(s, t, cfg, 4.0);
        cfg.n_mc = 20000;
        const auto b = expected_jsg_estimate(s, t, cfg, 4.0);
        within += std::abs(a.value - b.value) < 4.0 * a.std_error ? 1 : 0;
    }
    EXPECT_GE(within, 99);
}

TEST(ExpectedJsg, DrawsStayInsideTruncation) {
    Rng rng(10);
    for (int k = 0; k < 10000; ++k) {
        const double y = sample_truncated_exceedance(1.5, 3.9, rng);
        ASSERT_GT(y, 1.5);
        ASSERT_LE(y, 3.9);
    }
}

TEST(ExpectedJsg, ContractErrors) {
    const auto s = fixture::make_fit("s", 0.2, 0.0, 0.0, 1.0, 1, 0.9);
    const auto other_q = fixture::make_fit("t", 0.8, 0.0, 0.0, 1.0, 1, 0.95);
    const auto other_var = fixture::make_fit("t", 0.8, 0.0, 0.0, 1.0, 1, 0.9, 1);
    const auto other_dim = fixture::make_fit("t", 0.8, 0.0, 0.0, 1.0, 2, 0.9);
    DivergenceConfig cfg;
    cfg.n_mc = 10;
    EXPECT_THROW(expected_jsg(s, other_q, cfg, 5.0), ContractError);
    EXPECT_THROW(expected_jsg(s, other_var, cfg, 5.0), ContractError);
    EXPECT_THROW(expected_jsg(s, other_dim, cfg, 5.0), ContractError);
    EXPECT_THROW(expected_jsg(s, s, cfg, s.threshold_u), ContractError);
    cfg.lambda = 1.5;
    EXPECT_THROW(expected_jsg(s, s, cfg, 5.0), ContractError);
}

TEST(ExpectedJsg, KernelMatchesGenericRoute) {
    Rng rng(11);
    std::uniform_real_distribution<double> unif(-0.9, 0.9);
    for (Eigen::Index m : {1, 3, 9}) {
        auto s = fixture::make_fit("s", 0.0, 0.0, 0.0, 1.0, m);
        auto t = s;
        t.site = "t";
        for (Eigen::Index j = 0; j < m; ++j) {
            s.alpha[j] = unif(rng);
            t.alpha[j] = unif(rng);
            s.beta[j] = std::abs(unif(rng));
            t.beta[j] = std::abs(unif(rng));
            s.mu[j] = unif(rng);
            t.mu[j] = unif(rng);
        }
        s.sigma = fixture::random_mvn(m, rng).cov;
        t.sigma = fixture::random_mvn(m, rng).cov;
        const detail::ConditionalJsgKernel kernel(s, t, 0.3);
        for (const double y : {2.0, 3.1, 6.5}) {
            const double direct = jsg_mvn(conditional_mvn(s, y), conditional_mvn(t, y), 0.3);
            EXPECT_NEAR(kernel(y), direct, 1e-9 * std::max(1.0, direct));
        }
    }
}
