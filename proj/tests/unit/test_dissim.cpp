#include <vector>

#include <gtest/gtest.h>

#include "cecluster/dissim.hpp"
#include "support/fixtures.hpp"

using namespace cecluster;

namespace {

DivergenceConfig small_config(std::uint64_t seed = 1) {
    DivergenceConfig cfg;
    cfg.n_mc = 2000;
    cfg.seed = seed;
    return cfg;
}

DissimMatrix labelled(const Eigen::MatrixXd& values, std::size_t cond_var, const std::vector<std::string>& sites) {
    DissimMatrix m;
    m.values = values;
    m.cond_var = cond_var;
    m.site_ids = sites;
    m.fingerprint = "fp" + std::to_string(cond_var);
    return m;
}

}  // namespace

TEST(BuildMatrix, SingleSiteIsZero) {
    const std::vector<CeFit> fits{fixture::make_fit("only", 0.5, 0.2, 0.0, 1.0)};
    const auto m = build_matrix(fits, small_config(), 4.0);
    ASSERT_EQ(m.values.rows(), 1);
    EXPECT_EQ(m.values(0, 0), 0.0);
}

TEST(BuildMatrix, IdenticalFitsGiveZeros) {
    std::vector<CeFit> fits;
    for (int s = 0; s < 4; ++s) {
        fits.push_back(fixture::make_fit("S" + std::to_string(s), 0.5, 0.2, 0.1, 1.0, 2));
    }
    const auto m = build_matrix(fits, small_config(), 4.0);
    EXPECT_TRUE(m.values.isZero(0.0));
    EXPECT_NO_THROW(m.validate());
}

TEST(BuildMatrix, SeparationGrowsWithAlphaGap) {
    const std::vector<CeFit> fits{fixture::make_fit("a", 0.1, 0.0, 0.0, 1.0), fixture::make_fit("b", 0.5, 0.0, 0.0, 1.0),
                                  fixture::make_fit("c", 0.9, 0.0, 0.0, 1.0)};
    const auto m = build_matrix(fits, small_config(), 4.0);
    EXPECT_LT(m.values(0, 1), m.values(0, 2));
    EXPECT_LT(m.values(1, 2), m.values(0, 2));
    EXPECT_NO_THROW(m.validate());
}

TEST(BuildMatrix, SymmetricAndThreadIndependent) {
    std::vector<CeFit> fits;
    for (int s = 0; s < 6; ++s) {
        fits.push_back(fixture::make_fit("S" + std::to_string(s), 0.15 * s, 0.05 * s, 0.0, 1.0 + 0.1 * s, 2));
    }
    const auto a = build_matrix(fits, small_config(), 4.0, 1);
    const auto b = build_matrix(fits, small_config(), 4.0, 3);
    EXPECT_TRUE(a.values == b.values);
    EXPECT_TRUE(a.values == a.values.transpose());
    EXPECT_EQ(a.fingerprint, b.fingerprint);
}

TEST(BuildMatrix, SitePermutationConjugatesMatrix) {
    std::vector<CeFit> fits;
    for (int s = 0; s < 5; ++s) {
        fits.push_back(fixture::make_fit("S" + std::to_string(s), 0.2 * s - 0.3, 0.1 * s, 0.0, 1.0));
    }
    const std::vector<std::size_t> perm{3, 0, 4, 1, 2};
    std::vector<CeFit> permuted;
    for (const auto p : perm) {
        permuted.push_back(fits[p]);
    }
    const auto a = build_matrix(fits, small_config(), 4.0);
    const auto b = build_matrix(permuted, small_config(), 4.0);
    for (std::size_t r = 0; r < perm.size(); ++r) {
        for (std::size_t c = 0; c < perm.size(); ++c) {
            EXPECT_EQ(b.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)),
                      a.values(static_cast<Eigen::Index>(perm[r]), static_cast<Eigen::Index>(perm[c])));
        }
    }
}

TEST(BuildMatrix, MismatchedThresholdNamesSite) {
    const std::vector<CeFit> fits{fixture::make_fit("a", 0.1, 0.0, 0.0, 1.0, 1, 0.9),
                                  fixture::make_fit("odd", 0.1, 0.0, 0.0, 1.0, 1, 0.95)};
    try {
        build_matrix(fits, small_config(), 4.0);
        FAIL();
    } catch (const ContractError& e) {
        EXPECT_NE(std::string(e.what()).find("odd"), std::string::npos);
    }
}

TEST(BuildMatrix, FingerprintTracksConfiguration) {
    const std::vector<CeFit> fits{fixture::make_fit("a", 0.1, 0.0, 0.0, 1.0), fixture::make_fit("b", 0.6, 0.0, 0.0, 1.0)};
    const auto a = build_matrix(fits, small_config(1), 4.0);
    const auto b = build_matrix(fits, small_config(2), 4.0);
    const auto c = build_matrix(fits, small_config(1), 4.5);
    EXPECT_NE(a.fingerprint, b.fingerprint);
    EXPECT_NE(a.fingerprint, c.fingerprint);
    EXPECT_NE(a.values(0, 1), b.values(0, 1));
}

TEST(Aggregate, SingleMatrixIsUnchanged) {
    const Eigen::Matrix2d v{{0.0, 0.7}, {0.7, 0.0}};
    const std::vector<DissimMatrix> in{labelled(v, 0, {"a", "b"})};
    const auto out = aggregate(in);
    EXPECT_TRUE(out.values == v);
    EXPECT_TRUE(out.aggregated());
    EXPECT_EQ(out.source_label(), "aggregated");
}

TEST(Aggregate, IdenticalMatricesAndMean) {
    const Eigen::Matrix2d a{{0.0, 0.2}, {0.2, 0.0}};
    const Eigen::Matrix2d b{{0.0, 0.4}, {0.4, 0.0}};
    const std::vector<DissimMatrix> same{labelled(a, 0, {"x", "y"}), labelled(a, 1, {"x", "y"})};
    EXPECT_TRUE(aggregate(same).values == a);
    const std::vector<DissimMatrix> mixed{labelled(a, 0, {"x", "y"}), labelled(b, 1, {"x", "y"})};
    EXPECT_NEAR(aggregate(mixed).values(0, 1), 0.3, 1e-15);
}

TEST(Aggregate, MismatchedSitesAndRepeatedVariables) {
    const Eigen::Matrix2d a{{0.0, 0.2}, {0.2, 0.0}};
    const std::vector<DissimMatrix> sites{labelled(a, 0, {"x", "y"}), labelled(a, 1, {"x", "z"})};
    EXPECT_THROW(aggregate(sites), ContractError);
    const std::vector<DissimMatrix> repeated{labelled(a, 0, {"x", "y"}), labelled(a, 0, {"x", "y"})};
    EXPECT_THROW(aggregate(repeated), ContractError);
}

TEST(Aggregate, CommutesWithSitePermutation) {
    Eigen::Matrix3d a{{0, 1, 2}, {1, 0, 3}, {2, 3, 0}};
    Eigen::Matrix3d b{{0, 5, 4}, {5, 0, 6}, {4, 6, 0}};
    Eigen::PermutationMatrix<3> p;
    p.indices() << 2, 0, 1;
    const std::vector<DissimMatrix> in{labelled(a, 0, {"s", "t", "u"}), labelled(b, 1, {"s", "t", "u"})};
    const std::vector<DissimMatrix> permuted{labelled(p * a * p.transpose(), 0, {"s", "t", "u"}),
                                             labelled(p * b * p.transpose(), 1, {"s", "t", "u"})};
    const Eigen::Matrix3d expected = p * aggregate(in).values * p.transpose();
    EXPECT_TRUE(aggregate(permuted).values.isApprox(expected, 1e-15));
}

TEST(Aggregate, Deterministic) {
    const Eigen::Matrix2d a{{0.0, 0.2}, {0.2, 0.0}};
    const std::vector<DissimMatrix> in{labelled(a, 0, {"x", "y"}), labelled(2 * a, 1, {"x", "y"})};
    const auto first = aggregate(in);
    const auto second = aggregate(in);
    EXPECT_TRUE(first.values == second.values);
    EXPECT_EQ(first.fingerprint, second.fingerprint);
}
