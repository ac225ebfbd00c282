#include <set>

#include <gtest/gtest.h>

#include <gpnkit/prior.hpp>
#include <gpnkit/random.hpp>

using namespace gpnkit;

TEST(Seeds, DerivedSeedsAreDistinctAndStable) {
    std::set<std::uint64_t> seen;
    for (std::uint64_t i = 0; i < 1000; ++i) seen.insert(derive_seed(7, {i}));
    EXPECT_EQ(seen.size(), 1000u);
    EXPECT_EQ(derive_seed(7, {1, 2}), derive_seed(7, {1, 2}));
    EXPECT_NE(derive_seed(7, {1, 2}), derive_seed(7, {2, 1}));
    EXPECT_NE(derive_seed(7, {1}), derive_seed(8, {1}));
}

TEST(Prior, VariancesFollowLayoutAndFanIn) {
    const MlpArchitecture arch({2, 3, 1});
    const PriorSpec spec{{4.0, 6.0}, {0.5, 0.25}, true};
    const VectorXd v = prior_variances(spec, arch);
    ASSERT_EQ(v.size(), 13);
    for (int i = 0; i < 6; ++i) EXPECT_DOUBLE_EQ(v[i], 2.0);
    for (int i = 6; i < 9; ++i) EXPECT_DOUBLE_EQ(v[i], 0.5);
    for (int i = 9; i < 12; ++i) EXPECT_DOUBLE_EQ(v[i], 2.0);
    EXPECT_DOUBLE_EQ(v[12], 0.25);

    const VectorXd raw = prior_variances(PriorSpec::bootstrap_default(), arch);
    EXPECT_DOUBLE_EQ(raw[0], 40.0);
    EXPECT_DOUBLE_EQ(raw[12], 10.0);
}

TEST(Prior, ZeroVarianceGivesZeroVector) {
    const MlpArchitecture arch({3, 4, 2});
    EXPECT_EQ(sample_prior_params(PriorSpec::uniform(2, 0.0, 0.0), arch, 5).values.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Prior, LayerMomentsMatchSpec) {
    const MlpArchitecture arch({50, 40, 1});
    const PriorSpec spec{{3.0, 1.0}, {0.2, 1.0}, false};
    // 100k draws of the first weight block: 50 * 40 = 2000 entries per sample
    Rng rng(11);
    double sum = 0.0, sq = 0.0;
    std::size_t n = 0;
    while (n < 100000) {
        const ParamVector p = sample_prior_params(spec, arch, rng);
        const auto w = p.weights(0);
        sum += w.sum();
        sq += w.squaredNorm();
        n += static_cast<std::size_t>(w.size());
    }
    const double mean = sum / static_cast<double>(n);
    const double var = sq / static_cast<double>(n) - mean * mean;
    const double se_mean = std::sqrt(3.0 / static_cast<double>(n));
    const double se_var = 3.0 * std::sqrt(2.0 / static_cast<double>(n));
    EXPECT_LT(std::abs(mean), 3.0 * se_mean);
    EXPECT_LT(std::abs(var - 3.0), 3.0 * se_var);
}

TEST(Prior, DeterministicPerSeed) {
    const MlpArchitecture arch({2, 8, 1});
    const PriorSpec spec = PriorSpec::bootstrap_default();
    EXPECT_EQ(sample_prior_params(spec, arch, 3), sample_prior_params(spec, arch, 3));
    EXPECT_NE(sample_prior_params(spec, arch, 3).values, sample_prior_params(spec, arch, 4).values);
}

TEST(Prior, RejectsMismatchedLayerCount) {
    EXPECT_THROW(prior_variances(PriorSpec::uniform(3, 1.0, 1.0), MlpArchitecture({2, 3, 1})), ShapeError);
    EXPECT_THROW(prior_variances(PriorSpec{{-1.0, 1.0}, {1.0, 1.0}, true}, MlpArchitecture({2, 3, 1})), PreconditionError);
}
