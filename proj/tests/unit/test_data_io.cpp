#include <cstdio>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include <gpnkit/data_io.hpp>

using namespace gpnkit;

namespace {

LabeledDataset from_csv(const std::string& text, const std::string& target, bool normalize = false) {
    std::istringstream in(text);
    return load_csv(in, target, normalize);
}

LabeledDataset targets(std::initializer_list<double> ys) {
    LabeledDataset d;
    d.x.resize(static_cast<Index>(ys.size()), 2);
    d.y.resize(static_cast<Index>(ys.size()), 1);
    Index i = 0;
    for (double y : ys) {
        d.x.row(i) << i, 10.0 * i;
        d.y(i++, 0) = y;
    }
    return d;
}

std::string error_of(const std::string& text) {
    try {
        from_csv(text, "t");
    } catch (const DataError& e) {
        return e.what();
    }
    return {};
}

}  // namespace

TEST(LoadCsv, ToyFileGivesExactMatrix) {
    const auto d = from_csv("a,t,b\n1.5,10,-2\n3,20,4e-1\n", "t");
    ASSERT_EQ(d.size(), 2);
    ASSERT_EQ(d.input_dim(), 2);
    EXPECT_EQ(d.x, (MatrixXd(2, 2) << 1.5, -2.0, 3.0, 0.4).finished());
    EXPECT_EQ(d.y, (MatrixXd(2, 1) << 10.0, 20.0).finished());
    EXPECT_EQ(d.feature_names, (std::vector<std::string>{"a", "b"}));
    EXPECT_FALSE(d.normalized());
}

TEST(LoadCsv, HandlesBomQuotesBlankLinesAndCrlf) {
    const auto d = from_csv("\xEF\xBB\xBF\"x\", t\r\n1,2\r\n\r\n3,4\r\n", "t");
    ASSERT_EQ(d.size(), 2);
    EXPECT_EQ(d.feature_names.front(), "x");
    EXPECT_DOUBLE_EQ(d.y(1, 0), 4.0);
}

TEST(LoadCsv, ErrorsCarryLineAndColumn) {
    EXPECT_NE(error_of("a,t\n1,2\n3\n").find("line 3"), std::string::npos);
    const std::string bad = error_of("a,t\n1,2\nfoo,3\n");
    EXPECT_NE(bad.find("column 'a'"), std::string::npos);
    EXPECT_NE(bad.find("line 3"), std::string::npos);
    EXPECT_NE(error_of("a,b\n1,2\n").find("'t'"), std::string::npos);
    EXPECT_FALSE(error_of("").empty());
    EXPECT_FALSE(error_of("a,t\nnan,1\n").empty());
    EXPECT_THROW(load_csv(std::string("/nonexistent/file.csv"), "t"), DataError);
}

TEST(LoadCsv, ZScoredColumnsAndRoundTrip) {
    std::ostringstream text;
    text << "f0,f1,f2,t\n";
    Rng rng(6);
    MatrixXd raw(200, 3);
    for (int i = 0; i < 200; ++i) {
        raw.row(i) << 5.0 + 3.0 * standard_normal(rng), -100.0 + standard_normal(rng), 1e3 * standard_normal(rng);
        text.precision(17);
        text << raw(i, 0) << ',' << raw(i, 1) << ',' << raw(i, 2) << ',' << i << '\n';
    }
    const auto d = from_csv(text.str(), "t", true);
    ASSERT_TRUE(d.normalized());
    for (Index j = 0; j < 3; ++j) {
        const VectorXd c = d.x.col(j);
        EXPECT_NEAR(c.mean(), 0.0, 1e-9);
        EXPECT_NEAR(std::sqrt((c.array() - c.mean()).square().mean()), 1.0, 1e-9);
    }
    const FeatureStats st{d.feature_mean, d.feature_std};
    EXPECT_LT((denormalize_features(d.x, st) - raw).cwiseAbs().maxCoeff(), 1e-10 * 1e3);
    EXPECT_LT((normalize_features(raw, st) - d.x).cwiseAbs().maxCoeff(), 1e-10);
    // target is kept in raw units
    EXPECT_DOUBLE_EQ(d.y(199, 0), 199.0);
}

TEST(LoadCsv, ReadsFromPath) {
    const std::string path = ::testing::TempDir() + "gpnkit_load_csv.csv";
    {
        std::ofstream out(path);
        out << "t,x\n1,2\n";
    }
    const auto d = load_csv(path, "t", false);
    EXPECT_DOUBLE_EQ(d.x(0, 0), 2.0);
    std::remove(path.c_str());
}

TEST(SplitByTarget, BoundaryConvention) {
    const auto r = split_by_target(targets({1, 2, 3}), SplitSpec::by_target(2.0));
    EXPECT_EQ(r.first.y, (MatrixXd(2, 1) << 2, 3).finished());
    EXPECT_EQ(r.second.y, (MatrixXd(1, 1) << 1).finished());
    EXPECT_TRUE(r.warnings.empty());

    const auto below = split_by_target(targets({1, 2, 3}), SplitSpec::by_target(2.0, InSide::below));
    EXPECT_EQ(below.first.size(), 1);
    EXPECT_EQ(below.second.size(), 2);
}

TEST(SplitByTarget, EmptySideWarnsInsteadOfThrowing) {
    const auto r = split_by_target(targets({5, 6, 7}), SplitSpec::by_target(2.0));
    EXPECT_EQ(r.first.size(), 3);
    EXPECT_EQ(r.second.size(), 0);
    EXPECT_EQ(r.warnings.size(), 1u);
    EXPECT_THROW(SplitSpec::by_target(INFINITY), PreconditionError);
}

TEST(SplitByTarget, PartitionIsExhaustiveAndDisjoint) {
    Rng rng(12);
    LabeledDataset d;
    d.x = standard_normal_matrix(300, 2, rng);
    d.x.col(0) = VectorXd::LinSpaced(300, 0, 299);  // unique row id
    d.y = standard_normal_matrix(300, 1, rng);
    for (const auto& spec : {SplitSpec::by_target(0.1), SplitSpec::random(0.3, 4)}) {
        const auto r = split_dataset(d, spec);
        std::vector<double> ids;
        for (Index i = 0; i < r.first.size(); ++i) ids.push_back(r.first.x(i, 0));
        for (Index i = 0; i < r.second.size(); ++i) ids.push_back(r.second.x(i, 0));
        std::sort(ids.begin(), ids.end());
        ASSERT_EQ(ids.size(), 300u);
        for (std::size_t i = 0; i < ids.size(); ++i) EXPECT_EQ(ids[i], static_cast<double>(i));
    }
    EXPECT_EQ(split_dataset(d, SplitSpec::random(0.3, 4)).first.size(), 90);
    EXPECT_THROW(split_by_target(d, SplitSpec::random(0.3, 4)), PreconditionError);
}

TEST(UnlabeledPool, FromDatasetDropsLabels) {
    const auto d = targets({1, 2, 3, 4});
    const auto pool = build_unlabeled_pool(d);
    EXPECT_EQ(pool.size(), 4);
    EXPECT_EQ(pool.dim(), 2);
    EXPECT_EQ(pool.data(), d.x);
}

TEST(UnlabeledPool, EvenMixtureOfTwoSets) {
    LabeledDataset a, b;
    a.x = MatrixXd::Zero(100, 3);
    a.y = MatrixXd::Zero(100, 1);
    b.x = MatrixXd::Ones(100, 3);
    b.y = MatrixXd::Zero(100, 1);
    const auto pool = build_unlabeled_pool({&a, &b}, {0.5, 0.5}, {"in", "ood"}, 1);
    EXPECT_EQ(pool.size(), 200);
    ASSERT_EQ(pool.proportions().size(), 2u);
    EXPECT_DOUBLE_EQ(pool.proportions()[0].second, 0.5);
    EXPECT_DOUBLE_EQ(pool.proportions()[1].second, 0.5);
    EXPECT_DOUBLE_EQ(pool.data().sum(), 300.0);
}

TEST(UnlabeledPool, BoxDrawsCoverBounds) {
    const VectorXd lo = (VectorXd(2) << -2.0, 10.0).finished(), hi = (VectorXd(2) << 2.0, 11.0).finished();
    const auto pool = build_unlabeled_pool(lo, hi);
    Rng rng(9);
    const MatrixXd x = pool.draw(100000, rng);
    for (Index j = 0; j < 2; ++j) {
        const double width = hi[j] - lo[j];
        EXPECT_GE(x.col(j).minCoeff(), lo[j]);
        EXPECT_LT(x.col(j).maxCoeff(), hi[j]);
        EXPECT_LT(x.col(j).minCoeff() - lo[j], 0.01 * width);
        EXPECT_LT(hi[j] - x.col(j).maxCoeff(), 0.01 * width);
    }
    EXPECT_THROW(UnlabeledPool::box(hi, lo), PreconditionError);
    EXPECT_THROW(UnlabeledPool().draw(1, rng), PreconditionError);
}

TEST(SineTask, DefaultsAndNoiseFreeCurve) {
    const auto t = make_sine_task();
    EXPECT_EQ(t.labeled.size(), 6);
    EXPECT_TRUE(t.pool.is_box());
    EXPECT_DOUBLE_EQ(t.pool.bounds().lo[0], -2.0);
    EXPECT_DOUBLE_EQ(t.pool.bounds().hi[0], 2.0);

    const auto clean = make_sine_task(50, 0.0, -2, 2, 3);
    for (Index i = 0; i < 50; ++i) {
        EXPECT_EQ(clean.labeled.y(i, 0), std::sin(kSineFrequency * clean.labeled.x(i, 0)));
        EXPECT_GE(clean.labeled.x(i, 0), -2.0);
        EXPECT_LE(clean.labeled.x(i, 0), 2.0);
    }
    EXPECT_THROW(make_sine_task(0), PreconditionError);
}

TEST(SineTask, ResidualStdMatchesNoise) {
    const int n = 100000;
    const double sigma = 0.3;
    const auto t = make_sine_task(n, sigma, -2, 2, 21);
    const VectorXd r = t.labeled.y.col(0) - t.labeled.x.col(0).unaryExpr([](double x) { return std::sin(kSineFrequency * x); });
    const double sd = std::sqrt((r.array() - r.mean()).square().sum() / (n - 1.0));
    EXPECT_LT(std::abs(sd - sigma), 3.0 * sigma / std::sqrt(2.0 * (n - 1)));
}

TEST(SineTask, DeterministicPerSeed) {
    const auto a = make_sine_task(6, 0.1, -2, 2, 5), b = make_sine_task(6, 0.1, -2, 2, 5), c = make_sine_task(6, 0.1, -2, 2, 6);
    EXPECT_EQ(a.labeled.x, b.labeled.x);
    EXPECT_EQ(a.labeled.y, b.labeled.y);
    EXPECT_NE(a.labeled.x, c.labeled.x);
}

TEST(TargetScaler, RoundTrip) {
    const MatrixXd y = (MatrixXd(4, 1) << 1, 2, 3, 10).finished();
    const auto s = TargetScaler::fit(y);
    const MatrixXd z = s.apply(y);
    EXPECT_NEAR(z.mean(), 0.0, 1e-12);
    EXPECT_NEAR(z.squaredNorm() / 4.0, 1.0, 1e-12);
    EXPECT_LT((s.invert(z) - y).cwiseAbs().maxCoeff(), 1e-12);
}
