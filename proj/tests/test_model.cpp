#include "test_util.hpp"

using namespace wdrc;
using namespace wdrc::test;

TEST(Model, ValidatesDimensions) {
    LinearSystem s = benchmark_plant();
    EXPECT_NO_THROW(s.validate());
    s.C = Matrix::Ones(1, 3);
    EXPECT_THROW(s.validate(), Error);
}

TEST(Model, CostRequiresPositiveDefiniteR) {
    CostSpec c = benchmark_cost();
    c.R = SymMatrix(scalar(0.0));
    try {
        c.validate(benchmark_plant());
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::NotPD);
    }
}

TEST(EstimateNominal, IdenticalSamplesGiveZeroCovariance) {
    const Vector v = vec({0.3, -0.2});
    const NominalDistribution n = estimate_nominal({{v, v, v, v}});
    EXPECT_LT((n.mean(0) - v).norm(), 1e-15);
    EXPECT_LT(max_abs(n.cov(0).mat()), 1e-15);
}

TEST(EstimateNominal, TwoPointUsesOneOverN) {
    const NominalDistribution n = estimate_nominal({{vec({-1}), vec({1})}});
    EXPECT_DOUBLE_EQ(n.mean(0)(0), 0.0);
    EXPECT_DOUBLE_EQ(n.cov(0)(0, 0), 1.0);
}

TEST(EstimateNominal, EmptyThrows) {
    try {
        estimate_nominal({{}});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::EmptySamples);
    }
}

TEST(EstimateNominal, ConvergesOnKnownGaussian) {
    const Matrix cov = mat({{0.5, 0.2}, {0.2, 0.3}});
    const Vector mean = vec({1.0, -2.0});
    const Distribution d = GaussianLaw{mean, SymMatrix(cov)};
    std::vector<Vector> xs;
    for (std::uint64_t i = 0; i < 100; ++i) xs.push_back(sample(d, RngStream(3, i), RngStream::Channel::Nominal, 0));
    const NominalDistribution n = estimate_nominal({xs});
    for (Eigen::Index i = 0; i < 2; ++i) {
        EXPECT_LT(std::abs(n.mean(0)(i) - mean(i)), 3.0 * std::sqrt(cov(i, i) / 100.0));
        // Var of a sample variance is about 2 s^4 / N.
        EXPECT_LT(std::abs(n.cov(0)(i, i) - cov(i, i)), 3.0 * std::sqrt(2.0 / 100.0) * cov(i, i));
    }
    EXPECT_GE(n.cov(0).min_eigenvalue(), -n.cov(0).psd_tol());
}

TEST(Sampling, DegenerateLaws) {
    ScenarioSpec sc = gaussian_scenario();
    sc.true_disturbance = UniformLaw{Vector::Zero(2), Vector::Zero(2)};
    for (int t = 0; t < 5; ++t) EXPECT_EQ(sample_disturbance(sc, t, RngStream(1, 2)), Vector::Zero(2));
    sc.true_disturbance = GaussianLaw{vec({0.1, 0.2}), SymMatrix::zero(2)};
    for (int t = 0; t < 5; ++t) EXPECT_LT((sample_disturbance(sc, t, RngStream(1, 2)) - vec({0.1, 0.2})).norm(), 1e-15);
}

TEST(Sampling, UniformVariance) {
    ScenarioSpec sc = gaussian_scenario();
    sc.true_disturbance = UniformLaw{Vector::Constant(2, -0.05), Vector::Constant(2, 0.05)};
    const int n = 100000;
    Vector s = Vector::Zero(2), ss = Vector::Zero(2);
    for (int i = 0; i < n; ++i) {
        const Vector w = sample_disturbance(sc, 0, RngStream(11, static_cast<std::uint64_t>(i)));
        EXPECT_TRUE((w.array().abs() <= 0.05).all());
        s += w;
        ss += w.cwiseProduct(w);
    }
    const Vector var = ss / n - (s / n).cwiseProduct(s / n);
    for (Eigen::Index i = 0; i < 2; ++i) EXPECT_NEAR(var(i), 0.01 / 12.0, 0.02 * 0.01 / 12.0);
}

TEST(Sampling, ReproducibleAndStreamSeparated) {
    const ScenarioSpec sc = gaussian_scenario(42);
    const Vector a = sample_disturbance(sc, 3, RngStream(42, 7));
    EXPECT_EQ(a, sample_disturbance(sc, 3, RngStream(42, 7)));
    EXPECT_NE(a, sample_disturbance(sc, 4, RngStream(42, 7)));
    EXPECT_NE(a, sample_disturbance(sc, 3, RngStream(42, 8)));
    EXPECT_NE(a, sample_disturbance(sc, 3, RngStream(43, 7)));
}

TEST(Sampling, StageInvariantNominalReplicatesOneSampleSet) {
    ScenarioSpec sc = gaussian_scenario();
    const auto inv = draw_nominal_samples(sc, 4);
    ASSERT_EQ(inv.size(), 4u);
    EXPECT_EQ(inv[0].size(), 5u);
    for (const auto& stage : inv) EXPECT_EQ(stage, inv[0]);
    sc.nominal_mode = NominalMode::PerStage;
    const auto per = draw_nominal_samples(sc, 4);
    EXPECT_NE(per[0], per[1]);
}

TEST(Scenario, UniformBoundsValidated) {
    ScenarioSpec sc = gaussian_scenario();
    sc.true_disturbance = UniformLaw{vec({0.1, 0}), vec({0.0, 1})};
    EXPECT_THROW(sc.validate(benchmark_plant()), Error);
    sc.true_disturbance = UniformLaw{vec({0.1, 0}), vec({0.2, 1})};
    EXPECT_NO_THROW(sc.validate(benchmark_plant()));
    const MomentPair m = moments(sc.true_disturbance);
    EXPECT_NEAR(m.mean(0), 0.15, 1e-15);
    EXPECT_NEAR(m.cov(0, 0), 0.01 / 12.0, 1e-15);
    EXPECT_NEAR(m.cov(1, 1), 1.0 / 12.0, 1e-15);
}
