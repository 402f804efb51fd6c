#include "test_util.hpp"

using namespace wdrc;
using namespace wdrc::test;

namespace {

struct Instance {
    LinearSystem sys;
    CovObjectiveContext ctx;
};

Instance scalar_instance(double s, double p, double lam, double sh, double pbar, double c = 1.0) {
    Instance in{scalar_system(0.9, 1.0, c, 0.5), {}};
    in.ctx = {SymMatrix(scalar(s)), SymMatrix(scalar(p)), lam, SymMatrix(scalar(sh)), SymMatrix(scalar(pbar)), nullptr};
    return in;
}

}  // namespace

TEST(WorstCaseMean, Examples) {
    const SymMatrix P(scalar(1.0));
    EXPECT_NEAR(worst_case_mean(P, vec({0.5}), vec({1.0}), vec({0.1}), 2.0)(0), 1.7, 1e-15);
    const Vector w_hat = vec({0.3, -0.2});
    EXPECT_LT((worst_case_mean(SymMatrix::zero(2), Vector::Zero(2), vec({5, 5}), w_hat, 3.0) - w_hat).norm(), 1e-15);
    const SymMatrix P2(mat({{2, 0.5}, {0.5, 1}}));
    EXPECT_LT((worst_case_mean(P2, vec({0.4, 0.1}), vec({1, -1}), w_hat, 1e8) - w_hat).norm(), 1e-6);
}

TEST(WorstCaseMean, FormWithPlant) {
    const LinearSystem sys = benchmark_plant();
    const SymMatrix P(mat({{2, 0.5}, {0.5, 1}}));
    const Vector xb = vec({0.2, -0.1}), u = vec({0.3}), r = vec({0.05, 0.02}), wh = vec({0.01, 0.02});
    const Vector direct = (5.0 * Matrix::Identity(2, 2) - P.mat()).inverse() * (r + P.mat() * (sys.A * xb + sys.B * u) + 5.0 * wh);
    EXPECT_LT((worst_case_mean(P, r, xb, u, wh, 5.0, sys) - direct).norm(), 1e-14);
}

TEST(CovObjective, CollapsesAtNominal) {
    Instance in = scalar_instance(0.0, 1.5, 4.0, 0.3, 0.2);
    in.ctx.sys = &in.sys;
    EXPECT_NEAR(cov_objective(in.ctx.Sigma_hat, in.ctx), (1.5 + 4.0) * 0.3, 1e-12);

    const LinearSystem sys = benchmark_plant();
    const SymMatrix Sh(mat({{0.01, 0.005}, {0.005, 0.01}}));
    const SymMatrix Pn(mat({{2, 0.5}, {0.5, 1}}));
    const CovObjectiveContext ctx{SymMatrix::zero(2), Pn, 5.0, Sh, SymMatrix(0.1 * Matrix::Identity(2, 2)), &sys};
    EXPECT_NEAR(cov_objective(Sh, ctx), ((Pn.mat() + 5.0 * Matrix::Identity(2, 2)) * Sh.mat()).trace(), 1e-12);
}

TEST(CovObjective, ZeroSigmaLeavesFilterTerm) {
    const LinearSystem sys = benchmark_plant();
    const SymMatrix S(mat({{0.3, 0.1}, {0.1, 0.2}}));
    const SymMatrix Pbar(mat({{0.05, 0.01}, {0.01, 0.04}}));
    const CovObjectiveContext ctx{S, SymMatrix::identity(2), 5.0, SymMatrix(0.01 * Matrix::Identity(2, 2)), Pbar, &sys};
    const Matrix G = sys.A * Pbar.mat() * sys.A.transpose();
    const Matrix V = G - G * sys.C.transpose() * (sys.C * G * sys.C.transpose() + sys.M.mat()).inverse() * sys.C * G;
    EXPECT_NEAR(cov_objective(SymMatrix::zero(2), ctx), (S.mat() * V).trace(), 1e-14);
}

TEST(CovObjective, IndependentRecomposition) {
    verify::InstanceRng rng(41);
    const LinearSystem sys = rng.system(2, 1);
    const CovObjectiveContext ctx{rng.pd(2, 0.1, 1), rng.pd(2, 0.1, 1), 4.0, rng.pd(2, 0.05, 0.5), rng.pd(2, 0.05, 0.5), &sys};
    const SymMatrix Sigma = rng.pd(2, 0.05, 1.0);
    const BeliefState prior = predict({Vector::Zero(2), ctx.P_bar}, Vector::Zero(1), Vector::Zero(2), Sigma, sys);
    const BeliefState post = update(prior, Vector::Zero(1), sys);
    // Tr[(S^1/2 Sh S^1/2)^1/2] from the Bures identity.
    const double fid = 0.5 * (Sigma.trace() + ctx.Sigma_hat.trace() - bures_sq(Sigma, ctx.Sigma_hat));
    const double ref = (ctx.S_next.mat() * post.cov.mat()).trace() +
                       ((ctx.P_next.mat() - 4.0 * Matrix::Identity(2, 2)) * Sigma.mat()).trace() + 2.0 * 4.0 * fid;
    EXPECT_NEAR(cov_objective(Sigma, ctx), ref, 1e-12);
}

TEST(CovGradient, FiniteDifferenceOracle) {
    const verify::OracleResult r = verify::check_gradient(101, 50);
    EXPECT_LE(r.max_error, 1e-5);
}

TEST(CovGradient, AtNominalWithoutFilterTermEqualsP) {
    const LinearSystem sys = benchmark_plant();
    const SymMatrix Pn(mat({{2, 0.5}, {0.5, 1}}));
    const SymMatrix Sh(mat({{0.01, 0.005}, {0.005, 0.01}}));
    const CovObjectiveContext ctx{SymMatrix::zero(2), Pn, 5.0, Sh, SymMatrix(0.1 * Matrix::Identity(2, 2)), &sys};
    EXPECT_LT(max_abs(cov_gradient(Sh, ctx).mat() - Pn.mat()), 1e-10);
}

TEST(CovGradient, NoObservationThirdTermIsS) {
    LinearSystem sys = benchmark_plant();
    sys.C = Matrix::Zero(1, 2);
    const SymMatrix S(mat({{0.3, 0.1}, {0.1, 0.2}}));
    const SymMatrix Sh(mat({{0.02, 0.005}, {0.005, 0.01}}));
    const SymMatrix Pn = SymMatrix::identity(2);
    const CovObjectiveContext with{S, Pn, 5.0, Sh, SymMatrix(0.1 * Matrix::Identity(2, 2)), &sys};
    CovObjectiveContext without = with;
    without.S_next = SymMatrix::zero(2);
    EXPECT_LT(max_abs(cov_gradient(Sh, with).mat() - cov_gradient(Sh, without).mat() - S.mat()), 1e-12);
}

TEST(CovGradient, RejectsSingularSigma) {
    Instance in = scalar_instance(0.0, 1.0, 4.0, 0.3, 0.2);
    in.ctx.sys = &in.sys;
    try {
        cov_gradient(SymMatrix(scalar(0.0)), in.ctx);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::NotPD);
    }
}

TEST(CovObjective, ConcaveAlongSegments) {
    verify::InstanceRng rng(43);
    for (int k = 0; k < 40; ++k) {
        const Eigen::Index n = 1 + k % 4;
        const LinearSystem sys = rng.system(n, 1);
        const SymMatrix P = rng.pd(n, 0.1, 2.0);
        const CovObjectiveContext ctx{rng.pd(n, 0.0, 1.0), P, 2.0 * P.max_eigenvalue() + 1.0, rng.pd(n, 0.05, 1.0),
                                      rng.pd(n, 0.05, 1.0), &sys};
        const SymMatrix a = rng.pd(n, 0.01, 2.0), b = rng.pd(n, 0.01, 2.0);
        const double t = rng.uniform(0.05, 0.95);
        const double mid = cov_objective(SymMatrix(t * a.mat() + (1 - t) * b.mat()), ctx);
        EXPECT_GE(mid, t * cov_objective(a, ctx) + (1 - t) * cov_objective(b, ctx) - 1e-9);
    }
}

TEST(SolveWorstCaseCov, ScalarClosedForm) {
    for (const auto& [p, lam, sh] : {std::array{1.0, 3.0, 0.2}, std::array{2.0, 2.5, 0.05}, std::array{0.5, 10.0, 1.0}}) {
        Instance in = scalar_instance(0.0, p, lam, sh, 0.3);
        in.ctx.sys = &in.sys;
        const WorstCaseStage w = solve_worst_case_cov(in.ctx, in.ctx.Sigma_hat);
        const double expect = sh * std::pow(lam / (lam - p), 2);
        EXPECT_TRUE(w.converged);
        EXPECT_NEAR(w.cov(0, 0), expect, 1e-4 * (1 + expect));
        EXPECT_NEAR(w.z_tilde, cov_objective(w.cov, in.ctx), 1e-14);
        // Grid oracle.
        const auto g = verify::grid_maximize(
            [&](double x) { return cov_objective(SymMatrix(scalar(x)), in.ctx); }, 0.0, 4.0 * expect + 1.0);
        EXPECT_NEAR(w.cov(0, 0), g.arg, 1e-4);
    }
}

TEST(SolveWorstCaseCov, ZeroNominalCovariance) {
    Instance in = scalar_instance(0.8, 1.0, 3.0, 0.0, 0.3);
    in.ctx.sys = &in.sys;
    const WorstCaseStage w = solve_worst_case_cov(in.ctx, SymMatrix(scalar(0.0)));
    const auto g = verify::grid_maximize([&](double x) { return cov_objective(SymMatrix(scalar(x)), in.ctx); }, 0.0, 2.0);
    EXPECT_NEAR(w.z_tilde, g.value, 1e-6);
    EXPECT_NEAR(w.cov(0, 0), g.arg, 1e-3);
}

TEST(SolveWorstCaseCov, ScalarGridOracle) {
    for (const auto& r : verify::check_scalar_cov_solver(53, 20)) EXPECT_TRUE(r.passed) << r.name << " " << r.max_error;
}

TEST(SolveWorstCaseCov, DiagonalGridOracle) {
    // Diagonal data and C = 0 decouple the problem per coordinate.
    LinearSystem sys{mat({{0.5, 0}, {0, 0.8}}), mat({{1}, {1}}), Matrix::Zero(1, 2), SymMatrix(scalar(0.2))};
    const CovObjectiveContext ctx{SymMatrix::diag(vec({0.3, 0.6})), SymMatrix::diag(vec({1.0, 2.0})), 4.0,
                                  SymMatrix::diag(vec({0.01, 0.02})), SymMatrix::diag(vec({0.1, 0.05})), &sys};
    const WorstCaseStage w = solve_worst_case_cov(ctx, ctx.Sigma_hat);
    double best = -1e300;
    for (int i = 0; i <= 400; ++i)
        for (int j = 0; j <= 400; ++j)
            best = std::max(best, cov_objective(SymMatrix::diag(vec({0.05 * i / 400.0, 0.2 * j / 400.0})), ctx));
    EXPECT_GE(w.z_tilde, best - 1e-9);
    EXPECT_NEAR(w.z_tilde, best, 1e-5);
}

TEST(SolveWorstCaseCov, AscentIsMonotone) {
    const LinearSystem sys = benchmark_plant();
    const CovObjectiveContext ctx{SymMatrix(mat({{0.3, 0.1}, {0.1, 0.2}})), SymMatrix(mat({{2, 0.5}, {0.5, 1}})), 3.0,
                                  SymMatrix(mat({{0.01, 0.005}, {0.005, 0.01}})), SymMatrix(0.05 * Matrix::Identity(2, 2)), &sys};
    WorstCaseOptions opts;
    double prev = -std::numeric_limits<double>::infinity();
    int calls = 0;
    opts.trace = [&](int, double f, double, double) {
        EXPECT_GE(f, prev - 1e-13 * (1 + std::abs(f)));
        prev = f;
        ++calls;
    };
    const WorstCaseStage w = solve_worst_case_cov(ctx, ctx.Sigma_hat, opts);
    EXPECT_TRUE(w.converged);
    EXPECT_GT(calls, 0);
    EXPECT_TRUE(w.cov.is_psd());
}

TEST(SolveWorstCaseCov, LargeLambdaReturnsNominal) {
    verify::InstanceRng rng(59);
    for (int k = 0; k < 10; ++k) {
        const Eigen::Index n = 1 + k % 3;
        const LinearSystem sys = rng.system(n, 1);
        const CovObjectiveContext ctx{rng.pd(n, 0.0, 1.0), rng.pd(n, 0.1, 2.0), 1e8, rng.pd(n, 0.01, 0.5),
                                      rng.pd(n, 0.01, 0.5), &sys};
        const WorstCaseStage w = solve_worst_case_cov(ctx, ctx.Sigma_hat);
        EXPECT_LE((w.cov.mat() - ctx.Sigma_hat.mat()).norm(), 1e-4);
    }
}

TEST(SolveWorstCaseCov, InfeasiblePenaltyThrows) {
    Instance in = scalar_instance(0.0, 5.0, 4.0, 0.2, 0.1);
    in.ctx.sys = &in.sys;
    EXPECT_THROW(solve_worst_case_cov(in.ctx, in.ctx.Sigma_hat), PenaltyTooSmall);
}

TEST(WorstCaseSchedule, FollowsFilterPath) {
    const LinearSystem sys = benchmark_plant();
    const CostSpec cost = benchmark_cost(10);
    const auto nominal = constant_nominal(vec({0.01, 0.02}), mat({{0.01, 0.005}, {0.005, 0.01}}), 10);
    const RiccatiSolution sol = backward_pass(sys, cost, nominal, 5.0);
    const SymMatrix P0 = SymMatrix(0.001 * Matrix::Identity(2, 2));
    const WorstCaseSchedule s = worst_case_schedule(sol, nominal, sys, P0);
    ASSERT_EQ(s.stages.size(), 10u);
    ASSERT_EQ(s.posterior.size(), 11u);
    EXPECT_TRUE(s.all_converged());
    for (int t = 0; t < 10; ++t) {
        const SymMatrix prior = predict_cov(s.posterior[t], s.stages[t].cov, sys);
        EXPECT_LT(max_abs(update_cov(prior, sys).mat() - s.posterior[t + 1].mat()), 1e-15);
        EXPECT_NEAR(s.stages[t].z_tilde, cov_objective(s.stages[t].cov, stage_context(sol, nominal, sys, t, s.posterior[t])), 1e-12);
    }
}
