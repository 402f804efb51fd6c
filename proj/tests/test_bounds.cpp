#include "test_util.hpp"

using namespace wdrc;
using namespace wdrc::test;

namespace {

RiccatiSolution zero_solution(int T) {
    CostSpec c = benchmark_cost(T);
    c.Q = SymMatrix::zero(2);
    c.Qf = SymMatrix::zero(2);
    return lq_backward_pass(benchmark_plant(), c, constant_nominal(Vector::Zero(2), Matrix::Zero(2, 2), T));
}

}  // namespace

TEST(EvaluateValue, ZeroCoefficients) {
    const RiccatiSolution sol = zero_solution(3);
    EXPECT_EQ(evaluate_value(sol, {0, 0, 0}, {vec({1, 2}), SymMatrix::identity(2)}), 0.0);
    EXPECT_THROW(evaluate_value(sol, {0, 0}, {vec({1, 2}), SymMatrix::identity(2)}), Error);
}

TEST(EvaluateValue, DeterministicInitialState) {
    const auto nominal = constant_nominal(vec({0.01, 0.02}), mat({{0.01, 0.005}, {0.005, 0.01}}), 10);
    const RiccatiSolution sol = backward_pass(benchmark_plant(), benchmark_cost(10), nominal, 5.0);
    const std::vector<double> zt(10, 0.125);
    const Vector x = vec({-1, 0.5});
    const double expect = x.dot(sol.P[0].mat() * x) + 2 * sol.r[0].dot(x) + sol.z[0] + 1.25;
    EXPECT_NEAR(evaluate_value(sol, zt, {x, SymMatrix::zero(2)}), expect, 1e-12);
}

TEST(EvaluateValue, ScalarGridSaddle) {
    const verify::OracleResult r = verify::check_scalar_value(61, 10);
    EXPECT_LE(r.max_error, 1e-3) << r.name;
}

TEST(ExpectedValue, MatchesMonteCarloOverInitialObservation) {
    const LinearSystem sys = benchmark_plant();
    const CostSpec cost = benchmark_cost(20);
    ScenarioSpec sc = gaussian_scenario();
    sc.initial_state = GaussianLaw{vec({-1, -1}), SymMatrix(mat({{0.3, 0.1}, {0.1, 0.2}}))};
    const auto nominal = estimate_nominal(draw_nominal_samples(sc, 20));
    const RiccatiSolution sol = backward_pass(sys, cost, nominal, 5.0);
    const SymMatrix P0 = initial_posterior_cov(sc, sys);
    const WorstCaseSchedule sched = worst_case_schedule(sol, nominal, sys, P0);
    const double exact = expected_value(sol, sched.z_tilde(), moments(sc.initial_state), P0);
    // Independent Monte-Carlo average with its own standard error.
    double s = 0.0, ss = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        const RngStream rng(77, static_cast<std::uint64_t>(i));
        const Vector x0 = sample(sc.initial_state, rng, RngStream::Channel::Prior, 0);
        const Vector y0 = sys.C * x0 + sample(GaussianLaw{Vector::Zero(1), sc.noise_cov}, rng, RngStream::Channel::Prior, 1);
        const double v = evaluate_value(sol, sched.z_tilde(), init_belief(sc.initial_state, y0, sys));
        s += v;
        ss += v * v;
    }
    const double mean = s / n;
    const double se = std::sqrt((ss / n - mean * mean) / n);
    EXPECT_LT(std::abs(mean - exact), 4.0 * se);
    EXPECT_NEAR(sampled_value(sol, sched.z_tilde(), sc, sys, n, 77), mean, 1e-9 * std::abs(mean));
}

TEST(EvaluateValue, LargeLambdaApproachesLqg) {
    const LinearSystem sys = benchmark_plant();
    const CostSpec cost = benchmark_cost();
    const ScenarioSpec sc = gaussian_scenario();
    const auto nominal = estimate_nominal(draw_nominal_samples(sc, 50));
    const SymMatrix P0 = initial_posterior_cov(sc, sys);
    const BeliefState b0 = reference_belief(sc, sys);
    const RiccatiSolution lq = lq_backward_pass(sys, cost, nominal);
    const double v_lq = evaluate_value(lq, lq_z_tilde(lq, nominal, sys, P0), b0);
    const RiccatiSolution sol = backward_pass(sys, cost, nominal, 1e6);
    const double v = evaluate_value(sol, worst_case_schedule(sol, nominal, sys, P0).z_tilde(), b0);
    EXPECT_NEAR(v, v_lq, 1e-4 * v_lq);
}

TEST(GuaranteedCost, Arithmetic) {
    EXPECT_DOUBLE_EQ(guaranteed_cost(7.0, 50, 0.0, 4.0), 4.0);
    EXPECT_NEAR(guaranteed_cost(2.0, 50, 0.1, 4.0), 5.0, 1e-14);
    EXPECT_THROW(guaranteed_cost(2.0, 50, -0.1, 4.0), Error);
}

TEST(PerformanceRatio, AssemblesCertificate) {
    const CostCertificate c = performance_ratio(2.0, 50, 0.1, 4.0, 4.5);
    EXPECT_NEAR(c.guaranteed_bound, 5.0, 1e-14);
    EXPECT_NEAR(c.rho, 5.0 / 4.5, 1e-14);
    EXPECT_TRUE(c.diagnostics.empty());
    const CostCertificate bad = performance_ratio(2.0, 50, 0.0, 4.0, 4.5);
    EXPECT_FALSE(bad.diagnostics.empty());
    try {
        performance_ratio(2.0, 50, 0.1, 4.0, 0.0);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::DegenerateLQ);
    }
}

TEST(PerformanceRatio, ZeroRadiusLargeLambdaTendsToOne) {
    const LinearSystem sys = benchmark_plant();
    const CostSpec cost = benchmark_cost(20);
    const ScenarioSpec sc = gaussian_scenario();
    const auto nominal = estimate_nominal(draw_nominal_samples(sc, 20));
    const PenalizedValue v = penalized_value(sys, cost, nominal, 0.0, sc, 1e7);
    const CostCertificate c = performance_ratio(1e7, 20, 0.0, v.j_lambda, lq_value(sys, cost, nominal, sc));
    EXPECT_NEAR(c.rho, 1.0, 1e-5);
}

TEST(CalibrateLambda, LargeRadiusPinsToFloor) {
    const LinearSystem sys = benchmark_plant();
    const CostSpec cost = benchmark_cost(10);
    const ScenarioSpec sc = gaussian_scenario();
    const auto nominal = estimate_nominal(draw_nominal_samples(sc, 10));
    CalibrationOptions opts;
    opts.coarse_points = 11;
    const CalibrationResult r = calibrate_lambda(sys, cost, nominal, 10.0, sc, opts);
    EXPECT_TRUE(r.at_boundary);
    EXPECT_DOUBLE_EQ(r.lambda, r.lambda_min);
    EXPECT_TRUE(check_penalty(sys, cost, r.lambda).feasible);
}

TEST(CalibrateLambda, ZeroRadiusRunsToCeiling) {
    const LinearSystem sys = benchmark_plant();
    const CostSpec cost = benchmark_cost(10);
    const ScenarioSpec sc = gaussian_scenario();
    const auto nominal = estimate_nominal(draw_nominal_samples(sc, 10));
    CalibrationOptions opts;
    opts.coarse_points = 11;
    const CalibrationResult r = calibrate_lambda(sys, cost, nominal, 0.0, sc, opts);
    EXPECT_TRUE(r.at_boundary);
    EXPECT_NEAR(r.lambda, r.lambda_max, 1e-9 * r.lambda_max);
}

TEST(CalibrateLambda, ObjectiveContinuousOnGrid) {
    const LinearSystem sys = benchmark_plant();
    const CostSpec cost = benchmark_cost(10);
    const ScenarioSpec sc = gaussian_scenario();
    const auto nominal = estimate_nominal(draw_nominal_samples(sc, 10));
    const double lo = feasible_lambda_floor(sys, cost);
    std::vector<double> g;
    for (int i = 0; i < 40; ++i) g.push_back(penalized_value(sys, cost, nominal, 0.1, sc, lo * std::pow(100.0, i / 39.0)).objective);
    // Neighbouring jumps stay within a few times the typical step.
    double typical = 0.0;
    for (std::size_t i = 1; i < g.size(); ++i) typical += std::abs(g[i] - g[i - 1]) / (g.size() - 1);
    for (std::size_t i = 2; i < g.size(); ++i) EXPECT_LT(std::abs(g[i] - g[i - 1]), 10.0 * typical + std::abs(g[i - 1] - g[i - 2]));
}
