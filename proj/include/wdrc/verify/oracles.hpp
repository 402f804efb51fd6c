#pragma once

// Brute-force reference computations, deliberately built from different
// formulas than the library: dynamic-programming LQR, finite differences,
// grid searches, quantile quadrature and the information-form filter.

#include <boost/math/distributions/normal.hpp>
#include <boost/random/mersenne_twister.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_real_distribution.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "wdrc/bounds.hpp"

namespace wdrc::verify {

struct OracleResult {
    std::string name;
    bool passed = false;
    double max_error = 0.0;
    double tolerance = 0.0;
    std::string detail;
};

// ---------------------------------------------------------------------------
// Reference computations

// Finite-horizon LQR by the textbook recursion
//   K_t = -(R + B'P B)^{-1} B'P A,  P_t = Q + A'P A + A'P B K_t.
inline std::vector<Matrix> lqr_gains(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& Qf, const Matrix& R,
                                     int horizon) {
    std::vector<Matrix> K(static_cast<std::size_t>(horizon));
    Matrix P = Qf;
    for (int t = horizon - 1; t >= 0; --t) {
        const Matrix k = -(R + B.transpose() * P * B).ldlt().solve(B.transpose() * P * A);
        P = Q + A.transpose() * P * A + A.transpose() * P * B * k;
        P = 0.5 * (P + P.transpose());
        K[static_cast<std::size_t>(t)] = k;
    }
    return K;
}

// Central differences along E_ii and (E_ij + E_ji)/2, giving the symmetric
// gradient of f at X.
inline Matrix finite_difference_gradient(const std::function<double(const SymMatrix&)>& f, const SymMatrix& X, double h) {
    const auto n = X.dim();
    Matrix G(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i; j < n; ++j) {
            Matrix E = Matrix::Zero(n, n);
            E(i, j) += 0.5;
            E(j, i) += 0.5;
            const double d = (f(SymMatrix(X.mat() + h * E)) - f(SymMatrix(X.mat() - h * E))) / (2.0 * h);
            G(i, j) = G(j, i) = d;  // <G, E> = G_ij for symmetric G
        }
    }
    return G;
}

struct GridOptimum {
    double arg = 0.0;
    double value = 0.0;
};

// Uniform grid over [lo, hi], then two re-grids over the two cells around
// the incumbent.
inline GridOptimum grid_maximize(const std::function<double(double)>& f, double lo, double hi, int points = 10000,
                                 int refinements = 2) {
    GridOptimum best{lo, -std::numeric_limits<double>::infinity()};
    for (int level = 0; level <= refinements; ++level) {
        const double h = (hi - lo) / (points - 1);
        for (int i = 0; i < points; ++i) {
            const double x = lo + h * i;
            const double v = f(x);
            if (v > best.value) best = {x, v};
        }
        const double a = best.arg - h;
        const double b = best.arg + h;
        lo = std::max(lo, a);
        hi = std::min(hi, b);
    }
    return best;
}

inline GridOptimum grid_minimize(const std::function<double(double)>& f, double lo, double hi, int points = 10000,
                                 int refinements = 2) {
    GridOptimum g = grid_maximize([&](double x) { return -f(x); }, lo, hi, points, refinements);
    return {g.arg, -g.value};
}

// Scalar T = 1 problem with Gaussian belief (xbar, pbar) at t = 0.
struct ScalarProblem {
    double a, b, c, q, qf, r, m;  // m: measurement noise variance
    double lambda, w_hat, sigma_hat;
    double xbar, pbar;
};

// V_0 by direct saddle evaluation: q E[x_0^2] + min_u max_wbar (...) + max_sigma (...),
// using E[x_1^2 | I_0] = (a xbar + b u + wbar)^2 + a^2 pbar + sigma.
inline double scalar_saddle_value(const ScalarProblem& p, int points = 1001) {
    const double scale = 1.0 + std::abs(p.a * p.xbar) + std::abs(p.w_hat);
    const double U = 20.0 * scale * (1.0 + 1.0 / std::abs(p.b));
    const double W = 20.0 * scale * (1.0 + p.qf / (p.lambda - p.qf));
    const auto inner = [&](double u) {
        return grid_maximize(
                   [&](double w) {
                       const double x1 = p.a * p.xbar + p.b * u + w;
                       return p.r * u * u + p.qf * x1 * x1 - p.lambda * (w - p.w_hat) * (w - p.w_hat);
                   },
                   p.w_hat - W, p.w_hat + W, points, 3)
            .value;
    };
    const double mean_part = grid_minimize(inner, -U, U, points, 3).value;
    const double s_hi = 4.0 * p.sigma_hat * std::pow(p.lambda / (p.lambda - p.qf), 2) + 1.0;
    const double cov_part =
        grid_maximize([&](double s) { return p.qf * s - p.lambda * (s + p.sigma_hat - 2.0 * std::sqrt(s * p.sigma_hat)); },
                      0.0, s_hi, 10000, 2)
            .value;
    return p.q * (p.xbar * p.xbar + p.pbar) + p.qf * p.a * p.a * p.pbar + mean_part + cov_part;
}

// W2^2 between two 1-D laws: integral over p of (F^{-1}(p) - G^{-1}(p))^2,
// midpoint rule.
inline double w2_sq_quantile(const std::function<double(double)>& qa, const std::function<double(double)>& qb,
                             int points = 200000) {
    double acc = 0.0;
    for (int i = 0; i < points; ++i) {
        const double u = (i + 0.5) / points;
        const double d = qa(u) - qb(u);
        acc += d * d;
    }
    return acc / points;
}

inline std::function<double(double)> normal_quantile(double mean, double var) {
    const boost::math::normal_distribution<double> nd(mean, std::sqrt(var));
    return [nd](double u) { return boost::math::quantile(nd, u); };
}

// Information-form posterior (P^{-1} + C' M^{-1} C)^{-1}.
inline Matrix information_posterior(const Matrix& prior, const LinearSystem& sys) {
    const Matrix info = prior.inverse() + sys.C.transpose() * sys.M.mat().inverse() * sys.C;
    const Matrix post = info.inverse();
    return 0.5 * (post + post.transpose());
}

// ---------------------------------------------------------------------------
// Random instances

class InstanceRng {
public:
    explicit InstanceRng(std::uint64_t seed) : eng_(seed) {}

    double uniform(double lo, double hi) { return boost::random::uniform_real_distribution<double>(lo, hi)(eng_); }
    double sign() { return uniform(0.0, 1.0) < 0.5 ? -1.0 : 1.0; }

    Matrix gaussian(Eigen::Index r, Eigen::Index c) {
        boost::random::normal_distribution<double> nd;
        Matrix m(r, c);
        for (Eigen::Index i = 0; i < r; ++i)
            for (Eigen::Index j = 0; j < c; ++j) m(i, j) = nd(eng_);
        return m;
    }

    // Random rotation with eigenvalues drawn from [lo, hi].
    SymMatrix pd(Eigen::Index n, double lo, double hi) {
        const Eigen::HouseholderQR<Matrix> qr(gaussian(n, n));
        const Matrix Qm = qr.householderQ();
        Vector d(n);
        for (Eigen::Index i = 0; i < n; ++i) d(i) = uniform(lo, hi);
        return SymMatrix(Qm * d.asDiagonal() * Qm.transpose());
    }

    LinearSystem system(Eigen::Index n, Eigen::Index ny) {
        LinearSystem s;
        s.A = gaussian(n, n) * (0.9 / std::sqrt(static_cast<double>(n)));
        s.B = gaussian(n, 1);
        s.C = gaussian(ny, n);
        s.M = pd(ny, 0.1, 2.0);
        return s;
    }

private:
    boost::random::mt19937_64 eng_;
};

// ---------------------------------------------------------------------------
// Checks

// Paper plant with lambda -> infinity and a zero-mean nominal: gains revert
// to LQR and the adversary to the nominal.
inline LinearSystem benchmark_plant(double m) {
    LinearSystem s;
    s.A.resize(2, 2);
    s.A << 0.518, 0.266, 0.405, 0.806;
    s.B.resize(2, 1);
    s.B << -2.972, -2.271;
    s.C.resize(1, 2);
    s.C << 1.023, 1.955;
    s.M = SymMatrix(Matrix::Identity(1, 1) * m);
    return s;
}

inline CostSpec unit_cost(const LinearSystem& s, int horizon) {
    return {SymMatrix::identity(s.nx()), SymMatrix::identity(s.nx()), SymMatrix::identity(s.nu()), horizon};
}

inline std::vector<OracleResult> check_lq_degeneracy(double lambda = 1e8) {
    const LinearSystem sys = benchmark_plant(0.2);
    const CostSpec cost = unit_cost(sys, 50);
    Matrix sh(2, 2);
    sh << 0.01, 0.005, 0.005, 0.01;
    const NominalDistribution nominal = NominalDistribution::constant({Vector::Zero(2), SymMatrix(sh)}, cost.horizon);
    const RiccatiSolution sol = backward_pass(sys, cost, nominal, lambda);
    const auto ref = lqr_gains(sys.A, sys.B, cost.Q, cost.Qf, cost.R, cost.horizon);

    OracleResult gains{"lambda->inf gains match LQR", true, 0.0, 1e-5, ""};
    for (std::size_t t = 0; t < ref.size(); ++t)
        gains.max_error = std::max(gains.max_error, (sol.K[t] - ref[t]).norm() / ref[t].norm());
    gains.passed = gains.max_error <= gains.tolerance;

    ScenarioSpec sc;
    Matrix x0cov = Matrix::Identity(2, 2) * 0.001;
    sc.initial_state = GaussianLaw{Vector::Constant(2, -1.0), SymMatrix(x0cov)};
    sc.true_disturbance = GaussianLaw{Vector::Zero(2), SymMatrix(sh)};
    sc.noise_cov = sys.M;
    sc.seed = 7;
    const WdrcMode mode = make_wdrc_mode(sys, cost, nominal, lambda, sc);
    const SimulationTrace tr = run_closed_loop(mode, sc, sys, cost, RngStream(sc.seed, 0));

    OracleResult mean{"lambda->inf worst-case mean equals nominal", true, 0.0, 1e-6, ""};
    OracleResult cov{"lambda->inf worst-case covariance equals nominal", true, 0.0, 1e-4, ""};
    for (std::size_t t = 0; t < tr.worst_case.size(); ++t) {
        mean.max_error = std::max(mean.max_error, tr.worst_case[t].mean.cwiseAbs().maxCoeff());
        cov.max_error = std::max(cov.max_error, (tr.worst_case[t].cov.mat() - sh).cwiseAbs().maxCoeff());
    }
    mean.passed = mean.max_error <= mean.tolerance;
    cov.passed = cov.max_error <= cov.tolerance;
    return {gains, mean, cov};
}

inline OracleResult check_gradient(std::uint64_t seed = 11, int count = 50, double h = 1e-6) {
    InstanceRng rng(seed);
    OracleResult res{"cov_gradient vs central differences", true, 0.0, 1e-5, ""};
    for (int k = 0; k < count; ++k) {
        const Eigen::Index n = 1 + k % 3;
        const Eigen::Index ny = 1 + static_cast<Eigen::Index>(rng.uniform(0.0, static_cast<double>(n) - 1e-9));
        const LinearSystem sys = rng.system(n, ny);
        CovObjectiveContext ctx;
        ctx.sys = &sys;
        ctx.S_next = SymMatrix(rng.gaussian(n, n) * 0.5);
        ctx.P_next = rng.pd(n, 0.2, 3.0);
        ctx.lambda = ctx.P_next.max_eigenvalue() * rng.uniform(1.2, 5.0);
        ctx.Sigma_hat = rng.pd(n, 0.1, 1.5);
        ctx.P_bar = rng.pd(n, 0.05, 1.0);
        const SymMatrix Sigma = rng.pd(n, 0.2, 2.0);
        const Matrix g = cov_gradient(Sigma, ctx).mat();
        const Matrix fd = finite_difference_gradient([&](const SymMatrix& X) { return cov_objective(X, ctx); }, Sigma, h);
        res.max_error = std::max(res.max_error, (g - fd).norm() / std::max(fd.norm(), 1e-12));
    }
    res.passed = res.max_error <= res.tolerance;
    res.detail = std::to_string(count) + " instances";
    return res;
}

// Scalar covariance maximization against a refined 1-D grid.
inline std::vector<OracleResult> check_scalar_cov_solver(std::uint64_t seed = 23, int count = 20) {
    InstanceRng rng(seed);
    OracleResult arg{"scalar worst-case covariance argument vs grid", true, 0.0, 1e-3, ""};
    OracleResult val{"scalar worst-case covariance value vs grid", true, 0.0, 1e-4, ""};
    for (int k = 0; k < count; ++k) {
        LinearSystem sys;
        sys.A = Matrix::Constant(1, 1, rng.sign() * rng.uniform(0.2, 1.5));
        sys.B = Matrix::Constant(1, 1, rng.sign() * rng.uniform(0.5, 2.0));
        sys.C = Matrix::Constant(1, 1, rng.sign() * rng.uniform(0.3, 2.0));
        sys.M = SymMatrix(Matrix::Constant(1, 1, rng.uniform(0.1, 1.0)));
        CovObjectiveContext ctx;
        ctx.sys = &sys;
        const double s = rng.uniform(0.0, 2.0);
        const double p = rng.uniform(0.5, 3.0);
        ctx.S_next = SymMatrix(Matrix::Constant(1, 1, s));
        ctx.P_next = SymMatrix(Matrix::Constant(1, 1, p));
        ctx.lambda = (s + p) * rng.uniform(1.5, 5.0);
        const double sh = rng.uniform(0.05, 1.0);
        ctx.Sigma_hat = SymMatrix(Matrix::Constant(1, 1, sh));
        ctx.P_bar = SymMatrix(Matrix::Constant(1, 1, rng.uniform(0.0, 1.0)));

        // Beyond this point the objective's slope is negative.
        const double hi = 2.0 * sh * std::pow(ctx.lambda / (ctx.lambda - p - s), 2) + 1.0;
        const GridOptimum g = grid_maximize(
            [&](double x) { return cov_objective(SymMatrix(Matrix::Constant(1, 1, x)), ctx); }, 0.0, hi);
        const WorstCaseStage w = solve_worst_case_cov(ctx, ctx.Sigma_hat);
        arg.max_error = std::max(arg.max_error, std::abs(w.cov(0, 0) - g.arg));
        val.max_error = std::max(val.max_error, std::abs(w.z_tilde - g.value));
    }
    arg.passed = arg.max_error <= arg.tolerance;
    val.passed = val.max_error <= val.tolerance;
    return {arg, val};
}

// T = 1 scalar value function against the direct saddle evaluation.
inline OracleResult check_scalar_value(std::uint64_t seed = 29, int count = 20) {
    InstanceRng rng(seed);
    OracleResult res{"T=1 scalar value vs grid saddle", true, 0.0, 1e-3, ""};
    for (int k = 0; k < count; ++k) {
        ScalarProblem p{};
        p.a = rng.sign() * rng.uniform(0.2, 1.5);
        p.b = rng.sign() * rng.uniform(0.5, 2.0);
        p.c = rng.sign() * rng.uniform(0.3, 2.0);
        p.q = rng.uniform(0.5, 2.0);
        p.qf = rng.uniform(0.5, 2.0);
        p.r = rng.uniform(0.5, 2.0);
        p.m = rng.uniform(0.1, 1.0);
        p.lambda = p.qf * rng.uniform(1.5, 5.0);
        p.w_hat = rng.uniform(-0.5, 0.5);
        p.sigma_hat = rng.uniform(0.05, 0.5);

        LinearSystem sys;
        sys.A = Matrix::Constant(1, 1, p.a);
        sys.B = Matrix::Constant(1, 1, p.b);
        sys.C = Matrix::Constant(1, 1, p.c);
        sys.M = SymMatrix(Matrix::Constant(1, 1, p.m));
        const CostSpec cost{SymMatrix(Matrix::Constant(1, 1, p.q)), SymMatrix(Matrix::Constant(1, 1, p.qf)),
                            SymMatrix(Matrix::Constant(1, 1, p.r)), 1};
        const NominalDistribution nominal = NominalDistribution::constant(
            {Vector::Constant(1, p.w_hat), SymMatrix(Matrix::Constant(1, 1, p.sigma_hat))}, 1);
        const GaussianLaw x0{Vector::Constant(1, rng.uniform(-1.0, 1.0)), SymMatrix(Matrix::Constant(1, 1, rng.uniform(0.05, 1.0)))};
        const Vector y0 = Vector::Constant(1, rng.uniform(-1.5, 1.5));
        const BeliefState b0 = init_belief(x0, y0, sys);
        p.xbar = b0.mean(0);
        p.pbar = b0.cov(0, 0);

        const RiccatiSolution sol = backward_pass(sys, cost, nominal, p.lambda);
        const WorstCaseSchedule sched = worst_case_schedule(sol, nominal, sys, b0.cov);
        const double v = evaluate_value(sol, sched.z_tilde(), b0);
        res.max_error = std::max(res.max_error, std::abs(v - scalar_saddle_value(p)));
    }
    res.passed = res.max_error <= res.tolerance;
    return res;
}

// Gelbrich distance is exact for 1-D Gaussians and a lower bound otherwise.
inline std::vector<OracleResult> check_gelbrich(std::uint64_t seed = 31, int count = 20) {
    InstanceRng rng(seed);
    // Midpoint quadrature loses ~1e-6 in the quantile tails.
    OracleResult exact{"Gelbrich equals W2 for 1-D Gaussians", true, 0.0, 1e-5, ""};
    OracleResult lower{"Gelbrich lower-bounds W2 (uniform vs Gaussian)", true, 0.0, 1e-9, ""};
    const auto scalar = [](double m, double v) { return MomentPair{Vector::Constant(1, m), SymMatrix(Matrix::Constant(1, 1, v))}; };
    for (int k = 0; k < count; ++k) {
        const double m1 = rng.uniform(-1.0, 1.0), v1 = rng.uniform(0.05, 2.0);
        const double m2 = rng.uniform(-1.0, 1.0), v2 = rng.uniform(0.05, 2.0);
        const double g = gelbrich_dist_sq(scalar(m1, v1), scalar(m2, v2));
        const double w = w2_sq_quantile(normal_quantile(m1, v1), normal_quantile(m2, v2));
        exact.max_error = std::max(exact.max_error, std::abs(g - w) / (1.0 + w));

        const double lo = rng.uniform(-1.0, 0.0), hi = lo + rng.uniform(0.2, 2.0);
        const double gu = gelbrich_dist_sq(scalar(0.5 * (lo + hi), (hi - lo) * (hi - lo) / 12.0), scalar(m2, v2));
        const double wu = w2_sq_quantile([&](double u) { return lo + u * (hi - lo); }, normal_quantile(m2, v2));
        lower.max_error = std::max(lower.max_error, gu - wu);
    }
    exact.passed = exact.max_error <= exact.tolerance;
    lower.passed = lower.max_error <= lower.tolerance;
    return {exact, lower};
}

// Chained predict/update steps on random systems.
inline std::vector<OracleResult> check_filter(std::uint64_t seed = 37, int steps = 10000) {
    InstanceRng rng(seed);
    OracleResult psd{"posterior covariance PSD", true, 0.0, 1e-9, "max(-min eigenvalue)"};
    OracleResult order{"posterior below prior in PSD order", true, 0.0, 1e-9, "max(-min eig(prior - posterior))"};
    OracleResult forms{"Joseph form equals information form", true, 0.0, 1e-9, "max abs difference, relative to 1 + |prior|"};
    LinearSystem sys;
    SymMatrix post;
    for (int k = 0; k < steps; ++k) {
        if (k % 50 == 0) {
            const Eigen::Index n = 1 + (k / 50) % 3;
            sys = rng.system(n, 1 + (k / 150) % n);
            post = rng.pd(n, 0.01, 2.0);
        }
        const SymMatrix W = rng.pd(sys.nx(), 0.01, 1.0);
        const SymMatrix prior = predict_cov(post, W, sys);
        post = update_cov(prior, sys);
        const double scale = 1.0 + prior.mat().cwiseAbs().maxCoeff();
        psd.max_error = std::max(psd.max_error, -post.min_eigenvalue());
        order.max_error = std::max(order.max_error, -SymMatrix(prior.mat() - post.mat()).min_eigenvalue() / scale);
        forms.max_error =
            std::max(forms.max_error, (post.mat() - information_posterior(prior, sys)).cwiseAbs().maxCoeff() / scale);
    }
    for (auto* r : {&psd, &order, &forms}) r->passed = r->max_error <= r->tolerance;
    return {psd, order, forms};
}

inline std::vector<OracleResult> run_oracle_suite(std::uint64_t seed = 0) {
    std::vector<OracleResult> out;
    const auto append = [&](std::vector<OracleResult> v) { out.insert(out.end(), v.begin(), v.end()); };
    append(check_lq_degeneracy());
    out.push_back(check_gradient(11 + seed));
    append(check_scalar_cov_solver(23 + seed));
    out.push_back(check_scalar_value(29 + seed));
    append(check_gelbrich(31 + seed));
    append(check_filter(37 + seed));
    return out;
}

}  // namespace wdrc::verify
