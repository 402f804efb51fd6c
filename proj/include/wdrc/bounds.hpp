#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "wdrc/controller.hpp"

namespace wdrc {

// Value function at t = 0 for a given initial belief:
//   xbar' P_0 xbar + Tr[(P_0 + S_0) Pbar_0] + 2 r_0' xbar + z_0 + sum_s ztilde_s
inline double evaluate_value(const RiccatiSolution& sol, const std::vector<double>& z_tilde, const BeliefState& b0) {
    detail::require_dims(static_cast<int>(z_tilde.size()) == sol.horizon(), "evaluate_value: z_tilde path must have length T");
    detail::require_dims(b0.mean.size() == sol.P[0].dim() && b0.cov.dim() == sol.P[0].dim(), "evaluate_value: belief must be n_x");
    double zt = 0.0;
    for (double z : z_tilde) zt += z;
    const Matrix& P0 = sol.P[0].mat();
    return b0.mean.dot(P0 * b0.mean) + ((P0 + sol.S[0].mat()) * b0.cov.mat()).trace() + 2.0 * sol.r[0].dot(b0.mean) +
           sol.z[0] + zt;
}

// E_{y_0}[V_0(I_0)] in closed form. xbar_0 is affine in y_0 with mean m and
// covariance Sigma_0 - Pbar_0, so only the first two moments of f_x enter:
//   m' P_0 m + Tr[P_0 Sigma_0] + Tr[S_0 Pbar_0] + 2 r_0' m + z_0 + sum ztilde
inline double expected_value(const RiccatiSolution& sol, const std::vector<double>& z_tilde, const MomentPair& x0,
                             const SymMatrix& P_bar0) {
    detail::require_dims(static_cast<int>(z_tilde.size()) == sol.horizon(), "expected_value: z_tilde path must have length T");
    double zt = 0.0;
    for (double z : z_tilde) zt += z;
    const Matrix& P0 = sol.P[0].mat();
    return x0.mean.dot(P0 * x0.mean) + (P0 * x0.cov.mat()).trace() + (sol.S[0].mat() * P_bar0.mat()).trace() +
           2.0 * sol.r[0].dot(x0.mean) + sol.z[0] + zt;
}

// Monte-Carlo average of V_0 over sampled y_0 = C x_0 + v_0.
inline double sampled_value(const RiccatiSolution& sol, const std::vector<double>& z_tilde, const ScenarioSpec& scenario,
                            const LinearSystem& sys, int samples, std::uint64_t seed) {
    double acc = 0.0;
    for (int i = 0; i < samples; ++i) {
        const RngStream rng(seed, static_cast<std::uint64_t>(i));
        const Vector x0 = sample(scenario.initial_state, rng, RngStream::Channel::Prior, 0);
        const Vector y0 = sys.C * x0 + sample(GaussianLaw{Vector::Zero(sys.ny()), scenario.noise_cov}, rng,
                                              RngStream::Channel::Prior, 1);
        acc += evaluate_value(sol, z_tilde, init_belief(scenario.initial_state, y0, sys));
    }
    return acc / samples;
}

// Reference belief: f_x moments updated with the noiseless average y_0 = C mean(x_0).
inline BeliefState reference_belief(const ScenarioSpec& scenario, const LinearSystem& sys) {
    const Vector y0 = sys.C * moments(scenario.initial_state).mean;
    return init_belief(scenario.initial_state, y0, sys);
}

// ztilde for the nominal LQ problem: the adversary is pinned to the nominal
// law, giving Tr[S_{t+1} Pbar_{t+1}] + Tr[P_{t+1} Sigma_hat_t] along the
// nominal filter path.
inline std::vector<double> lq_z_tilde(const RiccatiSolution& lq, const NominalDistribution& nominal,
                                      const LinearSystem& sys, const SymMatrix& P_bar0) {
    std::vector<double> out;
    SymMatrix P_bar = P_bar0;
    for (int t = 0; t < lq.horizon(); ++t) {
        const auto k = static_cast<std::size_t>(t);
        P_bar = update_cov(predict_cov(P_bar, nominal.cov(t), sys), sys);
        out.push_back((lq.S[k + 1].mat() * P_bar.mat()).trace() + (lq.P[k + 1].mat() * nominal.cov(t).mat()).trace());
    }
    return out;
}

inline double guaranteed_cost(double lambda, int horizon, double theta, double j_lambda) {
    if (!(theta >= 0.0)) throw Error(ErrorCode::Config, "guaranteed_cost: theta must be >= 0");
    return lambda * horizon * theta * theta + j_lambda;
}

struct CostCertificate {
    double j_lambda = 0.0;
    double guaranteed_bound = 0.0;
    double j_lq = 0.0;
    double rho = 0.0;
    double lambda = 0.0;
    double theta = 0.0;
    std::vector<std::string> diagnostics;
};

inline CostCertificate performance_ratio(double lambda, int horizon, double theta, double j_lambda, double j_lq) {
    if (!(j_lq > 0.0)) throw Error(ErrorCode::DegenerateLQ, "performance_ratio: J_LQ = " + std::to_string(j_lq) + " <= 0");
    CostCertificate c;
    c.lambda = lambda;
    c.theta = theta;
    c.j_lambda = j_lambda;
    c.j_lq = j_lq;
    c.guaranteed_bound = guaranteed_cost(lambda, horizon, theta, j_lambda);
    c.rho = c.guaranteed_bound / j_lq;
    if (!(c.rho > 1.0)) c.diagnostics.push_back("rho <= 1: " + std::to_string(c.rho));
    if (!(j_lq <= c.guaranteed_bound)) c.diagnostics.push_back("J_LQ exceeds guaranteed bound");
    return c;
}

// J*_lambda (closed-form expectation over y_0) for a given lambda.
struct PenalizedValue {
    double lambda = 0.0;
    double j_lambda = 0.0;
    double objective = 0.0;  // lambda T theta^2 + J*_lambda
    bool converged = true;
};

inline PenalizedValue penalized_value(const LinearSystem& sys, const CostSpec& cost, const NominalDistribution& nominal,
                                      double theta, const ScenarioSpec& scenario, double lambda,
                                      const WorstCaseOptions& solver = {}) {
    const RiccatiSolution sol = backward_pass(sys, cost, nominal, lambda);
    const SymMatrix P_bar0 = initial_posterior_cov(scenario, sys);
    const WorstCaseSchedule sched = worst_case_schedule(sol, nominal, sys, P_bar0, solver);
    PenalizedValue v;
    v.lambda = lambda;
    v.j_lambda = expected_value(sol, sched.z_tilde(), moments(scenario.initial_state), P_bar0);
    v.objective = guaranteed_cost(lambda, cost.horizon, theta, v.j_lambda);
    v.converged = sched.all_converged();
    return v;
}

inline double lq_value(const LinearSystem& sys, const CostSpec& cost, const NominalDistribution& nominal,
                       const ScenarioSpec& scenario) {
    const RiccatiSolution lq = lq_backward_pass(sys, cost, nominal);
    const SymMatrix P_bar0 = initial_posterior_cov(scenario, sys);
    return expected_value(lq, lq_z_tilde(lq, nominal, sys, P_bar0), moments(scenario.initial_state), P_bar0);
}

struct CalibrationOptions {
    double lambda_max_factor = 1e4;  // lambda_max = factor * lambda_min
    int coarse_points = 41;
    double log_tol = 1e-7;           // golden-section stop on the log-lambda bracket width
    WorstCaseOptions solver;
};

struct CalibrationResult {
    double lambda = 0.0;
    double objective = 0.0;
    double j_lambda = 0.0;
    double lambda_min = 0.0;  // smallest feasible lambda (with safety factor)
    double lambda_max = 0.0;
    bool at_boundary = false;
    int evaluations = 0;
};

// Smallest feasible lambda; the upper bracket is grown geometrically until
// the penalty condition holds.
inline double feasible_lambda_floor(const LinearSystem& sys, const CostSpec& cost) {
    double hi = std::max(1.0, 2.0 * cost.Qf.max_eigenvalue());
    while (!check_penalty(sys, cost, hi).feasible) {
        hi *= 4.0;
        if (hi > 1e15) throw Error(ErrorCode::NoFeasibleLambda, "no lambda up to 1e15 satisfies lambda I > P_t");
    }
    return min_feasible_lambda(sys, cost, 1e-9 * hi, hi);
}

// Minimizes g(lambda) = lambda T theta^2 + J*_lambda over
// [lambda_min, factor * lambda_min]: coarse log grid, then golden-section
// search on log(lambda) between the neighbours of the best grid point.
inline CalibrationResult calibrate_lambda(const LinearSystem& sys, const CostSpec& cost, const NominalDistribution& nominal,
                                          double theta, const ScenarioSpec& scenario, const CalibrationOptions& opts = {}) {
    if (!(theta >= 0.0)) throw Error(ErrorCode::Config, "calibrate_lambda: theta must be >= 0");
    CalibrationResult res;
    res.lambda_min = feasible_lambda_floor(sys, cost);
    res.lambda_max = opts.lambda_max_factor * res.lambda_min;

    const auto g = [&](double log_lambda) {
        ++res.evaluations;
        return penalized_value(sys, cost, nominal, theta, scenario, std::exp(log_lambda), opts.solver);
    };

    const double a = std::log(res.lambda_min);
    const double b = std::log(res.lambda_max);
    const int n = std::max(3, opts.coarse_points);
    std::vector<double> xs(static_cast<std::size_t>(n));
    std::vector<PenalizedValue> vals;
    for (int i = 0; i < n; ++i) {
        xs[static_cast<std::size_t>(i)] = i == n - 1 ? b : a + (b - a) * i / (n - 1);
        vals.push_back(g(xs[static_cast<std::size_t>(i)]));
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < vals.size(); ++i)
        if (vals[i].objective < vals[best].objective) best = i;

    PenalizedValue winner = vals[best];
    if (best > 0 && best + 1 < vals.size()) {
        const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
        double lo = xs[best - 1];
        double hi = xs[best + 1];
        double x1 = hi - phi * (hi - lo);
        double x2 = lo + phi * (hi - lo);
        PenalizedValue f1 = g(x1);
        PenalizedValue f2 = g(x2);
        while (hi - lo > opts.log_tol) {
            if (f1.objective <= f2.objective) {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - phi * (hi - lo);
                f1 = g(x1);
            } else {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + phi * (hi - lo);
                f2 = g(x2);
            }
        }
        for (const auto* cand : {&f1, &f2})
            if (cand->objective < winner.objective) winner = *cand;
    } else {
        res.at_boundary = true;
    }
    res.lambda = winner.lambda;
    res.objective = winner.objective;
    res.j_lambda = winner.j_lambda;
    return res;
}

}  // namespace wdrc
