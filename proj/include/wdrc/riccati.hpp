#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "wdrc/model.hpp"

namespace wdrc {

// Per-stage coefficients of the quadratic value function
//   V_t = E[x' P_t x + xi' S_t xi + 2 r_t' x | I_t] + z_t + sum_{s>=t} ztilde_s
// and the affine policy u_t = K_t xbar_t + L_t.
// lambda == +inf denotes the nominal LQ recursion (no penalty).
struct RiccatiSolution {
    std::vector<SymMatrix> P;  // T+1
    std::vector<SymMatrix> S;  // T+1
    std::vector<Vector> r;     // T+1
    std::vector<double> z;     // T+1
    std::vector<Matrix> K;     // T
    std::vector<Vector> L;     // T
    SymMatrix Phi;
    double lambda = std::numeric_limits<double>::infinity();
    // Smallest eigenvalue of S_t over all stages. Negative values beyond
    // tolerance are flagged here, not clamped.
    double s_min_eigenvalue = 0.0;

    [[nodiscard]] int horizon() const { return static_cast<int>(K.size()); }
    [[nodiscard]] bool is_lq() const { return std::isinf(lambda); }
    [[nodiscard]] bool s_psd_violated() const {
        double scale = 1.0;
        for (const auto& s : S) scale = std::max(scale, s.mat().cwiseAbs().maxCoeff());
        return s_min_eigenvalue < -1e-9 * scale;
    }
};

struct PenaltyFeasibility {
    bool feasible = false;
    double margin = 0.0;  // min_t lambda_min(lambda*I - P_t), t = 1..T
    int worst_stage = 0;
};

namespace detail {

inline Eigen::PartialPivLU<Matrix> factor_checked(const Matrix& m, const char* who) {
    Eigen::PartialPivLU<Matrix> lu(m);
    const double rc = lu.rcond();
    if (!(rc > 1e-14)) throw Error(ErrorCode::SingularMatrix, std::string(who) + ": reciprocal condition " + std::to_string(rc));
    return lu;
}

inline Matrix make_phi(const LinearSystem& sys, const CostSpec& cost, double inv_lambda) {
    const Matrix BRinvBt = sys.B * cost.R.mat().llt().solve(sys.B.transpose());
    return BRinvBt - inv_lambda * Matrix::Identity(sys.nx(), sys.nx());
}

inline double penalty_margin(double lambda, const SymMatrix& P) { return lambda - P.max_eigenvalue(); }

// Shared backward recursion. `lambda` = +inf yields the nominal LQ solution.
inline RiccatiSolution recursion(const LinearSystem& sys, const CostSpec& cost, const NominalDistribution& nominal,
                                 double lambda) {
    sys.validate();
    cost.validate(sys);
    require_dims(nominal.horizon() == cost.horizon, "backward pass: nominal horizon must equal T");
    const bool lq = std::isinf(lambda);
    if (!lq && !(lambda > 0.0)) throw Error(ErrorCode::Config, "backward pass: lambda must be > 0");

    const int T = cost.horizon;
    const auto n = sys.nx();
    const auto uT = static_cast<std::size_t>(T);
    const Matrix I = Matrix::Identity(n, n);
    const Matrix& A = sys.A;
    const auto R_llt = cost.R.mat().llt();

    RiccatiSolution sol;
    sol.lambda = lambda;
    sol.Phi = make_phi(sys, cost, lq ? 0.0 : 1.0 / lambda);
    const Matrix& Phi = sol.Phi.mat();
    sol.P.resize(uT + 1);
    sol.S.resize(uT + 1);
    sol.r.resize(uT + 1);
    sol.z.resize(uT + 1);
    sol.K.resize(uT);
    sol.L.resize(uT);

    sol.P[uT] = cost.Qf;
    sol.S[uT] = SymMatrix::zero(n);
    sol.r[uT] = Vector::Zero(n);
    sol.z[uT] = 0.0;
    if (!lq) {
        const double m = penalty_margin(lambda, sol.P[uT]);
        if (!(m > 0.0)) throw PenaltyTooSmall(T, m);
    }

    for (int t = T - 1; t >= 0; --t) {
        const auto k = static_cast<std::size_t>(t);
        const Matrix& Pn = sol.P[k + 1].mat();
        const Vector& rn = sol.r[k + 1];
        const Vector& w_hat = nominal.mean(t);
        require_dims(w_hat.size() == n && nominal.cov(t).dim() == n, "backward pass: nominal moments must be n_x");

        const auto F = factor_checked(I + Pn * Phi, "I + P_{t+1} Phi");
        const Matrix FinvPA = F.solve(Pn * A);
        const Vector drive = F.solve(rn + Pn * w_hat);

        sol.P[k] = SymMatrix(cost.Q.mat() + A.transpose() * FinvPA);
        sol.S[k] = SymMatrix(cost.Q.mat() + A.transpose() * Pn * A - sol.P[k].mat());
        sol.r[k] = A.transpose() * drive;
        double dz = (2.0 * w_hat - Phi * rn).dot(F.solve(rn)) + w_hat.dot(F.solve(Pn * w_hat));
        if (!lq) dz -= lambda * nominal.cov(t).trace();
        sol.z[k] = sol.z[k + 1] + dz;

        sol.K[k] = -R_llt.solve(sys.B.transpose() * FinvPA);
        sol.L[k] = -R_llt.solve(sys.B.transpose() * drive);

        if (!lq && t >= 1) {
            const double m = penalty_margin(lambda, sol.P[k]);
            if (!(m > 0.0)) throw PenaltyTooSmall(t, m);
        }
    }

    sol.s_min_eigenvalue = 0.0;
    for (const auto& s : sol.S) sol.s_min_eigenvalue = std::min(sol.s_min_eigenvalue, s.min_eigenvalue());
    return sol;
}

}  // namespace detail

// Backward Riccati pass for the penalized minimax problem. Throws
// PenaltyTooSmall when lambda*I - P_t is not PD for some t in 1..T.
inline RiccatiSolution backward_pass(const LinearSystem& sys, const CostSpec& cost, const NominalDistribution& nominal,
                                     double lambda) {
    if (!(lambda > 0.0) || std::isinf(lambda)) throw Error(ErrorCode::Config, "backward_pass: lambda must be finite and > 0");
    return detail::recursion(sys, cost, nominal, lambda);
}

// Certainty-equivalent finite-horizon LQ recursion under the nominal moments.
inline RiccatiSolution lq_backward_pass(const LinearSystem& sys, const CostSpec& cost, const NominalDistribution& nominal) {
    return detail::recursion(sys, cost, nominal, std::numeric_limits<double>::infinity());
}

// Runs only the P recursion and reports the smallest eigenvalue of
// lambda*I - P_t. Infeasibility is reported, never thrown; the recursion
// stops at the first violating stage.
inline PenaltyFeasibility check_penalty(const LinearSystem& sys, const CostSpec& cost, double lambda) {
    const auto n = sys.nx();
    const Matrix I = Matrix::Identity(n, n);
    const Matrix Phi = detail::make_phi(sys, cost, 1.0 / lambda);
    PenaltyFeasibility out;
    SymMatrix P = cost.Qf;
    out.margin = detail::penalty_margin(lambda, P);
    out.worst_stage = cost.horizon;
    if (!(out.margin > 0.0)) return out;
    for (int t = cost.horizon - 1; t >= 1; --t) {
        const auto F = detail::factor_checked(I + P.mat() * Phi, "I + P_{t+1} Phi");
        P = SymMatrix(cost.Q.mat() + sys.A.transpose() * F.solve(P.mat() * sys.A));
        const double m = detail::penalty_margin(lambda, P);
        if (m < out.margin) {
            out.margin = m;
            out.worst_stage = t;
        }
        if (!(m > 0.0)) break;
    }
    out.feasible = out.margin > 0.0;
    return out;
}

inline constexpr double kLambdaSafetyFactor = 1e-3;

// Bisection for the smallest lambda keeping every lambda*I - P_t positive
// definite, to relative tolerance `rel_tol`, returned with the (1 + 1e-3) safety factor applied.
// If `lo` is already feasible, lo * (1 + 1e-3) is returned.
inline double min_feasible_lambda(const LinearSystem& sys, const CostSpec& cost, double lo, double hi,
                                  double rel_tol = 1e-8) {
    if (!(lo > 0.0) || !(hi >= lo)) throw Error(ErrorCode::Config, "min_feasible_lambda: need 0 < lo <= hi");
    if (!check_penalty(sys, cost, hi).feasible)
        throw Error(ErrorCode::NoFeasibleLambda, "min_feasible_lambda: upper bracket " + std::to_string(hi) + " infeasible");
    if (check_penalty(sys, cost, lo).feasible) return lo * (1.0 + kLambdaSafetyFactor);
    while (hi - lo > rel_tol * hi) {
        const double mid = std::sqrt(lo * hi);
        if (check_penalty(sys, cost, mid).feasible) hi = mid;
        else lo = mid;
    }
    return hi * (1.0 + kLambdaSafetyFactor);
}

}  // namespace wdrc
