#pragma once

#include <functional>
#include <limits>
#include <vector>

#include "wdrc/estimator.hpp"
#include "wdrc/riccati.hpp"

namespace wdrc {

// Adversary's per-stage choice: mean from the closed form, covariance from
// the concave maximization, z_tilde its optimal value.
struct WorstCaseStage {
    Vector mean;
    SymMatrix cov;
    double z_tilde = 0.0;
    int iterations = 0;
    bool converged = false;
};

// Data of the covariance maximization at stage t.
struct CovObjectiveContext {
    SymMatrix S_next;     // S_{t+1}
    SymMatrix P_next;     // P_{t+1}
    double lambda = 1.0;
    SymMatrix Sigma_hat;  // nominal covariance at stage t
    SymMatrix P_bar;      // posterior state covariance at stage t
    const LinearSystem* sys = nullptr;

    [[nodiscard]] const LinearSystem& system() const { return *sys; }
};

// wbar* = (lambda I - P_{t+1})^{-1} (r_{t+1} + P_{t+1} (A xbar + B u*) + lambda w_hat).
// `predicted` is A xbar + B u*.
inline Vector worst_case_mean(const SymMatrix& P_next, const Vector& r_next, const Vector& predicted,
                              const Vector& w_hat, double lambda) {
    const auto n = P_next.dim();
    detail::require_dims(r_next.size() == n && predicted.size() == n && w_hat.size() == n,
                         "worst_case_mean: vectors must be n_x");
    const Matrix D = lambda * Matrix::Identity(n, n) - P_next.mat();
    Eigen::LLT<Matrix> llt(D);
    if (llt.info() != Eigen::Success)
        throw Error(ErrorCode::SingularMatrix, "worst_case_mean: lambda I - P_{t+1} not positive definite");
    return llt.solve(r_next + P_next.mat() * predicted + lambda * w_hat);
}

inline Vector worst_case_mean(const SymMatrix& P_next, const Vector& r_next, const Vector& x_bar, const Vector& u_star,
                              const Vector& w_hat, double lambda, const LinearSystem& sys) {
    return worst_case_mean(P_next, r_next, Vector(sys.A * x_bar + sys.B * u_star), w_hat, lambda);
}

namespace detail {

// Tr[(X^{1/2} Y X^{1/2})^{1/2}] for PSD X, Y.
inline double fidelity_trace(const SymMatrix& X, const SymMatrix& Y) {
    const SymMatrix rx = psd_sqrt(X);
    Eigen::SelfAdjointEigenSolver<Matrix> es(SymMatrix(rx.mat() * Y.mat() * rx.mat()).mat(), Eigen::EigenvaluesOnly);
    return es.eigenvalues().unaryExpr([](double v) { return std::sqrt(std::max(v, 0.0)); }).sum();
}

inline void check_context(const CovObjectiveContext& ctx, const SymMatrix& Sigma) {
    const auto n = ctx.system().nx();
    require_dims(Sigma.dim() == n && ctx.S_next.dim() == n && ctx.P_next.dim() == n && ctx.Sigma_hat.dim() == n &&
                     ctx.P_bar.dim() == n,
                 "worst-case covariance: context matrices must be n_x x n_x");
}

}  // namespace detail

// Tr[S_{t+1} Pbar_{t+1}(Sigma)] + Tr[(P_{t+1} - lambda I) Sigma]
//   + 2 lambda Tr[(Sigma^{1/2} Sigma_hat Sigma^{1/2})^{1/2}]
inline double cov_objective(const SymMatrix& Sigma, const CovObjectiveContext& ctx) {
    detail::check_context(ctx, Sigma);
    if (!Sigma.is_psd()) throw Error(ErrorCode::NotPSD, "cov_objective: Sigma not PSD");
    const LinearSystem& sys = ctx.system();
    const SymMatrix posterior = update_cov(predict_cov(ctx.P_bar, Sigma, sys), sys);
    const Matrix lin = ctx.P_next.mat() - ctx.lambda * Matrix::Identity(sys.nx(), sys.nx());
    return (ctx.S_next.mat() * posterior.mat()).trace() + (lin * Sigma.mat()).trace() +
           2.0 * ctx.lambda * detail::fidelity_trace(Sigma, ctx.Sigma_hat);
}

// Gradient of cov_objective with respect to Sigma (Sigma strictly PD).
inline SymMatrix cov_gradient(const SymMatrix& Sigma, const CovObjectiveContext& ctx) {
    detail::check_context(ctx, Sigma);
    Eigen::SelfAdjointEigenSolver<Matrix> es(Sigma.mat());
    if (es.info() != Eigen::Success || !(es.eigenvalues()(0) > 0.0))
        throw Error(ErrorCode::NotPD, "cov_gradient: Sigma must be positive definite");
    const LinearSystem& sys = ctx.system();
    const auto n = sys.nx();
    const Matrix& V = es.eigenvectors();
    const Vector sq = es.eigenvalues().cwiseSqrt();
    const Matrix root = V * sq.asDiagonal() * V.transpose();
    const Matrix inv_root = V * sq.cwiseInverse().asDiagonal() * V.transpose();
    const SymMatrix middle = psd_sqrt(SymMatrix(root * ctx.Sigma_hat.mat() * root));
    const Matrix transport = inv_root * middle.mat() * inv_root;

    const auto kg = kalman_gain(predict_cov(ctx.P_bar, Sigma, sys), sys);
    const Matrix filter_term = kg.residual.transpose() * ctx.S_next.mat() * kg.residual;
    return SymMatrix(ctx.P_next.mat() - ctx.lambda * Matrix::Identity(n, n) + ctx.lambda * transport + filter_term);
}

struct WorstCaseOptions {
    double tol_rel = 1e-7;      // stationarity: ||G(Sigma)||_F < tol_rel * (1 + |f|)
    int max_iter = 5000;
    double initial_step = 1.0;
    double backtrack = 0.5;
    double armijo = 1e-4;
    // Optional per-iteration hook: (iteration, objective, residual, step).
    std::function<void(int, double, double, double)> trace;
};

namespace detail {

// Projection onto {X : X >= floor I}.
inline SymMatrix project_floor(const SymMatrix& X, double floor) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(X.mat());
    const Vector d = es.eigenvalues().cwiseMax(floor);
    return SymMatrix(es.eigenvectors() * d.asDiagonal() * es.eigenvectors().transpose());
}

inline double inner(const Matrix& a, const Matrix& b) { return (a.array() * b.array()).sum(); }

}  // namespace detail

// Maximizes cov_objective over Sigma >= 0 by projected gradient ascent with
// Armijo backtracking. Iterates are kept PD by an eigenvalue floor
// delta = 1e-10 (1 + Tr[Sigma_hat]).
inline WorstCaseStage solve_worst_case_cov(const CovObjectiveContext& ctx, const SymMatrix& x0,
                                           const WorstCaseOptions& opts = {}) {
    detail::check_context(ctx, x0);
    const auto n = ctx.system().nx();
    {
        const double margin = ctx.lambda - ctx.P_next.max_eigenvalue();
        if (!(margin > 0.0)) throw PenaltyTooSmall(-1, margin);
    }
    if (!ctx.P_bar.is_psd()) throw Error(ErrorCode::NotPSD, "solve_worst_case_cov: Pbar not PSD");
    if (!ctx.Sigma_hat.is_psd()) throw Error(ErrorCode::NotPSD, "solve_worst_case_cov: Sigma_hat not PSD");

    const double floor = 1e-10 * (1.0 + std::max(0.0, ctx.Sigma_hat.trace()));
    const double blowup = 1e12 * (1.0 + ctx.Sigma_hat.trace() + ctx.P_bar.trace());

    WorstCaseStage out;
    SymMatrix X = detail::project_floor(x0, floor);
    double f = cov_objective(X, ctx);
    // Last accepted step lengths for the plain and the scaled direction.
    double step_plain = opts.initial_step;
    double step_scaled = opts.initial_step;

    struct Trial {
        bool accepted = false;
        SymMatrix X;
        double f = -std::numeric_limits<double>::infinity();
        double alpha = 0.0;
    };

    // Backtracking along `dir` from X. Armijo on the projected step; once
    // objective differences drop below evaluation noise, a step is accepted if
    // the directional derivative at the trial point is still positive.
    const auto line_search = [&](const Matrix& g, const Matrix& dir, double alpha, double cap) {
        Trial best;
        const double noise = 1e-13 * (1.0 + std::abs(f));
        alpha = std::min(cap, alpha);
        for (int bt = 0; bt < 200; ++bt, alpha *= opts.backtrack) {
            SymMatrix Xn = detail::project_floor(SymMatrix(X.mat() + alpha * dir), floor);
            const double fn = cov_objective(Xn, ctx);
            const Matrix dX = Xn.mat() - X.mat();
            if (!std::isfinite(fn)) continue;
            const bool armijo = fn >= f + opts.armijo * detail::inner(g, dX);
            const bool flat = !armijo && std::abs(fn - f) <= noise && dX.norm() > 0.0 &&
                              detail::inner(cov_gradient(Xn, ctx).mat(), dX) > 0.0;
            if (armijo || flat) {
                best = {true, std::move(Xn), fn, alpha};
                break;
            }
        }
        return best;
    };

    for (int it = 0;; ++it) {
        const SymMatrix g = cov_gradient(X, ctx);
        const SymMatrix probe = detail::project_floor(SymMatrix(X.mat() + g.mat()), floor);
        const double residual = (probe.mat() - X.mat()).norm();
        if (opts.trace) opts.trace(it, f, residual, step_plain);
        out.iterations = it;
        if (residual < opts.tol_rel * (1.0 + std::abs(f))) {
            out.converged = true;
            break;
        }
        if (it >= opts.max_iter) break;

        // Plain projected gradient step, and the step along Sigma g Sigma,
        // which rescales each eigen-direction by its variance squared and
        // stays well conditioned when the optimum has a large spread of
        // eigenvalues. The better of the two is kept.
        const Trial plain = line_search(g.mat(), g.mat(), 2.0 * step_plain, opts.initial_step);
        const Matrix scaled_dir = SymMatrix(X.mat() * g.mat() * X.mat()).mat();
        const Trial scaled = line_search(g.mat(), scaled_dir, 2.0 * step_scaled, 1e12);
        if (plain.accepted) step_plain = plain.alpha;
        if (scaled.accepted) step_scaled = scaled.alpha;
        const Trial& pick = (scaled.accepted && (!plain.accepted || scaled.f > plain.f)) ? scaled : plain;
        if (!pick.accepted) break;  // no ascent possible at machine precision
        if (pick.f < f - 1e-13 * (1.0 + std::abs(f)))
            throw Error(ErrorCode::Diverged, "solve_worst_case_cov: objective decreased on an accepted step");
        if (pick.X.trace() > blowup) throw Error(ErrorCode::Diverged, "solve_worst_case_cov: iterates grow without bound");
        X = pick.X;
        f = pick.f;
    }
    out.cov = X;
    out.z_tilde = f;
    out.mean = Vector::Zero(n);
    return out;
}

// Stage-wise worst-case covariances along the filter covariance path
// Pbar_0 -> Pbar_1 -> ... (independent of realized data).
struct WorstCaseSchedule {
    std::vector<WorstCaseStage> stages;  // T
    std::vector<SymMatrix> posterior;    // Pbar_0 .. Pbar_T
    std::vector<SymMatrix> prior;        // Pbar_{t+1|t}, t = 0..T-1

    [[nodiscard]] std::vector<double> z_tilde() const {
        std::vector<double> z;
        z.reserve(stages.size());
        for (const auto& s : stages) z.push_back(s.z_tilde);
        return z;
    }
    [[nodiscard]] bool all_converged() const {
        for (const auto& s : stages)
            if (!s.converged) return false;
        return true;
    }
};

inline CovObjectiveContext stage_context(const RiccatiSolution& sol, const NominalDistribution& nominal,
                                         const LinearSystem& sys, int t, const SymMatrix& P_bar) {
    const auto k = static_cast<std::size_t>(t);
    return {sol.S[k + 1], sol.P[k + 1], sol.lambda, nominal.cov(t), P_bar, &sys};
}

inline WorstCaseSchedule worst_case_schedule(const RiccatiSolution& sol, const NominalDistribution& nominal,
                                             const LinearSystem& sys, const SymMatrix& P_bar0,
                                             const WorstCaseOptions& opts = {}) {
    WorstCaseSchedule out;
    const int T = sol.horizon();
    out.posterior.push_back(P_bar0);
    for (int t = 0; t < T; ++t) {
        const auto ctx = stage_context(sol, nominal, sys, t, out.posterior.back());
        WorstCaseStage stage;
        try {
            stage = solve_worst_case_cov(ctx, nominal.cov(t), opts);
        } catch (const PenaltyTooSmall& e) {
            throw PenaltyTooSmall(t + 1, e.margin());
        }
        out.prior.push_back(predict_cov(out.posterior.back(), stage.cov, sys));
        out.posterior.push_back(update_cov(out.prior.back(), sys));
        out.stages.push_back(std::move(stage));
    }
    return out;
}

}  // namespace wdrc
