#pragma once

#include <memory>
#include <optional>
#include <variant>
#include <vector>

#include "wdrc/worst_case.hpp"

namespace wdrc {

// Distributionally robust controller: penalized Riccati solution plus the
// worst-case covariance schedule along the (data-independent) filter
// covariance path. The schedule is shared read-only across runs.
struct WdrcMode {
    std::shared_ptr<const RiccatiSolution> solution;
    std::shared_ptr<const WorstCaseSchedule> schedule;  // may be null
    NominalDistribution nominal;
    WorstCaseOptions solver;
};

// Certainty-equivalent LQG baseline; its filter consumes the nominal moments.
struct LqgMode {
    std::shared_ptr<const RiccatiSolution> solution;
    NominalDistribution nominal;
};

using ControllerMode = std::variant<WdrcMode, LqgMode>;

struct SimulationTrace {
    std::vector<Vector> states;        // T+1
    std::vector<Vector> inputs;        // T
    std::vector<Vector> observations;  // T+1
    std::vector<BeliefState> beliefs;  // T+1 posteriors
    std::vector<WorstCaseStage> worst_case;  // T, WDRC only
    double realized_cost = 0.0;
    std::uint64_t seed = 0;
    std::uint64_t run = 0;
};

// u_t = K_t xbar_t + L_t
inline Vector control_input(const Matrix& K, const Vector& L, const BeliefState& belief) {
    detail::require_dims(K.cols() == belief.mean.size() && K.rows() == L.size(), "control_input: dimension mismatch");
    return K * belief.mean + L;
}

inline LqgMode lqg_gains(const LinearSystem& sys, const CostSpec& cost, const NominalDistribution& nominal) {
    return {std::make_shared<const RiccatiSolution>(lq_backward_pass(sys, cost, nominal)), nominal};
}

// Posterior covariance at t = 0; it depends only on f_x's covariance, not on y_0.
inline SymMatrix initial_posterior_cov(const ScenarioSpec& scenario, const LinearSystem& sys) {
    return update_cov(moments(scenario.initial_state).cov, sys);
}

inline WdrcMode make_wdrc_mode(const LinearSystem& sys, const CostSpec& cost, const NominalDistribution& nominal,
                               double lambda, const ScenarioSpec& scenario, const WorstCaseOptions& solver = {}) {
    auto sol = std::make_shared<const RiccatiSolution>(backward_pass(sys, cost, nominal, lambda));
    auto schedule = std::make_shared<const WorstCaseSchedule>(
        worst_case_schedule(*sol, nominal, sys, initial_posterior_cov(scenario, sys), solver));
    return {std::move(sol), std::move(schedule), nominal, solver};
}

// Sum_t (x_t' Q x_t + u_t' R u_t) + x_T' Qf x_T recomputed from a trace.
inline double trajectory_cost(const SimulationTrace& trace, const CostSpec& cost) {
    double c = 0.0;
    for (std::size_t t = 0; t < trace.inputs.size(); ++t) {
        c += trace.states[t].dot(cost.Q.mat() * trace.states[t]) + trace.inputs[t].dot(cost.R.mat() * trace.inputs[t]);
    }
    const Vector& xT = trace.states.back();
    return c + xT.dot(cost.Qf.mat() * xT);
}

namespace detail {

inline bool same_cov(const SymMatrix& a, const SymMatrix& b) {
    return (a.mat() - b.mat()).cwiseAbs().maxCoeff() <= 1e-10 * (1.0 + a.mat().cwiseAbs().maxCoeff());
}

}  // namespace detail

// One closed-loop rollout. The true disturbance always comes from the
// scenario's law; the worst-case (WDRC) or nominal (LQG) moments only drive
// the filter's time update.
inline SimulationTrace run_closed_loop(const ControllerMode& mode, const ScenarioSpec& scenario, const LinearSystem& sys,
                                       const CostSpec& cost, const RngStream& rng) {
    const bool wdrc = std::holds_alternative<WdrcMode>(mode);
    const RiccatiSolution& sol = wdrc ? *std::get<WdrcMode>(mode).solution : *std::get<LqgMode>(mode).solution;
    const NominalDistribution& nominal = wdrc ? std::get<WdrcMode>(mode).nominal : std::get<LqgMode>(mode).nominal;
    const int T = sol.horizon();
    detail::require_dims(T == cost.horizon && nominal.horizon() == T, "run_closed_loop: horizon mismatch");

    SimulationTrace tr;
    tr.seed = rng.seed();
    tr.run = rng.run();
    tr.states.reserve(static_cast<std::size_t>(T) + 1);

    const auto run_id = static_cast<long>(rng.run());
    int stage = 0;
    try {
        Vector x = sample_initial_state(scenario, rng);
        Vector y = sys.C * x + sample_observation_noise(scenario, 0, rng);
        BeliefState belief = init_belief(scenario.initial_state, y, sys);
        tr.states.push_back(x);
        tr.observations.push_back(y);
        tr.beliefs.push_back(belief);

        for (int t = 0; t < T; ++t) {
            stage = t;
            const auto k = static_cast<std::size_t>(t);
            const Vector u = control_input(sol.K[k], sol.L[k], belief);

            Vector w_mean;
            SymMatrix w_cov;
            if (wdrc) {
                const auto& m = std::get<WdrcMode>(mode);
                WorstCaseStage wc;
                if (m.schedule && k < m.schedule->stages.size() && detail::same_cov(m.schedule->posterior[k], belief.cov)) {
                    wc = m.schedule->stages[k];
                } else {
                    wc = solve_worst_case_cov(stage_context(sol, nominal, sys, t, belief.cov), nominal.cov(t), m.solver);
                }
                wc.mean = worst_case_mean(sol.P[k + 1], sol.r[k + 1], belief.mean, u, nominal.mean(t), sol.lambda, sys);
                w_mean = wc.mean;
                w_cov = wc.cov;
                tr.worst_case.push_back(std::move(wc));
            } else {
                w_mean = nominal.mean(t);
                w_cov = nominal.cov(t);
            }

            tr.realized_cost += x.dot(cost.Q.mat() * x) + u.dot(cost.R.mat() * u);
            x = sys.A * x + sys.B * u + sample_disturbance(scenario, t, rng);
            y = sys.C * x + sample_observation_noise(scenario, t + 1, rng);
            belief = update(predict(belief, u, w_mean, w_cov, sys), y, sys);

            tr.inputs.push_back(u);
            tr.states.push_back(x);
            tr.observations.push_back(y);
            tr.beliefs.push_back(belief);
        }
        tr.realized_cost += x.dot(cost.Qf.mat() * x);
    } catch (const StageError&) {
        throw;
    } catch (const Error& e) {
        throw StageError(e, run_id, stage);
    }
    return tr;
}

}  // namespace wdrc
