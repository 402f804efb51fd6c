#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <functional>
#include <limits>
#include <memory>
#include <mutex>
#include <numeric>
#include <optional>
#include <thread>
#include <vector>

#include "wdrc/harness/config.hpp"

namespace wdrc::harness {

struct CostStatistics {
    double mean = 0.0;
    double std_dev = 0.0;  // sample (n - 1) standard deviation; 0 for a single run
    double min = 0.0;
    double max = 0.0;
    std::vector<long> counts;   // per histogram bin, on the pooled edges
    std::vector<double> costs;  // indexed by run
};

inline CostStatistics summarize(std::vector<double> costs) {
    if (costs.empty()) throw Error(ErrorCode::EmptySamples, "summarize: no costs");
    CostStatistics s;
    const auto n = static_cast<double>(costs.size());
    s.mean = std::accumulate(costs.begin(), costs.end(), 0.0) / n;
    double ss = 0.0;
    for (double c : costs) ss += (c - s.mean) * (c - s.mean);
    s.std_dev = costs.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    const auto [lo, hi] = std::minmax_element(costs.begin(), costs.end());
    s.min = *lo;
    s.max = *hi;
    s.costs = std::move(costs);
    return s;
}

// Equal-width edges over [lo, hi]; the last bin is closed on the right.
inline std::vector<double> histogram_edges(double lo, double hi, int bins) {
    std::vector<double> e(static_cast<std::size_t>(bins) + 1);
    for (int i = 0; i <= bins; ++i) e[static_cast<std::size_t>(i)] = i == bins ? hi : lo + (hi - lo) * i / bins;
    return e;
}

inline std::vector<long> histogram_counts(const std::vector<double>& values, const std::vector<double>& edges) {
    const std::size_t bins = edges.size() - 1;
    std::vector<long> counts(bins, 0);
    const double lo = edges.front();
    const double width = edges.back() - lo;
    for (double v : values) {
        std::size_t k = 0;
        if (width > 0.0) {
            const double pos = (v - lo) / width * static_cast<double>(bins);
            k = pos <= 0.0 ? 0 : std::min(bins - 1, static_cast<std::size_t>(pos));
        }
        ++counts[k];
    }
    return counts;
}

// Paired z-scores of LQG minus WDRC: on the per-run cost difference (mean)
// and on the difference of squared deviations (spread). Positive favours WDRC.
struct PairedComparison {
    double mean_z = 0.0;
    double std_z = 0.0;
};

namespace detail {

inline double z_score(const std::vector<double>& d) {
    const auto n = static_cast<double>(d.size());
    if (d.size() < 2) return 0.0;
    const double m = std::accumulate(d.begin(), d.end(), 0.0) / n;
    double ss = 0.0;
    for (double x : d) ss += (x - m) * (x - m);
    const double se = std::sqrt(ss / (n - 1.0) / n);
    if (se == 0.0) return m == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), m);
    return m / se;
}

}  // namespace detail

inline PairedComparison paired_comparison(const CostStatistics& wdrc, const CostStatistics& lqg) {
    wdrc::detail::require_dims(wdrc.costs.size() == lqg.costs.size(), "paired_comparison: run counts differ");
    std::vector<double> d;
    std::vector<double> e;
    for (std::size_t i = 0; i < wdrc.costs.size(); ++i) {
        const double w = wdrc.costs[i];
        const double l = lqg.costs[i];
        d.push_back(l - w);
        e.push_back((l - lqg.mean) * (l - lqg.mean) - (w - wdrc.mean) * (w - wdrc.mean));
    }
    return {detail::z_score(d), detail::z_score(e)};
}

// Independent work items dispatched over a fixed pool; every result lands at
// its own index, so the outcome does not depend on scheduling. The error of
// the lowest failing index is rethrown.
template <typename F>
void parallel_for(std::size_t n, unsigned jobs, F&& body) {
    jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
    std::atomic<std::size_t> next{0};
    std::mutex mu;
    std::size_t failed_at = n;
    std::exception_ptr failure;
    const auto worker = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                body(i);
            } catch (...) {
                const std::lock_guard lock(mu);
                if (i < failed_at) {
                    failed_at = i;
                    failure = std::current_exception();
                }
            }
        }
    };
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned j = 0; j < jobs; ++j) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (failure) std::rethrow_exception(failure);
}

inline unsigned default_jobs() { return std::max(1u, std::thread::hardware_concurrency()); }

// Everything derived before any rollout: nominal estimate, lambda, both
// controllers and the cost certificate.
struct Synthesis {
    NominalDistribution nominal;
    std::optional<CalibrationResult> calibration;
    double lambda = 0.0;
    WdrcMode wdrc;
    LqgMode lqg;
    SymMatrix P_bar0;
    double j_lambda_reference = 0.0;  // V_0 at the reference belief
    double j_lambda_sampled = 0.0;    // Monte-Carlo mean of V_0 over y_0
    double j_lq = 0.0;
    CostCertificate certificate;
};

inline Synthesis synthesize(const ExperimentConfig& cfg) {
    Synthesis s;
    s.nominal = estimate_nominal(draw_nominal_samples(cfg.scenario, cfg.cost.horizon));
    if (cfg.lambda) {
        s.lambda = *cfg.lambda;
        const PenaltyFeasibility f = check_penalty(cfg.plant, cfg.cost, s.lambda);
        if (!f.feasible) throw PenaltyTooSmall(f.worst_stage, f.margin);
    } else {
        s.calibration = calibrate_lambda(cfg.plant, cfg.cost, s.nominal, cfg.theta, cfg.scenario, cfg.calibration);
        s.lambda = s.calibration->lambda;
    }
    s.wdrc = make_wdrc_mode(cfg.plant, cfg.cost, s.nominal, s.lambda, cfg.scenario, cfg.calibration.solver);
    s.lqg = lqg_gains(cfg.plant, cfg.cost, s.nominal);
    s.P_bar0 = initial_posterior_cov(cfg.scenario, cfg.plant);

    const std::vector<double> zt = s.wdrc.schedule->z_tilde();
    const double j_lambda = expected_value(*s.wdrc.solution, zt, moments(cfg.scenario.initial_state), s.P_bar0);
    s.j_lambda_reference = evaluate_value(*s.wdrc.solution, zt, reference_belief(cfg.scenario, cfg.plant));
    s.j_lambda_sampled = sampled_value(*s.wdrc.solution, zt, cfg.scenario, cfg.plant, cfg.value_samples, cfg.scenario.seed);
    s.j_lq = expected_value(*s.lqg.solution, lq_z_tilde(*s.lqg.solution, s.nominal, cfg.plant, s.P_bar0),
                            moments(cfg.scenario.initial_state), s.P_bar0);
    s.certificate = performance_ratio(s.lambda, cfg.cost.horizon, cfg.theta, j_lambda, s.j_lq);
    if (s.wdrc.solution->s_psd_violated())
        s.certificate.diagnostics.push_back("S_t not PSD (min eigenvalue " + std::to_string(s.wdrc.solution->s_min_eigenvalue) + ")");
    if (!s.wdrc.schedule->all_converged())
        s.certificate.diagnostics.push_back("worst-case covariance solver hit max_iter at some stage");
    if (s.calibration && s.calibration->at_boundary)
        s.certificate.diagnostics.push_back("calibrated lambda lies on the search boundary");
    return s;
}

inline std::uint64_t unpaired_lqg_seed(std::uint64_t seed) { return RngStream::splitmix(seed ^ 0x4c5147ULL); }

struct CampaignResult {
    ExperimentConfig config;
    Synthesis synthesis;
    std::optional<CostStatistics> wdrc;
    std::optional<CostStatistics> lqg;
    std::vector<double> edges;
    std::optional<PairedComparison> comparison;  // both controllers, paired mode
};

// Monte-Carlo rollouts of one controller; run i uses RngStream(seed, i).
inline std::vector<double> rollout_costs(const ControllerMode& mode, const ExperimentConfig& cfg, std::uint64_t seed,
                                         unsigned jobs) {
    std::vector<double> costs(static_cast<std::size_t>(cfg.runs));
    parallel_for(costs.size(), jobs, [&](std::size_t i) {
        costs[i] = run_closed_loop(mode, cfg.scenario, cfg.plant, cfg.cost, RngStream(seed, i)).realized_cost;
    });
    return costs;
}

inline CampaignResult run_campaign(const ExperimentConfig& cfg, unsigned jobs = default_jobs()) {
    cfg.validate();
    CampaignResult res;
    res.config = cfg;
    res.synthesis = synthesize(cfg);
    const std::uint64_t seed = cfg.scenario.seed;
    if (cfg.mode != RunMode::Lqg) res.wdrc = summarize(rollout_costs(res.synthesis.wdrc, cfg, seed, jobs));
    if (cfg.mode != RunMode::Wdrc)
        res.lqg = summarize(rollout_costs(res.synthesis.lqg, cfg, cfg.paired ? seed : unpaired_lqg_seed(seed), jobs));

    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const auto* s : {&res.wdrc, &res.lqg}) {
        if (!*s) continue;
        lo = std::min(lo, (*s)->min);
        hi = std::max(hi, (*s)->max);
    }
    res.edges = histogram_edges(lo, hi, cfg.histogram_bins);
    for (auto* s : {&res.wdrc, &res.lqg})
        if (*s) (*s)->counts = histogram_counts((*s)->costs, res.edges);
    if (res.wdrc && res.lqg && cfg.paired) res.comparison = paired_comparison(*res.wdrc, *res.lqg);
    return res;
}

}  // namespace wdrc::harness
