#pragma once

#include <fmt/format.h>

#include <filesystem>
#include <fstream>
#include <string>

#include "wdrc/harness/campaign.hpp"

namespace wdrc::harness {

// Shortest round-trip decimal form; identical doubles always print identically.
inline std::string num(double x) { return fmt::format("{}", x); }

inline void write_file(const std::filesystem::path& path, const std::string& content) {
    std::error_code ec;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw Error(ErrorCode::Io, "cannot create directory '" + path.parent_path().string() + "': " + ec.message());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot open '" + path.string() + "' for writing");
    out << content;
    out.close();
    if (!out) throw Error(ErrorCode::Io, "write failed for '" + path.string() + "'");
}

inline std::string costs_csv(const CampaignResult& r) {
    std::string s = "run,wdrc_cost,lqg_cost\n";
    const std::size_t n = static_cast<std::size_t>(r.config.runs);
    for (std::size_t i = 0; i < n; ++i) {
        s += fmt::format("{},{},{}\n", i, r.wdrc ? num(r.wdrc->costs[i]) : "", r.lqg ? num(r.lqg->costs[i]) : "");
    }
    return s;
}

inline std::string histogram_csv(const CampaignResult& r) {
    std::string s = "bin_lo,bin_hi,wdrc_count,lqg_count\n";
    for (std::size_t k = 0; k + 1 < r.edges.size(); ++k) {
        s += fmt::format("{},{},{},{}\n", num(r.edges[k]), num(r.edges[k + 1]), r.wdrc ? r.wdrc->counts[k] : 0,
                         r.lqg ? r.lqg->counts[k] : 0);
    }
    return s;
}

inline nlohmann::json to_json(const CostStatistics& s) {
    return {{"mean", s.mean}, {"std_dev", s.std_dev}, {"min", s.min}, {"max", s.max},
            {"runs", s.costs.size()}, {"histogram_counts", s.counts}};
}

inline nlohmann::json to_json(const CostCertificate& c) {
    return {{"j_lambda", c.j_lambda}, {"guaranteed_bound", c.guaranteed_bound}, {"j_lq", c.j_lq}, {"rho", c.rho},
            {"lambda", c.lambda}, {"theta", c.theta}, {"diagnostics", c.diagnostics}};
}

inline nlohmann::json synthesis_json(const ExperimentConfig& cfg, const Synthesis& s) {
    nlohmann::json j;
    j["lambda"] = s.lambda;
    j["certificate"] = to_json(s.certificate);
    j["j_lambda"] = {{"expected", s.certificate.j_lambda},
                     {"reference_belief", s.j_lambda_reference},
                     {"sampled", s.j_lambda_sampled},
                     {"value_samples", cfg.value_samples}};
    if (s.calibration) {
        const auto& c = *s.calibration;
        j["calibration"] = {{"lambda", c.lambda},         {"objective", c.objective}, {"lambda_min", c.lambda_min},
                            {"lambda_max", c.lambda_max}, {"at_boundary", c.at_boundary}, {"evaluations", c.evaluations}};
    }
    j["nominal_stage0"] = {{"mean", to_json(s.nominal.mean(0))}, {"cov", to_json(s.nominal.cov(0).mat())}};
    j["riccati"] = {{"s_min_eigenvalue", s.wdrc.solution->s_min_eigenvalue},
                    {"worst_case_converged", s.wdrc.schedule->all_converged()}};
    return j;
}

inline nlohmann::json summary_json(const CampaignResult& r) {
    nlohmann::json j = synthesis_json(r.config, r.synthesis);
    j["config"] = to_json(r.config);
    j["paired"] = r.config.paired;
    j["mode"] = to_string(r.config.mode);
    j["initial_observation"] = "y0 = C x0 + v0 with x0 ~ initial_state, v0 ~ N(0, noise_cov)";
    if (r.wdrc) j["wdrc"] = to_json(*r.wdrc);
    if (r.lqg) j["lqg"] = to_json(*r.lqg);
    j["histogram_edges"] = r.edges;
    if (r.comparison) j["paired_z"] = {{"mean", r.comparison->mean_z}, {"std_dev", r.comparison->std_z}};
    return j;
}

// Full backward-pass output for `synthesize`.
inline nlohmann::json riccati_json(const RiccatiSolution& sol) {
    nlohmann::json stages = nlohmann::json::array();
    for (int t = 0; t <= sol.horizon(); ++t) {
        const auto k = static_cast<std::size_t>(t);
        nlohmann::json s = {{"t", t}, {"P", to_json(sol.P[k].mat())}, {"S", to_json(sol.S[k].mat())},
                            {"r", to_json(sol.r[k])}, {"z", sol.z[k]}};
        if (t < sol.horizon()) {
            s["K"] = to_json(sol.K[k]);
            s["L"] = to_json(sol.L[k]);
        }
        stages.push_back(std::move(s));
    }
    nlohmann::json j = {{"Phi", to_json(sol.Phi.mat())}, {"stages", std::move(stages)}};
    if (std::isfinite(sol.lambda)) j["lambda"] = sol.lambda;
    else j["lambda"] = "inf";
    return j;
}

struct ReportPaths {
    std::filesystem::path costs;
    std::filesystem::path histogram;
    std::filesystem::path summary;

    static ReportPaths in(const std::filesystem::path& dir) {
        return {dir / "costs.csv", dir / "histogram.csv", dir / "summary.json"};
    }
};

inline void emit_reports(const CampaignResult& r, const ReportPaths& paths) {
    write_file(paths.costs, costs_csv(r));
    write_file(paths.histogram, histogram_csv(r));
    write_file(paths.summary, summary_json(r).dump(2) + "\n");
}

}  // namespace wdrc::harness
