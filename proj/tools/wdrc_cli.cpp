#include <CLI11.hpp>
#include <fmt/format.h>

#include <iostream>

#include "wdrc/harness/report.hpp"
#include "wdrc/verify/oracles.hpp"

namespace {

using namespace wdrc;
using namespace wdrc::harness;

enum Exit : int { Ok = 0, Failed = 1, ConfigError = 2, SolverError = 3, IoError = 4 };

struct Overrides {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<int> runs;
    std::optional<std::string> out;
    std::optional<std::string> mode;
    unsigned jobs = default_jobs();
};

ExperimentConfig load(const Overrides& o) {
    ExperimentConfig cfg = load_config(o.config);
    if (o.seed) cfg.scenario.seed = *o.seed;
    if (o.runs) cfg.runs = *o.runs;
    if (o.out) cfg.out_dir = *o.out;
    if (o.mode) cfg.mode = parse_run_mode(*o.mode);
    cfg.validate();
    return cfg;
}

int cmd_synthesize(const Overrides& o) {
    const ExperimentConfig cfg = load(o);
    const Synthesis s = synthesize(cfg);
    nlohmann::json j = synthesis_json(cfg, s);
    j["config"] = to_json(cfg);
    j["wdrc_riccati"] = riccati_json(*s.wdrc.solution);
    j["lq_riccati"] = riccati_json(*s.lqg.solution);
    write_file(std::filesystem::path(cfg.out_dir) / "synthesis.json", j.dump(2) + "\n");
    const auto& c = s.certificate;
    fmt::print("lambda = {}\nJ*_lambda = {}\nbound = {}\nJ_LQ = {}\nrho = {}\n", s.lambda, c.j_lambda, c.guaranteed_bound,
               c.j_lq, c.rho);
    for (const auto& d : c.diagnostics) fmt::print("note: {}\n", d);
    return Ok;
}

int cmd_calibrate(const Overrides& o) {
    const ExperimentConfig cfg = load(o);
    const NominalDistribution nominal = estimate_nominal(draw_nominal_samples(cfg.scenario, cfg.cost.horizon));
    const CalibrationResult c = calibrate_lambda(cfg.plant, cfg.cost, nominal, cfg.theta, cfg.scenario, cfg.calibration);
    const nlohmann::json j = {{"lambda", c.lambda},         {"objective", c.objective},     {"j_lambda", c.j_lambda},
                              {"lambda_min", c.lambda_min}, {"lambda_max", c.lambda_max},   {"at_boundary", c.at_boundary},
                              {"evaluations", c.evaluations}, {"config", to_json(cfg)}};
    write_file(std::filesystem::path(cfg.out_dir) / "calibration.json", j.dump(2) + "\n");
    fmt::print("lambda = {}\nobjective = {}\nsearch range = [{}, {}]{}\n", c.lambda, c.objective, c.lambda_min,
               c.lambda_max, c.at_boundary ? " (optimum on boundary)" : "");
    return Ok;
}

void print_stats(const char* name, const std::optional<CostStatistics>& s) {
    if (s) fmt::print("{:<5} mean {:.6g}  std {:.6g}  min {:.6g}  max {:.6g}\n", name, s->mean, s->std_dev, s->min, s->max);
}

int cmd_simulate(const Overrides& o) {
    const ExperimentConfig cfg = load(o);
    const CampaignResult r = run_campaign(cfg, o.jobs);
    emit_reports(r, ReportPaths::in(cfg.out_dir));
    fmt::print("lambda = {:.6g}  bound = {:.6g}  rho = {:.6g}\n", r.synthesis.lambda,
               r.synthesis.certificate.guaranteed_bound, r.synthesis.certificate.rho);
    print_stats("WDRC", r.wdrc);
    print_stats("LQG", r.lqg);
    if (r.comparison) fmt::print("paired z: mean {:.3f}  std {:.3f}\n", r.comparison->mean_z, r.comparison->std_z);
    fmt::print("reports written to {}\n", cfg.out_dir);
    return Ok;
}

int cmd_oracle(std::uint64_t seed) {
    bool ok = true;
    for (const auto& r : verify::run_oracle_suite(seed)) {
        fmt::print("[{}] {} (error {:.3g}, tolerance {:.3g})\n", r.passed ? "PASS" : "FAIL", r.name, r.max_error, r.tolerance);
        ok = ok && r.passed;
    }
    return ok ? Ok : Failed;
}

int exit_code(const Error& e) {
    switch (e.code()) {
        case ErrorCode::Config: return ConfigError;
        case ErrorCode::Io: return IoError;
        default: return SolverError;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Wasserstein distributionally robust LQG control: synthesis, calibration and Monte-Carlo campaigns"};
    app.require_subcommand(1);
    Overrides o;
    std::uint64_t seed = 0;

    const auto add_common = [&](CLI::App* sub, bool campaign) {
        sub->add_option("--config", o.config, "Experiment config (YAML)")->required();
        sub->add_option_function<std::uint64_t>("--seed", [&](const std::uint64_t& s) { o.seed = s; }, "Override scenario seed");
        sub->add_option_function<std::string>("--out", [&](const std::string& s) { o.out = s; }, "Output directory");
        if (campaign) {
            sub->add_option_function<int>("--runs", [&](const int& n) { o.runs = n; }, "Override number of runs");
            sub->add_option_function<std::string>("--mode", [&](const std::string& m) { o.mode = m; }, "wdrc|lqg|both")
                ->check(CLI::IsMember({"wdrc", "lqg", "both"}));
            sub->add_option("--jobs", o.jobs, "Worker threads")->check(CLI::PositiveNumber);
        }
    };
    CLI::App* synth = app.add_subcommand("synthesize", "Backward pass and cost certificate");
    add_common(synth, false);
    CLI::App* sim = app.add_subcommand("simulate", "Full paired Monte-Carlo campaign");
    add_common(sim, true);
    CLI::App* cal = app.add_subcommand("calibrate", "Lambda search only");
    add_common(cal, false);
    CLI::App* orc = app.add_subcommand("oracle", "Brute-force verification suites");
    orc->add_option("--seed", seed, "Instance seed offset");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? Ok : ConfigError;
    }

    try {
        if (*synth) return cmd_synthesize(o);
        if (*sim) return cmd_simulate(o);
        if (*cal) return cmd_calibrate(o);
        return cmd_oracle(seed);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return SolverError;
    }
}
