#pragma once

#include <yaml-cpp/yaml.h>

#include <cstdint>
#include <fstream>
#include "json.hpp"
#include <optional>
#include <sstream>
#include <string>

#include "wdrc/bounds.hpp"

namespace wdrc::harness {

enum class RunMode { Wdrc, Lqg, Both };

inline const char* to_string(RunMode m) {
    switch (m) {
        case RunMode::Wdrc: return "wdrc";
        case RunMode::Lqg: return "lqg";
        case RunMode::Both: return "both";
    }
    return "both";
}

inline RunMode parse_run_mode(const std::string& s) {
    if (s == "wdrc") return RunMode::Wdrc;
    if (s == "lqg") return RunMode::Lqg;
    if (s == "both") return RunMode::Both;
    throw Error(ErrorCode::Config, "mode: expected wdrc|lqg|both, got '" + s + "'");
}

struct ExperimentConfig {
    LinearSystem plant;
    CostSpec cost;
    ScenarioSpec scenario;
    double theta = 0.0;
    std::optional<double> lambda;  // empty = calibrate
    int runs = 1000;
    int histogram_bins = 30;
    bool paired = true;
    RunMode mode = RunMode::Both;
    int value_samples = 10000;  // Monte-Carlo y_0 samples for the sampled J*_lambda
    CalibrationOptions calibration;
    std::string out_dir = "out";

    void validate() const {
        plant.validate();
        cost.validate(plant);
        scenario.validate(plant);
        if (!(theta >= 0.0)) throw Error(ErrorCode::Config, "robustness.theta: must be >= 0");
        if (lambda && !(*lambda > 0.0)) throw Error(ErrorCode::Config, "robustness.lambda: must be > 0 or \"auto\"");
        if (runs < 1) throw Error(ErrorCode::Config, "runs: must be >= 1");
        if (histogram_bins < 1) throw Error(ErrorCode::Config, "histogram_bins: must be >= 1");
        if (value_samples < 1) throw Error(ErrorCode::Config, "value_samples: must be >= 1");
        if (!(calibration.lambda_max_factor > 1.0)) throw Error(ErrorCode::Config, "calibration.lambda_max_factor: must be > 1");
    }
};

namespace detail {

[[noreturn]] inline void fail(const std::string& path, const std::string& what) {
    throw Error(ErrorCode::Config, path + ": " + what);
}

inline YAML::Node child(const YAML::Node& node, const std::string& key, const std::string& path) {
    if (!node.IsMap()) fail(path, "expected a mapping");
    const YAML::Node c = node[key];
    if (!c) fail(path.empty() ? key : path + "." + key, "missing");
    return c;
}

inline std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

inline double as_double(const YAML::Node& n, const std::string& path) {
    try {
        return n.as<double>();
    } catch (const YAML::Exception&) {
        fail(path, "expected a number");
    }
}

inline std::int64_t as_int(const YAML::Node& n, const std::string& path) {
    try {
        return n.as<std::int64_t>();
    } catch (const YAML::Exception&) {
        fail(path, "expected an integer");
    }
}

inline Vector as_vector(const YAML::Node& n, const std::string& path) {
    if (!n.IsSequence() || n.size() == 0) fail(path, "expected a non-empty array");
    Vector v(static_cast<Eigen::Index>(n.size()));
    for (std::size_t i = 0; i < n.size(); ++i) v(static_cast<Eigen::Index>(i)) = as_double(n[i], path + "[" + std::to_string(i) + "]");
    return v;
}

// Row-major nested arrays.
inline Matrix as_matrix(const YAML::Node& n, const std::string& path) {
    if (!n.IsSequence() || n.size() == 0) fail(path, "expected a non-empty array of rows");
    const std::size_t rows = n.size();
    std::size_t cols = 0;
    Matrix m;
    for (std::size_t i = 0; i < rows; ++i) {
        const std::string rp = path + "[" + std::to_string(i) + "]";
        const Vector row = as_vector(n[i], rp);
        if (i == 0) {
            cols = static_cast<std::size_t>(row.size());
            m.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
        } else if (static_cast<std::size_t>(row.size()) != cols) {
            fail(rp, "ragged matrix row");
        }
        m.row(static_cast<Eigen::Index>(i)) = row.transpose();
    }
    return m;
}

inline SymMatrix as_sym(const YAML::Node& n, const std::string& path) {
    const Matrix m = as_matrix(n, path);
    if (m.rows() != m.cols()) fail(path, "expected a square matrix");
    if (!m.isApprox(m.transpose(), 1e-12) && (m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12)
        fail(path, "expected a symmetric matrix");
    return SymMatrix(m);
}

inline Distribution as_distribution(const YAML::Node& n, const std::string& path) {
    const auto type = child(n, "type", path).as<std::string>();
    if (type == "gaussian") {
        return GaussianLaw{as_vector(child(n, "mean", path), join(path, "mean")), as_sym(child(n, "cov", path), join(path, "cov"))};
    }
    if (type == "uniform") {
        return UniformLaw{as_vector(child(n, "lo", path), join(path, "lo")), as_vector(child(n, "hi", path), join(path, "hi"))};
    }
    fail(join(path, "type"), "expected gaussian|uniform, got '" + type + "'");
}

// Re-labels validation failures with the config section they came from.
template <typename F>
void validate_section(const std::string& path, F&& f) {
    try {
        f();
    } catch (const Error& e) {
        throw Error(ErrorCode::Config, path + ": " + e.detail());
    }
}

}  // namespace detail

inline ExperimentConfig parse_config(const YAML::Node& root) {
    using namespace detail;
    ExperimentConfig cfg;
    const YAML::Node plant = child(root, "plant", "");
    cfg.plant.A = as_matrix(child(plant, "A", "plant"), "plant.A");
    cfg.plant.B = as_matrix(child(plant, "B", "plant"), "plant.B");
    cfg.plant.C = as_matrix(child(plant, "C", "plant"), "plant.C");
    cfg.plant.M = as_sym(child(plant, "M", "plant"), "plant.M");
    validate_section("plant", [&] { cfg.plant.validate(); });

    const YAML::Node cost = child(root, "cost", "");
    cfg.cost.Q = as_sym(child(cost, "Q", "cost"), "cost.Q");
    cfg.cost.Qf = as_sym(child(cost, "Qf", "cost"), "cost.Qf");
    cfg.cost.R = as_sym(child(cost, "R", "cost"), "cost.R");
    cfg.cost.horizon = static_cast<int>(as_int(child(cost, "horizon", "cost"), "cost.horizon"));
    validate_section("cost", [&] { cfg.cost.validate(cfg.plant); });

    const YAML::Node rob = child(root, "robustness", "");
    cfg.theta = as_double(child(rob, "theta", "robustness"), "robustness.theta");
    if (const YAML::Node lam = rob["lambda"]; lam && !(lam.IsScalar() && lam.Scalar() == "auto") && !lam.IsNull()) {
        cfg.lambda = as_double(lam, "robustness.lambda");
    }

    const YAML::Node sc = child(root, "scenario", "");
    cfg.scenario.true_disturbance = as_distribution(child(sc, "disturbance", "scenario"), "scenario.disturbance");
    cfg.scenario.initial_state = as_distribution(child(sc, "initial_state", "scenario"), "scenario.initial_state");
    cfg.scenario.noise_cov = sc["noise_cov"] ? as_sym(sc["noise_cov"], "scenario.noise_cov") : cfg.plant.M;
    cfg.scenario.sample_count = static_cast<int>(as_int(child(sc, "nominal_samples", "scenario"), "scenario.nominal_samples"));
    cfg.scenario.seed = static_cast<std::uint64_t>(as_int(child(sc, "seed", "scenario"), "scenario.seed"));
    if (const YAML::Node m = sc["nominal_mode"]) {
        const auto s = m.as<std::string>();
        if (s == "stage_invariant") cfg.scenario.nominal_mode = NominalMode::StageInvariant;
        else if (s == "per_stage") cfg.scenario.nominal_mode = NominalMode::PerStage;
        else fail("scenario.nominal_mode", "expected stage_invariant|per_stage");
    }
    validate_section("scenario", [&] { cfg.scenario.validate(cfg.plant); });

    if (const YAML::Node n = root["runs"]) cfg.runs = static_cast<int>(as_int(n, "runs"));
    if (const YAML::Node n = root["histogram_bins"]) cfg.histogram_bins = static_cast<int>(as_int(n, "histogram_bins"));
    if (const YAML::Node n = root["paired"]) cfg.paired = n.as<bool>();
    if (const YAML::Node n = root["mode"]) cfg.mode = parse_run_mode(n.as<std::string>());
    if (const YAML::Node n = root["value_samples"]) cfg.value_samples = static_cast<int>(as_int(n, "value_samples"));
    if (const YAML::Node cal = root["calibration"]) {
        if (cal["lambda_max_factor"]) cfg.calibration.lambda_max_factor = as_double(cal["lambda_max_factor"], "calibration.lambda_max_factor");
        if (cal["coarse_points"]) cfg.calibration.coarse_points = static_cast<int>(as_int(cal["coarse_points"], "calibration.coarse_points"));
        if (cal["log_tol"]) cfg.calibration.log_tol = as_double(cal["log_tol"], "calibration.log_tol");
    }
    if (const YAML::Node out = root["output"]; out && out["dir"]) cfg.out_dir = out["dir"].as<std::string>();
    cfg.validate();
    return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
    YAML::Node root;
    try {
        root = YAML::LoadFile(path);
    } catch (const YAML::BadFile&) {
        throw Error(ErrorCode::Io, "cannot read config file '" + path + "'");
    } catch (const YAML::Exception& e) {
        throw Error(ErrorCode::Config, path + ": " + e.what());
    }
    return parse_config(root);
}

inline ExperimentConfig load_config_string(const std::string& text) {
    try {
        return parse_config(YAML::Load(text));
    } catch (const YAML::Exception& e) {
        throw Error(ErrorCode::Config, e.what());
    }
}

// ---------------------------------------------------------------------------
// Config echo. JSON is a subset of YAML, so the echo loads back through
// load_config / load_config_string unchanged.

inline nlohmann::json to_json(const Vector& v) {
    nlohmann::json j = nlohmann::json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) j.push_back(v(i));
    return j;
}

inline nlohmann::json to_json(const Matrix& m) {
    nlohmann::json j = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) j.push_back(to_json(Vector(m.row(i).transpose())));
    return j;
}

inline nlohmann::json to_json(const Distribution& d) {
    return std::visit([](const auto& law) -> nlohmann::json {
        if constexpr (std::is_same_v<std::decay_t<decltype(law)>, GaussianLaw>) {
            return {{"type", "gaussian"}, {"mean", to_json(law.mean)}, {"cov", to_json(law.cov.mat())}};
        } else {
            return {{"type", "uniform"}, {"lo", to_json(law.lo)}, {"hi", to_json(law.hi)}};
        }
    }, d);
}

inline nlohmann::json to_json(const ExperimentConfig& c) {
    nlohmann::json j;
    j["plant"] = {{"A", to_json(c.plant.A)}, {"B", to_json(c.plant.B)}, {"C", to_json(c.plant.C)}, {"M", to_json(c.plant.M.mat())}};
    j["cost"] = {{"Q", to_json(c.cost.Q.mat())}, {"Qf", to_json(c.cost.Qf.mat())}, {"R", to_json(c.cost.R.mat())},
                 {"horizon", c.cost.horizon}};
    j["robustness"] = {{"theta", c.theta}};
    if (c.lambda) j["robustness"]["lambda"] = *c.lambda;
    else j["robustness"]["lambda"] = "auto";
    j["scenario"] = {{"disturbance", to_json(c.scenario.true_disturbance)},
                     {"initial_state", to_json(c.scenario.initial_state)},
                     {"noise_cov", to_json(c.scenario.noise_cov.mat())},
                     {"nominal_samples", c.scenario.sample_count},
                     {"nominal_mode", c.scenario.nominal_mode == NominalMode::StageInvariant ? "stage_invariant" : "per_stage"},
                     {"seed", c.scenario.seed}};
    j["runs"] = c.runs;
    j["histogram_bins"] = c.histogram_bins;
    j["paired"] = c.paired;
    j["mode"] = to_string(c.mode);
    j["value_samples"] = c.value_samples;
    j["calibration"] = {{"lambda_max_factor", c.calibration.lambda_max_factor},
                        {"coarse_points", c.calibration.coarse_points},
                        {"log_tol", c.calibration.log_tol}};
    j["output"] = {{"dir", c.out_dir}};
    return j;
}

}  // namespace wdrc::harness
