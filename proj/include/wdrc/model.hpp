#pragma once

#include <boost/random/mersenne_twister.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_real_distribution.hpp>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "wdrc/psd_math.hpp"

namespace wdrc {

// x_{t+1} = A x_t + B u_t + w_t,  y_t = C x_t + v_t,  v_t ~ N(0, M).
struct LinearSystem {
    Matrix A;
    Matrix B;
    Matrix C;
    SymMatrix M;

    [[nodiscard]] Eigen::Index nx() const { return A.rows(); }
    [[nodiscard]] Eigen::Index nu() const { return B.cols(); }
    [[nodiscard]] Eigen::Index ny() const { return C.rows(); }

    void validate() const {
        detail::require_dims(A.rows() == A.cols() && A.rows() >= 1, "LinearSystem: A must be square");
        detail::require_dims(B.rows() == A.rows() && B.cols() >= 1, "LinearSystem: B rows must equal n_x");
        detail::require_dims(C.cols() == A.rows() && C.rows() >= 1, "LinearSystem: C cols must equal n_x");
        detail::require_dims(M.dim() == C.rows(), "LinearSystem: M must be n_y x n_y");
        if (!M.is_psd()) throw Error(ErrorCode::NotPSD, "LinearSystem: M not PSD");
    }
};

struct CostSpec {
    SymMatrix Q;
    SymMatrix Qf;
    SymMatrix R;
    int horizon = 1;

    void validate(const LinearSystem& sys) const {
        detail::require_dims(Q.dim() == sys.nx() && Qf.dim() == sys.nx(), "CostSpec: Q, Qf must be n_x x n_x");
        detail::require_dims(R.dim() == sys.nu(), "CostSpec: R must be n_u x n_u");
        if (horizon < 1) throw Error(ErrorCode::Config, "CostSpec: horizon must be >= 1");
        if (!Q.is_psd()) throw Error(ErrorCode::NotPSD, "CostSpec: Q not PSD");
        if (!Qf.is_psd()) throw Error(ErrorCode::NotPSD, "CostSpec: Qf not PSD");
        if (!R.is_pd()) throw Error(ErrorCode::NotPD, "CostSpec: R not PD");
    }
};

struct RobustnessParams {
    double lambda = 1.0;
    double theta = 0.0;

    void validate() const {
        if (!(lambda > 0.0)) throw Error(ErrorCode::Config, "RobustnessParams: lambda must be > 0");
        if (!(theta >= 0.0)) throw Error(ErrorCode::Config, "RobustnessParams: theta must be >= 0");
    }
};

// Per-stage nominal moments (w_hat_t, Sigma_hat_t), t = 0..T-1.
struct NominalDistribution {
    std::vector<MomentPair> stages;

    [[nodiscard]] int horizon() const { return static_cast<int>(stages.size()); }
    [[nodiscard]] const Vector& mean(int t) const { return stages.at(static_cast<std::size_t>(t)).mean; }
    [[nodiscard]] const SymMatrix& cov(int t) const { return stages.at(static_cast<std::size_t>(t)).cov; }

    static NominalDistribution constant(const MomentPair& m, int horizon) {
        return {std::vector<MomentPair>(static_cast<std::size_t>(horizon), m)};
    }
};

struct GaussianLaw {
    Vector mean;
    SymMatrix cov;
};

// Independent uniform coordinates on [lo_i, hi_i]; lo_i == hi_i is a point mass.
struct UniformLaw {
    Vector lo;
    Vector hi;
};

using Distribution = std::variant<GaussianLaw, UniformLaw>;

inline Eigen::Index dim(const Distribution& d) {
    return std::visit([](const auto& law) -> Eigen::Index {
        if constexpr (std::is_same_v<std::decay_t<decltype(law)>, GaussianLaw>) return law.mean.size();
        else return law.lo.size();
    }, d);
}

// First two moments; the uniform law yields (lo+hi)/2 and diag((hi-lo)^2/12).
inline MomentPair moments(const Distribution& d) {
    return std::visit([](const auto& law) -> MomentPair {
        if constexpr (std::is_same_v<std::decay_t<decltype(law)>, GaussianLaw>) {
            return {law.mean, law.cov};
        } else {
            const Vector width = law.hi - law.lo;
            return {0.5 * (law.lo + law.hi), SymMatrix::diag(width.array().square() / 12.0)};
        }
    }, d);
}

inline void validate(const Distribution& d, const std::string& where) {
    std::visit([&](const auto& law) {
        if constexpr (std::is_same_v<std::decay_t<decltype(law)>, GaussianLaw>) {
            detail::require_dims(law.mean.size() == law.cov.dim(), where + ": gaussian mean/cov size mismatch");
            if (!law.cov.is_psd()) throw Error(ErrorCode::NotPSD, where + ": gaussian cov not PSD");
        } else {
            detail::require_dims(law.lo.size() == law.hi.size() && law.lo.size() >= 1,
                                 where + ": uniform lo/hi size mismatch");
            if ((law.lo.array() > law.hi.array()).any())
                throw Error(ErrorCode::Config, where + ": uniform requires lo <= hi");
        }
    }, d);
}

enum class NominalMode { StageInvariant, PerStage };

struct ScenarioSpec {
    Distribution true_disturbance;
    Distribution initial_state;
    SymMatrix noise_cov;
    int sample_count = 5;
    std::uint64_t seed = 0;
    NominalMode nominal_mode = NominalMode::StageInvariant;

    void validate(const LinearSystem& sys) const {
        wdrc::validate(true_disturbance, "scenario.disturbance");
        wdrc::validate(initial_state, "scenario.initial_state");
        detail::require_dims(dim(true_disturbance) == sys.nx(), "scenario.disturbance: dimension must be n_x");
        detail::require_dims(dim(initial_state) == sys.nx(), "scenario.initial_state: dimension must be n_x");
        detail::require_dims(noise_cov.dim() == sys.ny(), "scenario.noise_cov: dimension must be n_y");
        if (!noise_cov.is_psd()) throw Error(ErrorCode::NotPSD, "scenario.noise_cov not PSD");
        if (sample_count < 1) throw Error(ErrorCode::Config, "scenario.nominal_samples must be >= 1");
    }
};

// Empirical mean and 1/N covariance per stage.
inline NominalDistribution estimate_nominal(const std::vector<std::vector<Vector>>& samples) {
    if (samples.empty()) throw Error(ErrorCode::EmptySamples, "estimate_nominal: no stages");
    NominalDistribution out;
    out.stages.reserve(samples.size());
    for (const auto& stage : samples) {
        if (stage.empty()) throw Error(ErrorCode::EmptySamples, "estimate_nominal: stage without samples");
        const auto n = stage.front().size();
        Vector mean = Vector::Zero(n);
        for (const auto& w : stage) {
            detail::require_dims(w.size() == n, "estimate_nominal: inconsistent sample length");
            mean += w;
        }
        mean /= static_cast<double>(stage.size());
        Matrix cov = Matrix::Zero(n, n);
        for (const auto& w : stage) cov += (w - mean) * (w - mean).transpose();
        cov /= static_cast<double>(stage.size());
        out.stages.push_back({mean, SymMatrix(cov)});
    }
    return out;
}

// Counter-based stream splitting. Every draw is a pure function of
// (seed, run, channel, stage), so runs can execute in any order.
class RngStream {
public:
    enum class Channel : std::uint64_t { InitialState = 1, Disturbance = 2, Observation = 3, Nominal = 4, Prior = 5 };

    RngStream(std::uint64_t seed, std::uint64_t run) : seed_(seed), run_(run) {}

    [[nodiscard]] std::uint64_t seed() const noexcept { return seed_; }
    [[nodiscard]] std::uint64_t run() const noexcept { return run_; }

    [[nodiscard]] boost::random::mt19937_64 engine(Channel channel, std::uint64_t stage) const {
        std::uint64_t k = splitmix(seed_);
        k = splitmix(k ^ run_);
        k = splitmix(k ^ static_cast<std::uint64_t>(channel));
        k = splitmix(k ^ stage);
        return boost::random::mt19937_64(k);
    }

    static std::uint64_t splitmix(std::uint64_t x) {
        x += 0x9e3779b97f4a7c15ULL;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }

private:
    std::uint64_t seed_;
    std::uint64_t run_;
};

namespace detail {

template <typename Engine>
Vector draw(const Distribution& d, Engine& eng) {
    return std::visit([&](const auto& law) -> Vector {
        if constexpr (std::is_same_v<std::decay_t<decltype(law)>, GaussianLaw>) {
            boost::random::normal_distribution<double> normal(0.0, 1.0);
            Vector z(law.mean.size());
            for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = normal(eng);
            return law.mean + psd_sqrt(law.cov).mat() * z;
        } else {
            Vector x(law.lo.size());
            for (Eigen::Index i = 0; i < x.size(); ++i) {
                if (law.lo(i) == law.hi(i)) {
                    x(i) = law.lo(i);
                } else {
                    boost::random::uniform_real_distribution<double> u(law.lo(i), law.hi(i));
                    x(i) = u(eng);
                }
            }
            return x;
        }
    }, d);
}

}  // namespace detail

inline Vector sample(const Distribution& d, const RngStream& rng, RngStream::Channel channel, std::uint64_t stage) {
    auto eng = rng.engine(channel, stage);
    return detail::draw(d, eng);
}

inline Vector sample_disturbance(const ScenarioSpec& spec, int t, const RngStream& rng) {
    return sample(spec.true_disturbance, rng, RngStream::Channel::Disturbance, static_cast<std::uint64_t>(t));
}

inline Vector sample_observation_noise(const ScenarioSpec& spec, int t, const RngStream& rng) {
    return sample(GaussianLaw{Vector::Zero(spec.noise_cov.dim()), spec.noise_cov}, rng,
                  RngStream::Channel::Observation, static_cast<std::uint64_t>(t));
}

inline Vector sample_initial_state(const ScenarioSpec& spec, const RngStream& rng) {
    return sample(spec.initial_state, rng, RngStream::Channel::InitialState, 0);
}

// Draws the N nominal-estimation samples per stage from the true law. In
// stage-invariant mode a single sample set is reused for all T stages.
inline std::vector<std::vector<Vector>> draw_nominal_samples(const ScenarioSpec& spec, int horizon) {
    const RngStream rng(spec.seed, ~std::uint64_t{0});
    const int stages = spec.nominal_mode == NominalMode::StageInvariant ? 1 : horizon;
    std::vector<std::vector<Vector>> sets(static_cast<std::size_t>(stages));
    for (int t = 0; t < stages; ++t) {
        auto eng = rng.engine(RngStream::Channel::Nominal, static_cast<std::uint64_t>(t));
        for (int i = 0; i < spec.sample_count; ++i) sets[static_cast<std::size_t>(t)].push_back(detail::draw(spec.true_disturbance, eng));
    }
    if (stages == 1) sets.assign(static_cast<std::size_t>(horizon), sets.front());
    return sets;
}

}  // namespace wdrc
