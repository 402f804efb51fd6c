#pragma once

#include "wdrc/model.hpp"

namespace wdrc {

// Conditional mean and covariance of the state given the information vector.
struct BeliefState {
    Vector mean;
    SymMatrix cov;
};

// Time update: xbar_{t+1|t} = A xbar + B u + w_mean, Pbar_{t+1|t} = A Pbar A' + w_cov.
inline BeliefState predict(const BeliefState& b, const Vector& u, const Vector& w_mean, const SymMatrix& w_cov,
                           const LinearSystem& sys) {
    detail::require_dims(b.mean.size() == sys.nx() && b.cov.dim() == sys.nx(), "predict: belief must be n_x");
    detail::require_dims(u.size() == sys.nu(), "predict: input must be n_u");
    detail::require_dims(w_mean.size() == sys.nx() && w_cov.dim() == sys.nx(), "predict: disturbance moments must be n_x");
    return {sys.A * b.mean + sys.B * u + w_mean, SymMatrix(sys.A * b.cov.mat() * sys.A.transpose() + w_cov.mat())};
}

// Prior covariance only (the part of the time update that does not depend on data).
inline SymMatrix predict_cov(const SymMatrix& cov, const SymMatrix& w_cov, const LinearSystem& sys) {
    return SymMatrix(sys.A * cov.mat() * sys.A.transpose() + w_cov.mat());
}

struct KalmanGain {
    Matrix gain;      // K = G C' (C G C' + M)^{-1}
    Matrix residual;  // I - K C
};

inline KalmanGain kalman_gain(const SymMatrix& prior_cov, const LinearSystem& sys) {
    const Matrix& G = prior_cov.mat();
    const SymMatrix innov(sys.C * G * sys.C.transpose() + sys.M.mat());
    Eigen::LLT<Matrix> llt(innov.mat());
    if (llt.info() != Eigen::Success || !innov.is_pd())
        throw Error(ErrorCode::SingularInnovation, "C Pbar C' + M not positive definite");
    // K' = innov^{-1} C G
    Matrix K = llt.solve(sys.C * G).transpose();
    Matrix IKC = Matrix::Identity(sys.nx(), sys.nx()) - K * sys.C;
    return {std::move(K), std::move(IKC)};
}

// Posterior covariance in Joseph form (I-KC) G (I-KC)' + K M K'.
inline SymMatrix update_cov(const SymMatrix& prior_cov, const LinearSystem& sys) {
    const auto kg = kalman_gain(prior_cov, sys);
    return SymMatrix(kg.residual * prior_cov.mat() * kg.residual.transpose() + kg.gain * sys.M.mat() * kg.gain.transpose());
}

// Measurement update with the innovation-gain form of the mean correction.
inline BeliefState update(const BeliefState& prior, const Vector& y, const LinearSystem& sys) {
    detail::require_dims(prior.mean.size() == sys.nx() && prior.cov.dim() == sys.nx(), "update: belief must be n_x");
    detail::require_dims(y.size() == sys.ny(), "update: observation must be n_y");
    const auto kg = kalman_gain(prior.cov, sys);
    Vector mean = prior.mean + kg.gain * (y - sys.C * prior.mean);
    SymMatrix cov(kg.residual * prior.cov.mat() * kg.residual.transpose() + kg.gain * sys.M.mat() * kg.gain.transpose());
    return {std::move(mean), std::move(cov)};
}

// Initial belief: moments of f_x conditioned on y_0 by one measurement update.
inline BeliefState init_belief(const Distribution& x0, const Vector& y0, const LinearSystem& sys) {
    const MomentPair m = moments(x0);
    return update(BeliefState{m.mean, m.cov}, y0, sys);
}

}  // namespace wdrc
