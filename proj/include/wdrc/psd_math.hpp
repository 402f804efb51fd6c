#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "wdrc/errors.hpp"

namespace wdrc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Symmetric matrix. Construction symmetrizes the input as (X + X^T)/2, so
// entries(i, j) == entries(j, i) holds bit-exactly afterwards.
class SymMatrix {
public:
    SymMatrix() : m_(Matrix::Zero(1, 1)) {}

    SymMatrix(const Matrix& m) : m_(symmetrize(m)) {}  // NOLINT(google-explicit-constructor)

    template <typename Derived>
    SymMatrix(const Eigen::MatrixBase<Derived>& m)  // NOLINT(google-explicit-constructor)
        : m_(symmetrize(Matrix(m))) {}

    static SymMatrix zero(Eigen::Index n) { return SymMatrix(Matrix::Zero(n, n)); }
    static SymMatrix identity(Eigen::Index n) { return SymMatrix(Matrix::Identity(n, n)); }
    static SymMatrix diag(const Vector& d) { return SymMatrix(Matrix(d.asDiagonal())); }

    [[nodiscard]] const Matrix& mat() const noexcept { return m_; }
    operator const Matrix&() const noexcept { return m_; }  // NOLINT(google-explicit-constructor)

    [[nodiscard]] Eigen::Index dim() const noexcept { return m_.rows(); }
    [[nodiscard]] double operator()(Eigen::Index i, Eigen::Index j) const { return m_(i, j); }
    [[nodiscard]] double trace() const { return m_.trace(); }

    // PSD tolerance scaled by the diagonal magnitude.
    [[nodiscard]] double psd_tol() const { return 1e-9 * (1.0 + m_.diagonal().cwiseAbs().maxCoeff()); }

    [[nodiscard]] double min_eigenvalue() const {
        return Eigen::SelfAdjointEigenSolver<Matrix>(m_, Eigen::EigenvaluesOnly).eigenvalues()(0);
    }
    [[nodiscard]] double max_eigenvalue() const {
        auto ev = Eigen::SelfAdjointEigenSolver<Matrix>(m_, Eigen::EigenvaluesOnly).eigenvalues();
        return ev(ev.size() - 1);
    }
    [[nodiscard]] bool is_psd() const { return min_eigenvalue() >= -psd_tol(); }
    [[nodiscard]] bool is_pd() const { return min_eigenvalue() > psd_tol(); }

private:
    static Matrix symmetrize(const Matrix& m) {
        detail::require_dims(m.rows() == m.cols() && m.rows() >= 1, "SymMatrix requires a non-empty square matrix");
        return 0.5 * (m + m.transpose());
    }

    Matrix m_;
};

struct MomentPair {
    Vector mean;
    SymMatrix cov;
};

namespace detail {

inline Eigen::SelfAdjointEigenSolver<Matrix> checked_eig(const SymMatrix& m, const char* who) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(m.mat());
    if (es.info() != Eigen::Success) throw Error(ErrorCode::NotPSD, std::string(who) + ": eigendecomposition failed");
    if (es.eigenvalues()(0) < -m.psd_tol()) {
        throw Error(ErrorCode::NotPSD, std::string(who) + ": min eigenvalue " + std::to_string(es.eigenvalues()(0)));
    }
    return es;
}

// V f(D) V^T with eigenvalues first clamped to >= 0.
template <typename F>
Matrix spectral_map(const Eigen::SelfAdjointEigenSolver<Matrix>& es, F f) {
    Vector d = es.eigenvalues().unaryExpr([&](double x) { return f(std::max(x, 0.0)); });
    return es.eigenvectors() * d.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace detail

// Unique PSD square root. Eigenvalues within tol_psd of zero are clamped.
inline SymMatrix psd_sqrt(const SymMatrix& m) {
    auto es = detail::checked_eig(m, "psd_sqrt");
    return detail::spectral_map(es, [](double x) { return std::sqrt(x); });
}

// Squared Bures distance Tr[a + b - 2 (a^{1/2} b a^{1/2})^{1/2}], clamped at 0.
inline double bures_sq(const SymMatrix& a, const SymMatrix& b) {
    detail::require_dims(a.dim() == b.dim(), "bures_sq: dimension mismatch");
    detail::checked_eig(b, "bures_sq");
    const SymMatrix ra = psd_sqrt(a);
    const SymMatrix inner(ra.mat() * b.mat() * ra.mat());
    // inner is PSD up to round-off; clamp instead of rejecting.
    Eigen::SelfAdjointEigenSolver<Matrix> es(inner.mat(), Eigen::EigenvaluesOnly);
    const double cross = es.eigenvalues().unaryExpr([](double x) { return std::sqrt(std::max(x, 0.0)); }).sum();
    return std::max(0.0, a.trace() + b.trace() - 2.0 * cross);
}

// Squared Gelbrich distance: ||mean gap||^2 + B^2(cov_p, cov_q). Lower bound on W_2^2.
inline double gelbrich_dist_sq(const MomentPair& p, const MomentPair& q) {
    detail::require_dims(p.mean.size() == q.mean.size() && p.cov.dim() == q.cov.dim() &&
                             p.mean.size() == p.cov.dim(),
                         "gelbrich_dist_sq: dimension mismatch");
    return (p.mean - q.mean).squaredNorm() + bures_sq(p.cov, q.cov);
}

}  // namespace wdrc
