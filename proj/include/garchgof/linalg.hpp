#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <string>

#include "garchgof/errors.hpp"

namespace garchgof::linalg {

inline constexpr double kMaxCondition = 1e12;

/// Condition number of a symmetric matrix from its eigenvalues; +inf if it is
/// not positive definite.
inline double condition_number(const Eigen::MatrixXd& sym) {
    if (sym.size() == 0) return 1.0;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym, Eigen::EigenvaluesOnly);
    const double lo = eig.eigenvalues().minCoeff();
    const double hi = eig.eigenvalues().maxCoeff();
    if (!(lo > 0.0)) return std::numeric_limits<double>::infinity();
    return hi / lo;
}

/// Throws SingularMatrixError when cond(sym) exceeds kMaxCondition.
inline void require_well_conditioned(const Eigen::MatrixXd& sym, const char* what) {
    const double cond = condition_number(sym);
    if (!(cond <= kMaxCondition))
        throw SingularMatrixError(std::string(what) + " is singular (condition number " + std::to_string(cond) + ")");
}

/// Cholesky solve of a symmetric positive definite system; on failure retries
/// once with jitter 1e-10 * trace / dim added to the diagonal.
class SpdSolver {
public:
    explicit SpdSolver(const Eigen::MatrixXd& sym) : llt_(sym) {
        if (llt_.info() != Eigen::Success) {
            const double jitter = 1e-10 * sym.trace() / static_cast<double>(sym.rows());
            llt_.compute(sym + jitter * Eigen::MatrixXd::Identity(sym.rows(), sym.cols()));
            jittered_ = true;
            if (llt_.info() != Eigen::Success) throw SingularMatrixError("symmetric factorization failed");
        }
    }

    [[nodiscard]] Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const { return llt_.solve(rhs); }
    [[nodiscard]] Eigen::MatrixXd inverse() const {
        return llt_.solve(Eigen::MatrixXd::Identity(llt_.rows(), llt_.cols()));
    }
    [[nodiscard]] bool jittered() const noexcept { return jittered_; }

private:
    Eigen::LLT<Eigen::MatrixXd> llt_;
    bool jittered_ = false;
};

}  // namespace garchgof::linalg
