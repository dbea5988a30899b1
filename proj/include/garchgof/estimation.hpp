#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <utility>
#include <string>
#include <vector>

#include "garchgof/errordist.hpp"
#include "garchgof/errors.hpp"
#include "garchgof/linalg.hpp"
#include "garchgof/models.hpp"
#include "garchgof/optim.hpp"

namespace garchgof {

inline constexpr std::size_t kMinFitLength = 50;

/// Gaussian quasi-log-likelihood sum_i [ -log(h_i)/2 - eps_i^2 / (2 h_i) ].
inline double gaussian_quasi_loglik(const FilteredPath& path) {
    return -0.5 * (path.h.array().log() + path.eps.array().square() / path.h.array()).sum();
}

namespace detail {

/// Sequential mean and variance. Vectorized reductions over unaligned storage
/// would make the sum order depend on the buffer address.
inline std::pair<double, double> mean_variance(std::span<const double> y) {
    double mean = 0.0;
    for (double v : y) mean += v;
    mean /= static_cast<double>(y.size());
    double var = 0.0;
    for (double v : y) var += (v - mean) * (v - mean);
    return {mean, var / static_cast<double>(y.size())};
}

}  // namespace detail

inline double gaussian_quasi_loglik(std::span<const double> y, const ModelParams& params) {
    return gaussian_quasi_loglik(filter(y, params));
}

/// Method-of-moments starting point: alpha0 = 0.1 var(y), alpha_j = 0.1 / p1,
/// beta_j = 0.7 / p2, a = lag-1 autocorrelation, b = 0; then projected into the space.
inline ModelParams moment_seed(std::span<const double> y, const ModelSpec& spec, const ParameterSpace& space = {}) {
    const auto n = static_cast<Index>(y.size());
    const auto [mean, var] = detail::mean_variance(y);
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(spec.dim());
    if (spec.location_dim() >= 1 && var > 0.0) {
        double c1 = 0.0;
        for (std::size_t i = 1; i < y.size(); ++i) c1 += (y[i] - mean) * (y[i - 1] - mean);
        theta[0] = c1 / (static_cast<double>(n) * var);
    }
    theta[spec.alpha0_index()] = 0.1 * var;
    for (int j = 1; j <= spec.p1; ++j) theta[spec.alpha_index(j)] = 0.1 / spec.p1;
    for (int j = 1; j <= spec.p2; ++j) theta[spec.beta_index(j)] = 0.7 / spec.p2;
    return {spec, project_to_space(spec, std::move(theta), space)};
}

struct QmleOptions {
    ParameterSpace space{};
    optim::Options optimizer{};
};

struct QmleResult {
    ModelParams params;
    double loglik = 0.0;
    bool converged = false;
    std::size_t iterations = 0;
    double projected_gradient_norm = 0.0;
};

namespace detail {

inline void check_fit_input(std::span<const double> y) {
    detail::check_series(y, kMinFitLength);
    const double var = mean_variance(y).second;
    if (!(var > 0.0)) throw EstimationError("degenerate series: zero sample variance");
}

inline std::pair<Eigen::VectorXd, Eigen::VectorXd> box_of(const ModelSpec& spec, const ParameterSpace& space) {
    Eigen::VectorXd lo(spec.dim()), hi(spec.dim());
    for (Index k = 0; k < spec.location_dim(); ++k) {
        lo[k] = -space.location_bound;
        hi[k] = space.location_bound;
    }
    lo[spec.alpha0_index()] = space.alpha0_lower;
    hi[spec.alpha0_index()] = space.alpha0_upper;
    for (Index k = spec.alpha0_index() + 1; k < spec.dim(); ++k) {
        lo[k] = space.coef_lower;
        hi[k] = space.coef_upper;
    }
    return {lo, hi};
}

}  // namespace detail

/// Gaussian quasi-MLE over the compact parameter space by projected
/// quasi-Newton with numeric gradients. Non-convergence is reported through
/// `converged`, not thrown.
inline QmleResult gaussian_qmle(std::span<const double> y, const ModelSpec& spec,
                                const std::optional<ModelParams>& init = std::nullopt, const QmleOptions& opts = {}) {
    detail::check_fit_input(y);
    const ModelParams start = init ? *init : moment_seed(y, spec, opts.space);
    if (!(start.spec() == spec)) throw InputError("initial parameters do not match the model");
    start.validate(opts.space);

    const double n = static_cast<double>(y.size());
    auto objective = [&](const Eigen::VectorXd& theta) {
        try {
            return -gaussian_quasi_loglik(y, ModelParams(spec, theta)) / n;
        } catch (const Error&) {
            return std::numeric_limits<double>::infinity();
        }
    };
    auto project = [&](Eigen::VectorXd theta) { return project_to_space(spec, std::move(theta), opts.space); };
    const auto [lo, hi] = detail::box_of(spec, opts.space);
    const auto res = optim::minimize_projected_bfgs(objective, start.theta(), project, lo, hi, opts.optimizer);
    if (!std::isfinite(res.value)) throw EstimationError("quasi-likelihood is not finite at the starting point");
    return {ModelParams(spec, res.x), -res.value * n, res.converged, res.iterations, res.projected_gradient_norm};
}

/// Sample information n^{-1} sum_i W_i B W_i' with B = diag(b1 I_q, b2 I_r).
/// Throws SingularMatrixError when its condition number exceeds 1e12.
inline Eigen::MatrixXd information_matrix(const WBlocks& w, const FisherConstants& fc) {
    const Index n = w.size();
    const Index q = w.location_dim();
    const Index r = w.scale_dim();
    Eigen::MatrixXd info = Eigen::MatrixXd::Zero(q + r, q + r);
    // Column 1 of W_i is (w11_i, 0), column 2 is (w12_i, w22_i).
    Eigen::MatrixXd col2(n, q + r);
    col2 << w.w12, w.w22;
    if (q > 0) info.topLeftCorner(q, q).noalias() += fc.b1 * w.w11.transpose() * w.w11;
    info.noalias() += fc.b2 * col2.transpose() * col2;
    info /= static_cast<double>(n);
    info = 0.5 * (info + info.transpose()).eval();
    linalg::require_well_conditioned(info, "information matrix");
    return info;
}

template <NullDistribution D>
Eigen::MatrixXd information_matrix(const WBlocks& w, const D& f0) {
    return information_matrix(w, f0.fisher_constants());
}

/// n^{-1} sum_i W_i (psi0(eta_i), phi0(eta_i))'. Minus the mean score of the
/// criterion -log(h)/2 + log f0(eta).
template <NullDistribution D>
Eigen::VectorXd mean_weighted_score(const FilteredPath& path, const WBlocks& w, const D& f0) {
    const Index n = path.size();
    const Index q = w.location_dim();
    const Index r = w.scale_dim();
    Eigen::VectorXd psi(n), phi(n);
    for (Index i = 0; i < n; ++i) {
        psi[i] = f0.psi0(path.eta[i]);
        phi[i] = f0.phi0(path.eta[i]);
    }
    Eigen::VectorXd s(q + r);
    if (q > 0) s.head(q) = w.w11.transpose() * psi + w.w12.transpose() * phi;
    s.tail(r) = w.w22.transpose() * phi;
    return s / static_cast<double>(n);
}

/// The scoring increment -info^{-1} score.
inline Eigen::VectorXd scoring_step(const Eigen::MatrixXd& info, const Eigen::VectorXd& mean_score) {
    return -linalg::SpdSolver(info).solve(mean_score);
}

struct OneStepResult {
    ModelParams params;
    Eigen::VectorXd raw_step;
    bool projected = false;  ///< the raw update left the space and was projected back
};

/// One scoring iteration from theta_tilde using the F0 scores:
///   theta_hat = theta_tilde - I(theta_tilde)^{-1} n^{-1} sum_i W_i (psi0, phi0)'
/// projected back into the parameter space.
template <NullDistribution D>
OneStepResult one_step_update(std::span<const double> y, const ModelParams& theta_tilde, const D& f0,
                              const ParameterSpace& space = {}) {
    const FilteredPath path = gradients(y, theta_tilde);
    const WBlocks w = w_blocks(path);
    const Eigen::MatrixXd info = information_matrix(w, f0);
    const Eigen::VectorXd step = scoring_step(info, mean_weighted_score(path, w, f0));
    const Eigen::VectorXd raw = theta_tilde.theta() + step;
    Eigen::VectorXd theta_hat = project_to_space(theta_tilde.spec(), raw, space);
    ModelParams out(theta_tilde.spec(), theta_hat);
    const bool projected = (theta_hat - raw).lpNorm<Eigen::Infinity>() > 0.0 || !out.inside(space);
    return {std::move(out), step, projected};
}

/// 3 alpha^2 + 2 alpha beta + beta^2 for the (1,1) GARCH terms.
inline double fourth_moment_index(const ModelParams& params) {
    const double a = params.alpha(1);
    const double b = params.spec().p2 >= 1 ? params.beta(1) : 0.0;
    return 3.0 * a * a + 2.0 * a * b + b * b;
}

struct FitOptions {
    QmleOptions qmle{};
};

struct FitResult {
    ModelParams theta_tilde;      ///< quasi-MLE
    ModelParams theta_hat;        ///< one-step estimator
    Eigen::MatrixXd info;         ///< information matrix at theta_hat
    Eigen::VectorXd std_errors;   ///< sqrt(diag(info^{-1}) / n)
    double loglik = 0.0;          ///< Gaussian quasi-log-likelihood at theta_hat
    bool converged = false;
    std::size_t iterations = 0;
    bool projected = false;
    double fourth_moment = 0.0;
    std::vector<std::string> warnings;
};

/// Quasi-MLE followed by the one-step update under F0.
template <NullDistribution D>
FitResult fit(std::span<const double> y, const ModelSpec& spec, const D& f0, const FitOptions& opts = {}) {
    const QmleResult qmle = gaussian_qmle(y, spec, std::nullopt, opts.qmle);
    OneStepResult step = one_step_update(y, qmle.params, f0, opts.qmle.space);
    const FilteredPath path = gradients(y, step.params);
    Eigen::MatrixXd info = information_matrix(w_blocks(path), f0);
    const Eigen::VectorXd var = linalg::SpdSolver(info).inverse().diagonal() / static_cast<double>(y.size());

    FitResult out{qmle.params, step.params, std::move(info), var.cwiseMax(0.0).cwiseSqrt(),
                  gaussian_quasi_loglik(path), qmle.converged, qmle.iterations, step.projected,
                  fourth_moment_index(step.params), {}};
    if (!qmle.converged)
        out.warnings.push_back("quasi-MLE did not converge (projected gradient norm " +
                               std::to_string(qmle.projected_gradient_norm) + ")");
    if (step.projected) out.warnings.push_back("one-step update left the parameter space and was projected back");
    if (out.fourth_moment >= 1.0)
        out.warnings.push_back("fourth-moment condition 3a^2 + 2ab + b^2 < 1 fails (value " +
                               std::to_string(out.fourth_moment) + ")");
    return out;
}

}  // namespace garchgof
