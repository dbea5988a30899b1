#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>

namespace garchgof::optim {

struct Options {
    double gradient_tolerance = 1e-8;  ///< on the projected-gradient infinity norm
    /// A stalled line search still counts as converged below this level; numeric
    /// gradients put a floor under the attainable projected-gradient norm.
    double stall_tolerance = 1e-5;
    std::size_t max_iterations = 500;
    double fd_step = 1e-6;  ///< central-difference step is fd_step * (1 + |x_k|)
    double max_initial_step = 0.1;
};

struct Result {
    Eigen::VectorXd x;
    double value = std::numeric_limits<double>::infinity();
    double projected_gradient_norm = std::numeric_limits<double>::infinity();
    std::size_t iterations = 0;
    bool converged = false;
};

/// Central differences, falling back to one-sided differences where the
/// symmetric stencil would leave [lower, upper].
template <class F>
Eigen::VectorXd numeric_gradient(const F& f, const Eigen::VectorXd& x, const Eigen::VectorXd& lower,
                                 const Eigen::VectorXd& upper, double rel_step, double fx) {
    Eigen::VectorXd g(x.size());
    Eigen::VectorXd probe = x;
    for (Eigen::Index k = 0; k < x.size(); ++k) {
        const double step = rel_step * (1.0 + std::abs(x[k]));
        const bool down_ok = x[k] - step >= lower[k];
        const bool up_ok = x[k] + step <= upper[k];
        if (down_ok && up_ok) {
            probe[k] = x[k] + step;
            const double fp = f(probe);
            probe[k] = x[k] - step;
            const double fm = f(probe);
            g[k] = (fp - fm) / (2.0 * step);
        } else if (up_ok) {
            probe[k] = x[k] + step;
            g[k] = (f(probe) - fx) / step;
        } else {
            probe[k] = x[k] - step;
            g[k] = (fx - f(probe)) / step;
        }
        probe[k] = x[k];
    }
    return g;
}

/// Minimizes f over a convex set given by its Euclidean projection, using BFGS
/// directions along the projection arc with Armijo backtracking. Falls back to
/// steepest descent (and resets the curvature model) when the quasi-Newton
/// direction fails to make progress.
///
/// `lower`/`upper` are the coordinate boxes used to keep finite-difference
/// stencils feasible; `project` must map into the feasible set.
template <class F, class Project>
Result minimize_projected_bfgs(const F& f, Eigen::VectorXd x0, const Project& project, const Eigen::VectorXd& lower,
                               const Eigen::VectorXd& upper, const Options& opts = {}) {
    const Eigen::Index dim = x0.size();
    auto safe_f = [&f](const Eigen::VectorXd& x) {
        const double v = f(x);
        return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
    };
    auto gradient = [&](const Eigen::VectorXd& x, double fx) {
        return numeric_gradient(safe_f, x, lower, upper, opts.fd_step, fx);
    };
    auto projected_norm = [&](const Eigen::VectorXd& x, const Eigen::VectorXd& g) {
        return (x - project(Eigen::VectorXd(x - g))).template lpNorm<Eigen::Infinity>();
    };

    Result res;
    res.x = project(std::move(x0));
    res.value = safe_f(res.x);
    if (!std::isfinite(res.value)) return res;
    Eigen::VectorXd g = gradient(res.x, res.value);
    Eigen::MatrixXd hinv = Eigen::MatrixXd::Identity(dim, dim);
    bool fresh_model = true;

    for (res.iterations = 0; res.iterations < opts.max_iterations; ++res.iterations) {
        res.projected_gradient_norm = projected_norm(res.x, g);
        if (res.projected_gradient_norm < opts.gradient_tolerance) {
            res.converged = true;
            return res;
        }

        auto try_direction = [&](Eigen::VectorXd d, Eigen::VectorXd& x_new, double& f_new) {
            const double scale = d.lpNorm<Eigen::Infinity>();
            if (fresh_model && scale > opts.max_initial_step) d *= opts.max_initial_step / scale;
            double t = 1.0;
            for (int backtrack = 0; backtrack < 60; ++backtrack, t *= 0.5) {
                x_new = project(Eigen::VectorXd(res.x + t * d));
                const Eigen::VectorXd s = x_new - res.x;
                if (s.lpNorm<Eigen::Infinity>() == 0.0) return false;
                f_new = safe_f(x_new);
                if (f_new <= res.value + 1e-4 * g.dot(s) && f_new < res.value) return true;
            }
            return false;
        };

        Eigen::VectorXd x_new;
        double f_new = 0.0;
        Eigen::VectorXd d = -hinv * g;
        bool ok = g.dot(d) < 0.0 && try_direction(d, x_new, f_new);
        if (!ok && !fresh_model) {
            hinv.setIdentity();
            fresh_model = true;
            ok = try_direction(-g, x_new, f_new);
        } else if (!ok) {
            ok = try_direction(-g, x_new, f_new);
        }
        if (!ok) {
            res.converged = res.projected_gradient_norm < opts.stall_tolerance;
            return res;
        }

        const Eigen::VectorXd g_new = gradient(x_new, f_new);
        const Eigen::VectorXd s = x_new - res.x;
        const Eigen::VectorXd yv = g_new - g;
        const double sy = s.dot(yv);
        if (sy > 1e-12 * s.norm() * yv.norm()) {
            if (fresh_model) {
                hinv *= sy / yv.squaredNorm();
                fresh_model = false;
            }
            const double rho = 1.0 / sy;
            const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(dim, dim);
            hinv = (eye - rho * s * yv.transpose()) * hinv * (eye - rho * yv * s.transpose()) + rho * s * s.transpose();
        }
        const double improvement = res.value - f_new;
        res.x = x_new;
        res.value = f_new;
        g = g_new;
        if (improvement <= 1e-15 * (1.0 + std::abs(res.value))) {
            res.projected_gradient_norm = projected_norm(res.x, g);
            res.converged = res.projected_gradient_norm < opts.stall_tolerance;
            return res;
        }
    }
    res.projected_gradient_norm = projected_norm(res.x, g);
    res.converged = res.projected_gradient_norm < opts.gradient_tolerance;
    return res;
}

}  // namespace garchgof::optim
