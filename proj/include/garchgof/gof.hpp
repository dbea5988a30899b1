#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <vector>

#include "garchgof/errordist.hpp"
#include "garchgof/errors.hpp"
#include "garchgof/estimation.hpp"
#include "garchgof/linalg.hpp"
#include "garchgof/models.hpp"
#include "garchgof/parallel.hpp"

namespace garchgof::gof {

/// K_n(x) evaluated at every jump point of the residual empirical process and
/// at the left limit just before it.
struct ProcessEval {
    std::vector<double> xs;      ///< nondecreasing; each jump point appears twice
    std::vector<bool> left;      ///< true for the left-limit entry
    Eigen::MatrixXd K;           ///< one row per entry of xs, r columns
    Eigen::MatrixXd ihat;        ///< (1/4n) sum W22 W22'
    double T = 0.0;              ///< sup_x K' ihat^{-1} K
    double argmax = 0.0;
};

struct KnResult {
    double T = 0.0;
    double argmax = 0.0;
};

namespace detail {

inline std::vector<Index> argsort(std::span<const double> v) {
    std::vector<Index> order(v.size());
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return v[a] < v[b]; });
    return order;
}

inline void check_weights(std::span<const double> eta, const Eigen::MatrixXd& w22) {
    if (eta.empty()) throw InputError("empty residual vector");
    if (static_cast<Index>(eta.size()) != w22.rows()) throw InputError("residuals and weights differ in length");
    if (w22.cols() < 1) throw InputError("weight dimension must be at least 1");
}

/// Sorted residuals with running weight sums, for O(log n) evaluation of
/// sum_i w_i I(eta_i <= x) (or < x).
class WeightedStep {
public:
    WeightedStep(std::span<const double> eta, const Eigen::MatrixXd& w) : sorted_(eta.size()) {
        const auto order = argsort(eta);
        prefix_.setZero(static_cast<Index>(eta.size()) + 1, w.cols());
        for (std::size_t k = 0; k < order.size(); ++k) {
            sorted_[k] = eta[order[k]];
            prefix_.row(static_cast<Index>(k) + 1) = prefix_.row(static_cast<Index>(k)) + w.row(order[k]);
        }
    }

    /// sum of weights with eta_i <= x (strict = false) or eta_i < x (strict = true).
    [[nodiscard]] Eigen::RowVectorXd at(double x, bool strict) const {
        const auto it = strict ? std::lower_bound(sorted_.begin(), sorted_.end(), x)
                               : std::upper_bound(sorted_.begin(), sorted_.end(), x);
        return prefix_.row(it - sorted_.begin());
    }

    [[nodiscard]] Eigen::RowVectorXd total() const { return prefix_.row(prefix_.rows() - 1); }
    [[nodiscard]] const std::vector<double>& sorted() const noexcept { return sorted_; }

private:
    std::vector<double> sorted_;
    Eigen::MatrixXd prefix_;
};

}  // namespace detail

/// Î_n = (1/4n) sum_i W22_i W22_i'. Throws SingularMatrixError when the
/// condition number exceeds 1e12.
inline Eigen::MatrixXd ihat_n(const Eigen::MatrixXd& w22) {
    const auto n = static_cast<double>(w22.rows());
    Eigen::MatrixXd m = w22.transpose() * w22 / (4.0 * n);
    m = 0.5 * (m + m.transpose()).eval();
    linalg::require_well_conditioned(m, "Ihat_n");
    return m;
}

/// K_n(x) = (1 / 2 sqrt(n)) sum_i W22_i [I(eta_i <= x) - F0(x)] at every jump
/// point and its left limit, by exact prefix summation over the sorted residuals.
/// Fills K only; see kn_statistic for T.
template <NullDistribution D>
ProcessEval k_process(std::span<const double> eta, const Eigen::MatrixXd& w22, const D& f0) {
    detail::check_weights(eta, w22);
    const auto n = static_cast<Index>(eta.size());
    const Index r = w22.cols();
    const auto order = detail::argsort(eta);
    const Eigen::RowVectorXd total = w22.colwise().sum();
    const double scale = 0.5 / std::sqrt(static_cast<double>(n));

    ProcessEval out;
    out.xs.reserve(2 * static_cast<std::size_t>(n));
    out.left.reserve(2 * static_cast<std::size_t>(n));
    std::vector<Eigen::RowVectorXd> rows;
    rows.reserve(2 * static_cast<std::size_t>(n));
    Eigen::RowVectorXd below = Eigen::RowVectorXd::Zero(r);
    for (Index k = 0; k < n;) {
        const double x = eta[static_cast<std::size_t>(order[k])];
        const double F = f0.cdf(x);
        out.xs.push_back(x);
        out.left.push_back(true);
        rows.push_back(scale * (below - F * total));
        // All residuals tied at x jump together.
        while (k < n && eta[static_cast<std::size_t>(order[k])] == x) below += w22.row(order[k++]);
        out.xs.push_back(x);
        out.left.push_back(false);
        rows.push_back(scale * (below - F * total));
    }
    out.K.resize(static_cast<Index>(rows.size()), r);
    for (std::size_t j = 0; j < rows.size(); ++j) out.K.row(static_cast<Index>(j)) = rows[j];
    return out;
}

/// Evaluates K' Î^{-1} K over a precomputed process and stores its sup as T.
inline void attach_statistic(ProcessEval& pe, const Eigen::MatrixXd& w22) {
    pe.ihat = ihat_n(w22);
    const linalg::SpdSolver solver(pe.ihat);
    const Eigen::MatrixXd inv = solver.inverse();
    double best = -1.0;
    for (Index j = 0; j < pe.K.rows(); ++j) {
        const Eigen::RowVectorXd k = pe.K.row(j);
        const double q = (k * inv * k.transpose())(0, 0);
        if (q > best) {
            best = q;
            pe.argmax = pe.xs[static_cast<std::size_t>(j)];
        }
    }
    pe.T = std::max(best, 0.0);
}

/// T = sup_x K_n(x)' Î_n^{-1} K_n(x). On each gap between jumps K is
/// affine in F0(x) and the quadratic form is convex in it, so the supremum is
/// attained at a jump point or at a left limit.
template <NullDistribution D>
KnResult kn_statistic(std::span<const double> eta, const Eigen::MatrixXd& w22, const D& f0) {
    ProcessEval pe = k_process(eta, w22, f0);
    attach_statistic(pe, w22);
    return {pe.T, pe.argmax};
}

template <NullDistribution D>
KnResult kn_statistic(const FilteredPath& path, const WBlocks& w, const D& f0) {
    return kn_statistic(std::span<const double>(path.eta.data(), static_cast<std::size_t>(path.size())), w.w22, f0);
}

// ---------------------------------------------------------------------------
// Drift-corrected approximation of K_n at an estimated parameter.

/// sup_x || K_n(x, theta_hat) - [K_n(x, theta) - x f0(x) / (4 b2 sqrt(n)) sum_i W22_i(theta) phi0(eta_i(theta))] ||
///
/// Evaluated at every jump point (and left limit) of both processes plus a
/// uniform grid of `grid_points` over the null family's grid range.
template <NullDistribution D>
double drift_corrected_discrepancy(std::span<const double> eta_hat, const Eigen::MatrixXd& w22_hat,
                                   std::span<const double> eta_true, const Eigen::MatrixXd& w22_true, const D& f0,
                                   std::size_t grid_points = 2000) {
    detail::check_weights(eta_hat, w22_hat);
    detail::check_weights(eta_true, w22_true);
    const auto n = static_cast<double>(eta_true.size());
    const detail::WeightedStep step_hat(eta_hat, w22_hat);
    const detail::WeightedStep step_true(eta_true, w22_true);
    const Eigen::RowVectorXd total_hat = step_hat.total();
    const Eigen::RowVectorXd total_true = step_true.total();
    Eigen::RowVectorXd drift = Eigen::RowVectorXd::Zero(w22_true.cols());
    for (std::size_t i = 0; i < eta_true.size(); ++i)
        drift += w22_true.row(static_cast<Index>(i)) * f0.phi0(eta_true[i]);
    const double scale = 0.5 / std::sqrt(n);
    const double b2 = f0.fisher_constants().b2;

    double sup = 0.0;
    auto visit = [&](double x, bool strict) {
        const double F = f0.cdf(x);
        const Eigen::RowVectorXd k_hat = scale * (step_hat.at(x, strict) - F * total_hat);
        const Eigen::RowVectorXd k_true = scale * (step_true.at(x, strict) - F * total_true);
        const Eigen::RowVectorXd corr = (x * f0.pdf(x) / (4.0 * b2 * std::sqrt(n))) * drift;
        sup = std::max(sup, (k_hat - (k_true - corr)).norm());
    };
    for (double x : step_hat.sorted()) {
        visit(x, true);
        visit(x, false);
    }
    for (double x : step_true.sorted()) {
        visit(x, true);
        visit(x, false);
    }
    const Interval range = f0.grid_range();
    for (std::size_t g = 0; g < grid_points; ++g) {
        const double x = range.lo + range.width() * static_cast<double>(g) / static_cast<double>(grid_points - 1);
        visit(x, false);
    }
    return sup;
}

// ---------------------------------------------------------------------------
// Uniform expansion of the perturbed weighted empirical process.

/// One array (eta_ni, gamma_ni, tau_ni, xi_ni), i = 1..n.
struct ExpansionInstance {
    std::vector<double> eta;
    std::vector<double> gamma;
    std::vector<double> tau;
    std::vector<double> xi;
};

/// sup_x |U~_n(x) - U*_n(x)| with
///   U~_n(x) = n^{-1/2} sum gamma_i [I(eta_i <= x + x tau_i + xi_i) - H(x + x tau_i + xi_i)]
///   U*_n(x) = n^{-1/2} sum gamma_i [I(eta_i <= x) - H(x)]
/// evaluated at every jump point of either process and at its left limit.
/// Requires tau_i > -1 so that each perturbed indicator switches on at
/// x = (eta_i - xi_i) / (1 + tau_i).
template <class Cdf>
double expansion_discrepancy(const ExpansionInstance& inst, const Cdf& H) {
    const std::size_t n = inst.eta.size();
    if (n == 0) throw InputError("empty expansion instance");
    if (inst.gamma.size() != n || inst.tau.size() != n || inst.xi.size() != n)
        throw InputError("expansion instance arrays differ in length");
    std::vector<double> z(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!(inst.tau[i] > -1.0)) throw InputError("tau must exceed -1");
        z[i] = (inst.eta[i] - inst.xi[i]) / (1.0 + inst.tau[i]);
    }
    const Eigen::Map<const Eigen::VectorXd> gamma(inst.gamma.data(), static_cast<Index>(n));
    const Eigen::MatrixXd g = gamma;
    const detail::WeightedStep perturbed(z, g);
    const detail::WeightedStep plain(inst.eta, g);
    const double gamma_sum = std::accumulate(inst.gamma.begin(), inst.gamma.end(), 0.0);

    const bool uniform = std::all_of(inst.tau.begin(), inst.tau.end(), [&](double t) { return t == inst.tau[0]; }) &&
                         std::all_of(inst.xi.begin(), inst.xi.end(), [&](double v) { return v == inst.xi[0]; });
    auto smooth_part = [&](double x) {
        if (uniform) return gamma_sum * (H(x + x * inst.tau[0] + inst.xi[0]) - H(x));
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += inst.gamma[i] * (H(x + x * inst.tau[i] + inst.xi[i]) - H(x));
        return s;
    };

    const double scale = 1.0 / std::sqrt(static_cast<double>(n));
    double sup = 0.0;
    auto visit = [&](double x) {
        const double smooth = smooth_part(x);
        for (bool strict : {true, false}) {
            const double jumps = perturbed.at(x, strict)[0] - plain.at(x, strict)[0];
            sup = std::max(sup, std::abs(scale * (jumps - smooth)));
        }
    };
    for (double x : perturbed.sorted()) visit(x);
    for (double x : plain.sorted()) visit(x);
    return sup;
}

struct ExpansionSummary {
    std::size_t n = 0;
    std::vector<double> discrepancies;  ///< one per replication, in replication order
    double median = 0.0;
    double q90 = 0.0;
};

namespace detail {

inline double order_quantile(std::vector<double> v, double p) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const auto idx = static_cast<std::size_t>(std::floor(p * static_cast<double>(v.size() - 1) + 0.5));
    return v[std::min(idx, v.size() - 1)];
}

inline double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

}  // namespace detail

/// Generator of one instance of size n from a replication-owned stream.
using InstanceGenerator = std::function<ExpansionInstance(std::size_t n, Rng& rng)>;

struct ExpansionConfig {
    std::vector<std::size_t> sample_sizes;
    std::size_t reps = 100;
    std::uint64_t seed = 1;
    unsigned workers = 1;
    InstanceGenerator generator;
    std::function<double(double)> cdf;  ///< H
};

/// Replicates expansion_discrepancy over sample sizes; replication k at size n
/// draws from replication_rng(seed + n, k).
inline std::vector<ExpansionSummary> expansion_harness(const ExpansionConfig& cfg) {
    if (!cfg.generator || !cfg.cdf) throw InputError("expansion harness needs a generator and a cdf");
    std::vector<ExpansionSummary> out;
    for (std::size_t n : cfg.sample_sizes) {
        ExpansionSummary s;
        s.n = n;
        s.discrepancies.resize(cfg.reps);
        parallel_for(cfg.reps, cfg.workers, [&](std::size_t k) {
            Rng rng = replication_rng(cfg.seed + n, k);
            s.discrepancies[k] = expansion_discrepancy(cfg.generator(n, rng), cfg.cdf);
        });
        s.median = detail::median(s.discrepancies);
        s.q90 = detail::order_quantile(s.discrepancies, 0.9);
        out.push_back(std::move(s));
    }
    return out;
}

/// i.i.d. eta from `sampler`, gamma = 1, tau = 0, xi = shift / sqrt(n).
template <class Sampler>
InstanceGenerator location_shift_instances(Sampler sampler, double shift) {
    return [sampler, shift](std::size_t n, Rng& rng) {
        ExpansionInstance inst;
        inst.eta.resize(n);
        for (auto& e : inst.eta) e = sampler.draw(rng);
        inst.gamma.assign(n, 1.0);
        inst.tau.assign(n, 0.0);
        inst.xi.assign(n, shift / std::sqrt(static_cast<double>(n)));
        return inst;
    };
}

/// Model-based instances: simulate the model at theta with innovations from
/// `sampler`, then for the local parameter theta + t / sqrt(n) take
///   xi_i    = (mu_i(theta + t/sqrt(n)) - mu_i(theta)) / sqrt(h_i(theta))
///   tau_i   = sqrt(h_i(theta + t/sqrt(n)) / h_i(theta)) - 1
///   gamma_i = component `component` of W22_i(theta + t/sqrt(n))
/// with eta_i the true innovations.
template <class Sampler>
InstanceGenerator model_instances(ModelParams theta, Eigen::VectorXd t, Index component, Sampler sampler,
                                  std::size_t burn_in = kDefaultBurnIn) {
    if (t.size() != theta.dim()) throw InputError("local direction has the wrong dimension");
    if (component < 0 || component >= theta.spec().scale_dim()) throw InputError("W22 component out of range");
    return [theta = std::move(theta), t = std::move(t), component, sampler, burn_in](std::size_t n, Rng& rng) {
        const SimulatedPath sim = simulate(theta, sampler, n, burn_in, rng);
        const FilteredPath at_true = filter(sim.y, theta);
        const ModelParams local = theta.with_theta(theta.theta() + t / std::sqrt(static_cast<double>(n)));
        const FilteredPath at_local = gradients(sim.y, local);
        const WBlocks w = w_blocks(at_local);
        ExpansionInstance inst;
        inst.eta.resize(n);
        inst.gamma.resize(n);
        inst.tau.resize(n);
        inst.xi.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            const auto k = static_cast<Index>(i);
            const double sh = std::sqrt(at_true.h[k]);
            inst.eta[i] = at_true.eta[k];
            // mu = y - eps
            inst.xi[i] = (at_true.eps[k] - at_local.eps[k]) / sh;
            inst.tau[i] = std::sqrt(at_local.h[k]) / sh - 1.0;
            inst.gamma[i] = w.w22(k, component);
        }
        return inst;
    };
}

}  // namespace garchgof::gof
