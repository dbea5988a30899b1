#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "garchgof/errors.hpp"
#include "garchgof/innovations.hpp"

namespace garchgof {

using Eigen::Index;

/// GARCH(p1, p2), AR(1)-GARCH(1,1) or ARMA(1,1)-GARCH(1,1).
enum class ModelKind { Garch, ArGarch, ArmaGarch };

/// Model family and orders. The parameter vector is laid out as
///   [location block (q) | alpha0, alpha_1..alpha_p1, beta_1..beta_p2]
/// with location block () for GARCH, (a) for AR-GARCH and (a, b) for ARMA-GARCH.
struct ModelSpec {
    ModelKind kind = ModelKind::Garch;
    int p1 = 1;
    int p2 = 1;

    static ModelSpec garch(int p1 = 1, int p2 = 1) {
        if (p1 < 1 || p2 < 0) throw InputError("GARCH orders must satisfy p1 >= 1, p2 >= 0");
        return {ModelKind::Garch, p1, p2};
    }
    static ModelSpec ar_garch() { return {ModelKind::ArGarch, 1, 1}; }
    static ModelSpec arma_garch() { return {ModelKind::ArmaGarch, 1, 1}; }

    /// "garch" (with orders), "ar-garch" or "arma-garch".
    static ModelSpec from_key(std::string_view key, int p1 = 1, int p2 = 1) {
        if (key == "garch") return garch(p1, p2);
        if (key == "ar-garch") return ar_garch();
        if (key == "arma-garch") return arma_garch();
        throw InputError("unknown model '" + std::string(key) + "' (expected garch|ar-garch|arma-garch)");
    }

    [[nodiscard]] std::string key() const {
        switch (kind) {
            case ModelKind::Garch: return "garch";
            case ModelKind::ArGarch: return "ar-garch";
            case ModelKind::ArmaGarch: return "arma-garch";
        }
        return "garch";
    }

    [[nodiscard]] Index location_dim() const noexcept {
        return kind == ModelKind::Garch ? 0 : (kind == ModelKind::ArGarch ? 1 : 2);
    }
    [[nodiscard]] Index scale_dim() const noexcept { return 1 + p1 + p2; }
    [[nodiscard]] Index dim() const noexcept { return location_dim() + scale_dim(); }

    [[nodiscard]] Index alpha0_index() const noexcept { return location_dim(); }
    /// j is 1-based.
    [[nodiscard]] Index alpha_index(int j) const noexcept { return location_dim() + j; }
    [[nodiscard]] Index beta_index(int j) const noexcept { return location_dim() + p1 + j; }

    [[nodiscard]] std::vector<std::string> parameter_names() const {
        std::vector<std::string> names;
        if (location_dim() >= 1) names.emplace_back("a");
        if (location_dim() == 2) names.emplace_back("b");
        names.emplace_back("alpha0");
        for (int j = 1; j <= p1; ++j) names.push_back(p1 == 1 ? "alpha" : "alpha" + std::to_string(j));
        for (int j = 1; j <= p2; ++j) names.push_back(p2 == 1 ? "beta" : "beta" + std::to_string(j));
        return names;
    }

    friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

/// Concrete compact parameter space.
struct ParameterSpace {
    double rho0 = 0.999;            ///< bound on sum(alpha) + sum(beta)
    double coef_lower = 1e-6;       ///< lower bound on alpha_j, beta_j
    double coef_upper = 0.999;
    double alpha0_lower = 1e-6;
    double alpha0_upper = 1e6;
    double location_bound = 0.999;  ///< |a|, |b| <= location_bound
};

class ModelParams {
public:
    ModelParams(ModelSpec spec, Eigen::VectorXd theta) : spec_(spec), theta_(std::move(theta)) {
        if (theta_.size() != spec_.dim())
            throw InputError(spec_.key() + " expects " + std::to_string(spec_.dim()) + " parameters, got " +
                             std::to_string(theta_.size()));
    }

    static ModelParams garch11(double alpha0, double alpha, double beta) {
        return {ModelSpec::garch(1, 1), Eigen::Vector3d(alpha0, alpha, beta)};
    }
    static ModelParams ar_garch(double a, double alpha0, double alpha, double beta) {
        return {ModelSpec::ar_garch(), Eigen::Vector4d(a, alpha0, alpha, beta)};
    }
    static ModelParams arma_garch(double a, double b, double alpha0, double alpha, double beta) {
        Eigen::VectorXd t(5);
        t << a, b, alpha0, alpha, beta;
        return {ModelSpec::arma_garch(), std::move(t)};
    }

    [[nodiscard]] const ModelSpec& spec() const noexcept { return spec_; }
    [[nodiscard]] const Eigen::VectorXd& theta() const noexcept { return theta_; }
    [[nodiscard]] Index dim() const noexcept { return spec_.dim(); }

    [[nodiscard]] double a() const noexcept { return spec_.location_dim() >= 1 ? theta_[0] : 0.0; }
    [[nodiscard]] double b() const noexcept { return spec_.location_dim() == 2 ? theta_[1] : 0.0; }
    [[nodiscard]] double alpha0() const noexcept { return theta_[spec_.alpha0_index()]; }
    [[nodiscard]] double alpha(int j) const noexcept { return theta_[spec_.alpha_index(j)]; }
    [[nodiscard]] double beta(int j) const noexcept { return theta_[spec_.beta_index(j)]; }

    [[nodiscard]] double alpha_sum() const noexcept {
        return theta_.segment(spec_.alpha_index(1), spec_.p1).sum();
    }
    [[nodiscard]] double beta_sum() const noexcept {
        return spec_.p2 == 0 ? 0.0 : theta_.segment(spec_.beta_index(1), spec_.p2).sum();
    }
    [[nodiscard]] double persistence() const noexcept { return alpha_sum() + beta_sum(); }

    /// alpha0 / (1 - sum alpha - sum beta): the presample level of h.
    [[nodiscard]] double unconditional_variance() const noexcept { return alpha0() / (1.0 - persistence()); }

    [[nodiscard]] ModelParams with_theta(Eigen::VectorXd theta) const { return {spec_, std::move(theta)}; }

    /// Throws ValidationError unless theta lies in the parameter space.
    void validate(const ParameterSpace& space = {}) const {
        auto fail = [&](const std::string& what) {
            throw ValidationError("parameters outside the parameter space: " + what);
        };
        if (!theta_.allFinite()) fail("non-finite entries");
        const Index q = spec_.location_dim();
        for (Index k = 0; k < q; ++k)
            if (std::abs(theta_[k]) > space.location_bound) fail("|location coefficient| > bound");
        if (spec_.kind == ModelKind::ArmaGarch && a() + b() == 0.0) fail("a + b = 0 (ARMA orders not identified)");
        if (alpha0() < space.alpha0_lower || alpha0() > space.alpha0_upper) fail("alpha0 outside its box");
        for (Index k = spec_.alpha_index(1); k < spec_.dim(); ++k)
            if (theta_[k] < space.coef_lower || theta_[k] > space.coef_upper) fail("alpha/beta outside its box");
        // Slack for rounding in projected points.
        if (persistence() > space.rho0 + 1e-12) fail("sum(alpha) + sum(beta) exceeds rho0");
    }

    [[nodiscard]] bool inside(const ParameterSpace& space = {}) const {
        try {
            validate(space);
            return true;
        } catch (const ValidationError&) {
            return false;
        }
    }

private:
    ModelSpec spec_;
    Eigen::VectorXd theta_;
};

namespace detail {

/// Euclidean projection of v onto {lo <= x_k <= hi, sum x <= cap}.
inline void project_capped_box(Eigen::Ref<Eigen::VectorXd> v, double lo, double hi, double cap) {
    auto clamped_sum = [&](double shift) {
        double s = 0.0;
        for (Index k = 0; k < v.size(); ++k) s += std::clamp(v[k] - shift, lo, hi);
        return s;
    };
    double shift = 0.0;
    if (clamped_sum(0.0) > cap) {
        double left = 0.0;
        double right = v.maxCoeff() - lo;
        for (int it = 0; it < 200 && right - left > 1e-17 * (1.0 + std::abs(right)); ++it) {
            const double mid = 0.5 * (left + right);
            (clamped_sum(mid) > cap ? left : right) = mid;
        }
        shift = right;
    }
    for (Index k = 0; k < v.size(); ++k) v[k] = std::clamp(v[k] - shift, lo, hi);
}

}  // namespace detail

/// Nearest point of the parameter space (box constraints plus the persistence cap).
inline Eigen::VectorXd project_to_space(const ModelSpec& spec, Eigen::VectorXd theta, const ParameterSpace& space = {}) {
    const Index q = spec.location_dim();
    for (Index k = 0; k < q; ++k) theta[k] = std::clamp(theta[k], -space.location_bound, space.location_bound);
    const Index i0 = spec.alpha0_index();
    theta[i0] = std::clamp(theta[i0], space.alpha0_lower, space.alpha0_upper);
    detail::project_capped_box(theta.segment(i0 + 1, spec.p1 + spec.p2), space.coef_lower, space.coef_upper,
                               space.rho0);
    return theta;
}

/// Residuals, conditional variances and (optionally) their parameter gradients
/// along an observed path.
struct FilteredPath {
    ModelSpec spec;
    Eigen::VectorXd eps;  ///< eps_i(s1) = y_i - mu_i(s1)
    Eigen::VectorXd h;    ///< h_i(s) > 0
    Eigen::VectorXd eta;  ///< eps_i / sqrt(h_i)
    Eigen::MatrixXd dmu;  ///< n x q, d mu_i / d s1 (empty for pure GARCH)
    Eigen::MatrixXd dh;   ///< n x (q + r), d h_i / d s
    bool has_gradients = false;

    [[nodiscard]] Index size() const noexcept { return eps.size(); }
};

/// Per-observation weight blocks, one row per observation:
///   w11 = dmu / sqrt(h)      (n x q)
///   w12 = dh_location / h    (n x q)
///   w22 = dh_scale / h       (n x r)
struct WBlocks {
    Eigen::MatrixXd w11;
    Eigen::MatrixXd w12;
    Eigen::MatrixXd w22;

    [[nodiscard]] Index size() const noexcept { return w22.rows(); }
    [[nodiscard]] Index location_dim() const noexcept { return w11.cols(); }
    [[nodiscard]] Index scale_dim() const noexcept { return w22.cols(); }
};

namespace detail {

inline void check_filterable(const ModelParams& params) {
    const auto& t = params.theta();
    if (!t.allFinite()) throw ValidationError("non-finite parameters");
    if (!(params.alpha0() > 0.0)) throw ValidationError("alpha0 must be positive");
    for (Index k = params.spec().alpha_index(1); k < params.dim(); ++k)
        if (t[k] < 0.0) throw ValidationError("alpha/beta must be nonnegative");
    if (!(params.persistence() < 1.0)) throw ValidationError("sum(alpha) + sum(beta) must be below 1");
}

inline void check_series(std::span<const double> y, std::size_t min_length) {
    if (y.size() < min_length)
        throw InputError("series too short: need at least " + std::to_string(min_length) + " observations");
    for (std::size_t i = 0; i < y.size(); ++i)
        if (!std::isfinite(y[i])) throw InputError("non-finite observation at index " + std::to_string(i));
}

}  // namespace detail

/// Runs the residual and variance recursions over y.
///
/// Presample convention: y_j = eps_j = 0 and h_j = alpha0 / (1 - sum alpha - sum beta)
/// for j <= 0. With `with_gradients`, the first-derivative recursions are run as
/// well, started from the exact derivative of that presample state, so dh is the
/// exact gradient of the returned h.
inline FilteredPath filter(std::span<const double> y, const ModelParams& params, bool with_gradients = false) {
    const ModelSpec& spec = params.spec();
    detail::check_filterable(params);
    const std::size_t min_len =
        spec.kind == ModelKind::Garch ? static_cast<std::size_t>(std::max(spec.p1, spec.p2)) + 1 : 2;
    detail::check_series(y, min_len);

    const Index n = static_cast<Index>(y.size());
    const Index q = spec.location_dim();
    const Index dim = spec.dim();
    const int p1 = spec.p1;
    const int p2 = spec.p2;
    const double a = params.a();
    const double b = params.b();
    const double alpha0 = params.alpha0();
    const double one_minus_s = 1.0 - params.persistence();
    const double hbar = alpha0 / one_minus_s;

    FilteredPath out;
    out.spec = spec;
    out.eps.resize(n);
    out.h.resize(n);
    out.eta.resize(n);
    out.has_gradients = with_gradients;
    Eigen::MatrixXd deps;  // n x q, d eps / d s1
    Eigen::RowVectorXd dhbar;
    if (with_gradients) {
        deps.setZero(n, q);
        out.dh.setZero(n, dim);
        dhbar.setZero(dim);
        dhbar[spec.alpha0_index()] = 1.0 / one_minus_s;
        for (Index k = spec.alpha_index(1); k < dim; ++k) dhbar[k] = alpha0 / (one_minus_s * one_minus_s);
    }

    for (Index i = 0; i < n; ++i) {
        // Location recursion.
        if (q == 0) {
            out.eps[i] = y[i];
        } else {
            const double y_prev = i > 0 ? y[i - 1] : 0.0;
            const double eps_prev = i > 0 ? out.eps[i - 1] : 0.0;
            out.eps[i] = y[i] - a * y_prev - (q == 2 ? b * eps_prev : 0.0);
            if (with_gradients) {
                deps(i, 0) = -y_prev - (q == 2 && i > 0 ? b * deps(i - 1, 0) : 0.0);
                if (q == 2) deps(i, 1) = -eps_prev - (i > 0 ? b * deps(i - 1, 1) : 0.0);
            }
        }

        // Variance recursion.
        double hi = alpha0;
        for (int j = 1; j <= p1; ++j) {
            if (i - j >= 0) hi += params.alpha(j) * out.eps[i - j] * out.eps[i - j];
        }
        for (int j = 1; j <= p2; ++j) hi += params.beta(j) * (i - j >= 0 ? out.h[i - j] : hbar);
        if (!(hi > 0.0) || !std::isfinite(hi)) throw NumericError("conditional variance is not positive and finite");
        out.h[i] = hi;
        out.eta[i] = out.eps[i] / std::sqrt(hi);

        if (with_gradients) {
            auto row = out.dh.row(i);
            row[spec.alpha0_index()] = 1.0;
            for (int j = 1; j <= p1; ++j) {
                if (i - j < 0) continue;
                const double e = out.eps[i - j];
                row[spec.alpha_index(j)] += e * e;
                for (Index k = 0; k < q; ++k) row[k] += 2.0 * params.alpha(j) * e * deps(i - j, k);
            }
            for (int j = 1; j <= p2; ++j) {
                const bool in_sample = i - j >= 0;
                row[spec.beta_index(j)] += in_sample ? out.h[i - j] : hbar;
                if (in_sample)
                    row += params.beta(j) * out.dh.row(i - j);
                else
                    row += params.beta(j) * dhbar;
            }
        }
    }
    if (with_gradients) out.dmu = -deps;
    return out;
}

/// filter() with all first-derivative recursions evaluated.
inline FilteredPath gradients(std::span<const double> y, const ModelParams& params) {
    return filter(y, params, true);
}

inline WBlocks w_blocks(const FilteredPath& path) {
    if (!path.has_gradients) throw InputError("w_blocks requires a path with gradients");
    const Index q = path.spec.location_dim();
    const Index r = path.spec.scale_dim();
    const Eigen::ArrayXd inv_h = path.h.array().inverse();
    const Eigen::ArrayXd inv_sqrt_h = path.h.array().sqrt().inverse();
    WBlocks w;
    w.w11 = (path.dmu.array().colwise() * inv_sqrt_h).matrix();
    w.w12 = (path.dh.leftCols(q).array().colwise() * inv_h).matrix();
    w.w22 = (path.dh.rightCols(r).array().colwise() * inv_h).matrix();
    return w;
}

/// A simulated path together with the simulator's internal state.
struct SimulatedPath {
    std::vector<double> y;
    std::vector<double> eps;
    std::vector<double> h;
    std::vector<double> eta;
};

/// Draws burn_in + n steps of the model seeded at the presample state used by
/// filter(), and returns the last n.
template <class Sampler, class URBG>
    requires InnovationSampler<Sampler, URBG>
SimulatedPath simulate(const ModelParams& params, const Sampler& innovations, std::size_t n, std::size_t burn_in,
                       URBG& rng, const ParameterSpace& space = {}) {
    params.validate(space);
    const ModelSpec& spec = params.spec();
    const std::size_t total = burn_in + n;
    const double hbar = params.unconditional_variance();
    std::vector<double> y(total), eps(total), h(total), eta(total);
    for (std::size_t i = 0; i < total; ++i) {
        double hi = params.alpha0();
        for (int j = 1; j <= spec.p1; ++j)
            if (i >= static_cast<std::size_t>(j)) hi += params.alpha(j) * eps[i - j] * eps[i - j];
        for (int j = 1; j <= spec.p2; ++j)
            hi += params.beta(j) * (i >= static_cast<std::size_t>(j) ? h[i - j] : hbar);
        const double z = innovations.draw(rng);
        h[i] = hi;
        eta[i] = z;
        eps[i] = z * std::sqrt(hi);
        const double y_prev = i > 0 ? y[i - 1] : 0.0;
        const double eps_prev = i > 0 ? eps[i - 1] : 0.0;
        y[i] = params.a() * y_prev + params.b() * eps_prev + eps[i];
    }
    auto tail = [&](std::vector<double>& v) {
        return std::vector<double>(v.begin() + static_cast<std::ptrdiff_t>(burn_in), v.end());
    };
    return {tail(y), tail(eps), tail(h), tail(eta)};
}

inline constexpr std::size_t kDefaultBurnIn = 500;

}  // namespace garchgof
