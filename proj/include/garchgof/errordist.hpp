#pragma once

#include <cmath>
#include <concepts>
#include <cstddef>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "garchgof/errors.hpp"
#include "garchgof/quadrature.hpp"

namespace garchgof {

/// Closed interval [lo, hi].
struct Interval {
    double lo = 0.0;
    double hi = 0.0;
    [[nodiscard]] double width() const noexcept { return hi - lo; }
};

struct FisherConstants {
    double b1 = 0.0;  ///< location information, E psi0^2
    double b2 = 0.0;  ///< scale information, E phi0^2
};

/// What the test statistic and the limit process need from a null law F0.
/// Any type modelling this can be plugged into gof:: and limitproc:: code.
template <class D>
concept NullDistribution = requires(const D& d, double x) {
    { d.pdf(x) } -> std::convertible_to<double>;
    { d.cdf(x) } -> std::convertible_to<double>;
    { d.psi0(x) } -> std::convertible_to<double>;
    { d.phi0(x) } -> std::convertible_to<double>;
    { d.fisher_constants() } -> std::convertible_to<FisherConstants>;
    { d.grid_range() } -> std::convertible_to<Interval>;
};

namespace stdnormal {

inline constexpr double kInvSqrt2Pi = 0.398942280401432677939946059934;

inline double pdf(double x) noexcept { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }

// erfc keeps full relative accuracy in the lower tail.
inline double cdf(double x) noexcept { return 0.5 * std::erfc(-x * std::numbers::sqrt2 / 2.0); }

/// Acklam's rational approximation followed by two Halley corrections.
inline double quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw std::domain_error("normal quantile: p must lie in (0, 1)");
    static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                   1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                   6.680131188771972e+01,  -1.328068155288572e+01};
    static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                   -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
    static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                   3.754408661907416e+00};
    constexpr double p_low = 0.02425;
    double x;
    if (p < p_low) {
        const double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - p_low) {
        const double q = p - 0.5;
        const double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        const double q = std::sqrt(-2.0 * std::log1p(-p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    for (int iter = 0; iter < 2; ++iter) {
        // Work on the smaller tail so the residual keeps relative precision.
        const double e = p < 0.5 ? cdf(x) - p : (1.0 - p) - cdf(-x);
        const double u = e / pdf(x);
        x -= u / (1.0 + 0.5 * x * u);
    }
    return x;
}

}  // namespace stdnormal

enum class NullKind { StandardNormal, DoubleExponential };

/// A fully specified null innovation law F0 together with its score functions
/// psi0 = f0'/f0 and phi0 = (1 + x psi0) / 2, and the Fisher constants
/// b1 = E psi0^2, b2 = E phi0^2 obtained by quadrature at construction.
///
/// The double exponential member is the unit Laplace law e^{-|x|}/2 (variance 2).
/// Immutable after construction.
class NullFamily {
public:
    static NullFamily standard_normal() { return NullFamily(NullKind::StandardNormal); }
    static NullFamily double_exponential() { return NullFamily(NullKind::DoubleExponential); }

    /// "normal" or "dexp".
    static NullFamily from_key(std::string_view key) {
        if (key == "normal") return standard_normal();
        if (key == "dexp") return double_exponential();
        throw InputError("unknown null family '" + std::string(key) + "' (expected normal|dexp)");
    }

    explicit NullFamily(NullKind kind) : kind_(kind) { constants_ = integrate_constants(); }

    [[nodiscard]] NullKind kind() const noexcept { return kind_; }
    [[nodiscard]] std::string_view key() const noexcept {
        return kind_ == NullKind::StandardNormal ? "normal" : "dexp";
    }

    [[nodiscard]] double pdf(double x) const noexcept {
        if (kind_ == NullKind::StandardNormal) return stdnormal::pdf(x);
        return 0.5 * std::exp(-std::abs(x));
    }

    [[nodiscard]] double cdf(double x) const noexcept {
        if (kind_ == NullKind::StandardNormal) return stdnormal::cdf(x);
        return x < 0.0 ? 0.5 * std::exp(x) : 1.0 - 0.5 * std::exp(-x);
    }

    [[nodiscard]] double quantile(double p) const {
        if (!(p > 0.0 && p < 1.0)) throw std::domain_error("quantile: p must lie in (0, 1)");
        if (kind_ == NullKind::StandardNormal) return stdnormal::quantile(p);
        return p < 0.5 ? std::log(2.0 * p) : -std::log(2.0 * (1.0 - p));
    }

    /// Location score; 0 at the Laplace kink.
    [[nodiscard]] double psi0(double x) const noexcept {
        if (kind_ == NullKind::StandardNormal) return -x;
        return x > 0.0 ? -1.0 : (x < 0.0 ? 1.0 : 0.0);
    }

    [[nodiscard]] double phi0(double x) const noexcept { return 0.5 * (1.0 + x * psi0(x)); }

    [[nodiscard]] FisherConstants fisher_constants() const noexcept { return constants_; }
    [[nodiscard]] double b1() const noexcept { return constants_.b1; }
    [[nodiscard]] double b2() const noexcept { return constants_.b2; }

    /// Range covered by the limit-process simulation grid.
    [[nodiscard]] Interval grid_range() const noexcept {
        return kind_ == NullKind::StandardNormal ? Interval{-4.0, 4.0} : Interval{-8.0, 8.0};
    }

    template <class URBG>
    double draw(URBG& rng) const {
        if (kind_ == NullKind::StandardNormal) return std::normal_distribution<double>{}(rng);
        const double e = std::exponential_distribution<double>{}(rng);
        return (rng() & 1u) ? e : -e;
    }

    template <class URBG>
    std::vector<double> sample(URBG& rng, std::size_t n) const {
        std::vector<double> out(n);
        for (auto& v : out) v = draw(rng);
        return out;
    }

private:
    FisherConstants integrate_constants() const {
        constexpr double tol = 1e-12;
        auto weighted = [this](auto g) {
            return [this, g](double x) {
                const double f = pdf(x);
                return f == 0.0 ? 0.0 : g(x) * f;
            };
        };
        const double b1 = quad::integrate_real_line(weighted([this](double x) { return psi0(x) * psi0(x); }), tol).value;
        const double b2 = quad::integrate_real_line(weighted([this](double x) { return phi0(x) * phi0(x); }), tol).value;
        if (!(b1 > 0.0 && b2 > 0.0 && std::isfinite(b1) && std::isfinite(b2)))
            throw NumericError("Fisher constants are not positive and finite");
        return {b1, b2};
    }

    NullKind kind_;
    FisherConstants constants_{};
};

static_assert(NullDistribution<NullFamily>);

}  // namespace garchgof
