#pragma once

#include <cmath>
#include <concepts>
#include <random>
#include <string>
#include <string_view>

#include "garchgof/errors.hpp"

namespace garchgof {

/// Anything that produces i.i.d. innovations from a caller-owned generator.
template <class S, class URBG>
concept InnovationSampler = requires(const S& s, URBG& rng) {
    { s.draw(rng) } -> std::convertible_to<double>;
};

/// Innovation laws used in the size/power experiments.
///   normal  N(0,1)
///   a1      sqrt(3/5) t5
///   a2      sqrt(1/2) t4
///   a3      sqrt(1/3) t3
///   a4      double exponential e^{-|x|}/2 (optionally rescaled to unit variance)
///   a5      [0.5 N(-3,1) + 0.5 N(3,1)] / sqrt(10)
class InnovationLaw {
public:
    enum class Kind { Normal, ScaledT5, ScaledT4, ScaledT3, Laplace, BimodalMixture };

    explicit InnovationLaw(Kind kind, bool unit_variance_laplace = false)
        : kind_(kind), unit_variance_laplace_(unit_variance_laplace) {}

    /// Accepts normal, a1..a5 and dexp (alias of a4).
    static InnovationLaw from_key(std::string_view key, bool unit_variance_laplace = false) {
        if (key == "normal") return InnovationLaw(Kind::Normal);
        if (key == "a1") return InnovationLaw(Kind::ScaledT5);
        if (key == "a2") return InnovationLaw(Kind::ScaledT4);
        if (key == "a3") return InnovationLaw(Kind::ScaledT3);
        if (key == "a4" || key == "dexp") return InnovationLaw(Kind::Laplace, unit_variance_laplace);
        if (key == "a5") return InnovationLaw(Kind::BimodalMixture);
        throw InputError("unknown innovation law '" + std::string(key) + "' (expected normal|a1..a5|dexp)");
    }

    [[nodiscard]] Kind kind() const noexcept { return kind_; }

    [[nodiscard]] std::string_view key() const noexcept {
        switch (kind_) {
            case Kind::Normal: return "normal";
            case Kind::ScaledT5: return "a1";
            case Kind::ScaledT4: return "a2";
            case Kind::ScaledT3: return "a3";
            case Kind::Laplace: return "a4";
            case Kind::BimodalMixture: return "a5";
        }
        return "normal";
    }

    /// Theoretical variance of one draw.
    [[nodiscard]] double variance() const noexcept {
        if (kind_ == Kind::Laplace) return unit_variance_laplace_ ? 1.0 : 2.0;
        return 1.0;
    }

    template <class URBG>
    double draw(URBG& rng) const {
        switch (kind_) {
            case Kind::Normal: return std::normal_distribution<double>{}(rng);
            case Kind::ScaledT5: return std::sqrt(3.0 / 5.0) * std::student_t_distribution<double>{5.0}(rng);
            case Kind::ScaledT4: return std::sqrt(1.0 / 2.0) * std::student_t_distribution<double>{4.0}(rng);
            case Kind::ScaledT3: return std::sqrt(1.0 / 3.0) * std::student_t_distribution<double>{3.0}(rng);
            case Kind::Laplace: {
                const double e = std::exponential_distribution<double>{}(rng);
                const double v = (rng() & 1u) ? e : -e;
                return unit_variance_laplace_ ? v / std::sqrt(2.0) : v;
            }
            case Kind::BimodalMixture: {
                const double centre = (rng() & 1u) ? 3.0 : -3.0;
                return (centre + std::normal_distribution<double>{}(rng)) / std::sqrt(10.0);
            }
        }
        return 0.0;
    }

private:
    Kind kind_;
    bool unit_variance_laplace_ = false;
};

/// Mixture (1 - w) Base + w Alt: the local alternative F_n when w = delta / sqrt(n).
template <class Base, class Alt>
class ContaminatedLaw {
public:
    ContaminatedLaw(Base base, Alt alt, double weight) : base_(std::move(base)), alt_(std::move(alt)), weight_(weight) {
        if (!(weight >= 0.0 && weight <= 1.0)) throw InputError("mixture weight must lie in [0, 1]");
    }

    template <class URBG>
    double draw(URBG& rng) const {
        const double u = std::uniform_real_distribution<double>{0.0, 1.0}(rng);
        return u < weight_ ? alt_.draw(rng) : base_.draw(rng);
    }

    [[nodiscard]] double weight() const noexcept { return weight_; }

private:
    Base base_;
    Alt alt_;
    double weight_;
};

}  // namespace garchgof
