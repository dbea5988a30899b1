#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <queue>
#include <vector>

#include "garchgof/errors.hpp"

namespace garchgof::quad {

struct Estimate {
    double value = 0.0;
    double error = 0.0;
    std::size_t intervals = 0;
};

namespace detail {

// Gauss-Kronrod 7/15 abscissae and weights; index 7 is the midpoint.
inline constexpr std::array<double, 8> kXgk = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> kWgk = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr std::array<double, 4> kWg = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Piece {
    double a, b, value, error;
    bool operator<(const Piece& other) const { return error < other.error; }
};

template <class F>
Piece gk15(const F& f, double a, double b) {
    const double c = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    const double fc = f(c);
    double kronrod = fc * kWgk[7];
    double gauss = fc * kWg[3];
    for (std::size_t j = 0; j < 7; ++j) {
        const double dx = half * kXgk[j];
        const double sum = f(c - dx) + f(c + dx);
        kronrod += kWgk[j] * sum;
        if (j % 2 == 1) gauss += kWg[j / 2] * sum;
    }
    return {a, b, kronrod * half, std::abs((kronrod - gauss) * half)};
}

}  // namespace detail

/// Globally adaptive Gauss-Kronrod on [a, b]: repeatedly bisects the piece with
/// the largest error estimate until the summed estimate falls below abs_tol.
template <class F>
Estimate integrate(const F& f, double a, double b, double abs_tol = 1e-10,
                   std::size_t max_intervals = 4000) {
    std::priority_queue<detail::Piece> pieces;
    auto first = detail::gk15(f, a, b);
    double value = first.value;
    double error = first.error;
    pieces.push(first);
    while (error > abs_tol) {
        if (pieces.size() >= max_intervals)
            throw NumericError("quadrature did not converge: error estimate " + std::to_string(error));
        const auto worst = pieces.top();
        pieces.pop();
        const double mid = 0.5 * (worst.a + worst.b);
        const auto left = detail::gk15(f, worst.a, mid);
        const auto right = detail::gk15(f, mid, worst.b);
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        pieces.push(left);
        pieces.push(right);
    }
    // Recompute the totals from the pieces to shed accumulated cancellation.
    Estimate out{0.0, 0.0, pieces.size()};
    while (!pieces.empty()) {
        out.value += pieces.top().value;
        out.error += pieces.top().error;
        pieces.pop();
    }
    if (!std::isfinite(out.value)) throw NumericError("quadrature produced a non-finite value");
    return out;
}

/// Integral over the whole real line via x = t / (1 - t^2), t in (-1, 1).
template <class F>
Estimate integrate_real_line(const F& f, double abs_tol = 1e-10) {
    auto g = [&f](double t) {
        const double d = 1.0 - t * t;
        const double x = t / d;
        const double jac = (1.0 + t * t) / (d * d);
        const double v = f(x);
        // Integrand decay must beat the Jacobian blow-up near t = +-1.
        return v == 0.0 ? 0.0 : v * jac;
    };
    return integrate(g, -1.0, 1.0, abs_tol);
}

}  // namespace garchgof::quad
