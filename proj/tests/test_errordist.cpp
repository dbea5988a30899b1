#include <gtest/gtest.h>

#include <boost/math/quadrature/exp_sinh.hpp>

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "garchgof/errordist.hpp"
#include "garchgof/parallel.hpp"

using namespace garchgof;

namespace {

// Independent quadrature: exp-sinh on each half line. Far-tail products such
// as x^2 * 0 are taken as 0.
template <class F>
double oracle_integral(F g) {
    auto f = [&](double x) {
        const double v = g(x);
        return std::isfinite(v) ? v : 0.0;
    };
    boost::math::quadrature::exp_sinh<double> es;
    const double right = es.integrate([&](double x) { return f(x); }, 0.0, std::numeric_limits<double>::infinity());
    const double left = es.integrate([&](double x) { return f(-x); }, 0.0, std::numeric_limits<double>::infinity());
    return left + right;
}

NullFamily normal() { return NullFamily::standard_normal(); }
NullFamily dexp() { return NullFamily::double_exponential(); }

}  // namespace

TEST(NullFamilyBasics, DensityAndCdfAtZero) {
    EXPECT_NEAR(normal().pdf(0.0), 1.0 / std::sqrt(2.0 * std::numbers::pi), 1e-15);
    EXPECT_DOUBLE_EQ(dexp().pdf(0.0), 0.5);
    EXPECT_DOUBLE_EQ(dexp().cdf(0.0), 0.5);
    EXPECT_DOUBLE_EQ(normal().cdf(0.0), 0.5);
}

TEST(NullFamilyBasics, Scores) {
    EXPECT_DOUBLE_EQ(normal().psi0(2.0), -2.0);
    EXPECT_DOUBLE_EQ(dexp().psi0(3.0), -1.0);
    EXPECT_DOUBLE_EQ(dexp().psi0(-3.0), 1.0);
    EXPECT_DOUBLE_EQ(dexp().psi0(0.0), 0.0);
    EXPECT_DOUBLE_EQ(normal().phi0(1.0), 0.0);
    EXPECT_DOUBLE_EQ(normal().phi0(0.0), 0.5);
    EXPECT_DOUBLE_EQ(dexp().phi0(2.0), -0.5);
    for (double x : {-2.5, -0.3, 0.0, 0.7, 4.0})
        for (const auto& f : {normal(), dexp()}) EXPECT_DOUBLE_EQ(f.phi0(x), 0.5 * (1.0 + x * f.psi0(x)));
}

TEST(NullFamilyBasics, PsiIsLogDensityDerivative) {
    for (const auto& f : {normal(), dexp()})
        for (double x : {-3.1, -1.2, -0.4, 0.6, 2.2}) {
            const double h = 1e-5;
            const double fd = (std::log(f.pdf(x + h)) - std::log(f.pdf(x - h))) / (2 * h);
            EXPECT_NEAR(f.psi0(x), fd, 1e-8);
        }
}

TEST(NullFamilyBasics, GridRanges) {
    EXPECT_EQ(normal().grid_range().lo, -4.0);
    EXPECT_EQ(normal().grid_range().hi, 4.0);
    EXPECT_EQ(dexp().grid_range().lo, -8.0);
    EXPECT_EQ(dexp().grid_range().hi, 8.0);
}

TEST(NullFamilyBasics, KeysRoundTrip) {
    EXPECT_EQ(NullFamily::from_key("normal").kind(), NullKind::StandardNormal);
    EXPECT_EQ(NullFamily::from_key("dexp").kind(), NullKind::DoubleExponential);
    EXPECT_EQ(normal().key(), "normal");
    EXPECT_EQ(dexp().key(), "dexp");
    EXPECT_THROW(NullFamily::from_key("cauchy"), InputError);
}

TEST(NullFamilyBasics, NormalCdfMatchesErfc) {
    for (double x = -8.0; x <= 8.0; x += 0.37)
        EXPECT_NEAR(normal().cdf(x), 0.5 * std::erfc(-x / std::sqrt(2.0)), 1e-15);
}

TEST(NullFamilyQuantile, InvertsCdf) {
    for (const auto& f : {normal(), dexp()}) {
        for (int k = 1; k < 100; ++k) {
            const double p = k / 100.0;
            EXPECT_NEAR(f.cdf(f.quantile(p)), p, 1e-10);
        }
        for (double p : {1e-12, 1e-6, 0.5, 1 - 1e-6}) EXPECT_NEAR(f.cdf(f.quantile(p)), p, 1e-10 * std::max(1.0, p));
    }
}

TEST(NullFamilyQuantile, QuantileOfCdfOnGrid) {
    for (const auto& f : {normal(), dexp()}) {
        const Interval g = f.grid_range();
        for (int k = 0; k < 100; ++k) {
            const double x = g.lo + 0.9 * g.width() * (k + 0.5) / 100.0 + 0.05 * g.width();
            EXPECT_NEAR(f.quantile(f.cdf(x)), x, 1e-9);
        }
    }
}

TEST(NullFamilyQuantile, DomainErrors) {
    for (const auto& f : {normal(), dexp()}) {
        EXPECT_THROW((void)f.quantile(0.0), std::domain_error);
        EXPECT_THROW((void)f.quantile(1.0), std::domain_error);
        EXPECT_THROW((void)f.quantile(-0.2), std::domain_error);
        EXPECT_THROW((void)f.quantile(std::nan("")), std::domain_error);
    }
}

TEST(NullFamilyQuantile, CdfMonotone) {
    for (const auto& f : {normal(), dexp()}) {
        double prev = 0.0;
        for (double x = -12.0; x <= 12.0; x += 0.01) {
            const double c = f.cdf(x);
            EXPECT_GE(c, prev);
            EXPECT_GE(f.pdf(x), 0.0);
            prev = c;
        }
    }
}

TEST(FisherConstants, MatchQuadratureOracle) {
    const auto n = normal().fisher_constants();
    const auto d = dexp().fisher_constants();
    const auto f = normal();
    const auto g = dexp();
    const double b1n = oracle_integral([&](double x) { return f.psi0(x) * f.psi0(x) * f.pdf(x); });
    const double b2n = oracle_integral([&](double x) { return f.phi0(x) * f.phi0(x) * f.pdf(x); });
    const double b1d = oracle_integral([&](double x) { return g.psi0(x) * g.psi0(x) * g.pdf(x); });
    const double b2d = oracle_integral([&](double x) { return g.phi0(x) * g.phi0(x) * g.pdf(x); });
    EXPECT_NEAR(n.b1, b1n, 1e-8);
    EXPECT_NEAR(n.b2, b2n, 1e-8);
    EXPECT_NEAR(d.b1, b1d, 1e-8);
    EXPECT_NEAR(d.b2, b2d, 1e-8);
    EXPECT_NEAR(n.b1, 1.0, 1e-8);
    EXPECT_NEAR(n.b2, 0.5, 1e-8);
    EXPECT_NEAR(d.b1, 1.0, 1e-8);
    EXPECT_NEAR(d.b2, 0.25, 1e-8);
    EXPECT_GT(n.b1 * n.b2, 0.0);
    EXPECT_GT(d.b1 * d.b2, 0.0);
}

TEST(FisherConstants, DensityIntegratesToOne) {
    for (const auto& f : {normal(), dexp()})
        EXPECT_NEAR(oracle_integral([&](double x) { return f.pdf(x); }), 1.0, 1e-8);
}

TEST(FisherConstants, ScoresOrthogonal) {
    for (const auto& f : {normal(), dexp()})
        EXPECT_NEAR(oracle_integral([&](double x) { return f.psi0(x) * f.phi0(x) * f.pdf(x); }), 0.0, 1e-8);
}

TEST(FisherConstants, XTimesDensityBounded) {
    for (const auto& f : {normal(), dexp()}) {
        const Interval g = f.grid_range();
        double mx = 0.0;
        for (int k = 0; k <= 100000; ++k) {
            const double x = g.lo + g.width() * k / 100000.0;
            mx = std::max(mx, std::abs(x) * f.pdf(x));
        }
        EXPECT_LT(mx, 1.0);
    }
}

TEST(FisherConstants, AgreeWithMonteCarlo) {
    for (const auto& f : {normal(), dexp()}) {
        Rng rng(11);
        const auto xs = f.sample(rng, 1000000);
        double s1 = 0, s2 = 0, q1 = 0, q2 = 0;
        for (double x : xs) {
            const double a = f.psi0(x) * f.psi0(x);
            const double b = f.phi0(x) * f.phi0(x);
            s1 += a;
            q1 += a * a;
            s2 += b;
            q2 += b * b;
        }
        const double m = static_cast<double>(xs.size());
        const double se1 = std::sqrt((q1 / m - (s1 / m) * (s1 / m)) / m);
        const double se2 = std::sqrt((q2 / m - (s2 / m) * (s2 / m)) / m);
        EXPECT_NEAR(s1 / m, f.b1(), 3 * se1 + 1e-12);
        EXPECT_NEAR(s2 / m, f.b2(), 3 * se2);
    }
}

TEST(Sampling, NormalMoments) {
    Rng rng(2024);
    const auto xs = normal().sample(rng, 1000000);
    double s = 0, ss = 0;
    for (double x : xs) s += x;
    const double mean = s / 1e6;
    for (double x : xs) ss += (x - mean) * (x - mean);
    EXPECT_NEAR(mean, 0.0, 0.004);
    EXPECT_NEAR(ss / (1e6 - 1), 1.0, 0.005);
}

TEST(Sampling, LaplaceMoments) {
    Rng rng(5);
    const auto xs = dexp().sample(rng, 1000000);
    double s = 0, ss = 0, a = 0;
    for (double x : xs) {
        s += x;
        ss += x * x;
        a += std::abs(x);
    }
    EXPECT_NEAR(s / 1e6, 0.0, 0.006);
    EXPECT_NEAR(ss / 1e6, 2.0, 0.02);
    EXPECT_NEAR(a / 1e6, 1.0, 0.005);
}

TEST(Sampling, Deterministic) {
    for (const auto& f : {normal(), dexp()}) {
        Rng r1(99), r2(99);
        EXPECT_EQ(f.sample(r1, 1000), f.sample(r2, 1000));
    }
}
