#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "garchgof/errordist.hpp"
#include "garchgof/estimation.hpp"
#include "garchgof/parallel.hpp"

using namespace garchgof;

namespace {

const NullFamily kNormal = NullFamily::standard_normal();
const NullFamily kDexp = NullFamily::double_exponential();

std::vector<double> simulate_y(const ModelParams& p, std::size_t n, std::uint64_t seed) {
    Rng rng = replication_rng(seed, 0);
    return simulate(p, kNormal, n, kDefaultBurnIn, rng).y;
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

}  // namespace

TEST(QuasiLoglik, MatchesDirectSum) {
    const auto p = ModelParams::ar_garch(0.5, 0.025, 0.25, 0.5);
    const auto y = simulate_y(p, 300, 1);
    const auto path = filter(y, p);
    double direct = 0.0;
    for (Index i = 0; i < 300; ++i) direct += -0.5 * std::log(path.h[i]) - path.eps[i] * path.eps[i] / (2 * path.h[i]);
    EXPECT_NEAR(gaussian_quasi_loglik(y, p), direct, 1e-10 * std::abs(direct));
}

TEST(MomentSeed, InsideSpace) {
    for (const auto& p : {ModelParams::garch11(0.025, 0.25, 0.5), ModelParams::ar_garch(0.5, 0.025, 0.25, 0.5),
                          ModelParams::arma_garch(0.3, 0.4, 0.05, 0.1, 0.8)}) {
        const auto y = simulate_y(p, 500, 2);
        EXPECT_TRUE(moment_seed(y, p.spec()).inside());
    }
    const auto y = simulate_y(ModelParams::garch11(0.025, 0.25, 0.5), 500, 3);
    const auto s = moment_seed(y, ModelSpec::garch(2, 2));
    EXPECT_TRUE(s.inside());
    EXPECT_DOUBLE_EQ(s.alpha(1), 0.05);
    EXPECT_DOUBLE_EQ(s.beta(2), 0.35);
}

TEST(Qmle, InputErrors) {
    EXPECT_THROW(gaussian_qmle(std::vector<double>(200, 0.0), ModelSpec::garch()), EstimationError);
    EXPECT_THROW(gaussian_qmle(std::vector<double>(20, 1.0), ModelSpec::garch()), InputError);
    auto y = simulate_y(ModelParams::garch11(0.025, 0.25, 0.5), 100, 1);
    y[10] = std::nan("");
    EXPECT_THROW(gaussian_qmle(y, ModelSpec::garch()), InputError);
}

TEST(Qmle, GarchErrorsWithinMonteCarloSpread) {
    const auto theta = ModelParams::garch11(0.025, 0.25, 0.5);
    constexpr int kReps = 100;
    std::vector<std::vector<double>> est(3);
    for (int k = 0; k < kReps; ++k) {
        const auto r = gaussian_qmle(simulate_y(theta, 4000, 1000 + k), theta.spec());
        for (int j = 0; j < 3; ++j) est[static_cast<std::size_t>(j)].push_back(r.params.theta()[j]);
    }
    for (int j = 0; j < 3; ++j) {
        const auto& v = est[static_cast<std::size_t>(j)];
        const double mean = std::accumulate(v.begin(), v.end(), 0.0) / kReps;
        double ss = 0;
        for (double x : v) ss += (x - mean) * (x - mean);
        const double sd = std::sqrt(ss / (kReps - 1));
        std::vector<double> abs_err;
        for (double x : v) abs_err.push_back(std::abs(x - theta.theta()[j]));
        EXPECT_LT(median(abs_err), 3 * sd) << "parameter " << j;
    }
}

TEST(Qmle, ArCoefficientUnbiased) {
    const auto theta = ModelParams::ar_garch(0.5, 0.025, 0.25, 0.5);
    double sum = 0;
    for (int k = 0; k < 100; ++k) sum += gaussian_qmle(simulate_y(theta, 4000, 2000 + k), theta.spec()).params.a();
    EXPECT_NEAR(sum / 100, 0.5, 0.03);
}

TEST(Qmle, BeatsTrueParameterOnLikelihood) {
    const auto theta = ModelParams::ar_garch(0.5, 0.025, 0.25, 0.5);
    int ok = 0;
    for (int k = 0; k < 100; ++k) {
        const auto y = simulate_y(theta, 400, 3000 + k);
        const auto r = gaussian_qmle(y, theta.spec());
        if (r.loglik >= gaussian_quasi_loglik(y, theta) - 1e-9) ++ok;
    }
    EXPECT_GE(ok, 95);
}

TEST(Information, PureGarchIsScaledW22Gram) {
    const auto p = ModelParams::garch11(0.025, 0.25, 0.5);
    const auto w = w_blocks(gradients(simulate_y(p, 500, 4), p));
    const Eigen::MatrixXd info = information_matrix(w, kNormal);
    const Eigen::MatrixXd expect = 0.5 * w.w22.transpose() * w.w22 / 500.0;
    EXPECT_LT((info - expect).cwiseAbs().maxCoeff(), 1e-12 * expect.cwiseAbs().maxCoeff());
}

TEST(Information, MatchesExplicitBlockSum) {
    const auto p = ModelParams::arma_garch(0.3, 0.4, 0.05, 0.1, 0.8);
    const auto w = w_blocks(gradients(simulate_y(p, 400, 5), p));
    for (const auto& f0 : {kNormal, kDexp}) {
        Eigen::MatrixXd oracle = Eigen::MatrixXd::Zero(5, 5);
        Eigen::Matrix2d B;
        B << f0.b1(), 0, 0, f0.b2();
        for (Index i = 0; i < 400; ++i) {
            // W_i is (q + r) x 2: first column (w11, 0), second column (w12, w22).
            Eigen::MatrixXd Wi = Eigen::MatrixXd::Zero(5, 2);
            Wi.block(0, 0, 2, 1) = w.w11.row(i).transpose();
            Wi.block(0, 1, 2, 1) = w.w12.row(i).transpose();
            Wi.block(2, 1, 3, 1) = w.w22.row(i).transpose();
            oracle += Wi * B * Wi.transpose();
        }
        oracle /= 400.0;
        const Eigen::MatrixXd info = information_matrix(w, f0);
        EXPECT_LT((info - oracle).cwiseAbs().maxCoeff(), 1e-12 * oracle.cwiseAbs().maxCoeff());
        EXPECT_EQ(info, info.transpose());
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(info);
        EXPECT_GE(eig.eigenvalues().minCoeff(), -1e-10 * info.norm());
    }
}

TEST(Information, StableAcrossHalves) {
    const auto p = ModelParams::arma_garch(0.3, 0.4, 0.05, 0.1, 0.8);
    const auto y = simulate_y(p, 100000, 6);
    const std::vector<double> first(y.begin(), y.begin() + 50000), second(y.begin() + 50000, y.end());
    const auto i1 = information_matrix(w_blocks(gradients(first, p)), kNormal);
    const auto i2 = information_matrix(w_blocks(gradients(second, p)), kNormal);
    for (Index r = 0; r < 5; ++r)
        for (Index c = 0; c < 5; ++c) {
            const double scale = std::sqrt(i1(r, r) * i1(c, c));
            EXPECT_LT(std::abs(i1(r, c) - i2(r, c)), 0.10 * std::max(std::abs(i1(r, c)), 0.05 * scale))
                << r << "," << c;
        }
}

TEST(Information, SingularThrows) {
    WBlocks w;
    w.w11.resize(10, 0);
    w.w12.resize(10, 0);
    w.w22.resize(10, 2);
    for (Index i = 0; i < 10; ++i) w.w22(i, 0) = w.w22(i, 1) = 1.0 + i;
    EXPECT_THROW(information_matrix(w, kNormal), SingularMatrixError);
}

TEST(Score, NormalScoreIsMinusLoglikGradient) {
    const auto p = ModelParams::arma_garch(0.3, 0.4, 0.05, 0.1, 0.8);
    const auto y = simulate_y(p, 300, 7);
    const auto path = gradients(y, p);
    const Eigen::VectorXd s = mean_weighted_score(path, w_blocks(path), kNormal);
    for (Index k = 0; k < 5; ++k) {
        const double step = 1e-6 * (1 + std::abs(p.theta()[k]));
        Eigen::VectorXd up = p.theta(), dn = p.theta();
        up[k] += step;
        dn[k] -= step;
        const double g = (gaussian_quasi_loglik(y, p.with_theta(up)) - gaussian_quasi_loglik(y, p.with_theta(dn))) /
                         (2 * step) / 300.0;
        EXPECT_NEAR(s[k], -g, 1e-6 * std::max(1.0, std::abs(g)));
    }
}

TEST(OneStep, ZeroScoreIsFixedPoint) {
    const Eigen::MatrixXd info = Eigen::Matrix3d::Identity() * 2.0;
    EXPECT_EQ(scoring_step(info, Eigen::Vector3d::Zero()), Eigen::VectorXd(Eigen::Vector3d::Zero()));
    // Under the normal null the scores are the quasi-likelihood gradient, which
    // vanishes at an interior quasi-MLE.
    const auto theta = ModelParams::garch11(0.025, 0.25, 0.5);
    const auto y = simulate_y(theta, 2000, 8);
    QmleOptions tight;
    tight.optimizer.gradient_tolerance = 1e-10;
    const auto q = gaussian_qmle(y, theta.spec(), std::nullopt, tight);
    const auto step = one_step_update(y, q.params, kNormal);
    EXPECT_LT(step.raw_step.norm(), 1e-4 * q.params.theta().norm());
    EXPECT_FALSE(step.projected);
}

TEST(OneStep, EquivariantUnderRelabeling) {
    const auto p = ModelParams::arma_garch(0.3, 0.4, 0.05, 0.1, 0.8);
    const auto y = simulate_y(p, 500, 9);
    const auto path = gradients(y, p);
    const auto w = w_blocks(path);
    const Eigen::MatrixXd info = information_matrix(w, kDexp);
    const Eigen::VectorXd score = mean_weighted_score(path, w, kDexp);
    const Eigen::VectorXd step = scoring_step(info, score);
    Eigen::VectorXi order(5);
    order << 4, 2, 0, 3, 1;
    const Eigen::PermutationMatrix<Eigen::Dynamic> P(order);
    const Eigen::MatrixXd pinfo = P * info * P.transpose();
    const Eigen::VectorXd pstep = scoring_step(pinfo, P * score);
    EXPECT_LT((pstep - P * step).cwiseAbs().maxCoeff(), 1e-10 * step.cwiseAbs().maxCoeff());
}

TEST(OneStep, ErrorShrinksWithSampleSize) {
    const auto theta = ModelParams::garch11(0.025, 0.25, 0.5);
    auto median_error = [&](std::size_t n) {
        std::vector<double> e;
        for (int k = 0; k < 60; ++k) {
            const auto y = simulate_y(theta, n, 4000 + n + static_cast<std::uint64_t>(k));
            e.push_back((fit(y, theta.spec(), kNormal).theta_hat.theta() - theta.theta()).norm());
        }
        return median(e);
    };
    EXPECT_LT(median_error(6400), median_error(400));
}

TEST(Fit, ReportFields) {
    const auto theta = ModelParams::ar_garch(0.5, 0.025, 0.25, 0.5);
    const auto y = simulate_y(theta, 1000, 10);
    const auto f = fit(y, theta.spec(), kNormal);
    EXPECT_TRUE(f.theta_hat.inside());
    EXPECT_TRUE(f.converged);
    EXPECT_EQ(f.std_errors.size(), 4);
    EXPECT_TRUE((f.std_errors.array() > 0).all());
    EXPECT_TRUE(f.std_errors.allFinite());
    EXPECT_EQ(f.info, f.info.transpose());
    EXPECT_NEAR(f.loglik, gaussian_quasi_loglik(y, f.theta_hat), 1e-9 * std::abs(f.loglik));
    EXPECT_NEAR(f.fourth_moment, fourth_moment_index(f.theta_hat), 0.0);
}

TEST(Fit, FourthMomentWarning) {
    EXPECT_DOUBLE_EQ(fourth_moment_index(ModelParams::garch11(0.1, 0.25, 0.5)), 3 * 0.0625 + 0.25 + 0.25);
    const auto theta = ModelParams::garch11(0.05, 0.45, 0.5);
    const auto y = simulate_y(theta, 3000, 11);
    const auto f = fit(y, theta.spec(), kNormal);
    if (f.fourth_moment >= 1.0) {
        EXPECT_TRUE(std::any_of(f.warnings.begin(), f.warnings.end(),
                                [](const std::string& w) { return w.find("fourth-moment") != std::string::npos; }));
    }
    const auto g = fit(simulate_y(ModelParams::garch11(0.025, 0.1, 0.5), 1000, 12), ModelSpec::garch(), kNormal);
    EXPECT_LT(g.fourth_moment, 1.0);
    EXPECT_TRUE(std::none_of(g.warnings.begin(), g.warnings.end(),
                             [](const std::string& w) { return w.find("fourth-moment") != std::string::npos; }));
}
