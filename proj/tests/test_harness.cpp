#include <gtest/gtest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "garchgof/harness.hpp"

using namespace garchgof;
using namespace garchgof::harness;

namespace {

const NullFamily kNormal = NullFamily::standard_normal();
const ModelParams kArGarch = ModelParams::ar_garch(0.5, 0.025, 0.25, 0.5);

template <class Law>
std::vector<double> sim_y(const ModelParams& p, const Law& law, std::size_t n, std::uint64_t seed) {
    Rng rng = replication_rng(seed, 0);
    return simulate(p, law, n, kDefaultBurnIn, rng).y;
}

ExperimentConfig small_config() {
    ExperimentConfig c;
    c.n = 200;
    c.reps = 24;
    c.seed = 77;
    c.levels = {0.01, 0.05, 0.10, 0.20};
    return c;
}

}  // namespace

TEST(Portmanteau, ChiSquareMeanUnderIid) {
    double sum = 0.0;
    for (std::size_t k = 0; k < 200; ++k) {
        Rng rng = replication_rng(5, k);
        const auto eta = kNormal.sample(rng, 10000);
        sum += qm_diagnostic(eta, 6).value;
    }
    EXPECT_NEAR(sum / 200, 6.0, 0.5);
}

TEST(Portmanteau, MatchesDirectFormula) {
    Rng rng(3);
    const auto eta = kNormal.sample(rng, 40);
    std::vector<double> s;
    for (double e : eta) s.push_back(e * e);
    double m = 0;
    for (double v : s) m += v / 40.0;
    double c0 = 0;
    for (double v : s) c0 += (v - m) * (v - m);
    double q = 0;
    for (int k = 1; k <= 3; ++k) {
        double ck = 0;
        for (int i = 0; i + k < 40; ++i) ck += (s[i] - m) * (s[i + k] - m);
        q += (ck / c0) * (ck / c0) / (40.0 - k);
    }
    EXPECT_NEAR(qm_diagnostic(eta, 3).value, 40.0 * 42.0 * q, 1e-12);
}

TEST(Portmanteau, Degenerate) {
    const std::vector<double> eta(50, 1.0);
    EXPECT_EQ(qm_diagnostic(eta, 0).value, 0.0);
    const auto p = qm_diagnostic(eta, 6);
    EXPECT_EQ(p.value, 0.0);
    EXPECT_TRUE(p.degenerate);
    std::vector<double> alt(50);
    for (std::size_t i = 0; i < 50; ++i) alt[i] = i % 2 ? 1.0 : -1.0;
    EXPECT_TRUE(qm_diagnostic(alt, 6).degenerate);
    EXPECT_THROW(qm_diagnostic(eta, 13), InputError);
}

TEST(Config, ParsesFlatJson) {
    const auto j = nlohmann::json::parse(R"({"model": "garch", "p1": 1, "p2": 1, "params": [0.025, 0.25, 0.5],
        "n": 300, "reps": 10, "law": "a3", "levels": [0.05, 0.10], "null": "dexp", "seed": 9, "workers": 2})");
    const auto c = ExperimentConfig::from_json(j);
    EXPECT_EQ(c.model.key(), ModelSpec::garch().key());
    EXPECT_EQ(c.n, 300u);
    EXPECT_EQ(c.reps, 10u);
    EXPECT_EQ(c.law, "a3");
    EXPECT_EQ(c.null_family, "dexp");
    EXPECT_EQ(c.seed, 9u);
    EXPECT_EQ(c.workers, 2u);
    EXPECT_EQ(c.levels, (std::vector<double>{0.05, 0.10}));
    const auto d = ExperimentConfig::from_json(nlohmann::json::object());
    EXPECT_EQ(d.params, (std::vector<double>{0.5, 0.025, 0.25, 0.5}));
    EXPECT_EQ(d.n, 400u);
}

TEST(Config, RejectsInvalid) {
    for (const char* text : {R"({"reps": 0})", R"({"n": 50})", R"({"levels": [0.02]})", R"({"law": "cauchy"})",
                             R"({"null": "t"})", R"({"n": "many"})", R"({"params": [0.5, 0.025, 0.7, 0.5]})",
                             R"({"params": [0.5, 0.025]})", R"({"model": "arch"})", R"({"delta": 1.5})"})
        EXPECT_THROW(ExperimentConfig::from_json(nlohmann::json::parse(text)), InputError) << text;
}

TEST(SizePower, DeterministicAcrossWorkers) {
    auto c = small_config();
    c.workers = 1;
    const auto a = run_size_power(c);
    c.workers = 3;
    const auto b = run_size_power(c);
    EXPECT_EQ(a.statistics, b.statistics);
    std::stringstream sa, sb;
    a.write_csv(sa);
    b.write_csv(sb);
    EXPECT_EQ(sa.str(), sb.str());
    EXPECT_EQ(sa.str().substr(0, sa.str().find('\n')), "alpha,critical_value,rate,se,rejections,valid_reps,failures");
}

TEST(SizePower, RatesMonotoneInLevel) {
    auto c = small_config();
    c.law = "a2";
    const auto r = run_size_power(c);
    EXPECT_EQ(r.valid + r.failures, c.reps);
    for (std::size_t k = 0; k + 1 < r.levels.size(); ++k) EXPECT_LE(r.levels[k].rate, r.levels[k + 1].rate);
    for (const auto& l : r.levels) {
        EXPECT_NEAR(l.se, std::sqrt(l.rate * (1 - l.rate) / static_cast<double>(r.valid)), 1e-15);
        std::size_t count = 0;
        for (double t : r.statistics)
            if (t > l.critical_value) ++count;
        EXPECT_EQ(count, l.rejections);
    }
}

TEST(SizePower, CacheOverridesReference) {
    limitproc::CritTable t;
    t.rows.push_back({"normal", 3, 0.05, 0.0, 2000, -4, 4, 10000, 1});
    const CriticalValues cv(t);
    EXPECT_EQ(cv(kNormal, 3, 0.05), 0.0);
    EXPECT_EQ(cv(kNormal, 3, 0.10), 2.382);
    auto c = small_config();
    c.levels = {0.05};
    c.reps = 5;
    EXPECT_EQ(run_size_power(c, cv).levels[0].rate, 1.0);
}

TEST(LocalPower, NontrivialUnderBimodalContamination) {
    ExperimentConfig c;
    c.reps = 300;
    c.law = "a5";
    c.levels = {0.05};
    c.seed = 123;
    const auto pts = local_power_probe(c, 0.9, {400});
    ASSERT_EQ(pts.size(), 1u);
    EXPECT_DOUBLE_EQ(pts[0].weight, 0.045);
    const double se = std::sqrt(0.05 * 0.95 / 300.0);
    EXPECT_GT(pts[0].result.levels[0].rate, 0.05 + 3 * se);
    EXPECT_LT(pts[0].result.levels[0].rate, 1.0);
}

TEST(LocalPower, ZeroDeltaRecoversNull) {
    ExperimentConfig c;
    c.reps = 300;
    c.law = "a5";
    c.levels = {0.10};
    c.seed = 322;
    const auto pts = local_power_probe(c, 0.0, {400});
    EXPECT_NEAR(pts[0].result.levels[0].rate, 0.10, 3 * std::sqrt(0.1 * 0.9 / 300.0));
}

TEST(LocalPower, NullMixtureKeepsSize) {
    ExperimentConfig c;
    c.reps = 300;
    c.law = "normal";
    c.levels = {0.10};
    c.seed = 321;
    const auto pts = local_power_probe(c, 0.9, {400});
    EXPECT_NEAR(pts[0].result.levels[0].rate, 0.10, 3 * std::sqrt(0.1 * 0.9 / 300.0));
    EXPECT_THROW(local_power_probe(c, 1.0, {400}), InputError);
}

TEST(Analyze, AcceptsNullAtTenPercentMostly) {
    int accept = 0;
    for (std::uint64_t s = 0; s < 100; ++s) {
        const auto rep = analyze(sim_y(kArGarch, kNormal, 400, 1000 + s), ModelSpec::ar_garch(), kNormal,
                                 AnalyzeOptions{{0.10}, {}, {}, {}});
        if (!rep.decisions[0].reject) ++accept;
    }
    EXPECT_GE(accept, 82);
    EXPECT_LE(accept, 97);
}

TEST(Analyze, RejectsBimodalAlternative) {
    const auto y = sim_y(kArGarch, InnovationLaw::from_key("a5"), 500, 4);
    AnalyzeOptions opts;
    opts.k_sample = limitproc::simulate_K_distribution(kNormal, 3, 500, 2000, 1);
    const auto rep = analyze(y, ModelSpec::ar_garch(), kNormal, opts);
    ASSERT_EQ(rep.decisions.size(), 3u);
    EXPECT_DOUBLE_EQ(rep.decisions[0].alpha, 0.01);
    EXPECT_TRUE(rep.decisions[0].reject);
    for (const auto& d : rep.decisions) EXPECT_EQ(d.reject, rep.T > d.critical_value);
    ASSERT_TRUE(rep.pvalue_mc.has_value());
    EXPECT_LE(*rep.pvalue_mc, 0.01);
    const auto j = to_json(rep);
    EXPECT_EQ(j["decisions"][0]["decision"], "reject");
    EXPECT_EQ(j["r"], 3);
    EXPECT_TRUE(j["fit"]["theta_hat"].contains("a"));
    std::ostringstream os;
    write_text(os, rep);
    EXPECT_NE(os.str().find("reject"), std::string::npos);
}

TEST(Analyze, InputErrors) {
    EXPECT_THROW(analyze(std::vector<double>{}, ModelSpec::garch(), kNormal), InputError);
    EXPECT_THROW(analyze(std::vector<double>(99, 0.1), ModelSpec::garch(), kNormal), InputError);
    const auto y = sim_y(kArGarch, kNormal, 200, 5);
    EXPECT_THROW(analyze(y, ModelSpec::ar_garch(), kNormal, AnalyzeOptions{{0.02}, {}, {}, {}}), InputError);
}

TEST(EstimatorRate, SlopeOfExactPowerLaw) {
    std::vector<EstimatorStudy> s;
    for (std::size_t n : {400u, 1600u, 6400u}) s.push_back({n, 3.0 / std::sqrt(static_cast<double>(n)), 0.0, {}});
    EXPECT_NEAR(log_log_slope(s), -0.5, 1e-12);
    const auto study = one_step_error_study(ModelParams::garch11(0.025, 0.25, 0.5), kNormal, 400, 10, 3);
    EXPECT_EQ(study.errors.size(), 10u);
    EXPECT_GT(study.rmse, 0.0);
    EXPECT_GE(study.rmse, study.median_error * 0.5);
}
