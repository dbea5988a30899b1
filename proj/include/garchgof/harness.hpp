#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "garchgof/errordist.hpp"
#include "garchgof/errors.hpp"
#include "garchgof/estimation.hpp"
#include "garchgof/gof.hpp"
#include "garchgof/innovations.hpp"
#include "garchgof/limitproc.hpp"
#include "garchgof/models.hpp"
#include "garchgof/parallel.hpp"

namespace garchgof::harness {

// ---------------------------------------------------------------------------
// Portmanteau diagnostic on squared standardized residuals.

struct Portmanteau {
    double value = 0.0;
    std::size_t lags = 0;
    bool degenerate = false;  ///< eta^2 constant: autocorrelations undefined, value 0
};

/// Ljung-Box statistic n(n+2) sum_{k=1..M} r_k^2 / (n - k), r_k the lag-k
/// autocorrelation of eta_i^2. Requires M < n/4.
inline Portmanteau qm_diagnostic(std::span<const double> eta, std::size_t lags) {
    const std::size_t n = eta.size();
    if (lags == 0) return {0.0, 0, false};
    if (4 * lags >= n) throw InputError("portmanteau lag count must be below n/4");
    std::vector<double> sq(n);
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sq[i] = eta[i] * eta[i];
        mean += sq[i];
    }
    mean /= static_cast<double>(n);
    double c0 = 0.0;
    for (double v : sq) c0 += (v - mean) * (v - mean);
    if (!(c0 > 0.0)) return {0.0, lags, true};
    const auto nd = static_cast<double>(n);
    double q = 0.0;
    for (std::size_t k = 1; k <= lags; ++k) {
        double ck = 0.0;
        for (std::size_t i = k; i < n; ++i) ck += (sq[i] - mean) * (sq[i - k] - mean);
        const double rk = ck / c0;
        q += rk * rk / (nd - static_cast<double>(k));
    }
    return {nd * (nd + 2.0) * q, lags, false};
}

// ---------------------------------------------------------------------------
// Critical values: optional CSV cache, then the reference table, then simulation.

class CriticalValues {
public:
    CriticalValues() = default;
    explicit CriticalValues(limitproc::CritTable cache) : cache_(std::move(cache)) {}

    [[nodiscard]] double operator()(const NullFamily& f0, std::size_t r, double alpha) const {
        if (cache_)
            if (auto v = cache_->value(f0.key(), r, alpha)) return *v;
        return limitproc::critical_value(f0, r, alpha);
    }

private:
    std::optional<limitproc::CritTable> cache_;
};

inline void check_levels(const std::vector<double>& levels) {
    if (levels.empty()) throw InputError("at least one significance level is required");
    for (double a : levels)
        if (!limitproc::level_index(a))
            throw InputError("level " + std::to_string(a) + " is not one of 0.01,0.03,0.05,0.10,0.15,0.20");
}

// ---------------------------------------------------------------------------
// Single-series analysis.

struct LevelDecision {
    double alpha = 0.0;
    double critical_value = 0.0;
    bool reject = false;
};

struct TestReport {
    ModelSpec spec;
    std::string null_family;
    std::size_t n = 0;
    FitResult fit;
    Portmanteau qm6;
    Portmanteau qm12;
    double T = 0.0;
    double argmax = 0.0;
    std::size_t r = 0;
    std::vector<LevelDecision> decisions;
    std::optional<double> pvalue_mc;  ///< share of the simulated K sample >= T
    std::vector<std::string> warnings;
};

struct AnalyzeOptions {
    std::vector<double> levels{0.01, 0.05, 0.10};
    CriticalValues critical{};
    /// Sorted Monte Carlo sample of K for r = scale dimension; enables pvalue_mc.
    std::optional<std::vector<double>> k_sample;
    FitOptions fit{};
};

/// QMLE, one-step update under F0, statistic T and per-level decisions.
inline TestReport analyze(std::span<const double> y, const ModelSpec& spec, const NullFamily& f0,
                          const AnalyzeOptions& opts = {}) {
    if (y.size() < 100) throw InputError("analysis needs at least 100 observations, got " + std::to_string(y.size()));
    check_levels(opts.levels);
    TestReport rep{spec, std::string(f0.key()), y.size(), fit(y, spec, f0, opts.fit), {}, {}, 0.0, 0.0, 0, {}, {}, {}};
    const FilteredPath path = gradients(y, rep.fit.theta_hat);
    const WBlocks w = w_blocks(path);
    const auto stat = gof::kn_statistic(path, w, f0);
    rep.T = stat.T;
    rep.argmax = stat.argmax;
    rep.r = static_cast<std::size_t>(spec.scale_dim());
    const std::span<const double> eta(path.eta.data(), y.size());
    rep.qm6 = qm_diagnostic(eta, 6);
    rep.qm12 = qm_diagnostic(eta, 12);
    for (double alpha : opts.levels) {
        const double cv = opts.critical(f0, rep.r, alpha);
        rep.decisions.push_back({alpha, cv, rep.T > cv});
    }
    if (opts.k_sample) rep.pvalue_mc = limitproc::upper_tail_fraction(*opts.k_sample, rep.T);
    rep.warnings = rep.fit.warnings;
    if (rep.qm6.degenerate || rep.qm12.degenerate)
        rep.warnings.push_back("squared residuals are constant; portmanteau statistic set to 0");
    return rep;
}

inline nlohmann::json params_json(const ModelParams& p, const Eigen::VectorXd* se = nullptr) {
    nlohmann::json j = nlohmann::json::object();
    const auto names = p.spec().parameter_names();
    for (std::size_t k = 0; k < names.size(); ++k) {
        if (se)
            j[names[k]] = {{"estimate", p.theta()[static_cast<Index>(k)]}, {"se", (*se)[static_cast<Index>(k)]}};
        else
            j[names[k]] = p.theta()[static_cast<Index>(k)];
    }
    return j;
}

inline nlohmann::json fit_json(const FitResult& f) {
    return {{"theta_tilde", params_json(f.theta_tilde)},
            {"theta_hat", params_json(f.theta_hat, &f.std_errors)},
            {"loglik", f.loglik},
            {"converged", f.converged},
            {"iterations", f.iterations},
            {"fourth_moment", f.fourth_moment},
            {"warnings", f.warnings}};
}

inline nlohmann::json to_json(const TestReport& r) {
    nlohmann::json decisions = nlohmann::json::array();
    for (const auto& d : r.decisions)
        decisions.push_back({{"alpha", d.alpha}, {"critical_value", d.critical_value},
                             {"decision", d.reject ? "reject" : "accept"}});
    nlohmann::json j = {{"model", r.spec.key()},
                        {"null", r.null_family},
                        {"n", r.n},
                        {"fit", fit_json(r.fit)},
                        {"qm6", r.qm6.value},
                        {"qm12", r.qm12.value},
                        {"T", r.T},
                        {"argmax", r.argmax},
                        {"r", r.r},
                        {"decisions", decisions},
                        {"warnings", r.warnings}};
    j["pvalue_mc"] = r.pvalue_mc ? nlohmann::json(*r.pvalue_mc) : nlohmann::json(nullptr);
    return j;
}

inline void write_text(std::ostream& os, const TestReport& r) {
    char buf[160];
    os << "model " << r.spec.key() << ", null " << r.null_family << ", n = " << r.n << "\n";
    const auto names = r.spec.parameter_names();
    for (std::size_t k = 0; k < names.size(); ++k) {
        std::snprintf(buf, sizeof buf, "  %-8s %10.4f (%.4f)\n", names[k].c_str(),
                      r.fit.theta_hat.theta()[static_cast<Index>(k)], r.fit.std_errors[static_cast<Index>(k)]);
        os << buf;
    }
    std::snprintf(buf, sizeof buf, "  LF %.2f   QM(6) %.2f   QM(12) %.2f\n", r.fit.loglik, r.qm6.value, r.qm12.value);
    os << buf;
    std::snprintf(buf, sizeof buf, "  K_n = %.3f (r = %zu, sup at x = %.3f)\n", r.T, r.r, r.argmax);
    os << buf;
    for (const auto& d : r.decisions) {
        std::snprintf(buf, sizeof buf, "  alpha %.2f: critical %.3f -> %s\n", d.alpha, d.critical_value,
                      d.reject ? "reject" : "accept");
        os << buf;
    }
    if (r.pvalue_mc) {
        std::snprintf(buf, sizeof buf, "  Monte Carlo p-value %.4f\n", *r.pvalue_mc);
        os << buf;
    }
    for (const auto& w : r.warnings) os << "  warning: " << w << "\n";
}

// ---------------------------------------------------------------------------
// Size / power experiments.

struct ExperimentConfig {
    ModelSpec model = ModelSpec::ar_garch();
    std::vector<double> params{0.5, 0.025, 0.25, 0.5};
    std::size_t n = 400;
    std::size_t reps = 500;
    std::string law = "normal";       ///< normal | a1..a5 | dexp
    bool rescale_laplace = false;     ///< use the unit-variance double exponential for a4
    std::vector<double> levels{0.01, 0.05, 0.10};
    std::string null_family = "normal";
    std::uint64_t seed = 1;
    unsigned workers = 1;
    std::size_t burn_in = kDefaultBurnIn;
    /// > 0: innovations from (1 - delta/sqrt(n)) F0 + (delta/sqrt(n)) law.
    double delta = 0.0;
    bool local = false;               ///< draw from (1 - delta/sqrt(n)) F0 + delta/sqrt(n) law even when delta = 0

    [[nodiscard]] ModelParams true_params() const {
        return {model, Eigen::Map<const Eigen::VectorXd>(params.data(), static_cast<Index>(params.size()))};
    }

    void validate() const {
        if (reps < 1) throw InputError("reps must be at least 1");
        if (n < 100) throw InputError("n must be at least 100");
        if (delta < 0.0 || delta >= 1.0) throw InputError("delta must lie in [0, 1)");
        check_levels(levels);
        NullFamily::from_key(null_family);
        InnovationLaw::from_key(law);
        true_params().validate();
    }

    /// Flat key-value JSON; absent keys keep their defaults.
    static ExperimentConfig from_json(const nlohmann::json& j) {
        ExperimentConfig c;
        try {
            const int p1 = j.value("p1", 1);
            const int p2 = j.value("p2", 1);
            c.model = ModelSpec::from_key(j.value("model", std::string("ar-garch")), p1, p2);
            c.params = j.value("params", c.params);
            c.n = j.value("n", c.n);
            c.reps = j.value("reps", c.reps);
            c.law = j.value("law", c.law);
            c.rescale_laplace = j.value("rescale_laplace", c.rescale_laplace);
            c.levels = j.value("levels", c.levels);
            c.null_family = j.value("null", c.null_family);
            c.seed = j.value("seed", c.seed);
            c.workers = j.value("workers", c.workers);
            c.burn_in = j.value("burn_in", c.burn_in);
            c.delta = j.value("delta", c.delta);
            c.local = j.value("local", c.local);
        } catch (const nlohmann::json::exception& e) {
            throw InputError(std::string("bad experiment config: ") + e.what());
        }
        c.validate();
        return c;
    }
};

struct LevelRate {
    double alpha = 0.0;
    double critical_value = 0.0;
    std::size_t rejections = 0;
    double rate = 0.0;
    double se = 0.0;  ///< binomial standard error sqrt(rate (1 - rate) / valid)
};

struct SizePowerResult {
    std::size_t reps = 0;
    std::size_t valid = 0;
    std::size_t failures = 0;
    std::vector<double> statistics;  ///< T per replication; NaN for failed fits
    std::vector<LevelRate> levels;

    void write_csv(std::ostream& os) const {
        os << "alpha,critical_value,rate,se,rejections,valid_reps,failures\n";
        char buf[160];
        for (const auto& l : levels) {
            std::snprintf(buf, sizeof buf, "%.2f,%.3f,%.6f,%.6f,%zu,%zu,%zu\n", l.alpha, l.critical_value, l.rate, l.se,
                          l.rejections, valid, failures);
            os << buf;
        }
    }
};

/// Type-erased innovation sampler over the library's RNG.
struct AnySampler {
    std::function<double(Rng&)> fn;
    double draw(Rng& rng) const { return fn(rng); }
};

inline AnySampler innovation_sampler(const ExperimentConfig& cfg) {
    const InnovationLaw law = InnovationLaw::from_key(cfg.law, cfg.rescale_laplace);
    if (!cfg.local && cfg.delta <= 0.0) return {[law](Rng& rng) { return law.draw(rng); }};
    const ContaminatedLaw mix(NullFamily::from_key(cfg.null_family), law,
                              cfg.delta / std::sqrt(static_cast<double>(cfg.n)));
    return {[mix](Rng& rng) { return mix.draw(rng); }};
}

/// Simulate, fit (QMLE + one-step), compute T and compare with the critical
/// values, per replication. Replication k draws from replication_rng(seed, k).
/// Failed fits are excluded when they are fewer than 2% of reps; otherwise the
/// run fails with EstimationError.
inline SizePowerResult run_size_power(const ExperimentConfig& cfg, const CriticalValues& critical = {}) {
    cfg.validate();
    const ModelParams theta = cfg.true_params();
    const NullFamily f0 = NullFamily::from_key(cfg.null_family);
    const AnySampler sampler = innovation_sampler(cfg);

    SizePowerResult out;
    out.reps = cfg.reps;
    out.statistics.assign(cfg.reps, std::numeric_limits<double>::quiet_NaN());
    parallel_for(cfg.reps, cfg.workers, [&](std::size_t k) {
        Rng rng = replication_rng(cfg.seed, k);
        const SimulatedPath sim = simulate(theta, sampler, cfg.n, cfg.burn_in, rng);
        try {
            const FitResult f = fit(sim.y, cfg.model, f0);
            const FilteredPath path = gradients(sim.y, f.theta_hat);
            out.statistics[k] = gof::kn_statistic(path, w_blocks(path), f0).T;
        } catch (const NumericError&) {
        }
    });

    for (double t : out.statistics) (std::isnan(t) ? out.failures : out.valid)++;
    if (out.failures * 50 > cfg.reps)
        throw EstimationError(std::to_string(out.failures) + " of " + std::to_string(cfg.reps) +
                              " replications failed to fit (limit 2%)");
    const std::size_t r = static_cast<std::size_t>(cfg.model.scale_dim());
    for (double alpha : cfg.levels) {
        LevelRate lr{alpha, critical(f0, r, alpha), 0, 0.0, 0.0};
        for (double t : out.statistics)
            if (!std::isnan(t) && t > lr.critical_value) ++lr.rejections;
        const auto v = static_cast<double>(out.valid);
        lr.rate = out.valid ? static_cast<double>(lr.rejections) / v : 0.0;
        lr.se = out.valid ? std::sqrt(lr.rate * (1.0 - lr.rate) / v) : 0.0;
        out.levels.push_back(lr);
    }
    return out;
}

struct LocalPowerPoint {
    std::size_t n = 0;
    double weight = 0.0;  ///< delta / sqrt(n)
    SizePowerResult result;
};

/// Rejection rates under F_n = (1 - delta/sqrt(n)) F0 + (delta/sqrt(n)) F~ with
/// F~ = cfg.law, along the given sample sizes.
inline std::vector<LocalPowerPoint> local_power_probe(ExperimentConfig cfg, double delta,
                                                      const std::vector<std::size_t>& sizes,
                                                      const CriticalValues& critical = {}) {
    if (delta < 0.0 || delta >= 1.0) throw InputError("delta must lie in [0, 1)");
    std::vector<LocalPowerPoint> out;
    for (std::size_t n : sizes) {
        cfg.n = n;
        cfg.delta = delta;
        cfg.local = true;
        out.push_back({n, delta / std::sqrt(static_cast<double>(n)), run_size_power(cfg, critical)});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Monte Carlo studies of the estimator and of the drift-corrected approximation.

struct EstimatorStudy {
    std::size_t n = 0;
    double rmse = 0.0;                 ///< sqrt(mean ||theta_hat - theta||^2)
    double median_error = 0.0;         ///< median ||theta_hat - theta||
    std::vector<double> errors;        ///< ||theta_hat - theta|| per replication
};

/// RMSE of the one-step estimator at the true parameter across replications.
inline EstimatorStudy one_step_error_study(const ModelParams& theta, const NullFamily& f0, std::size_t n,
                                           std::size_t reps, std::uint64_t seed, unsigned workers = 1) {
    EstimatorStudy s;
    s.n = n;
    s.errors.assign(reps, std::numeric_limits<double>::quiet_NaN());
    parallel_for(reps, workers, [&](std::size_t k) {
        Rng rng = replication_rng(seed, k);
        const SimulatedPath sim = simulate(theta, f0, n, kDefaultBurnIn, rng);
        try {
            const FitResult f = fit(sim.y, theta.spec(), f0);
            s.errors[k] = (f.theta_hat.theta() - theta.theta()).norm();
        } catch (const NumericError&) {
        }
    });
    double ss = 0.0;
    std::vector<double> ok;
    for (double e : s.errors)
        if (!std::isnan(e)) {
            ss += e * e;
            ok.push_back(e);
        }
    if (ok.empty()) throw EstimationError("every replication failed to fit");
    s.rmse = std::sqrt(ss / static_cast<double>(ok.size()));
    s.median_error = gof::detail::median(ok);
    return s;
}

/// Least-squares slope of log(rmse) on log(n).
inline double log_log_slope(const std::vector<EstimatorStudy>& studies) {
    const auto m = static_cast<double>(studies.size());
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (const auto& s : studies) {
        const double x = std::log(static_cast<double>(s.n));
        const double y = std::log(s.rmse);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    return (m * sxy - sx * sy) / (m * sxx - sx * sx);
}

/// sup-distance between K_n(., theta_hat) and its drift-corrected approximation
/// built at the true theta, per replication, for data simulated under F0.
inline std::vector<double> drift_check(const ModelParams& theta, const NullFamily& f0, std::size_t n,
                                       std::size_t reps, std::uint64_t seed, unsigned workers = 1) {
    std::vector<double> out(reps, std::numeric_limits<double>::quiet_NaN());
    parallel_for(reps, workers, [&](std::size_t k) {
        Rng rng = replication_rng(seed, k);
        const SimulatedPath sim = simulate(theta, f0, n, kDefaultBurnIn, rng);
        try {
            const FitResult f = fit(sim.y, theta.spec(), f0);
            const FilteredPath at_hat = gradients(sim.y, f.theta_hat);
            const FilteredPath at_true = gradients(sim.y, theta);
            const auto sz = static_cast<std::size_t>(n);
            out[k] = gof::drift_corrected_discrepancy(std::span<const double>(at_hat.eta.data(), sz),
                                                      w_blocks(at_hat).w22,
                                                      std::span<const double>(at_true.eta.data(), sz),
                                                      w_blocks(at_true).w22, f0);
        } catch (const NumericError&) {
        }
    });
    std::erase_if(out, [](double v) { return std::isnan(v); });
    return out;
}

}  // namespace garchgof::harness
