// Command-line front end: critical-value tables, simulation, fitting, testing
// and size/power experiments.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "garchgof/harness.hpp"
#include "garchgof/io.hpp"

namespace {

using namespace garchgof;

std::vector<double> parse_list(const std::string& text, const char* what) {
    std::vector<double> out;
    std::stringstream ss(text);
    for (std::string cell; std::getline(ss, cell, ',');) {
        double v = 0.0;
        if (!io::detail::parse_double(io::detail::trim(cell), v))
            throw InputError(std::string("bad ") + what + " entry '" + cell + "'");
        out.push_back(v);
    }
    if (out.empty()) throw InputError(std::string("empty ") + what + " list");
    return out;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream os(path);
    if (!os) throw InputError("cannot write '" + path + "'");
    return os;
}

struct ModelArgs {
    std::string model = "garch";
    int p1 = 1;
    int p2 = 1;

    void add(CLI::App* cmd) {
        cmd->add_option("--model", model, "garch | ar-garch | arma-garch")->capture_default_str();
        cmd->add_option("--p1", p1, "ARCH order (garch only)")->capture_default_str();
        cmd->add_option("--p2", p2, "GARCH order (garch only)")->capture_default_str();
    }
    [[nodiscard]] ModelSpec spec() const { return ModelSpec::from_key(model, p1, p2); }
};

int run(int argc, char** argv) {
    CLI::App app{"GARCH fitting and innovation goodness-of-fit testing"};
    app.require_subcommand(1);
    unsigned workers = 1;
    app.add_option("--workers", workers, "worker threads for Monte Carlo loops")->capture_default_str();

    // critvals
    auto* crit = app.add_subcommand("critvals", "simulate upper percentage points of K");
    std::string family = "normal", crit_out;
    std::size_t r_max = 5, crit_reps = limitproc::kDefaultReps, grid = limitproc::kDefaultGridPoints;
    std::uint64_t crit_seed = limitproc::kDefaultSeed;
    crit->add_option("--family", family, "normal | dexp")->capture_default_str();
    crit->add_option("--r-max", r_max)->capture_default_str();
    crit->add_option("--reps", crit_reps)->capture_default_str();
    crit->add_option("--grid", grid)->capture_default_str();
    crit->add_option("--seed", crit_seed)->capture_default_str();
    crit->add_option("--out", crit_out, "CSV file (stdout if omitted)");

    // simulate
    auto* sim = app.add_subcommand("simulate", "simulate a series");
    ModelArgs sim_model;
    sim_model.add(sim);
    std::string sim_params, law = "normal", sim_out;
    std::size_t sim_n = 500, burn_in = kDefaultBurnIn;
    std::uint64_t sim_seed = 1;
    bool rescale = false;
    sim->add_option("--params", sim_params, "comma-separated parameter vector")->required();
    sim->add_option("--n", sim_n)->capture_default_str();
    sim->add_option("--law", law, "normal | a1..a5 | dexp")->capture_default_str();
    sim->add_flag("--rescale-laplace", rescale, "unit-variance double exponential for a4");
    sim->add_option("--burn-in", burn_in)->capture_default_str();
    sim->add_option("--seed", sim_seed)->capture_default_str();
    sim->add_option("--out", sim_out, "output file (stdout if omitted)");

    // fit
    auto* fit_cmd = app.add_subcommand("fit", "quasi-MLE and one-step estimate");
    ModelArgs fit_model;
    fit_model.add(fit_cmd);
    std::string fit_input, fit_null = "normal";
    bool fit_json = false;
    fit_cmd->add_option("--input", fit_input)->required();
    fit_cmd->add_option("--null", fit_null, "normal | dexp")->capture_default_str();
    fit_cmd->add_flag("--json", fit_json);

    // test
    auto* test_cmd = app.add_subcommand("test", "goodness-of-fit test of the innovation law");
    ModelArgs test_model;
    test_model.add(test_cmd);
    std::string test_input, test_null = "normal", levels = "0.01,0.05,0.10", crit_cache;
    std::size_t pvalue_reps = 0;
    bool test_json = false;
    test_cmd->add_option("--input", test_input)->required();
    test_cmd->add_option("--null", test_null, "normal | dexp")->capture_default_str();
    test_cmd->add_option("--levels", levels)->capture_default_str();
    test_cmd->add_option("--critvals", crit_cache, "critical-value CSV cache");
    test_cmd->add_option("--pvalue-reps", pvalue_reps, "simulate K this many times for a Monte Carlo p-value");
    test_cmd->add_flag("--json", test_json);

    // experiment
    auto* exp_cmd = app.add_subcommand("experiment", "size/power experiment from a JSON config");
    std::string config_path, exp_out, exp_cache;
    exp_cmd->add_option("--config", config_path)->required();
    exp_cmd->add_option("--critvals", exp_cache, "critical-value CSV cache");
    exp_cmd->add_option("--out", exp_out, "CSV file (stdout if omitted)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    auto load_cache = [](const std::string& path) {
        if (path.empty()) return harness::CriticalValues{};
        std::ifstream is(path);
        if (!is) throw InputError("cannot read '" + path + "'");
        return harness::CriticalValues(limitproc::CritTable::read_csv(is));
    };

    if (*crit) {
        const NullFamily f0 = NullFamily::from_key(family);
        if (crit_reps < 1000) std::cerr << "warning: " << crit_reps << " replications give low-precision percentiles\n";
        const auto table = limitproc::tabulate(f0, f0.key(), r_max, crit_reps, grid, crit_seed, workers);
        if (crit_out.empty()) {
            table.write_csv(std::cout);
        } else {
            auto os = open_out(crit_out);
            table.write_csv(os);
        }
    } else if (*sim) {
        const ModelSpec spec = sim_model.spec();
        const auto p = parse_list(sim_params, "parameter");
        if (static_cast<Index>(p.size()) != spec.dim())
            throw InputError("model " + spec.key() + " needs " + std::to_string(spec.dim()) + " parameters");
        const ModelParams theta(spec, Eigen::Map<const Eigen::VectorXd>(p.data(), spec.dim()));
        const InnovationLaw innov = InnovationLaw::from_key(law, rescale);
        Rng rng(sim_seed);
        const auto path = simulate(theta, innov, sim_n, burn_in, rng);
        if (sim_out.empty()) {
            io::write_series(std::cout, path.y);
        } else {
            auto os = open_out(sim_out);
            io::write_series(os, path.y);
        }
    } else if (*fit_cmd) {
        const auto y = io::read_series(fit_input);
        const NullFamily f0 = NullFamily::from_key(fit_null);
        const FitResult f = fit(y, fit_model.spec(), f0);
        if (fit_json) {
            std::cout << harness::fit_json(f).dump(2) << "\n";
        } else {
            const auto names = f.theta_hat.spec().parameter_names();
            std::printf("%-8s %12s %12s %10s\n", "param", "qmle", "one-step", "se");
            for (std::size_t k = 0; k < names.size(); ++k) {
                const auto i = static_cast<Index>(k);
                std::printf("%-8s %12.6f %12.6f %10.6f\n", names[k].c_str(), f.theta_tilde.theta()[i],
                            f.theta_hat.theta()[i], f.std_errors[i]);
            }
            std::printf("loglik %.4f\n", f.loglik);
            for (const auto& w : f.warnings) std::printf("warning: %s\n", w.c_str());
        }
    } else if (*test_cmd) {
        const auto y = io::read_series(test_input);
        const NullFamily f0 = NullFamily::from_key(test_null);
        const ModelSpec spec = test_model.spec();
        harness::AnalyzeOptions opts;
        opts.levels = parse_list(levels, "level");
        opts.critical = load_cache(crit_cache);
        if (pvalue_reps > 0)
            opts.k_sample = limitproc::simulate_K_distribution(f0, static_cast<std::size_t>(spec.scale_dim()),
                                                               limitproc::kDefaultGridPoints, pvalue_reps,
                                                               limitproc::kDefaultSeed, workers);
        const auto report = harness::analyze(y, spec, f0, opts);
        if (test_json)
            std::cout << harness::to_json(report).dump(2) << "\n";
        else
            harness::write_text(std::cout, report);
    } else if (*exp_cmd) {
        std::ifstream is(config_path);
        if (!is) throw InputError("cannot read '" + config_path + "'");
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(is);
        } catch (const nlohmann::json::parse_error& e) {
            throw InputError(std::string("config is not valid JSON: ") + e.what());
        }
        if (!j.is_object()) throw InputError("config must be a JSON object");
        auto cfg = harness::ExperimentConfig::from_json(j);
        if (!j.contains("workers")) cfg.workers = workers;
        const auto result = harness::run_size_power(cfg, load_cache(exp_cache));
        if (exp_out.empty()) {
            result.write_csv(std::cout);
        } else {
            auto os = open_out(exp_out);
            result.write_csv(os);
        }
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const garchgof::InputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const garchgof::NumericError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
