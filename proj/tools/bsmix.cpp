// bsmix: fitting and analysis of finite Birnbaum-Saunders mixtures.

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "bsmix/em.hpp"
#include "bsmix/inference.hpp"
#include "bsmix/io.hpp"
#include "bsmix/mixture.hpp"
#include "bsmix/study.hpp"

using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitPartial = 4;
constexpr const char* kVersion = "0.1.0";

std::string timestamp_utc() {
    const std::time_t now = std::time(nullptr);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    return buf;
}

std::uint64_t resolve_seed(std::optional<std::uint64_t> flag_seed) {
    if (flag_seed) return *flag_seed;
    if (const char* env = std::getenv("BSMIX_SEED")) {
        return std::strtoull(env, nullptr, 10);
    }
    return 0;
}

json manifest(const std::string& command, const std::string& input,
              const bsmix::EmConfig& config, std::uint64_t seed) {
    return json{{"command", command},
                {"input", input},
                {"config",
                 {{"tol", config.tol},
                  {"max_iter", config.max_iter},
                  {"init", bsmix::to_string(config.init)},
                  {"beta_bracket_factor", config.beta_bracket_factor}}},
                {"seed", seed},
                {"version", kVersion},
                {"timestamp", timestamp_utc()}};
}

json params_to_json(const bsmix::MixtureParams& p) {
    json weights = json::array(), alphas = json::array(), betas = json::array();
    for (std::size_t j = 0; j < p.size(); ++j) {
        weights.push_back(p.weights[j]);
        alphas.push_back(p.components[j].alpha);
        betas.push_back(p.components[j].beta);
    }
    return json{{"weights", weights}, {"alphas", alphas}, {"betas", betas}};
}

void write_output(const std::string& text, const std::string& path) {
    if (path.empty()) {
        std::cout << text;
        if (!text.empty() && text.back() != '\n') std::cout << '\n';
        return;
    }
    std::ofstream out(path);
    if (!out) throw bsmix::InputError("cannot open output file: " + path);
    out << text;
}

bsmix::InitStrategy parse_init(const std::string& name) {
    if (name == "kbumps") return bsmix::InitStrategy::kbumps;
    if (name == "kmeans") return bsmix::InitStrategy::kmeans;
    if (name == "kmedoids") return bsmix::InitStrategy::kmedoids;
    throw bsmix::InputError("unknown init strategy: " + name);
}

struct CommonOpts {
    std::string input;
    std::string output;
    std::string format = "json";
    std::string init = "kbumps";
    double tol = 1e-6;
    std::size_t max_iter = 2000;
    std::optional<std::uint64_t> seed;
    std::size_t bootstrap = 0;
    unsigned threads = 1;

    bsmix::EmConfig config() const {
        bsmix::EmConfig c;
        c.tol = tol;
        c.max_iter = max_iter;
        c.init = parse_init(init);
        c.seed = resolve_seed(seed);
        return c;
    }
};

void add_common_flags(CLI::App* cmd, CommonOpts& opts, bool with_input = true) {
    if (with_input) {
        cmd->add_option("--input,-i", opts.input, "one-column CSV of positive reals")
            ->required();
    }
    cmd->add_option("--init", opts.init, "initialization strategy")
        ->check(CLI::IsMember({"kbumps", "kmeans", "kmedoids"}));
    cmd->add_option("--tol", opts.tol, "EM tolerance (Aitken criterion)");
    cmd->add_option("--max-iter", opts.max_iter, "maximum EM iterations");
    cmd->add_option("--seed", opts.seed, "random seed (fallback: BSMIX_SEED env)");
    cmd->add_option("--threads", opts.threads, "worker thread cap");
    cmd->add_option("--output", opts.output, "output path (default stdout)");
    cmd->add_option("--format", opts.format, "output format")
        ->check(CLI::IsMember({"json", "csv", "table"}));
}

json fit_report(const std::vector<double>& data, std::size_t g,
                const CommonOpts& opts) {
    const bsmix::EmConfig config = opts.config();
    const bsmix::FitResult result = bsmix::fit(data, g, config);
    const auto info = bsmix::info_matrix(data, result.params);
    const std::vector<double> ses = bsmix::standard_errors(info);
    const std::vector<double> est = bsmix::free_params(result.params);
    const auto cis = bsmix::wald_ci(est, ses, 0.95);
    const auto ab = bsmix::aic_bic(result.loglik, 3 * g - 1, data.size());

    json report{{"schema", 1},
                {"manifest", manifest("fit", opts.input, config, config.seed)},
                {"n", data.size()},
                {"components", g},
                {"estimates", params_to_json(result.params)},
                {"loglik", result.loglik},
                {"aic", ab.aic},
                {"bic", ab.bic},
                {"iterations", result.iterations},
                {"converged", result.converged},
                {"init_fallback_used", result.init_fallback_used}};
    if (result.rate_r) report["convergence_rate"] = *result.rate_r;

    json se_json = json::array(), ci_json = json::array();
    const auto names = bsmix::detail::free_param_names(g);
    for (std::size_t k = 0; k < ses.size(); ++k) {
        se_json.push_back({{"parameter", names[k]}, {"estimate", est[k]}, {"se", ses[k]}});
        ci_json.push_back({{"parameter", names[k]},
                           {"lower", cis[k].lower},
                           {"upper", cis[k].upper}});
    }
    report["standard_errors"] = se_json;
    report["wald_ci_95"] = ci_json;

    if (opts.bootstrap > 0) {
        bsmix::RngStream rng(config.seed + 0x5eedULL);
        const auto boot =
            bsmix::bootstrap_se(data, result, opts.bootstrap, config, rng, opts.threads);
        json bse = json::array(), bci = json::array();
        for (std::size_t k = 0; k < boot.ses.size(); ++k) {
            bse.push_back({{"parameter", names[k]}, {"se", boot.ses[k]}});
            bci.push_back({{"parameter", names[k]},
                           {"lower", boot.percentile_cis[k].lower},
                           {"upper", boot.percentile_cis[k].upper}});
        }
        report["bootstrap"] = {{"replicates", opts.bootstrap},
                               {"failures", boot.failures},
                               {"se", bse},
                               {"percentile_ci_95", bci}};
    }
    return report;
}

std::string fit_report_table(const json& report) {
    std::ostringstream os;
    os.precision(10);
    os << "FM-BS fit: G=" << report["components"] << ", n=" << report["n"]
       << ", loglik=" << report["loglik"].get<double>()
       << ", AIC=" << report["aic"].get<double>()
       << ", BIC=" << report["bic"].get<double>() << '\n';
    os << "iterations=" << report["iterations"]
       << " converged=" << report["converged"];
    if (report.contains("convergence_rate")) {
        os << " r=" << report["convergence_rate"].get<double>();
    }
    os << "\n\nparameter      estimate        se           95% CI\n";
    const auto& ses = report["standard_errors"];
    const auto& cis = report["wald_ci_95"];
    for (std::size_t k = 0; k < ses.size(); ++k) {
        os << ses[k]["parameter"].get<std::string>() << '\t'
           << ses[k]["estimate"].get<double>() << '\t' << ses[k]["se"].get<double>()
           << "\t[" << cis[k]["lower"].get<double>() << ", "
           << cis[k]["upper"].get<double>() << "]\n";
    }
    return os.str();
}

int cmd_fit(const CommonOpts& opts, std::size_t g) {
    const std::vector<double> data = bsmix::read_data_csv(opts.input);
    const json report = fit_report(data, g, opts);
    if (opts.format == "table") {
        write_output(fit_report_table(report), opts.output);
    } else {
        write_output(report.dump(2), opts.output);
    }
    return kExitOk;
}

int cmd_select(const CommonOpts& opts, std::size_t g_min, std::size_t g_max) {
    const std::vector<double> data = bsmix::read_data_csv(opts.input);
    const bsmix::EmConfig config = opts.config();
    json rows = json::array();
    bool any_failed = false;
    double best_aic = std::numeric_limits<double>::infinity();
    double best_bic = std::numeric_limits<double>::infinity();
    std::size_t aic_g = 0, bic_g = 0;
    for (std::size_t g = g_min; g <= g_max; ++g) {
        json row{{"components", g}};
        try {
            const bsmix::FitResult r = bsmix::fit(data, g, config);
            const auto ab = bsmix::aic_bic(r.loglik, 3 * g - 1, data.size());
            row["loglik"] = r.loglik;
            row["aic"] = ab.aic;
            row["bic"] = ab.bic;
            row["iterations"] = r.iterations;
            row["converged"] = r.converged;
            if (r.rate_r) row["convergence_rate"] = *r.rate_r;
            row["failed"] = false;
            if (ab.aic < best_aic) {
                best_aic = ab.aic;
                aic_g = g;
            }
            if (ab.bic < best_bic) {
                best_bic = ab.bic;
                bic_g = g;
            }
        } catch (const std::exception& e) {
            row["failed"] = true;
            row["error"] = e.what();
            any_failed = true;
        }
        rows.push_back(row);
    }
    json report{{"schema", 1},
                {"manifest", manifest("select", opts.input, config, config.seed)},
                {"rows", rows},
                {"aic_best_g", aic_g},
                {"bic_best_g", bic_g}};
    if (opts.format == "csv") {
        std::ostringstream os;
        os.precision(10);
        os << "components,loglik,aic,bic,iterations,convergence_rate,failed\n";
        for (const auto& row : rows) {
            os << row["components"] << ',';
            if (row["failed"].get<bool>()) {
                os << ",,,,,true\n";
            } else {
                os << row["loglik"].get<double>() << ',' << row["aic"].get<double>()
                   << ',' << row["bic"].get<double>() << ',' << row["iterations"] << ',';
                if (row.contains("convergence_rate")) {
                    os << row["convergence_rate"].get<double>();
                }
                os << ",false\n";
            }
        }
        write_output(os.str(), opts.output);
    } else if (opts.format == "table") {
        std::ostringstream os;
        os.precision(10);
        os << "G\tloglik\taic\tbic\titer\tconverged\n";
        for (const auto& row : rows) {
            os << row["components"] << '\t';
            if (row["failed"].get<bool>()) {
                os << "failed: " << row["error"].get<std::string>() << '\n';
            } else {
                os << row["loglik"].get<double>() << '\t' << row["aic"].get<double>()
                   << '\t' << row["bic"].get<double>() << '\t' << row["iterations"]
                   << '\t' << row["converged"] << '\n';
            }
        }
        os << "best by AIC: G=" << aic_g << "; best by BIC: G=" << bic_g << '\n';
        write_output(os.str(), opts.output);
    } else {
        write_output(report.dump(2), opts.output);
    }
    return any_failed ? kExitPartial : kExitOk;
}

int cmd_lrt(const CommonOpts& opts, std::size_t g_null, std::size_t g_alt,
            std::size_t B) {
    const std::vector<double> data = bsmix::read_data_csv(opts.input);
    const bsmix::EmConfig config = opts.config();
    bsmix::RngStream rng(config.seed);
    const auto result =
        bsmix::bootstrap_lrt(data, g_null, g_alt, B, config, rng, opts.threads);
    json report{{"schema", 1},
                {"manifest", manifest("lrt", opts.input, config, config.seed)},
                {"g_null", g_null},
                {"g_alt", g_alt},
                {"B", result.B},
                {"stat_obs", result.stat_obs},
                {"p_value", result.p_value},
                {"loglik_null", result.loglik_null},
                {"loglik_alt", result.loglik_alt},
                {"floored_replicates", result.floored_replicates},
                {"stats_boot", result.stats_boot}};
    if (opts.format == "table") {
        std::ostringstream os;
        os.precision(10);
        os << "bootstrap LRT: G=" << g_null << " vs G=" << g_alt << ", B=" << result.B
           << '\n'
           << "loglik_null=" << result.loglik_null
           << " loglik_alt=" << result.loglik_alt << '\n'
           << "stat=" << result.stat_obs << " p=" << result.p_value
           << " floored=" << result.floored_replicates << '\n';
        write_output(os.str(), opts.output);
    } else {
        write_output(report.dump(2), opts.output);
    }
    return kExitOk;
}

int cmd_curves(const CommonOpts& opts, const std::string& params_str, double grid_min,
               double grid_max, std::size_t grid_points) {
    const bsmix::MixtureParams params = bsmix::parse_mixture_string(params_str);
    if (!(grid_min > 0.0) || !(grid_max > grid_min) || grid_points < 1) {
        throw bsmix::InputError("curves: need 0 < grid-min < grid-max and points >= 1");
    }
    std::ostringstream os;
    os << "y,pdf,cdf,sf,hf\n";
    for (std::size_t i = 0; i < grid_points; ++i) {
        const double y =
            grid_points == 1
                ? grid_min
                : grid_min + (grid_max - grid_min) * static_cast<double>(i) /
                                 static_cast<double>(grid_points - 1);
        os << bsmix::format_real(y) << ',' << bsmix::format_real(bsmix::mix_pdf(y, params))
           << ',' << bsmix::format_real(bsmix::mix_cdf(y, params)) << ','
           << bsmix::format_real(bsmix::mix_survival(y, params)) << ','
           << bsmix::format_real(bsmix::mix_hazard(y, params)) << '\n';
    }
    write_output(os.str(), opts.output);
    return kExitOk;
}

int cmd_simulate(const CommonOpts& opts, const std::string& params_str, std::size_t n) {
    const bsmix::MixtureParams params = bsmix::parse_mixture_string(params_str);
    bsmix::RngStream rng(resolve_seed(opts.seed));
    const std::vector<double> data = bsmix::mix_sample(n, params, rng);
    std::ostringstream os;
    os << "y\n";
    for (double y : data) os << bsmix::format_real(y) << '\n';
    write_output(os.str(), opts.output);
    return kExitOk;
}

int cmd_study(const CommonOpts& opts, const std::vector<std::string>& scenario_strs,
              const std::vector<std::size_t>& ns,
              const std::vector<std::string>& strategy_names, std::size_t replicates) {
    const bsmix::EmConfig config = opts.config();
    std::vector<bsmix::Scenario> scenarios;
    if (scenario_strs.empty()) {
        scenarios.push_back({"scenario1-PS",
                             bsmix::parse_mixture_string("0.6,0.4;0.25,0.5;0.5,1.5"),
                             bsmix::Separation::PS});
        scenarios.push_back({"scenario2-WS",
                             bsmix::parse_mixture_string("0.8,0.2;0.25,0.25;1.0,5.0"),
                             bsmix::Separation::WS});
    } else {
        for (std::size_t k = 0; k < scenario_strs.size(); ++k) {
            scenarios.push_back({"scenario" + std::to_string(k + 1),
                                 bsmix::parse_mixture_string(scenario_strs[k]),
                                 bsmix::Separation::WS});
        }
    }
    std::vector<bsmix::InitStrategy> strategies;
    for (const auto& name : strategy_names) strategies.push_back(parse_init(name));
    if (strategies.empty()) strategies.push_back(bsmix::InitStrategy::kbumps);

    bsmix::RngStream rng(config.seed);
    const auto reports =
        bsmix::run_grid(scenarios, ns, strategies, replicates, config, rng, opts.threads);
    if (opts.format == "json") {
        json rows = json::array();
        for (const auto& rep : reports) {
            json row{{"scenario", rep.scenario},
                     {"n", rep.n},
                     {"strategy", bsmix::to_string(rep.strategy)},
                     {"replicates", rep.replicates},
                     {"failures", rep.failures},
                     {"unreliable", rep.unreliable}};
            json per_param = json::array();
            for (std::size_t k = 0; k < rep.param_names.size(); ++k) {
                per_param.push_back({{"parameter", rep.param_names[k]},
                                     {"truth", rep.truth[k]},
                                     {"mean_estimate", rep.mean_estimate[k]},
                                     {"bias", rep.bias[k]},
                                     {"rmse", rep.rmse[k]},
                                     {"mc_sd", rep.mc_sd[k]},
                                     {"mean_im_se", rep.mean_im_se[k]},
                                     {"cov", rep.cov[k]}});
            }
            row["parameters"] = per_param;
            rows.push_back(row);
        }
        json report{{"schema", 1},
                    {"manifest", manifest("study", "", config, config.seed)},
                    {"cells", rows}};
        write_output(report.dump(2), opts.output);
    } else {
        write_output(bsmix::reports_to_csv(reports), opts.output);
    }
    return kExitOk;
}

int cmd_reliability(const CommonOpts& opts, const std::string& strength_str,
                    const std::string& stress_str) {
    const auto strength = bsmix::parse_mixture_string(strength_str);
    const auto stress = bsmix::parse_mixture_string(stress_str);
    const double r = bsmix::stress_strength(strength, stress);
    json report{{"schema", 1},
                {"manifest", manifest("reliability", "", opts.config(),
                                      resolve_seed(opts.seed))},
                {"reliability", r}};
    write_output(report.dump(2), opts.output);
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Finite mixtures of Birnbaum-Saunders distributions"};
    app.require_subcommand(1);

    CommonOpts fit_opts;
    std::size_t fit_g = 1;
    auto* fit_cmd = app.add_subcommand("fit", "fit an FM-BS model by maximum likelihood");
    add_common_flags(fit_cmd, fit_opts);
    fit_cmd->add_option("--components,-g", fit_g, "number of components")->required();
    fit_cmd->add_option("--bootstrap", fit_opts.bootstrap,
                        "bootstrap replicates for SE/CI (0 = off)");

    CommonOpts sel_opts;
    std::size_t g_min = 1, g_max = 3;
    auto* sel_cmd = app.add_subcommand("select", "fit a range of G, report AIC/BIC");
    add_common_flags(sel_cmd, sel_opts);
    sel_cmd->add_option("--g-min", g_min, "smallest component count");
    sel_cmd->add_option("--g-max", g_max, "largest component count");

    CommonOpts lrt_opts;
    std::size_t lrt_null = 1, lrt_alt = 2, lrt_B = 99;
    auto* lrt_cmd =
        app.add_subcommand("lrt", "parametric bootstrap LRT for the component count");
    add_common_flags(lrt_cmd, lrt_opts);
    lrt_cmd->add_option("--null", lrt_null, "components under the null");
    lrt_cmd->add_option("--alt", lrt_alt, "components under the alternative");
    lrt_cmd->add_option("--bootstrap", lrt_B, "bootstrap replicates");

    CommonOpts curves_opts;
    std::string curves_params;
    double grid_min = 0.01, grid_max = 10.0;
    std::size_t grid_points = 200;
    auto* curves_cmd = app.add_subcommand("curves", "pdf/cdf/sf/hf values on a grid");
    add_common_flags(curves_cmd, curves_opts, false);
    curves_cmd->add_option("--params", curves_params,
                           "mixture as 'p1,..;alpha1,..;beta1,..'")
        ->required();
    curves_cmd->add_option("--grid-min", grid_min, "grid lower end");
    curves_cmd->add_option("--grid-max", grid_max, "grid upper end");
    curves_cmd->add_option("--grid-points", grid_points, "grid size");

    CommonOpts sim_opts;
    std::string sim_params;
    std::size_t sim_n = 100;
    auto* sim_cmd = app.add_subcommand("simulate", "draw a dataset from an FM-BS model");
    add_common_flags(sim_cmd, sim_opts, false);
    sim_cmd->add_option("--params", sim_params, "mixture parameter string")->required();
    sim_cmd->add_option("-n,--size", sim_n, "sample size");

    CommonOpts study_opts;
    std::vector<std::string> study_scenarios;
    std::vector<std::size_t> study_ns{100};
    std::vector<std::string> study_strategies;
    std::size_t study_reps = 200;
    auto* study_cmd = app.add_subcommand("study", "Monte Carlo recovery study grid");
    add_common_flags(study_cmd, study_opts, false);
    study_cmd->add_option("--scenario", study_scenarios,
                          "truth parameter string (repeatable; default: built-in PS/WS)");
    study_cmd->add_option("-n,--sizes", study_ns, "sample sizes");
    study_cmd->add_option("--strategies", study_strategies,
                          "initialization strategies (default kbumps)");
    study_cmd->add_option("--replicates", study_reps, "Monte Carlo replicates per cell");

    CommonOpts rel_opts;
    std::string rel_x, rel_y;
    auto* rel_cmd =
        app.add_subcommand("reliability", "stress-strength reliability P(Y < X)");
    add_common_flags(rel_cmd, rel_opts, false);
    rel_cmd->add_option("--strength", rel_x, "strength (X) mixture parameter string")
        ->required();
    rel_cmd->add_option("--stress", rel_y, "stress (Y) mixture parameter string")
        ->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitInput;
    }

    try {
        if (fit_cmd->parsed()) return cmd_fit(fit_opts, fit_g);
        if (sel_cmd->parsed()) return cmd_select(sel_opts, g_min, g_max);
        if (lrt_cmd->parsed()) return cmd_lrt(lrt_opts, lrt_null, lrt_alt, lrt_B);
        if (curves_cmd->parsed()) {
            return cmd_curves(curves_opts, curves_params, grid_min, grid_max, grid_points);
        }
        if (sim_cmd->parsed()) return cmd_simulate(sim_opts, sim_params, sim_n);
        if (study_cmd->parsed()) {
            return cmd_study(study_opts, study_scenarios, study_ns, study_strategies,
                             study_reps);
        }
        if (rel_cmd->parsed()) return cmd_reliability(rel_opts, rel_x, rel_y);
    } catch (const bsmix::InputError& e) {
        std::cerr << "input error: " << e.what() << '\n';
        return kExitInput;
    } catch (const std::domain_error& e) {
        std::cerr << "input error: " << e.what() << '\n';
        return kExitInput;
    } catch (const std::invalid_argument& e) {
        std::cerr << "input error: " << e.what() << '\n';
        return kExitInput;
    } catch (const std::exception& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kExitNumerical;
    }
    return kExitOk;
}
