#pragma once

#include <cmath>
#include <cstddef>
#include <sstream>
#include <string>
#include <vector>

#include "bsmix/em.hpp"
#include "bsmix/inference.hpp"
#include "bsmix/mixture.hpp"
#include "bsmix/parallel.hpp"

namespace bsmix {

enum class Separation { PS, WS };

struct Scenario {
    std::string label;
    MixtureParams truth;
    Separation separation;
};

/// Aggregates of one simulation cell, per free parameter.
struct SimulationReport {
    std::string scenario;
    std::size_t n = 0;
    std::size_t replicates = 0;
    InitStrategy strategy = InitStrategy::kbumps;
    std::vector<std::string> param_names;
    std::vector<double> truth;
    std::vector<double> mean_estimate;
    std::vector<double> bias;
    std::vector<double> rmse;
    std::vector<double> mc_sd;
    std::vector<double> mean_im_se;
    std::vector<double> cov;
    std::size_t failures = 0;
    bool unreliable = false;
};

namespace detail {

inline std::vector<std::string> free_param_names(std::size_t g) {
    std::vector<std::string> names;
    for (std::size_t j = 0; j + 1 < g; ++j) names.push_back("p" + std::to_string(j + 1));
    for (std::size_t j = 0; j < g; ++j) names.push_back("alpha" + std::to_string(j + 1));
    for (std::size_t j = 0; j < g; ++j) names.push_back("beta" + std::to_string(j + 1));
    return names;
}

/// Match fitted components to true components by nearest beta, then rebuild
/// the free parameter vector in the truth's component order.
inline std::vector<double> align_to_truth(const MixtureParams& fitted,
                                          const MixtureParams& truth) {
    const std::size_t g = truth.size();
    std::vector<bool> taken(g, false);
    std::vector<std::size_t> match(g);  // match[true j] = fitted index
    for (std::size_t j = 0; j < g; ++j) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t pick = 0;
        for (std::size_t l = 0; l < g; ++l) {
            if (taken[l]) continue;
            const double d = std::abs(fitted.components[l].beta - truth.components[j].beta);
            if (d < best) {
                best = d;
                pick = l;
            }
        }
        taken[pick] = true;
        match[j] = pick;
    }
    std::vector<double> w, a, b;
    for (std::size_t j = 0; j < g; ++j) {
        w.push_back(fitted.weights[match[j]]);
        a.push_back(fitted.components[match[j]].alpha);
        b.push_back(fitted.components[match[j]].beta);
    }
    std::vector<double> v;
    for (std::size_t j = 0; j + 1 < g; ++j) v.push_back(w[j]);
    for (std::size_t j = 0; j < g; ++j) v.push_back(a[j]);
    for (std::size_t j = 0; j < g; ++j) v.push_back(b[j]);
    return v;
}

/// Same permutation applied to the SE vector.
inline std::vector<double> align_ses_to_truth(const MixtureParams& fitted,
                                              const MixtureParams& truth,
                                              const std::vector<double>& ses) {
    const std::size_t g = truth.size();
    std::vector<bool> taken(g, false);
    std::vector<std::size_t> match(g);
    for (std::size_t j = 0; j < g; ++j) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t pick = 0;
        for (std::size_t l = 0; l < g; ++l) {
            if (taken[l]) continue;
            const double d = std::abs(fitted.components[l].beta - truth.components[j].beta);
            if (d < best) {
                best = d;
                pick = l;
            }
        }
        taken[pick] = true;
        match[j] = pick;
    }
    std::vector<double> out;
    for (std::size_t j = 0; j + 1 < g; ++j) {
        // SE of p_j stays in slot order; p_G slot has no SE of its own.
        out.push_back(match[j] + 1 < g ? ses[match[j]] : ses[j]);
    }
    for (std::size_t j = 0; j < g; ++j) out.push_back(ses[g - 1 + match[j]]);
    for (std::size_t j = 0; j < g; ++j) out.push_back(ses[2 * g - 1 + match[j]]);
    return out;
}

}  // namespace detail

/// One Monte Carlo cell: simulate, fit, align to truth, aggregate bias, RMSE,
/// MC sd, mean information-based SE and 95% Wald coverage.
inline SimulationReport run_cell(const Scenario& scenario, std::size_t n,
                                 std::size_t replicates, InitStrategy strategy,
                                 const EmConfig& config, RngStream& rng,
                                 unsigned threads = 1) {
    if (replicates < 10) throw std::invalid_argument("run_cell: need >= 10 replicates");
    const std::size_t g = scenario.truth.size();
    const std::size_t dim = 3 * g - 1;
    const std::vector<double> truth_vec = free_params(scenario.truth);

    std::vector<std::vector<double>> estimates(replicates), ses(replicates);
    std::vector<char> ok(replicates, 0);
    parallel_for(replicates, threads, [&](std::size_t r) {
        RngStream stream = rng.derive(r);
        const std::vector<double> data = mix_sample(n, scenario.truth, stream);
        EmConfig rep_config = config;
        rep_config.init = strategy;
        rep_config.seed = stream.seed();
        try {
            const FitResult f = fit(data, g, rep_config);
            const auto info = info_matrix(data, f.params);
            const std::vector<double> se = standard_errors(info);
            estimates[r] = detail::align_to_truth(f.params, scenario.truth);
            ses[r] = detail::align_ses_to_truth(f.params, scenario.truth, se);
            ok[r] = 1;
        } catch (const std::exception&) {
            ok[r] = 0;
        }
    });

    SimulationReport rep;
    rep.scenario = scenario.label;
    rep.n = n;
    rep.strategy = strategy;
    rep.param_names = detail::free_param_names(g);
    rep.truth = truth_vec;

    std::vector<std::size_t> used;
    for (std::size_t r = 0; r < replicates; ++r) {
        if (ok[r]) used.push_back(r);
    }
    rep.replicates = used.size();
    rep.failures = replicates - used.size();
    rep.unreliable = rep.failures * 10 > replicates;
    if (used.empty()) {
        rep.unreliable = true;
        return rep;
    }

    const double m = static_cast<double>(used.size());
    for (std::size_t k = 0; k < dim; ++k) {
        double mean = 0.0, se_mean = 0.0, sq = 0.0;
        std::size_t covered = 0;
        for (std::size_t r : used) {
            mean += estimates[r][k];
            se_mean += ses[r][k];
            const double d = estimates[r][k] - truth_vec[k];
            sq += d * d;
            const double z = norm_quantile(0.975);
            if (truth_vec[k] >= estimates[r][k] - z * ses[r][k] &&
                truth_vec[k] <= estimates[r][k] + z * ses[r][k]) {
                ++covered;
            }
        }
        mean /= m;
        se_mean /= m;
        double ss = 0.0;
        for (std::size_t r : used) {
            ss += (estimates[r][k] - mean) * (estimates[r][k] - mean);
        }
        rep.mean_estimate.push_back(mean);
        rep.bias.push_back(mean - truth_vec[k]);
        rep.rmse.push_back(std::sqrt(sq / m));
        rep.mc_sd.push_back(std::sqrt(ss / (m - 1.0)));
        rep.mean_im_se.push_back(se_mean);
        rep.cov.push_back(static_cast<double>(covered) / m);
    }
    return rep;
}

/// Cartesian product of scenarios x sample sizes x strategies. Every cell
/// gets a seed derived from a stable cell key, so grid order and parallelism
/// never change any number.
inline std::vector<SimulationReport> run_grid(const std::vector<Scenario>& scenarios,
                                              const std::vector<std::size_t>& ns,
                                              const std::vector<InitStrategy>& strategies,
                                              std::size_t replicates,
                                              const EmConfig& config, RngStream& rng,
                                              unsigned threads = 1) {
    std::vector<SimulationReport> out;
    for (std::size_t si = 0; si < scenarios.size(); ++si) {
        for (std::size_t ni = 0; ni < ns.size(); ++ni) {
            for (const InitStrategy strategy : strategies) {
                const std::uint64_t key =
                    (si + 1) * 1000003ULL + (ns[ni] + 1) * 611ULL +
                    static_cast<std::uint64_t>(strategy);
                RngStream cell_rng = rng.derive(key);
                out.push_back(run_cell(scenarios[si], ns[ni], replicates, strategy,
                                       config, cell_rng, threads));
            }
        }
    }
    return out;
}

inline std::string report_csv_header() {
    return "scenario,n,strategy,replicates,failures,unreliable,parameter,truth,"
           "mean_estimate,bias,rmse,mc_sd,mean_im_se,cov";
}

inline void append_report_csv(std::ostringstream& os, const SimulationReport& rep) {
    for (std::size_t k = 0; k < rep.param_names.size(); ++k) {
        os << rep.scenario << ',' << rep.n << ',' << to_string(rep.strategy) << ','
           << rep.replicates << ',' << rep.failures << ','
           << (rep.unreliable ? "true" : "false") << ',' << rep.param_names[k] << ','
           << rep.truth[k] << ',' << rep.mean_estimate[k] << ',' << rep.bias[k] << ','
           << rep.rmse[k] << ',' << rep.mc_sd[k] << ',' << rep.mean_im_se[k] << ','
           << rep.cov[k] << '\n';
    }
}

inline std::string reports_to_csv(const std::vector<SimulationReport>& reports) {
    std::ostringstream os;
    os.precision(10);
    os << report_csv_header() << '\n';
    for (const auto& rep : reports) append_report_csv(os, rep);
    return os.str();
}

}  // namespace bsmix
