#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bsmix/em.hpp"
#include "bsmix/mixture.hpp"
#include "bsmix/parallel.hpp"

namespace bsmix {

/// Gradient of log f(y; theta) with respect to the 3G-1 free parameters,
/// ordered (p_1..p_{G-1}, alpha_1..alpha_G, beta_1..beta_G). The redundant
/// weight p_G is eliminated, which is why the p_j score subtracts f_G.
inline std::vector<double> score_vector(double y, const MixtureParams& params) {
    const std::size_t g = params.size();
    const double f = mix_pdf(y, params);
    std::vector<double> s;
    s.reserve(3 * g - 1);

    std::vector<double> fj(g);
    for (std::size_t j = 0; j < g; ++j) fj[j] = bs_pdf(y, params.components[j]);

    for (std::size_t j = 0; j + 1 < g; ++j) s.push_back((fj[j] - fj[g - 1]) / f);

    // D_delta f = phi(a) [dA/ddelta - (da/ddelta) a A]
    for (std::size_t j = 0; j < g; ++j) {
        const auto& c = params.components[j];
        const double a = a_fn(y, c);
        const double A = capital_a_fn(y, c);
        const double da = -a / c.alpha;
        const double dA = -A / c.alpha;
        const double d_alpha = norm_pdf(a) * (dA - da * a * A);
        s.push_back(params.weights[j] * d_alpha / f);
    }
    for (std::size_t j = 0; j < g; ++j) {
        const auto& c = params.components[j];
        const double a = a_fn(y, c);
        const double A = capital_a_fn(y, c);
        const double da = -(std::sqrt(y / c.beta) + std::sqrt(c.beta / y)) /
                          (2.0 * c.alpha * c.beta);
        const double dA = (c.beta - y) /
                          (4.0 * c.alpha * c.beta * std::sqrt(c.beta) * y * std::sqrt(y));
        const double d_beta = norm_pdf(a) * (dA - da * a * A);
        s.push_back(params.weights[j] * d_beta / f);
    }
    return s;
}

/// Empirical information matrix. At (or near) the MLE this is the plain
/// outer-product sum; away from it the centering term is kept. The switch is
/// automatic on the gradient norm.
inline Eigen::MatrixXd info_matrix(const std::vector<double>& data,
                                   const MixtureParams& params) {
    const std::size_t dim = 3 * params.size() - 1;
    const std::size_t n = data.size();
    Eigen::MatrixXd info = Eigen::MatrixXd::Zero(dim, dim);
    Eigen::VectorXd total = Eigen::VectorXd::Zero(dim);
    for (double y : data) {
        const std::vector<double> s = score_vector(y, params);
        Eigen::Map<const Eigen::VectorXd> sv(s.data(), dim);
        info.noalias() += sv * sv.transpose();
        total += sv;
    }
    if (total.norm() > 1e-4 * static_cast<double>(n)) {
        info.noalias() -= total * total.transpose() / static_cast<double>(n);
    }
    return 0.5 * (info + info.transpose());
}

/// SE = sqrt(diag(I^{-1})); throws with the smallest eigenvalue when the
/// matrix is not invertible.
inline std::vector<double> standard_errors(const Eigen::MatrixXd& info) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(info);
    const double min_eig = es.eigenvalues().minCoeff();
    if (min_eig <= 1e-12 * std::abs(es.eigenvalues().maxCoeff())) {
        throw std::runtime_error("standard_errors: information matrix singular, "
                                 "smallest eigenvalue " + std::to_string(min_eig));
    }
    const Eigen::MatrixXd inv = info.inverse();
    std::vector<double> ses(static_cast<std::size_t>(info.rows()));
    for (std::size_t k = 0; k < ses.size(); ++k) {
        ses[k] = std::sqrt(inv(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k)));
    }
    return ses;
}

struct Interval {
    double lower;
    double upper;
};

inline std::vector<Interval> wald_ci(const std::vector<double>& estimates,
                                     const std::vector<double>& ses, double level) {
    if (estimates.size() != ses.size()) {
        throw std::invalid_argument("wald_ci: size mismatch");
    }
    const double z = norm_quantile(0.5 * (1.0 + level));
    std::vector<Interval> out;
    for (std::size_t k = 0; k < estimates.size(); ++k) {
        out.push_back({estimates[k] - z * ses[k], estimates[k] + z * ses[k]});
    }
    return out;
}

struct AicBic {
    double aic;
    double bic;
};

inline AicBic aic_bic(double ll, std::size_t n_params, std::size_t n_obs) {
    if (n_obs < 1) throw std::invalid_argument("aic_bic: n_obs must be >= 1");
    const double rho = static_cast<double>(n_params);
    return {-2.0 * ll + 2.0 * rho,
            -2.0 * ll + rho * std::log(static_cast<double>(n_obs))};
}

inline double percentile(std::vector<double> xs, double q) {
    std::sort(xs.begin(), xs.end());
    const double pos = q * static_cast<double>(xs.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, xs.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return xs[lo] * (1.0 - frac) + xs[hi] * frac;
}

struct BootstrapSeResult {
    std::vector<double> ses;
    std::vector<Interval> percentile_cis;
    std::size_t replicates_used = 0;
    std::size_t failures = 0;
};

/// Parametric bootstrap standard errors and percentile intervals: simulate B
/// datasets from the fitted model, refit each with the same config, aggregate
/// the beta-sorted free parameter vectors. Replicates run in parallel with
/// per-index derived streams, so the thread count never changes the output.
inline BootstrapSeResult bootstrap_se(const std::vector<double>& data,
                                      const FitResult& fitted, std::size_t B,
                                      const EmConfig& config, RngStream& rng,
                                      unsigned threads = 1) {
    if (B < 50) throw std::invalid_argument("bootstrap_se: B must be >= 50");
    const std::size_t dim = 3 * fitted.params.size() - 1;
    std::vector<std::vector<double>> draws(B);
    std::vector<char> ok(B, 0);
    parallel_for(B, threads, [&](std::size_t b) {
        RngStream stream = rng.derive(b);
        const std::vector<double> sim = mix_sample(data.size(), fitted.params, stream);
        EmConfig rep_config = config;
        rep_config.seed = stream.seed();
        try {
            const FitResult r = fit(sim, fitted.params.size(), rep_config);
            draws[b] = free_params(r.params);
            ok[b] = 1;
        } catch (const std::exception&) {
            ok[b] = 0;
        }
    });

    std::vector<std::vector<double>> good;
    for (std::size_t b = 0; b < B; ++b) {
        if (ok[b]) good.push_back(draws[b]);
    }
    const std::size_t failures = B - good.size();
    if (failures * 10 > B) {
        throw std::runtime_error("bootstrap_se: more than 10% of replicate fits failed");
    }

    BootstrapSeResult out;
    out.replicates_used = good.size();
    out.failures = failures;
    for (std::size_t k = 0; k < dim; ++k) {
        std::vector<double> col;
        col.reserve(good.size());
        for (const auto& v : good) col.push_back(v[k]);
        double mean = 0.0;
        for (double x : col) mean += x;
        mean /= static_cast<double>(col.size());
        double ss = 0.0;
        for (double x : col) ss += (x - mean) * (x - mean);
        out.ses.push_back(std::sqrt(ss / static_cast<double>(col.size() - 1)));
        out.percentile_cis.push_back({percentile(col, 0.025), percentile(col, 0.975)});
    }
    return out;
}

struct BootstrapTestResult {
    double stat_obs = 0.0;
    std::vector<double> stats_boot;
    double p_value = 1.0;
    std::size_t B = 0;
    std::uint64_t seed = 0;
    std::size_t floored_replicates = 0;
    double loglik_null = 0.0;
    double loglik_alt = 0.0;
};

inline double bootstrap_p_value(const std::vector<double>& stats_boot, double stat_obs) {
    std::size_t count = 0;
    for (double s : stats_boot) {
        if (s >= stat_obs) ++count;
    }
    return static_cast<double>(1 + count) / static_cast<double>(stats_boot.size() + 1);
}

/// Parametric bootstrap likelihood-ratio test of g_null vs g_alt components.
/// Null distribution of -2(l_null - l_alt) simulated from the fitted null
/// model; replicate statistics below 0 (optimizer noise on nested models) are
/// floored and counted.
inline BootstrapTestResult bootstrap_lrt(const std::vector<double>& data,
                                         std::size_t g_null, std::size_t g_alt,
                                         std::size_t B, const EmConfig& config,
                                         RngStream& rng, unsigned threads = 1) {
    if (!(g_alt > g_null && g_null >= 1)) {
        throw std::invalid_argument("bootstrap_lrt: need g_alt > g_null >= 1");
    }
    if (B < 19) throw std::invalid_argument("bootstrap_lrt: B must be >= 19");

    const FitResult fit_null = fit(data, g_null, config);
    const FitResult fit_alt = fit(data, g_alt, config);

    BootstrapTestResult out;
    out.loglik_null = fit_null.loglik;
    out.loglik_alt = fit_alt.loglik;
    out.stat_obs = std::max(0.0, -2.0 * (fit_null.loglik - fit_alt.loglik));
    out.B = B;
    out.seed = rng.seed();

    std::vector<double> stats(B, 0.0);
    std::vector<char> floored(B, 0);
    parallel_for(B, threads, [&](std::size_t b) {
        RngStream stream = rng.derive(b);
        const std::vector<double> sim = mix_sample(data.size(), fit_null.params, stream);
        EmConfig rep_config = config;
        rep_config.seed = stream.seed();
        const FitResult r_null = fit(sim, g_null, rep_config);
        const FitResult r_alt = fit(sim, g_alt, rep_config);
        const double stat = -2.0 * (r_null.loglik - r_alt.loglik);
        if (stat < 0.0) {
            stats[b] = 0.0;
            floored[b] = 1;
        } else {
            stats[b] = stat;
        }
    });
    out.stats_boot = std::move(stats);
    for (char f : floored) out.floored_replicates += f;
    out.p_value = bootstrap_p_value(out.stats_boot, out.stat_obs);
    return out;
}

}  // namespace bsmix
