#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "bsmix/init.hpp"
#include "bsmix/mixture.hpp"

namespace bsmix {

struct EmConfig {
    double tol = 1e-6;
    std::size_t max_iter = 2000;
    InitStrategy init = InitStrategy::kbumps;
    std::uint64_t seed = 0;
    double beta_bracket_factor = 4.0;
};

inline constexpr double kAlphaFloor = 1e-6;
inline constexpr double kDegenerateResp = 1e-10;

/// n x G posterior membership matrix; rows sum to 1.
struct Responsibilities {
    std::size_t n = 0;
    std::size_t g = 0;
    std::vector<double> values;  // row-major

    Responsibilities(std::size_t n_, std::size_t g_)
        : n(n_), g(g_), values(n_ * g_, 0.0) {}

    double& operator()(std::size_t i, std::size_t j) { return values[i * g + j]; }
    double operator()(std::size_t i, std::size_t j) const { return values[i * g + j]; }

    double column_sum(std::size_t j) const {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += values[i * g + j];
        return s;
    }
};

struct FitResult {
    MixtureParams params;
    double loglik = 0.0;
    std::vector<double> loglik_trace;
    std::vector<std::vector<double>> param_trace;  // free parameters per iteration
    std::size_t iterations = 0;
    bool converged = false;
    std::optional<double> rate_r;
    bool init_fallback_used = false;
};

struct DegenerateComponentError : std::runtime_error {
    std::size_t component;
    explicit DegenerateComponentError(std::size_t j)
        : std::runtime_error("degenerate component " + std::to_string(j) +
                             ": responsibility mass below threshold"),
          component(j) {}
};

inline double loglik(const std::vector<double>& data, const MixtureParams& params) {
    double ll = 0.0;
    for (double y : data) ll += mix_logpdf(y, params);
    return ll;
}

/// Posterior memberships, computed in log space.
inline Responsibilities e_step(const std::vector<double>& data,
                               const MixtureParams& params) {
    const std::size_t n = data.size();
    const std::size_t g = params.size();
    Responsibilities resp(n, g);
    std::vector<double> logs(g);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < g; ++j) {
            logs[j] = std::log(params.weights[j]) + bs_logpdf(data[i], params.components[j]);
        }
        const double lse = detail::logsumexp(logs);
        for (std::size_t j = 0; j < g; ++j) {
            resp(i, j) = std::exp(logs[j] - lse);
        }
    }
    return resp;
}

struct CmStep1Result {
    std::vector<double> alphas;
    std::vector<double> weights;
};

/// CM-step 1: alpha_j^2 = sum_i z_ij a^2_{y_i}(1, beta_j) / sum_i z_ij and
/// p_j = column mean of the responsibilities, both closed form.
inline CmStep1Result cm_step1(const std::vector<double>& data,
                              const Responsibilities& resp,
                              const std::vector<double>& betas) {
    const std::size_t g = resp.g;
    CmStep1Result out;
    out.alphas.resize(g);
    out.weights.resize(g);
    for (std::size_t j = 0; j < g; ++j) {
        const double mass = resp.column_sum(j);
        if (mass < kDegenerateResp) throw DegenerateComponentError(j);
        double num = 0.0;
        for (std::size_t i = 0; i < resp.n; ++i) {
            const double a = a_fn(data[i], BsParams(1.0, betas[j]));
            num += resp(i, j) * a * a;
        }
        out.alphas[j] = std::max(std::sqrt(num / mass), kAlphaFloor);
        out.weights[j] = mass / static_cast<double>(resp.n);
    }
    double wsum = std::accumulate(out.weights.begin(), out.weights.end(), 0.0);
    for (double& w : out.weights) w /= wsum;
    return out;
}

namespace detail {

/// Per-component part of the Q-function that depends on beta_j.
inline double q_beta(const std::vector<double>& data, const Responsibilities& resp,
                     std::size_t j, double alpha, double beta) {
    double q = 0.0;
    const BsParams p(alpha, beta);
    for (std::size_t i = 0; i < resp.n; ++i) {
        const double z = resp(i, j);
        if (z == 0.0) continue;
        const double a = a_fn(data[i], p);
        q += z * (-0.5 * std::log(beta) + std::log(data[i] + beta) - 0.5 * a * a);
    }
    return q;
}

/// Golden-section maximization on [lo, hi] to relative tolerance 1e-10.
template <typename F>
double golden_max(F f, double lo, double hi) {
    const double phi = 0.6180339887498949;
    double a = lo, b = hi;
    double x1 = b - phi * (b - a);
    double x2 = a + phi * (b - a);
    double f1 = f(x1), f2 = f(x2);
    while (b - a > 1e-10 * std::max(1.0, std::abs(a))) {
        if (f1 < f2) {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - phi * (b - a);
            f1 = f(x1);
        }
    }
    return 0.5 * (a + b);
}

}  // namespace detail

/// CM-step 2: each beta_j maximizes its own Q term on a bracket around the
/// previous value, widened geometrically on boundary hits. The returned beta
/// never lowers Q below its value at betas_prev.
inline std::vector<double> cm_step2(const std::vector<double>& data,
                                    const Responsibilities& resp,
                                    const std::vector<double>& alphas,
                                    const std::vector<double>& /*weights*/,
                                    const std::vector<double>& betas_prev,
                                    double bracket_factor = 4.0,
                                    double beta_lo_bound = 0.0,
                                    double beta_hi_bound =
                                        std::numeric_limits<double>::infinity()) {
    const std::size_t g = resp.g;
    std::vector<double> betas(g);
    for (std::size_t j = 0; j < g; ++j) {
        const double mass = resp.column_sum(j);
        if (mass < kDegenerateResp) {
            betas[j] = betas_prev[j];  // zero-weight objective is flat
            continue;
        }
        auto q = [&](double beta) { return detail::q_beta(data, resp, j, alphas[j], beta); };
        const double q_prev = q(betas_prev[j]);

        double factor = bracket_factor;
        double best = betas_prev[j];
        for (int expand = 0; expand <= 5; ++expand) {
            double lo = std::max(betas_prev[j] / factor, beta_lo_bound);
            double hi = std::min(betas_prev[j] * factor, beta_hi_bound);
            if (!(lo < hi)) {
                lo = beta_lo_bound > 0.0 ? beta_lo_bound : betas_prev[j] / factor;
                hi = std::isfinite(beta_hi_bound) ? beta_hi_bound : betas_prev[j] * factor;
            }
            best = detail::golden_max(q, lo, hi);
            const bool at_lo = best <= lo * (1.0 + 1e-8) && lo > beta_lo_bound * (1.0 + 1e-12);
            const bool at_hi = best >= hi * (1.0 - 1e-8) && hi < beta_hi_bound * (1.0 - 1e-12);
            if (!at_lo && !at_hi) break;
            if (expand == 5) {
                throw std::runtime_error("cm_step2: beta bracket exhausted for component " +
                                         std::to_string(j));
            }
            factor *= bracket_factor;
        }
        betas[j] = q(best) >= q_prev ? best : betas_prev[j];
    }
    return betas;
}

struct AitkenDecision {
    bool stop = false;
    double l_inf = 0.0;
};

/// Aitken-acceleration stopping rule on three consecutive log-likelihoods.
/// Falls back to the plain difference criterion when the acceleration is
/// undefined or >= 1.
inline AitkenDecision aitken_stop(double l_prev2, double l_prev, double l_curr,
                                  double tol) {
    AitkenDecision d;
    const double denom = l_prev - l_prev2;
    const double num = l_curr - l_prev;
    if (std::abs(denom) < 1e-300) {
        d.l_inf = l_curr;
        d.stop = std::abs(num) < tol;
        return d;
    }
    const double c = num / denom;
    if (c >= 1.0) {
        d.l_inf = l_curr;
        d.stop = std::abs(num) < tol;
        return d;
    }
    d.l_inf = l_prev + num / (1.0 - c);
    d.stop = std::abs(l_curr - d.l_inf) < tol;
    return d;
}

/// Free-parameter vector (p_1..p_{G-1}, alpha_1..alpha_G, beta_1..beta_G).
inline std::vector<double> free_params(const MixtureParams& params) {
    std::vector<double> v;
    const std::size_t g = params.size();
    for (std::size_t j = 0; j + 1 < g; ++j) v.push_back(params.weights[j]);
    for (std::size_t j = 0; j < g; ++j) v.push_back(params.components[j].alpha);
    for (std::size_t j = 0; j < g; ++j) v.push_back(params.components[j].beta);
    return v;
}

/// Limiting ratio of successive parameter-change norms, averaged over the
/// last three available iterations.
inline double convergence_rate(const std::vector<std::vector<double>>& trace) {
    if (trace.size() < 3) {
        throw std::invalid_argument("convergence_rate: need at least 3 iterates");
    }
    auto diff_norm = [&](std::size_t t) {
        double s = 0.0;
        for (std::size_t k = 0; k < trace[t].size(); ++k) {
            const double d = trace[t + 1][k] - trace[t][k];
            s += d * d;
        }
        return std::sqrt(s);
    };
    const std::size_t n_ratios = std::min<std::size_t>(3, trace.size() - 2);
    double sum = 0.0;
    for (std::size_t k = 0; k < n_ratios; ++k) {
        const std::size_t t = trace.size() - 2 - k;
        const double den = diff_norm(t - 1);
        if (den < 1e-300) return 0.0;
        sum += diff_norm(t) / den;
    }
    return sum / static_cast<double>(n_ratios);
}

namespace detail {

inline FitResult run_ecm(const std::vector<double>& data, std::size_t g,
                         const EmConfig& config, MixtureParams params,
                         bool fallback_flag) {
    const double data_min = *std::min_element(data.begin(), data.end());
    const double data_max = *std::max_element(data.begin(), data.end());
    const double beta_lo = data_min / 10.0;
    const double beta_hi = data_max * 10.0;

    // Clamp starting betas into the optimization box.
    std::vector<double> betas(g), alphas(g);
    std::vector<double> weights = params.weights;
    for (std::size_t j = 0; j < g; ++j) {
        betas[j] = std::clamp(params.components[j].beta, beta_lo, beta_hi);
        alphas[j] = std::max(params.components[j].alpha, kAlphaFloor);
    }

    FitResult result{MixtureParams(weights, params.components)};
    result.init_fallback_used = fallback_flag;

    auto assemble = [&]() {
        std::vector<BsParams> comps;
        for (std::size_t j = 0; j < g; ++j) comps.emplace_back(alphas[j], betas[j]);
        return MixtureParams(weights, std::move(comps));
    };

    MixtureParams current = assemble();
    double ll = loglik(data, current);
    result.loglik_trace.push_back(ll);
    result.param_trace.push_back(free_params(current));

    for (std::size_t k = 0; k < config.max_iter; ++k) {
        Responsibilities resp = g == 1 ? Responsibilities(data.size(), 1)
                                       : e_step(data, current);
        if (g == 1) {
            std::fill(resp.values.begin(), resp.values.end(), 1.0);
        }
        CmStep1Result s1 = cm_step1(data, resp, betas);
        alphas = s1.alphas;
        weights = s1.weights;
        betas = cm_step2(data, resp, alphas, weights, betas,
                         config.beta_bracket_factor, beta_lo, beta_hi);
        current = assemble();
        ll = loglik(data, current);
        result.loglik_trace.push_back(ll);
        result.param_trace.push_back(free_params(current));
        result.iterations = k + 1;

        const std::size_t t = result.loglik_trace.size();
        if (t >= 3) {
            const auto d = aitken_stop(result.loglik_trace[t - 3], result.loglik_trace[t - 2],
                                       result.loglik_trace[t - 1], config.tol);
            if (d.stop) {
                result.converged = true;
                break;
            }
        }
    }

    result.loglik = ll;
    // Canonical form: sort components by beta, apply the same permutation to
    // the whole trace so permuted initial labelings give identical output.
    std::vector<std::size_t> idx(g);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t a, std::size_t b) { return betas[a] < betas[b]; });
    {
        std::vector<double> w(g), al(g), be(g);
        for (std::size_t j = 0; j < g; ++j) {
            w[j] = weights[idx[j]];
            al[j] = alphas[idx[j]];
            be[j] = betas[idx[j]];
        }
        for (auto& vec : result.param_trace) {
            std::vector<double> perm(vec.size());
            for (std::size_t j = 0; j + 1 < g; ++j) {
                perm[j] = idx[j] + 1 < g ? vec[idx[j]]
                                         : 1.0 - std::accumulate(vec.begin(),
                                                                 vec.begin() + (g - 1), 0.0);
            }
            for (std::size_t j = 0; j < g; ++j) {
                perm[g - 1 + j] = vec[g - 1 + idx[j]];
                perm[2 * g - 1 + j] = vec[2 * g - 1 + idx[j]];
            }
            vec = std::move(perm);
        }
        std::vector<BsParams> comps;
        for (std::size_t j = 0; j < g; ++j) comps.emplace_back(al[j], be[j]);
        result.params = MixtureParams(std::move(w), std::move(comps));
    }
    if (result.param_trace.size() >= 3) {
        result.rate_r = convergence_rate(result.param_trace);
    }
    return result;
}

}  // namespace detail

/// Full ECM fit: initialization per config, then alternating E / CM-1 / CM-2
/// with the Aitken stopping rule. A degenerate component triggers one restart
/// from deterministic quantile splits before failing.
inline FitResult fit(const std::vector<double>& data, std::size_t g,
                     const EmConfig& config = {}) {
    if (g < 1) throw std::invalid_argument("fit: G must be >= 1");
    if (data.size() < 3 * g) {
        throw std::invalid_argument("fit: need at least 3G observations");
    }
    for (double y : data) require_positive(y, "fit data");

    RngStream rng(config.seed);
    std::vector<double> bump_modes;
    Partition part = make_partition(data, g, config.init, rng,
                                    config.init == InitStrategy::kbumps ? &bump_modes
                                                                        : nullptr);
    MixtureParams init_params = moment_init(data, part, bump_modes);

    try {
        return detail::run_ecm(data, g, config, init_params, part.fallback_used);
    } catch (const DegenerateComponentError&) {
        Partition fb = detail::quantile_split(data, g);
        MixtureParams fb_params = moment_init(data, fb);
        try {
            FitResult r = detail::run_ecm(data, g, config, fb_params, true);
            return r;
        } catch (const DegenerateComponentError& e2) {
            throw std::runtime_error(
                std::string("fit: repeated degenerate component after fallback (") +
                e2.what() + ")");
        }
    }
}

}  // namespace bsmix
