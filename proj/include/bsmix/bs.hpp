#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "bsmix/normal.hpp"
#include "bsmix/rng.hpp"

namespace bsmix {

/// One Birnbaum-Saunders component: shape alpha, scale beta (the median).
struct BsParams {
    double alpha;
    double beta;

    BsParams(double a, double b) : alpha(a), beta(b) { validate(); }

    void validate() const {
        if (!(alpha > 0.0) || !std::isfinite(alpha) || !(beta > 0.0) ||
            !std::isfinite(beta)) {
            throw std::domain_error("BsParams: alpha and beta must be positive and finite");
        }
    }
};

inline void require_positive(double t, const char* what) {
    if (!(t > 0.0) || !std::isfinite(t)) {
        throw std::domain_error(std::string(what) + ": argument must be positive and finite");
    }
}

/// a_t(alpha, beta) = (sqrt(t/beta) - sqrt(beta/t)) / alpha
inline double a_fn(double t, const BsParams& p) {
    require_positive(t, "a_fn");
    const double r = std::sqrt(t / p.beta);
    return (r - 1.0 / r) / p.alpha;
}

/// A_t(alpha, beta) = t^{-3/2} (t + beta) / (2 alpha beta^{1/2}); d a_t / dt.
inline double capital_a_fn(double t, const BsParams& p) {
    require_positive(t, "capital_a_fn");
    return (t + p.beta) / (2.0 * p.alpha * std::sqrt(p.beta) * t * std::sqrt(t));
}

inline double bs_logpdf(double t, const BsParams& p) {
    require_positive(t, "bs_logpdf");
    const double a = a_fn(t, p);
    return norm_logpdf(a) + std::log(capital_a_fn(t, p));
}

inline double bs_pdf(double t, const BsParams& p) {
    require_positive(t, "bs_pdf");
    return norm_pdf(a_fn(t, p)) * capital_a_fn(t, p);
}

inline double bs_cdf(double t, const BsParams& p) {
    require_positive(t, "bs_cdf");
    return norm_cdf(a_fn(t, p));
}

inline double bs_logsf(double t, const BsParams& p) {
    require_positive(t, "bs_logsf");
    return norm_logsf(a_fn(t, p));
}

/// Closed-form inverse of the cdf, followed by one Newton polish step.
inline double bs_quantile(double prob, const BsParams& p) {
    if (!(prob > 0.0 && prob < 1.0)) {
        throw std::domain_error("bs_quantile: p must lie in (0,1)");
    }
    const double z = norm_quantile(prob);
    const double s = p.alpha * z + std::sqrt(p.alpha * p.alpha * z * z + 4.0);
    double t = 0.25 * p.beta * s * s;
    const double f = bs_pdf(t, p);
    if (f > 0.0) {
        const double step = (bs_cdf(t, p) - prob) / f;
        if (t - step > 0.0) t -= step;
    }
    return t;
}

/// n i.i.d. draws via the normal representation
/// T = beta (1 + 2X^2 + 2X sqrt(1 + X^2)), X ~ N(0, alpha^2/4).
inline std::vector<double> bs_sample(std::size_t n, const BsParams& p, RngStream& rng) {
    std::vector<double> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double x = 0.5 * p.alpha * rng.normal();
        out.push_back(p.beta * (1.0 + 2.0 * x * x + 2.0 * x * std::sqrt(1.0 + x * x)));
    }
    return out;
}

inline double bs_sample_one(const BsParams& p, RngStream& rng) {
    const double x = 0.5 * p.alpha * rng.normal();
    return p.beta * (1.0 + 2.0 * x * x + 2.0 * x * std::sqrt(1.0 + x * x));
}

/// Mode: the unique root m in (0, beta) of
/// (beta - m)(m + beta)^2 = alpha^2 beta m (m + 3 beta).
inline double bs_mode(const BsParams& p) {
    const double a2 = p.alpha * p.alpha;
    const double b = p.beta;
    auto resid = [&](double m) {
        return (b - m) * (m + b) * (m + b) - a2 * b * m * (m + 3.0 * b);
    };
    const double eps = 1e-12;
    double lo = eps * b, hi = b * (1.0 - eps);
    // resid(lo) > 0 and resid(hi) < 0 for alpha > 0.
    while (hi - lo > 1e-12 * b) {
        const double mid = 0.5 * (lo + hi);
        (resid(mid) > 0.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

/// Shape parameter implied by a mode m < beta, from the mode equation.
inline double bs_alpha_from_mode(double m, double beta) {
    if (!(m > 0.0) || !(m < beta)) {
        throw std::domain_error("bs_alpha_from_mode: requires 0 < m < beta");
    }
    return std::sqrt((beta - m) * (m + beta) * (m + beta) /
                     (beta * m * (m + 3.0 * beta)));
}

/// Density re-parameterized by (mode, beta).
inline double bs_pdf_mode_param(double t, double m, double beta) {
    return bs_pdf(t, BsParams(bs_alpha_from_mode(m, beta), beta));
}

/// E(T^s) = beta^s [K_{(2s+1)/2}(x) + K_{(2s-1)/2}(x)] / (2 K_{1/2}(x)),
/// x = 1/alpha^2. Computed with ratios K_nu(x)/K_{1/2}(x) built by the upward
/// recurrence, which keeps everything finite for small alpha (large x).
/// Integer s only: those are the orders reachable from the closed-form
/// half-integer Bessel K.
inline double bs_moment(double s, const BsParams& p) {
    if (std::abs(s - std::round(s)) > 1e-9 || s < 0.0) {
        throw std::domain_error("bs_moment: order must be a nonnegative integer");
    }
    const int si = static_cast<int>(std::round(s));
    const double x = 1.0 / (p.alpha * p.alpha);
    // r_k = K_{k+1/2}(x) / K_{1/2}(x); K_{nu+1} = K_{nu-1} + (2 nu / x) K_nu,
    // with K_{-1/2} = K_{1/2} so r starts at 1, 1.
    double r_prev = 1.0;  // r_{-1}, order -1/2
    double r_curr = 1.0;  // r_0, order 1/2
    for (int k = 1; k <= si; ++k) {
        const double nu = k - 0.5;
        const double r_next = r_prev + (2.0 * nu / x) * r_curr;
        r_prev = r_curr;
        r_curr = r_next;
    }
    // r_curr has order s + 1/2, r_prev has order s - 1/2 (= |s - 1/2| by symmetry).
    return std::pow(p.beta, s) * 0.5 * (r_curr + r_prev);
}

/// Density of W = log(Y) for a single BS component (sinh-normal),
/// parameterized by alpha and gamma = log(beta).
inline double log_bs_pdf(double w, double alpha, double gamma) {
    if (!(alpha > 0.0)) {
        throw std::domain_error("log_bs_pdf: alpha must be positive");
    }
    const double half = 0.5 * (w - gamma);
    const double xi2 = (2.0 / alpha) * std::sinh(half);
    const double xi1 = (2.0 / alpha) * std::cosh(half);
    return 0.5 * norm_pdf(xi2) * xi1;
}

}  // namespace bsmix
