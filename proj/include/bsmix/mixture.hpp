#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "bsmix/bs.hpp"
#include "bsmix/normal.hpp"
#include "bsmix/rng.hpp"

namespace bsmix {

/// G-component FM-BS parameter set: simplex weights plus per-component
/// (alpha, beta) pairs.
struct MixtureParams {
    std::vector<double> weights;
    std::vector<BsParams> components;

    MixtureParams(std::vector<double> w, std::vector<BsParams> c)
        : weights(std::move(w)), components(std::move(c)) {
        validate();
    }

    std::size_t size() const { return components.size(); }

    void validate() const {
        if (components.empty() || weights.size() != components.size()) {
            throw std::domain_error("MixtureParams: need G >= 1 weights and components");
        }
        double sum = 0.0;
        for (double w : weights) {
            if (!(w > 0.0) || !std::isfinite(w)) {
                throw std::domain_error("MixtureParams: weights must be positive");
            }
            sum += w;
        }
        if (std::abs(sum - 1.0) > 1e-12) {
            throw std::domain_error("MixtureParams: weights must sum to 1");
        }
        for (const auto& c : components) c.validate();
    }

    /// Canonical form: components sorted by beta ascending.
    MixtureParams sorted_by_beta() const {
        std::vector<std::size_t> idx(size());
        for (std::size_t j = 0; j < size(); ++j) idx[j] = j;
        std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
            return components[a].beta < components[b].beta;
        });
        std::vector<double> w;
        std::vector<BsParams> c;
        for (std::size_t j : idx) {
            w.push_back(weights[j]);
            c.push_back(components[j]);
        }
        return MixtureParams(std::move(w), std::move(c));
    }
};

namespace detail {
inline double logsumexp(const std::vector<double>& xs) {
    double m = xs[0];
    for (double x : xs) m = std::max(m, x);
    if (!std::isfinite(m)) return m;
    double s = 0.0;
    for (double x : xs) s += std::exp(x - m);
    return m + std::log(s);
}
}  // namespace detail

inline double mix_pdf(double y, const MixtureParams& p) {
    require_positive(y, "mix_pdf");
    double f = 0.0;
    for (std::size_t j = 0; j < p.size(); ++j) {
        f += p.weights[j] * bs_pdf(y, p.components[j]);
    }
    return f;
}

inline double mix_logpdf(double y, const MixtureParams& p) {
    require_positive(y, "mix_logpdf");
    std::vector<double> terms(p.size());
    for (std::size_t j = 0; j < p.size(); ++j) {
        terms[j] = std::log(p.weights[j]) + bs_logpdf(y, p.components[j]);
    }
    return detail::logsumexp(terms);
}

inline double mix_cdf(double y, const MixtureParams& p) {
    require_positive(y, "mix_cdf");
    double f = 0.0;
    for (std::size_t j = 0; j < p.size(); ++j) {
        f += p.weights[j] * bs_cdf(y, p.components[j]);
    }
    return f;
}

inline double mix_log_survival(double y, const MixtureParams& p) {
    require_positive(y, "mix_log_survival");
    std::vector<double> terms(p.size());
    for (std::size_t j = 0; j < p.size(); ++j) {
        terms[j] = std::log(p.weights[j]) + bs_logsf(y, p.components[j]);
    }
    return detail::logsumexp(terms);
}

inline double mix_survival(double y, const MixtureParams& p) {
    return std::exp(mix_log_survival(y, p));
}

/// Hazard f(y)/S(y), evaluated in log space so extreme y does not hit 0/0.
inline double mix_hazard(double y, const MixtureParams& p) {
    const double log_s = mix_log_survival(y, p);
    if (!std::isfinite(log_s)) {
        return std::numeric_limits<double>::infinity();
    }
    return std::exp(mix_logpdf(y, p) - log_s);
}

/// Limiting hazard rate as y -> infinity, G = 2 only.
inline double hazard_limit(const MixtureParams& p) {
    if (p.size() != 2) {
        throw std::invalid_argument("hazard_limit: requires exactly 2 components");
    }
    const double a1 = p.components[0].alpha, b1 = p.components[0].beta;
    const double a2 = p.components[1].alpha, b2 = p.components[1].beta;
    const double c1 = a1 * a1 * b1, c2 = a2 * a2 * b2;
    if (c2 < c1) return 1.0 / (2.0 * c1);
    if (c2 > c1) return 1.0 / (2.0 * c2);
    const double pw = p.weights[0];
    const double d = pw / (pw + (1.0 - pw) * std::exp(1.0 / (a2 * a2) - 1.0 / (a1 * a1)) *
                                    a1 * std::sqrt(b1) / (a2 * std::sqrt(b2)));
    return d / (2.0 * c1) + (1.0 - d) / (2.0 * c2);
}

/// d/dy mix_pdf; the sign changes of this are the mixture's modes.
inline double mix_pdf_deriv(double y, const MixtureParams& p) {
    require_positive(y, "mix_pdf_deriv");
    double df = 0.0;
    for (std::size_t j = 0; j < p.size(); ++j) {
        const auto& c = p.components[j];
        const double a = a_fn(y, c);
        const double A = capital_a_fn(y, c);
        const double dA = -(y + 3.0 * c.beta) /
                          (4.0 * c.alpha * std::sqrt(c.beta) * y * y * std::sqrt(y));
        df += p.weights[j] * norm_pdf(a) * (dA - a * A * A);
    }
    return df;
}

namespace detail {

/// Roots of d/dy mix_pdf with the given crossing sign(s), ascending. Sign
/// changes located on a 4096-point log grid, refined by bisection.
inline std::vector<double> pdf_deriv_roots(const MixtureParams& p, bool down_crossings,
                                           bool up_crossings) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = 0.0;
    for (const auto& c : p.components) {
        lo = std::min(lo, bs_mode(c) / 10.0);
        hi = std::max(hi, c.beta * 10.0);
    }
    const std::size_t n = 4096;
    const double log_lo = std::log(lo), log_hi = std::log(hi);
    std::vector<double> roots;
    double y_prev = lo;
    double d_prev = mix_pdf_deriv(y_prev, p);
    for (std::size_t i = 1; i < n; ++i) {
        const double y = std::exp(log_lo + (log_hi - log_lo) * static_cast<double>(i) /
                                               static_cast<double>(n - 1));
        const double d = mix_pdf_deriv(y, p);
        const bool down = d_prev > 0.0 && d <= 0.0;
        const bool up = d_prev < 0.0 && d >= 0.0;
        if ((down && down_crossings) || (up && up_crossings)) {
            double a = y_prev, b = y;
            const bool sign_at_a = d_prev > 0.0;
            while (b - a > 1e-10 * a) {
                const double mid = 0.5 * (a + b);
                ((mix_pdf_deriv(mid, p) > 0.0) == sign_at_a ? a : b) = mid;
            }
            roots.push_back(0.5 * (a + b));
        }
        y_prev = y;
        d_prev = d;
    }
    return roots;
}

}  // namespace detail

/// All local maxima of the mixture density, ascending.
inline std::vector<double> mix_modes(const MixtureParams& p) {
    return detail::pdf_deriv_roots(p, true, false);
}

/// All interior critical points of the density (roots of the mode equation),
/// ascending: local maxima and the antimodes between them.
inline std::vector<double> mix_critical_points(const MixtureParams& p) {
    return detail::pdf_deriv_roots(p, true, true);
}

/// Root of mix_cdf(y) = 0.5.
inline double mix_median(const MixtureParams& p) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = 0.0;
    for (const auto& c : p.components) {
        lo = std::min(lo, bs_quantile(1e-4, c));
        hi = std::max(hi, bs_quantile(1.0 - 1e-4, c));
    }
    while (mix_cdf(lo, p) > 0.5) lo *= 0.5;
    while (mix_cdf(hi, p) < 0.5) hi *= 2.0;
    while (hi - lo > 1e-14 * hi) {
        const double mid = 0.5 * (lo + hi);
        (mix_cdf(mid, p) < 0.5 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

inline double mix_moment(double s, const MixtureParams& p) {
    double m = 0.0;
    for (std::size_t j = 0; j < p.size(); ++j) {
        m += p.weights[j] * bs_moment(s, p.components[j]);
    }
    return m;
}

/// Hierarchical sampler: label ~ Multinomial(p), then the component's BS draw.
/// Optionally reports the latent labels.
inline std::vector<double> mix_sample(std::size_t n, const MixtureParams& p,
                                      RngStream& rng,
                                      std::vector<std::size_t>* labels_out = nullptr) {
    std::vector<double> out;
    out.reserve(n);
    if (labels_out) {
        labels_out->clear();
        labels_out->reserve(n);
    }
    for (std::size_t i = 0; i < n; ++i) {
        const double u = rng.uniform();
        double cum = 0.0;
        std::size_t label = p.size() - 1;
        for (std::size_t j = 0; j < p.size(); ++j) {
            cum += p.weights[j];
            if (u <= cum) {
                label = j;
                break;
            }
        }
        out.push_back(bs_sample_one(p.components[label], rng));
        if (labels_out) labels_out->push_back(label);
    }
    return out;
}

/// Stress-strength reliability R = P(Y < X) for independent FM-BS X and Y.
/// Component-pair integrals done by adaptive Gauss-Kronrod on (0, U) with U
/// far enough out that both survival functions are below 1e-12.
inline double stress_strength(const MixtureParams& strength,
                              const MixtureParams& stress) {
    double upper = 0.0;
    for (const auto& c : strength.components) {
        upper = std::max(upper, bs_quantile(1.0 - 1e-12, c));
    }
    for (const auto& c : stress.components) {
        upper = std::max(upper, bs_quantile(1.0 - 1e-12, c));
    }
    using quad = boost::math::quadrature::gauss_kronrod<double, 61>;
    double r = 0.0;
    for (std::size_t j = 0; j < strength.size(); ++j) {
        const auto& cx = strength.components[j];
        for (std::size_t l = 0; l < stress.size(); ++l) {
            const auto& cy = stress.components[l];
            auto integrand = [&](double x) {
                return norm_pdf(a_fn(x, cx)) * norm_cdf(a_fn(x, cy)) *
                       capital_a_fn(x, cx);
            };
            double err = 0.0;
            const double rjl = quad::integrate(integrand, 0.0, upper, 15, 1e-10, &err);
            if (err > 1e-6) {
                throw std::runtime_error(
                    "stress_strength: quadrature did not converge, error estimate " +
                    std::to_string(err));
            }
            r += strength.weights[j] * stress.weights[l] * rjl;
        }
    }
    return r;
}

}  // namespace bsmix
