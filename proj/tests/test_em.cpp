#include <catch_amalgamated.hpp>

#include <cmath>

#include "bsmix/em.hpp"

using namespace bsmix;
using Catch::Approx;

TEST_CASE("aitken_stop acceleration") {
    // c = 0.5, accelerated limit -80
    auto d = aitken_stop(-100.0, -90.0, -85.0, 1e-6);
    CHECK(d.l_inf == Approx(-80.0).epsilon(1e-14));
    CHECK_FALSE(d.stop);

    d = aitken_stop(-100.0, -90.0, -85.0, 10.0);
    CHECK(d.stop);

    // c >= 1: acceleration unusable, plain difference criterion
    d = aitken_stop(-100.0, -90.0, -79.0, 1e-6);
    CHECK(d.l_inf == Approx(-79.0));
    CHECK_FALSE(d.stop);

    // flat sequence
    d = aitken_stop(-50.0, -50.0, -50.0, 1e-6);
    CHECK(d.stop);
    CHECK(d.l_inf == Approx(-50.0));
}

TEST_CASE("e_step rows sum to one and match the posterior formula") {
    const MixtureParams p({0.3, 0.7}, {BsParams(0.25, 1.0), BsParams(0.5, 4.0)});
    const std::vector<double> data = {0.5, 1.0, 2.0, 4.0, 8.0};
    const auto resp = e_step(data, p);
    REQUIRE(resp.n == 5);
    REQUIRE(resp.g == 2);
    for (std::size_t i = 0; i < resp.n; ++i) {
        CHECK(resp(i, 0) + resp(i, 1) == Approx(1.0).epsilon(1e-14));
        const double f0 = 0.3 * bs_pdf(data[i], p.components[0]);
        const double f1 = 0.7 * bs_pdf(data[i], p.components[1]);
        CHECK(resp(i, 0) == Approx(f0 / (f0 + f1)).epsilon(1e-12));
    }
}

TEST_CASE("cm_step1 closed forms") {
    const std::vector<double> data = {0.8, 1.0, 1.3, 2.1};
    Responsibilities resp(4, 1);
    std::fill(resp.values.begin(), resp.values.end(), 1.0);
    const double beta = 1.2;
    const auto s1 = cm_step1(data, resp, {beta});
    double acc = 0.0;
    for (double y : data) {
        const double a = std::sqrt(y / beta) - std::sqrt(beta / y);
        acc += a * a;
    }
    CHECK(s1.alphas[0] == Approx(std::sqrt(acc / 4.0)).epsilon(1e-14));
    CHECK(s1.weights[0] == Approx(1.0));

    // weights are column means
    Responsibilities r2(4, 2);
    for (std::size_t i = 0; i < 4; ++i) {
        r2(i, 0) = 0.25 * static_cast<double>(i + 1) / 2.5;  // mean 0.25
        r2(i, 1) = 1.0 - r2(i, 0);
    }
    const auto s2 = cm_step1(data, r2, {1.0, 1.5});
    CHECK(s2.weights[0] == Approx(0.25).epsilon(1e-12));
    CHECK(s2.weights[1] == Approx(0.75).epsilon(1e-12));

    // a component with vanishing responsibility mass is degenerate
    Responsibilities r3(4, 2);
    for (std::size_t i = 0; i < 4; ++i) {
        r3(i, 0) = 1.0 - 1e-12;
        r3(i, 1) = 1e-12;
    }
    CHECK_THROWS_AS(cm_step1(data, r3, {1.0, 1.5}), DegenerateComponentError);
}

TEST_CASE("cm_step2 matches a dense grid argmax") {
    // single observation with unit responsibility
    const std::vector<double> data = {2.7};
    Responsibilities resp(1, 1);
    resp(0, 0) = 1.0;
    const double alpha = 0.6;
    const auto betas = cm_step2(data, resp, {alpha}, {1.0}, {1.0}, 4.0, 0.01, 100.0);

    auto q = [&](double b) { return detail::q_beta(data, resp, 0, alpha, b); };
    double best_b = 0.01, best_q = q(0.01);
    for (int k = 1; k <= 200000; ++k) {
        const double b = 0.01 + (100.0 - 0.01) * k / 200000.0;
        const double v = q(b);
        if (v > best_q) {
            best_q = v;
            best_b = b;
        }
    }
    CHECK(betas[0] == Approx(best_b).margin(2e-3));
    CHECK(q(betas[0]) >= best_q - 1e-10);
}

TEST_CASE("cm_step2 never decreases the Q objective") {
    RngStream rng(17);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 5 + static_cast<std::size_t>(rng.uniform() * 20);
        std::vector<double> data;
        for (std::size_t i = 0; i < n; ++i) data.push_back(0.1 + 10.0 * rng.uniform());
        Responsibilities resp(n, 2);
        for (std::size_t i = 0; i < n; ++i) {
            const double z = rng.uniform();
            resp(i, 0) = z;
            resp(i, 1) = 1.0 - z;
        }
        const std::vector<double> alphas = {0.2 + rng.uniform(), 0.2 + rng.uniform()};
        const std::vector<double> prev = {0.5 + 5.0 * rng.uniform(),
                                          0.5 + 5.0 * rng.uniform()};
        const auto next = cm_step2(data, resp, alphas, {0.5, 0.5}, prev, 4.0, 1e-3, 1e3);
        for (std::size_t j = 0; j < 2; ++j) {
            CHECK(detail::q_beta(data, resp, j, alphas[j], next[j]) >=
                  detail::q_beta(data, resp, j, alphas[j], prev[j]) - 1e-12);
        }
    }
}

TEST_CASE("loglik is additive over observations") {
    const MixtureParams p({0.4, 0.6}, {BsParams(0.3, 1.0), BsParams(0.5, 3.0)});
    const std::vector<double> a = {0.5, 1.4, 2.2};
    const std::vector<double> b = {3.3, 0.9};
    std::vector<double> both = a;
    both.insert(both.end(), b.begin(), b.end());
    CHECK(loglik(both, p) == Approx(loglik(a, p) + loglik(b, p)).epsilon(1e-14));
}

TEST_CASE("convergence_rate on a geometric trace") {
    std::vector<std::vector<double>> trace;
    double x = 1.0;
    for (int t = 0; t < 10; ++t) {
        trace.push_back({x, 2.0 * x});
        x *= 0.5;  // steps shrink by exactly 1/2
    }
    CHECK(convergence_rate(trace) == Approx(0.5).epsilon(1e-12));
    CHECK_THROWS_AS(convergence_rate({{1.0}, {0.5}}), std::invalid_argument);
}

TEST_CASE("single-component fit recovers the parameters") {
    RngStream rng(2024);
    const auto data = bs_sample(5000, BsParams(0.25, 1.0), rng);
    const auto res = fit(data, 1);
    CHECK(res.converged);
    CHECK(res.params.components[0].alpha == Approx(0.25).margin(0.01));
    CHECK(res.params.components[0].beta == Approx(1.0).margin(0.02));

    // at the optimum the alpha update is a fixed point of CM-step 1
    Responsibilities resp(data.size(), 1);
    std::fill(resp.values.begin(), resp.values.end(), 1.0);
    const auto s1 = cm_step1(data, resp, {res.params.components[0].beta});
    CHECK(res.params.components[0].alpha == Approx(s1.alphas[0]).epsilon(1e-9));
}

TEST_CASE("two-component fit on well-separated data") {
    RngStream rng(99);
    const MixtureParams truth({0.8, 0.2}, {BsParams(0.25, 1.0), BsParams(0.25, 5.0)});
    const auto data = mix_sample(2000, truth, rng);
    const auto res = fit(data, 2);
    CHECK(res.converged);
    CHECK(res.params.weights[0] == Approx(0.8).margin(0.05));
    CHECK(res.params.components[0].beta == Approx(1.0).margin(0.1));
    CHECK(res.params.components[1].beta == Approx(5.0).margin(0.5));
    CHECK(res.params.components[0].alpha == Approx(0.25).margin(0.05));
    CHECK(res.params.components[1].alpha == Approx(0.25).margin(0.08));

    // monotone ascent of the log-likelihood trace
    for (std::size_t t = 1; t < res.loglik_trace.size(); ++t) {
        CHECK(res.loglik_trace[t] >= res.loglik_trace[t - 1] - 1e-8);
    }
    CHECK(res.loglik == Approx(loglik(data, res.params)).epsilon(1e-12));
}

TEST_CASE("fit output is canonical: betas ascending") {
    RngStream rng(4);
    const MixtureParams truth({0.5, 0.5}, {BsParams(0.2, 1.0), BsParams(0.2, 8.0)});
    const auto data = mix_sample(600, truth, rng);
    for (auto strategy : {InitStrategy::kbumps, InitStrategy::kmeans,
                          InitStrategy::kmedoids}) {
        EmConfig cfg;
        cfg.init = strategy;
        cfg.seed = 123;
        const auto res = fit(data, 2, cfg);
        CHECK(res.params.components[0].beta < res.params.components[1].beta);
    }
}

TEST_CASE("fit is deterministic for a fixed seed") {
    RngStream rng(8);
    const MixtureParams truth({0.6, 0.4}, {BsParams(0.25, 0.5), BsParams(0.5, 1.5)});
    const auto data = mix_sample(400, truth, rng);
    EmConfig cfg;
    cfg.seed = 77;
    cfg.init = InitStrategy::kmeans;
    const auto r1 = fit(data, 2, cfg);
    const auto r2 = fit(data, 2, cfg);
    CHECK(r1.loglik == r2.loglik);
    CHECK(free_params(r1.params) == free_params(r2.params));
    CHECK(r1.iterations == r2.iterations);
}

TEST_CASE("fit input validation") {
    CHECK_THROWS_AS(fit({1.0, 2.0, 3.0}, 2), std::invalid_argument);
    CHECK_THROWS_AS(fit({1.0, 2.0, 3.0}, 0), std::invalid_argument);
    CHECK_THROWS_AS(fit({1.0, -2.0, 3.0}, 1), std::domain_error);
}

TEST_CASE("reported convergence rate is a contraction for a healthy fit") {
    RngStream rng(31);
    const MixtureParams truth({0.8, 0.2}, {BsParams(0.25, 0.25), BsParams(1.0, 5.0)});
    const auto data = mix_sample(1500, truth, rng);
    const auto res = fit(data, 2);
    REQUIRE(res.rate_r.has_value());
    CHECK(*res.rate_r >= 0.0);
    CHECK(*res.rate_r < 1.0);
}
