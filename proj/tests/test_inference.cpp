#include <catch_amalgamated.hpp>

#include <cmath>

#include "bsmix/inference.hpp"

using namespace bsmix;
using Catch::Approx;

namespace {

// Rebuild a mixture from the free-parameter vector (p_1..p_{G-1}, alphas, betas).
MixtureParams from_free(const std::vector<double>& v, std::size_t g) {
    std::vector<double> w(v.begin(), v.begin() + (g - 1));
    double last = 1.0;
    for (double x : w) last -= x;
    w.push_back(last);
    std::vector<BsParams> comps;
    for (std::size_t j = 0; j < g; ++j) {
        comps.emplace_back(v[g - 1 + j], v[2 * g - 1 + j]);
    }
    return MixtureParams(std::move(w), std::move(comps));
}

MixtureParams random_mixture(std::size_t g, RngStream& rng) {
    std::vector<double> w(g);
    double sum = 0.0;
    for (double& x : w) {
        x = 0.2 + rng.uniform();
        sum += x;
    }
    for (double& x : w) x /= sum;
    std::vector<BsParams> comps;
    for (std::size_t j = 0; j < g; ++j) {
        comps.emplace_back(0.2 + 1.2 * rng.uniform(), 0.3 + 6.0 * rng.uniform());
    }
    return MixtureParams(std::move(w), std::move(comps));
}

}  // namespace

TEST_CASE("score_vector agrees with central finite differences") {
    RngStream rng(303);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t g = 2 + (trial % 2);
        const auto params = random_mixture(g, rng);
        const double y = 0.2 + 8.0 * rng.uniform();

        const auto s = score_vector(y, params);
        const auto v0 = free_params(params);
        REQUIRE(s.size() == v0.size());

        for (std::size_t k = 0; k < v0.size(); ++k) {
            const double h = 1e-6 * std::max(1.0, std::abs(v0[k]));
            auto vp = v0, vm = v0;
            vp[k] += h;
            vm[k] -= h;
            const double fd = (mix_logpdf(y, from_free(vp, g)) -
                               mix_logpdf(y, from_free(vm, g))) /
                              (2.0 * h);
            const double scale = std::max(1.0, std::abs(fd));
            CHECK(std::abs(s[k] - fd) <= 1e-6 * scale);
        }
    }
}

TEST_CASE("info_matrix is symmetric and PSD-shaped at a decent fit") {
    RngStream rng(61);
    const MixtureParams truth({0.7, 0.3}, {BsParams(0.25, 1.0), BsParams(0.3, 6.0)});
    const auto data = mix_sample(1200, truth, rng);
    const auto res = fit(data, 2);
    const Eigen::MatrixXd info = info_matrix(data, res.params);
    CHECK((info - info.transpose()).norm() == Approx(0.0).margin(1e-10));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(info);
    CHECK(es.eigenvalues().minCoeff() > 0.0);
}

TEST_CASE("standard_errors from a diagonal information matrix") {
    Eigen::MatrixXd info = Eigen::MatrixXd::Zero(2, 2);
    info(0, 0) = 4.0;
    info(1, 1) = 25.0;
    const auto ses = standard_errors(info);
    CHECK(ses[0] == Approx(0.5).epsilon(1e-14));
    CHECK(ses[1] == Approx(0.2).epsilon(1e-14));

    // rank-1 matrix is rejected
    Eigen::VectorXd v(3);
    v << 1.0, 2.0, 3.0;
    const Eigen::MatrixXd rank1 = v * v.transpose();
    CHECK_THROWS_AS(standard_errors(rank1), std::runtime_error);
}

TEST_CASE("wald_ci uses the right normal quantile") {
    const auto cis = wald_ci({1.0, -2.0}, {0.5, 1.0}, 0.95);
    const double z = 1.959963984540054;
    CHECK(cis[0].lower == Approx(1.0 - z * 0.5).epsilon(1e-10));
    CHECK(cis[0].upper == Approx(1.0 + z * 0.5).epsilon(1e-10));
    CHECK(cis[1].lower == Approx(-2.0 - z).epsilon(1e-10));
    CHECK_THROWS_AS(wald_ci({1.0}, {0.5, 0.1}, 0.95), std::invalid_argument);
}

TEST_CASE("aic_bic") {
    const auto ab = aic_bic(-54.2027, 5, 245);
    CHECK(ab.aic == Approx(118.4054).margin(5e-5));
    CHECK(ab.bic == Approx(135.9117).margin(5e-5));
    CHECK_THROWS_AS(aic_bic(-1.0, 2, 0), std::invalid_argument);
}

TEST_CASE("bootstrap_p_value invariants") {
    const std::vector<double> stats = {0.5, 1.5, 2.5, 3.5, 4.5};
    CHECK(bootstrap_p_value(stats, 10.0) == Approx(1.0 / 6.0).epsilon(1e-14));
    CHECK(bootstrap_p_value(stats, 0.0) == Approx(1.0));
    CHECK(bootstrap_p_value(stats, 2.0) == Approx(4.0 / 6.0).epsilon(1e-14));
    // p is always in (0, 1]
    for (double t : {-1.0, 0.1, 2.0, 100.0}) {
        const double p = bootstrap_p_value(stats, t);
        CHECK(p > 0.0);
        CHECK(p <= 1.0);
    }
}

TEST_CASE("bootstrap_se is deterministic and thread-count invariant") {
    RngStream rng(505);
    const MixtureParams truth({0.8, 0.2}, {BsParams(0.25, 1.0), BsParams(0.25, 5.0)});
    const auto data = mix_sample(300, truth, rng);
    EmConfig cfg;
    const auto fitted = fit(data, 2, cfg);

    RngStream r1(9001), r2(9001);
    const auto b1 = bootstrap_se(data, fitted, 50, cfg, r1, 1);
    const auto b2 = bootstrap_se(data, fitted, 50, cfg, r2, 4);
    REQUIRE(b1.ses.size() == 5);
    CHECK(b1.ses == b2.ses);
    CHECK(b1.failures == b2.failures);
    for (std::size_t k = 0; k < b1.ses.size(); ++k) {
        CHECK(b1.ses[k] > 0.0);
        CHECK(b1.percentile_cis[k].lower <= b1.percentile_cis[k].upper);
    }

    RngStream r3(1);
    CHECK_THROWS_AS(bootstrap_se(data, fitted, 10, cfg, r3), std::invalid_argument);
}

TEST_CASE("bootstrap_lrt basic behavior") {
    RngStream rng(606);
    // clearly two-component data: the test should reject G=1
    const MixtureParams truth({0.5, 0.5}, {BsParams(0.2, 1.0), BsParams(0.2, 10.0)});
    const auto data = mix_sample(400, truth, rng);
    EmConfig cfg;
    RngStream test_rng(2718);
    const auto res = bootstrap_lrt(data, 1, 2, 19, cfg, test_rng, 2);
    CHECK(res.stat_obs > 0.0);
    CHECK(res.p_value == Approx(1.0 / 20.0).epsilon(1e-14));
    CHECK(res.loglik_alt >= res.loglik_null);
    CHECK(res.stats_boot.size() == 19);

    RngStream r2(1);
    CHECK_THROWS_AS(bootstrap_lrt(data, 2, 2, 19, cfg, r2), std::invalid_argument);
    CHECK_THROWS_AS(bootstrap_lrt(data, 1, 2, 5, cfg, r2), std::invalid_argument);
}

TEST_CASE("percentile interpolation") {
    CHECK(percentile({1, 2, 3, 4, 5}, 0.5) == Approx(3.0));
    CHECK(percentile({1, 2, 3, 4}, 0.5) == Approx(2.5));
    CHECK(percentile({1, 2, 3, 4, 5}, 0.0) == Approx(1.0));
    CHECK(percentile({1, 2, 3, 4, 5}, 1.0) == Approx(5.0));
}
