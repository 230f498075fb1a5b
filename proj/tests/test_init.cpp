#include <catch_amalgamated.hpp>

#include <cmath>
#include <numeric>

#include "bsmix/init.hpp"

using namespace bsmix;
using Catch::Approx;

namespace {
std::vector<double> two_clouds(std::size_t n, RngStream& rng) {
    const MixtureParams p({0.5, 0.5}, {BsParams(0.1, 1.0), BsParams(0.1, 20.0)});
    return mix_sample(n, p, rng);
}
}  // namespace

TEST_CASE("kbumps is deterministic across repeated calls") {
    RngStream rng(101);
    const auto data = two_clouds(400, rng);
    const auto first = kbumps_partition(data, 2);
    for (int rep = 0; rep < 100; ++rep) {
        const auto again = kbumps_partition(data, 2);
        REQUIRE(again.labels == first.labels);
        REQUIRE(again.fallback_used == first.fallback_used);
    }
}

TEST_CASE("kbumps separates well-spaced clouds exactly") {
    RngStream rng(7);
    std::vector<std::size_t> truth;
    const MixtureParams p({0.5, 0.5}, {BsParams(0.1, 1.0), BsParams(0.1, 20.0)});
    const auto data = mix_sample(500, p, rng, &truth);
    const auto part = kbumps_partition(data, 2);
    CHECK_FALSE(part.fallback_used);
    std::size_t agree = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        agree += (part.labels[i] == truth[i]);
    }
    // labels may be swapped as a block
    agree = std::max(agree, data.size() - agree);
    CHECK(agree == data.size());
}

TEST_CASE("kbumps recovers latent labels for a moderately separated mixture") {
    RngStream rng(42);
    std::vector<std::size_t> truth;
    const MixtureParams p({0.8, 0.2}, {BsParams(0.25, 1.0), BsParams(0.25, 5.0)});
    const auto data = mix_sample(1000, p, rng, &truth);
    const auto part = kbumps_partition(data, 2);
    CHECK_FALSE(part.fallback_used);
    std::size_t agree = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        agree += (part.labels[i] == truth[i]);
    }
    agree = std::max(agree, data.size() - agree);
    CHECK(static_cast<double>(agree) / data.size() >= 0.95);
}

TEST_CASE("kbumps with G=1 puts everything in one cluster") {
    RngStream rng(3);
    const auto data = bs_sample(200, BsParams(0.5, 2.0), rng);
    const auto part = kbumps_partition(data, 1);
    CHECK(part.n_clusters == 1);
    CHECK(part.cluster_sizes()[0] == data.size());
}

TEST_CASE("kbumps falls back to quantile splits when bumps are missing") {
    // unimodal data cannot yield three bumps
    RngStream rng(11);
    const auto data = bs_sample(300, BsParams(0.2, 2.0), rng);
    std::vector<double> modes;
    const auto part = kbumps_partition(data, 3, &modes);
    if (part.fallback_used) {
        CHECK(modes.empty());
        const auto sizes = part.cluster_sizes();
        CHECK(sizes[0] == 100);
        CHECK(sizes[1] == 100);
        CHECK(sizes[2] == 100);
    }
    part.validate();

    // identical observations always force the fallback
    const std::vector<double> flat(30, 4.0);
    const auto fpart = kbumps_partition(flat, 2);
    CHECK(fpart.fallback_used);
    fpart.validate();
}

TEST_CASE("kmeans and kmedoids on trivially separated data") {
    std::vector<double> data = {1.0, 1.1, 0.9, 1.05, 50.0, 49.5, 50.5, 51.0};
    RngStream r1(9), r2(9);
    const auto km = kmeans_partition(data, 2, r1);
    const auto kd = kmedoids_partition(data, 2, r2);
    for (const auto& part : {km, kd}) {
        part.validate();
        // the first four points share a label, the last four the other
        for (int i = 1; i < 4; ++i) CHECK(part.labels[i] == part.labels[0]);
        for (int i = 5; i < 8; ++i) CHECK(part.labels[i] == part.labels[4]);
        CHECK(part.labels[0] != part.labels[4]);
    }
}

TEST_CASE("partition strategies respect input checks") {
    RngStream rng(1);
    CHECK_THROWS_AS(kbumps_partition({1.0, 2.0}, 3), std::invalid_argument);
    CHECK_THROWS_AS(kbumps_partition({}, 1), std::invalid_argument);
    CHECK_THROWS_AS(kbumps_partition({1.0, -2.0, 3.0}, 2), std::domain_error);
    CHECK_THROWS_AS(kmeans_partition({1.0}, 2, rng), std::invalid_argument);
}

TEST_CASE("moment_init matches hand-computed cluster statistics") {
    // cluster 0: {1, 4} -> s = 2.5, r = 1.6, beta = 2, alpha = sqrt(2(1.25-1))
    // cluster 1: {9}    -> beta = 9, alpha floored
    std::vector<double> data = {1.0, 4.0, 9.0};
    Partition part;
    part.labels = {0, 0, 1};
    part.n_clusters = 2;
    const auto init = moment_init(data, part);
    CHECK(init.weights[0] == Approx(2.0 / 3.0).epsilon(1e-14));
    CHECK(init.weights[1] == Approx(1.0 / 3.0).epsilon(1e-14));
    CHECK(init.components[0].beta == Approx(2.0).epsilon(1e-12));
    CHECK(init.components[0].alpha == Approx(std::sqrt(0.5)).epsilon(1e-12));
    CHECK(init.components[1].beta == Approx(9.0).epsilon(1e-12));
    CHECK(init.components[1].alpha == Approx(1e-3).epsilon(1e-12));
}

TEST_CASE("moment_init weights reflect cluster sizes") {
    RngStream rng(55);
    std::vector<double> data;
    for (int i = 0; i < 60; ++i) data.push_back(1.0 + 0.1 * rng.uniform());
    for (int i = 0; i < 40; ++i) data.push_back(10.0 + 0.5 * rng.uniform());
    Partition part;
    part.labels.assign(100, 0);
    for (int i = 60; i < 100; ++i) part.labels[i] = 1;
    part.n_clusters = 2;
    const auto init = moment_init(data, part);
    CHECK(init.weights[0] == Approx(0.6).epsilon(1e-14));
    CHECK(init.weights[1] == Approx(0.4).epsilon(1e-14));
    CHECK(init.components[0].beta < init.components[1].beta);
}

TEST_CASE("moment_init floors alpha for identical observations") {
    std::vector<double> data = {3.0, 3.0, 3.0, 3.0};
    Partition part;
    part.labels = {0, 0, 0, 0};
    part.n_clusters = 1;
    const auto init = moment_init(data, part);
    CHECK(init.components[0].alpha == Approx(1e-3));
    CHECK(init.components[0].beta == Approx(3.0).epsilon(1e-12));
}

TEST_CASE("kbumps bump abscissas sit near the component modes") {
    RngStream rng(19);
    const MixtureParams p({0.5, 0.5}, {BsParams(0.2, 1.0), BsParams(0.2, 10.0)});
    const auto data = mix_sample(4000, p, rng);
    std::vector<double> modes;
    const auto part = kbumps_partition(data, 2, &modes);
    REQUIRE_FALSE(part.fallback_used);
    REQUIRE(modes.size() == 2);
    CHECK(modes[0] == Approx(bs_mode(p.components[0])).margin(0.5));
    CHECK(modes[1] == Approx(bs_mode(p.components[1])).margin(2.0));
}
