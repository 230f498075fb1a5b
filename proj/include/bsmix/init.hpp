#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "bsmix/mixture.hpp"
#include "bsmix/normal.hpp"
#include "bsmix/rng.hpp"

namespace bsmix {

enum class InitStrategy { kbumps, kmeans, kmedoids };

inline const char* to_string(InitStrategy s) {
    switch (s) {
        case InitStrategy::kbumps: return "kbumps";
        case InitStrategy::kmeans: return "kmeans";
        case InitStrategy::kmedoids: return "kmedoids";
    }
    return "?";
}

/// Hard assignment of n observations to G clusters (labels 0..G-1).
struct Partition {
    std::vector<std::size_t> labels;
    std::size_t n_clusters = 0;
    bool fallback_used = false;  // set when k-bumps fell back to quantile splits

    std::vector<std::size_t> cluster_sizes() const {
        std::vector<std::size_t> counts(n_clusters, 0);
        for (std::size_t l : labels) counts.at(l)++;
        return counts;
    }

    void validate() const {
        for (std::size_t c : cluster_sizes()) {
            if (c == 0) throw std::runtime_error("Partition: empty cluster");
        }
    }
};

namespace detail {

inline void check_init_input(const std::vector<double>& data, std::size_t g) {
    if (g < 1 || data.size() < g) {
        throw std::invalid_argument("initialization: need n >= G >= 1");
    }
    for (double y : data) require_positive(y, "initialization data");
}

/// Deterministic split at empirical quantiles j/G; always a valid partition.
inline Partition quantile_split(const std::vector<double>& data, std::size_t g) {
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return data[a] < data[b]; });
    Partition part;
    part.labels.resize(data.size());
    part.n_clusters = g;
    for (std::size_t rank = 0; rank < order.size(); ++rank) {
        std::size_t label = rank * g / order.size();
        part.labels[order[rank]] = std::min(label, g - 1);
    }
    return part;
}

inline std::size_t nearest_center(double y, const std::vector<double>& centers) {
    std::size_t best = 0;
    double best_d = std::abs(y - centers[0]);
    for (std::size_t j = 1; j < centers.size(); ++j) {
        const double d = std::abs(y - centers[j]);
        if (d < best_d) {
            best_d = d;
            best = j;
        }
    }
    return best;
}

}  // namespace detail

/// k-bumps: Gaussian KDE (Silverman bandwidth, 1024-point grid), keep the G
/// highest local maxima, assign each point to the nearest one. Deterministic.
/// Falls back to quantile splits (flagged) when fewer than G bumps exist.
/// The detected bump abscissas are returned through modes_out when requested.
inline Partition kbumps_partition(const std::vector<double>& data, std::size_t g,
                                  std::vector<double>* modes_out = nullptr) {
    detail::check_init_input(data, g);
    const std::size_t n = data.size();

    const double lo = *std::min_element(data.begin(), data.end());
    const double hi = *std::max_element(data.begin(), data.end());

    double mean = 0.0;
    for (double y : data) mean += y;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double y : data) var += (y - mean) * (y - mean);
    var /= std::max<std::size_t>(n - 1, 1);
    std::vector<double> sorted(data);
    std::sort(sorted.begin(), sorted.end());
    const double iqr = sorted[(3 * n) / 4] - sorted[n / 4];
    double spread = std::sqrt(var);
    if (iqr > 0.0) spread = std::min(spread, iqr / 1.34);
    if (!(spread > 0.0)) spread = std::max(hi - lo, 1e-8);
    const double bw = 0.9 * spread * std::pow(static_cast<double>(n), -0.2);

    const std::size_t grid_n = 1024;
    std::vector<double> grid(grid_n), dens(grid_n, 0.0);
    for (std::size_t i = 0; i < grid_n; ++i) {
        grid[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(grid_n - 1);
        for (double y : data) dens[i] += norm_pdf((grid[i] - y) / bw);
        dens[i] /= static_cast<double>(n) * bw;
    }

    // Local maxima (endpoints included), ranked by height, ties to the left.
    std::vector<std::size_t> maxima;
    for (std::size_t i = 0; i < grid_n; ++i) {
        const bool left_ok = (i == 0) || dens[i] > dens[i - 1];
        const bool right_ok = (i + 1 == grid_n) || dens[i] > dens[i + 1];
        if (left_ok && right_ok) maxima.push_back(i);
    }
    std::stable_sort(maxima.begin(), maxima.end(), [&](std::size_t a, std::size_t b) {
        if (dens[a] != dens[b]) return dens[a] > dens[b];
        return grid[a] < grid[b];
    });

    if (maxima.size() < g) {
        Partition part = detail::quantile_split(data, g);
        part.fallback_used = true;
        if (modes_out) modes_out->clear();
        return part;
    }

    std::vector<double> modes;
    for (std::size_t j = 0; j < g; ++j) modes.push_back(grid[maxima[j]]);
    std::sort(modes.begin(), modes.end());

    Partition part;
    part.labels.resize(n);
    part.n_clusters = g;
    for (std::size_t i = 0; i < n; ++i) {
        part.labels[i] = detail::nearest_center(data[i], modes);
    }
    auto sizes = part.cluster_sizes();
    if (std::find(sizes.begin(), sizes.end(), std::size_t{0}) != sizes.end()) {
        part = detail::quantile_split(data, g);
        part.fallback_used = true;
        if (modes_out) modes_out->clear();
        return part;
    }
    if (modes_out) *modes_out = modes;
    return part;
}

/// Lloyd's algorithm with k-means++ seeding on 1-D data.
inline Partition kmeans_partition(const std::vector<double>& data, std::size_t g,
                                  RngStream& rng) {
    detail::check_init_input(data, g);
    const std::size_t n = data.size();

    // k-means++ seeding
    std::vector<double> centers;
    centers.push_back(data[static_cast<std::size_t>(rng.uniform() * n) % n]);
    while (centers.size() < g) {
        std::vector<double> d2(n);
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t c = detail::nearest_center(data[i], centers);
            d2[i] = (data[i] - centers[c]) * (data[i] - centers[c]);
            total += d2[i];
        }
        if (total <= 0.0) {
            centers.push_back(data[static_cast<std::size_t>(rng.uniform() * n) % n]);
            continue;
        }
        double u = rng.uniform() * total;
        std::size_t pick = n - 1;
        for (std::size_t i = 0; i < n; ++i) {
            u -= d2[i];
            if (u <= 0.0) {
                pick = i;
                break;
            }
        }
        centers.push_back(data[pick]);
    }

    Partition part;
    part.labels.assign(n, 0);
    part.n_clusters = g;
    for (int iter = 0; iter < 50; ++iter) {
        bool changed = false;
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t l = detail::nearest_center(data[i], centers);
            if (l != part.labels[i]) {
                part.labels[i] = l;
                changed = true;
            }
        }
        std::vector<double> sums(g, 0.0);
        std::vector<std::size_t> counts(g, 0);
        for (std::size_t i = 0; i < n; ++i) {
            sums[part.labels[i]] += data[i];
            counts[part.labels[i]]++;
        }
        for (std::size_t j = 0; j < g; ++j) {
            if (counts[j] == 0) {
                // reseed at the point farthest from its center
                std::size_t far = 0;
                double far_d = -1.0;
                for (std::size_t i = 0; i < n; ++i) {
                    const double d = std::abs(data[i] - centers[part.labels[i]]);
                    if (d > far_d) {
                        far_d = d;
                        far = i;
                    }
                }
                centers[j] = data[far];
                part.labels[far] = j;
                changed = true;
            } else {
                centers[j] = sums[j] / static_cast<double>(counts[j]);
            }
        }
        if (!changed) break;
    }
    part.validate();
    return part;
}

/// k-medoids on 1-D data: alternate nearest-medoid assignment with the
/// in-cluster point minimizing total absolute distance.
inline Partition kmedoids_partition(const std::vector<double>& data, std::size_t g,
                                    RngStream& rng) {
    detail::check_init_input(data, g);
    const std::size_t n = data.size();

    std::vector<double> medoids;
    for (std::size_t tries = 0; medoids.size() < g && tries < 100 * g; ++tries) {
        const double cand = data[static_cast<std::size_t>(rng.uniform() * n) % n];
        if (std::find(medoids.begin(), medoids.end(), cand) == medoids.end()) {
            medoids.push_back(cand);
        }
    }
    while (medoids.size() < g) {
        medoids.push_back(data[static_cast<std::size_t>(rng.uniform() * n) % n]);
    }

    Partition part;
    part.labels.assign(n, 0);
    part.n_clusters = g;
    for (int iter = 0; iter < 50; ++iter) {
        bool changed = false;
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t l = detail::nearest_center(data[i], medoids);
            if (l != part.labels[i]) {
                part.labels[i] = l;
                changed = true;
            }
        }
        for (std::size_t j = 0; j < g; ++j) {
            std::vector<double> members;
            for (std::size_t i = 0; i < n; ++i) {
                if (part.labels[i] == j) members.push_back(data[i]);
            }
            if (members.empty()) {
                std::size_t far = 0;
                double far_d = -1.0;
                for (std::size_t i = 0; i < n; ++i) {
                    const double d = std::abs(data[i] - medoids[part.labels[i]]);
                    if (d > far_d) {
                        far_d = d;
                        far = i;
                    }
                }
                medoids[j] = data[far];
                part.labels[far] = j;
                changed = true;
                continue;
            }
            // 1-D: the medoid is a member at the median.
            std::sort(members.begin(), members.end());
            const double med = members[members.size() / 2];
            if (med != medoids[j]) {
                medoids[j] = med;
                changed = true;
            }
        }
        if (!changed) break;
    }
    part.validate();
    return part;
}

inline Partition make_partition(const std::vector<double>& data, std::size_t g,
                                InitStrategy strategy, RngStream& rng,
                                std::vector<double>* bump_modes = nullptr) {
    switch (strategy) {
        case InitStrategy::kbumps: return kbumps_partition(data, g, bump_modes);
        case InitStrategy::kmeans: return kmeans_partition(data, g, rng);
        case InitStrategy::kmedoids: return kmedoids_partition(data, g, rng);
    }
    throw std::logic_error("make_partition: unknown strategy");
}

/// Modified-moment starting values per cluster: beta = sqrt(s r) and
/// alpha = sqrt(2(sqrt(s/r) - 1)) with s the arithmetic and r the harmonic
/// cluster mean. When bump maxima are supplied (k-bumps path), alpha is
/// instead recovered from the mode equation at the bump abscissa.
inline MixtureParams moment_init(const std::vector<double>& data, const Partition& part,
                                 const std::vector<double>& bump_modes = {}) {
    part.validate();
    const std::size_t g = part.n_clusters;
    const auto sizes = part.cluster_sizes();

    std::vector<double> weights(g), alphas(g), betas(g);
    for (std::size_t j = 0; j < g; ++j) {
        double sum = 0.0, inv_sum = 0.0;
        for (std::size_t i = 0; i < data.size(); ++i) {
            if (part.labels[i] != j) continue;
            sum += data[i];
            inv_sum += 1.0 / data[i];
        }
        const double nj = static_cast<double>(sizes[j]);
        const double s = sum / nj;
        const double r = nj / inv_sum;
        weights[j] = nj / static_cast<double>(data.size());
        betas[j] = std::sqrt(s * r);

        double alpha;
        if (sizes[j] < 2 || s <= r) {
            alpha = 1e-3;
        } else {
            alpha = std::sqrt(2.0 * (std::sqrt(s / r) - 1.0));
        }
        if (j < bump_modes.size() && bump_modes[j] > 0.0 && bump_modes[j] < betas[j]) {
            alpha = bs_alpha_from_mode(bump_modes[j], betas[j]);
        }
        alphas[j] = std::max(alpha, 1e-3);
    }

    double wsum = 0.0;
    for (double w : weights) wsum += w;
    std::vector<BsParams> comps;
    for (std::size_t j = 0; j < g; ++j) {
        weights[j] /= wsum;
        comps.emplace_back(alphas[j], betas[j]);
    }
    return MixtureParams(std::move(weights), std::move(comps));
}

}  // namespace bsmix
