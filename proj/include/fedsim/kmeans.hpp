#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <vector>

#include "fedsim/rng.hpp"

namespace fedsim {

struct KMeansResult {
    std::vector<int> assignment;             // point -> cluster
    std::vector<std::vector<double>> means;  // cluster centroids
    int iterations = 0;
};

namespace detail {
inline double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}
}  // namespace detail

/// Lloyd's k-means on small dense points. The first centroid is a seeded
/// uniform pick; the rest follow farthest-point traversal (ties to the
/// lowest index), so the outcome is a deterministic function of the rng
/// state. Empty clusters keep their previous centroid.
inline KMeansResult kmeans(const std::vector<std::vector<double>>& points, int k, Rng& rng,
                           int max_iterations = 100, double tolerance = 1e-6) {
    const std::size_t n = points.size();
    if (k < 1 || static_cast<std::size_t>(k) > n)
        throw std::invalid_argument("kmeans: cluster count out of range");

    KMeansResult result;
    result.means.reserve(static_cast<std::size_t>(k));
    result.means.push_back(points[rng.below(n)]);
    std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
    while (result.means.size() < static_cast<std::size_t>(k)) {
        std::size_t farthest = 0;
        double best = -1.0;
        for (std::size_t i = 0; i < n; ++i) {
            nearest[i] = std::min(nearest[i], detail::sq_dist(points[i], result.means.back()));
            if (nearest[i] > best) {
                best = nearest[i];
                farthest = i;
            }
        }
        result.means.push_back(points[farthest]);
    }

    result.assignment.assign(n, 0);
    std::vector<std::size_t> cluster_size(static_cast<std::size_t>(k), 0);
    for (int iter = 0; iter < max_iterations; ++iter) {
        result.iterations = iter + 1;
        for (std::size_t i = 0; i < n; ++i) {
            int arg = 0;
            double best = std::numeric_limits<double>::infinity();
            for (int c = 0; c < k; ++c) {
                const double d = detail::sq_dist(points[i], result.means[static_cast<std::size_t>(c)]);
                if (d < best) {
                    best = d;
                    arg = c;
                }
            }
            result.assignment[i] = arg;
        }
        std::vector<std::vector<double>> next(static_cast<std::size_t>(k),
                                              std::vector<double>(points[0].size(), 0.0));
        cluster_size.assign(static_cast<std::size_t>(k), 0);
        for (std::size_t i = 0; i < n; ++i) {
            const auto c = static_cast<std::size_t>(result.assignment[i]);
            cluster_size[c] += 1;
            for (std::size_t j = 0; j < points[i].size(); ++j) next[c][j] += points[i][j];
        }
        double shift = 0.0;
        for (int c = 0; c < k; ++c) {
            const auto ci = static_cast<std::size_t>(c);
            if (cluster_size[ci] == 0) {
                next[ci] = result.means[ci];
                continue;
            }
            for (auto& v : next[ci]) v /= static_cast<double>(cluster_size[ci]);
            shift = std::max(shift, std::sqrt(detail::sq_dist(next[ci], result.means[ci])));
        }
        result.means = std::move(next);
        if (shift < tolerance) break;
    }
    return result;
}

}  // namespace fedsim
