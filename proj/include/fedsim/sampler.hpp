#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "fedsim/rng.hpp"

namespace fedsim {

/// Weighted sampling of K distinct indices without replacement via the
/// A-Res key scheme: index i gets key u_i^(1/w_i) with u_i uniform on (0,1)
/// and the K largest keys win. Zero-weight indices never win; exact key
/// ties break toward the lower index. Output is sorted ascending.
inline std::vector<int> sample_without_replacement(const std::vector<double>& weights, int k,
                                                   Rng& rng) {
    if (k < 0) throw std::invalid_argument("sample: negative K");
    std::size_t positive = 0;
    for (double w : weights) {
        if (w < 0.0 || !std::isfinite(w))
            throw std::invalid_argument("sample: weights must be finite and >= 0");
        if (w > 0.0) ++positive;
    }
    if (static_cast<std::size_t>(k) > positive)
        throw std::invalid_argument("sample: only " + std::to_string(positive) +
                                    " positive weights for K=" + std::to_string(k));

    // Keys are drawn for every index in order, so the rng stream does not
    // depend on which indices end up selected.
    std::vector<std::pair<double, int>> keyed;
    keyed.reserve(weights.size());
    for (std::size_t i = 0; i < weights.size(); ++i) {
        const double u = rng.uniform_open();
        const double key = weights[i] > 0.0 ? std::pow(u, 1.0 / weights[i]) : 0.0;
        keyed.emplace_back(key, static_cast<int>(i));
    }
    const auto higher = [](const std::pair<double, int>& a, const std::pair<double, int>& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    };
    std::nth_element(keyed.begin(), keyed.begin() + k, keyed.end(), higher);
    std::vector<int> out;
    out.reserve(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) out.push_back(keyed[static_cast<std::size_t>(i)].second);
    std::sort(out.begin(), out.end());
    return out;
}

/// Empirical per-index inclusion frequency over independent trials.
inline std::vector<double> inclusion_frequencies(const std::vector<double>& weights, int k,
                                                 int trials, Rng& rng) {
    if (trials < 1) throw std::invalid_argument("inclusion_frequencies: trials must be >= 1");
    std::vector<double> freq(weights.size(), 0.0);
    for (int t = 0; t < trials; ++t)
        for (int idx : sample_without_replacement(weights, k, rng))
            freq[static_cast<std::size_t>(idx)] += 1.0;
    for (auto& f : freq) f /= static_cast<double>(trials);
    return freq;
}

}  // namespace fedsim
