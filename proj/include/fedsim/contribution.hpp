#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "fedsim/aggregation.hpp"
#include "fedsim/learner.hpp"
#include "fedsim/parallel.hpp"

namespace fedsim {

constexpr int kMaxShapleyPlayers = 15;

/// Loss reduction attributable to one client: the federator loss without it
/// minus the loss with everyone. Positive means the client helped.
inline double influence_from_losses(double loss_full, double loss_without) {
    return loss_without - loss_full;
}

inline double influence(const std::vector<LocalUpdate>& updates, int client_id,
                        const LabeledDataset& eval_set, AggregationMode mode) {
    if (updates.size() < 2) throw std::invalid_argument("influence: need >= 2 updates");
    const double loss_full = evaluate(aggregate(updates, mode), eval_set).loss;
    const double loss_without = evaluate(leave_one_out(updates, client_id, mode), eval_set).loss;
    return influence_from_losses(loss_full, loss_without);
}

/// Federator loss of every coalition of the given updates, indexed by bit
/// mask over the updates sorted by ascending client id. v[0] is the loss of
/// `base_params` (the previous global model). Coalition evaluations are
/// independent and may run on several workers; slot writes keep the result
/// deterministic.
inline std::vector<double> coalition_losses(const std::vector<LocalUpdate>& updates,
                                            const LabeledDataset& eval_set,
                                            const ModelParams& base_params, AggregationMode mode,
                                            int workers = 1) {
    const int k = static_cast<int>(updates.size());
    if (k < 1) throw std::invalid_argument("coalition_losses: no updates");
    if (k > kMaxShapleyPlayers)
        throw std::invalid_argument("coalition_losses: exact enumeration capped at " +
                                    std::to_string(kMaxShapleyPlayers) + " players, got " +
                                    std::to_string(k));
    auto ptrs = detail::sorted_by_id(updates);
    const std::size_t n_masks = std::size_t{1} << k;
    std::vector<double> v(n_masks);
    v[0] = evaluate(base_params, eval_set).loss;
    parallel_for(n_masks - 1, workers, [&](std::size_t i) {
        const std::size_t mask = i + 1;
        std::vector<LocalUpdate> members;
        for (int b = 0; b < k; ++b)
            if (mask & (std::size_t{1} << b)) members.push_back(*ptrs[static_cast<std::size_t>(b)]);
        v[mask] = evaluate(aggregate(members, mode), eval_set).loss;
    });
    return v;
}

namespace detail {

inline const std::vector<double>& factorials() {
    static const std::vector<double> f = [] {
        std::vector<double> out(kMaxShapleyPlayers + 1, 1.0);
        for (int i = 1; i <= kMaxShapleyPlayers; ++i) out[static_cast<std::size_t>(i)] =
            out[static_cast<std::size_t>(i - 1)] * i;
        return out;
    }();
    return f;
}

// |S|! (K - |S| - 1)! / K!
inline double coalition_weight(int subset_size, int num_players) {
    const auto& f = factorials();
    return f[static_cast<std::size_t>(subset_size)] *
           f[static_cast<std::size_t>(num_players - subset_size - 1)] /
           f[static_cast<std::size_t>(num_players)];
}

}  // namespace detail

/// Exact Shapley values from a coalition-loss table (index = bit mask,
/// values[0] = empty-coalition loss). Contributions are loss reductions, so
/// helpful players come out positive and
///   sum_k SV_k = v(empty) - v(grand coalition).
inline std::vector<double> shapley_from_values(const std::vector<double>& v, int num_players) {
    if (num_players < 1 || num_players > kMaxShapleyPlayers)
        throw std::invalid_argument("shapley_from_values: player count out of range");
    if (v.size() != (std::size_t{1} << num_players))
        throw std::invalid_argument("shapley_from_values: table size must be 2^K");
    std::vector<double> sv(static_cast<std::size_t>(num_players), 0.0);
    const auto full = static_cast<std::size_t>((std::size_t{1} << num_players) - 1);
    for (int k = 0; k < num_players; ++k) {
        const std::size_t bit = std::size_t{1} << k;
        const std::size_t others = full & ~bit;
        // iterate all subsets of `others`, including the empty set
        std::size_t s = 0;
        while (true) {
            const int size = std::popcount(s);
            sv[static_cast<std::size_t>(k)] +=
                detail::coalition_weight(size, num_players) * (v[s] - v[s | bit]);
            if (s == others) break;
            s = (s - others) & others;  // next subset of `others`
        }
    }
    return sv;
}

/// Shapley values of the round's updates, ordered by ascending client id.
inline std::vector<double> shapley(const std::vector<LocalUpdate>& updates,
                                   const LabeledDataset& eval_set, const ModelParams& base_params,
                                   AggregationMode mode, int workers = 1) {
    const auto v = coalition_losses(updates, eval_set, base_params, mode, workers);
    return shapley_from_values(v, static_cast<int>(updates.size()));
}

/// Projects raw Shapley values onto the simplex: negatives clamp to zero,
/// then normalize; if nothing is positive the result is uniform.
inline std::vector<double> relative_contribution(const std::vector<double>& sv) {
    if (sv.empty()) throw std::invalid_argument("relative_contribution: empty input");
    std::vector<double> rc(sv.size());
    double total = 0.0;
    for (std::size_t i = 0; i < sv.size(); ++i) {
        rc[i] = std::max(sv[i], 0.0);
        total += rc[i];
    }
    if (total <= 0.0) {
        const double u = 1.0 / static_cast<double>(sv.size());
        for (auto& x : rc) x = u;
        return rc;
    }
    for (auto& x : rc) x /= total;
    return rc;
}

/// Per-client fairness 1 - |q - rc|.
inline double fairness_client(double data_ratio, double contribution_ratio) {
    if (data_ratio < 0.0 || data_ratio > 1.0 || contribution_ratio < 0.0 ||
        contribution_ratio > 1.0)
        throw std::invalid_argument("fairness_client: ratios must lie in [0,1]");
    return 1.0 - std::abs(data_ratio - contribution_ratio);
}

/// Everything measured about one round's selected clients, aligned index by
/// index with `client_ids`.
struct ContributionRecord {
    int round = 0;
    std::vector<int> client_ids;          // ascending
    std::vector<double> shapley_values;   // raw, loss-reduction sign
    std::vector<double> relative;         // rc_k, on the simplex
    std::vector<double> data_ratio;       // q_k, on the simplex
    std::vector<double> fairness;         // U_k = 1 - |q_k - rc_k|
};

inline ContributionRecord make_contribution_record(int round, const std::vector<int>& ids,
                                                   const std::vector<double>& sv,
                                                   const std::vector<std::int64_t>& sizes) {
    if (ids.size() != sv.size() || ids.size() != sizes.size())
        throw std::invalid_argument("contribution record: length mismatch");
    ContributionRecord rec;
    rec.round = round;
    rec.client_ids = ids;
    rec.shapley_values = sv;
    rec.relative = relative_contribution(sv);
    double total = 0.0;
    for (auto n : sizes) total += static_cast<double>(n);
    rec.data_ratio.resize(sizes.size());
    for (std::size_t i = 0; i < sizes.size(); ++i)
        rec.data_ratio[i] = static_cast<double>(sizes[i]) / total;
    rec.fairness.resize(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i)
        rec.fairness[i] = fairness_client(rec.data_ratio[i], rec.relative[i]);
    return rec;
}

/// System-level fairness: 1 minus the mean absolute gap between data ratio
/// and relative contribution over all rounds and selected clients.
inline double fairness_system(const std::vector<ContributionRecord>& records) {
    if (records.empty()) throw std::invalid_argument("fairness_system: no records");
    double gap = 0.0;
    std::size_t terms = 0;
    for (const auto& rec : records) {
        for (std::size_t i = 0; i < rec.client_ids.size(); ++i)
            gap += std::abs(rec.data_ratio[i] - rec.relative[i]);
        terms += rec.client_ids.size();
    }
    return 1.0 - gap / static_cast<double>(terms);
}

/// Residual of the pairwise Shapley-difference decomposition
///   SV_a - SV_b = w(0) (delta_a(empty) - delta_b(empty))
///              + sum over nonempty S excluding both, w(|S|) (delta_a(S) - delta_b(S))
///              + sum over S excluding both, w(|S|+1) (delta_a(S+{b}) - delta_b(S+{a}))
/// with delta_k(S) = v(S) - v(S+{k}). Zero up to floating-point error for a
/// correct enumeration; `a`, `b` are player positions in the table.
inline double sv_pair_decomposition_residual(const std::vector<double>& v, int num_players,
                                             int a, int b) {
    if (a == b) throw std::invalid_argument("sv decomposition: players must differ");
    if (a < 0 || b < 0 || a >= num_players || b >= num_players)
        throw std::invalid_argument("sv decomposition: player position out of range");
    const auto sv = shapley_from_values(v, num_players);
    const double lhs = sv[static_cast<std::size_t>(a)] - sv[static_cast<std::size_t>(b)];

    const std::size_t bit_a = std::size_t{1} << a;
    const std::size_t bit_b = std::size_t{1} << b;
    const auto full = static_cast<std::size_t>((std::size_t{1} << num_players) - 1);
    const std::size_t rest = full & ~bit_a & ~bit_b;
    const auto delta = [&](std::size_t s, std::size_t bit) { return v[s] - v[s | bit]; };

    double rhs = detail::coalition_weight(0, num_players) * (delta(0, bit_a) - delta(0, bit_b));
    std::size_t s = 0;
    while (true) {
        const int size = std::popcount(s);
        if (s != 0)
            rhs += detail::coalition_weight(size, num_players) *
                   (delta(s, bit_a) - delta(s, bit_b));
        rhs += detail::coalition_weight(size + 1, num_players) *
               (delta(s | bit_b, bit_a) - delta(s | bit_a, bit_b));
        if (s == rest) break;
        s = (s - rest) & rest;
    }
    return std::abs(lhs - rhs);
}

/// FL-level wrapper of the decomposition check; `client_a`/`client_b` are
/// client ids present in `updates`.
inline double sv_identity_residual(const std::vector<LocalUpdate>& updates,
                                   const LabeledDataset& eval_set, const ModelParams& base_params,
                                   int client_a, int client_b,
                                   AggregationMode mode = AggregationMode::fedavg) {
    if (updates.size() > 10)
        throw std::invalid_argument("sv_identity_residual: capped at 10 players");
    auto ptrs = detail::sorted_by_id(updates);
    int pos_a = -1, pos_b = -1;
    for (std::size_t i = 0; i < ptrs.size(); ++i) {
        if (ptrs[i]->client_id == client_a) pos_a = static_cast<int>(i);
        if (ptrs[i]->client_id == client_b) pos_b = static_cast<int>(i);
    }
    if (pos_a < 0 || pos_b < 0)
        throw std::invalid_argument("sv_identity_residual: client id not present");
    const auto v = coalition_losses(updates, eval_set, base_params, mode);
    return sv_pair_decomposition_residual(v, static_cast<int>(updates.size()), pos_a, pos_b);
}

}  // namespace fedsim
