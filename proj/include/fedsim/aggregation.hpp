#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "fedsim/learner.hpp"

namespace fedsim {

enum class AggregationMode { fedavg, fedsgd };

/// A client's post-training weights together with its data quantity.
struct LocalUpdate {
    int client_id = 0;
    ModelParams params;
    std::int64_t data_size = 1;
};

namespace detail {

// Pointers to the updates sorted by ascending client id; rejects duplicate
// ids so that every aggregate has one canonical summation order.
inline std::vector<const LocalUpdate*> sorted_by_id(const std::vector<LocalUpdate>& updates) {
    std::vector<const LocalUpdate*> ptrs;
    ptrs.reserve(updates.size());
    for (const auto& u : updates) ptrs.push_back(&u);
    std::sort(ptrs.begin(), ptrs.end(),
              [](const LocalUpdate* a, const LocalUpdate* b) { return a->client_id < b->client_id; });
    for (std::size_t i = 1; i < ptrs.size(); ++i)
        if (ptrs[i]->client_id == ptrs[i - 1]->client_id)
            throw std::invalid_argument("aggregate: duplicate client id " +
                                        std::to_string(ptrs[i]->client_id));
    return ptrs;
}

inline ModelParams weighted_mean(const std::vector<const LocalUpdate*>& ptrs, bool by_size) {
    if (ptrs.empty()) throw std::invalid_argument("aggregate: empty coalition");
    const ModelParams& first = ptrs.front()->params;
    double total = 0.0;
    for (const auto* u : ptrs) {
        if (!u->params.same_shape(first))
            throw std::invalid_argument("aggregate: parameter shape mismatch");
        if (u->data_size < 1) throw std::invalid_argument("aggregate: data_size must be >= 1");
        total += by_size ? static_cast<double>(u->data_size) : 1.0;
    }
    ModelParams out(first.classes, first.features);
    for (const auto* u : ptrs) {
        const double w = (by_size ? static_cast<double>(u->data_size) : 1.0) / total;
        for (std::size_t i = 0; i < out.size(); ++i) out.values[i] += w * u->params.values[i];
    }
    return out;
}

}  // namespace detail

/// Data-size-weighted average, summed in ascending client-id order.
inline ModelParams fedavg(const std::vector<LocalUpdate>& updates) {
    return detail::weighted_mean(detail::sorted_by_id(updates), /*by_size=*/true);
}

/// Unweighted average, summed in ascending client-id order.
inline ModelParams fedsgd(const std::vector<LocalUpdate>& updates) {
    return detail::weighted_mean(detail::sorted_by_id(updates), /*by_size=*/false);
}

inline ModelParams aggregate(const std::vector<LocalUpdate>& updates, AggregationMode mode) {
    return mode == AggregationMode::fedavg ? fedavg(updates) : fedsgd(updates);
}

/// Aggregation restricted to the client ids in `ids`; the empty coalition
/// yields nullopt (resolved by the contribution layer to the previous
/// global model).
inline std::optional<ModelParams> subset_aggregate(const std::vector<LocalUpdate>& updates,
                                                   const std::vector<int>& ids,
                                                   AggregationMode mode) {
    if (ids.empty()) return std::nullopt;
    std::vector<LocalUpdate> chosen;
    chosen.reserve(ids.size());
    for (int id : ids) {
        const auto it = std::find_if(updates.begin(), updates.end(),
                                     [id](const LocalUpdate& u) { return u.client_id == id; });
        if (it == updates.end())
            throw std::invalid_argument("subset_aggregate: unknown client id " +
                                        std::to_string(id));
        chosen.push_back(*it);
    }
    return aggregate(chosen, mode);
}

/// The aggregate with one client removed; exactly subset_aggregate on the
/// complement set.
inline ModelParams leave_one_out(const std::vector<LocalUpdate>& updates, int excluded_id,
                                 AggregationMode mode = AggregationMode::fedavg) {
    if (updates.size() < 2) throw std::invalid_argument("leave_one_out: need >= 2 updates");
    std::vector<int> rest;
    bool found = false;
    for (const auto& u : updates) {
        if (u.client_id == excluded_id) {
            found = true;
            continue;
        }
        rest.push_back(u.client_id);
    }
    if (!found)
        throw std::invalid_argument("leave_one_out: client id " + std::to_string(excluded_id) +
                                    " not present");
    return *subset_aggregate(updates, rest, mode);
}

}  // namespace fedsim
