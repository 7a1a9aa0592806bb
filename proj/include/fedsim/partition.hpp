#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "fedsim/dataset.hpp"
#include "fedsim/distribution.hpp"
#include "fedsim/rng.hpp"

namespace fedsim {

enum class MaverickMode { exclusive, shared };

/// How to distribute one dataset over N clients. Mavericks are clients
/// 0..num_mavericks-1; in exclusive mode each owns its own class, in shared
/// mode they jointly own a single class. maverick_share < 1 leaves part of
/// the owned class with the regular clients.
struct ScenarioSpec {
    int num_clients = 0;
    int num_mavericks = 0;
    std::vector<int> maverick_classes;
    MaverickMode maverick_mode = MaverickMode::exclusive;
    double maverick_share = 1.0;

    void validate(std::size_t num_classes) const {
        if (num_clients < 1) throw std::invalid_argument("scenario: need at least one client");
        if (num_mavericks < 0) throw std::invalid_argument("scenario: negative maverick count");
        if (num_mavericks >= num_clients)
            throw std::invalid_argument("scenario: num_mavericks must be < num_clients");
        if (!(maverick_share > 0.0 && maverick_share <= 1.0))
            throw std::invalid_argument("scenario: maverick_share must lie in (0,1]");
        if (num_mavericks > 0) {
            if (maverick_mode == MaverickMode::exclusive) {
                if (static_cast<int>(maverick_classes.size()) != num_mavericks)
                    throw std::invalid_argument(
                        "scenario: exclusive mode needs one class per maverick");
                auto sorted = maverick_classes;
                std::sort(sorted.begin(), sorted.end());
                if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
                    throw std::invalid_argument("scenario: duplicate maverick classes");
            } else if (maverick_classes.size() != 1) {
                throw std::invalid_argument("scenario: shared mode needs exactly one class");
            }
            for (int c : maverick_classes)
                if (c < 0 || static_cast<std::size_t>(c) >= num_classes)
                    throw std::invalid_argument("scenario: maverick class " + std::to_string(c) +
                                                " out of range");
        }
    }
};

struct PartitionResult {
    std::vector<LabeledDataset> client_data;
    std::vector<ClientProfile> profiles;
};

/// Splits `data` into per-client datasets realizing the requested Maverick
/// scenario. Maverick clients receive (a share of) their owned classes and
/// nothing else; every other class is dealt evenly (+-1 per class) over the
/// non-Maverick clients, with the sample order shuffled by `seed`.
inline PartitionResult partition_maverick(const LabeledDataset& data, const ScenarioSpec& spec,
                                          std::uint64_t seed) {
    spec.validate(data.num_classes);
    const int n_clients = spec.num_clients;
    const int n_mav = spec.num_mavericks;
    const int n_regular = n_clients - n_mav;

    std::vector<std::vector<std::size_t>> rows_by_class(data.num_classes);
    for (std::size_t i = 0; i < data.num_samples(); ++i)
        rows_by_class[static_cast<std::size_t>(data.labels[i])].push_back(i);
    for (int c : spec.maverick_classes)
        if (rows_by_class[static_cast<std::size_t>(c)].empty())
            throw std::invalid_argument("scenario: maverick class " + std::to_string(c) +
                                        " absent from the dataset");

    std::vector<int> class_of_maverick(data.num_classes, -1);  // exclusive owner per class
    const bool shared = spec.maverick_mode == MaverickMode::shared;
    if (n_mav > 0 && !shared)
        for (int j = 0; j < n_mav; ++j)
            class_of_maverick[static_cast<std::size_t>(spec.maverick_classes[j])] = j;
    const int shared_class = (n_mav > 0 && shared) ? spec.maverick_classes[0] : -1;

    std::vector<std::vector<std::size_t>> assigned(static_cast<std::size_t>(n_clients));
    for (std::size_t c = 0; c < data.num_classes; ++c) {
        auto rows = rows_by_class[c];
        Rng rng(derive_seed(seed, fnv1a64("partition"), static_cast<std::uint64_t>(c)));
        rng.shuffle(rows);

        std::size_t cursor = 0;
        if (static_cast<int>(c) == shared_class) {
            // Shared Mavericks split the owned share evenly (+-1).
            const auto take = static_cast<std::size_t>(
                std::llround(spec.maverick_share * static_cast<double>(rows.size())));
            const std::size_t base = take / static_cast<std::size_t>(n_mav);
            const std::size_t rem = take % static_cast<std::size_t>(n_mav);
            for (int m = 0; m < n_mav; ++m) {
                const std::size_t quota = base + (static_cast<std::size_t>(m) < rem ? 1 : 0);
                for (std::size_t i = 0; i < quota; ++i)
                    assigned[static_cast<std::size_t>(m)].push_back(rows[cursor++]);
            }
        } else if (class_of_maverick[c] >= 0) {
            const auto take = static_cast<std::size_t>(
                std::llround(spec.maverick_share * static_cast<double>(rows.size())));
            const auto owner = static_cast<std::size_t>(class_of_maverick[c]);
            for (std::size_t i = 0; i < take; ++i) assigned[owner].push_back(rows[cursor++]);
        }

        // Remaining samples (whole class, or the residual when share < 1)
        // are dealt round-robin over the regular clients; the per-class
        // starting offset spreads the +-1 remainders across clients.
        const std::size_t start = c % static_cast<std::size_t>(n_regular);
        for (std::size_t i = 0; cursor < rows.size(); ++i, ++cursor) {
            const std::size_t slot = (start + i) % static_cast<std::size_t>(n_regular);
            assigned[static_cast<std::size_t>(n_mav) + slot].push_back(rows[cursor]);
        }
    }

    PartitionResult out;
    out.client_data.reserve(static_cast<std::size_t>(n_clients));
    out.profiles.reserve(static_cast<std::size_t>(n_clients));
    for (int id = 0; id < n_clients; ++id) {
        auto& rows = assigned[static_cast<std::size_t>(id)];
        if (rows.empty())
            throw std::invalid_argument("scenario: client " + std::to_string(id) +
                                        " would receive no data");
        std::sort(rows.begin(), rows.end());
        LabeledDataset ds = subset(data, rows);
        out.profiles.push_back(make_profile(id, class_distribution(ds), id < n_mav));
        out.client_data.push_back(std::move(ds));
    }
    return out;
}

}  // namespace fedsim
