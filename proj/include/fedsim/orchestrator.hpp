#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "fedsim/aggregation.hpp"
#include "fedsim/contribution.hpp"
#include "fedsim/dataset.hpp"
#include "fedsim/idx.hpp"
#include "fedsim/learner.hpp"
#include "fedsim/log.hpp"
#include "fedsim/parallel.hpp"
#include "fedsim/partition.hpp"
#include "fedsim/selection.hpp"

namespace fedsim {

struct DatasetSpec {
    enum class Kind { synthetic, idx };
    Kind kind = Kind::synthetic;
    // synthetic
    int classes = 4;
    int features = 8;
    int per_class = 200;
    double spread = 1.0;
    // idx (fixed federator test set provided by the dataset)
    std::string train_images, train_labels, test_images, test_labels;
};

struct SimulationConfig {
    std::uint64_t seed = 1;
    int num_clients = 10;        // N
    int selected_per_round = 2;  // K
    int rounds = 10;             // R
    AggregationMode aggregation = AggregationMode::fedavg;
    double eval_fraction = 0.2;
    bool shapley_enabled = true;
    ScenarioSpec scenario;
    DatasetSpec dataset;
    StrategyKind strategy = StrategyKind::random;
    StrategyParams strategy_params;
    LearnerConfig learner;
    std::string config_digest;  // set by the config loader

    void validate() const {
        if (num_clients < 1) throw std::invalid_argument("config: clients must be >= 1");
        if (selected_per_round < 1 || selected_per_round > num_clients)
            throw std::invalid_argument("config: selected_per_round must satisfy 1 <= K <= clients");
        if (rounds < 1) throw std::invalid_argument("config: rounds must be >= 1");
        if (!(eval_fraction > 0.0 && eval_fraction < 1.0))
            throw std::invalid_argument("config: eval_fraction must lie in (0,1)");
        const bool needs_shapley = shapley_enabled || strategy == StrategyKind::svb;
        if (needs_shapley && selected_per_round > kMaxShapleyPlayers)
            throw std::invalid_argument(
                "config: Shapley measurement is exact and capped at K <= " +
                std::to_string(kMaxShapleyPlayers));
        if (scenario.num_clients != num_clients)
            throw std::invalid_argument("config: scenario client count mismatch");
        if (dataset.kind == DatasetSpec::Kind::synthetic)
            scenario.validate(static_cast<std::size_t>(dataset.classes));
        learner.validate();
        for (double p : strategy_params.tier_probs)
            if (!(p >= 0.0)) throw std::invalid_argument("config: tier probabilities must be >= 0");
        double tp = 0.0;
        for (double p : strategy_params.tier_probs) tp += p;
        if (std::abs(tp - 1.0) > 1e-9)
            throw std::invalid_argument("config: tier probabilities must sum to 1");
    }
};

struct RoundRecord {
    int round = 0;
    std::vector<int> selected;
    double loss = 0.0;
    double accuracy = 0.0;
    std::vector<double> per_class_recall;
    std::optional<ContributionRecord> contribution;
    std::vector<double> selection_probabilities;  // empty unless the strategy exposes them
    double wall_time_ms = 0.0;
};

struct RunResult {
    std::string config_digest;
    std::string strategy;
    std::uint64_t seed = 0;
    std::size_t num_classes = 0;
    std::vector<int> maverick_ids;
    std::vector<int> maverick_classes;
    std::string test_split_digest;
    std::vector<RoundRecord> rounds;
    std::string final_params_digest;
    std::optional<double> fairness_utility;
    double mean_round_wall_ms = 0.0;

    std::vector<double> accuracy_series() const {
        std::vector<double> s;
        s.reserve(rounds.size());
        for (const auto& r : rounds) s.push_back(r.accuracy);
        return s;
    }

    /// Mean final-round recall over the scenario's Maverick classes; NaN
    /// when the scenario has none.
    double final_maverick_recall() const {
        if (maverick_classes.empty() || rounds.empty())
            return std::numeric_limits<double>::quiet_NaN();
        double sum = 0.0;
        for (int c : maverick_classes)
            sum += rounds.back().per_class_recall[static_cast<std::size_t>(c)];
        return sum / static_cast<double>(maverick_classes.size());
    }
};

namespace detail {

inline std::string hex_digest(std::uint64_t h) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[h & 0xf];
        h >>= 4;
    }
    return out;
}

inline std::uint64_t fnv_bytes(const void* data, std::size_t n, std::uint64_t h) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    return h;
}

inline std::string digest_params(const ModelParams& params) {
    std::uint64_t h = 1469598103934665603ull;
    h = fnv_bytes(params.values.data(), params.values.size() * sizeof(double), h);
    return hex_digest(h);
}

inline std::string digest_dataset(const LabeledDataset& data) {
    std::uint64_t h = 1469598103934665603ull;
    h = fnv_bytes(data.features.data(), data.features.size() * sizeof(double), h);
    h = fnv_bytes(data.labels.data(), data.labels.size() * sizeof(int), h);
    return hex_digest(h);
}

}  // namespace detail

/// The full federated round loop. Deterministic for a fixed config: every
/// random stream is derived from (seed, role, client, round), local updates
/// land in slots indexed by selection order, and aggregation always sums in
/// ascending client-id order, so the worker count never changes the result.
inline RunResult run_simulation(const SimulationConfig& config, int workers = 1) {
    config.validate();
    const std::uint64_t seed = config.seed;

    LabeledDataset train, eval_set;
    if (config.dataset.kind == DatasetSpec::Kind::synthetic) {
        const LabeledDataset all = generate_synthetic(
            config.dataset.classes, config.dataset.features, config.dataset.per_class,
            config.dataset.spread, derive_seed(seed, fnv1a64("data")));
        auto [tr, te] = train_test_split(all, config.eval_fraction, derive_seed(seed, fnv1a64("eval")));
        train = std::move(tr);
        eval_set = std::move(te);
    } else {
        train = load_idx(config.dataset.train_images, config.dataset.train_labels);
        eval_set = load_idx(config.dataset.test_images, config.dataset.test_labels);
        if (train.num_classes < eval_set.num_classes) train.num_classes = eval_set.num_classes;
        if (eval_set.num_classes < train.num_classes) eval_set.num_classes = train.num_classes;
        ScenarioSpec check = config.scenario;
        check.validate(train.num_classes);
    }

    auto partition = partition_maverick(train, config.scenario, derive_seed(seed, fnv1a64("assign")));
    const int k = config.selected_per_round;
    const auto num_classes = train.num_classes;

    RunResult result;
    result.config_digest = config.config_digest;
    result.strategy = strategy_name(config.strategy);
    result.seed = seed;
    result.num_classes = num_classes;
    result.maverick_classes = config.scenario.num_mavericks > 0 ? config.scenario.maverick_classes
                                                                : std::vector<int>{};
    for (const auto& p : partition.profiles)
        if (p.is_maverick) result.maverick_ids.push_back(p.id);
    result.test_split_digest = detail::digest_dataset(eval_set);

    ModelParams global = init_params(static_cast<int>(num_classes),
                                     static_cast<int>(train.num_features),
                                     derive_seed(seed, fnv1a64("params")), config.learner.init_scale);
    auto selector = make_selector(config.strategy, config.strategy_params, partition.profiles,
                                  derive_seed(seed, fnv1a64("selector")));
    const bool need_shapley = config.shapley_enabled || selector->wants_shapley();

    std::vector<ContributionRecord> contribution_log;
    double total_ms = 0.0;
    for (int t = 1; t <= config.rounds; ++t) {
        const auto started = std::chrono::steady_clock::now();
        SelectionOutcome outcome;
        try {
            outcome = selector->select(t, k);
        } catch (const std::exception& e) {
            throw std::runtime_error("round " + std::to_string(t) +
                                     " selection failed: " + e.what());
        }

        std::vector<LocalUpdate> updates(outcome.selected.size());
        try {
            parallel_for(outcome.selected.size(), workers, [&](std::size_t i) {
                const int id = outcome.selected[i];
                ModelParams trained = local_train(
                    global, partition.client_data[static_cast<std::size_t>(id)], config.learner, t,
                    derive_seed(seed, fnv1a64("train"), static_cast<std::uint64_t>(id),
                                static_cast<std::uint64_t>(t)));
                updates[i] = LocalUpdate{id, std::move(trained),
                                         partition.profiles[static_cast<std::size_t>(id)].data_size};
            });
        } catch (const std::exception& e) {
            throw std::runtime_error("round " + std::to_string(t) +
                                     " local training failed: " + e.what());
        }

        ModelParams next;
        EvalReport report;
        std::vector<double> sv;
        std::optional<ContributionRecord> contribution;
        try {
            next = aggregate(updates, config.aggregation);
            report = evaluate(next, eval_set);
            if (need_shapley) {
                const auto v =
                    coalition_losses(updates, eval_set, global, config.aggregation, workers);
                sv = shapley_from_values(v, static_cast<int>(updates.size()));
                if (config.shapley_enabled) {
                    std::vector<std::int64_t> sizes;
                    sizes.reserve(updates.size());
                    for (const auto& u : updates) sizes.push_back(u.data_size);
                    contribution = make_contribution_record(t, outcome.selected, sv, sizes);
                    contribution_log.push_back(*contribution);
                }
            }
        } catch (const std::exception& e) {
            throw std::runtime_error("round " + std::to_string(t) +
                                     " aggregation/evaluation failed: " + e.what());
        }

        RoundFeedback feedback;
        feedback.round = t;
        feedback.selected = outcome.selected;
        if (selector->wants_shapley()) feedback.shapley = sv;
        if (selector->wants_local_accuracy()) {
            feedback.local_accuracy.resize(updates.size());
            parallel_for(updates.size(), workers, [&](std::size_t i) {
                feedback.local_accuracy[i] = evaluate(updates[i].params, eval_set).accuracy;
            });
        }
        selector->observe(feedback);

        global = std::move(next);
        const auto finished = std::chrono::steady_clock::now();
        const double ms =
            std::chrono::duration<double, std::milli>(finished - started).count();
        total_ms += ms;

        RoundRecord record;
        record.round = t;
        record.selected = outcome.selected;
        record.loss = report.loss;
        record.accuracy = report.accuracy;
        record.per_class_recall = report.per_class_recall;
        record.contribution = std::move(contribution);
        record.selection_probabilities = std::move(outcome.probabilities);
        record.wall_time_ms = ms;
        result.rounds.push_back(std::move(record));
        log::debug("round %d: loss=%.6f accuracy=%.4f", t, report.loss, report.accuracy);
    }

    result.final_params_digest = detail::digest_params(global);
    result.mean_round_wall_ms = total_ms / static_cast<double>(config.rounds);
    if (!contribution_log.empty()) result.fairness_utility = fairness_system(contribution_log);
    return result;
}

/// First round whose value reaches `fraction` of the reference series'
/// maximum; nullopt when the horizon ends first (rendered ">R").
inline std::optional<int> r_at_threshold(const std::vector<double>& series,
                                         const std::vector<double>& reference_series,
                                         double fraction = 0.99) {
    if (reference_series.empty()) throw std::invalid_argument("r_at_threshold: empty reference");
    double best = reference_series.front();
    for (double v : reference_series) best = std::max(best, v);
    const double threshold = fraction * best;
    for (std::size_t i = 0; i < series.size(); ++i)
        if (series[i] >= threshold) return static_cast<int>(i) + 1;
    return std::nullopt;
}

/// One run's footprint for comparison purposes.
struct RunInfo {
    std::string strategy;
    std::uint64_t seed = 0;
    std::size_t num_classes = 0;
    std::string test_split_digest;
    std::vector<double> accuracy;
    double final_accuracy = 0.0;
    double final_maverick_recall = std::numeric_limits<double>::quiet_NaN();
    std::optional<double> fairness_utility;
    double mean_round_wall_ms = 0.0;
};

inline RunInfo run_info(const RunResult& r) {
    RunInfo info;
    info.strategy = r.strategy;
    info.seed = r.seed;
    info.num_classes = r.num_classes;
    info.test_split_digest = r.test_split_digest;
    info.accuracy = r.accuracy_series();
    info.final_accuracy = r.rounds.empty() ? 0.0 : r.rounds.back().accuracy;
    info.final_maverick_recall = r.final_maverick_recall();
    info.fairness_utility = r.fairness_utility;
    info.mean_round_wall_ms = r.mean_round_wall_ms;
    return info;
}

/// Per-strategy aggregate over replicate seeds.
struct StrategyComparison {
    std::string strategy;
    int replicates = 0;
    std::optional<double> mean_rounds_to_threshold;  // over replicates that reached it
    int not_reached = 0;                             // replicates rendered ">R"
    int horizon = 0;                                 // R, for the ">R" rendering
    double mean_final_accuracy = 0.0;
    double mean_final_maverick_recall = std::numeric_limits<double>::quiet_NaN();
    std::optional<double> mean_fairness_utility;
    double mean_round_wall_ms = 0.0;
};

/// Summarizes runs by strategy against the reference strategy's replicate
/// with the same seed (the R@ threshold is per-seed). Comparability
/// requires a shared class count and federator test split.
inline std::vector<StrategyComparison> compare_runs(const std::vector<RunInfo>& runs,
                                                    const std::string& reference_strategy,
                                                    double fraction = 0.99) {
    if (runs.size() < 2) throw std::invalid_argument("compare: need at least two runs");
    for (const auto& r : runs) {
        if (r.num_classes != runs.front().num_classes)
            throw std::invalid_argument("compare: runs disagree on the class count");
        if (r.test_split_digest != runs.front().test_split_digest)
            throw std::invalid_argument("compare: runs use different federator test splits");
    }
    std::vector<const RunInfo*> references;
    for (const auto& r : runs)
        if (r.strategy == reference_strategy) references.push_back(&r);
    if (references.empty())
        throw std::invalid_argument("compare: no run uses reference strategy '" +
                                    reference_strategy + "'");

    const auto reference_for_seed = [&](std::uint64_t seed) -> const RunInfo* {
        for (const auto* ref : references)
            if (ref->seed == seed) return ref;
        return nullptr;
    };

    std::vector<StrategyComparison> table;
    const auto row_for = [&](const std::string& name) -> StrategyComparison& {
        for (auto& row : table)
            if (row.strategy == name) return row;
        table.push_back(StrategyComparison{});
        table.back().strategy = name;
        return table.back();
    };

    struct Accumulator {
        double r_sum = 0.0;
        int r_count = 0;
        double acc = 0.0, recall = 0.0, fairness = 0.0, wall = 0.0;
        int recall_count = 0, fairness_count = 0;
    };
    std::vector<std::pair<std::string, Accumulator>> sums;
    const auto acc_for = [&](const std::string& name) -> Accumulator& {
        for (auto& [n, a] : sums)
            if (n == name) return a;
        sums.emplace_back(name, Accumulator{});
        return sums.back().second;
    };

    for (const auto& r : runs) {
        const RunInfo* ref = reference_for_seed(r.seed);
        if (!ref)
            throw std::invalid_argument("compare: no reference replicate for seed " +
                                        std::to_string(r.seed));
        auto& row = row_for(r.strategy);
        auto& acc = acc_for(r.strategy);
        row.replicates += 1;
        row.horizon = std::max(row.horizon, static_cast<int>(r.accuracy.size()));
        const auto reached = r_at_threshold(r.accuracy, ref->accuracy, fraction);
        if (reached) {
            acc.r_sum += *reached;
            acc.r_count += 1;
        } else {
            row.not_reached += 1;
        }
        acc.acc += r.final_accuracy;
        if (!std::isnan(r.final_maverick_recall)) {
            acc.recall += r.final_maverick_recall;
            acc.recall_count += 1;
        }
        if (r.fairness_utility) {
            acc.fairness += *r.fairness_utility;
            acc.fairness_count += 1;
        }
        acc.wall += r.mean_round_wall_ms;
    }
    for (auto& row : table) {
        const auto& acc = acc_for(row.strategy);
        if (acc.r_count > 0) row.mean_rounds_to_threshold = acc.r_sum / acc.r_count;
        row.mean_final_accuracy = acc.acc / row.replicates;
        if (acc.recall_count > 0) row.mean_final_maverick_recall = acc.recall / acc.recall_count;
        if (acc.fairness_count > 0) row.mean_fairness_utility = acc.fairness / acc.fairness_count;
        row.mean_round_wall_ms = acc.wall / row.replicates;
    }
    return table;
}

}  // namespace fedsim
