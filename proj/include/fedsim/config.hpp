#pragma once

#include <fstream>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "fedsim/orchestrator.hpp"

namespace fedsim {

/// Raised for malformed or contradictory run configs; the CLI maps it to
/// exit code 2.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

constexpr int kConfigSchemaVersion = 1;

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& obj, const std::set<std::string>& known,
                                const std::string& where) {
    for (const auto& [key, value] : obj.items())
        if (!known.contains(key))
            throw ConfigError("config: unknown key '" + key + "' in " + where);
}

template <typename T>
T require(const nlohmann::json& obj, const std::string& key, const std::string& where) {
    if (!obj.contains(key)) throw ConfigError("config: missing key '" + key + "' in " + where);
    try {
        return obj.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError("config: key '" + key + "' in " + where + " has the wrong type");
    }
}

template <typename T>
T optional(const nlohmann::json& obj, const std::string& key, const std::string& where,
           T fallback) {
    if (!obj.contains(key)) return fallback;
    try {
        return obj.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError("config: key '" + key + "' in " + where + " has the wrong type");
    }
}

}  // namespace detail

/// Content digest of a config document: FNV-1a over the canonical
/// (key-sorted) serialization, so reordering keys does not change it.
inline std::string config_digest(const nlohmann::json& doc) {
    const std::string canonical = doc.dump();
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : canonical) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return detail::hex_digest(h);
}

inline SimulationConfig parse_config(const nlohmann::json& doc) {
    if (!doc.is_object()) throw ConfigError("config: top level must be an object");
    detail::reject_unknown_keys(doc,
                                {"schema_version", "seed", "clients", "selected_per_round",
                                 "rounds", "aggregation", "eval_fraction", "shapley_enabled",
                                 "scenario", "dataset", "strategy", "learner"},
                                "the top level");

    const int version = detail::require<int>(doc, "schema_version", "the top level");
    if (version != kConfigSchemaVersion)
        throw ConfigError("config: unsupported schema_version " + std::to_string(version));

    SimulationConfig cfg;
    cfg.seed = detail::require<std::uint64_t>(doc, "seed", "the top level");
    cfg.num_clients = detail::require<int>(doc, "clients", "the top level");
    cfg.selected_per_round = detail::require<int>(doc, "selected_per_round", "the top level");
    cfg.rounds = detail::require<int>(doc, "rounds", "the top level");
    const auto aggregation = detail::require<std::string>(doc, "aggregation", "the top level");
    if (aggregation == "fedavg")
        cfg.aggregation = AggregationMode::fedavg;
    else if (aggregation == "fedsgd")
        cfg.aggregation = AggregationMode::fedsgd;
    else
        throw ConfigError("config: aggregation must be 'fedavg' or 'fedsgd'");
    cfg.eval_fraction = detail::optional<double>(doc, "eval_fraction", "the top level", 0.2);
    cfg.shapley_enabled = detail::optional<bool>(doc, "shapley_enabled", "the top level", true);

    const auto& scenario = doc.contains("scenario") ? doc.at("scenario") : nlohmann::json::object();
    detail::reject_unknown_keys(
        scenario, {"num_mavericks", "maverick_classes", "maverick_mode", "maverick_share"},
        "scenario");
    cfg.scenario.num_clients = cfg.num_clients;
    cfg.scenario.num_mavericks = detail::optional<int>(scenario, "num_mavericks", "scenario", 0);
    cfg.scenario.maverick_classes =
        detail::optional<std::vector<int>>(scenario, "maverick_classes", "scenario", {});
    const auto mode = detail::optional<std::string>(scenario, "maverick_mode", "scenario",
                                                    "exclusive");
    if (mode == "exclusive")
        cfg.scenario.maverick_mode = MaverickMode::exclusive;
    else if (mode == "shared")
        cfg.scenario.maverick_mode = MaverickMode::shared;
    else
        throw ConfigError("config: maverick_mode must be 'exclusive' or 'shared'");
    cfg.scenario.maverick_share =
        detail::optional<double>(scenario, "maverick_share", "scenario", 1.0);

    if (!doc.contains("dataset")) throw ConfigError("config: missing key 'dataset'");
    const auto& dataset = doc.at("dataset");
    const auto kind = detail::require<std::string>(dataset, "type", "dataset");
    if (kind == "synthetic") {
        detail::reject_unknown_keys(dataset, {"type", "classes", "features", "per_class", "spread"},
                                    "dataset");
        cfg.dataset.kind = DatasetSpec::Kind::synthetic;
        cfg.dataset.classes = detail::require<int>(dataset, "classes", "dataset");
        cfg.dataset.features = detail::require<int>(dataset, "features", "dataset");
        cfg.dataset.per_class = detail::require<int>(dataset, "per_class", "dataset");
        cfg.dataset.spread = detail::require<double>(dataset, "spread", "dataset");
    } else if (kind == "idx") {
        detail::reject_unknown_keys(
            dataset, {"type", "train_images", "train_labels", "test_images", "test_labels"},
            "dataset");
        cfg.dataset.kind = DatasetSpec::Kind::idx;
        cfg.dataset.train_images = detail::require<std::string>(dataset, "train_images", "dataset");
        cfg.dataset.train_labels = detail::require<std::string>(dataset, "train_labels", "dataset");
        cfg.dataset.test_images = detail::require<std::string>(dataset, "test_images", "dataset");
        cfg.dataset.test_labels = detail::require<std::string>(dataset, "test_labels", "dataset");
    } else {
        throw ConfigError("config: dataset type must be 'synthetic' or 'idx'");
    }

    if (!doc.contains("strategy")) throw ConfigError("config: missing key 'strategy'");
    const auto& strategy = doc.at("strategy");
    detail::reject_unknown_keys(strategy,
                                {"name", "alpha", "beta", "gamma", "epsilon", "tier_probs"},
                                "strategy");
    try {
        cfg.strategy = parse_strategy(detail::require<std::string>(strategy, "name", "strategy"));
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    cfg.strategy_params.alpha = detail::optional<double>(strategy, "alpha", "strategy", 0.15);
    cfg.strategy_params.beta = detail::optional<double>(strategy, "beta", "strategy", 0.0015);
    cfg.strategy_params.svb_gamma = detail::optional<double>(strategy, "gamma", "strategy", 0.5);
    cfg.strategy_params.svb_epsilon =
        detail::optional<double>(strategy, "epsilon", "strategy", 1e-3);
    if (strategy.contains("tier_probs")) {
        const auto probs = detail::require<std::vector<double>>(strategy, "tier_probs", "strategy");
        if (probs.size() != cfg.strategy_params.tier_probs.size())
            throw ConfigError("config: tier_probs must have exactly 5 entries");
        std::copy(probs.begin(), probs.end(), cfg.strategy_params.tier_probs.begin());
    }

    if (!doc.contains("learner")) throw ConfigError("config: missing key 'learner'");
    const auto& learner = doc.at("learner");
    detail::reject_unknown_keys(learner,
                                {"learning_rate", "batch_size", "lr_step", "lr_gamma", "prox_mu",
                                 "init_scale"},
                                "learner");
    cfg.learner.learning_rate = detail::require<double>(learner, "learning_rate", "learner");
    cfg.learner.batch_size = detail::require<int>(learner, "batch_size", "learner");
    cfg.learner.lr_step = detail::optional<int>(learner, "lr_step", "learner", 50);
    cfg.learner.lr_gamma = detail::optional<double>(learner, "lr_gamma", "learner", 1.0);
    cfg.learner.prox_mu = detail::optional<double>(learner, "prox_mu", "learner", 0.0);
    cfg.learner.init_scale = detail::optional<double>(learner, "init_scale", "learner", 0.0);

    cfg.config_digest = config_digest(doc);
    try {
        cfg.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    return cfg;
}

inline SimulationConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path);
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config: " + path + " is not valid JSON: " + e.what());
    }
    return parse_config(doc);
}

}  // namespace fedsim
