#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "fedsim/distribution.hpp"
#include "fedsim/kmeans.hpp"
#include "fedsim/rng.hpp"
#include "fedsim/sampler.hpp"

namespace fedsim {

enum class StrategyKind { random, fedemd, svb, tifl_lite, fedfast_lite, mav_always, mav_never };

inline StrategyKind parse_strategy(const std::string& name) {
    if (name == "random") return StrategyKind::random;
    if (name == "fedemd") return StrategyKind::fedemd;
    if (name == "svb") return StrategyKind::svb;
    if (name == "tifl-lite") return StrategyKind::tifl_lite;
    if (name == "fedfast-lite") return StrategyKind::fedfast_lite;
    if (name == "mav-always") return StrategyKind::mav_always;
    if (name == "mav-never") return StrategyKind::mav_never;
    throw std::invalid_argument("strategy: unknown name '" + name + "'");
}

inline std::string strategy_name(StrategyKind kind) {
    switch (kind) {
        case StrategyKind::random: return "random";
        case StrategyKind::fedemd: return "fedemd";
        case StrategyKind::svb: return "svb";
        case StrategyKind::tifl_lite: return "tifl-lite";
        case StrategyKind::fedfast_lite: return "fedfast-lite";
        case StrategyKind::mav_always: return "mav-always";
        case StrategyKind::mav_never: return "mav-never";
    }
    throw std::invalid_argument("strategy: bad kind");
}

struct StrategyParams {
    double alpha = 0.15;    // weight of the global distance
    double beta = 0.0015;   // weight of the round-scaled current distance
    double svb_gamma = 0.5;
    double svb_epsilon = 1e-3;
    std::array<double, 5> tier_probs{0.35, 0.25, 0.2, 0.12, 0.08};
};

struct SelectionOutcome {
    std::vector<int> selected;          // ascending client ids
    std::vector<double> probabilities;  // length N when the strategy exposes them
};

/// Post-round signals a strategy may consume, aligned with `selected`.
struct RoundFeedback {
    int round = 0;
    std::vector<int> selected;
    std::vector<double> shapley;         // raw SV per selected client
    std::vector<double> local_accuracy;  // per selected client's local model
};

class Selector {
public:
    virtual ~Selector() = default;
    virtual SelectionOutcome select(int round, int k) = 0;
    virtual void observe(const RoundFeedback&) {}
    virtual bool wants_shapley() const { return false; }
    virtual bool wants_local_accuracy() const { return false; }
};

/// Lowest class index reported by at least half of the clients; falls back
/// to the most widely owned class. A Maverick-exclusive class is owned by
/// one client only and so never wins against a shared class.
inline int choose_reference_class(const std::vector<ClientProfile>& profiles) {
    if (profiles.empty()) throw std::invalid_argument("reference class: empty population");
    const std::size_t num_classes = profiles.front().distribution.classes();
    const std::size_t n = profiles.size();
    std::vector<std::size_t> owners(num_classes, 0);
    for (const auto& p : profiles)
        for (std::size_t c = 0; c < num_classes; ++c)
            if (p.distribution.counts[c] > 0) owners[c] += 1;
    for (std::size_t c = 0; c < num_classes; ++c)
        if (owners[c] * 2 >= n) return static_cast<int>(c);
    const auto it = std::max_element(owners.begin(), owners.end());
    if (*it == 0) throw std::invalid_argument("reference class: all distributions empty");
    return static_cast<int>(it - owners.begin());
}

/// Selection probabilities softmax(alpha * emd~_g - t * beta * emd~_c) with
/// the size-scaled distances against the global and current distributions.
inline std::vector<double> fedemd_probabilities(const std::vector<ClientProfile>& profiles,
                                                const ClassDistribution& d_global,
                                                const ClassDistribution& d_current, int round,
                                                double alpha, double beta, int ref_class) {
    if (round < 1) throw std::invalid_argument("fedemd: round must be >= 1");
    const auto scaled_global =
        size_scaled_emd(profiles, d_global, static_cast<std::size_t>(ref_class));
    const auto scaled_current =
        size_scaled_emd(profiles, d_current, static_cast<std::size_t>(ref_class));
    std::vector<double> logits(profiles.size());
    for (std::size_t i = 0; i < profiles.size(); ++i)
        logits[i] = alpha * scaled_global[i] - static_cast<double>(round) * beta * scaled_current[i];
    double zmax = logits[0];
    for (double z : logits) zmax = std::max(zmax, z);
    double sum = 0.0;
    for (auto& z : logits) {
        z = std::exp(z - zmax);
        sum += z;
    }
    for (auto& z : logits) z /= sum;
    return logits;
}

/// Uniform K-subset of {0, ..., n-1}.
inline std::vector<int> uniform_subset(int n, int k, Rng& rng) {
    return sample_without_replacement(std::vector<double>(static_cast<std::size_t>(n), 1.0), k,
                                      rng);
}

enum class FixedPolicy { mav_always, mav_never };

/// mav-always keeps every Maverick in the selection and fills the rest
/// uniformly; mav-never samples uniformly from the non-Mavericks only.
inline std::vector<int> select_fixed(FixedPolicy policy, const std::vector<int>& maverick_ids,
                                     int n, int k, Rng& rng) {
    std::vector<bool> is_mav(static_cast<std::size_t>(n), false);
    for (int id : maverick_ids) is_mav[static_cast<std::size_t>(id)] = true;
    std::vector<int> regular;
    for (int i = 0; i < n; ++i)
        if (!is_mav[static_cast<std::size_t>(i)]) regular.push_back(i);

    std::vector<int> out;
    if (policy == FixedPolicy::mav_always) {
        if (static_cast<int>(maverick_ids.size()) > k)
            throw std::invalid_argument("mav-always: more Mavericks than selection slots");
        out = maverick_ids;
        const int need = k - static_cast<int>(maverick_ids.size());
        if (need > static_cast<int>(regular.size()))
            throw std::invalid_argument("mav-always: not enough non-Maverick clients");
        for (int idx : uniform_subset(static_cast<int>(regular.size()), need, rng))
            out.push_back(regular[static_cast<std::size_t>(idx)]);
    } else {
        if (k > static_cast<int>(regular.size()))
            throw std::invalid_argument("mav-never: not enough non-Maverick clients");
        for (int idx : uniform_subset(static_cast<int>(regular.size()), k, rng))
            out.push_back(regular[static_cast<std::size_t>(idx)]);
    }
    std::sort(out.begin(), out.end());
    return out;
}

class RandomSelector final : public Selector {
public:
    RandomSelector(int n, std::uint64_t seed) : n_(n), rng_(seed) {}
    SelectionOutcome select(int, int k) override { return {uniform_subset(n_, k, rng_), {}}; }

private:
    int n_;
    Rng rng_;
};

class FedEmdSelector final : public Selector {
public:
    FedEmdSelector(std::vector<ClientProfile> profiles, double alpha, double beta,
                   std::uint64_t seed)
        : profiles_(std::move(profiles)),
          alpha_(alpha),
          beta_(beta),
          ref_class_(choose_reference_class(profiles_)),
          d_global_(aggregate_global(profiles_)),
          d_current_(profiles_.front().distribution.classes()),
          proba_(profiles_.size(), 1.0 / static_cast<double>(profiles_.size())),
          rng_(seed) {}

    SelectionOutcome select(int round, int k) override {
        SelectionOutcome outcome;
        outcome.probabilities = proba_;
        outcome.selected = sample_without_replacement(proba_, k, rng_);
        std::vector<ClientProfile> chosen;
        chosen.reserve(outcome.selected.size());
        for (int id : outcome.selected) chosen.push_back(profiles_[static_cast<std::size_t>(id)]);
        d_current_ = accumulate_current(d_current_, chosen);
        proba_ = fedemd_probabilities(profiles_, d_global_, d_current_, round, alpha_, beta_,
                                      ref_class_);
        return outcome;
    }

    const ClassDistribution& current_distribution() const { return d_current_; }
    const std::vector<double>& next_probabilities() const { return proba_; }
    int reference_class() const { return ref_class_; }

private:
    std::vector<ClientProfile> profiles_;
    double alpha_;
    double beta_;
    int ref_class_;
    ClassDistribution d_global_;
    ClassDistribution d_current_;
    std::vector<double> proba_;
    Rng rng_;
};

/// Weighted random selection driven by an exponentially averaged estimate
/// of each client's Shapley value; estimates are floored so nobody starves.
class SvbSelector final : public Selector {
public:
    SvbSelector(int n, double gamma, double epsilon, std::uint64_t seed)
        : estimates_(static_cast<std::size_t>(n), 1.0 / static_cast<double>(n)),
          gamma_(gamma),
          epsilon_(epsilon),
          rng_(seed) {}

    SelectionOutcome select(int, int k) override {
        std::vector<double> weights(estimates_.size());
        double total = 0.0;
        for (std::size_t i = 0; i < estimates_.size(); ++i) {
            weights[i] = std::max(estimates_[i], epsilon_);
            total += weights[i];
        }
        SelectionOutcome outcome;
        outcome.selected = sample_without_replacement(weights, k, rng_);
        outcome.probabilities = std::move(weights);
        for (auto& w : outcome.probabilities) w /= total;
        return outcome;
    }

    void observe(const RoundFeedback& fb) override {
        for (std::size_t i = 0; i < fb.selected.size(); ++i) {
            auto& est = estimates_[static_cast<std::size_t>(fb.selected[i])];
            est = (1.0 - gamma_) * est + gamma_ * fb.shapley[i];
        }
    }

    bool wants_shapley() const override { return true; }
    const std::vector<double>& estimates() const { return estimates_; }

private:
    std::vector<double> estimates_;
    double gamma_;
    double epsilon_;
    Rng rng_;
};

/// Accuracy-tiered selection: clients ranked by last-known accuracy
/// (unknown = 0) fall into five tiers; a tier is drawn from a fixed
/// categorical favoring low accuracy, and the round's clients come from
/// that tier, backfilled from adjacent tiers when it is too small.
class TiflLiteSelector final : public Selector {
public:
    TiflLiteSelector(int n, std::array<double, 5> tier_probs, std::uint64_t seed)
        : accuracy_(static_cast<std::size_t>(n), 0.0), tier_probs_(tier_probs), rng_(seed) {}

    SelectionOutcome select(int, int k) override {
        const int n = static_cast<int>(accuracy_.size());
        std::vector<int> order(accuracy_.size());
        for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
            return accuracy_[static_cast<std::size_t>(a)] < accuracy_[static_cast<std::size_t>(b)];
        });

        constexpr int kTiers = 5;
        std::array<std::vector<int>, kTiers> tiers;
        const int base = n / kTiers;
        const int extra = n % kTiers;
        int cursor = 0;
        for (int tier = 0; tier < kTiers; ++tier) {
            const int size = base + (tier < extra ? 1 : 0);
            for (int i = 0; i < size; ++i)
                tiers[static_cast<std::size_t>(tier)].push_back(
                    order[static_cast<std::size_t>(cursor++)]);
        }

        const double roll = rng_.uniform();
        int tier = kTiers - 1;
        double cumulative = 0.0;
        for (int i = 0; i < kTiers; ++i) {
            cumulative += tier_probs_[static_cast<std::size_t>(i)];
            if (roll < cumulative) {
                tier = i;
                break;
            }
        }

        // Visit the drawn tier first, then its neighbours by distance
        // (lower-accuracy side first), taking a uniform draw from each
        // until K clients are gathered.
        std::vector<int> selected;
        for (int dist = 0; dist < kTiers && static_cast<int>(selected.size()) < k; ++dist) {
            for (int sign : {-1, +1}) {
                const int idx = tier + sign * dist;
                if (idx < 0 || idx >= kTiers) continue;
                auto pool = tiers[static_cast<std::size_t>(idx)];
                rng_.shuffle(pool);
                const int need = k - static_cast<int>(selected.size());
                for (int i = 0; i < std::min(need, static_cast<int>(pool.size())); ++i)
                    selected.push_back(pool[static_cast<std::size_t>(i)]);
                if (dist == 0) break;  // the drawn tier itself, only once
                if (static_cast<int>(selected.size()) >= k) break;
            }
        }
        std::sort(selected.begin(), selected.end());
        return {std::move(selected), {}};
    }

    void observe(const RoundFeedback& fb) override {
        for (std::size_t i = 0; i < fb.selected.size(); ++i)
            accuracy_[static_cast<std::size_t>(fb.selected[i])] = fb.local_accuracy[i];
    }

    bool wants_local_accuracy() const override { return true; }
    const std::vector<double>& known_accuracy() const { return accuracy_; }

private:
    std::vector<double> accuracy_;
    std::array<double, 5> tier_probs_;
    Rng rng_;
};

/// K-means over the clients' class-probability vectors, one uniform pick
/// per cluster; empty clusters are backfilled uniformly from the rest.
class FedFastLiteSelector final : public Selector {
public:
    FedFastLiteSelector(const std::vector<ClientProfile>& profiles, std::uint64_t seed)
        : rng_(seed) {
        points_.reserve(profiles.size());
        for (const auto& p : profiles) points_.push_back(prob(p.distribution));
    }

    SelectionOutcome select(int, int k) override {
        const auto km = kmeans(points_, k, rng_);
        std::vector<int> selected;
        std::vector<bool> taken(points_.size(), false);
        for (int c = 0; c < k; ++c) {
            std::vector<int> members;
            for (std::size_t i = 0; i < points_.size(); ++i)
                if (km.assignment[i] == c) members.push_back(static_cast<int>(i));
            if (members.empty()) continue;
            const int pick = members[rng_.below(members.size())];
            selected.push_back(pick);
            taken[static_cast<std::size_t>(pick)] = true;
        }
        while (static_cast<int>(selected.size()) < k) {
            std::vector<int> rest;
            for (std::size_t i = 0; i < points_.size(); ++i)
                if (!taken[i]) rest.push_back(static_cast<int>(i));
            const int pick = rest[rng_.below(rest.size())];
            selected.push_back(pick);
            taken[static_cast<std::size_t>(pick)] = true;
        }
        std::sort(selected.begin(), selected.end());
        return {std::move(selected), {}};
    }

private:
    std::vector<std::vector<double>> points_;
    Rng rng_;
};

class FixedPolicySelector final : public Selector {
public:
    FixedPolicySelector(FixedPolicy policy, std::vector<int> maverick_ids, int n,
                        std::uint64_t seed)
        : policy_(policy), maverick_ids_(std::move(maverick_ids)), n_(n), rng_(seed) {}

    SelectionOutcome select(int, int k) override {
        return {select_fixed(policy_, maverick_ids_, n_, k, rng_), {}};
    }

private:
    FixedPolicy policy_;
    std::vector<int> maverick_ids_;
    int n_;
    Rng rng_;
};

inline std::unique_ptr<Selector> make_selector(StrategyKind kind, const StrategyParams& params,
                                               const std::vector<ClientProfile>& profiles,
                                               std::uint64_t seed) {
    const int n = static_cast<int>(profiles.size());
    std::vector<int> maverick_ids;
    for (const auto& p : profiles)
        if (p.is_maverick) maverick_ids.push_back(p.id);
    switch (kind) {
        case StrategyKind::random: return std::make_unique<RandomSelector>(n, seed);
        case StrategyKind::fedemd:
            return std::make_unique<FedEmdSelector>(profiles, params.alpha, params.beta, seed);
        case StrategyKind::svb:
            return std::make_unique<SvbSelector>(n, params.svb_gamma, params.svb_epsilon, seed);
        case StrategyKind::tifl_lite:
            return std::make_unique<TiflLiteSelector>(n, params.tier_probs, seed);
        case StrategyKind::fedfast_lite:
            return std::make_unique<FedFastLiteSelector>(profiles, seed);
        case StrategyKind::mav_always:
            return std::make_unique<FixedPolicySelector>(FixedPolicy::mav_always, maverick_ids, n,
                                                         seed);
        case StrategyKind::mav_never:
            return std::make_unique<FixedPolicySelector>(FixedPolicy::mav_never, maverick_ids, n,
                                                         seed);
    }
    throw std::invalid_argument("strategy: bad kind");
}

}  // namespace fedsim
