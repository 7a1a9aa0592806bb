#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numeric>
#include <string>
#include <vector>

#include "fedsim/contribution.hpp"
#include "fedsim/dataset.hpp"
#include "fedsim/distribution.hpp"
#include "fedsim/learner.hpp"
#include "fedsim/rng.hpp"
#include "fedsim/sampler.hpp"

namespace fedsim {

/// Regularized lower incomplete gamma P(a, x) (series for x < a+1,
/// continued fraction otherwise).
inline double gamma_p(double a, double x) {
    if (x < 0.0 || a <= 0.0) throw std::invalid_argument("gamma_p: bad arguments");
    if (x == 0.0) return 0.0;
    const double log_gamma = std::lgamma(a);
    if (x < a + 1.0) {
        double term = 1.0 / a;
        double sum = term;
        double ap = a;
        for (int i = 0; i < 500; ++i) {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if (std::abs(term) < std::abs(sum) * 1e-15) break;
        }
        return sum * std::exp(-x + a * std::log(x) - log_gamma);
    }
    // Lentz continued fraction for Q(a, x)
    const double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i <= 500; ++i) {
        const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::abs(delta - 1.0) < 1e-15) break;
    }
    const double q = std::exp(-x + a * std::log(x) - log_gamma) * h;
    return 1.0 - q;
}

/// Upper-tail p-value of a chi-square statistic.
inline double chi_square_pvalue(double statistic, int dof) {
    return 1.0 - gamma_p(static_cast<double>(dof) / 2.0, statistic / 2.0);
}

/// Shapley values as the average marginal over all |K|! player orderings;
/// an independent route used to cross-check the subset-weighted formula.
inline std::vector<double> shapley_permutation_oracle(const std::vector<double>& v,
                                                      int num_players) {
    std::vector<int> order(static_cast<std::size_t>(num_players));
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> sum(static_cast<std::size_t>(num_players), 0.0);
    double permutations = 0.0;
    do {
        std::size_t mask = 0;
        for (int p : order) {
            const std::size_t bit = std::size_t{1} << p;
            sum[static_cast<std::size_t>(p)] += v[mask] - v[mask | bit];
            mask |= bit;
        }
        permutations += 1.0;
    } while (std::next_permutation(order.begin(), order.end()));
    for (auto& s : sum) s /= permutations;
    return sum;
}

/// Exact probability that A-Res with the given weights selects the pair
/// {i, j} when K = 2, via the equivalence with successive weighted draws.
inline double pair_selection_probability(const std::vector<double>& weights, std::size_t i,
                                         std::size_t j) {
    double total = 0.0;
    for (double w : weights) total += w;
    return weights[i] / total * weights[j] / (total - weights[i]) +
           weights[j] / total * weights[i] / (total - weights[j]);
}

struct VerifyCheck {
    std::string name;
    bool pass = false;
    std::string detail;
};

namespace detail {

inline std::string fmt(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.3g", v);
    return buf;
}

inline std::vector<double> random_value_table(int num_players, Rng& rng) {
    std::vector<double> v(std::size_t{1} << num_players);
    for (auto& x : v) x = rng.uniform(0.0, 2.0);
    return v;
}

}  // namespace detail

/// Runs the property suite: analytic gradients against central finite
/// differences, Shapley axioms and the pairwise decomposition identity,
/// sampler frequencies against exact distributions, and the EMD/KLD
/// divergence properties. `corrupt` deliberately breaks a named check so
/// harnesses can confirm failures are caught.
inline std::vector<VerifyCheck> run_verification(std::uint64_t seed,
                                                 const std::string& corrupt = "") {
    std::vector<VerifyCheck> checks;

    {  // gradient vs central finite differences, including prox terms
        Rng rng(derive_seed(seed, fnv1a64("verify-grad")));
        double worst = 0.0;
        for (int instance = 0; instance < 120; ++instance) {
            const int classes = 2 + static_cast<int>(rng.below(4));
            const int features = 1 + static_cast<int>(rng.below(6));
            const int samples = 1 + static_cast<int>(rng.below(8));
            LabeledDataset batch;
            batch.num_features = static_cast<std::size_t>(features);
            batch.num_classes = static_cast<std::size_t>(classes);
            std::vector<double> x(static_cast<std::size_t>(features));
            for (int s = 0; s < samples; ++s) {
                for (auto& xv : x) xv = rng.gaussian();
                batch.push_row(x, static_cast<int>(rng.below(static_cast<std::uint64_t>(classes))));
            }
            ModelParams params(static_cast<std::size_t>(classes),
                               static_cast<std::size_t>(features));
            for (auto& w : params.values) w = 0.5 * rng.gaussian();
            ModelParams center = params;
            for (auto& w : center.values) w += 0.3 * rng.gaussian();
            const double mu = (instance % 3 == 0) ? 0.0 : rng.uniform(0.0, 1.0);
            const ModelParams* prox = mu > 0.0 ? &center : nullptr;

            auto [loss, grad] = loss_and_gradient(params, batch, prox, mu);
            (void)loss;
            if (corrupt == "gradient") grad[0] += 1e-3;
            const double h = 1e-5;
            for (std::size_t c = 0; c < grad.size(); ++c) {
                ModelParams plus = params, minus = params;
                plus.values[c] += h;
                minus.values[c] -= h;
                const double fd = (loss_and_gradient(plus, batch, prox, mu).first -
                                   loss_and_gradient(minus, batch, prox, mu).first) /
                                  (2.0 * h);
                const double scale = std::max({std::abs(fd), std::abs(grad[c]), 1e-8});
                const double rel = std::abs(grad[c] - fd) / scale;
                if (std::abs(grad[c]) < 1e-12 && std::abs(fd) < 1e-12) continue;
                worst = std::max(worst, rel);
            }
        }
        checks.push_back({"gradient-finite-difference", worst < 1e-5,
                          "worst relative error " + detail::fmt(worst) + " (limit 1e-5)"});
    }

    {  // Shapley efficiency + permutation-oracle equivalence on random games
        Rng rng(derive_seed(seed, fnv1a64("verify-shapley")));
        double worst_eff = 0.0, worst_perm = 0.0;
        for (int instance = 0; instance < 60; ++instance) {
            const int players = 1 + static_cast<int>(rng.below(5));
            const auto v = detail::random_value_table(players, rng);
            const auto sv = shapley_from_values(v, players);
            const auto oracle = shapley_permutation_oracle(v, players);
            double total = 0.0;
            for (double s : sv) total += s;
            worst_eff = std::max(worst_eff, std::abs(total - (v.front() - v.back())));
            for (std::size_t i = 0; i < sv.size(); ++i)
                worst_perm = std::max(worst_perm, std::abs(sv[i] - oracle[i]));
        }
        checks.push_back({"shapley-efficiency", worst_eff < 1e-9,
                          "worst efficiency gap " + detail::fmt(worst_eff)});
        checks.push_back({"shapley-permutation-oracle", worst_perm < 1e-9,
                          "worst deviation from permutation average " + detail::fmt(worst_perm)});
    }

    {  // Shapley symmetry (size-only games) and dummy player
        Rng rng(derive_seed(seed, fnv1a64("verify-axioms")));
        double worst = 0.0;
        for (int instance = 0; instance < 20; ++instance) {
            const int players = 2 + static_cast<int>(rng.below(4));
            std::vector<double> by_size(static_cast<std::size_t>(players) + 1);
            for (auto& x : by_size) x = rng.uniform(0.0, 2.0);
            std::vector<double> v(std::size_t{1} << players);
            for (std::size_t mask = 0; mask < v.size(); ++mask)
                v[mask] = by_size[static_cast<std::size_t>(std::popcount(mask))];
            const auto sv = shapley_from_values(v, players);
            for (double s : sv) worst = std::max(worst, std::abs(s - sv.front()));

            // make player 0 a dummy: adding it never changes the value
            auto dummy = detail::random_value_table(players, rng);
            for (std::size_t mask = 0; mask < dummy.size(); ++mask)
                if (mask & 1u) dummy[mask] = dummy[mask & ~std::size_t{1}];
            worst = std::max(worst, std::abs(shapley_from_values(dummy, players).front()));
        }
        checks.push_back(
            {"shapley-symmetry-dummy", worst < 1e-9, "worst axiom violation " + detail::fmt(worst)});
    }

    {  // pairwise SV-difference decomposition residual
        Rng rng(derive_seed(seed, fnv1a64("verify-decomposition")));
        double worst = 0.0;
        for (int instance = 0; instance < 40; ++instance) {
            const int players = 2 + static_cast<int>(rng.below(4));
            const auto v = detail::random_value_table(players, rng);
            for (int a = 0; a < players; ++a)
                for (int b = 0; b < players; ++b)
                    if (a != b)
                        worst = std::max(worst,
                                         sv_pair_decomposition_residual(v, players, a, b));
        }
        checks.push_back({"sv-decomposition-identity", worst < 1e-9,
                          "worst residual " + detail::fmt(worst) + " (limit 1e-9)"});
    }

    {  // sampler: K=1 is exact proportional sampling
        Rng rng(derive_seed(seed, fnv1a64("verify-sampler-1")));
        const std::vector<double> weights{2.0, 1.0, 1.0, 1.0};
        const int trials = 100000;
        const auto freq = inclusion_frequencies(weights, 1, trials, rng);
        double total_w = 0.0;
        for (double w : weights) total_w += w;
        double stat = 0.0;
        for (std::size_t i = 0; i < weights.size(); ++i) {
            const double expected = trials * weights[i] / total_w;
            const double observed = freq[i] * trials;
            stat += (observed - expected) * (observed - expected) / expected;
        }
        const double p = chi_square_pvalue(stat, static_cast<int>(weights.size()) - 1);
        checks.push_back({"sampler-proportional", p >= 0.01,
                          "chi-square p=" + detail::fmt(p) + " (needs >= 0.01)"});
    }

    {  // sampler: K=2 pair frequencies against the exact distribution
        Rng rng(derive_seed(seed, fnv1a64("verify-sampler-2")));
        const std::vector<double> weights{0.4, 0.3, 0.2, 0.1};
        const int trials = 100000;
        std::vector<std::vector<int>> sets;
        std::vector<double> expected;
        for (std::size_t i = 0; i < weights.size(); ++i)
            for (std::size_t j = i + 1; j < weights.size(); ++j) {
                sets.push_back({static_cast<int>(i), static_cast<int>(j)});
                expected.push_back(pair_selection_probability(weights, i, j));
            }
        std::vector<int> observed(sets.size(), 0);
        for (int t = 0; t < trials; ++t) {
            const auto pick = sample_without_replacement(weights, 2, rng);
            for (std::size_t s = 0; s < sets.size(); ++s)
                if (sets[s] == pick) {
                    observed[s] += 1;
                    break;
                }
        }
        double stat = 0.0;
        for (std::size_t s = 0; s < sets.size(); ++s) {
            const double e = expected[s] * trials;
            stat += (observed[s] - e) * (observed[s] - e) / e;
        }
        const double p = chi_square_pvalue(stat, static_cast<int>(sets.size()) - 1);
        checks.push_back({"sampler-pair-exact", p >= 0.01,
                          "chi-square p=" + detail::fmt(p) + " (needs >= 0.01)"});
    }

    {  // EMD is a metric on probability vectors, bounded by 2
        Rng rng(derive_seed(seed, fnv1a64("verify-emd")));
        bool ok = true;
        std::string why;
        for (int instance = 0; instance < 500 && ok; ++instance) {
            const std::size_t classes = 2 + rng.below(5);
            const auto draw = [&] {
                ClassDistribution d(classes);
                for (auto& c : d.counts)
                    c = rng.below(3) == 0 ? 0 : static_cast<std::int64_t>(rng.below(20));
                if (d.total() == 0) d.counts[0] = 1;
                return d;
            };
            const auto a = draw(), b = draw(), c = draw();
            const double ab = emd(a, b), ba = emd(b, a), ac = emd(a, c), cb = emd(c, b);
            if (ab != ba) { ok = false; why = "asymmetry"; }
            if (ab < 0.0 || ab > 2.0 + 1e-12) { ok = false; why = "range"; }
            if (emd(a, a) != 0.0) { ok = false; why = "identity"; }
            if (ab > ac + cb + 1e-12) { ok = false; why = "triangle inequality"; }
            if (ab == 0.0 && prob(a) != prob(b)) { ok = false; why = "indiscernibles"; }
        }
        checks.push_back({"emd-metric", ok, ok ? "metric axioms hold on 500 random triples" : why});
    }

    {  // KLD: identity at p = q, Gibbs non-negativity, +inf marker
        Rng rng(derive_seed(seed, fnv1a64("verify-kld")));
        bool ok = true;
        std::string why = "identity, non-negativity and infinity marker hold";
        for (int instance = 0; instance < 200 && ok; ++instance) {
            const std::size_t classes = 2 + rng.below(5);
            const auto draw = [&] {
                std::vector<double> p(classes);
                double total = 0.0;
                for (auto& v : p) {
                    v = rng.uniform_open();
                    total += v;
                }
                for (auto& v : p) v /= total;
                return p;
            };
            const auto p = draw(), q = draw();
            if (kld(p, p) != 0.0) { ok = false; why = "kld(p,p) != 0"; }
            if (kld(p, q) < 0.0) { ok = false; why = "negative divergence"; }
        }
        if (ok) {
            const double inf = kld({0.5, 0.5}, {1.0, 0.0});
            if (!std::isinf(inf)) { ok = false; why = "missing infinity marker"; }
        }
        checks.push_back({"kld-divergence", ok, why});
    }

    return checks;
}

}  // namespace fedsim
