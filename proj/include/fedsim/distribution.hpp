#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace fedsim {

/// Per-class sample counts for one data holder.
struct ClassDistribution {
    std::vector<std::int64_t> counts;

    ClassDistribution() = default;
    explicit ClassDistribution(std::size_t num_classes) : counts(num_classes, 0) {}
    explicit ClassDistribution(std::vector<std::int64_t> c) : counts(std::move(c)) {
        for (auto v : counts)
            if (v < 0) throw std::invalid_argument("class distribution: negative count");
    }

    std::size_t classes() const { return counts.size(); }

    std::int64_t total() const {
        std::int64_t s = 0;
        for (auto v : counts) s += v;
        return s;
    }

    bool operator==(const ClassDistribution&) const = default;
};

/// One client as seen by the federator: id, reported class counts, data
/// quantity and the Maverick flag.
struct ClientProfile {
    int id = 0;
    ClassDistribution distribution;
    std::int64_t data_size = 0;
    bool is_maverick = false;
};

inline ClientProfile make_profile(int id, ClassDistribution dist, bool is_maverick = false) {
    ClientProfile p;
    p.id = id;
    p.data_size = dist.total();
    p.distribution = std::move(dist);
    p.is_maverick = is_maverick;
    return p;
}

/// Counts to probabilities. A zero-total distribution maps to the uniform
/// vector so that distances against an empty accumulator stay finite.
inline std::vector<double> prob(const ClassDistribution& d) {
    const std::size_t c = d.classes();
    if (c == 0) throw std::invalid_argument("prob: empty distribution (no classes)");
    std::vector<double> p(c);
    const std::int64_t n = d.total();
    if (n == 0) {
        const double u = 1.0 / static_cast<double>(c);
        for (auto& v : p) v = u;
        return p;
    }
    for (std::size_t i = 0; i < c; ++i)
        p[i] = static_cast<double>(d.counts[i]) / static_cast<double>(n);
    return p;
}

/// Categorical EMD between two count distributions, realized as the L1
/// distance of their probability vectors. Range [0, 2]; 2 iff the supports
/// are disjoint.
inline double emd(const ClassDistribution& a, const ClassDistribution& b) {
    if (a.classes() != b.classes())
        throw std::invalid_argument("emd: dimension mismatch (" + std::to_string(a.classes()) +
                                    " vs " + std::to_string(b.classes()) + ")");
    const std::vector<double> pa = prob(a);
    const std::vector<double> pb = prob(b);
    double d = 0.0;
    for (std::size_t i = 0; i < pa.size(); ++i) d += std::abs(pa[i] - pb[i]);
    return d;
}

/// Kullback-Leibler divergence sum p ln(p/q), with 0 ln(0/q) = 0 and
/// +infinity when absolute continuity fails (p > 0 where q = 0).
inline double kld(const std::vector<double>& p, const std::vector<double>& q) {
    if (p.size() != q.size()) throw std::invalid_argument("kld: dimension mismatch");
    double sp = 0.0, sq = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] < 0.0 || p[i] > 1.0 || q[i] < 0.0 || q[i] > 1.0)
            throw std::invalid_argument("kld: entries must lie in [0,1]");
        sp += p[i];
        sq += q[i];
    }
    if (std::abs(sp - 1.0) > 1e-9 || std::abs(sq - 1.0) > 1e-9)
        throw std::invalid_argument("kld: inputs must sum to 1");
    double d = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] == 0.0) continue;
        if (q[i] == 0.0) return std::numeric_limits<double>::infinity();
        d += p[i] * std::log(p[i] / q[i]);
    }
    return d;
}

/// Elementwise sum of all clients' counts (the population distribution).
inline ClassDistribution aggregate_global(const std::vector<ClientProfile>& profiles) {
    if (profiles.empty()) throw std::invalid_argument("aggregate_global: empty population");
    ClassDistribution out(profiles.front().distribution.classes());
    for (const auto& p : profiles) {
        if (p.distribution.classes() != out.classes())
            throw std::invalid_argument("aggregate_global: inconsistent class counts");
        for (std::size_t c = 0; c < out.classes(); ++c)
            out.counts[c] += p.distribution.counts[c];
    }
    return out;
}

/// dc plus the counts of the given selection; dc itself is not touched.
inline ClassDistribution accumulate_current(const ClassDistribution& dc,
                                            const std::vector<ClientProfile>& selected) {
    ClassDistribution out = dc;
    for (const auto& p : selected) {
        if (p.distribution.classes() != out.classes())
            throw std::invalid_argument("accumulate_current: inconsistent class counts");
        for (std::size_t c = 0; c < out.classes(); ++c)
            out.counts[c] += p.distribution.counts[c];
    }
    return out;
}

/// Per-client EMD to `reference`, scaled by the client's data quantity
/// relative to the mean per-client population of `ref_class`:
///   out[i] = emd(D_i, reference) * n_i / sigma,  sigma = sum_i D_i[ref_class] / N.
/// Clients that are both skewed and large (Mavericks) score highest. The
/// construction is invariant under uniform integer scaling of all counts.
inline std::vector<double> size_scaled_emd(const std::vector<ClientProfile>& profiles,
                                           const ClassDistribution& reference,
                                           std::size_t ref_class) {
    if (profiles.empty()) throw std::invalid_argument("size_scaled_emd: empty population");
    if (ref_class >= reference.classes())
        throw std::invalid_argument("size_scaled_emd: ref_class out of range");
    std::int64_t ref_total = 0;
    for (const auto& p : profiles) {
        if (p.distribution.classes() != reference.classes())
            throw std::invalid_argument("size_scaled_emd: dimension mismatch");
        ref_total += p.distribution.counts[ref_class];
    }
    if (ref_total == 0)
        throw std::invalid_argument(
            "size_scaled_emd: reference class " + std::to_string(ref_class) +
            " has no samples in the population (choose a populated class)");
    const double sigma = static_cast<double>(ref_total) / static_cast<double>(profiles.size());
    std::vector<double> out(profiles.size());
    for (std::size_t i = 0; i < profiles.size(); ++i) {
        const double scale = static_cast<double>(profiles[i].data_size) / sigma;
        out[i] = emd(profiles[i].distribution, reference) * scale;
    }
    return out;
}

}  // namespace fedsim
