#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fedsim/distribution.hpp"
#include "fedsim/rng.hpp"

namespace fedsim {

/// Dense row-major feature matrix with integer class labels.
struct LabeledDataset {
    std::size_t num_features = 0;
    std::size_t num_classes = 0;
    std::vector<double> features;  // num_samples() x num_features
    std::vector<int> labels;

    std::size_t num_samples() const { return labels.size(); }

    std::span<const double> row(std::size_t i) const {
        return {features.data() + i * num_features, num_features};
    }

    void push_row(std::span<const double> x, int label) {
        features.insert(features.end(), x.begin(), x.end());
        labels.push_back(label);
    }

    void validate() const {
        if (features.size() != labels.size() * num_features)
            throw std::invalid_argument("dataset: feature/label size mismatch");
        for (int y : labels)
            if (y < 0 || static_cast<std::size_t>(y) >= num_classes)
                throw std::invalid_argument("dataset: label out of range");
    }
};

inline ClassDistribution class_distribution(const LabeledDataset& data) {
    ClassDistribution d(data.num_classes);
    for (int y : data.labels) d.counts[y] += 1;
    return d;
}

inline LabeledDataset subset(const LabeledDataset& data, const std::vector<std::size_t>& rows) {
    LabeledDataset out;
    out.num_features = data.num_features;
    out.num_classes = data.num_classes;
    out.features.reserve(rows.size() * data.num_features);
    out.labels.reserve(rows.size());
    for (std::size_t r : rows) out.push_row(data.row(r), data.labels[r]);
    return out;
}

/// Isotropic Gaussian clusters, one per class, with means
/// 3 * e_{c mod d} * (1 + floor(c / d)). Exactly per_class samples per
/// class, laid out class-major; bit-deterministic for a given seed.
inline LabeledDataset generate_synthetic(int num_classes, int num_features, int per_class,
                                         double spread, std::uint64_t seed) {
    if (num_classes < 2) throw std::invalid_argument("generate_synthetic: need >= 2 classes");
    if (num_features < 1) throw std::invalid_argument("generate_synthetic: need >= 1 feature");
    if (per_class < 1) throw std::invalid_argument("generate_synthetic: need >= 1 sample per class");
    if (!(spread > 0.0)) throw std::invalid_argument("generate_synthetic: spread must be > 0");

    LabeledDataset out;
    out.num_features = static_cast<std::size_t>(num_features);
    out.num_classes = static_cast<std::size_t>(num_classes);
    out.features.reserve(static_cast<std::size_t>(num_classes) * per_class * num_features);
    out.labels.reserve(static_cast<std::size_t>(num_classes) * per_class);

    Rng rng(derive_seed(seed, fnv1a64("synthetic")));
    std::vector<double> x(static_cast<std::size_t>(num_features));
    for (int c = 0; c < num_classes; ++c) {
        const int axis = c % num_features;
        const double magnitude = 3.0 * (1.0 + static_cast<double>(c / num_features));
        for (int s = 0; s < per_class; ++s) {
            for (int j = 0; j < num_features; ++j)
                x[static_cast<std::size_t>(j)] = spread * rng.gaussian();
            x[static_cast<std::size_t>(axis)] += magnitude;
            out.push_row(x, c);
        }
    }
    return out;
}

/// Stratified split: per-class test share preserved to +-1 sample, at least
/// one sample of every class on each side. Deterministic by seed.
inline std::pair<LabeledDataset, LabeledDataset> train_test_split(const LabeledDataset& data,
                                                                  double test_fraction,
                                                                  std::uint64_t seed) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0))
        throw std::invalid_argument("train_test_split: fraction must lie in (0,1)");

    std::vector<std::vector<std::size_t>> by_class(data.num_classes);
    for (std::size_t i = 0; i < data.num_samples(); ++i)
        by_class[static_cast<std::size_t>(data.labels[i])].push_back(i);

    Rng rng(derive_seed(seed, fnv1a64("split")));
    std::vector<std::size_t> train_rows, test_rows;
    for (std::size_t c = 0; c < by_class.size(); ++c) {
        auto& rows = by_class[c];
        if (rows.empty()) continue;
        if (rows.size() < 2)
            throw std::invalid_argument("train_test_split: class " + std::to_string(c) +
                                        " has fewer than 2 samples");
        rng.shuffle(rows);
        std::size_t n_test = static_cast<std::size_t>(
            std::llround(test_fraction * static_cast<double>(rows.size())));
        n_test = std::clamp<std::size_t>(n_test, 1, rows.size() - 1);
        for (std::size_t i = 0; i < rows.size(); ++i)
            (i < n_test ? test_rows : train_rows).push_back(rows[i]);
    }
    std::sort(train_rows.begin(), train_rows.end());
    std::sort(test_rows.begin(), test_rows.end());
    return {subset(data, train_rows), subset(data, test_rows)};
}

}  // namespace fedsim
