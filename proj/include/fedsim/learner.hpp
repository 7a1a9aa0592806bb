#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "fedsim/dataset.hpp"
#include "fedsim/rng.hpp"

namespace fedsim {

/// Flat parameter vector of a C x (d+1) weight matrix (bias in the last
/// column of every class row).
struct ModelParams {
    std::size_t classes = 0;
    std::size_t features = 0;
    std::vector<double> values;

    ModelParams() = default;
    ModelParams(std::size_t c, std::size_t d) : classes(c), features(d), values(c * (d + 1), 0.0) {}

    std::size_t size() const { return values.size(); }
    std::span<const double> row(std::size_t c) const {
        return {values.data() + c * (features + 1), features + 1};
    }
    bool same_shape(const ModelParams& o) const {
        return classes == o.classes && features == o.features;
    }
    bool operator==(const ModelParams&) const = default;
};

struct LearnerConfig {
    double learning_rate = 0.01;
    int batch_size = 16;
    int local_epochs = 1;  // both aggregation modes run one epoch
    int lr_step = 50;      // rounds between learning-rate decays
    double lr_gamma = 1.0;
    double prox_mu = 0.0;
    double init_scale = 0.0;

    void validate() const {
        if (!(learning_rate >= 0.0)) throw std::invalid_argument("learner: learning_rate < 0");
        if (batch_size < 1) throw std::invalid_argument("learner: batch_size < 1");
        if (local_epochs != 1) throw std::invalid_argument("learner: local_epochs is fixed at 1");
        if (lr_step < 1) throw std::invalid_argument("learner: lr_step < 1");
        if (!(lr_gamma > 0.0 && lr_gamma <= 1.0))
            throw std::invalid_argument("learner: lr_gamma must lie in (0,1]");
        if (!(prox_mu >= 0.0)) throw std::invalid_argument("learner: prox_mu < 0");
        if (!(init_scale >= 0.0)) throw std::invalid_argument("learner: init_scale < 0");
    }
};

/// Evaluation summary; per-class recall is NaN for classes absent from the
/// evaluation set.
struct EvalReport {
    double loss = 0.0;
    double accuracy = 0.0;
    std::vector<double> per_class_recall;
};

inline ModelParams init_params(int num_classes, int num_features, std::uint64_t seed,
                               double init_scale = 0.0) {
    if (num_classes < 2) throw std::invalid_argument("init_params: need >= 2 classes");
    if (num_features < 1) throw std::invalid_argument("init_params: need >= 1 feature");
    ModelParams p(static_cast<std::size_t>(num_classes), static_cast<std::size_t>(num_features));
    if (init_scale > 0.0) {
        Rng rng(derive_seed(seed, fnv1a64("init")));
        for (auto& v : p.values) v = rng.uniform(-init_scale, init_scale);
    }
    return p;
}

namespace detail {

// Writes the logits W [x;1] for one sample into `logits`.
inline void logits_of(const ModelParams& params, std::span<const double> x,
                      std::span<double> logits) {
    const std::size_t d = params.features;
    for (std::size_t c = 0; c < params.classes; ++c) {
        const double* w = params.values.data() + c * (d + 1);
        double z = w[d];  // bias
        for (std::size_t j = 0; j < d; ++j) z += w[j] * x[j];
        logits[c] = z;
    }
}

// Stabilized softmax in place; returns log(sum exp(z - max)) + max.
inline double softmax_inplace(std::span<double> z) {
    double zmax = -std::numeric_limits<double>::infinity();
    for (double v : z) zmax = std::max(zmax, v);
    double sum = 0.0;
    for (double& v : z) {
        v = std::exp(v - zmax);
        sum += v;
    }
    for (double& v : z) v /= sum;
    return std::log(sum) + zmax;
}

}  // namespace detail

/// Class probabilities softmax(W [x;1]) for a single input.
inline std::vector<double> predict_proba(const ModelParams& params, std::span<const double> x) {
    if (x.size() != params.features)
        throw std::invalid_argument("predict_proba: feature dimension mismatch");
    for (double v : x)
        if (!std::isfinite(v)) throw std::invalid_argument("predict_proba: non-finite input");
    std::vector<double> z(params.classes);
    detail::logits_of(params, x, z);
    detail::softmax_inplace(z);
    return z;
}

/// Mean cross-entropy over `batch` plus the optional proximal penalty
/// (mu/2)||params - prox_center||^2, together with its exact gradient.
inline std::pair<double, std::vector<double>> loss_and_gradient(
    const ModelParams& params, const LabeledDataset& batch,
    const ModelParams* prox_center = nullptr, double mu = 0.0) {
    if (batch.num_samples() == 0) throw std::invalid_argument("loss_and_gradient: empty batch");
    if (batch.num_features != params.features)
        throw std::invalid_argument("loss_and_gradient: feature dimension mismatch");
    if (batch.num_classes > params.classes)
        throw std::invalid_argument("loss_and_gradient: label range exceeds model classes");
    if (mu > 0.0 && prox_center == nullptr)
        throw std::invalid_argument("loss_and_gradient: prox_mu > 0 requires a prox center");
    if (prox_center && !params.same_shape(*prox_center))
        throw std::invalid_argument("loss_and_gradient: prox center shape mismatch");

    const std::size_t d = params.features;
    const std::size_t n = batch.num_samples();
    const double inv_n = 1.0 / static_cast<double>(n);
    std::vector<double> grad(params.size(), 0.0);
    std::vector<double> p(params.classes);
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto x = batch.row(i);
        const int y = batch.labels[i];
        detail::logits_of(params, x, p);
        const double zy = p[static_cast<std::size_t>(y)];
        const double lse = detail::softmax_inplace(p);  // p now holds probabilities
        loss += lse - zy;                               // cross-entropy, no log(0) risk
        for (std::size_t c = 0; c < params.classes; ++c) {
            const double coeff = (p[c] - (static_cast<int>(c) == y ? 1.0 : 0.0)) * inv_n;
            double* g = grad.data() + c * (d + 1);
            for (std::size_t j = 0; j < d; ++j) g[j] += coeff * x[j];
            g[d] += coeff;
        }
    }
    loss *= inv_n;
    if (prox_center && mu > 0.0) {
        double sq = 0.0;
        for (std::size_t i = 0; i < params.size(); ++i) {
            const double diff = params.values[i] - prox_center->values[i];
            sq += diff * diff;
            grad[i] += mu * diff;
        }
        loss += 0.5 * mu * sq;
    }
    return {loss, std::move(grad)};
}

/// Effective rate for global round t under the step decay schedule.
inline double scheduled_rate(const LearnerConfig& cfg, int round) {
    return cfg.learning_rate * std::pow(cfg.lr_gamma, round / cfg.lr_step);
}

/// One epoch of mini-batch SGD from `params` on `data`. The shuffle stream
/// is derived from (seed, t); callers fold the client id into `seed` so that
/// concurrent clients train on independent streams. With prox_mu > 0 every
/// step is pulled toward the input params (the round's global model).
inline ModelParams local_train(const ModelParams& params, const LabeledDataset& data,
                               const LearnerConfig& cfg, int round, std::uint64_t seed) {
    if (data.num_samples() == 0) throw std::invalid_argument("local_train: empty dataset");
    cfg.validate();
    const double rate = scheduled_rate(cfg, round);

    std::vector<std::size_t> order(data.num_samples());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(seed, fnv1a64("epoch"), static_cast<std::uint64_t>(round)));
    rng.shuffle(order);

    ModelParams current = params;
    const auto batch_size = static_cast<std::size_t>(cfg.batch_size);
    std::vector<std::size_t> batch_rows;
    for (std::size_t begin = 0; begin < order.size(); begin += batch_size) {
        const std::size_t end = std::min(begin + batch_size, order.size());
        batch_rows.assign(order.begin() + static_cast<std::ptrdiff_t>(begin),
                          order.begin() + static_cast<std::ptrdiff_t>(end));
        const LabeledDataset batch = subset(data, batch_rows);
        auto [loss, grad] =
            loss_and_gradient(current, batch, cfg.prox_mu > 0.0 ? &params : nullptr, cfg.prox_mu);
        (void)loss;
        for (std::size_t i = 0; i < current.size(); ++i) current.values[i] -= rate * grad[i];
    }
    for (double v : current.values)
        if (!std::isfinite(v)) throw std::runtime_error("local_train: parameters diverged");
    return current;
}

/// Argmax evaluation (ties go to the lowest class index) with mean
/// cross-entropy, accuracy and per-class recall.
inline EvalReport evaluate(const ModelParams& params, const LabeledDataset& data) {
    if (data.num_samples() == 0) throw std::invalid_argument("evaluate: empty dataset");
    if (data.num_features != params.features)
        throw std::invalid_argument("evaluate: feature dimension mismatch");

    std::vector<std::int64_t> per_class(params.classes, 0);
    std::vector<std::int64_t> true_positive(params.classes, 0);
    std::vector<double> z(params.classes);
    double loss = 0.0;
    std::int64_t correct = 0;
    for (std::size_t i = 0; i < data.num_samples(); ++i) {
        const int y = data.labels[i];
        detail::logits_of(params, data.row(i), z);
        std::size_t argmax = 0;
        for (std::size_t c = 1; c < z.size(); ++c)
            if (z[c] > z[argmax]) argmax = c;
        const double zy = z[static_cast<std::size_t>(y)];
        const double lse = detail::softmax_inplace(z);
        loss += lse - zy;
        per_class[static_cast<std::size_t>(y)] += 1;
        if (argmax == static_cast<std::size_t>(y)) {
            ++correct;
            true_positive[argmax] += 1;
        }
    }
    EvalReport report;
    report.loss = loss / static_cast<double>(data.num_samples());
    report.accuracy = static_cast<double>(correct) / static_cast<double>(data.num_samples());
    report.per_class_recall.resize(params.classes);
    for (std::size_t c = 0; c < params.classes; ++c)
        report.per_class_recall[c] =
            per_class[c] > 0
                ? static_cast<double>(true_positive[c]) / static_cast<double>(per_class[c])
                : std::numeric_limits<double>::quiet_NaN();
    return report;
}

/// Euclidean distance between two parameter vectors (diagnostic).
inline double weight_divergence(const ModelParams& a, const ModelParams& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("weight_divergence: shape mismatch");
    double sq = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double diff = a.values[i] - b.values[i];
        sq += diff * diff;
    }
    return std::sqrt(sq);
}

}  // namespace fedsim
