#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "resure/data.hpp"
#include "resure/rng.hpp"

namespace resure {

enum class ModelKind { Linear, Mlp };

// Scalar-output model over fixed-dimension features: either a linear map
// or a one-hidden-layer tanh MLP. Parameters live in one flat vector so
// the optimizer and finite-difference checks can treat them uniformly.
//
// Classification reads the output as a logit (sigmoid -> P(class 1),
// cross-entropy loss); regression reads it as the prediction
// (0.5*(yhat-y)^2 loss).
class Model {
public:
    static Model init(ModelKind kind, TaskKind objective, int feature_dim, int hidden_width,
                      Rng& rng);

    double score(std::span<const double> x) const;

    // Finite, nonnegative per-sample loss. Throws ShapeError on a feature
    // dimension mismatch.
    double per_sample_loss(const Sample& sample) const;

    // Adds weight * dLoss/dTheta for one sample into grad (same layout as
    // params()). The weight is an externally supplied constant.
    void accumulate_gradient(const Sample& sample, double weight,
                             std::vector<double>& grad) const;

    // Mean loss and accuracy (class match, or |yhat-y| <= tolerance for
    // regression). Throws EmptyInputError on empty data.
    std::pair<double, double> evaluate(std::span<const Sample> data, double tolerance) const;

    std::vector<double>& params() { return params_; }
    const std::vector<double>& params() const { return params_; }
    ModelKind kind() const { return kind_; }
    TaskKind objective() const { return objective_; }
    int feature_dim() const { return feature_dim_; }
    int hidden_width() const { return hidden_width_; }

private:
    Model() = default;
    void check_dim(const Sample& sample) const;
    // Output and, when hidden != nullptr, the hidden activations.
    double forward(std::span<const double> x, std::vector<double>* hidden) const;
    double loss_from_score(double s, double label) const;
    double dloss_dscore(double s, double label) const;

    ModelKind kind_ = ModelKind::Linear;
    TaskKind objective_ = TaskKind::Classification;
    int feature_dim_ = 0;
    int hidden_width_ = 0;
    std::vector<double> params_;
};

// Weighted-mean-loss gradient over a batch: (1/S) * sum_s w_s * dl_s/dTheta.
// Throws ShapeError when lengths differ, EmptyInputError on an empty batch.
std::vector<double> batch_gradient(const Model& model, std::span<const Sample> batch,
                                   std::span<const double> weights);

// Adam with bias correction. Step order: t += 1, moment updates, then the
// parameter update with the supplied learning rate.
class AdamOptimizer {
public:
    AdamOptimizer(std::size_t param_count, double beta1, double beta2, double epsilon = 1e-8);
    void step(std::vector<double>& params, std::span<const double> grad, double lr);

private:
    double beta1_;
    double beta2_;
    double epsilon_;
    std::int64_t t_ = 0;
    std::vector<double> m_;
    std::vector<double> v_;
};

// Cosine-decay learning rate with a linear warm-up over
// round(warmup_ratio * total_steps) steps.
double cosine_lr(double base_lr, std::int64_t step, std::int64_t total_steps,
                 double warmup_ratio);

}  // namespace resure
