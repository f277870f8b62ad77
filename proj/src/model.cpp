#include "resure/model.hpp"

#include <cmath>

#include "resure/errors.hpp"
#include "resure/util.hpp"

namespace resure {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Symmetric uniform fan-in init, scaled down so the first optimizer steps
// dominate the random start at desk-scale step counts.
constexpr double kInitScale = 0.1;

double sigmoid(double s) {
    if (s >= 0.0) {
        return 1.0 / (1.0 + std::exp(-s));
    }
    const double e = std::exp(s);
    return e / (1.0 + e);
}

// log(1 + e^s) - y*s, computed without overflow.
double bce_with_logit(double s, double y) {
    const double softplus = std::max(s, 0.0) + std::log1p(std::exp(-std::abs(s)));
    return softplus - y * s;
}

}  // namespace

Model Model::init(ModelKind kind, TaskKind objective, int feature_dim, int hidden_width,
                  Rng& rng) {
    if (feature_dim < 1) throw ConfigError("model: feature_dim must be >= 1");
    if (kind == ModelKind::Mlp && hidden_width < 1) {
        throw ConfigError("model: hidden_width must be >= 1");
    }
    Model m;
    m.kind_ = kind;
    m.objective_ = objective;
    m.feature_dim_ = feature_dim;
    m.hidden_width_ = kind == ModelKind::Mlp ? hidden_width : 0;

    const auto d = static_cast<std::size_t>(feature_dim);
    if (kind == ModelKind::Linear) {
        // layout: w[d], b
        m.params_.assign(d + 1, 0.0);
        const double bound = kInitScale / std::sqrt(static_cast<double>(d));
        for (std::size_t i = 0; i < d; ++i) m.params_[i] = rng.uniform(-bound, bound);
    } else {
        // layout: W1[h*d], b1[h], w2[h], b2
        const auto h = static_cast<std::size_t>(hidden_width);
        m.params_.assign(h * d + h + h + 1, 0.0);
        const double bound1 = kInitScale / std::sqrt(static_cast<double>(d));
        for (std::size_t i = 0; i < h * d; ++i) m.params_[i] = rng.uniform(-bound1, bound1);
        const double bound2 = kInitScale / std::sqrt(static_cast<double>(h));
        for (std::size_t i = 0; i < h; ++i) {
            m.params_[h * d + h + i] = rng.uniform(-bound2, bound2);
        }
    }
    return m;
}

void Model::check_dim(const Sample& sample) const {
    if (sample.features.size() != static_cast<std::size_t>(feature_dim_)) {
        throw ShapeError("sample " + std::to_string(sample.id) + ": feature dim " +
                         std::to_string(sample.features.size()) + " != model dim " +
                         std::to_string(feature_dim_));
    }
}

double Model::forward(std::span<const double> x, std::vector<double>* hidden) const {
    const auto d = static_cast<std::size_t>(feature_dim_);
    if (kind_ == ModelKind::Linear) {
        double s = params_[d];  // bias
        for (std::size_t i = 0; i < d; ++i) s += params_[i] * x[i];
        return s;
    }
    const auto h = static_cast<std::size_t>(hidden_width_);
    const double* w1 = params_.data();
    const double* b1 = params_.data() + h * d;
    const double* w2 = params_.data() + h * d + h;
    const double b2 = params_[h * d + h + h];

    double s = b2;
    if (hidden) hidden->resize(h);
    for (std::size_t j = 0; j < h; ++j) {
        double z = b1[j];
        const double* row = w1 + j * d;
        for (std::size_t i = 0; i < d; ++i) z += row[i] * x[i];
        const double a = std::tanh(z);
        if (hidden) (*hidden)[j] = a;
        s += w2[j] * a;
    }
    return s;
}

double Model::score(std::span<const double> x) const {
    if (x.size() != static_cast<std::size_t>(feature_dim_)) {
        throw ShapeError("score: feature dim " + std::to_string(x.size()) + " != model dim " +
                         std::to_string(feature_dim_));
    }
    return forward(x, nullptr);
}

double Model::loss_from_score(double s, double label) const {
    if (objective_ == TaskKind::Classification) {
        return bce_with_logit(s, label);
    }
    const double r = s - label;
    return 0.5 * r * r;
}

double Model::dloss_dscore(double s, double label) const {
    if (objective_ == TaskKind::Classification) {
        return sigmoid(s) - label;
    }
    return s - label;
}

double Model::per_sample_loss(const Sample& sample) const {
    check_dim(sample);
    return loss_from_score(forward(sample.features, nullptr), sample.label);
}

void Model::accumulate_gradient(const Sample& sample, double weight,
                                std::vector<double>& grad) const {
    check_dim(sample);
    if (grad.size() != params_.size()) {
        throw ShapeError("gradient buffer size mismatch");
    }
    const auto d = static_cast<std::size_t>(feature_dim_);
    const auto& x = sample.features;

    if (kind_ == ModelKind::Linear) {
        const double s = forward(x, nullptr);
        const double g = weight * dloss_dscore(s, sample.label);
        for (std::size_t i = 0; i < d; ++i) grad[i] += g * x[i];
        grad[d] += g;
        return;
    }

    std::vector<double> hidden;
    const double s = forward(x, &hidden);
    const double g = weight * dloss_dscore(s, sample.label);

    const auto h = static_cast<std::size_t>(hidden_width_);
    const double* w2 = params_.data() + h * d + h;
    double* g_w1 = grad.data();
    double* g_b1 = grad.data() + h * d;
    double* g_w2 = grad.data() + h * d + h;
    double& g_b2 = grad[h * d + h + h];

    g_b2 += g;
    for (std::size_t j = 0; j < h; ++j) {
        const double a = hidden[j];
        g_w2[j] += g * a;
        const double gz = g * w2[j] * (1.0 - a * a);  // d tanh = 1 - a^2
        g_b1[j] += gz;
        double* row = g_w1 + j * d;
        for (std::size_t i = 0; i < d; ++i) row[i] += gz * x[i];
    }
}

std::pair<double, double> Model::evaluate(std::span<const Sample> data,
                                          double tolerance) const {
    if (data.empty()) throw EmptyInputError("evaluate: empty data");
    double loss_sum = 0.0;
    std::int64_t hits = 0;
    for (const Sample& sample : data) {
        check_dim(sample);
        const double s = forward(sample.features, nullptr);
        loss_sum += loss_from_score(s, sample.label);
        if (objective_ == TaskKind::Classification) {
            const double predicted = s >= 0.0 ? 1.0 : 0.0;
            if (predicted == sample.label) ++hits;
        } else {
            if (std::abs(s - sample.label) <= tolerance) ++hits;
        }
    }
    const auto n = static_cast<double>(data.size());
    return {loss_sum / n, static_cast<double>(hits) / n};
}

std::vector<double> batch_gradient(const Model& model, std::span<const Sample> batch,
                                   std::span<const double> weights) {
    if (batch.empty()) throw EmptyInputError("batch_gradient: empty batch");
    if (batch.size() != weights.size()) {
        throw ShapeError("batch_gradient: " + std::to_string(batch.size()) + " samples vs " +
                         std::to_string(weights.size()) + " weights");
    }
    std::vector<double> grad(model.params().size(), 0.0);
    const double inv_n = 1.0 / static_cast<double>(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
        model.accumulate_gradient(batch[i], weights[i] * inv_n, grad);
    }
    return grad;
}

AdamOptimizer::AdamOptimizer(std::size_t param_count, double beta1, double beta2,
                             double epsilon)
    : beta1_(beta1), beta2_(beta2), epsilon_(epsilon), m_(param_count, 0.0),
      v_(param_count, 0.0) {}

void AdamOptimizer::step(std::vector<double>& params, std::span<const double> grad,
                         double lr) {
    if (params.size() != m_.size() || grad.size() != m_.size()) {
        throw ShapeError("adam: parameter/gradient size mismatch");
    }
    t_ += 1;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
        m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
        v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
        const double m_hat = m_[i] / bc1;
        const double v_hat = v_[i] / bc2;
        params[i] -= lr * m_hat / (std::sqrt(v_hat) + epsilon_);
    }
}

double cosine_lr(double base_lr, std::int64_t step, std::int64_t total_steps,
                 double warmup_ratio) {
    if (total_steps <= 0) throw ConfigError("cosine_lr: total_steps must be > 0");
    const auto warm = static_cast<std::int64_t>(
        std::llround(warmup_ratio * static_cast<double>(total_steps)));
    if (step < warm) {
        return base_lr * static_cast<double>(step + 1) / static_cast<double>(warm);
    }
    if (total_steps <= warm) return base_lr;
    const double progress = static_cast<double>(step - warm) /
                            static_cast<double>(total_steps - warm);
    return base_lr * 0.5 * (1.0 + std::cos(kPi * progress));
}

}  // namespace resure
