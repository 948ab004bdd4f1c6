#include "protofs/train/optimizer.hpp"

#include <cmath>

#include "protofs/core/errors.hpp"

namespace protofs::train {

std::string to_string(OptimizerKind kind) { return kind == OptimizerKind::SGD ? "sgd" : "adam"; }

OptimizerKind parse_optimizer_kind(std::string_view name) {
    if (name == "sgd" || name == "SGD") return OptimizerKind::SGD;
    if (name == "adam" || name == "Adam") return OptimizerKind::Adam;
    throw ConfigError("unknown optimizer '" + std::string(name) + "' (expected sgd or adam)");
}

OptimizerConfig OptimizerConfig::default_sgd() { return OptimizerConfig{}; }

OptimizerConfig OptimizerConfig::default_adam() {
    OptimizerConfig c;
    c.kind = OptimizerKind::Adam;
    c.lr = 1e-3;
    c.weight_decay = 0.0;
    return c;
}

void OptimizerConfig::validate() const {
    if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("optimizer lr must be positive");
    if (step_size_epochs == 0) throw ConfigError("optimizer step_size_epochs must be at least 1");
    if (!(lr_decay > 0.0 && lr_decay <= 1.0)) throw ConfigError("optimizer lr_decay must be in (0, 1]");
    if (!(weight_decay >= 0.0)) throw ConfigError("optimizer weight_decay must be non-negative");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("optimizer momentum must be in [0, 1)");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
        throw ConfigError("optimizer betas must be in [0, 1)");
    }
    if (!(eps > 0.0)) throw ConfigError("optimizer eps must be positive");
}

double lr_at_epoch(const OptimizerConfig& config, std::size_t epoch) {
    return config.lr * std::pow(config.lr_decay, static_cast<double>(epoch / config.step_size_epochs));
}

void OptimizerState::reset() {
    first.clear();
    second.clear();
    steps = 0;
}

void optimizer_step(std::span<net::Parameter> params, OptimizerState& state, double lr) {
    const auto& c = state.config;
    if (state.first.empty()) {
        for (const auto& p : params) {
            state.first.emplace_back(p.value.size(), 0.0);
            if (c.kind == OptimizerKind::Adam) state.second.emplace_back(p.value.size(), 0.0);
        }
    }
    if (state.first.size() != params.size()) {
        throw DimensionError("optimizer_step: state holds " + std::to_string(state.first.size()) + " buffers for " +
                             std::to_string(params.size()) + " parameters");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto& p = params[i];
        if (state.first[i].size() != p.value.size()) {
            throw DimensionError("optimizer_step: buffer for " + p.name + " does not match shape " +
                                 shape_string(p.value.shape()));
        }
        if (!p.value.has_grad()) continue;
        for (double g : p.value.grad()) {
            if (!std::isfinite(g)) throw NumericError("optimizer_step: non-finite gradient in " + p.name);
        }
    }
    ++state.steps;
    const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.steps));
    const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.steps));
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto theta = params[i].value.data();
        const bool has = params[i].value.has_grad();
        const auto grad = has ? params[i].value.grad() : std::span<const double>{};
        auto& m = state.first[i];
        for (std::size_t j = 0; j < theta.size(); ++j) {
            const double g = (has ? grad[j] : 0.0) + c.weight_decay * theta[j];
            if (c.kind == OptimizerKind::SGD) {
                m[j] = c.momentum * m[j] + g;
                theta[j] -= lr * m[j];
            } else {
                auto& v = state.second[i];
                m[j] = c.beta1 * m[j] + (1.0 - c.beta1) * g;
                v[j] = c.beta2 * v[j] + (1.0 - c.beta2) * g * g;
                theta[j] -= lr * (m[j] / bc1) / (std::sqrt(v[j] / bc2) + c.eps);
            }
        }
    }
}

} // namespace protofs::train
