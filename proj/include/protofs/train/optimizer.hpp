#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "protofs/net/backbone.hpp"

namespace protofs::train {

enum class OptimizerKind { SGD, Adam };

std::string to_string(OptimizerKind kind);
OptimizerKind parse_optimizer_kind(std::string_view name);

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::SGD;
    double lr = 2e-4;
    std::size_t step_size_epochs = 20;
    double lr_decay = 0.5;
    double weight_decay = 5e-4;
    double momentum = 0.9;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    /// SGD, lr 2e-4, step 20, weight decay 5e-4.
    static OptimizerConfig default_sgd();
    /// Adam, lr 1e-3, step 20.
    static OptimizerConfig default_adam();
    void validate() const;
};

/// Step decay: lr * lr_decay^floor(epoch / step_size_epochs).
double lr_at_epoch(const OptimizerConfig& config, std::size_t epoch);

/// Moment buffers, created lazily to match the parameters on the first step.
struct OptimizerState {
    OptimizerConfig config;
    std::vector<std::vector<double>> first;
    std::vector<std::vector<double>> second;
    std::size_t steps = 0;

    explicit OptimizerState(OptimizerConfig c = {}) : config(c) {}
    void reset();
};

/// One update of every parameter from its accumulated gradient; a parameter
/// without a gradient is treated as having a zero gradient. Throws
/// NumericError naming the parameter on a non-finite gradient, before any
/// parameter is modified.
void optimizer_step(std::span<net::Parameter> params, OptimizerState& state, double lr);

} // namespace protofs::train
