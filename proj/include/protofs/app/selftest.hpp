#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace protofs::app {

struct GradientEntry {
    std::string name;
    double max_relative_error = 0.0;
};

struct OracleEntry {
    std::string name;
    bool passed = false;
    std::string detail;
};

struct SelfTestReport {
    std::vector<GradientEntry> gradients;
    std::vector<OracleEntry> oracles;
    double max_gradient_error = 0.0;
    double tolerance = 1e-4;
    std::size_t seeds = 0;
    double seconds = 0.0;

    bool passed() const;
};

/// Central-difference checks of every differentiable op and of ConvNet4 on
/// 8x8 inputs over `seeds` seeds, plus fast closed-form oracle checks.
SelfTestReport run_self_test(std::size_t seeds = 10, double tolerance = 1e-4);

} // namespace protofs::app
