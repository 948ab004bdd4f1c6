#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "protofs/episodes/sampler.hpp"
#include "protofs/eval/metrics.hpp"
#include "protofs/net/checkpoint.hpp"

namespace protofs::eval {

struct EvalReport {
    std::string dataset;
    episodes::TaskSetting setting;
    std::uint64_t seed = 0;
    std::size_t n_tasks = 0;
    double mean_accuracy = 0.0;
    double ci95 = 0.0;
    std::vector<double> task_accuracies;
    std::size_t correct = 0;
    std::size_t queries = 0;
    /// Labels of the index, indexing the rows and columns of `confusion`.
    std::vector<std::string> class_labels;
    CountMatrix confusion;
    Prf1Report metrics;
};

/// n_tasks eval-mode episodes over the classes of `view`, run on up to
/// `threads` workers. Throws DimensionError when the checkpoint's input
/// shape does not fit the dataset.
EvalReport meta_test(const net::Checkpoint& checkpoint, const episodes::ClassView& view,
                     episodes::TaskSetting setting, std::size_t n_tasks, std::uint64_t seed, std::size_t threads = 1);

EvalReport meta_test(const net::Checkpoint& checkpoint, const episodes::DatasetIndex& index,
                     episodes::TaskSetting setting, std::size_t n_tasks, std::uint64_t seed, std::size_t threads = 1);

} // namespace protofs::eval
