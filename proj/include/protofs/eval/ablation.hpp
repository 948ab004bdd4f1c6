#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "protofs/eval/meta_test.hpp"
#include "protofs/train/curriculum.hpp"

namespace protofs::eval {

/// One configuration: initial weights plus a curriculum (empty: evaluate the
/// initial weights as they are).
struct AblationRow {
    std::string name;
    net::Checkpoint initial;
    std::vector<train::CurriculumStage> stages;
    train::OptimizerConfig optimizer;
    std::uint64_t seed = 0;
};

struct EvalDataset {
    std::string name;
    const episodes::DatasetIndex* index = nullptr;
};

struct AblationConfig {
    std::vector<AblationRow> rows;
    std::vector<EvalDataset> eval_sets;
    std::vector<episodes::TaskSetting> settings;
    std::size_t n_tasks = 200;
    std::uint64_t eval_seed = 0;
    std::size_t threads = 1;
};

struct AblationCell {
    std::optional<EvalReport> report;
    std::string error;
};

/// Rows are configurations; columns are (eval dataset, setting) pairs with
/// the setting varying fastest.
struct AblationTable {
    std::vector<std::string> rows;
    std::vector<std::string> datasets;
    std::vector<episodes::TaskSetting> settings;
    std::vector<std::string> row_errors;  // empty when the row trained
    std::vector<AblationCell> cells;

    std::size_t columns() const { return datasets.size() * settings.size(); }
    const AblationCell& at(std::size_t row, std::size_t dataset, std::size_t setting) const {
        return cells[row * columns() + dataset * settings.size() + setting];
    }
};

/// Trains each row and meta-tests it on every (dataset, setting) cell. A row
/// or cell that fails is recorded and the rest continue.
AblationTable ablation_run(const AblationConfig& config);

} // namespace protofs::eval
