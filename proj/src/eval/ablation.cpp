#include "protofs/eval/ablation.hpp"

#include "protofs/core/errors.hpp"
#include "protofs/core/log.hpp"

namespace protofs::eval {

AblationTable ablation_run(const AblationConfig& config) {
    AblationTable table;
    for (const auto& r : config.rows) table.rows.push_back(r.name);
    for (const auto& d : config.eval_sets) table.datasets.push_back(d.name);
    table.settings = config.settings;
    table.cells.resize(table.rows.size() * table.columns());
    table.row_errors.resize(table.rows.size());

    for (std::size_t r = 0; r < config.rows.size(); ++r) {
        const auto& row = config.rows[r];
        net::Checkpoint model;
        try {
            if (row.stages.empty()) {
                model = train::clone_checkpoint(row.initial);
            } else {
                train::TrainOptions opts;
                opts.threads = config.threads;
                model = train::run_curriculum(row.initial, row.stages, row.optimizer, row.seed, opts).final;
            }
        } catch (const Error& e) {
            table.row_errors[r] = e.what();
            log_warning("ablation row " + row.name + " failed: " + e.what());
            for (std::size_t c = 0; c < table.columns(); ++c) table.cells[r * table.columns() + c].error = e.what();
            continue;
        }
        for (std::size_t d = 0; d < config.eval_sets.size(); ++d)
            for (std::size_t s = 0; s < config.settings.size(); ++s) {
                auto& cell = table.cells[r * table.columns() + d * config.settings.size() + s];
                try {
                    cell.report = meta_test(model, *config.eval_sets[d].index, config.settings[s], config.n_tasks,
                                            config.eval_seed, config.threads);
                } catch (const Error& e) {
                    cell.error = e.what();
                }
            }
    }
    return table;
}

} // namespace protofs::eval
