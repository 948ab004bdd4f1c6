#include "protofs/app/cli.hpp"

#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "protofs/app/config.hpp"
#include "protofs/app/selftest.hpp"
#include "protofs/core/errors.hpp"
#include "protofs/core/log.hpp"
#include "protofs/eval/ablation.hpp"
#include "protofs/eval/features.hpp"
#include "protofs/eval/report_io.hpp"

namespace protofs::app {

namespace fs = std::filesystem;

namespace {

struct Options {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> threads;
    std::optional<std::string> out;
    std::optional<std::size_t> way, shot, queries, tasks, epochs, dims, seeds;
    std::optional<std::string> dataset, checkpoint;
};

void add_common(CLI::App* cmd, Options& o) {
    cmd->add_option("--config", o.config, "Run configuration (JSON)");
    cmd->add_option("--seed", o.seed, "Master seed");
    cmd->add_option("--threads", o.threads, "Worker threads for validation, evaluation and export");
    cmd->add_option("--out", o.out, "Output directory");
}

void add_setting(CLI::App* cmd, Options& o) {
    cmd->add_option("--K", o.way, "Classes per episode (way)");
    cmd->add_option("--C", o.shot, "Support samples per class (shot)");
    cmd->add_option("--n", o.queries, "Query samples per class");
    cmd->add_option("--tasks", o.tasks, "Episodes (per epoch when training)");
}

std::string register_dataset_arg(json& cfg, const std::string& arg) {
    if (cfg["datasets"].contains(arg)) return arg;
    if (!fs::exists(arg)) throw ConfigError("dataset '" + arg + "' is neither configured nor an existing path");
    auto name = fs::path(arg).stem().string();
    if (name.empty()) name = "dataset";
    cfg["datasets"][name] = dataset_entry_for_path(arg);
    return name;
}

json resolved(const Options& o, const std::string& command) {
    json raw = json::object();
    fs::path base = fs::current_path();
    if (!o.config.empty()) {
        raw = read_config(o.config);
        base = fs::absolute(o.config).parent_path();
    }
    if (o.seed) raw["seed"] = *o.seed;
    if (o.threads) raw["threads"] = *o.threads;
    if (o.out) raw["out"] = fs::absolute(*o.out).lexically_normal().string();
    auto cfg = resolve_config(raw, base);
    if (command == "train") {
        for (auto& s : cfg["stages"]) {
            if (o.way) s["way"] = *o.way;
            if (o.shot) s["shot"] = *o.shot;
            if (o.queries) s["queries"] = *o.queries;
            if (o.tasks) s["tasks_per_epoch"] = *o.tasks;
            if (o.epochs) s["epochs"] = *o.epochs;
        }
    }
    if (command == "eval") {
        auto& e = cfg["eval"];
        if (o.way) e["way"] = *o.way;
        if (o.shot) e["shot"] = *o.shot;
        if (o.queries) e["queries"] = *o.queries;
        if (o.tasks) e["tasks"] = *o.tasks;
    }
    if (command == "ablate" && o.tasks) cfg["ablation"]["tasks"] = *o.tasks;
    if (command == "export" && o.dims) cfg["export"]["dims"] = *o.dims;
    for (const char* section : {"eval", "export"}) {
        if (command != section) continue;
        if (o.dataset) cfg[section]["dataset"] = register_dataset_arg(cfg, *o.dataset);
        if (o.checkpoint) cfg[section]["checkpoint"] = fs::absolute(*o.checkpoint).lexically_normal().string();
    }
    if (cfg["threads"].get<std::size_t>() == 0) throw ConfigError("--threads must be at least 1");
    return cfg;
}

fs::path prepare_out(const json& cfg) {
    const fs::path out = cfg["out"].get<std::string>();
    fs::create_directories(out);
    write_json(cfg, out / "resolved_config.json");
    return out;
}

json epoch_json(const train::EpochRecord& e) {
    return {{"stage", e.stage},
            {"epoch", e.epoch},
            {"lr", e.lr},
            {"train_episodes", e.train_episodes},
            {"train_loss", e.train_loss},
            {"train_accuracy", e.train_accuracy},
            {"val_episodes", e.val_episodes},
            {"val_accuracy", e.val_accuracy ? json(*e.val_accuracy) : json(nullptr)},
            {"val_ci95", e.val_ci95},
            {"best_epoch", e.best_epoch}};
}

std::string safe_name(std::string s) {
    for (auto& ch : s)
        if (!std::isalnum(static_cast<unsigned char>(ch)) && ch != '-' && ch != '_') ch = '_';
    return s;
}

// The checkpoint named in `section`, else the run's final checkpoint, else fresh weights.
net::Checkpoint checkpoint_for(const json& cfg, const json& section, const episodes::DatasetIndex& data) {
    if (!section["checkpoint"].is_null()) return net::load_checkpoint(section["checkpoint"].get<std::string>());
    const auto final_ckpt = fs::path(cfg["out"].get<std::string>()) / "final.ckpt";
    if (fs::exists(final_ckpt)) {
        log_info("using " + final_ckpt.string());
        return net::load_checkpoint(final_ckpt);
    }
    auto init = initial_checkpoint(cfg["backbone"], &data);
    if (cfg["backbone"]["checkpoint"].is_null()) log_warning("no checkpoint given; using untrained weights");
    return init;
}

int cmd_index(const Options& o) {
    auto cfg = resolved(o, "index");
    std::vector<std::string> names;
    if (o.dataset) names.push_back(register_dataset_arg(cfg, *o.dataset));
    else
        for (const auto& [name, _] : cfg["datasets"].items()) names.push_back(name);
    if (names.empty()) throw ConfigError("index: no datasets configured (use --dataset or a config)");
    const auto out = prepare_out(cfg);
    DatasetRegistry registry(cfg["datasets"]);
    for (const auto& name : names) {
        const auto& index = registry.get(name);
        auto source = cfg["datasets"][name];
        if (source["type"] == "synthetic") {
            eval::FeatureTable table;
            table.features.resize(index.features.rows(), index.features.cols());
            Eigen::Index row = 0;
            for (std::size_t c = 0; c < index.num_classes(); ++c)
                for (auto r : index.items[c]) {
                    table.features.row(row++) = index.features.row(r);
                    table.labels.push_back(index.classes[c]);
                    table.splits.push_back("all");
                }
            const auto csv = out / (safe_name(name) + ".csv");
            eval::write_feature_csv(table, csv);
            source = dataset_entry_for_path(csv);
        }
        const auto path = out / (safe_name(name) + ".index.json");
        write_index(index, source, path);
        log_info("indexed " + name + ": " + std::to_string(index.num_classes()) + " classes, " +
                 std::to_string(index.num_samples()) + " samples -> " + path.string());
    }
    return 0;
}

int cmd_train(const Options& o) {
    const auto cfg = resolved(o, "train");
    if (cfg["stages"].empty()) throw ConfigError("train: the config has no stages");
    const auto out = prepare_out(cfg);
    DatasetRegistry registry(cfg["datasets"]);
    const auto stages = stages_from_json(cfg["stages"], registry);
    const auto initial = initial_checkpoint(cfg["backbone"], stages.front().datasets.front().index);
    const auto optimizer = optimizer_from_json(cfg["optimizer"]);

    std::ofstream record(out / "train_record.jsonl", std::ios::binary | std::ios::trunc);
    std::size_t stage_no = 0;
    train::TrainOptions opts;
    opts.threads = cfg["threads"].get<std::size_t>();
    opts.on_epoch = [&](const train::EpochRecord& e) {
        record << epoch_json(e).dump() << '\n';
        record.flush();
        log_info(e.stage + " epoch " + std::to_string(e.epoch) + " loss " + std::to_string(e.train_loss) +
                 (e.val_accuracy ? " val " + std::to_string(*e.val_accuracy) : std::string()));
    };
    opts.on_stage = [&](const train::StageRecord& s, const net::Checkpoint& best) {
        ++stage_no;
        net::save_checkpoint(best.backbone, out / ("stage" + std::to_string(stage_no) + "-" + safe_name(s.name) + ".ckpt"),
                             best.normalization);
    };
    const auto result = train::run_curriculum(initial, stages, optimizer, cfg["seed"].get<std::uint64_t>(), opts);
    net::save_checkpoint(result.final.backbone, out / "final.ckpt", result.final.normalization);

    json summary{{"final_checkpoint", (out / "final.ckpt").string()},
                 {"provenance", result.final.backbone.provenance()},
                 {"stages", json::array()}};
    for (const auto& s : result.stages) {
        summary["stages"].push_back({{"name", s.name},
                                     {"epochs", s.epochs.size()},
                                     {"best_epoch", s.best_epoch},
                                     {"best_val_accuracy", s.best_val_accuracy ? json(*s.best_val_accuracy) : json(nullptr)}});
    }
    write_json(summary, out / "train_summary.json");
    return 0;
}

int cmd_eval(const Options& o) {
    const auto cfg = resolved(o, "eval");
    const auto& e = cfg["eval"];
    if (e["dataset"].is_null()) throw ConfigError("eval: no dataset (set eval.dataset or --dataset)");
    const auto out = prepare_out(cfg);
    DatasetRegistry registry(cfg["datasets"]);
    const auto& index = registry.get(e["dataset"].get<std::string>());
    const auto ckpt = checkpoint_for(cfg, e, index);
    const auto report = eval::meta_test(ckpt, index, setting_from_json(e), e["tasks"].get<std::size_t>(),
                                        e["seed"].get<std::uint64_t>(), cfg["threads"].get<std::size_t>());
    write_json(eval::to_json(report), out / "eval_report.json");
    const auto text = eval::format_report(report);
    std::ofstream(out / "eval_report.txt", std::ios::binary) << text;
    log_info("\n" + text.substr(0, text.find_last_not_of('\n') + 1));
    return 0;
}

int cmd_ablate(const Options& o) {
    const auto cfg = resolved(o, "ablate");
    const auto& a = cfg["ablation"];
    if (a["rows"].empty()) throw ConfigError("ablate: the config has no ablation rows");
    if (a["eval_datasets"].empty()) throw ConfigError("ablate: no ablation.eval_datasets");
    const auto out = prepare_out(cfg);
    DatasetRegistry registry(cfg["datasets"]);

    eval::AblationConfig ac;
    ac.n_tasks = a["tasks"].get<std::size_t>();
    ac.eval_seed = a["seed"].get<std::uint64_t>();
    ac.threads = cfg["threads"].get<std::size_t>();
    for (const auto& s : a["settings"]) ac.settings.push_back(setting_from_json(s));
    for (const auto& d : a["eval_datasets"]) {
        const auto name = d.get<std::string>();
        ac.eval_sets.push_back({name, &registry.get(name)});
    }
    const auto top_optimizer = optimizer_from_json(cfg["optimizer"]);
    for (const auto& row : a["rows"]) {
        eval::AblationRow r;
        r.name = row["name"].get<std::string>();
        r.stages = stages_from_json(row["stages"], registry);
        auto backbone = cfg["backbone"];
        if (!row["checkpoint"].is_null()) backbone["checkpoint"] = row["checkpoint"];
        const auto* reference = r.stages.empty() ? ac.eval_sets.front().index : r.stages.front().datasets.front().index;
        r.initial = initial_checkpoint(backbone, reference);
        r.optimizer = row["optimizer"].is_null() ? top_optimizer : optimizer_from_json(row["optimizer"]);
        r.seed = row["seed"].get<std::uint64_t>();
        ac.rows.push_back(std::move(r));
    }
    const auto table = eval::ablation_run(ac);
    write_json(eval::to_json(table), out / "ablation.json");
    const auto text = eval::format_table(table);
    std::ofstream(out / "ablation.txt", std::ios::binary) << text;
    log_info("\n" + text.substr(0, text.find_last_not_of('\n') + 1));
    return 0;
}

int cmd_export(const Options& o) {
    const auto cfg = resolved(o, "export");
    const auto& e = cfg["export"];
    if (e["dataset"].is_null()) throw ConfigError("export: no dataset (set export.dataset or --dataset)");
    const auto out = prepare_out(cfg);
    DatasetRegistry registry(cfg["datasets"]);
    const auto name = e["dataset"].get<std::string>();
    const auto& index = registry.get(name);
    const auto ckpt = checkpoint_for(cfg, e, index);
    const auto table = eval::export_features(ckpt, index, registry.split(name), cfg["threads"].get<std::size_t>());
    eval::write_feature_csv(table, out / "features.csv");
    const auto pca = eval::project_pca(table.features, e["dims"].get<std::size_t>());
    eval::write_projection_csv(table.labels, pca, out / "pca.csv");
    write_json({{"requested_dims", pca.requested},
                {"dims", pca.coords.cols()},
                {"reduced", pca.reduced},
                {"variances", std::vector<double>(pca.variances.data(), pca.variances.data() + pca.variances.size())},
                {"explained_ratio", std::vector<double>(pca.explained_ratio.data(),
                                                        pca.explained_ratio.data() + pca.explained_ratio.size())}},
               out / "pca.json");
    log_info("exported " + std::to_string(table.features.rows()) + " embeddings to " + (out / "features.csv").string());
    return 0;
}

int cmd_check(const Options& o) {
    const auto report = run_self_test(o.seeds.value_or(10));
    for (const auto& g : report.gradients)
        std::cerr << "gradient " << g.name << ": max relative error " << g.max_relative_error << '\n';
    for (const auto& c : report.oracles)
        std::cerr << (c.passed ? "ok   " : "FAIL ") << c.name << " (" << c.detail << ")\n";
    std::cerr << "max gradient-check error " << report.max_gradient_error << " over " << report.seeds << " seeds (tolerance "
              << report.tolerance << "), " << report.seconds << " s\n";
    if (o.out || !o.config.empty()) {
        const auto cfg = resolved(o, "check");
        const auto out = prepare_out(cfg);
        json j{{"passed", report.passed()}, {"max_gradient_error", report.max_gradient_error}, {"seeds", report.seeds},
               {"gradients", json::array()}, {"oracles", json::array()}};
        for (const auto& g : report.gradients) j["gradients"].push_back({{"name", g.name}, {"max_relative_error", g.max_relative_error}});
        for (const auto& c : report.oracles) j["oracles"].push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
        write_json(j, out / "check.json");
    }
    std::cerr << (report.passed() ? "check passed\n" : "check FAILED\n");
    return report.passed() ? 0 : 1;
}

} // namespace

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"protofs: episodic few-shot meta-learning with prototypical networks"};
    app.require_subcommand(1, 1);
    Options o;

    auto* index = app.add_subcommand("index", "Build and persist dataset indexes");
    add_common(index, o);
    index->add_option("--dataset", o.dataset, "Dataset name from the config, or a path");

    auto* train = app.add_subcommand("train", "Run the meta-training curriculum");
    add_common(train, o);
    add_setting(train, o);
    train->add_option("--epochs", o.epochs, "Epochs per stage");

    auto* eval = app.add_subcommand("eval", "Meta-test a checkpoint");
    add_common(eval, o);
    add_setting(eval, o);
    eval->add_option("--dataset", o.dataset, "Dataset name from the config, or a path");
    eval->add_option("--checkpoint", o.checkpoint, "Checkpoint to evaluate");

    auto* ablate = app.add_subcommand("ablate", "Train and meta-test every ablation row");
    add_common(ablate, o);
    ablate->add_option("--tasks", o.tasks, "Episodes per report cell");

    auto* exp = app.add_subcommand("export", "Export embeddings and their PCA projection");
    add_common(exp, o);
    exp->add_option("--dataset", o.dataset, "Dataset name from the config, or a path");
    exp->add_option("--checkpoint", o.checkpoint, "Checkpoint to embed with");
    exp->add_option("--dims", o.dims, "Projection dimensions");

    auto* check = app.add_subcommand("check", "Gradient and oracle self-test");
    add_common(check, o);
    check->add_option("--seeds", o.seeds, "Seeds per gradient check");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        app.exit(e, std::cerr, std::cerr);
        return 2;
    }

    try {
        if (*index) return cmd_index(o);
        if (*train) return cmd_train(o);
        if (*eval) return cmd_eval(o);
        if (*ablate) return cmd_ablate(o);
        if (*exp) return cmd_export(o);
        return cmd_check(o);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}

} // namespace protofs::app
