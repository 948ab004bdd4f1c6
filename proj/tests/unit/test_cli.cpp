#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "doctest.h"
#include "protofs/app/cli.hpp"
#include "protofs/app/config.hpp"
#include "protofs/core/errors.hpp"
#include "protofs/core/log.hpp"

using namespace protofs;
using namespace protofs::app;
namespace fs = std::filesystem;

namespace {

int cli(std::vector<std::string> args) {
    args.insert(args.begin(), "protofs");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    return run_cli(static_cast<int>(argv.size()), argv.data());
}

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / "protofs_test_cli" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

json load(const fs::path& p) { return json::parse(slurp(p)); }

fs::path write_config(const fs::path& dir, const json& j) {
    const auto path = dir / "run.json";
    std::ofstream(path) << j.dump(2);
    return path;
}

json tiny_config() {
    return json::parse(R"({
      "schema_version": 1,
      "seed": 4,
      "datasets": {
        "src": {"type": "synthetic", "n_classes": 12, "feature_dim": 8, "items_per_class": 25, "seed": 1,
                "split": {"n_train": 6}},
        "tgt": {"type": "synthetic", "n_classes": 5, "feature_dim": 8, "items_per_class": 25, "seed": 2}
      },
      "backbone": {"kind": "mlp", "hidden": [16, 8]},
      "optimizer": {"kind": "adam", "lr": 0.001, "weight_decay": 0},
      "stages": [{"name": "s", "datasets": ["src"], "epochs": 3, "tasks_per_epoch": 5, "val_tasks": 10}],
      "eval": {"dataset": "tgt", "tasks": 20}
    })");
}

struct QuietLog {
    QuietLog() {
        set_log_sink([](LogLevel, const std::string&) {});
    }
    ~QuietLog() { set_log_sink(nullptr); }
};

} // namespace

TEST_CASE("usage errors exit 2 and help exits 0") {
    CHECK(cli({}) == 2);
    CHECK(cli({"frobnicate"}) == 2);
    CHECK(cli({"eval", "--bogus"}) == 2);
    CHECK(cli({"eval", "--K", "five"}) == 2);
    CHECK(cli({"--help"}) == 0);
}

TEST_CASE("validation errors exit 1") {
    QuietLog quiet;
    const auto dir = scratch("invalid");
    CHECK(cli({"train", "--config", (dir / "missing.json").string()}) == 1);

    auto cfg = tiny_config();
    cfg["schema_version"] = 99;
    CHECK(cli({"train", "--config", write_config(dir, cfg).string(), "--out", (dir / "out").string()}) == 1);

    cfg = tiny_config();
    cfg["mystery"] = 1;
    CHECK(cli({"train", "--config", write_config(dir, cfg).string()}) == 1);

    cfg = tiny_config();
    CHECK(cli({"eval", "--config", write_config(dir, cfg).string(), "--threads", "0"}) == 1);
    CHECK(cli({"eval", "--config", write_config(dir, cfg).string(), "--out", (dir / "out").string(), "--K", "9"}) == 1);
    CHECK(cli({"eval", "--dataset", (dir / "nowhere").string()}) == 1);
}

TEST_CASE("config resolution fills defaults and rejects unknown sections") {
    const auto r = resolve_config(tiny_config(), "/base");
    CHECK(r["threads"] == 1);
    CHECK(r["out"] == "/base/runs/latest");
    CHECK(r["stages"][0]["mixing"] == "sequential");
    CHECK(r["stages"][0]["way"] == 5);
    CHECK(r["datasets"]["tgt"]["class_separation"] == 4.0);
    CHECK(r["eval"]["queries"] == 15);
    json bad = tiny_config();
    bad["stages"][0]["mixing"] = "shuffled";
    DatasetRegistry reg(resolve_config(bad, "/base")["datasets"]);
    CHECK_THROWS_AS(stages_from_json(resolve_config(bad, "/base")["stages"], reg), ConfigError);
}

TEST_CASE("eval with flag overrides writes a 200-task report and the resolved config") {
    QuietLog quiet;
    const auto dir = scratch("eval");
    const auto cfg = write_config(dir, tiny_config());
    const auto out = dir / "out";
    REQUIRE(cli({"eval", "--config", cfg.string(), "--K", "5", "--C", "5", "--n", "15", "--tasks", "200", "--out",
                 out.string()}) == 0);
    const auto report = load(out / "eval_report.json");
    CHECK(report["n_tasks"] == 200);
    CHECK(report["task_accuracies"].size() == 200);
    const auto resolved = load(out / "resolved_config.json");
    CHECK(resolved["eval"]["tasks"] == 200);
    CHECK(resolved["out"] == fs::absolute(out).lexically_normal().string());
    CHECK(fs::exists(out / "eval_report.txt"));
}

TEST_CASE("train is deterministic and the persisted config re-executes identically") {
    QuietLog quiet;
    const auto dir = scratch("train");
    const auto cfg = write_config(dir, tiny_config());
    REQUIRE(cli({"train", "--config", cfg.string(), "--threads", "1", "--out", (dir / "a").string()}) == 0);
    REQUIRE(cli({"train", "--config", cfg.string(), "--threads", "1", "--out", (dir / "b").string()}) == 0);
    CHECK(slurp(dir / "a" / "final.ckpt") == slurp(dir / "b" / "final.ckpt"));
    CHECK(fs::exists(dir / "a" / "stage1-s.ckpt"));

    std::ifstream record(dir / "a" / "train_record.jsonl");
    std::size_t lines = 0;
    for (std::string line; std::getline(record, line);) {
        CHECK(json::parse(line)["stage"] == "s");
        ++lines;
    }
    CHECK(lines == 3);
    CHECK(load(dir / "a" / "train_summary.json")["provenance"] == "random-init+meta:s");

    const auto persisted = (dir / "a" / "resolved_config.json").string();
    REQUIRE(cli({"train", "--config", persisted, "--out", (dir / "c").string()}) == 0);
    CHECK(slurp(dir / "a" / "final.ckpt") == slurp(dir / "c" / "final.ckpt"));

    REQUIRE(cli({"eval", "--config", cfg.string(), "--out", (dir / "a").string()}) == 0);
    REQUIRE(cli({"eval", "--config", cfg.string(), "--out", (dir / "b").string()}) == 0);
    CHECK(slurp(dir / "a" / "eval_report.json") == slurp(dir / "b" / "eval_report.json"));
}

TEST_CASE("index persists synthetic data and detects tampering") {
    QuietLog quiet;
    const auto dir = scratch("index");
    const auto cfg = write_config(dir, tiny_config());
    REQUIRE(cli({"index", "--config", cfg.string(), "--out", dir.string()}) == 0);
    const auto reloaded = read_index(dir / "tgt.index.json");
    DatasetRegistry registry(resolve_config(tiny_config(), dir)["datasets"]);
    CHECK(reloaded.content_hash() == registry.get("tgt").content_hash());
    CHECK(reloaded.num_samples() == 125);

    auto csv = slurp(dir / "tgt.csv");
    const auto pos = csv.find(",all,") + 5;
    csv[pos] = csv[pos] == '1' ? '2' : '1';
    std::ofstream(dir / "tgt.csv", std::ios::binary) << csv;
    CHECK_THROWS_AS(read_index(dir / "tgt.index.json"), CorruptionError);
}

TEST_CASE("export writes features and a projection") {
    QuietLog quiet;
    const auto dir = scratch("export");
    auto j = tiny_config();
    j["export"] = {{"dataset", "tgt"}};
    const auto cfg = write_config(dir, j);
    REQUIRE(cli({"export", "--config", cfg.string(), "--out", dir.string()}) == 0);
    std::ifstream pca(dir / "pca.csv");
    std::size_t rows = 0;
    for (std::string line; std::getline(pca, line);) ++rows;
    CHECK(rows == 126);
    CHECK(load(dir / "pca.json")["dims"] == 2);
}
