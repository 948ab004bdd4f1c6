#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "protofs/data/synth.hpp"
#include "protofs/episodes/dataset_index.hpp"
#include "protofs/net/checkpoint.hpp"
#include "protofs/train/curriculum.hpp"

namespace protofs::app {

using nlohmann::json;

inline constexpr int kConfigSchemaVersion = 1;

/// Full-scale defaults for every section.
json default_config();

/// Parses a run configuration and checks its schema version.
json read_config(const std::filesystem::path& path);

/// Merges `raw` over the defaults, fills per-stage, per-row and per-dataset
/// defaults and makes dataset and checkpoint paths absolute (relative to
/// `base_dir`), so the result re-executes on its own.
json resolve_config(const json& raw, const std::filesystem::path& base_dir);

void write_json(const json& value, const std::filesystem::path& path);

/// Loads the datasets named in the `datasets` section on first use.
class DatasetRegistry {
public:
    explicit DatasetRegistry(json datasets) : section_(std::move(datasets)) {}

    bool contains(const std::string& name) const { return section_.contains(name); }
    const episodes::DatasetIndex& get(const std::string& name);
    /// Class split declared for the dataset (80% of classes train by default).
    episodes::Split split(const std::string& name);
    const json& section() const { return section_; }

private:
    json section_;
    std::map<std::string, episodes::DatasetIndex> cache_;
};

/// Dataset entry inferred from a bare path: a directory is an image folder,
/// `.json` a persisted index, anything else a feature table.
json dataset_entry_for_path(const std::filesystem::path& path);

episodes::DatasetIndex load_dataset(const std::string& name, const json& entry);

data::SynthDomainSpec synth_spec_from_json(const std::string& name, const json& entry);
train::OptimizerConfig optimizer_from_json(const json& j);
json optimizer_to_json(const train::OptimizerConfig& c);
episodes::TaskSetting setting_from_json(const json& j);

std::vector<train::CurriculumStage> stages_from_json(const json& stages, DatasetRegistry& datasets);

/// Pretrained weights from `backbone.checkpoint`, or a fresh build whose
/// input shape is taken from `backbone.input` or inferred from `reference`.
net::Checkpoint initial_checkpoint(const json& backbone, const episodes::DatasetIndex* reference);

/// Manifest listing classes and member samples; features and images stay in
/// their source files and are verified by content hash on load.
void write_index(const episodes::DatasetIndex& index, const json& source_entry, const std::filesystem::path& path);
episodes::DatasetIndex read_index(const std::filesystem::path& path);

} // namespace protofs::app
