#include "protofs/app/config.hpp"

#include <cstdio>
#include <fstream>

#include "protofs/core/errors.hpp"
#include "protofs/data/loaders.hpp"

namespace protofs::app {

namespace fs = std::filesystem;

namespace {

json stage_defaults(std::size_t i) {
    return {{"name", "stage" + std::to_string(i + 1)},
            {"datasets", json::array()},
            {"mixing", "sequential"},
            {"epochs", 200},
            {"tasks_per_epoch", 100},
            {"val_tasks", 500},
            {"way", 5},
            {"shot", 5},
            {"queries", 15},
            {"optimizer", nullptr}};
}

json dataset_defaults(const std::string& type) {
    json d{{"type", type}, {"split", {{"n_train", nullptr}, {"seed", 0}}}};
    if (type == "synthetic") {
        d.update({{"n_classes", 5},
                  {"feature_dim", 16},
                  {"signal_dim", 0},
                  {"class_separation", 4.0},
                  {"noise_scale", 1.0},
                  {"items_per_class", 100},
                  {"seed", 0},
                  {"shift", {{"rotation", 0.0}, {"translation", 0.0}, {"seed", 0}}}});
    } else if (type == "image_folder" || type == "feature_table" || type == "index") {
        d["path"] = nullptr;
    } else {
        throw ConfigError("unknown dataset type '" + type + "' (expected synthetic, image_folder, feature_table or index)");
    }
    return d;
}

// Recursive object overlay; unlike a JSON merge patch, null is kept as a value.
json merged(json base, const json& over) {
    if (!base.is_object() || !over.is_object()) return over;
    for (const auto& [key, value] : over.items()) base[key] = base.contains(key) ? merged(base[key], value) : value;
    return base;
}

void absolutize(json& j, const char* key, const fs::path& base_dir) {
    if (j.contains(key) && j[key].is_string()) {
        const fs::path p = j[key].get<std::string>();
        j[key] = (p.is_absolute() ? p : fs::absolute(base_dir / p)).lexically_normal().string();
    }
}

json resolve_stages(const json& stages, std::size_t offset = 0) {
    json out = json::array();
    if (!stages.is_array()) throw ConfigError("'stages' must be an array");
    for (std::size_t i = 0; i < stages.size(); ++i) {
        auto s = merged(stage_defaults(offset + i), stages[i]);
        if (s["datasets"].is_string()) s["datasets"] = json::array({s["datasets"]});
        if (!s["optimizer"].is_null()) s["optimizer"] = optimizer_to_json(optimizer_from_json(s["optimizer"]));
        out.push_back(s);
    }
    return out;
}

template <typename T>
T get(const json& j, const char* key, const std::string& where) {
    if (!j.contains(key) || j[key].is_null()) throw ConfigError(where + ": missing '" + key + "'");
    try {
        return j[key].get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(where + ": bad value for '" + key + "': " + e.what());
    }
}

std::string hex64(std::uint64_t v) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

} // namespace

json default_config() {
    return {{"schema_version", kConfigSchemaVersion},
            {"seed", 0},
            {"threads", 1},
            {"out", "runs/latest"},
            {"datasets", json::object()},
            {"backbone",
             {{"kind", nullptr},
              {"input", nullptr},
              {"hidden", {64, 32}},
              {"filters", 64},
              {"init_seed", 0},
              {"checkpoint", nullptr}}},
            {"optimizer", optimizer_to_json(train::OptimizerConfig::default_sgd())},
            {"stages", json::array()},
            {"eval",
             {{"dataset", nullptr},
              {"checkpoint", nullptr},
              {"way", 5},
              {"shot", 5},
              {"queries", 15},
              {"tasks", 200},
              {"seed", 0}}},
            {"ablation",
             {{"rows", json::array()},
              {"eval_datasets", json::array()},
              {"settings",
               {{{"way", 5}, {"shot", 5}, {"queries", 15}},
                {{"way", 5}, {"shot", 20}, {"queries", 15}},
                {{"way", 5}, {"shot", 50}, {"queries", 15}}}},
              {"tasks", 200},
              {"seed", 0}}},
            {"export", {{"dataset", nullptr}, {"checkpoint", nullptr}, {"dims", 2}}}};
}

json read_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
    }
    if (!j.is_object()) throw ConfigError("config " + path.string() + " must be a JSON object");
    const auto version = j.value("schema_version", kConfigSchemaVersion);
    if (version != kConfigSchemaVersion) {
        throw ConfigError("config schema_version " + std::to_string(version) + " is not supported (expected " +
                          std::to_string(kConfigSchemaVersion) + ")");
    }
    return j;
}

json resolve_config(const json& raw, const fs::path& base_dir) {
    const auto defaults = default_config();
    for (const auto& [key, value] : raw.items()) {
        if (!defaults.contains(key)) throw ConfigError("unknown config section '" + key + "'");
    }
    json r = defaults;
    for (const char* key : {"schema_version", "seed", "threads", "out"})
        if (raw.contains(key)) r[key] = raw[key];
    for (const char* key : {"backbone", "eval", "export"})
        if (raw.contains(key)) r[key] = merged(defaults[key], raw[key]);
    if (raw.contains("optimizer")) r["optimizer"] = optimizer_to_json(optimizer_from_json(raw["optimizer"]));

    r["datasets"] = json::object();
    if (raw.contains("datasets")) {
        for (const auto& [name, entry] : raw["datasets"].items()) {
            auto d = merged(dataset_defaults(entry.value("type", "synthetic")), entry);
            absolutize(d, "path", base_dir);
            r["datasets"][name] = d;
        }
    }
    r["stages"] = resolve_stages(raw.value("stages", json::array()));
    if (raw.contains("ablation")) {
        auto a = merged(defaults["ablation"], raw["ablation"]);
        if (raw["ablation"].contains("settings")) a["settings"] = raw["ablation"]["settings"];
        json rows = json::array();
        for (const auto& row : a["rows"]) {
            json out = merged({{"name", "row" + std::to_string(rows.size() + 1)},
                               {"checkpoint", nullptr},
                               {"stages", json::array()},
                               {"seed", r["seed"]},
                               {"optimizer", nullptr}},
                              row);
            out["stages"] = resolve_stages(row.value("stages", json::array()));
            absolutize(out, "checkpoint", base_dir);
            if (!out["optimizer"].is_null()) out["optimizer"] = optimizer_to_json(optimizer_from_json(out["optimizer"]));
            rows.push_back(out);
        }
        a["rows"] = rows;
        r["ablation"] = a;
    }
    absolutize(r["backbone"], "checkpoint", base_dir);
    absolutize(r["eval"], "checkpoint", base_dir);
    absolutize(r["export"], "checkpoint", base_dir);
    absolutize(r, "out", base_dir);
    return r;
}

void write_json(const json& value, const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IndexingError("cannot write " + path.string());
    out << value.dump(2) << '\n';
}

json dataset_entry_for_path(const fs::path& path) {
    const auto abs = fs::absolute(path).lexically_normal().string();
    if (fs::is_directory(path)) return merged(dataset_defaults("image_folder"), {{"path", abs}});
    if (path.extension() == ".json") return merged(dataset_defaults("index"), {{"path", abs}});
    return merged(dataset_defaults("feature_table"), {{"path", abs}});
}

data::SynthDomainSpec synth_spec_from_json(const std::string& name, const json& e) {
    const auto where = "dataset " + name;
    data::SynthDomainSpec s;
    s.name = name;
    s.n_classes = get<std::size_t>(e, "n_classes", where);
    s.feature_dim = get<std::size_t>(e, "feature_dim", where);
    s.signal_dim = get<std::size_t>(e, "signal_dim", where);
    s.class_separation = get<double>(e, "class_separation", where);
    s.noise_scale = get<double>(e, "noise_scale", where);
    s.seed = get<std::uint64_t>(e, "seed", where);
    const auto& shift = e.at("shift");
    s.shift.rotation = get<double>(shift, "rotation", where + " shift");
    s.shift.translation = get<double>(shift, "translation", where + " shift");
    s.shift.seed = get<std::uint64_t>(shift, "seed", where + " shift");
    return s;
}

episodes::DatasetIndex load_dataset(const std::string& name, const json& e) {
    const auto type = get<std::string>(e, "type", "dataset " + name);
    episodes::DatasetIndex index;
    if (type == "synthetic") {
        index = data::synth_generate(synth_spec_from_json(name, e), get<std::size_t>(e, "items_per_class", "dataset " + name));
    } else {
        const fs::path path = get<std::string>(e, "path", "dataset " + name);
        if (type == "image_folder") index = data::load_image_folder(path);
        else if (type == "feature_table") index = data::load_feature_table(path);
        else index = read_index(path);
    }
    index.name = name;
    return index;
}

const episodes::DatasetIndex& DatasetRegistry::get(const std::string& name) {
    if (auto it = cache_.find(name); it != cache_.end()) return it->second;
    if (!section_.contains(name)) throw ConfigError("unknown dataset '" + name + "'");
    return cache_.emplace(name, load_dataset(name, section_[name])).first->second;
}

episodes::Split DatasetRegistry::split(const std::string& name) {
    const auto& index = get(name);
    const auto& s = section_[name].at("split");
    const auto total = index.num_classes();
    const auto n_train = s.at("n_train").is_null() ? std::max<std::size_t>(1, total * 4 / 5)
                                                   : s.at("n_train").get<std::size_t>();
    return episodes::make_split(index, n_train, s.at("seed").get<std::uint64_t>());
}

train::OptimizerConfig optimizer_from_json(const json& j) {
    const auto kind = train::parse_optimizer_kind(j.value("kind", "sgd"));
    auto c = kind == train::OptimizerKind::SGD ? train::OptimizerConfig::default_sgd() : train::OptimizerConfig::default_adam();
    try {
        c.lr = j.value("lr", c.lr);
        c.step_size_epochs = j.value("step_size_epochs", c.step_size_epochs);
        c.lr_decay = j.value("lr_decay", c.lr_decay);
        c.weight_decay = j.value("weight_decay", c.weight_decay);
        c.momentum = j.value("momentum", c.momentum);
        c.beta1 = j.value("beta1", c.beta1);
        c.beta2 = j.value("beta2", c.beta2);
        c.eps = j.value("eps", c.eps);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("optimizer: ") + e.what());
    }
    c.validate();
    return c;
}

json optimizer_to_json(const train::OptimizerConfig& c) {
    return {{"kind", train::to_string(c.kind)},
            {"lr", c.lr},
            {"step_size_epochs", c.step_size_epochs},
            {"lr_decay", c.lr_decay},
            {"weight_decay", c.weight_decay},
            {"momentum", c.momentum},
            {"beta1", c.beta1},
            {"beta2", c.beta2},
            {"eps", c.eps}};
}

episodes::TaskSetting setting_from_json(const json& j) {
    return {get<std::size_t>(j, "way", "task setting"), get<std::size_t>(j, "shot", "task setting"),
            get<std::size_t>(j, "queries", "task setting")};
}

std::vector<train::CurriculumStage> stages_from_json(const json& stages, DatasetRegistry& datasets) {
    std::vector<train::CurriculumStage> out;
    for (const auto& s : stages) {
        train::CurriculumStage stage;
        stage.name = get<std::string>(s, "name", "stage");
        const auto where = "stage " + stage.name;
        for (const auto& d : s.at("datasets")) {
            const auto name = d.get<std::string>();
            stage.datasets.push_back({&datasets.get(name), datasets.split(name)});
        }
        stage.mixing = train::parse_mixing(get<std::string>(s, "mixing", where));
        stage.epochs = get<std::size_t>(s, "epochs", where);
        stage.tasks_per_epoch = get<std::size_t>(s, "tasks_per_epoch", where);
        stage.val_tasks = get<std::size_t>(s, "val_tasks", where);
        stage.setting = setting_from_json(s);
        if (!s.at("optimizer").is_null()) stage.optimizer = optimizer_from_json(s["optimizer"]);
        out.push_back(std::move(stage));
    }
    return out;
}

net::Checkpoint initial_checkpoint(const json& b, const episodes::DatasetIndex* reference) {
    std::optional<net::BackboneKind> kind;
    if (!b.at("kind").is_null()) kind = net::parse_backbone_kind(b["kind"].get<std::string>());
    if (!b.at("checkpoint").is_null()) {
        const fs::path path = b["checkpoint"].get<std::string>();
        auto ckpt = net::load_checkpoint(path, kind);
        if (ckpt.backbone.provenance() == "random-init") ckpt.backbone.set_provenance("pretrained:" + path.filename().string());
        return ckpt;
    }
    net::BackboneConfig cfg;
    if (!b.at("input").is_null()) {
        cfg.input = b["input"].get<Shape>();
    } else if (reference != nullptr) {
        cfg.input = reference->modality == episodes::Modality::Image
                        ? Shape{3, 84, 84}
                        : Shape{static_cast<std::size_t>(reference->features.cols())};
    } else {
        throw ConfigError("backbone input shape is unknown: set backbone.input or name a dataset");
    }
    cfg.kind = kind.value_or(cfg.input.size() == 3 ? net::BackboneKind::ConvNet4 : net::BackboneKind::MLP);
    cfg.hidden = b.at("hidden").get<std::vector<std::size_t>>();
    cfg.filters = b.at("filters").get<std::size_t>();
    return {net::build(cfg, b.at("init_seed").get<std::uint64_t>()), std::nullopt};
}

void write_index(const episodes::DatasetIndex& index, const json& source_entry, const fs::path& path) {
    json classes = json::array();
    for (std::size_t c = 0; c < index.num_classes(); ++c) {
        json items = json::array();
        for (auto r : index.items[c]) items.push_back(index.paths.empty() ? std::to_string(r) : index.paths[r]);
        classes.push_back({{"label", index.classes[c]}, {"items", items}});
    }
    write_json({{"schema_version", kConfigSchemaVersion},
                {"kind", "protofs-index"},
                {"name", index.name},
                {"modality", index.modality == episodes::Modality::Image ? "image" : "feature-vector"},
                {"source", source_entry},
                {"samples", index.num_samples()},
                {"content_hash", hex64(index.content_hash())},
                {"classes", classes}},
               path);
}

episodes::DatasetIndex read_index(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IndexingError("cannot open index " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw FormatError("index " + path.string() + " is not valid JSON: " + e.what());
    }
    if (j.value("kind", "") != "protofs-index") throw FormatError(path.string() + " is not a protofs index");
    const auto& source = j.at("source");
    if (source.value("type", "") == "index") throw FormatError("index " + path.string() + " refers to another index");
    auto index = load_dataset(j.value("name", "index"), source);
    if (hex64(index.content_hash()) != j.at("content_hash").get<std::string>()) {
        throw CorruptionError("index " + path.string() + ": source data changed since indexing (content hash mismatch)");
    }
    return index;
}

} // namespace protofs::app
