#include "protofs/train/curriculum.hpp"

#include <cmath>
#include <numeric>

#include "protofs/core/errors.hpp"
#include "protofs/core/log.hpp"
#include "protofs/core/parallel.hpp"
#include "protofs/core/rng.hpp"
#include "protofs/core/stats.hpp"
#include "protofs/data/loaders.hpp"
#include "protofs/proto/head.hpp"

namespace protofs::train {

namespace {

constexpr std::uint64_t kTrainStream = 0x747261696e;
constexpr std::uint64_t kValStream = 0x76616c;
constexpr std::uint64_t kPoolStream = 0x706f6f6c;

std::vector<episodes::SampleRef> concat(const std::vector<episodes::SampleRef>& a,
                                        const std::vector<episodes::SampleRef>& b) {
    std::vector<episodes::SampleRef> out(a);
    out.insert(out.end(), b.begin(), b.end());
    return out;
}

std::optional<data::ChannelStats> stage_normalization(const net::Checkpoint& start, const CurriculumStage& stage) {
    if (start.normalization) return start.normalization;
    std::vector<data::ImageRecord> images;
    for (const auto& ds : stage.datasets) {
        if (ds.index->modality != episodes::Modality::Image) continue;
        for (auto c : ds.split.train_classes)
            for (auto ref : ds.index->items[c]) images.push_back(ds.index->images[ref]);
    }
    if (images.empty()) return std::nullopt;
    auto stats = data::channel_stats(images);
    if (stats.degenerate) log_warning("stage " + stage.name + ": a channel has zero spread in the training classes");
    return stats;
}

// Which dataset supplies task `t` of an epoch.
std::size_t dataset_for_task(const CurriculumStage& stage, std::uint64_t epoch_seed, std::size_t t, std::size_t tasks) {
    const auto n = stage.datasets.size();
    if (n == 1) return 0;
    if (stage.mixing == Mixing::Pooled) return static_cast<std::size_t>(Rng(epoch_seed, kPoolStream).split(t).uniform_below(n));
    return t * n / tasks;
}

} // namespace

std::string to_string(Mixing mixing) { return mixing == Mixing::Sequential ? "sequential" : "pooled"; }

Mixing parse_mixing(std::string_view name) {
    if (name == "sequential") return Mixing::Sequential;
    if (name == "pooled") return Mixing::Pooled;
    throw ConfigError("unknown mixing '" + std::string(name) + "' (expected sequential or pooled)");
}

void CurriculumStage::validate() const {
    if (datasets.empty()) throw ConfigError("stage '" + name + "' has no datasets");
    if (epochs == 0) throw ConfigError("stage '" + name + "' needs at least one epoch");
    if (setting.way < 2) throw ConfigError("stage '" + name + "': way must be at least 2");
    if (setting.shot == 0 || setting.queries == 0) throw ConfigError("stage '" + name + "': shot and queries must be positive");
    for (const auto& ds : datasets) {
        if (ds.index == nullptr) throw ConfigError("stage '" + name + "' references a missing dataset");
        if (val_tasks > 0 && ds.split.val_classes.empty()) {
            throw ConfigError("stage '" + name + "': dataset " + ds.index->name + " has no validation classes");
        }
    }
    if (optimizer) optimizer->validate();
}

EpisodeOutcome evaluate_episode(const net::Backbone& backbone, const episodes::DatasetIndex& index,
                                const episodes::Episode& episode,
                                const std::optional<data::ChannelStats>& normalization) {
    Tape tape(Tape::Mode::NoGrad);
    const auto s = episode.support.size(), q = episode.query.size();
    const auto x = data::gather_inputs(index, concat(episode.support, episode.query), normalization);
    const auto emb = backbone.forward(tape, x);
    const auto protos = proto::compute_prototypes(tape, slice_rows(tape, emb, 0, s), episode.support_labels,
                                                  episode.setting.way);
    auto out = proto::classify(tape, slice_rows(tape, emb, s, q), protos);
    EpisodeOutcome result;
    result.total = q;
    for (std::size_t i = 0; i < q; ++i) result.correct += out.predictions[i] == episode.query_labels[i];
    result.predictions = std::move(out.predictions);
    return result;
}

net::Checkpoint clone_checkpoint(const net::Checkpoint& checkpoint) {
    return net::Checkpoint{checkpoint.backbone.clone(), checkpoint.normalization};
}

StageResult train_stage(const net::Checkpoint& start, const CurriculumStage& stage, const OptimizerConfig& optimizer,
                        std::uint64_t seed, const TrainOptions& options) {
    stage.validate();
    const auto opt_config = stage.optimizer.value_or(optimizer);
    opt_config.validate();

    net::Checkpoint current = clone_checkpoint(start);
    current.normalization = stage_normalization(start, stage);
    auto& net = current.backbone;

    std::vector<episodes::EpisodeSampler> train_samplers, val_samplers;
    for (const auto& ds : stage.datasets) {
        train_samplers.emplace_back(episodes::train_side(*ds.index, ds.split), stage.setting);
        if (stage.val_tasks > 0) val_samplers.emplace_back(episodes::val_side(*ds.index, ds.split), stage.setting);
    }
    // The same validation episodes are used after every epoch.
    std::vector<std::pair<std::size_t, episodes::Episode>> val_episodes;
    const auto val_seed = derive_seed(seed, kValStream);
    for (std::size_t t = 0; t < stage.val_tasks; ++t) {
        const auto d = t % val_samplers.size();
        val_episodes.emplace_back(d, val_samplers[d].sample_at(val_seed, t));
    }

    OptimizerState state(opt_config);
    StageResult result;
    result.record.name = stage.name;
    result.best = clone_checkpoint(current);

    for (std::size_t epoch = 0; epoch < stage.epochs; ++epoch) {
        EpochRecord rec;
        rec.stage = stage.name;
        rec.epoch = epoch;
        rec.lr = lr_at_epoch(opt_config, epoch);
        const auto epoch_seed = derive_seed(derive_seed(seed, kTrainStream), epoch);
        double loss_sum = 0.0;
        std::size_t correct = 0, total = 0;
        for (std::size_t t = 0; t < stage.tasks_per_epoch; ++t) {
            const auto d = dataset_for_task(stage, epoch_seed, t, stage.tasks_per_epoch);
            const auto& index = *stage.datasets[d].index;
            const auto ep = train_samplers[d].sample_at(derive_seed(epoch_seed, d), t);
            net.zero_grad();
            Tape tape;
            const auto s = ep.support.size(), q = ep.query.size();
            const auto x = data::gather_inputs(index, concat(ep.support, ep.query), current.normalization);
            const auto emb = net.forward(tape, x, RunMode::Train);
            const auto protos = proto::compute_prototypes(tape, slice_rows(tape, emb, 0, s), ep.support_labels,
                                                          stage.setting.way);
            const auto out = proto::classify(tape, slice_rows(tape, emb, s, q), protos);
            const auto loss = proto::episode_loss(tape, out.log_probs, ep.query_labels);
            if (!std::isfinite(loss.item())) {
                throw NumericError("stage " + stage.name + " epoch " + std::to_string(epoch) + " task " +
                                   std::to_string(t) + ": non-finite loss");
            }
            loss_sum += loss.item();
            ++rec.train_episodes;
            for (std::size_t i = 0; i < q; ++i) correct += out.predictions[i] == ep.query_labels[i];
            total += q;
            if (net.parameter_count() > 0) {
                backward(loss, tape);
                optimizer_step(net.parameters(), state, rec.lr);
            }
        }
        if (stage.tasks_per_epoch > 0) {
            rec.train_loss = loss_sum / static_cast<double>(stage.tasks_per_epoch);
            rec.train_accuracy = static_cast<double>(correct) / static_cast<double>(total);
        }

        bool improved = false;
        if (!val_episodes.empty()) {
            std::vector<std::size_t> hits(val_episodes.size()), counts(val_episodes.size());
            std::vector<double> acc(val_episodes.size());
            parallel_for(val_episodes.size(), options.threads, [&](std::size_t i) {
                const auto& [d, ep] = val_episodes[i];
                const auto o = evaluate_episode(net, *stage.datasets[d].index, ep, current.normalization);
                hits[i] = o.correct;
                counts[i] = o.total;
                acc[i] = static_cast<double>(o.correct) / static_cast<double>(o.total);
            });
            const double val = static_cast<double>(std::accumulate(hits.begin(), hits.end(), std::size_t{0})) /
                               static_cast<double>(std::accumulate(counts.begin(), counts.end(), std::size_t{0}));
            rec.val_accuracy = val;
            rec.val_episodes = val_episodes.size();
            rec.val_ci95 = ci95(acc);
            improved = !result.record.best_val_accuracy || val > *result.record.best_val_accuracy;
        } else {
            improved = true;
        }
        if (improved) {
            result.best = clone_checkpoint(current);
            result.record.best_epoch = epoch;
            result.record.best_val_accuracy = rec.val_accuracy;
        }
        rec.best_epoch = result.record.best_epoch;
        result.record.epochs.push_back(rec);
        if (options.on_epoch) options.on_epoch(rec);
    }
    result.best.backbone.set_provenance(start.backbone.provenance() + "+meta:" + stage.name);
    return result;
}

std::uint64_t stage_seed(std::uint64_t master_seed, std::size_t index) {
    return derive_seed(master_seed, 0x7374616765ULL + index);
}

CurriculumResult run_curriculum(const net::Checkpoint& initial, std::span<const CurriculumStage> stages,
                                const OptimizerConfig& optimizer, std::uint64_t master_seed,
                                const TrainOptions& options) {
    if (stages.empty()) throw ConfigError("curriculum has no stages");
    for (const auto& s : stages) s.validate();
    CurriculumResult result;
    result.final = clone_checkpoint(initial);
    for (std::size_t i = 0; i < stages.size(); ++i) {
        log_info("stage " + std::to_string(i + 1) + "/" + std::to_string(stages.size()) + ": " + stages[i].name);
        auto stage = train_stage(result.final, stages[i], optimizer, stage_seed(master_seed, i), options);
        if (options.on_stage) options.on_stage(stage.record, stage.best);
        result.final = std::move(stage.best);
        result.stages.push_back(std::move(stage.record));
    }
    return result;
}

} // namespace protofs::train
