#include "protofs/episodes/sampler.hpp"

#include "protofs/core/errors.hpp"
#include "protofs/core/log.hpp"

namespace protofs::episodes {

EpisodeSampler::EpisodeSampler(ClassView view, TaskSetting setting) : view_(std::move(view)), setting_(setting) {
    if (!view_.index) throw ContractError("episode sampler needs a dataset index");
    if (setting_.way == 0 || setting_.shot == 0 || setting_.queries == 0) {
        throw ConfigError("episode way, shot and queries must all be positive");
    }
    const auto need = setting_.shot + setting_.queries;
    std::size_t excluded = 0;
    for (auto c : view_.classes) {
        if (c >= view_.index->num_classes()) throw ContractError("class view refers past the index");
        if (view_.index->items[c].size() >= need) {
            eligible_.push_back(c);
        } else {
            ++excluded;
        }
    }
    if (eligible_.size() < setting_.way) {
        throw EpisodeInfeasibleError(view_.index->name + ": " + std::to_string(setting_.way) + "-way episodes need " +
                                     std::to_string(setting_.way) + " classes with at least " + std::to_string(need) +
                                     " items (C+n), only " + std::to_string(eligible_.size()) + " of " +
                                     std::to_string(view_.classes.size()) + " qualify");
    }
    if (excluded > 0) {
        log_warning(view_.index->name + ": " + std::to_string(excluded) + " class(es) with fewer than " +
                    std::to_string(need) + " items excluded from episode draws");
    }
}

Episode EpisodeSampler::sample(Rng& rng) const {
    Episode ep;
    ep.setting = setting_;
    ep.seed = derive_seed(rng.key(), rng.counter());
    const auto& s = setting_;
    ep.support.reserve(s.way * s.shot);
    ep.query.reserve(s.way * s.queries);
    for (auto pick : rng.sample_without_replacement(eligible_.size(), s.way)) ep.source_classes.push_back(eligible_[pick]);
    for (std::size_t k = 0; k < s.way; ++k) {
        const auto& pool = view_.index->items[ep.source_classes[k]];
        const auto draw = rng.sample_without_replacement(pool.size(), s.shot + s.queries);
        for (std::size_t i = 0; i < s.shot; ++i) {
            ep.support.push_back(pool[draw[i]]);
            ep.support_labels.push_back(static_cast<int>(k));
        }
        for (std::size_t i = s.shot; i < draw.size(); ++i) {
            ep.query.push_back(pool[draw[i]]);
            ep.query_labels.push_back(static_cast<int>(k));
        }
    }
    return ep;
}

Episode EpisodeSampler::sample_at(std::uint64_t epoch_seed, std::uint64_t task_index) const {
    Rng rng = Rng(epoch_seed, 0x65706973).split(task_index);
    auto ep = sample(rng);
    ep.seed = derive_seed(epoch_seed, task_index);
    return ep;
}

Episode sample_episode(const ClassView& view, TaskSetting setting, Rng& rng) {
    return EpisodeSampler(view, setting).sample(rng);
}

std::vector<Episode> episode_stream(const ClassView& view, TaskSetting setting, std::size_t tasks_per_epoch,
                                    std::uint64_t epoch_seed) {
    std::vector<Episode> out;
    if (tasks_per_epoch == 0) return out;
    const EpisodeSampler sampler(view, setting);
    out.reserve(tasks_per_epoch);
    for (std::size_t t = 0; t < tasks_per_epoch; ++t) out.push_back(sampler.sample_at(epoch_seed, t));
    return out;
}

} // namespace protofs::episodes
