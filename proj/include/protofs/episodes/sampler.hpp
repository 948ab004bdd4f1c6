#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "protofs/core/rng.hpp"
#include "protofs/episodes/dataset_index.hpp"

namespace protofs::episodes {

/// Episode size: way K, shot C, queries per class n.
struct TaskSetting {
    std::size_t way = 5;
    std::size_t shot = 5;
    std::size_t queries = 15;
};

/// One K-way C-shot task. Support and query are class-major; labels are
/// episode-local in [0, K) and map to `source_classes` positions in the index.
struct Episode {
    TaskSetting setting;
    std::vector<SampleRef> support;
    std::vector<int> support_labels;
    std::vector<SampleRef> query;
    std::vector<int> query_labels;
    std::vector<std::size_t> source_classes;
    std::uint64_t seed = 0;
};

/// Draws episodes from a class view. Classes with fewer than C+n items are
/// excluded from every draw; the exclusion is logged once per sampler.
class EpisodeSampler {
public:
    EpisodeSampler(ClassView view, TaskSetting setting);

    const std::vector<std::size_t>& eligible_classes() const { return eligible_; }
    const ClassView& view() const { return view_; }
    const TaskSetting& setting() const { return setting_; }

    Episode sample(Rng& rng) const;
    /// Episode `task_index` of the stream keyed by `epoch_seed`; O(1) to locate.
    Episode sample_at(std::uint64_t epoch_seed, std::uint64_t task_index) const;

private:
    ClassView view_;
    TaskSetting setting_;
    std::vector<std::size_t> eligible_;
};

Episode sample_episode(const ClassView& view, TaskSetting setting, Rng& rng);

/// tasks_per_epoch episodes, each fully determined by (epoch_seed, task index).
std::vector<Episode> episode_stream(const ClassView& view, TaskSetting setting, std::size_t tasks_per_epoch,
                                    std::uint64_t epoch_seed);

} // namespace protofs::episodes
