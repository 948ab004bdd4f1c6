#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "protofs/episodes/sampler.hpp"
#include "protofs/net/checkpoint.hpp"
#include "protofs/train/optimizer.hpp"

namespace protofs::train {

/// One dataset of a stage: training episodes come from split.train_classes,
/// validation episodes from split.val_classes.
struct StageDataset {
    const episodes::DatasetIndex* index = nullptr;
    episodes::Split split;
};

/// Sequential: the tasks of an epoch are divided into contiguous blocks, one
/// per dataset in order. Pooled: each task picks its dataset uniformly.
enum class Mixing { Sequential, Pooled };

std::string to_string(Mixing mixing);
Mixing parse_mixing(std::string_view name);

struct CurriculumStage {
    std::string name;
    std::vector<StageDataset> datasets;
    Mixing mixing = Mixing::Sequential;
    std::size_t epochs = 200;
    std::size_t tasks_per_epoch = 100;
    std::size_t val_tasks = 500;
    episodes::TaskSetting setting;
    std::optional<OptimizerConfig> optimizer;

    void validate() const;
};

struct EpochRecord {
    std::string stage;
    std::size_t epoch = 0;
    double lr = 0.0;
    std::size_t train_episodes = 0;
    std::size_t val_episodes = 0;
    double train_loss = 0.0;
    double train_accuracy = 0.0;
    /// Absent when the stage has no validation tasks.
    std::optional<double> val_accuracy;
    double val_ci95 = 0.0;
    std::size_t best_epoch = 0;
};

struct StageRecord {
    std::string name;
    std::vector<EpochRecord> epochs;
    std::size_t best_epoch = 0;
    std::optional<double> best_val_accuracy;
};

struct TrainOptions {
    /// Workers for validation episodes; training steps are always sequential.
    std::size_t threads = 1;
    std::function<void(const EpochRecord&)> on_epoch;
    std::function<void(const StageRecord&, const net::Checkpoint&)> on_stage;
};

struct StageResult {
    net::Checkpoint best;
    StageRecord record;
};

/// Outcome of one eval-mode episode.
struct EpisodeOutcome {
    std::size_t correct = 0;
    std::size_t total = 0;
    std::vector<int> predictions;  // episode-local, aligned with episode.query
};

/// Eval-mode embedding, prototypes from the support set and nearest-prototype
/// predictions for the queries. Safe to call concurrently.
EpisodeOutcome evaluate_episode(const net::Backbone& backbone, const episodes::DatasetIndex& index,
                                const episodes::Episode& episode,
                                const std::optional<data::ChannelStats>& normalization);

/// Trains a copy of `start` on one stage and returns the parameters of the
/// epoch with the best validation accuracy (earliest on ties; the last epoch
/// when the stage has no validation tasks). Input normalization is inherited
/// from `start`, or computed from the stage's training classes when absent
/// and the stage holds images.
StageResult train_stage(const net::Checkpoint& start, const CurriculumStage& stage, const OptimizerConfig& optimizer,
                        std::uint64_t seed, const TrainOptions& options = {});

struct CurriculumResult {
    net::Checkpoint final;
    std::vector<StageRecord> stages;
};

/// Seed of stage `index` under `master_seed`.
std::uint64_t stage_seed(std::uint64_t master_seed, std::size_t index);

/// Runs the stages in order; each starts from the previous stage's best
/// checkpoint with fresh optimizer buffers.
CurriculumResult run_curriculum(const net::Checkpoint& initial, std::span<const CurriculumStage> stages,
                                const OptimizerConfig& optimizer, std::uint64_t master_seed,
                                const TrainOptions& options = {});

/// Deep copy; Checkpoint copies share parameter storage.
net::Checkpoint clone_checkpoint(const net::Checkpoint& checkpoint);

} // namespace protofs::train
