#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "protofs/diff/ops.hpp"

namespace protofs::proto {

/// One centroid per episode class; row k belongs to class_map[k].
struct PrototypeSet {
    Tensor prototypes;  // [K, D]
    std::vector<int> class_map;
};

/// Row k is the mean of the support embeddings labelled k. Differentiable.
/// Throws EpisodeMalformedError when a label in [0, K) has no support.
PrototypeSet compute_prototypes(Tape& tape, const Tensor& support_embeddings, std::span<const int> support_labels,
                                std::size_t way);

struct Classification {
    Tensor log_probs;              // [M, K]
    Tensor sq_distances;           // [M, K]
    std::vector<int> predictions;  // nearest prototype, lowest index on ties
};

/// Logits are negative squared Euclidean distances to the prototypes.
Classification classify(Tape& tape, const Tensor& query_embeddings, const PrototypeSet& protos);

Tensor episode_loss(Tape& tape, const Tensor& log_probs, std::span<const int> query_labels);

/// Fraction of predictions equal to their label.
double episode_accuracy(std::span<const int> predictions, std::span<const int> query_labels);

} // namespace protofs::proto
