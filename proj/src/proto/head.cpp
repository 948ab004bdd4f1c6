#include "protofs/proto/head.hpp"

#include "protofs/core/errors.hpp"

namespace protofs::proto {

PrototypeSet compute_prototypes(Tape& tape, const Tensor& support_embeddings, std::span<const int> support_labels,
                                std::size_t way) {
    if (support_embeddings.rank() != 2 || support_embeddings.dim(0) != support_labels.size()) {
        throw DimensionError("compute_prototypes: " + std::to_string(support_labels.size()) + " labels for embeddings " +
                             shape_string(support_embeddings.shape()));
    }
    if (way == 0) throw EpisodeMalformedError("compute_prototypes: episode has no classes");
    const auto n = support_labels.size();
    std::vector<double> counts(way, 0.0);
    for (int label : support_labels) {
        if (label < 0 || static_cast<std::size_t>(label) >= way) {
            throw LabelError("compute_prototypes: label " + std::to_string(label) + " outside [0," +
                             std::to_string(way) + ")");
        }
        counts[static_cast<std::size_t>(label)] += 1.0;
    }
    for (std::size_t k = 0; k < way; ++k) {
        if (counts[k] == 0.0) throw EpisodeMalformedError("compute_prototypes: class " + std::to_string(k) + " has no support");
    }
    // Averaging operator [K, N]; prototypes = A * embeddings.
    std::vector<double> avg(way * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const auto k = static_cast<std::size_t>(support_labels[i]);
        avg[k * n + i] = 1.0 / counts[k];
    }
    PrototypeSet set;
    set.prototypes = matmul(tape, Tensor({way, n}, std::move(avg)), support_embeddings);
    for (std::size_t k = 0; k < way; ++k) set.class_map.push_back(static_cast<int>(k));
    return set;
}

Classification classify(Tape& tape, const Tensor& query_embeddings, const PrototypeSet& protos) {
    Classification out;
    out.sq_distances = sq_dist_matrix(tape, query_embeddings, protos.prototypes);
    out.log_probs = log_softmax(tape, scale(tape, out.sq_distances, -1.0));
    const auto m = out.sq_distances.dim(0), k = out.sq_distances.dim(1);
    out.predictions.resize(m);
    for (std::size_t i = 0; i < m; ++i) {
        std::size_t best = 0;
        for (std::size_t j = 1; j < k; ++j) {
            if (out.sq_distances[i * k + j] < out.sq_distances[i * k + best]) best = j;
        }
        out.predictions[i] = protos.class_map[best];
    }
    return out;
}

Tensor episode_loss(Tape& tape, const Tensor& log_probs, std::span<const int> query_labels) {
    return nll_loss(tape, log_probs, query_labels);
}

double episode_accuracy(std::span<const int> predictions, std::span<const int> query_labels) {
    if (predictions.size() != query_labels.size()) {
        throw DimensionError("episode_accuracy: " + std::to_string(predictions.size()) + " predictions for " +
                             std::to_string(query_labels.size()) + " labels");
    }
    if (predictions.empty()) throw ContractError("episode_accuracy: no queries");
    std::size_t correct = 0;
    for (std::size_t i = 0; i < predictions.size(); ++i) correct += predictions[i] == query_labels[i];
    return static_cast<double>(correct) / static_cast<double>(predictions.size());
}

} // namespace protofs::proto
