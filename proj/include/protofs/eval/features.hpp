#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "protofs/episodes/dataset_index.hpp"
#include "protofs/net/checkpoint.hpp"

namespace protofs::eval {

struct FeatureTable {
    std::vector<std::string> labels;
    std::vector<std::string> splits;
    Eigen::MatrixXd features;  // one row per sample
};

/// Eval-mode embeddings of every sample, in index order. Samples of classes
/// in `split` are tagged "train" or "val"; all others "all".
FeatureTable export_features(const net::Checkpoint& checkpoint, const episodes::DatasetIndex& index,
                             const std::optional<episodes::Split>& split = {}, std::size_t threads = 1);

/// CSV `label,split,f0..f{D-1}` with round-trip precision.
void write_feature_csv(const FeatureTable& table, const std::filesystem::path& path);

struct PcaResult {
    /// Projections, one row per sample and one column per kept component.
    Eigen::MatrixXd coords;
    /// Leading components as columns; the largest-magnitude entry of each is positive.
    Eigen::MatrixXd components;
    /// Variance along each requested component, also when it was dropped.
    Eigen::VectorXd variances;
    /// variances / total variance.
    Eigen::VectorXd explained_ratio;
    std::size_t requested = 0;
    bool reduced = false;
};

/// Covariance eigendecomposition. When the data have fewer than `dims`
/// directions of non-negligible variance, only those are kept and `reduced`
/// is set.
PcaResult project_pca(const Eigen::MatrixXd& features, std::size_t dims = 2);

/// CSV `label,x,y` (fewer coordinate columns when the projection was reduced).
void write_projection_csv(const std::vector<std::string>& labels, const PcaResult& pca,
                          const std::filesystem::path& path);

} // namespace protofs::eval
