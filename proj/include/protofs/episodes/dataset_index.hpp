#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "protofs/data/image.hpp"

namespace protofs::episodes {

enum class Modality { Image, FeatureVector };

/// Position of one sample in its index's storage (image or feature row).
using SampleRef = std::uint32_t;

/// Labelled collection of samples grouped by class.
///
/// Images are held decoded in `images`; feature vectors are rows of
/// `features`. `paths[ref]` records where a sample came from.
struct DatasetIndex {
    std::string name;
    Modality modality = Modality::FeatureVector;
    std::vector<std::string> classes;
    std::vector<std::vector<SampleRef>> items;

    std::vector<std::string> paths;
    std::vector<data::ImageRecord> images;
    Eigen::MatrixXd features;

    std::size_t num_classes() const { return classes.size(); }
    std::size_t num_samples() const;
    /// Class labels unique, every class non-empty, refs in range.
    void validate() const;
    /// Stable content hash over labels, membership and feature values.
    std::uint64_t content_hash() const;
};

/// Disjoint class subsets of one index (class positions, not labels).
struct Split {
    std::vector<std::size_t> train_classes;
    std::vector<std::size_t> val_classes;
};

/// Seeded shuffle of the class list; the first n_train classes train.
Split make_split(const DatasetIndex& index, std::size_t n_train_classes, std::uint64_t seed);

/// The classes of one index that episodes may be drawn from.
struct ClassView {
    const DatasetIndex* index = nullptr;
    std::vector<std::size_t> classes;
};

ClassView all_classes(const DatasetIndex& index);
ClassView train_side(const DatasetIndex& index, const Split& split);
ClassView val_side(const DatasetIndex& index, const Split& split);

} // namespace protofs::episodes
