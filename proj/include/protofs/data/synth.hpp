#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include <Eigen/Core>

#include "protofs/episodes/dataset_index.hpp"

namespace protofs::data {

/// Rigid shift applied to a whole domain. `rotation` is the strength of a
/// Cayley rotation along a direction fixed by `seed`; `translation` is the
/// length of the offset. Domains sharing a seed lie on one path, so a larger
/// strength means a larger shift from the base domain.
struct DomainShift {
    double rotation = 0.0;
    double translation = 0.0;
    std::uint64_t seed = 0;
};

/// Gaussian class clusters. `class_separation` is the expected distance
/// between two class means and `noise_scale` the expected norm of a sample's
/// noise vector, so their ratio does not depend on feature_dim. Means vary
/// only in the first `signal_dim` coordinates (0 means all of them).
struct SynthDomainSpec {
    std::string name = "synthetic";
    std::size_t n_classes = 5;
    std::size_t feature_dim = 16;
    std::size_t signal_dim = 0;
    double class_separation = 4.0;
    double noise_scale = 1.0;
    DomainShift shift;
    std::uint64_t seed = 0;
};

struct DomainTransform {
    Eigen::MatrixXd rotation;
    Eigen::VectorXd translation;
};

DomainTransform domain_transform(const SynthDomainSpec& spec);

/// Untransformed class means, one row per class.
Eigen::MatrixXd class_means(const SynthDomainSpec& spec);

/// x = R * mean_c + t + noise, deterministic in the spec.
episodes::DatasetIndex synth_generate(const SynthDomainSpec& spec, std::size_t items_per_class);

} // namespace protofs::data
