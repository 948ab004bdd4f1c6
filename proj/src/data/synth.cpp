#include "protofs/data/synth.hpp"

#include <cmath>

#include <Eigen/LU>

#include "protofs/core/errors.hpp"
#include "protofs/core/rng.hpp"

namespace protofs::data {

namespace {

constexpr std::uint64_t kMeanStream = 0x6d65616e;
constexpr std::uint64_t kNoiseStream = 0x6e6f6973;
constexpr std::uint64_t kShiftStream = 0x73686674;

void check(const SynthDomainSpec& spec) {
    if (spec.n_classes == 0 || spec.feature_dim == 0) throw ConfigError("synthetic domain needs classes and features");
    if (spec.signal_dim > spec.feature_dim) throw ConfigError("signal_dim cannot exceed feature_dim");
    if (!(spec.class_separation >= 0.0) || !(spec.noise_scale >= 0.0)) {
        throw ConfigError("class_separation and noise_scale must be non-negative");
    }
}

} // namespace

DomainTransform domain_transform(const SynthDomainSpec& spec) {
    check(spec);
    const auto d = static_cast<Eigen::Index>(spec.feature_dim);
    Rng rng(spec.shift.seed, kShiftStream);
    Eigen::MatrixXd skew = Eigen::MatrixXd::Zero(d, d);
    const double scale = 1.0 / std::sqrt(static_cast<double>(d));
    for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = i + 1; j < d; ++j) {
            skew(i, j) = rng.normal() * scale;
            skew(j, i) = -skew(i, j);
        }
    Eigen::VectorXd direction(d);
    for (Eigen::Index i = 0; i < d; ++i) direction(i) = rng.normal();
    direction.normalize();

    const Eigen::MatrixXd half = 0.5 * spec.shift.rotation * skew;
    const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(d, d);
    DomainTransform t;
    t.rotation = (identity - half).partialPivLu().solve(identity + half);
    t.translation = spec.shift.translation * direction;
    return t;
}

Eigen::MatrixXd class_means(const SynthDomainSpec& spec) {
    check(spec);
    const auto signal = spec.signal_dim == 0 ? spec.feature_dim : spec.signal_dim;
    // Each coordinate ~ N(0, sep^2 / (2 m)) so that E|mu_a - mu_b|^2 = sep^2.
    const double sd = spec.class_separation / std::sqrt(2.0 * static_cast<double>(signal));
    Eigen::MatrixXd means = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(spec.n_classes),
                                                  static_cast<Eigen::Index>(spec.feature_dim));
    const Rng root(spec.seed, kMeanStream);
    for (std::size_t c = 0; c < spec.n_classes; ++c) {
        Rng rng = root.split(c);
        for (std::size_t j = 0; j < signal; ++j)
            means(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(j)) = sd * rng.normal();
    }
    return means;
}

episodes::DatasetIndex synth_generate(const SynthDomainSpec& spec, std::size_t items_per_class) {
    if (items_per_class == 0) throw ConfigError("synthetic domain needs at least one item per class");
    const auto transform = domain_transform(spec);
    const Eigen::MatrixXd means = class_means(spec);
    const auto d = static_cast<Eigen::Index>(spec.feature_dim);
    const double noise_sd = spec.noise_scale / std::sqrt(static_cast<double>(spec.feature_dim));

    episodes::DatasetIndex index;
    index.name = spec.name;
    index.modality = episodes::Modality::FeatureVector;
    index.features.resize(static_cast<Eigen::Index>(spec.n_classes * items_per_class), d);
    const Rng noise_root(spec.seed, kNoiseStream);
    for (std::size_t c = 0; c < spec.n_classes; ++c) {
        const Eigen::VectorXd centre =
            transform.rotation * means.row(static_cast<Eigen::Index>(c)).transpose() + transform.translation;
        const Rng class_rng = noise_root.split(c);
        std::vector<episodes::SampleRef> refs;
        for (std::size_t i = 0; i < items_per_class; ++i) {
            Rng rng = class_rng.split(i);
            const auto row = static_cast<Eigen::Index>(c * items_per_class + i);
            for (Eigen::Index j = 0; j < d; ++j) index.features(row, j) = centre(j) + noise_sd * rng.normal();
            refs.push_back(static_cast<episodes::SampleRef>(row));
            index.paths.push_back(spec.name + "/c" + std::to_string(c) + "/" + std::to_string(i));
        }
        index.classes.push_back("c" + std::to_string(c));
        index.items.push_back(std::move(refs));
    }
    index.validate();
    return index;
}

} // namespace protofs::data
