#include "protofs/episodes/dataset_index.hpp"

#include <cstring>
#include <numeric>
#include <set>

#include "protofs/core/errors.hpp"
#include "protofs/core/rng.hpp"

namespace protofs::episodes {

std::size_t DatasetIndex::num_samples() const {
    return modality == Modality::Image ? images.size() : static_cast<std::size_t>(features.rows());
}

void DatasetIndex::validate() const {
    if (classes.size() != items.size()) throw IndexingError(name + ": class list and item lists disagree");
    std::set<std::string> seen;
    const auto total = num_samples();
    for (std::size_t c = 0; c < classes.size(); ++c) {
        if (!seen.insert(classes[c]).second) throw IndexingError(name + ": duplicate class label '" + classes[c] + "'");
        if (items[c].empty()) throw IndexingError(name + ": class '" + classes[c] + "' has no items");
        for (auto ref : items[c]) {
            if (ref >= total) throw IndexingError(name + ": sample reference out of range in '" + classes[c] + "'");
        }
    }
}

std::uint64_t DatasetIndex::content_hash() const {
    std::uint64_t h = mix64(classes.size());
    auto absorb = [&h](std::uint64_t v) { h = mix64(h ^ (v + 0x9E3779B97F4A7C15ULL + (h << 6) + (h >> 2))); };
    for (std::size_t c = 0; c < classes.size(); ++c) {
        for (unsigned char ch : classes[c]) absorb(ch);
        absorb(items[c].size());
        for (auto ref : items[c]) absorb(ref);
    }
    for (Eigen::Index i = 0; i < features.size(); ++i) {
        std::uint64_t bits;
        const double v = features.data()[i];
        std::memcpy(&bits, &v, sizeof bits);
        absorb(bits);
    }
    for (const auto& img : images) {
        absorb(img.width);
        absorb(img.height);
        absorb(img.channels);
        absorb(img.maxval);
        for (auto p : img.pixels) absorb(p);
    }
    return h;
}

Split make_split(const DatasetIndex& index, std::size_t n_train_classes, std::uint64_t seed) {
    const auto total = index.num_classes();
    if (n_train_classes >= total) {
        throw ConfigError(index.name + ": " + std::to_string(n_train_classes) + " training classes leave no validation class out of " +
                          std::to_string(total));
    }
    std::vector<std::size_t> order(total);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed, 0x73706c6974);
    rng.shuffle(std::span<std::size_t>(order));
    Split split;
    split.train_classes.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train_classes));
    split.val_classes.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train_classes), order.end());
    return split;
}

ClassView all_classes(const DatasetIndex& index) {
    ClassView v{&index, std::vector<std::size_t>(index.num_classes())};
    std::iota(v.classes.begin(), v.classes.end(), std::size_t{0});
    return v;
}

ClassView train_side(const DatasetIndex& index, const Split& split) { return {&index, split.train_classes}; }
ClassView val_side(const DatasetIndex& index, const Split& split) { return {&index, split.val_classes}; }

} // namespace protofs::episodes
