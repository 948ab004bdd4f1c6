#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>

#include "protofs/data/image.hpp"
#include "protofs/episodes/dataset_index.hpp"

namespace protofs::data {

/// `<root>/<class>/<file>.ppm|pgm`. Classes and files are sorted by name.
/// Unreadable or non-PNM files are skipped with a warning; a class left
/// empty is an IndexingError.
episodes::DatasetIndex load_image_folder(const std::filesystem::path& root);

/// CSV with header `label,f0..f{D-1}`; a `label,split,f0..` header (as written
/// by feature export) is also accepted and the split column ignored.
episodes::DatasetIndex load_feature_table(const std::filesystem::path& path);

/// Population statistics over the images of the given classes.
ChannelStats compute_channel_stats(const episodes::DatasetIndex& index, std::span<const std::size_t> classes);

/// Stacks samples into one input batch: [N, D] for feature tables, [N, 3, side, side]
/// for images (preprocessed with `stats`, identity statistics when absent).
Tensor gather_inputs(const episodes::DatasetIndex& index, std::span<const episodes::SampleRef> refs,
                     const std::optional<ChannelStats>& stats = {}, std::size_t side = 84);

} // namespace protofs::data
