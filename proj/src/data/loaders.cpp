#include "protofs/data/loaders.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "protofs/core/errors.hpp"
#include "protofs/core/log.hpp"

namespace protofs::data {

namespace fs = std::filesystem;
using episodes::DatasetIndex;
using episodes::Modality;
using episodes::SampleRef;

namespace {

bool has_pnm_extension(const fs::path& p) {
    auto ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext == ".ppm" || ext == ".pgm";
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

double parse_number(const std::string& text, std::size_t line_no) {
    std::string trimmed = text;
    trimmed.erase(0, trimmed.find_first_not_of(" \t\r"));
    trimmed.erase(trimmed.find_last_not_of(" \t\r") + 1);
    double value = 0.0;
    const auto* first = trimmed.data();
    const auto* last = first + trimmed.size();
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (trimmed.empty() || ec != std::errc() || ptr != last) {
        throw FormatError("feature table line " + std::to_string(line_no) + ": non-numeric feature '" + text + "'");
    }
    return value;
}

} // namespace

DatasetIndex load_image_folder(const fs::path& root) {
    if (!fs::is_directory(root)) throw IndexingError("image folder " + root.string() + " is not a directory");
    DatasetIndex index;
    index.name = root.filename().string();
    if (index.name.empty()) index.name = root.parent_path().filename().string();
    index.modality = Modality::Image;

    std::vector<fs::path> class_dirs;
    for (const auto& entry : fs::directory_iterator(root)) {
        if (entry.is_directory()) class_dirs.push_back(entry.path());
    }
    std::sort(class_dirs.begin(), class_dirs.end());
    for (const auto& dir : class_dirs) {
        std::vector<fs::path> files;
        for (const auto& entry : fs::directory_iterator(dir)) {
            if (entry.is_regular_file()) files.push_back(entry.path());
        }
        std::sort(files.begin(), files.end());
        std::vector<SampleRef> refs;
        for (const auto& file : files) {
            if (!has_pnm_extension(file)) {
                log_warning("skipping non-image file " + file.string());
                continue;
            }
            try {
                auto img = read_pnm(file);
                refs.push_back(static_cast<SampleRef>(index.images.size()));
                index.images.push_back(std::move(img));
                index.paths.push_back(file.string());
            } catch (const FormatError& e) {
                log_warning("skipping unreadable image " + file.string() + ": " + e.what());
            }
        }
        if (refs.empty()) throw IndexingError("class '" + dir.filename().string() + "' has no readable images");
        index.classes.push_back(dir.filename().string());
        index.items.push_back(std::move(refs));
    }
    if (index.classes.empty()) throw IndexingError("image folder " + root.string() + " has no class directories");
    index.validate();
    return index;
}

DatasetIndex load_feature_table(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IndexingError("cannot open feature table " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw FormatError("feature table " + path.string() + " is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto header = split_csv_line(line);
    if (header.size() < 2 || header[0] != "label") throw FormatError("feature table header must start with 'label'");
    const std::size_t first_feature = header[1] == "split" ? 2 : 1;
    const std::size_t dim = header.size() - first_feature;
    if (dim == 0) throw FormatError("feature table has no feature columns");
    for (std::size_t j = 0; j < dim; ++j) {
        if (header[first_feature + j] != "f" + std::to_string(j)) {
            throw FormatError("feature table header column " + std::to_string(first_feature + j + 1) + " must be f" +
                              std::to_string(j));
        }
    }

    DatasetIndex index;
    index.name = path.stem().string();
    index.modality = Modality::FeatureVector;
    std::vector<double> flat;
    std::vector<std::string> labels;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != header.size()) {
            throw FormatError("feature table line " + std::to_string(line_no) + ": ragged row with " +
                              std::to_string(cells.size()) + " cells, expected " + std::to_string(header.size()));
        }
        labels.push_back(cells[0]);
        for (std::size_t j = 0; j < dim; ++j) flat.push_back(parse_number(cells[first_feature + j], line_no));
    }
    if (labels.empty()) throw IndexingError("feature table " + path.string() + " has no rows");

    index.features.resize(static_cast<Eigen::Index>(labels.size()), static_cast<Eigen::Index>(dim));
    for (std::size_t r = 0; r < labels.size(); ++r)
        for (std::size_t j = 0; j < dim; ++j)
            index.features(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = flat[r * dim + j];

    // Classes in order of first appearance.
    for (std::size_t r = 0; r < labels.size(); ++r) {
        auto it = std::find(index.classes.begin(), index.classes.end(), labels[r]);
        std::size_t c = static_cast<std::size_t>(it - index.classes.begin());
        if (it == index.classes.end()) {
            index.classes.push_back(labels[r]);
            index.items.emplace_back();
        }
        index.items[c].push_back(static_cast<SampleRef>(r));
        index.paths.push_back(path.string() + ":" + std::to_string(r + 2));
    }
    index.validate();
    return index;
}

ChannelStats compute_channel_stats(const DatasetIndex& index, std::span<const std::size_t> classes) {
    if (index.modality != Modality::Image) throw ConfigError(index.name + ": channel statistics need an image dataset");
    std::vector<ImageRecord> images;
    for (auto c : classes)
        for (auto ref : index.items.at(c)) images.push_back(index.images[ref]);
    if (images.empty()) throw ConfigError(index.name + ": channel statistics over an empty split");
    auto stats = channel_stats(images);
    if (stats.degenerate) log_warning(index.name + ": a channel has zero spread in the training split");
    return stats;
}

Tensor gather_inputs(const DatasetIndex& index, std::span<const SampleRef> refs,
                     const std::optional<ChannelStats>& stats, std::size_t side) {
    if (refs.empty()) throw ContractError("gather_inputs: no samples requested");
    if (index.modality == Modality::FeatureVector) {
        const auto dim = static_cast<std::size_t>(index.features.cols());
        std::vector<double> data(refs.size() * dim);
        for (std::size_t i = 0; i < refs.size(); ++i)
            for (std::size_t j = 0; j < dim; ++j)
                data[i * dim + j] = index.features(static_cast<Eigen::Index>(refs[i]), static_cast<Eigen::Index>(j));
        return Tensor({refs.size(), dim}, std::move(data));
    }
    ChannelStats norm = stats.value_or(ChannelStats{});
    for (std::size_t c = 0; c < 3; ++c) {
        if (!(norm.stddev[c] > 0.0)) {
            log_warning(index.name + ": channel " + std::to_string(c) + " has zero stddev; using 1");
            norm.stddev[c] = 1.0;
        }
    }
    const auto per = 3 * side * side;
    std::vector<double> data(refs.size() * per);
    for (std::size_t i = 0; i < refs.size(); ++i) {
        const auto t = preprocess(index.images.at(refs[i]), norm, side);
        std::copy(t.data().begin(), t.data().end(), data.begin() + static_cast<std::ptrdiff_t>(i * per));
    }
    return Tensor({refs.size(), 3, side, side}, std::move(data));
}

} // namespace protofs::data
