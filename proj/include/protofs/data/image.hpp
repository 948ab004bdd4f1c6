#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "protofs/diff/tensor.hpp"

namespace protofs::data {

/// 8-bit image, row-major, channels interleaved.
struct ImageRecord {
    std::size_t width = 0;
    std::size_t height = 0;
    std::size_t channels = 0;  // 1 or 3
    std::size_t maxval = 255;  // samples scale to [0,1] by this value
    std::vector<std::uint8_t> pixels;

    std::uint8_t at(std::size_t x, std::size_t y, std::size_t c) const {
        return pixels[(y * width + x) * channels + c];
    }
    void validate() const;
};

/// Binary PGM (P5) or PPM (P6) with maxval <= 255.
ImageRecord decode_pnm(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_pnm(const ImageRecord& image);
ImageRecord read_pnm(const std::filesystem::path& path);
void write_pnm(const ImageRecord& image, const std::filesystem::path& path);

/// Per-channel mean and standard deviation on the [0,1] pixel scale.
struct ChannelStats {
    std::array<double, 3> mean{0.0, 0.0, 0.0};
    std::array<double, 3> stddev{1.0, 1.0, 1.0};
    /// Set when some channel has zero spread.
    bool degenerate = false;
};

/// Accumulates population statistics; grayscale images count toward all three channels.
ChannelStats channel_stats(std::span<const ImageRecord> images);

/// Bilinear resize on [0,1] values with half-pixel centres; returns [3, height, width].
std::vector<double> resize_bilinear(const ImageRecord& image, std::size_t out_width, std::size_t out_height);

/// Resize to side x side, replicate grayscale to three channels, scale to
/// [0,1] and standardize per channel. Zero stddev is replaced by 1 with a warning.
Tensor preprocess(const ImageRecord& image, const ChannelStats& stats, std::size_t side = 84);

} // namespace protofs::data
