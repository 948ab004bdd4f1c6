#include "protofs/data/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>

#include "protofs/core/errors.hpp"
#include "protofs/core/log.hpp"

namespace protofs::data {

void ImageRecord::validate() const {
    if (width == 0 || height == 0) throw FormatError("image has zero extent");
    if (channels != 1 && channels != 3) throw FormatError("image must have 1 or 3 channels");
    if (maxval == 0 || maxval > 255) throw FormatError("image maxval must be in [1,255]");
    if (pixels.size() != width * height * channels) throw FormatError("pixel buffer does not match image extent");
}

namespace {

class HeaderReader {
public:
    explicit HeaderReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    std::size_t number() {
        skip_space_and_comments();
        std::size_t value = 0;
        std::size_t digits = 0;
        while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
            value = value * 10 + (bytes_[pos_++] - '0');
            if (++digits > 9) throw FormatError("pnm: header number too large");
        }
        if (digits == 0) throw FormatError("pnm: malformed header");
        return value;
    }

    std::size_t position() const { return pos_; }
    void advance() { ++pos_; }

private:
    void skip_space_and_comments() {
        while (pos_ < bytes_.size()) {
            if (std::isspace(bytes_[pos_])) {
                ++pos_;
            } else if (bytes_[pos_] == '#') {
                while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
            } else {
                break;
            }
        }
    }

    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 2;
};

} // namespace

ImageRecord decode_pnm(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) {
        throw FormatError("pnm: expected binary P5 or P6 magic");
    }
    ImageRecord img;
    img.channels = bytes[1] == '6' ? 3 : 1;
    HeaderReader header(bytes);
    img.width = header.number();
    img.height = header.number();
    const auto maxval = header.number();
    if (img.width == 0 || img.height == 0) throw FormatError("pnm: zero extent");
    if (maxval == 0 || maxval > 255) throw FormatError("pnm: only 8-bit maxval is supported");
    if (header.position() >= bytes.size() || !std::isspace(bytes[header.position()])) {
        throw FormatError("pnm: missing separator before raster");
    }
    header.advance();
    const auto need = img.width * img.height * img.channels;
    if (bytes.size() - header.position() < need) throw FormatError("pnm: truncated raster");
    const auto first = bytes.begin() + static_cast<std::ptrdiff_t>(header.position());
    img.pixels.assign(first, first + static_cast<std::ptrdiff_t>(need));
    img.maxval = maxval;
    for (auto p : img.pixels) {
        if (p > maxval) throw FormatError("pnm: sample exceeds maxval");
    }
    return img;
}

std::vector<std::uint8_t> encode_pnm(const ImageRecord& image) {
    image.validate();
    const std::string header = std::string(image.channels == 3 ? "P6" : "P5") + "\n" + std::to_string(image.width) +
                               " " + std::to_string(image.height) + "\n" +
                               std::to_string(image.maxval) + "\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.insert(out.end(), image.pixels.begin(), image.pixels.end());
    return out;
}

ImageRecord read_pnm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_pnm(bytes);
}

void write_pnm(const ImageRecord& image, const std::filesystem::path& path) {
    const auto bytes = encode_pnm(image);
    std::ofstream out(path, std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw FormatError("cannot write " + path.string());
}

ChannelStats channel_stats(std::span<const ImageRecord> images) {
    if (images.empty()) throw ConfigError("channel statistics need at least one image");
    std::array<double, 3> sum{}, sum_sq{};
    std::array<double, 3> count{};
    for (const auto& img : images) {
        img.validate();
        const auto n = img.width * img.height;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t c = 0; c < 3; ++c) {
                const double v = img.pixels[i * img.channels + (img.channels == 3 ? c : 0)] / static_cast<double>(img.maxval);
                sum[c] += v;
                sum_sq[c] += v * v;
                count[c] += 1.0;
            }
        }
    }
    ChannelStats stats;
    for (std::size_t c = 0; c < 3; ++c) {
        stats.mean[c] = sum[c] / count[c];
        const double var = std::max(0.0, sum_sq[c] / count[c] - stats.mean[c] * stats.mean[c]);
        stats.stddev[c] = std::sqrt(var);
        if (stats.stddev[c] == 0.0) stats.degenerate = true;
    }
    return stats;
}

std::vector<double> resize_bilinear(const ImageRecord& image, std::size_t out_width, std::size_t out_height) {
    image.validate();
    std::vector<double> out(3 * out_width * out_height);
    const double sx = static_cast<double>(image.width) / static_cast<double>(out_width);
    const double sy = static_cast<double>(image.height) / static_cast<double>(out_height);
    const auto max_x = static_cast<double>(image.width - 1);
    const auto max_y = static_cast<double>(image.height - 1);
    for (std::size_t y = 0; y < out_height; ++y) {
        const double fy = std::clamp((static_cast<double>(y) + 0.5) * sy - 0.5, 0.0, max_y);
        const auto y0 = static_cast<std::size_t>(fy);
        const auto y1 = std::min(y0 + 1, image.height - 1);
        const double wy = fy - static_cast<double>(y0);
        for (std::size_t x = 0; x < out_width; ++x) {
            const double fx = std::clamp((static_cast<double>(x) + 0.5) * sx - 0.5, 0.0, max_x);
            const auto x0 = static_cast<std::size_t>(fx);
            const auto x1 = std::min(x0 + 1, image.width - 1);
            const double wx = fx - static_cast<double>(x0);
            for (std::size_t c = 0; c < 3; ++c) {
                const auto src = image.channels == 3 ? c : 0;
                const double top = (1.0 - wx) * image.at(x0, y0, src) + wx * image.at(x1, y0, src);
                const double bottom = (1.0 - wx) * image.at(x0, y1, src) + wx * image.at(x1, y1, src);
                out[(c * out_height + y) * out_width + x] = ((1.0 - wy) * top + wy * bottom) / static_cast<double>(image.maxval);
            }
        }
    }
    return out;
}

Tensor preprocess(const ImageRecord& image, const ChannelStats& stats, std::size_t side) {
    auto values = resize_bilinear(image, side, side);
    const auto plane = side * side;
    for (std::size_t c = 0; c < 3; ++c) {
        double sd = stats.stddev[c];
        if (!(sd > 0.0)) {
            log_warning("preprocess: channel " + std::to_string(c) + " has zero stddev; using 1");
            sd = 1.0;
        }
        for (std::size_t i = 0; i < plane; ++i) {
            auto& v = values[c * plane + i];
            v = (v - stats.mean[c]) / sd;
        }
    }
    return Tensor({3, side, side}, std::move(values));
}

} // namespace protofs::data
