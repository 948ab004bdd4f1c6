#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "protofs/data/image.hpp"
#include "protofs/net/backbone.hpp"

namespace protofs::net {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
    Backbone backbone;
    /// Input normalization derived from the training split, when images were used.
    std::optional<data::ChannelStats> normalization;
};

// Layout: "PSCKPT", u32 version, u64 manifest length, UTF-8 manifest text,
// little-endian f64 arrays in manifest order, u64 FNV-1a of all prior bytes.

std::vector<std::uint8_t> encode_checkpoint(const Backbone& backbone,
                                            const std::optional<data::ChannelStats>& normalization = {});

/// Throws FormatError for a foreign file, unknown version, kind mismatch or
/// shape mismatch; CorruptionError for truncation or a checksum mismatch.
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes, std::optional<BackboneKind> expected = {});

void save_checkpoint(const Backbone& backbone, const std::filesystem::path& path,
                     const std::optional<data::ChannelStats>& normalization = {});
Checkpoint load_checkpoint(const std::filesystem::path& path, std::optional<BackboneKind> expected = {});

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes);

} // namespace protofs::net
