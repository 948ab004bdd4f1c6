#include "protofs/net/checkpoint.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "protofs/core/errors.hpp"

namespace protofs::net {

namespace {

constexpr char kMagic[6] = {'P', 'S', 'C', 'K', 'P', 'T'};
constexpr std::size_t kHeaderSize = 6 + 4 + 8;

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v, std::size_t bytes = 8) {
    for (std::size_t i = 0; i < bytes; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint64_t get_u64(std::span<const std::uint8_t> in, std::size_t offset, std::size_t bytes = 8) {
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(in[offset + i]) << (8 * i);
    return v;
}

std::string exact(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string join(const Shape& shape) {
    std::string s;
    for (auto d : shape) s += " " + std::to_string(d);
    return s;
}

std::string manifest_text(const Backbone& b, const std::optional<data::ChannelStats>& norm) {
    std::ostringstream m;
    const auto& cfg = b.config();
    m << "kind " << to_string(cfg.kind) << "\n";
    m << "input" << join(cfg.input) << "\n";
    m << "hidden" << join(cfg.hidden) << "\n";
    m << "filters " << cfg.filters << "\n";
    m << "embed_dim " << b.embed_dim() << "\n";
    m << "provenance " << b.provenance() << "\n";
    if (norm) {
        m << "normalization";
        for (double v : norm->mean) m << ' ' << exact(v);
        for (double v : norm->stddev) m << ' ' << exact(v);
        m << "\n";
    } else {
        m << "normalization none\n";
    }
    const auto arrays = b.manifest();
    m << "arrays " << arrays.size() << "\n";
    for (const auto& [name, shape] : arrays) m << "array " << name << join(shape) << "\n";
    return m.str();
}

struct ParsedManifest {
    BackboneConfig config;
    std::size_t embed_dim = 0;
    std::string provenance;
    std::optional<data::ChannelStats> normalization;
    std::vector<std::pair<std::string, Shape>> arrays;
};

std::vector<std::size_t> parse_sizes(std::istringstream& in) {
    std::vector<std::size_t> out;
    std::size_t v;
    while (in >> v) out.push_back(v);
    return out;
}

ParsedManifest parse_manifest(const std::string& text) {
    ParsedManifest pm;
    std::istringstream lines(text);
    std::string line;
    bool have_kind = false;
    while (std::getline(lines, line)) {
        std::istringstream in(line);
        std::string key;
        in >> key;
        if (key == "kind") {
            std::string name;
            in >> name;
            try {
                pm.config.kind = parse_backbone_kind(name);
            } catch (const ConfigError&) {
                throw FormatError("checkpoint: unknown backbone kind '" + name + "'");
            }
            have_kind = true;
        } else if (key == "input") {
            pm.config.input = parse_sizes(in);
        } else if (key == "hidden") {
            pm.config.hidden = parse_sizes(in);
        } else if (key == "filters") {
            in >> pm.config.filters;
        } else if (key == "embed_dim") {
            in >> pm.embed_dim;
        } else if (key == "provenance") {
            pm.provenance = line.size() > 11 ? line.substr(11) : "";
        } else if (key == "normalization") {
            const std::string values = line.substr(key.size());
            if (values.find("none") == std::string::npos) {
                data::ChannelStats s;
                std::istringstream rest(values);
                for (auto& v : s.mean) rest >> v;
                for (auto& v : s.stddev) rest >> v;
                if (!rest) throw FormatError("checkpoint: malformed normalization line");
                for (double v : s.stddev) s.degenerate = s.degenerate || v == 0.0;
                pm.normalization = s;
            }
        } else if (key == "array") {
            std::string name;
            in >> name;
            pm.arrays.emplace_back(name, parse_sizes(in));
        } else if (key == "arrays" || key.empty()) {
            continue;
        } else {
            throw FormatError("checkpoint: unknown manifest key '" + key + "'");
        }
    }
    if (!have_kind) throw FormatError("checkpoint: manifest lacks a backbone kind");
    return pm;
}

} // namespace

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (auto b : bytes) {
        h ^= b;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::vector<std::uint8_t> encode_checkpoint(const Backbone& backbone,
                                            const std::optional<data::ChannelStats>& normalization) {
    const auto manifest = manifest_text(backbone, normalization);
    std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
    put_u64(out, kCheckpointVersion, 4);
    put_u64(out, manifest.size());
    out.insert(out.end(), manifest.begin(), manifest.end());
    auto put_values = [&](std::span<const double> values) {
        for (double v : values) put_u64(out, std::bit_cast<std::uint64_t>(v));
    };
    for (const auto& p : backbone.parameters()) put_values(p.value.data());
    for (const auto& s : backbone.batchnorm_stats()) {
        put_values(s.stats.running_mean);
        put_values(s.stats.running_var);
    }
    put_u64(out, fnv1a64(out));
    return out;
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes, std::optional<BackboneKind> expected) {
    if (bytes.size() < 6 || std::memcmp(bytes.data(), kMagic, 6) != 0) {
        throw FormatError("checkpoint: bad magic bytes");
    }
    if (bytes.size() < kHeaderSize + 8) throw CorruptionError("checkpoint: file truncated");
    const auto version = static_cast<std::uint32_t>(get_u64(bytes, 6, 4));
    if (version != kCheckpointVersion) {
        throw FormatError("checkpoint: unsupported format version " + std::to_string(version));
    }
    const auto body = bytes.first(bytes.size() - 8);
    if (fnv1a64(body) != get_u64(bytes, bytes.size() - 8)) throw CorruptionError("checkpoint: checksum mismatch");

    const auto manifest_len = get_u64(bytes, 10);
    if (manifest_len > body.size() - kHeaderSize) throw CorruptionError("checkpoint: manifest overruns file");
    const std::string text(reinterpret_cast<const char*>(body.data() + kHeaderSize), manifest_len);
    auto pm = parse_manifest(text);

    if (expected && *expected != pm.config.kind) {
        throw FormatError("checkpoint: holds a " + to_string(pm.config.kind) + " backbone, expected " +
                          to_string(*expected));
    }
    Backbone backbone;
    try {
        backbone = build(pm.config, 0);
    } catch (const ConfigError& e) {
        throw FormatError(std::string("checkpoint: inconsistent configuration: ") + e.what());
    }
    if (backbone.embed_dim() != pm.embed_dim || backbone.manifest() != pm.arrays) {
        throw FormatError("checkpoint: manifest shapes do not match the " + to_string(pm.config.kind) + " layout");
    }
    std::size_t total = 0;
    for (const auto& a : pm.arrays) total += shape_size(a.second);
    std::size_t offset = kHeaderSize + manifest_len;
    if (body.size() - offset != total * 8) throw CorruptionError("checkpoint: array payload size mismatch");

    auto read_into = [&](std::span<double> dst) {
        for (auto& v : dst) {
            v = std::bit_cast<double>(get_u64(bytes, offset));
            offset += 8;
        }
    };
    for (auto& p : backbone.parameters()) read_into(p.value.data());
    for (auto& s : backbone.batchnorm_stats()) {
        read_into(s.stats.running_mean);
        read_into(s.stats.running_var);
    }
    backbone.set_provenance(pm.provenance);
    return Checkpoint{std::move(backbone), pm.normalization};
}

void save_checkpoint(const Backbone& backbone, const std::filesystem::path& path,
                     const std::optional<data::ChannelStats>& normalization) {
    const auto bytes = encode_checkpoint(backbone, normalization);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write checkpoint " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw ConfigError("cannot write checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path, std::optional<BackboneKind> expected) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open checkpoint " + path.string());
    const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_checkpoint(bytes, expected);
}

} // namespace protofs::net
